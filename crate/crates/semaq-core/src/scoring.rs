//! Result scoring: cohesiveness from subtree distance, total score from
//! query similarity times cohesiveness.

/// Tuning parameter must exceed 1 for `log_alpha` to rank distances.
#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
#[error("alpha must be a finite number greater than 1, got {0}")]
pub struct InvalidAlpha(pub f64);

pub fn validate_alpha(alpha: f64) -> Result<(), InvalidAlpha> {
    if alpha.is_finite() && alpha > 1.0 {
        Ok(())
    } else {
        Err(InvalidAlpha(alpha))
    }
}

/// θ = 1 / (log_alpha(distance + 1) + 1). Strictly decreasing in the
/// distance, 1 at distance 0, and increasing in alpha for fixed positive
/// distance.
pub fn cohesiveness(distance: u64, alpha: f64) -> f64 {
    debug_assert!(alpha > 1.0);
    1.0 / ((distance as f64 + 1.0).ln() / alpha.ln() + 1.0)
}

/// (θ, σ) for a result at `distance` produced by a query with similarity
/// `sim`.
pub fn score(sim: f64, distance: u64, alpha: f64) -> (f64, f64) {
    let theta = cohesiveness(distance, alpha);
    (theta, sim * theta)
}
