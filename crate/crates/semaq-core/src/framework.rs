//! Top-level search: diagnose the query, expand it, execute candidates in
//! descending similarity with inter-query pruning, and rank the surviving
//! results.

use std::sync::Arc;

use crate::batch::run_batched;
use crate::engine::{
    process_query_an, process_query_bl, process_query_se, ranks, EngineKind, EngineStats,
    PruningConfig, ResultSubtree, TopK,
};
use crate::index::{InvertedIndex, PostingList};
use crate::ontology::Taxonomy;
use crate::query::{diagnose, generate, CandidateQuery, OriginalQuery, QueryClass, DEFAULT_QUERY_CAP};
use crate::scoring::validate_alpha;

#[derive(Debug, Clone)]
pub struct SearchConfig {
    pub alpha: f64,
    pub k: usize,
    pub engine: EngineKind,
    pub pruning: PruningConfig,
    pub query_cap: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            alpha: 4.0,
            k: 10,
            engine: EngineKind::Se,
            pruning: PruningConfig::default(),
            query_cap: DEFAULT_QUERY_CAP,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum FrameworkError {
    #[error(transparent)]
    InvalidAlpha(#[from] crate::scoring::InvalidAlpha),
    #[error("k must be at least 1")]
    InvalidK,
}

/// A successful search, rank-ordered.
#[derive(Debug)]
pub struct SearchReport {
    pub results: Vec<ResultSubtree>,
    pub stats: EngineStats,
    /// Size of the candidate set Q (1 for a direct match).
    pub candidates_generated: usize,
    pub queries_executed: usize,
    /// True when the candidate cap dropped low-similarity combinations.
    pub overflowed: bool,
}

impl SearchReport {
    pub fn ranks(&self) -> Vec<usize> {
        ranks(&self.results)
    }
}

#[derive(Debug)]
pub enum SearchOutcome {
    Ranked(SearchReport),
    /// The query cannot be answered: these keywords have no posting list
    /// and no in-index candidates.
    HardNoMatch { irreplaceable: Vec<String> },
}

/// Executes `q0` end to end with the configured engine.
pub fn run_framework(
    q0: &OriginalQuery,
    index: &InvertedIndex,
    tax: &Taxonomy,
    cfg: &SearchConfig,
) -> Result<SearchOutcome, FrameworkError> {
    validate_alpha(cfg.alpha)?;
    if cfg.k == 0 {
        return Err(FrameworkError::InvalidK);
    }

    let report = diagnose(q0, index, tax);
    let (queries, overflowed) = match report.classify() {
        QueryClass::DirectMatch => (vec![CandidateQuery::direct(q0)], false),
        QueryClass::NoButSemanticMatch => {
            let set = generate(q0, &report, tax, index, cfg.query_cap);
            (set.queries, set.overflowed)
        }
        QueryClass::HardNoMatch => {
            let irreplaceable = report
                .missing
                .difference(&report.replaceable)
                .map(|&i| q0.keywords()[i].clone())
                .collect();
            return Ok(SearchOutcome::HardNoMatch { irreplaceable });
        }
    };

    let mut stats = EngineStats::default();
    let candidates_generated = queries.len();
    let mut queries_executed = 0usize;

    let topk = if cfg.engine == EngineKind::Ba {
        let topk = run_batched(&queries, index, cfg.alpha, cfg.k, cfg.pruning, &mut stats);
        queries_executed = candidates_generated - stats.queries_pruned_inter as usize;
        topk
    } else {
        let mut topk = TopK::new(cfg.k);
        for (at, query) in queries.iter().enumerate() {
            if cfg.pruning.inter_query {
                if let Some(threshold) = topk.sigma_min() {
                    if query.sim < threshold {
                        stats.queries_pruned_inter += (queries.len() - at) as u64;
                        break;
                    }
                }
            }
            let lists: Vec<Arc<PostingList>> = query
                .execution_keywords()
                .iter()
                .map(|kw| index.posting(kw).expect("generated keyword has postings"))
                .collect();
            queries_executed += 1;
            match cfg.engine {
                EngineKind::Bl => process_query_bl(&mut topk, cfg.alpha, query, &lists, &mut stats),
                EngineKind::Se => process_query_se(
                    &mut topk,
                    cfg.alpha,
                    query,
                    &lists,
                    cfg.pruning.intra_query,
                    &mut stats,
                ),
                EngineKind::An => process_query_an(
                    &mut topk,
                    cfg.alpha,
                    query,
                    &lists,
                    cfg.pruning.intra_query,
                    &mut stats,
                ),
                EngineKind::Ba => unreachable!("handled above"),
            }
        }
        topk
    };

    Ok(SearchOutcome::Ranked(SearchReport {
        results: topk.into_ranked(),
        stats,
        candidates_generated,
        queries_executed,
        overflowed,
    }))
}
