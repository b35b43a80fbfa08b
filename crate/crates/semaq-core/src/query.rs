//! No-match diagnosis and candidate query generation.
//!
//! A keyword with an empty posting list is a *no-match*; when the taxonomy
//! offers in-index substitutes for every such keyword the query has a
//! *no-but-semantic-match* and we expand it into the Cartesian product of
//! the filtered candidate sets, scoring each combination with the product
//! of directional similarities over the replaced positions.

use std::collections::{BTreeSet, BinaryHeap, HashSet};

use crate::index::InvertedIndex;
use crate::ontology::Taxonomy;
use crate::xml::normalize_keyword;

pub const DEFAULT_QUERY_CAP: usize = 50_000;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum QueryError {
    #[error("query has no keywords")]
    Empty,
    #[error("keyword {position} is empty after normalization")]
    EmptyKeyword { position: usize },
}

/// The user's query, normalized and de-duplicated.
#[derive(Debug, Clone)]
pub struct OriginalQuery {
    keywords: Vec<String>,
    collapsed: Vec<String>,
}

impl OriginalQuery {
    pub fn new<I, S>(raw: I) -> Result<OriginalQuery, QueryError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut keywords = Vec::new();
        let mut collapsed = Vec::new();
        for (position, kw) in raw.into_iter().enumerate() {
            let normalized = normalize_keyword(kw.as_ref());
            if normalized.is_empty() {
                return Err(QueryError::EmptyKeyword { position });
            }
            if keywords.contains(&normalized) {
                collapsed.push(normalized);
            } else {
                keywords.push(normalized);
            }
        }
        if keywords.is_empty() {
            return Err(QueryError::Empty);
        }
        Ok(OriginalQuery {
            keywords,
            collapsed,
        })
    }

    pub fn keywords(&self) -> &[String] {
        &self.keywords
    }

    /// Duplicate keywords dropped during normalization; callers surface
    /// these as a warning.
    pub fn collapsed_duplicates(&self) -> &[String] {
        &self.collapsed
    }
}

/// Which keywords have no posting list, and which of those the taxonomy
/// can still replace.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NoMatchReport {
    pub missing: BTreeSet<usize>,
    pub replaceable: BTreeSet<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QueryClass {
    /// Every keyword maps directly; execute the query as-is.
    DirectMatch,
    /// Some keywords are missing, all of them replaceable.
    NoButSemanticMatch,
    /// At least one missing keyword has no in-index candidate.
    HardNoMatch,
}

impl NoMatchReport {
    pub fn classify(&self) -> QueryClass {
        if self.missing.is_empty() {
            QueryClass::DirectMatch
        } else if self.replaceable == self.missing {
            QueryClass::NoButSemanticMatch
        } else {
            QueryClass::HardNoMatch
        }
    }
}

/// Classifies each keyword of `q0` against the index, consulting the
/// taxonomy for replaceability of the missing ones.
pub fn diagnose(q0: &OriginalQuery, index: &InvertedIndex, tax: &Taxonomy) -> NoMatchReport {
    let mut missing = BTreeSet::new();
    let mut replaceable = BTreeSet::new();
    for (i, kw) in q0.keywords().iter().enumerate() {
        if index.has_keyword(kw).unwrap_or(false) {
            continue;
        }
        missing.insert(i);
        let has_mapped_candidate = tax
            .candidates(kw)
            .iter()
            .any(|c| index.has_keyword(&c.term).unwrap_or(false));
        if has_mapped_candidate {
            replaceable.insert(i);
        }
    }
    NoMatchReport {
        missing,
        replaceable,
    }
}

/// One executable substitution of the original query.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateQuery {
    /// Same arity and order as the original query.
    pub keywords: Vec<String>,
    /// Positions whose keyword was substituted.
    pub replaced: BTreeSet<usize>,
    /// λ(q0, q'): product of DSim over the replaced positions; 1 when
    /// nothing was replaced.
    pub sim: f64,
}

impl CandidateQuery {
    /// The original query itself, used when every keyword maps directly.
    pub fn direct(q0: &OriginalQuery) -> CandidateQuery {
        CandidateQuery {
            keywords: q0.keywords().to_vec(),
            replaced: BTreeSet::new(),
            sim: 1.0,
        }
    }

    /// Keywords as executed: substitution can make two positions equal, in
    /// which case they collapse to one lookup.
    pub fn execution_keywords(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::with_capacity(self.keywords.len());
        for kw in &self.keywords {
            if !out.contains(kw) {
                out.push(kw.clone());
            }
        }
        out
    }

    /// Stable identity for display and tie-breaking.
    pub fn label(&self) -> String {
        self.keywords.join(",")
    }
}

/// Generation output; `overflowed` reports that the cap dropped the least
/// similar combinations.
#[derive(Debug, Clone)]
pub struct CandidateSet {
    pub queries: Vec<CandidateQuery>,
    pub overflowed: bool,
}

/// Expands `q0` into scored candidate queries, best-first, capped at
/// `cap`. Candidates without index mappings are filtered before the
/// product is formed, so no generated query can itself be a no-match
/// query.
pub fn generate(
    q0: &OriginalQuery,
    report: &NoMatchReport,
    tax: &Taxonomy,
    index: &InvertedIndex,
    cap: usize,
) -> CandidateSet {
    let per_position: Vec<(usize, Vec<(String, f64)>)> = report
        .missing
        .iter()
        .map(|&pos| {
            let filtered: Vec<(String, f64)> = tax
                .candidates(&q0.keywords()[pos])
                .into_iter()
                .filter(|c| index.has_keyword(&c.term).unwrap_or(false))
                .map(|c| (c.term, c.dsim))
                .collect();
            (pos, filtered)
        })
        .collect();
    generate_from_candidates(q0, &per_position, cap)
}

/// Core of [`generate`], taking explicit per-position candidate lists
/// (each sorted by DSim descending). Exposed so similarity inputs can be
/// injected directly.
pub fn generate_from_candidates(
    q0: &OriginalQuery,
    per_position: &[(usize, Vec<(String, f64)>)],
    cap: usize,
) -> CandidateSet {
    for (pos, cands) in per_position {
        assert!(
            !cands.is_empty(),
            "position {pos} has no mapped candidates; caller must diagnose first"
        );
        debug_assert!(cands.windows(2).all(|w| w[0].1 >= w[1].1));
    }

    let build = |choice: &[usize]| -> CandidateQuery {
        let mut keywords = q0.keywords().to_vec();
        let mut replaced = BTreeSet::new();
        let mut sim = 1.0f64;
        for ((pos, cands), &pick) in per_position.iter().zip(choice) {
            let (term, dsim) = &cands[pick];
            keywords[*pos] = term.clone();
            replaced.insert(*pos);
            sim *= dsim;
        }
        CandidateQuery {
            keywords,
            replaced,
            sim,
        }
    };
    let lambda = |choice: &[usize]| -> f64 {
        per_position
            .iter()
            .zip(choice)
            .map(|((_, cands), &pick)| cands[pick].1)
            .product()
    };

    // best-first walk of the product lattice so a cap drops only the
    // least similar combinations
    #[derive(PartialEq)]
    struct Frontier(f64, Vec<usize>);
    impl Eq for Frontier {}
    impl Ord for Frontier {
        fn cmp(&self, other: &Self) -> std::cmp::Ordering {
            self.0
                .partial_cmp(&other.0)
                .unwrap()
                .then_with(|| other.1.cmp(&self.1))
        }
    }
    impl PartialOrd for Frontier {
        fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
            Some(self.cmp(other))
        }
    }

    let start = vec![0usize; per_position.len()];
    let mut heap = BinaryHeap::new();
    let mut seen: HashSet<Vec<usize>> = HashSet::new();
    heap.push(Frontier(lambda(&start), start.clone()));
    seen.insert(start);

    let mut queries: Vec<CandidateQuery> = Vec::new();
    let mut overflowed = false;
    while let Some(Frontier(_, choice)) = heap.pop() {
        if queries.len() >= cap {
            overflowed = true;
            break;
        }
        queries.push(build(&choice));
        for axis in 0..choice.len() {
            if choice[axis] + 1 < per_position[axis].1.len() {
                let mut next = choice.clone();
                next[axis] += 1;
                if seen.insert(next.clone()) {
                    heap.push(Frontier(lambda(&next), next));
                }
            }
        }
    }

    // λ ties resolve lexicographically on the keyword list
    queries.sort_by(|a, b| {
        b.sim
            .partial_cmp(&a.sim)
            .unwrap()
            .then_with(|| a.keywords.cmp(&b.keywords))
    });
    CandidateSet {
        queries,
        overflowed,
    }
}
