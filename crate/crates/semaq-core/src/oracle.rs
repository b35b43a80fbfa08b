//! Test-facing reference implementations: exhaustive top-k retrieval and
//! exhaustive batch planning. No pruning, no shared computation, no
//! cursors; every value is recomputed the obvious way. Size guards are
//! hard errors so a silently degraded oracle cannot green-light anything.

use std::sync::Arc;

use crate::batch::ExecutionPlan;
use crate::dewey::DeweyCode;
use crate::engine::{result_order, slca_brute, ResultSubtree};
use crate::index::{InvertedIndex, PostingList};
use crate::ontology::Taxonomy;
use crate::query::{diagnose, generate, CandidateQuery, OriginalQuery, QueryClass};
use crate::scoring::score;

pub const DEFAULT_ORACLE_CAP: usize = 500;
pub const ORACLE_PLAN_CAP: usize = 8;

#[derive(Debug, thiserror::Error)]
pub enum OracleError {
    #[error("oracle refuses {count} candidate queries (cap {cap})")]
    TooManyQueries { count: usize, cap: usize },
    #[error("oracle plan search refuses {count} queries (cap {cap})")]
    PlanTooLarge { count: usize, cap: usize },
}

/// Tightest match for one keyword under a root by scanning the whole
/// list: minimal level, ties to the smallest code.
pub fn tightest_full_scan(list: &PostingList, root: &DeweyCode) -> Option<(DeweyCode, u64)> {
    list.entries
        .iter()
        .filter(|e| root.is_ancestor_or_self_of(&e.code))
        .min_by(|a, b| a.level.cmp(&b.level).then_with(|| a.code.cmp(&b.code)))
        .map(|e| (e.code.clone(), (e.level - root.level()) as u64))
}

/// Every result of one candidate query: all SLCA roots by brute force,
/// tightest matches by full scan, scored.
pub fn oracle_results_for_query(
    query: &CandidateQuery,
    index: &InvertedIndex,
    alpha: f64,
) -> Vec<ResultSubtree> {
    let keywords = query.execution_keywords();
    let lists: Vec<Arc<PostingList>> = keywords
        .iter()
        .map(|kw| index.posting(kw).expect("executable query keyword"))
        .collect();
    let mut out = Vec::new();
    for root in slca_brute(&lists) {
        let mut matches = Vec::with_capacity(lists.len());
        let mut distance = 0u64;
        for list in &lists {
            let (m, d) = tightest_full_scan(list, &root)
                .expect("an SLCA root has a match from every list beneath it");
            matches.push(m);
            distance += d;
        }
        let (theta, sigma) = score(query.sim, distance, alpha);
        out.push(ResultSubtree {
            root,
            matches,
            distance,
            cohesiveness: theta,
            score: sigma,
            query: query.clone(),
        });
    }
    out
}

/// Exhaustive top-k: generate every candidate query, enumerate every
/// result, sort, truncate. Order-free: permuting the candidate set
/// cannot change the output.
pub fn oracle_topk(
    q0: &OriginalQuery,
    index: &InvertedIndex,
    tax: &Taxonomy,
    alpha: f64,
    k: usize,
    cap: usize,
) -> Result<Vec<ResultSubtree>, OracleError> {
    let report = diagnose(q0, index, tax);
    let queries = match report.classify() {
        QueryClass::DirectMatch => vec![CandidateQuery::direct(q0)],
        QueryClass::NoButSemanticMatch => {
            // the product size is known before any query is built
            let count = report
                .missing
                .iter()
                .map(|&pos| {
                    tax.candidates(&q0.keywords()[pos])
                        .iter()
                        .filter(|c| index.has_keyword(&c.term).unwrap_or(false))
                        .count()
                })
                .fold(1usize, |acc, n| acc.saturating_mul(n));
            if count > cap {
                return Err(OracleError::TooManyQueries { count, cap });
            }
            generate(q0, &report, tax, index, cap).queries
        }
        QueryClass::HardNoMatch => return Ok(Vec::new()),
    };
    let mut all = Vec::new();
    for query in &queries {
        all.extend(oracle_results_for_query(query, index, alpha));
    }
    all.sort_by(result_order);
    all.truncate(k);
    Ok(all)
}

/// Exhaustive minimal-cost plan over all legal batch partitions.
pub fn oracle_plan(
    queries: &[CandidateQuery],
    index: &InvertedIndex,
) -> Result<ExecutionPlan, OracleError> {
    if queries.len() > ORACLE_PLAN_CAP {
        return Err(OracleError::PlanTooLarge {
            count: queries.len(),
            cap: ORACLE_PLAN_CAP,
        });
    }
    assert!(!queries.is_empty(), "plan search needs at least one query");

    let mut best: Option<(f64, Vec<Vec<usize>>)> = None;
    let mut blocks: Vec<Vec<usize>> = Vec::new();
    enumerate_partitions(queries.len(), 0, &mut blocks, &mut |blocks| {
        let mut total = 0.0;
        for block in blocks {
            match block_cost(block, queries, index) {
                Some(c) => total += c,
                None => return,
            }
        }
        match &best {
            Some((cost, _)) if *cost <= total => {}
            _ => best = Some((total, blocks.to_vec())),
        }
    });

    let (_, blocks) = best.expect("the all-singletons partition is always legal");
    let mut batches = Vec::new();
    for block in blocks {
        let mut members: Vec<CandidateQuery> = block.iter().map(|&i| queries[i].clone()).collect();
        members.sort_by(|a, b| {
            b.sim
                .partial_cmp(&a.sim)
                .unwrap()
                .then_with(|| a.keywords.cmp(&b.keywords))
        });
        let shared = block_shared(&members, index).expect("legal block");
        batches.push(crate::batch::batch_from_parts(shared, members, index));
    }
    Ok(ExecutionPlan { batches })
}

fn enumerate_partitions(
    n: usize,
    next: usize,
    blocks: &mut Vec<Vec<usize>>,
    visit: &mut impl FnMut(&[Vec<usize>]),
) {
    if next == n {
        visit(blocks);
        return;
    }
    for i in 0..blocks.len() {
        blocks[i].push(next);
        enumerate_partitions(n, next + 1, blocks, visit);
        blocks[i].pop();
    }
    blocks.push(vec![next]);
    enumerate_partitions(n, next + 1, blocks, visit);
    blocks.pop();
}

/// The shared keyword set a block must use, or `None` when the block is
/// not a legal batch. Singleton blocks pick the cheapest removal.
fn block_shared(members: &[CandidateQuery], index: &InvertedIndex) -> Option<Vec<String>> {
    let first = members[0].execution_keywords();
    if members.len() == 1 {
        let mut best: Option<(f64, Vec<String>)> = None;
        for drop_at in 0..first.len() {
            let shared: Vec<String> = first
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != drop_at)
                .map(|(_, k)| k.clone())
                .collect();
            let unshared = vec![first[drop_at].clone()];
            let cost = crate::batch::batch_cost_of(&shared, &unshared, index);
            match &best {
                Some((c, _)) if *c <= cost => {}
                _ => best = Some((cost, shared)),
            }
        }
        return best.map(|(_, s)| s);
    }
    let arity = first.len();
    if members
        .iter()
        .any(|m| m.execution_keywords().len() != arity)
    {
        return None;
    }
    let shared: Vec<String> = first
        .iter()
        .filter(|k| {
            members[1..]
                .iter()
                .all(|m| m.execution_keywords().contains(k))
        })
        .cloned()
        .collect();
    if shared.len() != arity - 1 {
        return None;
    }
    Some(shared)
}

fn block_cost(block: &[usize], queries: &[CandidateQuery], index: &InvertedIndex) -> Option<f64> {
    let members: Vec<CandidateQuery> = block.iter().map(|&i| queries[i].clone()).collect();
    let shared = block_shared(&members, index)?;
    let unshared: Vec<String> = members
        .iter()
        .map(|m| {
            m.execution_keywords()
                .into_iter()
                .find(|k| !shared.contains(k))
                .expect("one unshared keyword per member")
        })
        .collect();
    Some(crate::batch::batch_cost_of(&shared, &unshared, index))
}
