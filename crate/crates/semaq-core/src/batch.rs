//! Batched execution of candidate queries that share all but one keyword.
//!
//! Queries produced by keyword substitution overlap heavily, so the
//! planner groups them greedily by estimated cost: take the most similar
//! remaining query, try removing each of its keywords, gather every
//! remaining query containing the kept set, and keep the grouping with the
//! cheapest per-query cost. A batch is then executed by computing the
//! shared keywords' subtree results once, for every shared SLCA root *and
//! all of its ancestors* (a merged result root can only ascend), and
//! merging each member's single unshared list against the stored roots.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::dewey::DeweyCode;
use crate::engine::{
    advance_past, closest, get_tight, process_query_se, EngineStats, Pending, ResultSubtree,
    SlcaScan, TopK,
};
use crate::index::{InvertedIndex, PostingEntry, PostingList};
use crate::query::CandidateQuery;
use crate::scoring::{cohesiveness, score};

/// Queries sharing the keyword set `shared`, each contributing exactly
/// one keyword on top of it.
#[derive(Debug, Clone)]
pub struct QueryBatch {
    /// K^s, in the head query's keyword order.
    pub shared: Vec<String>,
    /// Members ordered by similarity descending.
    pub members: Vec<CandidateQuery>,
    /// K^u: each member's keyword outside the shared set, member-aligned.
    pub unshared: Vec<String>,
    /// c(B): shared list sizes plus, per unshared keyword, the shortest
    /// shared list size and the unshared list size.
    pub cost: f64,
    /// c(B) / |B|.
    pub unit_cost: f64,
}

#[derive(Debug, Clone)]
pub struct ExecutionPlan {
    pub batches: Vec<QueryBatch>,
}

impl ExecutionPlan {
    pub fn total_cost(&self) -> f64 {
        self.batches.iter().map(|b| b.cost).sum()
    }
}

pub(crate) fn batch_cost_of(shared: &[String], unshared: &[String], index: &InvertedIndex) -> f64 {
    let shared_sizes: Vec<usize> = shared.iter().map(|k| index.list_size(k)).collect();
    let min_shared = shared_sizes.iter().copied().min().unwrap_or(0);
    let shared_total: usize = shared_sizes.iter().sum();
    let unshared_total: usize = unshared
        .iter()
        .map(|k| min_shared + index.list_size(k))
        .sum();
    (shared_total + unshared_total) as f64
}

pub(crate) fn batch_from_parts(
    shared: Vec<String>,
    members: Vec<CandidateQuery>,
    index: &InvertedIndex,
) -> QueryBatch {
    let unshared: Vec<String> = members
        .iter()
        .map(|m| {
            m.execution_keywords()
                .into_iter()
                .find(|k| !shared.contains(k))
                .expect("each member carries exactly one unshared keyword")
        })
        .collect();
    let cost = batch_cost_of(&shared, &unshared, index);
    let unit_cost = cost / members.len() as f64;
    QueryBatch {
        shared,
        members,
        unshared,
        cost,
        unit_cost,
    }
}

/// All plausible batches for `head`: one per removable keyword position,
/// membership drawn from `rest`. Batches arrive in position order, so the
/// caller's min-scan resolves cost ties toward the smaller position.
pub fn plausible_batches(
    head: &CandidateQuery,
    rest: &[CandidateQuery],
    index: &InvertedIndex,
) -> Vec<QueryBatch> {
    let head_keywords = head.execution_keywords();
    let arity = head_keywords.len();
    let mut out = Vec::with_capacity(arity);
    for drop_at in 0..arity {
        let shared: Vec<String> = head_keywords
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != drop_at)
            .map(|(_, k)| k.clone())
            .collect();
        let mut members = vec![head.clone()];
        if !shared.is_empty() {
            for q in rest {
                let kws = q.execution_keywords();
                if kws.len() == arity && shared.iter().all(|s| kws.contains(s)) {
                    members.push(q.clone());
                }
            }
        }
        out.push(batch_from_parts(shared, members, index));
    }
    out
}

fn best_plausible_batch(
    head: &CandidateQuery,
    rest: &[CandidateQuery],
    index: &InvertedIndex,
) -> QueryBatch {
    plausible_batches(head, rest, index)
        .into_iter()
        .reduce(|best, b| if b.unit_cost < best.unit_cost { b } else { best })
        .expect("a query always yields at least one plausible batch")
}

/// Greedy plan: repeatedly batch the most similar remaining query with
/// the grouping of least unit cost, until every query is covered.
pub fn plan_batches(queries: &[CandidateQuery], index: &InvertedIndex) -> ExecutionPlan {
    let mut remaining: Vec<CandidateQuery> = queries.to_vec();
    let mut batches = Vec::new();
    while !remaining.is_empty() {
        let head = remaining[0].clone();
        let batch = best_plausible_batch(&head, &remaining[1..], index);
        remaining.retain(|q| !batch.members.iter().any(|m| m.keywords == q.keywords));
        batches.push(batch);
    }
    ExecutionPlan { batches }
}

/// Tightest shared-part matches and distance under one stored root.
#[derive(Debug, Clone, PartialEq)]
pub struct SharedResult {
    pub root: DeweyCode,
    /// Tightest match per shared keyword, aligned with the batch's
    /// `shared` order.
    pub matches: Vec<DeweyCode>,
    pub distance: u64,
}

/// Shared-part store, keyed by root.
pub type SharedStore = BTreeMap<DeweyCode, SharedResult>;

/// Anchor-scans the shared lists and stores, for every candidate root
/// *and each of its ancestors*, the tightest shared matches and distance.
/// A root is abandoned only when even the batch's best similarity times
/// the partial cohesiveness bound cannot reach `sigma_min`.
pub fn shared_part(
    sigma_min: Option<f64>,
    alpha: f64,
    lambda_max: f64,
    lists: &[Arc<PostingList>],
    stats: &mut EngineStats,
) -> SharedStore {
    debug_assert!(!lists.is_empty() && lists.iter().all(|l| !l.is_empty()));
    let n = lists.len();
    let mut tighten_order: Vec<usize> = (0..n).collect();
    tighten_order.sort_by_key(|&i| lists[i].len());

    let mut store = SharedStore::new();
    let mut attempted: std::collections::HashSet<DeweyCode> = std::collections::HashSet::new();
    let mut frontier = vec![0usize; n];
    let mut cursors = vec![0usize; n];

    while (0..n).all(|i| frontier[i] < lists[i].len()) {
        let mut anchor = 0usize;
        stats.list_probes += 1;
        let mut anchor_code = lists[0].entries[frontier[0]].code.clone();
        for i in 1..n {
            stats.list_probes += 1;
            let code = &lists[i].entries[frontier[i]].code;
            if *code > anchor_code {
                anchor = i;
                anchor_code = code.clone();
            }
        }
        cursors[anchor] = frontier[anchor];
        let mut codes = vec![anchor_code.clone()];
        for i in 0..n {
            if i == anchor {
                continue;
            }
            let (pos, code) = closest(&lists[i], &anchor_code, stats);
            cursors[i] = pos;
            codes.push(code);
        }
        stats.lca_ops += 1;
        let v = crate::dewey::lca_of(&codes);

        'roots: for root in std::iter::once(v.clone()).chain(v.ancestors()) {
            if !attempted.insert(root.clone()) {
                continue;
            }
            let mut matches: Vec<Option<DeweyCode>> = vec![None; n];
            let mut distance = 0u64;
            for &i in &tighten_order {
                let (m, d) = get_tight(&lists[i], cursors[i], &root, stats);
                distance += d;
                matches[i] = Some(m);
                if let Some(threshold) = sigma_min {
                    if lambda_max * cohesiveness(distance, alpha) < threshold {
                        stats.results_pruned_intra += 1;
                        continue 'roots;
                    }
                }
            }
            store.insert(
                root.clone(),
                SharedResult {
                    root,
                    matches: matches.into_iter().map(Option::unwrap).collect(),
                    distance,
                },
            );
        }

        for i in 0..n {
            frontier[i] = advance_past(&lists[i], frontier[i], &anchor_code, stats);
        }
    }
    store
}

/// Upper bound on any result score of a batch member: its similarity
/// times the cohesiveness of the smallest shared-part distance. An empty
/// store bounds the whole batch at zero.
pub fn batch_upper_bound(store: &SharedStore, member_sim: f64, alpha: f64) -> f64 {
    match store.values().map(|r| r.distance).min() {
        Some(min_d) => member_sim * cohesiveness(min_d, alpha),
        None => 0.0,
    }
}

/// Runs the two-list SLCA between a member's unshared posting list and
/// the stored shared roots, combining precomputed shared matches with the
/// tightest unshared match under each confirmed root.
pub fn merge_results(
    topk: &mut TopK,
    store: &SharedStore,
    alpha: f64,
    member: &CandidateQuery,
    shared: &[String],
    unshared_keyword: &str,
    unshared_list: &Arc<PostingList>,
    stats: &mut EngineStats,
) {
    if store.is_empty() {
        return;
    }
    let roots_list = Arc::new(PostingList {
        keyword: String::new(),
        entries: store
            .keys()
            .map(|c| PostingEntry {
                code: c.clone(),
                level: c.level(),
            })
            .collect(),
    });
    let lists = [unshared_list.clone(), roots_list];

    let mut confirm = |pending: Pending, stats: &mut EngineStats| {
        let Some(shared_result) = store.get(&pending.root) else {
            // the root was pruned out of the shared store; nothing under
            // it can beat the threshold
            return;
        };
        let (unshared_match, unshared_d) =
            get_tight(&lists[0], pending.cursors[0], &pending.root, stats);
        let distance = shared_result.distance + unshared_d;
        let (theta, sigma) = score(member.sim, distance, alpha);
        let matches: Vec<DeweyCode> = member
            .execution_keywords()
            .iter()
            .map(|kw| {
                if kw == unshared_keyword {
                    unshared_match.clone()
                } else {
                    let at = shared.iter().position(|s| s == kw).expect("shared keyword");
                    shared_result.matches[at].clone()
                }
            })
            .collect();
        topk.insert(ResultSubtree {
            root: pending.root,
            matches,
            distance,
            cohesiveness: theta,
            score: sigma,
            query: member.clone(),
        });
    };

    let mut scan = SlcaScan::new();
    let mut frontier = [0usize; 2];
    let mut cursors = [0usize; 2];
    while frontier[0] < lists[0].len() && frontier[1] < lists[1].len() {
        let mut anchor = 0usize;
        stats.list_probes += 2;
        let mut anchor_code = lists[0].entries[frontier[0]].code.clone();
        let other_code = &lists[1].entries[frontier[1]].code;
        if *other_code > anchor_code {
            anchor = 1;
            anchor_code = other_code.clone();
        }
        cursors[anchor] = frontier[anchor];
        let partner = 1 - anchor;
        let (pos, code) = closest(&lists[partner], &anchor_code, stats);
        cursors[partner] = pos;
        stats.lca_ops += 1;
        let v = anchor_code.lca(&code);
        if let Some(confirmed) = scan.feed(v, &cursors) {
            confirm(confirmed, stats);
        }
        for i in 0..2 {
            frontier[i] = advance_past(&lists[i], frontier[i], &anchor_code, stats);
        }
    }
    if let Some(confirmed) = scan.finish() {
        confirm(confirmed, stats);
    }
}

/// Batched framework: inter-query pruning over the sorted queries, greedy
/// batch construction per head, shared-part computation, then per-member
/// upper-bound checks and merges.
pub fn run_batched(
    queries: &[CandidateQuery],
    index: &InvertedIndex,
    alpha: f64,
    k: usize,
    pruning: crate::engine::PruningConfig,
    stats: &mut EngineStats,
) -> TopK {
    let mut topk = TopK::new(k);
    let mut remaining: Vec<CandidateQuery> = queries.to_vec();
    while !remaining.is_empty() {
        if pruning.inter_query {
            if let Some(threshold) = topk.sigma_min() {
                if remaining[0].sim < threshold {
                    stats.queries_pruned_inter += remaining.len() as u64;
                    break;
                }
            }
        }
        let head = remaining[0].clone();
        let batch = best_plausible_batch(&head, &remaining[1..], index);

        if batch.shared.is_empty() {
            // single-keyword members share nothing; execute them directly
            for member in &batch.members {
                if pruning.batch {
                    if let Some(threshold) = topk.sigma_min() {
                        if member.sim < threshold {
                            stats.batches_pruned += 1;
                            break;
                        }
                    }
                }
                let lists: Vec<Arc<PostingList>> = member
                    .execution_keywords()
                    .iter()
                    .map(|kw| index.posting(kw).expect("generated keyword has postings"))
                    .collect();
                process_query_se(&mut topk, alpha, member, &lists, pruning.intra_query, stats);
            }
        } else {
            let shared_lists: Vec<Arc<PostingList>> = batch
                .shared
                .iter()
                .map(|kw| index.posting(kw).expect("generated keyword has postings"))
                .collect();
            let shared_sigma = if pruning.intra_query {
                topk.sigma_min()
            } else {
                None
            };
            let lambda_max = batch.members[0].sim;
            let store = shared_part(shared_sigma, alpha, lambda_max, &shared_lists, stats);
            for (member, unshared_kw) in batch.members.iter().zip(&batch.unshared) {
                if pruning.batch && topk.is_full() {
                    let bound = batch_upper_bound(&store, member.sim, alpha);
                    if bound < topk.sigma_min().expect("full heap has a threshold") {
                        stats.batches_pruned += 1;
                        break;
                    }
                }
                let unshared_list = index
                    .posting(unshared_kw)
                    .expect("generated keyword has postings");
                merge_results(
                    &mut topk,
                    &store,
                    alpha,
                    member,
                    &batch.shared,
                    unshared_kw,
                    &unshared_list,
                    stats,
                );
            }
        }
        remaining.retain(|q| !batch.members.iter().any(|m| m.keywords == q.keywords));
    }
    topk
}
