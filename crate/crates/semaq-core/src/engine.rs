//! Candidate-query execution: SLCA computation over inverted lists with
//! tightest-match scoring and threshold pruning.
//!
//! Three interchangeable drivers produce identical ranked output:
//!
//! * `process_query_bl` - scan-eager traversal, no intra-query pruning
//!   (the baseline);
//! * `process_query_se` - scan-eager traversal, abandons a result as soon
//!   as its partial score bound falls under the current threshold;
//! * `process_query_an` - anchor traversal that skips runs of match nodes
//!   which cannot form new result roots.
//!
//! All of them stream candidate LCA roots through a small confirmation
//! automaton: a candidate is confirmed as an SLCA root once a candidate
//! outside its subtree arrives, and candidates that sit above an already
//! confirmed root are discarded.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::Arc;

use crate::dewey::{lca_of, DeweyCode};
use crate::index::PostingList;
use crate::query::CandidateQuery;
use crate::scoring::score;

/// Deterministic work counters; wall-clock-free basis for efficiency
/// comparisons.
#[derive(Debug, Default, Clone, PartialEq, Eq)]
pub struct EngineStats {
    /// Posting-list entry reads (scans, binary-search steps, tightening).
    pub list_probes: u64,
    /// Candidate result-root LCA computations.
    pub lca_ops: u64,
    /// Results abandoned mid-computation by the partial score bound.
    pub results_pruned_intra: u64,
    /// Candidate queries never executed thanks to the similarity bound.
    pub queries_pruned_inter: u64,
    /// Batches (or batch tails) skipped by the shared-part bound.
    pub batches_pruned: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EngineKind {
    /// Scan-eager with inter-query pruning only.
    Bl,
    /// Scan-eager with inter- and intra-query pruning.
    Se,
    /// Anchor-based with inter- and intra-query pruning.
    An,
    /// Batched execution with shared-part computation.
    Ba,
}

impl EngineKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EngineKind::Bl => "bl",
            EngineKind::Se => "se",
            EngineKind::An => "an",
            EngineKind::Ba => "ba",
        }
    }

    pub fn parse(s: &str) -> Option<EngineKind> {
        match s {
            "bl" => Some(EngineKind::Bl),
            "se" => Some(EngineKind::Se),
            "an" => Some(EngineKind::An),
            "ba" => Some(EngineKind::Ba),
            _ => None,
        }
    }

    pub const ALL: [EngineKind; 4] = [
        EngineKind::Bl,
        EngineKind::Se,
        EngineKind::An,
        EngineKind::Ba,
    ];
}

/// Which pruning mechanisms run. All of them are lossless, so toggling
/// any flag never changes the ranked output, only the work done.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PruningConfig {
    pub inter_query: bool,
    pub intra_query: bool,
    pub batch: bool,
}

impl Default for PruningConfig {
    fn default() -> Self {
        PruningConfig {
            inter_query: true,
            intra_query: true,
            batch: true,
        }
    }
}

impl PruningConfig {
    pub const NONE: PruningConfig = PruningConfig {
        inter_query: false,
        intra_query: false,
        batch: false,
    };
}

/// One scored subtree result.
#[derive(Debug, Clone)]
pub struct ResultSubtree {
    /// The SLCA root.
    pub root: DeweyCode,
    /// Tightest match node per executed keyword, in query order.
    pub matches: Vec<DeweyCode>,
    /// Sum of match levels minus root level.
    pub distance: u64,
    pub cohesiveness: f64,
    pub score: f64,
    /// The candidate query that produced this result.
    pub query: CandidateQuery,
}

/// Presentation and tie-break order: score desc, query similarity desc,
/// root asc, then matches and keywords for full determinism.
pub fn result_order(a: &ResultSubtree, b: &ResultSubtree) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then_with(|| b.query.sim.total_cmp(&a.query.sim))
        .then_with(|| a.root.cmp(&b.root))
        .then_with(|| a.matches.cmp(&b.matches))
        .then_with(|| a.query.keywords.cmp(&b.query.keywords))
}

/// Competition ranks for a best-first sorted slice: 1 + the number of
/// strictly better scores; equal scores share a rank.
pub fn ranks(results: &[ResultSubtree]) -> Vec<usize> {
    let mut out = Vec::with_capacity(results.len());
    for (i, r) in results.iter().enumerate() {
        if i > 0 && r.score == results[i - 1].score {
            out.push(out[i - 1]);
        } else {
            out.push(i + 1);
        }
    }
    out
}

struct HeapEntry(ResultSubtree);

impl PartialEq for HeapEntry {
    fn eq(&self, other: &Self) -> bool {
        result_order(&self.0, &other.0) == Ordering::Equal
    }
}
impl Eq for HeapEntry {}
impl Ord for HeapEntry {
    // max-heap peek = the worst kept result
    fn cmp(&self, other: &Self) -> Ordering {
        result_order(&self.0, &other.0)
    }
}
impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Bounded best-results heap. The similarity threshold σ_min is defined
/// only once the heap holds `k` entries; until then nothing is pruned.
pub struct TopK {
    k: usize,
    heap: BinaryHeap<HeapEntry>,
}

impl TopK {
    pub fn new(k: usize) -> TopK {
        assert!(k >= 1, "top-k capacity must be positive");
        TopK {
            k,
            heap: BinaryHeap::new(),
        }
    }

    pub fn capacity(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.heap.len() == self.k
    }

    /// Score of the k-th entry; `None` while the heap is under-filled.
    pub fn sigma_min(&self) -> Option<f64> {
        if self.is_full() {
            self.heap.peek().map(|e| e.0.score)
        } else {
            None
        }
    }

    /// Keeps `r` if it belongs to the k best under [`result_order`].
    pub fn insert(&mut self, r: ResultSubtree) -> bool {
        if self.heap.len() < self.k {
            self.heap.push(HeapEntry(r));
            return true;
        }
        let worst = self.heap.peek().expect("non-empty full heap");
        if result_order(&r, &worst.0) == Ordering::Less {
            self.heap.pop();
            self.heap.push(HeapEntry(r));
            true
        } else {
            false
        }
    }

    /// Drains into best-first order.
    pub fn into_ranked(self) -> Vec<ResultSubtree> {
        let mut out: Vec<ResultSubtree> = self.heap.into_iter().map(|e| e.0).collect();
        out.sort_by(result_order);
        out
    }
}

fn probe<'a>(
    list: &'a PostingList,
    pos: usize,
    stats: &mut EngineStats,
) -> &'a crate::index::PostingEntry {
    stats.list_probes += 1;
    &list.entries[pos]
}

fn common_prefix_len(a: &DeweyCode, b: &DeweyCode) -> usize {
    a.components()
        .iter()
        .zip(b.components())
        .take_while(|(x, y)| x == y)
        .count()
}

/// Of the document-order predecessor and successor of `target` in `list`,
/// the one whose LCA with `target` is deeper; ties go to the predecessor.
/// A list member is its own closest node. Returns the entry position and
/// code.
pub fn closest(
    list: &PostingList,
    target: &DeweyCode,
    stats: &mut EngineStats,
) -> (usize, DeweyCode) {
    debug_assert!(!list.is_empty());
    let mut lo = 0usize;
    let mut hi = list.len();
    while lo < hi {
        let mid = (lo + hi) / 2;
        match probe(list, mid, stats).code.cmp(target) {
            Ordering::Equal => return (mid, list.entries[mid].code.clone()),
            Ordering::Less => lo = mid + 1,
            Ordering::Greater => hi = mid,
        }
    }
    // lo is the insertion point
    if lo == 0 {
        let succ = probe(list, 0, stats);
        return (0, succ.code.clone());
    }
    if lo == list.len() {
        let pred = probe(list, lo - 1, stats);
        return (lo - 1, pred.code.clone());
    }
    let pred = probe(list, lo - 1, stats).code.clone();
    let succ = probe(list, lo, stats).code.clone();
    if common_prefix_len(&succ, target) > common_prefix_len(&pred, target) {
        (lo, succ)
    } else {
        (lo - 1, pred)
    }
}

/// Tightest match under `root`: scanning bidirectionally from `cursor`
/// through the contiguous run of entries under `root`, the entry of
/// minimal level (ties to the smallest code) and its distance to the
/// root.
pub fn get_tight(
    list: &PostingList,
    cursor: usize,
    root: &DeweyCode,
    stats: &mut EngineStats,
) -> (DeweyCode, u64) {
    let start = probe(list, cursor, stats);
    debug_assert!(
        root.is_ancestor_or_self_of(&start.code),
        "get_tight cursor must sit inside the run under the root"
    );
    let mut best_level = start.level;
    let mut best = start.code.clone();
    let mut i = cursor;
    while i > 0 {
        let e = probe(list, i - 1, stats);
        if !root.is_ancestor_or_self_of(&e.code) {
            break;
        }
        if e.level < best_level || (e.level == best_level && e.code < best) {
            best_level = e.level;
            best = e.code.clone();
        }
        i -= 1;
    }
    let mut i = cursor + 1;
    while i < list.len() {
        let e = probe(list, i, stats);
        if !root.is_ancestor_or_self_of(&e.code) {
            break;
        }
        if e.level < best_level || (e.level == best_level && e.code < best) {
            best_level = e.level;
            best = e.code.clone();
        }
        i += 1;
    }
    let distance = (best_level - root.level()) as u64;
    (best, distance)
}

/// A candidate root waiting for confirmation, with the list positions it
/// was derived from.
#[derive(Debug, Clone)]
pub(crate) struct Pending {
    pub root: DeweyCode,
    pub cursors: Vec<usize>,
}

/// Confirmation automaton over the stream of candidate LCA roots.
///
/// A pending candidate is superseded by a descendant candidate, confirmed
/// by anything outside its subtree, and re-feeding the same root keeps it
/// pending. Candidates that are ancestors of an already confirmed root
/// can never be smallest and are dropped.
pub(crate) struct SlcaScan {
    pending: Option<Pending>,
    emitted: Vec<DeweyCode>,
}

impl SlcaScan {
    pub fn new() -> SlcaScan {
        SlcaScan {
            pending: None,
            emitted: Vec::new(),
        }
    }

    fn suppressed(&self, v: &DeweyCode) -> bool {
        self.emitted.iter().any(|r| v.is_ancestor_or_self_of(r))
    }

    pub fn feed(&mut self, v: DeweyCode, cursors: &[usize]) -> Option<Pending> {
        let mut confirmed = None;
        if let Some(p) = self.pending.take() {
            if p.root.is_ancestor_or_self_of(&v) {
                if p.root == v {
                    self.pending = Some(p);
                } else {
                    self.pending = Some(Pending {
                        root: v,
                        cursors: cursors.to_vec(),
                    });
                }
                return None;
            }
            debug_assert!(!self.suppressed(&p.root), "confirmed root under an emitted root");
            self.emitted.push(p.root.clone());
            confirmed = Some(p);
        }
        if !self.suppressed(&v) {
            self.pending = Some(Pending {
                root: v,
                cursors: cursors.to_vec(),
            });
        }
        confirmed
    }

    pub fn finish(mut self) -> Option<Pending> {
        self.pending.take()
    }
}

/// Per-query execution state shared by the drivers.
struct QueryRun<'a> {
    query: &'a CandidateQuery,
    lists: &'a [Arc<PostingList>],
    alpha: f64,
    /// Cheapest lists first, so pruning sees distance early.
    tighten_order: Vec<usize>,
    intra: bool,
}

impl<'a> QueryRun<'a> {
    fn new(
        query: &'a CandidateQuery,
        lists: &'a [Arc<PostingList>],
        alpha: f64,
        intra: bool,
    ) -> QueryRun<'a> {
        let mut tighten_order: Vec<usize> = (0..lists.len()).collect();
        tighten_order.sort_by_key(|&i| lists[i].len());
        QueryRun {
            query,
            lists,
            alpha,
            tighten_order,
            intra,
        }
    }

    /// Computes the tightest subtree result for a confirmed root,
    /// accumulating distance list by list and abandoning as soon as the
    /// partial score bound cannot beat the threshold.
    fn tighten_and_insert(&self, topk: &mut TopK, pending: Pending, stats: &mut EngineStats) {
        let n = self.lists.len();
        let mut matches: Vec<Option<DeweyCode>> = vec![None; n];
        let mut distance = 0u64;
        for &i in &self.tighten_order {
            let (m, d) = get_tight(&self.lists[i], pending.cursors[i], &pending.root, stats);
            distance += d;
            matches[i] = Some(m);
            if self.intra {
                if let Some(threshold) = topk.sigma_min() {
                    let (_, partial) = score(self.query.sim, distance, self.alpha);
                    if partial < threshold {
                        stats.results_pruned_intra += 1;
                        return;
                    }
                }
            }
        }
        let (theta, sigma) = score(self.query.sim, distance, self.alpha);
        topk.insert(ResultSubtree {
            root: pending.root,
            matches: matches.into_iter().map(|m| m.expect("all lists tightened")).collect(),
            distance,
            cohesiveness: theta,
            score: sigma,
            query: self.query.clone(),
        });
    }
}

/// Scan-eager traversal: walk the shortest list, pair every entry with
/// the closest partners from the other lists.
pub fn process_query_se(
    topk: &mut TopK,
    alpha: f64,
    query: &CandidateQuery,
    lists: &[Arc<PostingList>],
    intra: bool,
    stats: &mut EngineStats,
) {
    debug_assert!(lists.iter().all(|l| !l.is_empty()));
    let n = lists.len();
    let run = QueryRun::new(query, lists, alpha, intra);
    let shortest = run.tighten_order[0];
    let mut scan = SlcaScan::new();
    let mut cursors = vec![0usize; n];
    let mut codes: Vec<DeweyCode> = Vec::with_capacity(n);
    for pos in 0..lists[shortest].len() {
        let m1 = probe(&lists[shortest], pos, stats).code.clone();
        cursors[shortest] = pos;
        codes.clear();
        codes.push(m1.clone());
        for &j in &run.tighten_order[1..] {
            let (cpos, code) = closest(&lists[j], &m1, stats);
            cursors[j] = cpos;
            codes.push(code);
        }
        stats.lca_ops += 1;
        let v = lca_of(&codes);
        if let Some(confirmed) = scan.feed(v, &cursors) {
            run.tighten_and_insert(topk, confirmed, stats);
        }
    }
    if let Some(confirmed) = scan.finish() {
        run.tighten_and_insert(topk, confirmed, stats);
    }
}

/// Baseline: scan-eager without intra-query pruning.
pub fn process_query_bl(
    topk: &mut TopK,
    alpha: f64,
    query: &CandidateQuery,
    lists: &[Arc<PostingList>],
    stats: &mut EngineStats,
) {
    process_query_se(topk, alpha, query, lists, false, stats);
}

/// First position in `list` at or after `from` whose entry is greater
/// than `code`, by binary search.
pub(crate) fn advance_past(
    list: &PostingList,
    from: usize,
    code: &DeweyCode,
    stats: &mut EngineStats,
) -> usize {
    let mut lo = from;
    let mut hi = list.len();
    while lo < hi {
        let mid = (lo + hi) / 2;
        if probe(list, mid, stats).code <= *code {
            lo = mid + 1;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Anchor traversal: each round anchors on the document-order maximum of
/// the list frontiers, pairs it with closest partners drawn from the full
/// lists, and advances every frontier past the anchor, skipping runs that
/// cannot anchor new result roots.
pub fn process_query_an(
    topk: &mut TopK,
    alpha: f64,
    query: &CandidateQuery,
    lists: &[Arc<PostingList>],
    intra: bool,
    stats: &mut EngineStats,
) {
    debug_assert!(lists.iter().all(|l| !l.is_empty()));
    let n = lists.len();
    let run = QueryRun::new(query, lists, alpha, intra);
    let mut scan = SlcaScan::new();
    let mut frontier = vec![0usize; n];
    let mut cursors = vec![0usize; n];
    let mut codes: Vec<DeweyCode> = Vec::with_capacity(n);
    while (0..n).all(|i| frontier[i] < lists[i].len()) {
        let mut anchor = 0usize;
        let mut anchor_code = probe(&lists[0], frontier[0], stats).code.clone();
        for i in 1..n {
            let code = &probe(&lists[i], frontier[i], stats).code;
            if *code > anchor_code {
                anchor = i;
                anchor_code = code.clone();
            }
        }
        cursors[anchor] = frontier[anchor];
        codes.clear();
        codes.push(anchor_code.clone());
        for i in 0..n {
            if i == anchor {
                continue;
            }
            let (cpos, code) = closest(&lists[i], &anchor_code, stats);
            cursors[i] = cpos;
            codes.push(code);
        }
        stats.lca_ops += 1;
        let v = lca_of(&codes);
        if let Some(confirmed) = scan.feed(v, &cursors) {
            run.tighten_and_insert(topk, confirmed, stats);
        }
        for i in 0..n {
            frontier[i] = advance_past(&lists[i], frontier[i], &anchor_code, stats);
        }
    }
    if let Some(confirmed) = scan.finish() {
        run.tighten_and_insert(topk, confirmed, stats);
    }
}

/// Exhaustive SLCA: all match-node combinations, LCAs collected, LCAs
/// dominated by a descendant LCA removed. The reference the traversal
/// engines are checked against.
pub fn slca_brute(lists: &[Arc<PostingList>]) -> Vec<DeweyCode> {
    use std::collections::{BTreeSet, HashSet};
    assert!(!lists.is_empty());
    let mut lcas: BTreeSet<DeweyCode> = BTreeSet::new();
    // memoized exhaustive walk: the continuation depends only on the
    // (list index, lca so far) pair
    let mut seen: HashSet<(usize, DeweyCode)> = HashSet::new();
    let mut stack: Vec<(usize, DeweyCode)> = lists[0]
        .entries
        .iter()
        .map(|e| (1usize, e.code.clone()))
        .collect();
    while let Some((i, acc)) = stack.pop() {
        if !seen.insert((i, acc.clone())) {
            continue;
        }
        if i == lists.len() {
            lcas.insert(acc);
            continue;
        }
        for e in &lists[i].entries {
            stack.push((i + 1, acc.lca(&e.code)));
        }
    }
    // keep only smallest LCAs: in sorted order a dominated root is
    // immediately followed by one of its descendants
    let sorted: Vec<DeweyCode> = lcas.into_iter().collect();
    let mut out = Vec::new();
    for (i, v) in sorted.iter().enumerate() {
        let dominated = sorted
            .get(i + 1)
            .map(|next| v.is_ancestor_of(next))
            .unwrap_or(false);
        if !dominated {
            out.push(v.clone());
        }
    }
    out
}
