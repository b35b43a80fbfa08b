//! Taxonomy knowledge base: a forest of synsets with depth-based
//! similarity between terms.
//!
//! Candidate keywords for a term come from four one-hop relations: its own
//! synset (synonyms), synsets sharing its parent (coordinate terms), child
//! synsets (hyponyms) and parent synsets (hypernyms). Similarity is Wu and
//! Palmer's depth ratio, and the directional variant scales it by
//! `dep(candidate)/max(dep(original), dep(candidate))` so substituting a
//! more general term costs similarity while an equally deep or deeper one
//! does not.

use std::collections::HashMap;
use std::path::Path;

use crate::xml::normalize_keyword;

pub const TAX_HEADER: &str = "SEMAQ-TAX v1";

#[derive(Debug, Clone)]
pub struct Synset {
    pub id: String,
    pub parent_id: Option<String>,
    pub terms: Vec<String>,
    /// Root synsets have depth 1.
    pub depth: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Relation {
    Synonym,
    Coordinate,
    Hyponym,
    Hypernym,
}

impl Relation {
    pub fn as_str(self) -> &'static str {
        match self {
            Relation::Synonym => "synonym",
            Relation::Coordinate => "coordinate",
            Relation::Hyponym => "hyponym",
            Relation::Hypernym => "hypernym",
        }
    }
}

/// One ontological substitute for a query keyword.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateKeyword {
    pub term: String,
    pub relation: Relation,
    pub dsim: f64,
}

#[derive(Debug, thiserror::Error)]
pub enum TaxonomyError {
    #[error("taxonomy I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("taxonomy format error at line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("duplicate synset id {0:?}")]
    DuplicateSynset(String),
    #[error("synset {id:?} names missing parent {parent:?}")]
    DanglingParent { id: String, parent: String },
    #[error("parent cycle through synset {0:?}")]
    Cycle(String),
}

pub struct Taxonomy {
    synsets: Vec<Synset>,
    parents: Vec<Option<usize>>,
    children: Vec<Vec<usize>>,
    by_term: HashMap<String, Vec<usize>>,
}

impl Taxonomy {
    pub fn load(path: impl AsRef<Path>) -> Result<Taxonomy, TaxonomyError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_str(&text)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn from_str(text: &str) -> Result<Taxonomy, TaxonomyError> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, header)) if header == TAX_HEADER => {}
            Some((_, header)) => {
                return Err(TaxonomyError::Format {
                    line: 1,
                    message: format!("expected {TAX_HEADER:?}, found {header:?}"),
                })
            }
            None => {
                return Err(TaxonomyError::Format {
                    line: 1,
                    message: "empty taxonomy file".into(),
                })
            }
        }

        let mut synsets: Vec<Synset> = Vec::new();
        let mut by_id: HashMap<String, usize> = HashMap::new();
        for (lineno, line) in lines {
            let lineno = lineno + 1;
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            let [id, parent, terms] = fields.as_slice() else {
                return Err(TaxonomyError::Format {
                    line: lineno,
                    message: "expected id<TAB>parent<TAB>term|term|...".into(),
                });
            };
            let id = id.trim().to_string();
            if id.is_empty() {
                return Err(TaxonomyError::Format {
                    line: lineno,
                    message: "empty synset id".into(),
                });
            }
            if by_id.contains_key(&id) {
                return Err(TaxonomyError::DuplicateSynset(id));
            }
            let parent_id = match parent.trim() {
                "-" => None,
                p => Some(p.to_string()),
            };
            let terms: Vec<String> = terms
                .split('|')
                .map(normalize_keyword)
                .filter(|t| !t.is_empty())
                .collect();
            if terms.is_empty() {
                return Err(TaxonomyError::Format {
                    line: lineno,
                    message: format!("synset {id:?} has no terms"),
                });
            }
            by_id.insert(id.clone(), synsets.len());
            synsets.push(Synset {
                id,
                parent_id,
                terms,
                depth: 0,
            });
        }

        // second pass: resolve parents, then depths with cycle detection
        let mut parents: Vec<Option<usize>> = Vec::with_capacity(synsets.len());
        for s in &synsets {
            match &s.parent_id {
                None => parents.push(None),
                Some(pid) => match by_id.get(pid) {
                    Some(&p) => parents.push(Some(p)),
                    None => {
                        return Err(TaxonomyError::DanglingParent {
                            id: s.id.clone(),
                            parent: pid.clone(),
                        })
                    }
                },
            }
        }

        let mut depth = vec![0u32; synsets.len()];
        for start in 0..synsets.len() {
            if depth[start] != 0 {
                continue;
            }
            let mut chain = Vec::new();
            let mut cur = start;
            loop {
                if chain.contains(&cur) {
                    return Err(TaxonomyError::Cycle(synsets[cur].id.clone()));
                }
                if depth[cur] != 0 {
                    break;
                }
                chain.push(cur);
                match parents[cur] {
                    Some(p) => cur = p,
                    None => break,
                }
            }
            // zero when the chain ended at an unvisited root
            let mut d = depth[cur];
            for &idx in chain.iter().rev() {
                d += 1;
                depth[idx] = d;
            }
        }
        for (s, d) in synsets.iter_mut().zip(&depth) {
            s.depth = *d;
        }

        let mut children: Vec<Vec<usize>> = vec![Vec::new(); synsets.len()];
        for (i, p) in parents.iter().enumerate() {
            if let Some(p) = p {
                children[*p].push(i);
            }
        }
        let mut by_term: HashMap<String, Vec<usize>> = HashMap::new();
        for (i, s) in synsets.iter().enumerate() {
            for t in &s.terms {
                by_term.entry(t.clone()).or_default().push(i);
            }
        }

        Ok(Taxonomy {
            synsets,
            parents,
            children,
            by_term,
        })
    }

    pub fn synsets(&self) -> &[Synset] {
        &self.synsets
    }

    pub fn contains_term(&self, term: &str) -> bool {
        self.by_term.contains_key(&normalize_keyword(term))
    }

    /// Synset indices containing `term` (a term may carry several senses).
    pub fn senses(&self, term: &str) -> &[usize] {
        self.by_term
            .get(&normalize_keyword(term))
            .map(|v| v.as_slice())
            .unwrap_or(&[])
    }

    /// Depth of the deepest common ancestor of two synsets, if they share a
    /// root.
    fn lcs_depth(&self, a: usize, b: usize) -> Option<u32> {
        let mut chain = Vec::new();
        let mut cur = Some(a);
        while let Some(i) = cur {
            chain.push(i);
            cur = self.parents[i];
        }
        let mut cur = Some(b);
        while let Some(i) = cur {
            if chain.contains(&i) {
                return Some(self.synsets[i].depth);
            }
            cur = self.parents[i];
        }
        None
    }

    fn pair_sim_wp(&self, a: usize, b: usize) -> f64 {
        match self.lcs_depth(a, b) {
            Some(lcs) => {
                2.0 * lcs as f64 / (self.synsets[a].depth + self.synsets[b].depth) as f64
            }
            None => 0.0,
        }
    }

    fn pair_dsim(&self, original: usize, candidate: usize) -> f64 {
        let d_orig = self.synsets[original].depth as f64;
        let d_cand = self.synsets[candidate].depth as f64;
        d_cand / d_orig.max(d_cand) * self.pair_sim_wp(original, candidate)
    }

    /// Wu-Palmer similarity between two terms, maximized over sense pairs;
    /// 0 when the terms share no root (such pairs never become candidates).
    pub fn sim_wp(&self, k1: &str, k2: &str) -> f64 {
        let mut best = 0.0f64;
        for &a in self.senses(k1) {
            for &b in self.senses(k2) {
                best = best.max(self.pair_sim_wp(a, b));
            }
        }
        best
    }

    /// Directional similarity of `original` to `candidate`, maximized over
    /// sense pairs. Asymmetric: a shallower (more general) candidate is
    /// penalized by the depth ratio, a deeper or equally deep one is not.
    pub fn dsim(&self, original: &str, candidate: &str) -> f64 {
        let mut best = 0.0f64;
        for &a in self.senses(original) {
            for &b in self.senses(candidate) {
                best = best.max(self.pair_dsim(a, b));
            }
        }
        best
    }

    /// Candidate substitutes for `keyword`: union over its senses of
    /// synonyms, coordinate terms, hyponyms and hypernyms, each scored with
    /// its best DSim. The keyword itself is excluded. Sorted by DSim
    /// descending, then term, for deterministic downstream processing.
    pub fn candidates(&self, keyword: &str) -> Vec<CandidateKeyword> {
        let keyword = normalize_keyword(keyword);
        let mut found: Vec<(&str, Relation)> = Vec::new();
        for &s in self.senses(&keyword) {
            for t in &self.synsets[s].terms {
                found.push((t, Relation::Synonym));
            }
            if let Some(p) = self.parents[s] {
                for t in &self.synsets[p].terms {
                    found.push((t, Relation::Hypernym));
                }
                for &sib in &self.children[p] {
                    if sib != s {
                        for t in &self.synsets[sib].terms {
                            found.push((t, Relation::Coordinate));
                        }
                    }
                }
            }
            for &c in &self.children[s] {
                for t in &self.synsets[c].terms {
                    found.push((t, Relation::Hyponym));
                }
            }
        }
        // relation ties resolve to the most specific generation path
        let mut relations: HashMap<&str, Relation> = HashMap::new();
        for (t, r) in found {
            if t != keyword {
                relations
                    .entry(t)
                    .and_modify(|cur| {
                        if r < *cur {
                            *cur = r;
                        }
                    })
                    .or_insert(r);
            }
        }

        let mut out: Vec<CandidateKeyword> = relations
            .into_iter()
            .map(|(term, relation)| CandidateKeyword {
                dsim: self.dsim(&keyword, term),
                term: term.to_string(),
                relation,
            })
            .filter(|c| c.dsim > 0.0)
            .collect();
        out.sort_by(|a, b| {
            b.dsim
                .partial_cmp(&a.dsim)
                .unwrap()
                .then_with(|| a.term.cmp(&b.term))
        });
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tax(body: &str) -> Taxonomy {
        Taxonomy::from_str(&format!("{TAX_HEADER}\n{body}")).unwrap()
    }

    /// One chain of filler synsets per line: `c0 -> c1 -> ...`.
    fn chain(prefix: &str, len: usize) -> String {
        let mut out = String::new();
        for i in 0..len {
            let parent = if i == 0 {
                "-".to_string()
            } else {
                format!("{prefix}{}", i - 1)
            };
            out.push_str(&format!("{prefix}{i}\t{parent}\t{prefix}word{i}\n"));
        }
        out
    }

    #[test]
    fn two_synset_chain_depths() {
        let t = tax("root\t-\tthing\nchild\troot\tgadget\n");
        assert_eq!(t.synsets()[0].depth, 1);
        assert_eq!(t.synsets()[1].depth, 2);
    }

    #[test]
    fn cycle_is_reported_with_the_entry_synset() {
        let text = format!("{TAX_HEADER}\nA\tB\ta\nB\tA\tb\n");
        match Taxonomy::from_str(&text) {
            Err(TaxonomyError::Cycle(id)) => assert_eq!(id, "A"),
            other => panic!("expected cycle error, got {:?}", other.err()),
        }
    }

    #[test]
    fn dangling_parent_and_duplicate_ids() {
        let text = format!("{TAX_HEADER}\nA\tmissing\ta\n");
        assert!(matches!(
            Taxonomy::from_str(&text),
            Err(TaxonomyError::DanglingParent { .. })
        ));
        let text = format!("{TAX_HEADER}\nA\t-\ta\nA\t-\tb\n");
        assert!(matches!(
            Taxonomy::from_str(&text),
            Err(TaxonomyError::DuplicateSynset(_))
        ));
    }

    #[test]
    fn sim_wp_identity_and_siblings() {
        let t = tax("p\t-\tparent\nx\tp\tleft\ny\tp\tright\nxx\tx\tdeep\n");
        assert_eq!(t.sim_wp("left", "left"), 1.0);
        // siblings at depth 2 with LCS depth 1
        assert!((t.sim_wp("left", "right") - 2.0 / 4.0).abs() < 1e-12);
        assert_eq!(t.sim_wp("left", "right"), t.sim_wp("right", "left"));
    }

    #[test]
    fn siblings_at_depth_four() {
        // depth-3 chain then two children at depth 4: sim = 2*3/8
        let t = tax(&format!(
            "{}a\tc2\tleft\nb\tc2\tright\n",
            chain("c", 3)
        ));
        assert!((t.sim_wp("left", "right") - 0.75).abs() < 1e-12);
    }

    #[test]
    fn deep_siblings_mirror_example_values() {
        // depth-10 chain, two children at depth 11: 2*10/22 = 10/11
        let t = tax(&format!(
            "{}a\tc9\tlecturer\nb\tc9\tacademic\n",
            chain("c", 10)
        ));
        let got = t.sim_wp("lecturer", "academic");
        assert!((got - 10.0 / 11.0).abs() < 1e-12);
        assert!((got - 0.909).abs() < 0.001);
    }

    #[test]
    fn dsim_synonym_is_one_and_hypernym_is_penalized() {
        let t = tax(&format!("{}syn\tc3\talpha|beta\n", chain("c", 4)));
        assert_eq!(t.dsim("alpha", "beta"), 1.0);
        // parent at depth d-1=4 of a term at depth d=5... use d=4 case:
        let t = tax(&format!("{}leaf\tc2\tterm\n", chain("c", 3)));
        // term depth 4, parent cword2 depth 3, LCS = parent
        let got = t.dsim("term", "cword2");
        let expect = (3.0 / 4.0) * (6.0 / 7.0);
        assert!((got - expect).abs() < 1e-12);
        assert!((got - 0.643).abs() < 0.001);
        // the reverse direction (deeper candidate) is not depth-penalized
        let up = t.dsim("cword2", "term");
        assert!((up - 6.0 / 7.0).abs() < 1e-12);
    }

    #[test]
    fn disconnected_terms_have_zero_similarity_and_no_candidates() {
        let t = tax("r1\t-\tfoo\nr2\t-\tbar\n");
        assert_eq!(t.sim_wp("foo", "bar"), 0.0);
        assert!(t.candidates("baz").is_empty());
    }

    #[test]
    fn candidates_cover_all_four_relations() {
        let t = tax(
            "top\t-\tentity\n\
             mid\ttop\tvehicle|conveyance\n\
             sib\ttop\tanimal\n\
             low\tmid\tcar\n",
        );
        let cands = t.candidates("vehicle");
        let by_term: HashMap<_, _> = cands.iter().map(|c| (c.term.as_str(), c)).collect();
        assert_eq!(by_term["conveyance"].relation, Relation::Synonym);
        assert_eq!(by_term["conveyance"].dsim, 1.0);
        assert_eq!(by_term["animal"].relation, Relation::Coordinate);
        assert_eq!(by_term["car"].relation, Relation::Hyponym);
        assert_eq!(by_term["entity"].relation, Relation::Hypernym);
        assert_eq!(by_term.len(), 4);
        // sorted by dsim descending
        for w in cands.windows(2) {
            assert!(w[0].dsim >= w[1].dsim);
        }
    }

    #[test]
    fn polysemy_takes_the_best_sense_pair() {
        // "bank" as institution (deep) and as river edge (shallow)
        let t = tax(&format!(
            "{}{}inst\ta2\tbank|lender\nedge\tb0\tbank|shore\n",
            chain("a", 3),
            chain("b", 1)
        ));
        // lender pairs with the deep sense: synonym, dsim 1
        assert_eq!(t.dsim("bank", "lender"), 1.0);
        assert_eq!(t.dsim("shore", "bank"), 1.0);
    }
}
