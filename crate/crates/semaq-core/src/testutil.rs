//! Shared helpers for unit tests: bundled fixtures and tiny builders.

use std::collections::BTreeSet;
use std::sync::Arc;

use crate::dewey::DeweyCode;
use crate::index::{InvertedIndex, PostingEntry, PostingList};
use crate::ontology::Taxonomy;
use crate::query::CandidateQuery;
use crate::xml::{parse_document, XmlTree};

pub fn fixture(name: &str) -> String {
    let path = format!("{}/../../fixtures/{name}", env!("CARGO_MANIFEST_DIR"));
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("reading {path}: {e}"))
}

pub fn university_tree() -> XmlTree {
    parse_document(fixture("university.xml").as_bytes()).unwrap()
}

pub fn university_index() -> InvertedIndex {
    InvertedIndex::build(&university_tree())
}

pub fn semantics_taxonomy() -> Taxonomy {
    Taxonomy::from_str(&fixture("semantics.tax")).unwrap()
}

pub fn code(s: &str) -> DeweyCode {
    s.parse().unwrap()
}

pub fn list_of(keyword: &str, codes: &[&str]) -> Arc<PostingList> {
    Arc::new(PostingList {
        keyword: keyword.into(),
        entries: codes
            .iter()
            .map(|c| {
                let code: DeweyCode = c.parse().unwrap();
                let level = code.level();
                PostingEntry { code, level }
            })
            .collect(),
    })
}

pub fn plain_query(keywords: &[&str], sim: f64) -> CandidateQuery {
    CandidateQuery {
        keywords: keywords.iter().map(|s| s.to_string()).collect(),
        replaced: BTreeSet::new(),
        sim,
    }
}
