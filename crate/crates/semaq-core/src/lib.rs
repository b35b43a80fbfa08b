//! Semantic XML keyword search.
//!
//! When a keyword query has no match in an XML document, this library
//! substitutes the missing keywords with taxonomy-derived counterparts,
//! executes the resulting candidate queries against keyword inverted
//! lists, and returns the top-k subtree results ranked by query
//! similarity times result cohesiveness. Candidate queries are processed
//! with threshold pruning, individually (scan-eager or anchor traversal)
//! or in batches that compute shared-keyword results once.
//!
//! Components:
//!
//! * [`xml`] / [`dewey`] - parse documents into Dewey-coded trees;
//! * [`index`] - build, persist and probe keyword inverted lists;
//! * [`ontology`] - taxonomy loading and directional term similarity;
//! * [`query`] - no-match diagnosis and candidate query generation;
//! * [`engine`] - SLCA traversal engines and the top-k heap;
//! * [`batch`] - cost-based batching with shared-part computation;
//! * [`framework`] - end-to-end execution;
//! * [`oracle`] - exhaustive reference implementations for tests.

pub mod batch;
pub mod dewey;
pub mod engine;
pub mod framework;
pub mod index;
pub mod ontology;
pub mod oracle;
pub mod query;
pub mod scoring;
pub mod xml;

#[cfg(test)]
pub(crate) mod testutil;

pub use dewey::DeweyCode;
pub use engine::{EngineKind, EngineStats, PruningConfig, ResultSubtree, TopK};
pub use framework::{run_framework, SearchConfig, SearchOutcome, SearchReport};
pub use index::InvertedIndex;
pub use ontology::Taxonomy;
pub use query::{CandidateQuery, OriginalQuery};
pub use xml::{parse_document, XmlTree};
