//! Seeded random instances for the equivalence and soundness suites:
//! small documents, small taxonomies, and queries engineered to have the
//! no-but-semantic-match property.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use semaq_core::index::InvertedIndex;
use semaq_core::ontology::Taxonomy;
use semaq_core::query::{diagnose, generate, CandidateQuery, OriginalQuery, QueryClass};
use semaq_core::xml::parse_document;

pub const VOCAB: [&str; 12] = [
    "alpha", "bravo", "charlie", "delta", "echo", "foxtrot", "golf", "hotel", "india", "juliet",
    "kilo", "lima",
];

const LABELS: [&str; 5] = ["item", "entry", "block", "leaf", "part"];

pub struct Instance {
    pub xml: String,
    pub index: InvertedIndex,
    pub tax: Taxonomy,
    pub q0: OriginalQuery,
    pub queries: Vec<CandidateQuery>,
}

/// A random ordered tree serialized as XML: up to `max_nodes` elements,
/// each holding zero to two vocabulary tokens.
pub fn random_xml(rng: &mut ChaCha8Rng, max_nodes: usize) -> String {
    let n = rng.random_range(4..=max_nodes.max(5));
    let mut parents = vec![0usize; n];
    for (i, p) in parents.iter_mut().enumerate().skip(1) {
        *p = rng.random_range(0..i);
    }
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 1..n {
        children[parents[i]].push(i);
    }
    let mut texts: Vec<String> = Vec::with_capacity(n);
    for _ in 0..n {
        let tokens = rng.random_range(0..=2usize);
        let words: Vec<&str> = (0..tokens)
            .map(|_| {
                // skew toward the front of the vocabulary
                let at = (rng.random::<f64>().powi(2) * VOCAB.len() as f64) as usize;
                VOCAB[at.min(VOCAB.len() - 1)]
            })
            .collect();
        texts.push(words.join(" "));
    }
    let mut out = String::new();
    fn emit(
        at: usize,
        children: &[Vec<usize>],
        texts: &[String],
        labels: &[&str],
        rng: &mut ChaCha8Rng,
        out: &mut String,
    ) {
        let label = labels[rng.random_range(0..labels.len())];
        out.push('<');
        out.push_str(label);
        out.push('>');
        out.push_str(&texts[at]);
        for &c in &children[at] {
            emit(c, children, texts, labels, rng, out);
        }
        out.push_str("</");
        out.push_str(label);
        out.push('>');
    }
    emit(0, &children, &texts, &LABELS, rng, &mut out);
    out
}

/// A random taxonomy over the vocabulary plus outside terms, with the
/// designated query terms spliced into random synsets so their one-hop
/// neighborhoods reach indexable words.
pub fn random_taxonomy(rng: &mut ChaCha8Rng, max_synsets: usize, query_terms: &[String]) -> String {
    let n = rng.random_range(3..=max_synsets.max(4));
    let mut lines = vec!["SEMAQ-TAX v1".to_string()];
    let mut term_pools: Vec<Vec<String>> = Vec::with_capacity(n);
    for i in 0..n {
        let parent = if i == 0 || rng.random::<f64>() < 0.2 {
            "-".to_string()
        } else {
            format!("s{}", rng.random_range(0..i))
        };
        let terms = rng.random_range(1..=2usize);
        let mut pool = Vec::with_capacity(terms);
        for _ in 0..terms {
            if rng.random::<f64>() < 0.55 {
                pool.push(VOCAB[rng.random_range(0..VOCAB.len())].to_string());
            } else {
                pool.push(format!("term{}x{}", i, rng.random_range(0..3)));
            }
        }
        term_pools.push(pool);
        lines.push(format!("s{i}\t{parent}\t"));
    }
    for term in query_terms {
        let at = rng.random_range(0..n);
        term_pools[at].push(term.clone());
    }
    for (i, pool) in term_pools.iter().enumerate() {
        lines[i + 1].push_str(&pool.join("|"));
    }
    lines.join("\n") + "\n"
}

/// Draws instances until one diagnoses as no-but-semantic-match with a
/// candidate product in `1..=max_candidates`.
pub fn random_instance(rng: &mut ChaCha8Rng, max_candidates: usize) -> Instance {
    for _ in 0..500 {
        let xml = random_xml(rng, 60);
        let tree = parse_document(xml.as_bytes()).expect("generated XML parses");
        let index = InvertedIndex::build(&tree);

        let missing_count = rng.random_range(1..=2usize);
        let query_len = rng.random_range(2..=4usize).max(missing_count + 1);
        let missing_terms: Vec<String> = (0..missing_count)
            .map(|i| format!("missing{}q{}", i, rng.random_range(0..1000)))
            .collect();

        let tax_text = random_taxonomy(rng, 40, &missing_terms);
        let Ok(tax) = Taxonomy::from_str(&tax_text) else {
            continue;
        };

        // mapped positions draw real document tokens
        let mut keywords: Vec<String> = Vec::with_capacity(query_len);
        let mapped_needed = query_len - missing_count;
        let mut mapped = 0;
        for w in VOCAB.iter().cycle().skip(rng.random_range(0..VOCAB.len())) {
            if mapped == mapped_needed {
                break;
            }
            if index.has_keyword(w).unwrap_or(false) && !keywords.contains(&w.to_string()) {
                keywords.push(w.to_string());
                mapped += 1;
            }
            if keywords.len() > 40 {
                break;
            }
        }
        if mapped < mapped_needed {
            continue;
        }
        keywords.extend(missing_terms.iter().cloned());
        // shuffle positions
        for i in (1..keywords.len()).rev() {
            let j = rng.random_range(0..=i);
            keywords.swap(i, j);
        }

        let Ok(q0) = OriginalQuery::new(&keywords) else {
            continue;
        };
        let report = diagnose(&q0, &index, &tax);
        if report.classify() != QueryClass::NoButSemanticMatch {
            continue;
        }
        let set = generate(&q0, &report, &tax, &index, max_candidates + 1);
        if set.queries.is_empty() || set.overflowed || set.queries.len() > max_candidates {
            continue;
        }
        let queries = set.queries;
        return Instance {
            xml,
            index,
            tax,
            q0,
            queries,
        };
    }
    panic!("exhausted attempts while drawing a random instance");
}
