//! Keyword inverted lists: build from a parsed tree, probe, persist.
//!
//! Single tokens are indexed eagerly. Multi-word phrases are registered on
//! demand (queries and taxonomy candidates introduce them), computed from
//! the single-token lists, and cached; registered phrases are persisted
//! alongside the single tokens.
//!
//! An index built in-process keeps per-node token positions, so phrase
//! registration verifies real adjacency. An index loaded from disk has node
//! granularity only (the file format stores no positions): a *new* phrase
//! registered against it falls back to co-occurrence within a node and is
//! reported by [`InvertedIndex::approximate_phrases`] so callers can warn.

use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, Write};
use std::path::Path;
use std::sync::{Arc, RwLock};

use crate::dewey::DeweyCode;
use crate::xml::{normalize_keyword, tokenize_node, XmlTree};

pub const INDEX_HEADER: &str = "SEMAQ-INDEX v1";
pub const INDEX_VERSION: &str = "v1";

/// One posting: a match node and its level (the level is derivable from
/// the code but stored for direct access).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PostingEntry {
    pub code: DeweyCode,
    pub level: u32,
}

impl PostingEntry {
    fn new(code: DeweyCode) -> Self {
        let level = code.level();
        PostingEntry { code, level }
    }
}

/// Document-ordered match-node list for one keyword.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PostingList {
    pub keyword: String,
    pub entries: Vec<PostingEntry>,
}

impl PostingList {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Position of `code`, or the insertion point if absent.
    pub fn search(&self, code: &DeweyCode) -> Result<usize, usize> {
        self.entries.binary_search_by(|e| e.code.cmp(code))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexMeta {
    pub source_path: String,
    pub node_count: u64,
    pub max_depth: u32,
}

#[derive(Debug, thiserror::Error)]
pub enum IndexError {
    #[error("index I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("index format error at line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("index version mismatch: file has {found}, this build reads {expected}")]
    Version { found: String, expected: String },
    #[error("index checksum mismatch: stored {stored}, computed {computed}")]
    Checksum { stored: String, computed: String },
    #[error("empty keyword")]
    EmptyKeyword,
}

/// Token occurrence inside one node's stream; kept in memory only.
#[derive(Debug, Clone)]
struct Occurrence {
    code: DeweyCode,
    position: u32,
}

pub struct InvertedIndex {
    meta: IndexMeta,
    terms: BTreeMap<String, Arc<PostingList>>,
    occurrences: Option<HashMap<String, Vec<Occurrence>>>,
    phrases: RwLock<PhraseCache>,
}

#[derive(Default)]
struct PhraseCache {
    lists: BTreeMap<String, Arc<PostingList>>,
    approximate: Vec<String>,
}

impl InvertedIndex {
    /// Builds the single-token index for a parsed tree.
    pub fn build(tree: &XmlTree) -> InvertedIndex {
        Self::build_named(tree, "")
    }

    pub fn build_named(tree: &XmlTree, source_path: &str) -> InvertedIndex {
        Self::build_opts(tree, source_path, true)
    }

    /// Build with element-name tokens optionally excluded from matching.
    pub fn build_opts(tree: &XmlTree, source_path: &str, tag_tokens: bool) -> InvertedIndex {
        let mut occurrences: HashMap<String, Vec<Occurrence>> = HashMap::new();
        for node in tree.nodes() {
            for token in tokenize_node(node, tag_tokens) {
                occurrences.entry(token.text).or_default().push(Occurrence {
                    code: token.node.clone(),
                    position: token.position,
                });
            }
        }
        let mut terms = BTreeMap::new();
        for (keyword, occ) in &occurrences {
            let mut entries: Vec<PostingEntry> = Vec::with_capacity(occ.len());
            for o in occ {
                // occurrences arrive in document order; collapse repeats
                if entries.last().map(|e| &e.code) != Some(&o.code) {
                    entries.push(PostingEntry::new(o.code.clone()));
                }
            }
            terms.insert(
                keyword.clone(),
                Arc::new(PostingList {
                    keyword: keyword.clone(),
                    entries,
                }),
            );
        }
        InvertedIndex {
            meta: IndexMeta {
                source_path: source_path.to_string(),
                node_count: tree.node_count() as u64,
                max_depth: tree.max_depth(),
            },
            terms,
            occurrences: Some(occurrences),
            phrases: RwLock::new(PhraseCache::default()),
        }
    }

    pub fn meta(&self) -> &IndexMeta {
        &self.meta
    }

    /// Number of posting lists currently held (single tokens plus
    /// registered phrases).
    pub fn keyword_count(&self) -> usize {
        self.terms.len() + self.phrases.read().unwrap().lists.len()
    }

    /// True when the keyword has at least one match node. Empty keywords
    /// are rejected.
    pub fn has_keyword(&self, keyword: &str) -> Result<bool, IndexError> {
        let normalized = normalize_keyword(keyword);
        if normalized.is_empty() {
            return Err(IndexError::EmptyKeyword);
        }
        Ok(self
            .posting_normalized(&normalized)
            .map(|l| !l.is_empty())
            .unwrap_or(false))
    }

    /// |S_keyword|; 0 for absent keywords.
    pub fn list_size(&self, keyword: &str) -> usize {
        let normalized = normalize_keyword(keyword);
        if normalized.is_empty() {
            return 0;
        }
        self.posting_normalized(&normalized)
            .map(|l| l.len())
            .unwrap_or(0)
    }

    /// The posting list for a keyword, registering a phrase on first use.
    /// Returns `None` when the keyword has no match nodes.
    pub fn posting(&self, keyword: &str) -> Option<Arc<PostingList>> {
        let normalized = normalize_keyword(keyword);
        if normalized.is_empty() {
            return None;
        }
        self.posting_normalized(&normalized).filter(|l| !l.is_empty())
    }

    fn posting_normalized(&self, normalized: &str) -> Option<Arc<PostingList>> {
        if !normalized.contains(' ') {
            return self.terms.get(normalized).cloned();
        }
        if let Some(list) = self.phrases.read().unwrap().lists.get(normalized) {
            return Some(list.clone());
        }
        let (list, approximate) = self.compute_phrase(normalized);
        let list = Arc::new(list);
        let mut cache = self.phrases.write().unwrap();
        let entry = cache
            .lists
            .entry(normalized.to_string())
            .or_insert_with(|| list.clone())
            .clone();
        if approximate && !cache.approximate.iter().any(|p| p == normalized) {
            cache.approximate.push(normalized.to_string());
        }
        Some(entry)
    }

    /// Phrases registered against a position-less (loaded) index whose
    /// lists were computed by co-occurrence rather than adjacency.
    pub fn approximate_phrases(&self) -> Vec<String> {
        self.phrases.read().unwrap().approximate.clone()
    }

    fn compute_phrase(&self, phrase: &str) -> (PostingList, bool) {
        let tokens: Vec<&str> = phrase.split(' ').collect();
        let empty = PostingList {
            keyword: phrase.to_string(),
            entries: Vec::new(),
        };
        let mut lists = Vec::with_capacity(tokens.len());
        for t in &tokens {
            match self.terms.get(*t) {
                Some(l) => lists.push(l.clone()),
                None => return (empty, false),
            }
        }
        // intersect by node: all lists are sorted in document order
        let mut candidates: Vec<DeweyCode> =
            lists[0].entries.iter().map(|e| e.code.clone()).collect();
        for list in &lists[1..] {
            candidates.retain(|c| list.search(c).is_ok());
            if candidates.is_empty() {
                return (empty, false);
            }
        }
        match &self.occurrences {
            Some(occ) => {
                let per_token: Vec<&Vec<Occurrence>> =
                    tokens.iter().map(|t| &occ[*t]).collect();
                candidates.retain(|c| phrase_contiguous_in(c, &per_token));
                (
                    PostingList {
                        keyword: phrase.to_string(),
                        entries: candidates.into_iter().map(PostingEntry::new).collect(),
                    },
                    false,
                )
            }
            None => (
                PostingList {
                    keyword: phrase.to_string(),
                    entries: candidates.into_iter().map(PostingEntry::new).collect(),
                },
                true,
            ),
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), IndexError> {
        let mut file = std::fs::File::create(path)?;
        let bytes = self.to_bytes();
        file.write_all(&bytes)?;
        Ok(())
    }

    /// The persisted form: header, meta, one line per keyword (sorted, with
    /// spaces encoded as `+`), and a trailing CRC-32 line.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut body = String::new();
        body.push_str(INDEX_HEADER);
        body.push('\n');
        body.push_str(&format!(
            "meta {} {}\n",
            self.meta.node_count, self.meta.max_depth
        ));
        let cache = self.phrases.read().unwrap();
        let mut lines: Vec<(String, &Arc<PostingList>)> = self
            .terms
            .iter()
            .map(|(k, l)| (k.clone(), l))
            .chain(
                cache
                    .lists
                    .iter()
                    .filter(|(_, l)| !l.is_empty())
                    .map(|(k, l)| (k.replace(' ', "+"), l)),
            )
            .collect();
        lines.sort_by(|a, b| a.0.cmp(&b.0));
        for (encoded, list) in lines {
            body.push_str(&encoded);
            body.push('\t');
            body.push_str(&list.len().to_string());
            body.push('\t');
            for (i, entry) in list.entries.iter().enumerate() {
                if i > 0 {
                    body.push(',');
                }
                body.push_str(&entry.code.to_string());
            }
            body.push('\n');
        }
        let crc = crc32(body.as_bytes());
        body.push_str(&format!("crc32 {crc:08x}\n"));
        body.into_bytes()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<InvertedIndex, IndexError> {
        let bytes = std::fs::read(&path)?;
        let mut index = Self::from_bytes(&bytes)?;
        index.meta.source_path = path.as_ref().display().to_string();
        Ok(index)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<InvertedIndex, IndexError> {
        let text = std::str::from_utf8(bytes).map_err(|_| IndexError::Format {
            line: 0,
            message: "index file is not valid UTF-8".into(),
        })?;

        // locate the final checksum line and verify it before parsing
        let trimmed = text.strip_suffix('\n').ok_or(IndexError::Format {
            line: 0,
            message: "missing trailing newline (truncated file?)".into(),
        })?;
        let crc_line_start = trimmed.rfind('\n').map(|i| i + 1).unwrap_or(0);
        let crc_line = &trimmed[crc_line_start..];
        let stored = crc_line
            .strip_prefix("crc32 ")
            .ok_or(IndexError::Checksum {
                stored: "<missing>".into(),
                computed: format!("{:08x}", crc32(text.as_bytes())),
            })?;
        let computed = format!("{:08x}", crc32(text[..crc_line_start].as_bytes()));
        if stored != computed {
            return Err(IndexError::Checksum {
                stored: stored.to_string(),
                computed,
            });
        }

        let mut lines = text[..crc_line_start].lines().enumerate();
        let (_, header) = lines.next().ok_or(IndexError::Format {
            line: 1,
            message: "missing header".into(),
        })?;
        if header != INDEX_HEADER {
            if let Some(version) = header.strip_prefix("SEMAQ-INDEX ") {
                return Err(IndexError::Version {
                    found: version.to_string(),
                    expected: INDEX_VERSION.to_string(),
                });
            }
            return Err(IndexError::Format {
                line: 1,
                message: format!("unrecognized header {header:?}"),
            });
        }
        let (_, meta_line) = lines.next().ok_or(IndexError::Format {
            line: 2,
            message: "missing meta line".into(),
        })?;
        let meta_parts: Vec<&str> = meta_line.split(' ').collect();
        let meta = match meta_parts.as_slice() {
            ["meta", nodes, depth] => IndexMeta {
                source_path: String::new(),
                node_count: nodes.parse().map_err(|_| IndexError::Format {
                    line: 2,
                    message: "bad node count".into(),
                })?,
                max_depth: depth.parse().map_err(|_| IndexError::Format {
                    line: 2,
                    message: "bad max depth".into(),
                })?,
            },
            _ => {
                return Err(IndexError::Format {
                    line: 2,
                    message: "malformed meta line".into(),
                })
            }
        };

        let mut terms = BTreeMap::new();
        let mut phrase_lists = BTreeMap::new();
        for (lineno, line) in lines {
            let lineno = lineno + 1;
            let mut fields = line.split('\t');
            let (encoded, count, codes) = match (fields.next(), fields.next(), fields.next()) {
                (Some(k), Some(c), Some(d)) if fields.next().is_none() => (k, c, d),
                _ => {
                    return Err(IndexError::Format {
                        line: lineno,
                        message: "expected keyword<TAB>count<TAB>codes".into(),
                    })
                }
            };
            let count: usize = count.parse().map_err(|_| IndexError::Format {
                line: lineno,
                message: "bad posting count".into(),
            })?;
            let mut entries: Vec<PostingEntry> = Vec::with_capacity(count);
            for part in codes.split(',') {
                let code: DeweyCode = part.parse().map_err(|_| IndexError::Format {
                    line: lineno,
                    message: format!("bad Dewey code {part:?}"),
                })?;
                if let Some(prev) = entries.last() {
                    if prev.code >= code {
                        return Err(IndexError::Format {
                            line: lineno,
                            message: "postings not strictly ascending".into(),
                        });
                    }
                }
                entries.push(PostingEntry::new(code));
            }
            if entries.len() != count {
                return Err(IndexError::Format {
                    line: lineno,
                    message: format!("count {} does not match {} codes", count, entries.len()),
                });
            }
            let keyword = encoded.replace('+', " ");
            let list = Arc::new(PostingList {
                keyword: keyword.clone(),
                entries,
            });
            if keyword.contains(' ') {
                phrase_lists.insert(keyword, list);
            } else {
                terms.insert(keyword, list);
            }
        }

        Ok(InvertedIndex {
            meta,
            terms,
            occurrences: None,
            phrases: RwLock::new(PhraseCache {
                lists: phrase_lists,
                approximate: Vec::new(),
            }),
        })
    }

    /// Structural equality on the persisted view: meta counts plus every
    /// posting list, ignoring source path and in-memory positions.
    pub fn same_structure(&self, other: &InvertedIndex) -> bool {
        self.meta.node_count == other.meta.node_count
            && self.meta.max_depth == other.meta.max_depth
            && self.terms.len() == other.terms.len()
            && self
                .terms
                .iter()
                .zip(other.terms.iter())
                .all(|((ka, la), (kb, lb))| ka == kb && la == lb)
            && {
                let a = self.phrases.read().unwrap();
                let b = other.phrases.read().unwrap();
                let na: Vec<_> = a.lists.iter().filter(|(_, l)| !l.is_empty()).collect();
                let nb: Vec<_> = b.lists.iter().filter(|(_, l)| !l.is_empty()).collect();
                na == nb
            }
    }
}

fn phrase_contiguous_in(code: &DeweyCode, per_token: &[&Vec<Occurrence>]) -> bool {
    let positions: Vec<Vec<u32>> = per_token
        .iter()
        .map(|occ| {
            occ.iter()
                .filter(|o| &o.code == code)
                .map(|o| o.position)
                .collect()
        })
        .collect();
    positions[0].iter().any(|&start| {
        positions[1..]
            .iter()
            .enumerate()
            .all(|(i, ps)| ps.binary_search(&(start + 1 + i as u32)).is_ok())
    })
}

const CRC32_TABLE: [u32; 256] = {
    let mut table = [0u32; 256];
    let mut i = 0;
    while i < 256 {
        let mut c = i as u32;
        let mut bit = 0;
        while bit < 8 {
            c = if c & 1 != 0 { 0xedb88320 ^ (c >> 1) } else { c >> 1 };
            bit += 1;
        }
        table[i] = c;
        i += 1;
    }
    table
};

/// CRC-32 (IEEE) over a byte slice.
pub fn crc32(bytes: &[u8]) -> u32 {
    let mut c = 0xffff_ffffu32;
    for &b in bytes {
        c = CRC32_TABLE[((c ^ b as u32) & 0xff) as usize] ^ (c >> 8);
    }
    c ^ 0xffff_ffff
}

/// Convenience: read a line-oriented stream (used by the CLI for spec
/// files); kept here so the format helpers live beside the format.
pub fn read_lines(reader: impl BufRead) -> std::io::Result<Vec<String>> {
    reader.lines().collect()
}
