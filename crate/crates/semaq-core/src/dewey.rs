//! Dewey codes: path-based node identifiers for ordered trees.
//!
//! A node's code is its parent's code extended with the node's zero-based
//! child ordinal. Two facts make these codes the workhorse of the whole
//! engine: lexicographic comparison of component sequences is exactly
//! document order, and `a` is an ancestor of `b` exactly when `a`'s
//! components are a strict prefix of `b`'s.

use std::fmt;
use std::str::FromStr;

/// Hierarchical node identifier. The document root is the single
/// component `0` and sits at level 1.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DeweyCode {
    components: Vec<u32>,
}

impl DeweyCode {
    /// The root code `0`.
    pub fn root() -> Self {
        DeweyCode {
            components: vec![0],
        }
    }

    /// Builds a code from raw components. Codes are never empty.
    pub fn new(components: Vec<u32>) -> Self {
        debug_assert!(!components.is_empty(), "a Dewey code has at least one component");
        DeweyCode { components }
    }

    /// The code of this node's `ordinal`-th child (zero-based).
    pub fn child(&self, ordinal: u32) -> Self {
        let mut components = self.components.clone();
        components.push(ordinal);
        DeweyCode { components }
    }

    pub fn parent(&self) -> Option<DeweyCode> {
        if self.components.len() <= 1 {
            return None;
        }
        Some(DeweyCode {
            components: self.components[..self.components.len() - 1].to_vec(),
        })
    }

    /// Depth of the node; the root has level 1.
    pub fn level(&self) -> u32 {
        self.components.len() as u32
    }

    pub fn components(&self) -> &[u32] {
        &self.components
    }

    /// Strict-prefix test: `self` is a proper ancestor of `other`.
    pub fn is_ancestor_of(&self, other: &DeweyCode) -> bool {
        self.components.len() < other.components.len()
            && other.components[..self.components.len()] == self.components[..]
    }

    /// Prefix-or-equal test.
    pub fn is_ancestor_or_self_of(&self, other: &DeweyCode) -> bool {
        self.components.len() <= other.components.len()
            && other.components[..self.components.len()] == self.components[..]
    }

    /// Lowest common ancestor of two codes: the longest common prefix.
    ///
    /// All codes in one document share the root component, so the result is
    /// never empty for codes drawn from the same tree.
    pub fn lca(&self, other: &DeweyCode) -> DeweyCode {
        let shared = self
            .components
            .iter()
            .zip(other.components.iter())
            .take_while(|(a, b)| a == b)
            .count();
        debug_assert!(shared > 0, "lca of codes from unrelated trees");
        DeweyCode {
            components: self.components[..shared].to_vec(),
        }
    }

    /// Proper ancestors, deepest first, ending at the root.
    pub fn ancestors(&self) -> impl Iterator<Item = DeweyCode> + '_ {
        (1..self.components.len())
            .rev()
            .map(move |len| DeweyCode {
                components: self.components[..len].to_vec(),
            })
    }
}

/// Lowest common ancestor of a non-empty set of codes.
pub fn lca_of(codes: &[DeweyCode]) -> DeweyCode {
    assert!(!codes.is_empty(), "lca_of requires at least one code");
    let mut acc = codes[0].clone();
    for code in &codes[1..] {
        acc = acc.lca(code);
    }
    acc
}

impl fmt::Display for DeweyCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, c) in self.components.iter().enumerate() {
            if i > 0 {
                write!(f, ".")?;
            }
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

impl fmt::Debug for DeweyCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{self}]")
    }
}

/// Error parsing a textual Dewey code such as `0.2.1.0.0`.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid Dewey code {input:?}")]
pub struct ParseDeweyError {
    pub input: String,
}

impl FromStr for DeweyCode {
    type Err = ParseDeweyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || ParseDeweyError {
            input: s.to_string(),
        };
        if s.is_empty() {
            return Err(err());
        }
        let mut components = Vec::new();
        for part in s.split('.') {
            components.push(part.parse::<u32>().map_err(|_| err())?);
        }
        Ok(DeweyCode { components })
    }
}
