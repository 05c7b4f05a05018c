//! Word and word-pair primitives.

use std::fmt;

/// Ordered word pair `(a, b)`; for conditionals this reads "b given a".
pub type OrderedPair = (String, String);

/// Unordered word pair stored in canonical lexicographic order.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct WordPair {
    first: String,
    second: String,
}

impl WordPair {
    pub fn new(a: impl Into<String>, b: impl Into<String>) -> Self {
        let (a, b) = (a.into(), b.into());
        if a <= b {
            WordPair { first: a, second: b }
        } else {
            WordPair { first: b, second: a }
        }
    }

    /// Lexicographically smaller word.
    pub fn first(&self) -> &str {
        &self.first
    }

    pub fn second(&self) -> &str {
        &self.second
    }

    pub fn contains(&self, w: &str) -> bool {
        self.first == w || self.second == w
    }

    pub fn is_self_pair(&self) -> bool {
        self.first == self.second
    }

    /// The pair in canonical order as an ordered pair.
    pub fn canonical(&self) -> OrderedPair {
        (self.first.clone(), self.second.clone())
    }
}

impl fmt::Display for WordPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{}, {}}}", self.first, self.second)
    }
}

/// Normalizes a raw word: trims, lowercases and joins internal whitespace
/// runs with a single underscore. Returns `None` for an empty result.
pub fn normalize_word(raw: &str) -> Option<String> {
    let joined = raw.split_whitespace().collect::<Vec<_>>().join("_");
    if joined.is_empty() {
        None
    } else {
        Some(joined.to_lowercase())
    }
}
