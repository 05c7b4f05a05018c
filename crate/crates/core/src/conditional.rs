//! Resource-agnostic table of directional conditional probabilities.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{self, BufRead, Write};

use thiserror::Error;

use crate::scalar::{fmt_sig17, Real};

#[derive(Debug, Error)]
pub enum TableError {
    #[error("probability {prob} for ({a}, {b}) is outside (0, 1]")]
    OutOfRange { a: String, b: String, prob: f64 },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Sparse map `(a, b) -> P(b|a)` for one resource.
///
/// Lookups of pairs never inserted return `None`; a stored value is always in
/// `(0, 1]`, so absence is never confused with a zero probability.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalTable<T: Real = f64> {
    resource_id: String,
    probs: BTreeMap<(String, String), T>,
}

impl<T: Real> ConditionalTable<T> {
    pub fn new(resource_id: impl Into<String>) -> Self {
        ConditionalTable { resource_id: resource_id.into(), probs: BTreeMap::new() }
    }

    pub fn resource_id(&self) -> &str {
        &self.resource_id
    }

    /// Stores `P(b|a) = prob`, replacing any previous value.
    pub fn insert(&mut self, a: &str, b: &str, prob: T) -> Result<(), TableError> {
        if !(prob.is_finite() && prob > T::zero() && prob <= T::one()) {
            return Err(TableError::OutOfRange {
                a: a.to_string(),
                b: b.to_string(),
                prob: prob.as_f64(),
            });
        }
        self.probs.insert((a.to_string(), b.to_string()), prob);
        Ok(())
    }

    /// `P(b|a)`, or `None` when the pair is absent.
    pub fn get(&self, a: &str, b: &str) -> Option<T> {
        // BTreeMap<(String, String)> cannot be queried with borrowed tuples.
        self.probs.get(&(a.to_string(), b.to_string())).copied()
    }

    /// Both directions `(P(b|a), P(a|b))` when both are present.
    pub fn both(&self, a: &str, b: &str) -> Option<(T, T)> {
        Some((self.get(a, b)?, self.get(b, a)?))
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Entries in lexicographic `(a, b)` order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &str, T)> {
        self.probs.iter().map(|((a, b), p)| (a.as_str(), b.as_str(), *p))
    }

    pub fn words(&self) -> BTreeSet<String> {
        self.probs.keys().flat_map(|(a, b)| [a.clone(), b.clone()]).collect()
    }

    /// Writes `a\tb\tprob` rows, probabilities with 17 significant digits.
    /// `header` lines are emitted first, each prefixed with `# `.
    pub fn write_tsv<W: Write>(&self, mut w: W, header: &[String]) -> io::Result<()> {
        for h in header {
            writeln!(w, "# {h}")?;
        }
        for ((a, b), p) in &self.probs {
            writeln!(w, "{a}\t{b}\t{}", fmt_sig17(p.as_f64()))?;
        }
        Ok(())
    }

    /// Reads the TSV written by [`ConditionalTable::write_tsv`]; `#` lines are skipped.
    pub fn read_tsv<R: BufRead>(r: R, resource_id: impl Into<String>) -> Result<Self, TableError> {
        let mut table = ConditionalTable::new(resource_id);
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            let line = line.trim_end_matches('\r');
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 3 {
                return Err(TableError::Parse {
                    line: i + 1,
                    msg: format!("expected 3 tab-separated fields, got {}", fields.len()),
                });
            }
            let p: f64 = fields[2].parse().map_err(|e| TableError::Parse {
                line: i + 1,
                msg: format!("bad probability {:?}: {e}", fields[2]),
            })?;
            table.insert(fields[0], fields[1], T::from_f64_lossy(p))?;
        }
        Ok(table)
    }
}
