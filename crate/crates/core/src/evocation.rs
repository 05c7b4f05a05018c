//! Evocation (free-association) datasets in canonical `cue\tresponse\tcount` form.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{self, BufRead};

use thiserror::Error;

use crate::conditional::{ConditionalTable, TableError};
use crate::pair::{normalize_word, WordPair};
use crate::scalar::Real;

#[derive(Debug, Error)]
pub enum EvocationError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("line {line}: count must be positive, got {count}")]
    NonPositiveCount { line: usize, count: i64 },
    #[error("pair {0} is not observed in both directions")]
    NotClean(WordPair),
    #[error(transparent)]
    Table(#[from] TableError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Cue-to-response count table.
///
/// `cue_totals` are fixed at ingestion from the full, unfiltered responses and
/// serve as the FSG denominator `Count(a is cue)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvocationDataset {
    name: String,
    entries: BTreeMap<String, BTreeMap<String, u64>>,
    cue_totals: BTreeMap<String, u64>,
}

impl EvocationDataset {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn count(&self, cue: &str, response: &str) -> Option<u64> {
        self.entries.get(cue)?.get(response).copied()
    }

    pub fn cue_total(&self, cue: &str) -> Option<u64> {
        self.cue_totals.get(cue).copied()
    }

    pub fn cues(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn responses(&self, cue: &str) -> impl Iterator<Item = (&str, u64)> {
        self.entries
            .get(cue)
            .into_iter()
            .flat_map(|m| m.iter().map(|(r, c)| (r.as_str(), *c)))
    }

    /// Number of stored `(cue, response)` entries.
    pub fn len(&self) -> usize {
        self.entries.values().map(BTreeMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Every cue and response word.
    pub fn vocabulary(&self) -> BTreeSet<String> {
        let mut v: BTreeSet<String> = self.entries.keys().cloned().collect();
        for m in self.entries.values() {
            v.extend(m.keys().cloned());
        }
        v
    }

    /// FSG `P_D(b|a) = count(a -> b) / cue_total(a)`.
    pub fn prob(&self, cue: &str, response: &str) -> Option<f64> {
        let c = self.count(cue, response)?;
        let total = self.cue_total(cue)?;
        Some(c as f64 / total as f64)
    }
}

/// Parses a canonical TSV stream. Duplicate `(cue, response)` rows are summed
/// after case folding; multi-word entries are joined with `_`.
pub fn ingest_evocation<R: BufRead>(source: R, name: &str) -> Result<EvocationDataset, EvocationError> {
    let mut entries: BTreeMap<String, BTreeMap<String, u64>> = BTreeMap::new();
    for (i, line) in source.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(EvocationError::Parse {
                line: line_no,
                msg: format!("expected 3 tab-separated fields, got {}", fields.len()),
            });
        }
        let cue = normalize_word(fields[0])
            .ok_or_else(|| EvocationError::Parse { line: line_no, msg: "empty cue".into() })?;
        let response = normalize_word(fields[1])
            .ok_or_else(|| EvocationError::Parse { line: line_no, msg: "empty response".into() })?;
        let count: i64 = fields[2].trim().parse().map_err(|_| EvocationError::Parse {
            line: line_no,
            msg: format!("count {:?} is not an integer", fields[2]),
        })?;
        if count <= 0 {
            return Err(EvocationError::NonPositiveCount { line: line_no, count });
        }
        *entries.entry(cue).or_default().entry(response).or_insert(0) += count as u64;
    }
    let cue_totals = entries
        .iter()
        .map(|(cue, m)| (cue.clone(), m.values().sum()))
        .collect();
    Ok(EvocationDataset { name: name.to_string(), entries, cue_totals })
}

/// Unordered pairs observed as cue→response in both directions. Self-pairs
/// are excluded.
pub fn clean_pair_filter(d: &EvocationDataset) -> BTreeSet<WordPair> {
    let mut out = BTreeSet::new();
    for (a, responses) in &d.entries {
        for b in responses.keys() {
            if a < b && d.count(b, a).is_some() {
                out.insert(WordPair::new(a.as_str(), b.as_str()));
            }
        }
    }
    out
}

/// Count-based conditionals for both directions of every pair.
pub fn conditionals<'a, T: Real>(
    d: &EvocationDataset,
    pairs: impl IntoIterator<Item = &'a WordPair>,
) -> Result<ConditionalTable<T>, EvocationError> {
    let mut table = ConditionalTable::new(d.name());
    for pair in pairs {
        let (a, b) = (pair.first(), pair.second());
        let (Some(p_ba), Some(p_ab)) = (d.prob(a, b), d.prob(b, a)) else {
            return Err(EvocationError::NotClean(pair.clone()));
        };
        if pair.is_self_pair() {
            return Err(EvocationError::NotClean(pair.clone()));
        }
        table.insert(a, b, T::from_f64_lossy(p_ba))?;
        table.insert(b, a, T::from_f64_lossy(p_ab))?;
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::compensated_sum;

    fn ds(rows: &str) -> EvocationDataset {
        ingest_evocation(rows.as_bytes(), "t").unwrap()
    }

    #[test]
    fn cue_totals_sum_counts() {
        let d = ds("dog\tcat\t3\ndog\tbone\t1\n");
        assert_eq!(d.cue_total("dog"), Some(4));
    }

    #[test]
    fn case_folding_merges_duplicates() {
        let d = ds("Dog\tCAT\t2\ndog\tcat\t1\n");
        assert_eq!(d.count("dog", "cat"), Some(3));
        assert_eq!(d.len(), 1);
    }

    #[test]
    fn multiword_responses_use_underscore() {
        let d = ds("summer\tice  cream\t2\n");
        assert_eq!(d.count("summer", "ice_cream"), Some(2));
    }

    #[test]
    fn malformed_row_reports_line() {
        let err = ingest_evocation("a\tb\t1\na\tb\n".as_bytes(), "t").unwrap_err();
        assert!(matches!(err, EvocationError::Parse { line: 2, .. }), "{err}");
        let err = ingest_evocation("a\tb\tx\n".as_bytes(), "t").unwrap_err();
        assert!(matches!(err, EvocationError::Parse { line: 1, .. }));
    }

    #[test]
    fn non_positive_count_is_validation_error() {
        let err = ingest_evocation("a\tb\t0\n".as_bytes(), "t").unwrap_err();
        assert!(matches!(err, EvocationError::NonPositiveCount { line: 1, count: 0 }));
        let err = ingest_evocation("a\tb\t-3\n".as_bytes(), "t").unwrap_err();
        assert!(matches!(err, EvocationError::NonPositiveCount { count: -3, .. }));
    }

    #[test]
    fn clean_filter_requires_both_directions() {
        let d = ds("a\tb\t5\nb\ta\t2\nc\td\t5\n");
        let clean = clean_pair_filter(&d);
        assert!(clean.contains(&WordPair::new("a", "b")));
        assert!(!clean.contains(&WordPair::new("c", "d")));
        assert_eq!(clean.len(), 1);
    }

    #[test]
    fn fsg_division() {
        let d = ds("dog\tcat\t4\ndog\tbone\t4\ncat\tdog\t1\n");
        let pairs = clean_pair_filter(&d);
        let t: ConditionalTable = conditionals(&d, &pairs).unwrap();
        assert_eq!(t.get("dog", "cat"), Some(0.5));
        assert_eq!(t.get("cat", "dog"), Some(1.0));
    }

    #[test]
    fn filtering_never_rescales() {
        let d = ds("a\tb\t1\na\tz\t3\nb\ta\t1\n");
        let t: ConditionalTable = conditionals(&d, &clean_pair_filter(&d)).unwrap();
        assert_eq!(t.get("a", "b"), Some(0.25));
    }

    #[test]
    fn unclean_pair_is_precondition_error() {
        let d = ds("a\tb\t1\n");
        let bad = [WordPair::new("a", "b")];
        assert!(matches!(
            conditionals::<f64>(&d, &bad),
            Err(EvocationError::NotClean(_))
        ));
    }

    #[test]
    fn distribution_normalizes() {
        let d = ds("a\tb\t7\na\tc\t3\na\td\t11\nb\ta\t1\nb\tq\t2\n");
        for cue in d.cues() {
            let s = compensated_sum(d.responses(cue).map(|(r, _)| d.prob(cue, r).unwrap()));
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn ingestion_is_idempotent() {
        let rows = "x\ty\t2\nY\tx\t1\nx\ty\t1\n";
        assert_eq!(ds(rows), ds(rows));
    }
}
