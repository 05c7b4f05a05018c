use std::collections::BTreeMap;
use std::io::BufRead;

use super::{geometric_mean_similarity, spearman_test, MetricError};
use crate::conditional::ConditionalTable;
use crate::pair::{normalize_word, WordPair};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct GoldRating {
    pub a: String,
    pub b: String,
    pub rating: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityEval {
    pub rho: f64,
    pub p_value: f64,
    pub used: usize,
    pub excluded: usize,
}

/// Reads `word1 word2 rating` rows separated by tabs or other whitespace.
/// `#` lines and a non-numeric header row are skipped.
pub fn read_gold<R: BufRead>(r: R) -> Result<Vec<GoldRating>, MetricError> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let f: Vec<&str> = if t.contains('\t') { t.split('\t').collect() } else { t.split_whitespace().collect() };
        let bad = |msg: String| MetricError::Parse { line: i + 1, msg };
        if f.len() < 3 {
            return Err(bad(format!("expected word1, word2, rating; got {t:?}")));
        }
        let rating = match f[2].trim().parse::<f64>() {
            Ok(v) if v.is_finite() => v,
            _ if out.is_empty() && i == 0 => continue,
            _ => return Err(bad(format!("bad rating {:?}", f[2]))),
        };
        let (Some(a), Some(b)) = (normalize_word(f[0]), normalize_word(f[1])) else {
            return Err(bad("empty word".into()));
        };
        out.push(GoldRating { a, b, rating });
    }
    Ok(out)
}

/// Geometric-mean similarity for every pair with both directions stored.
pub fn scores_from_table<T: Real>(table: &ConditionalTable<T>) -> BTreeMap<WordPair, f64> {
    let mut out = BTreeMap::new();
    for (a, b, p_ba) in table.iter() {
        if a < b {
            if let Some(p_ab) = table.get(b, a) {
                out.insert(WordPair::new(a, b), geometric_mean_similarity(p_ab, p_ba).as_f64());
            }
        }
    }
    out
}

/// Spearman correlation between model scores and gold ratings over the gold
/// pairs that have a score. Duplicate gold pairs are scored once each.
pub fn similarity_eval(scores: &BTreeMap<WordPair, f64>, gold: &[GoldRating]) -> Result<SimilarityEval, MetricError> {
    let mut x = Vec::new();
    let mut y = Vec::new();
    for g in gold {
        if let Some(s) = scores.get(&WordPair::new(g.a.as_str(), g.b.as_str())) {
            x.push(*s);
            y.push(g.rating);
        }
    }
    if x.len() < 2 {
        return Err(MetricError::TooFew { needed: 2, found: x.len() });
    }
    let t = spearman_test(&x, &y)?;
    Ok(SimilarityEval { rho: t.rho, p_value: t.p_value, used: x.len(), excluded: gold.len() - x.len() })
}
