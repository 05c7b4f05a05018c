//! Asymmetry metrics: LAR, ALAR, CAM, directional accuracy, binned factor
//! analysis and similarity-judgment correlation.

mod bins;
mod report;
mod similarity;
mod spearman;

use std::collections::BTreeMap;

use thiserror::Error;

use crate::conditional::ConditionalTable;
use crate::pair::OrderedPair;
use crate::scalar::{compensated_sum, Real};

pub use bins::{bin_analysis, write_bins_csv, Bin};
pub use report::{signed_log, write_lar_csv, MetricReport, RelationRow, ResourceCells, SummaryRow, DEFAULT_GAMMAS};
pub use similarity::{read_gold, scores_from_table, similarity_eval, GoldRating, SimilarityEval};
pub use spearman::{average_ranks, spearman, spearman_test, SpearmanTest, EXACT_PERMUTATION_MAX_N};

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("probability {0} is outside (0, 1]")]
    Domain(f64),
    #[error("{} pair(s) missing from {resource}: {}", .missing.len(), fmt_pairs(.missing))]
    Coverage { resource: String, missing: Vec<OrderedPair> },
    #[error("length mismatch: {left} vs {right}")]
    Dimension { left: usize, right: usize },
    #[error("correlation undefined for a constant vector")]
    ConstantVector,
    #[error("need at least {needed} values, found {found}")]
    TooFew { needed: usize, found: usize },
    #[error("non-finite value in correlation input")]
    NonFinite,
    #[error("empty pair set")]
    EmptySet,
    #[error("bin size must be at least 1")]
    BinSize,
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn fmt_pairs(pairs: &[OrderedPair]) -> String {
    let shown: Vec<String> = pairs.iter().take(10).map(|(a, b)| format!("({a};{b})")).collect();
    let more = if pairs.len() > 10 { format!(" and {} more", pairs.len() - 10) } else { String::new() };
    format!("{}{more}", shown.join(", "))
}

/// `ln p_ba - ln p_ab`, the log asymmetry ratio of `(a;b)` given `P(b|a)`
/// and `P(a|b)`.
pub fn lar<T: Real>(p_ba: T, p_ab: T) -> Result<T, MetricError> {
    for p in [p_ba, p_ab] {
        if !(p > T::zero() && p <= T::one()) {
            return Err(MetricError::Domain(p.as_f64()));
        }
    }
    Ok(p_ba.ln() - p_ab.ln())
}

/// Ordered pair to LAR for one resource.
#[derive(Debug, Clone, PartialEq)]
pub struct LarMap<T: Real = f64> {
    resource_id: String,
    entries: BTreeMap<OrderedPair, T>,
}

impl<T: Real> LarMap<T> {
    pub fn new(resource_id: impl Into<String>) -> Self {
        LarMap { resource_id: resource_id.into(), entries: BTreeMap::new() }
    }

    /// Adds both orientations of every pair whose two directions are stored.
    pub fn from_table(table: &ConditionalTable<T>) -> Result<Self, MetricError> {
        let mut m = LarMap::new(table.resource_id());
        for (a, b, p_ba) in table.iter() {
            if let Some(p_ab) = table.get(b, a) {
                m.entries.insert((a.to_string(), b.to_string()), lar(p_ba, p_ab)?);
            }
        }
        Ok(m)
    }

    /// Sets `(a;b) = v` and `(b;a) = -v`.
    pub fn insert(&mut self, a: &str, b: &str, v: T) {
        self.entries.insert((a.to_string(), b.to_string()), v);
        self.entries.insert((b.to_string(), a.to_string()), -v);
    }

    pub fn resource_id(&self) -> &str {
        &self.resource_id
    }

    pub fn get(&self, a: &str, b: &str) -> Option<T> {
        self.entries.get(&(a.to_string(), b.to_string())).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&OrderedPair, T)> {
        self.entries.iter().map(|(k, v)| (k, *v))
    }

    /// Values for `pairs` in order, or the list of pairs not covered.
    pub fn aligned(&self, pairs: &[OrderedPair]) -> Result<Vec<T>, MetricError> {
        let mut out = Vec::with_capacity(pairs.len());
        let mut missing = Vec::new();
        for p in pairs {
            match self.entries.get(p) {
                Some(v) => out.push(*v),
                None => missing.push(p.clone()),
            }
        }
        if missing.is_empty() {
            Ok(out)
        } else {
            Err(MetricError::Coverage { resource: self.resource_id.clone(), missing })
        }
    }
}

/// Mean LAR over the ordered pairs of one relation set.
pub fn alar<T: Real>(lars: &LarMap<T>, pairs: &[OrderedPair]) -> Result<T, MetricError> {
    if pairs.is_empty() {
        return Err(MetricError::EmptySet);
    }
    let v = lars.aligned(pairs)?;
    let mean = compensated_sum(v.iter().map(|x| x.as_f64())) / v.len() as f64;
    Ok(T::from_f64_lossy(mean))
}

/// Spearman correlation between two resources' LARs over `pairs`.
pub fn cam<T: Real>(pairs: &[OrderedPair], lars_i: &LarMap<T>, lars_j: &LarMap<T>) -> Result<f64, MetricError> {
    let (x, y) = (lars_i.aligned(pairs)?, lars_j.aligned(pairs)?);
    spearman(&x, &y)
}

/// [`cam`] with a significance test.
pub fn cam_test<T: Real>(pairs: &[OrderedPair], lars_i: &LarMap<T>, lars_j: &LarMap<T>) -> Result<SpearmanTest, MetricError> {
    let (x, y) = (lars_i.aligned(pairs)?, lars_j.aligned(pairs)?);
    spearman_test(&x, &y)
}

/// Direction of a LAR value at threshold `gamma`: 1, -1 or 0.
pub fn direction<T: Real>(lar: T, gamma: T) -> i8 {
    if lar > gamma {
        1
    } else if lar < -gamma {
        -1
    } else {
        0
    }
}

/// Fraction of pairs whose thresholded directions agree.
pub fn directional_accuracy<T: Real>(
    lars_data: &LarMap<T>,
    lars_emb: &LarMap<T>,
    pairs: &[OrderedPair],
    gamma: T,
) -> Result<f64, MetricError> {
    if pairs.is_empty() {
        return Err(MetricError::EmptySet);
    }
    let (x, y) = (lars_data.aligned(pairs)?, lars_emb.aligned(pairs)?);
    let agree = x.iter().zip(&y).filter(|(a, b)| direction(**a, gamma) == direction(**b, gamma)).count();
    Ok(agree as f64 / pairs.len() as f64)
}

/// `sqrt(p_ab * p_ba)`.
pub fn geometric_mean_similarity<T: Real>(p_ab: T, p_ba: T) -> T {
    (p_ab * p_ba).sqrt()
}
