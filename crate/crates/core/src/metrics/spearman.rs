//! Rank correlation with average ranks for ties.

use statrs::distribution::{ContinuousCDF, StudentsT};

use super::MetricError;
use crate::scalar::{compensated_sum, Real};

/// Largest sample size for which p-values come from full enumeration.
pub const EXACT_PERMUTATION_MAX_N: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpearmanTest {
    pub rho: f64,
    pub n: usize,
    /// Two-sided p-value.
    pub p_value: f64,
    /// Whether `p_value` comes from exact enumeration rather than the t approximation.
    pub exact: bool,
}

/// 1-based ranks; tied values share the mean of the positions they occupy.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // positions start+1 ..= end
        let avg = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = avg;
        }
        start = end;
    }
    ranks
}

fn checked<T: Real>(x: &[T], y: &[T]) -> Result<(Vec<f64>, Vec<f64>), MetricError> {
    if x.len() != y.len() {
        return Err(MetricError::Dimension { left: x.len(), right: y.len() });
    }
    if x.len() < 2 {
        return Err(MetricError::TooFew { needed: 2, found: x.len() });
    }
    let xs: Vec<f64> = x.iter().map(|v| v.as_f64()).collect();
    let ys: Vec<f64> = y.iter().map(|v| v.as_f64()).collect();
    if xs.iter().chain(&ys).any(|v| !v.is_finite()) {
        return Err(MetricError::NonFinite);
    }
    for v in [&xs, &ys] {
        if v.iter().all(|e| *e == v[0]) {
            return Err(MetricError::ConstantVector);
        }
    }
    Ok((xs, ys))
}

/// Pearson correlation of two vectors already known to be non-constant.
fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = compensated_sum(x.iter().copied()) / n;
    let my = compensated_sum(y.iter().copied()) / n;
    let sxy = compensated_sum(x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)));
    let sxx = compensated_sum(x.iter().map(|a| (a - mx) * (a - mx)));
    let syy = compensated_sum(y.iter().map(|b| (b - my) * (b - my)));
    (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0)
}

/// Spearman's rho: Pearson correlation of average ranks.
pub fn spearman<T: Real>(x: &[T], y: &[T]) -> Result<f64, MetricError> {
    let (xs, ys) = checked(x, y)?;
    Ok(pearson(&average_ranks(&xs), &average_ranks(&ys)))
}

/// Spearman's rho with a two-sided p-value.
pub fn spearman_test<T: Real>(x: &[T], y: &[T]) -> Result<SpearmanTest, MetricError> {
    let (xs, ys) = checked(x, y)?;
    let (rx, ry) = (average_ranks(&xs), average_ranks(&ys));
    let rho = pearson(&rx, &ry);
    let n = xs.len();
    if n <= EXACT_PERMUTATION_MAX_N {
        return Ok(SpearmanTest { rho, n, p_value: permutation_p_value(&rx, &ry, rho), exact: true });
    }
    Ok(SpearmanTest { rho, n, p_value: t_p_value(rho, n), exact: false })
}

fn t_p_value(rho: f64, n: usize) -> f64 {
    if rho.abs() >= 1.0 {
        return 0.0;
    }
    let df = (n - 2) as f64;
    let t = rho * (df / (1.0 - rho * rho)).sqrt();
    let dist = StudentsT::new(0.0, 1.0, df).expect("df > 0");
    (2.0 * dist.sf(t.abs())).min(1.0)
}

/// Fraction of all orderings of `ry` whose |rho| reaches the observed one.
fn permutation_p_value(rx: &[f64], ry: &[f64], rho: f64) -> f64 {
    let target = rho.abs() - 1e-12;
    let mut perm = ry.to_vec();
    let n = perm.len();
    let (mut hits, mut total) = (0u64, 0u64);
    let mut visit = |p: &[f64]| {
        total += 1;
        if pearson(rx, p).abs() >= target {
            hits += 1;
        }
    };
    // Heap's algorithm, iterative.
    let mut c = vec![0usize; n];
    visit(&perm);
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            visit(&perm);
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    hits as f64 / total as f64
}
