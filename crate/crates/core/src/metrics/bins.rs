use std::io::{self, Write};

use super::MetricError;
use crate::pair::OrderedPair;
use crate::scalar::{compensated_sum, fmt_sig17};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bin {
    pub mean_factor: f64,
    pub accuracy: f64,
    pub count: usize,
}

/// Sorts pairs by factor (stable) and cuts consecutive bins of `bin_size`.
/// A trailing bin holding fewer than a quarter of `bin_size` pairs is dropped.
pub fn bin_analysis<F>(factors: &[(OrderedPair, f64)], accuracy_fn: F, bin_size: usize) -> Result<Vec<Bin>, MetricError>
where
    F: Fn(&OrderedPair) -> f64,
{
    if bin_size == 0 {
        return Err(MetricError::BinSize);
    }
    let mut sorted: Vec<&(OrderedPair, f64)> = factors.iter().collect();
    sorted.sort_by(|x, y| x.1.total_cmp(&y.1));
    let mut out = Vec::new();
    for chunk in sorted.chunks(bin_size) {
        if chunk.len() < bin_size && chunk.len() * 4 < bin_size {
            break;
        }
        let n = chunk.len() as f64;
        out.push(Bin {
            mean_factor: compensated_sum(chunk.iter().map(|(_, f)| *f)) / n,
            accuracy: compensated_sum(chunk.iter().map(|(p, _)| accuracy_fn(p))) / n,
            count: chunk.len(),
        });
    }
    Ok(out)
}

/// Plot-ready CSV with a `#` header block.
pub fn write_bins_csv<W: Write>(mut w: W, bins: &[Bin], factor_name: &str, header: &[String]) -> io::Result<()> {
    for h in header {
        writeln!(w, "# {h}")?;
    }
    writeln!(w, "bin,count,mean_{factor_name},accuracy")?;
    for (i, b) in bins.iter().enumerate() {
        writeln!(w, "{i},{},{},{}", b.count, fmt_sig17(b.mean_factor), fmt_sig17(b.accuracy))?;
    }
    w.flush()
}
