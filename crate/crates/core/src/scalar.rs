//! Scalar abstraction shared by the numeric modules.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::str::FromStr;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point scalar the embedding and metric code is generic over.
///
/// Implemented for `f32` and `f64`. Softmax denominators and other long
/// reductions are accumulated in `f64` regardless of `Self`.
pub trait Real:
    Float + FromPrimitive + ToPrimitive + FromStr + Sum + Default + Debug + Display + Send + Sync + 'static
{
    fn from_f64_lossy(x: f64) -> Self {
        Self::from_f64(x).expect("f64 converts to every Real")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("Real converts to f64")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = CompensatedSum::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

/// Compensated sum of a slice, independent of summation order up to the
/// final rounding for well-conditioned inputs.
pub fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().collect::<CompensatedSum>().value()
}

/// Order-independent sum: sorts by total order before compensated summation,
/// so any permutation of `values` yields the same bits.
pub fn sorted_sum(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    compensated_sum(values.iter().copied())
}

/// Formats `x` with 17 significant digits, which round-trips any `f64`.
pub fn fmt_sig17(x: f64) -> String {
    format!("{:.16e}", x)
}

/// Formats with 4 decimals for human-readable tables.
pub fn fmt_4(x: f64) -> String {
    format!("{:.4}", x)
}
