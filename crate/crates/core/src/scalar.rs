//! Scalar abstraction shared by the estimation chain.
//!
//! Everything that only consumes data (periodogram, estimators, test
//! statistics) is written against [`Real`], so the same code runs in `f32`
//! and `f64`. Special functions and random draws are evaluated in `f64` and
//! converted at the boundary.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use std::cell::RefCell;
use std::sync::Arc;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};
use rustfft::{Fft, FftNum, FftPlanner};

pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + FftNum
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal into this scalar type.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("finite scalar")
    }

    /// Forward FFT plan of length `n` from a per-thread planner, so repeated
    /// transforms of the same length reuse twiddles.
    fn fft_forward(n: usize) -> Arc<dyn Fft<Self>>;

    fn fft_inverse(n: usize) -> Arc<dyn Fft<Self>>;
}

macro_rules! impl_real {
    ($t:ty, $planner:ident) => {
        thread_local! {
            static $planner: RefCell<FftPlanner<$t>> = RefCell::new(FftPlanner::new());
        }

        impl Real for $t {
            fn fft_forward(n: usize) -> Arc<dyn Fft<Self>> {
                $planner.with(|p| p.borrow_mut().plan_fft_forward(n))
            }

            fn fft_inverse(n: usize) -> Arc<dyn Fft<Self>> {
                $planner.with(|p| p.borrow_mut().plan_fft_inverse(n))
            }
        }
    };
}

impl_real!(f32, PLANNER_F32);
impl_real!(f64, PLANNER_F64);

/// Arithmetic mean; `zero` for an empty slice.
pub fn mean<T: Real>(values: &[T]) -> T {
    if values.is_empty() {
        return T::zero();
    }
    values.iter().copied().sum::<T>() / T::from_count(values.len())
}

/// Population variance (divisor `n`).
pub fn variance<T: Real>(values: &[T]) -> T {
    if values.is_empty() {
        return T::zero();
    }
    let mu = mean(values);
    values.iter().map(|&v| (v - mu) * (v - mu)).sum::<T>() / T::from_count(values.len())
}

/// True when the series carries no variation beyond rounding noise.
pub fn is_degenerate<T: Real>(values: &[T]) -> bool {
    let scale = values.iter().fold(T::zero(), |acc, v| acc.max(v.abs()));
    if scale == T::zero() {
        return true;
    }
    let tol = T::epsilon() * T::lit(64.0) * scale;
    variance(values).sqrt() <= tol
}

/// Empirical quantile of sorted data with linear interpolation between
/// order statistics (Hyndman–Fan type 7).
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty sample");
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Sorts in place (NaNs last) and returns the requested quantiles.
pub fn quantiles(sample: &mut [f64], probs: &[f64]) -> Vec<f64> {
    sample.sort_by(|a, b| a.total_cmp(b));
    probs.iter().map(|&p| quantile_sorted(sample, p)).collect()
}
