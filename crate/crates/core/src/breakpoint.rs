//! Long-memory CUSUM breakpoint location.

use std::ops::RangeInclusive;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{is_degenerate, mean, quantiles, Real};
use crate::series::TimeSeries;
use crate::sim::{rep_rng, FbmGenerator};

pub const MIN_CUSUM_LEN: usize = 20;

/// Candidate split points `k` (size of the first segment) in
/// `[⌈εn⌉, ⌊(1-ε)n⌋] ∩ [1, n-1]`.
pub fn trimmed_range(n: usize, trim: f64) -> Result<RangeInclusive<usize>> {
    if !(0.0..0.5).contains(&trim) {
        return Err(Error::Domain(format!("trimming {trim} outside [0, 0.5)")));
    }
    let nf = n as f64;
    let lo = ((trim * nf - 1e-9).ceil() as usize).max(1);
    let hi = (((1.0 - trim) * nf + 1e-9).floor() as usize).min(n.saturating_sub(1));
    if n < 2 || lo > hi {
        return Err(Error::TooShort { needed: 2, got: n });
    }
    Ok(lo..=hi)
}

/// Estimated break position with its normalised CUSUM statistic.
///
/// `index` is the size of the pre-break segment: observations
/// `0..index` precede the break and `index..n` follow it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BreakEstimate<T> {
    pub index: usize,
    pub statistic: T,
    pub d_used: T,
}

/// First argmax of `|S_k|` over the trimmed range, where
/// `S_k = Σ_{i<k} (x_i - x̄)`; returns `(k, |S_k|)`.
pub fn cusum_argmax<T: Real>(values: &[T], trim: f64) -> Result<(usize, T)> {
    let range = trimmed_range(values.len(), trim)?;
    let mu = mean(values);
    let mut s = T::zero();
    let mut best = (0usize, -T::one());
    for (k, &v) in values.iter().enumerate().take(*range.end()) {
        s += v - mu;
        let pos = k + 1;
        if pos >= *range.start() && s.abs() > best.1 {
            best = (pos, s.abs());
        }
    }
    Ok(best)
}

/// `max_k |S_k| / (n^{1/2+d} √lrv)` over the trimmed range.
pub fn cusum_break<T: Real>(
    series: &TimeSeries<T>,
    d: T,
    lrv: T,
    trim: f64,
) -> Result<BreakEstimate<T>> {
    let values = series.values();
    let n = values.len();
    if n < MIN_CUSUM_LEN {
        return Err(Error::TooShort {
            needed: MIN_CUSUM_LEN,
            got: n,
        });
    }
    if !(trim > 0.0 && trim < 0.5) {
        return Err(Error::Domain(format!("trimming {trim} outside (0, 0.5)")));
    }
    if !(lrv > T::zero()) {
        return Err(Error::Domain("long-run variance must be positive".into()));
    }
    if is_degenerate(values) {
        return Err(Error::Degenerate("constant series has no break".into()));
    }
    let (index, peak) = cusum_argmax(values, trim)?;
    let norm = T::from_count(n).powf(T::lit(0.5) + d) * lrv.sqrt();
    Ok(BreakEstimate {
        index,
        statistic: peak / norm,
        d_used: d,
    })
}

/// Empirical `prob`-quantile of `sup_{r∈[ε,1-ε]} |W_d(r) - r W_d(1)|` over
/// `reps` simulated fBm paths on a grid of `grid` steps.
pub fn fbb_sup_quantile(d: f64, prob: f64, reps: usize, grid: usize, trim: f64, seed: u64) -> Result<f64> {
    if !(prob > 0.0 && prob < 1.0) {
        return Err(Error::Domain(format!("quantile level {prob} outside (0, 1)")));
    }
    if reps < 100 {
        return Err(Error::InvalidInput(format!("need at least 100 repetitions, got {reps}")));
    }
    let range = if trim == 0.0 { 0..=grid } else { trimmed_range(grid, trim)? };
    let generator = FbmGenerator::new(d, grid)?;
    let mut sups: Vec<f64> = (0..reps)
        .into_par_iter()
        .map(|rep| {
            let w = generator.sample(&mut rep_rng(seed, rep as u64));
            let end = w[grid];
            range
                .clone()
                .map(|j| (w[j] - j as f64 / grid as f64 * end).abs())
                .fold(0.0, f64::max)
        })
        .collect();
    Ok(quantiles(&mut sups, &[prob])[0])
}
