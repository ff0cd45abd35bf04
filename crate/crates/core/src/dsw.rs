//! Sup-Wald and double sup-Wald statistics for a break in the mean of the
//! out-of-sample loss series.

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::breakpoint::{cusum_argmax, trimmed_range};
use crate::error::{Error, Result};
use crate::forecast::{oos_losses_of, ForecastModel, ForecastSpec, LossSeries, Scheme};
use crate::lrv::{hac_variance_of, mac_from, LrvMethod};
use crate::memory_est::{bandwidth_for, local_whittle_from, LW_BANDWIDTH_EXPONENT};
use crate::lrv::MAC_BANDWIDTH_EXPONENT;
use crate::scalar::{is_degenerate, mean, quantiles, Real};
use crate::series::TimeSeries;
use crate::sim::{rep_rng, ArfimaGenerator, ArfimaSpec, FbmGenerator};
use crate::spectral::periodogram_of;

pub const MIN_SW_LEN: usize = 20;

/// Tuning of the double sup-Wald test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DswConfig {
    /// Smallest in-sample size as a fraction of `T`.
    pub m0_frac: f64,
    /// Width of the in-sample search window as a fraction of the largest
    /// out-of-sample period `n0 = T - m0 - τ + 1`.
    pub mu_bar: f64,
    pub epsilon: f64,
    pub tau: usize,
    pub m_stride: usize,
    pub mac_bandwidth_exp: f64,
    pub lw_bandwidth_exp: f64,
    pub model: ForecastModel,
    pub scheme: Scheme,
    pub variance: LrvMethod,
    /// Explicit `(m0, m1)`; overrides `m0_frac` and `mu_bar`.
    pub m_range: Option<(usize, usize)>,
}

impl Default for DswConfig {
    fn default() -> Self {
        Self {
            m0_frac: 0.2,
            mu_bar: 0.3,
            epsilon: 0.1,
            tau: 1,
            m_stride: 1,
            mac_bandwidth_exp: MAC_BANDWIDTH_EXPONENT,
            lw_bandwidth_exp: LW_BANDWIDTH_EXPONENT,
            model: ForecastModel::ConstantMean,
            scheme: Scheme::Fixed,
            variance: LrvMethod::Mac,
            m_range: None,
        }
    }
}

impl DswConfig {
    pub fn forecast_spec(&self) -> ForecastSpec {
        ForecastSpec {
            model: self.model,
            scheme: self.scheme,
            horizon: self.tau,
        }
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.m_stride = stride;
        self
    }

    pub fn with_variance(mut self, variance: LrvMethod) -> Self {
        self.variance = variance;
        self
    }

    /// `(m0, m1)` for a series of length `t_len`, validated against the
    /// trimming and minimum-length requirements.
    pub fn m_bounds(&self, t_len: usize) -> Result<(usize, usize)> {
        if !(self.epsilon > 0.0 && self.epsilon < 0.5) {
            return Err(Error::Domain(format!("epsilon = {} outside (0, 0.5)", self.epsilon)));
        }
        if self.tau == 0 {
            return Err(Error::Domain("tau must be at least 1".into()));
        }
        if self.m_stride == 0 {
            return Err(Error::Domain("m_stride must be at least 1".into()));
        }
        for (name, e) in [("MAC", self.mac_bandwidth_exp), ("local Whittle", self.lw_bandwidth_exp)] {
            if !(e > 0.0 && e < 1.0) {
                return Err(Error::Domain(format!("{name} bandwidth exponent {e} outside (0, 1)")));
            }
        }
        let (m0, m1) = match self.m_range {
            Some(r) => r,
            None => {
                if !(self.m0_frac > 0.0 && self.m0_frac < 1.0) {
                    return Err(Error::Domain(format!("m0_frac = {} outside (0, 1)", self.m0_frac)));
                }
                if !(self.mu_bar >= 0.0 && self.mu_bar < 1.0) {
                    return Err(Error::Domain(format!("mu_bar = {} outside [0, 1)", self.mu_bar)));
                }
                let m0 = (self.m0_frac * t_len as f64 + 1e-9).floor() as usize;
                let n0 = (t_len + 1).saturating_sub(m0 + self.tau);
                (m0, m0 + (self.mu_bar * n0 as f64 + 1e-9).floor() as usize)
            }
        };
        let min_m = self.forecast_spec().min_in_sample();
        if m0 < min_m {
            return Err(Error::InvalidInput(format!("m0 = {m0} below the model minimum {min_m}")));
        }
        if m1 < m0 {
            return Err(Error::InvalidInput(format!("m1 = {m1} below m0 = {m0}")));
        }
        let n1 = (t_len + 1).saturating_sub(m1 + self.tau);
        if n1 < MIN_SW_LEN {
            return Err(Error::TooShort {
                needed: m1 + self.tau + MIN_SW_LEN - 1,
                got: t_len,
            });
        }
        trimmed_range(n1, self.epsilon)?;
        Ok((m0, m1))
    }

    pub fn m_values(&self, t_len: usize) -> Result<Vec<usize>> {
        let (m0, m1) = self.m_bounds(t_len)?;
        Ok((m0..=m1).step_by(self.m_stride).collect())
    }
}

/// `max_k [SSR - SSR(k)] / lrv` over the trimmed split points, with `k` the
/// size of the first segment. Returns the statistic and its first argmax.
///
/// With centred losses `c_i` and partial sums `S_k`, the restricted minus
/// unrestricted sum of squares is `S_k²/k + (S_n - S_k)²/(n-k) - S_n²/n`, so
/// the full scan is linear in `n`.
pub fn sup_wald<T: Real>(losses: &[T], epsilon: f64, lrv: T) -> Result<(T, usize)> {
    let n = losses.len();
    if n < MIN_SW_LEN {
        return Err(Error::TooShort {
            needed: MIN_SW_LEN,
            got: n,
        });
    }
    if !(lrv > T::zero()) || !lrv.is_finite() {
        return Err(Error::Domain(format!("long-run variance {lrv} must be positive")));
    }
    if is_degenerate(losses) {
        return Err(Error::Degenerate("loss series has zero variance".into()));
    }
    let range = trimmed_range(n, epsilon)?;
    let (stat, k) = ssr_reduction_argmax(losses, range);
    Ok((stat / lrv, k))
}

/// First argmax of `SSR - SSR(k)` over `range`, unnormalised.
fn ssr_reduction_argmax<T: Real>(losses: &[T], range: std::ops::RangeInclusive<usize>) -> (T, usize) {
    let n = losses.len();
    let mu = mean(losses);
    let nt = T::from_count(n);
    let mut partial = T::zero();
    let mut total = T::zero();
    let mut prefix = Vec::with_capacity(n);
    for &v in losses {
        partial += v - mu;
        prefix.push(partial);
    }
    total += partial;
    let mut best = (-T::one(), *range.start());
    for k in range {
        let s = prefix[k - 1];
        let rest = total - s;
        let red = s * s / T::from_count(k) + rest * rest / T::from_count(n - k) - total * total / nt;
        if red > best.0 {
            best = (red, k);
        }
    }
    (best.0.max(T::zero()), best.1)
}

/// One row of the per-`m` trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MStep<T> {
    pub m: usize,
    pub sw: T,
    /// Split used for demeaning (size of the first loss segment).
    pub break_pos: usize,
    /// Split maximising the Wald statistic.
    pub sw_argmax: usize,
    pub d_hat: T,
    pub lrv: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DswResult<T> {
    pub statistic: T,
    pub m_star: usize,
    /// 1-based position in the input of the first observation after the
    /// estimated break (same convention as `BreakSpec::at`).
    pub break_index: usize,
    pub break_date: Option<NaiveDate>,
    pub d_hat_loss: T,
    pub lrv: T,
    pub variance: LrvMethod,
    pub m_stride: usize,
    pub per_m_trace: Vec<MStep<T>>,
}

/// Runs the full pipeline for one in-sample size `m`.
///
/// MAC variant: CUSUM split, segment demeaning, local Whittle `d̂` and MAC
/// `V̂` on the demeaned losses, then the Wald scan with `V̂` held fixed.
/// HAC variant: least-squares split and QS-HAC on the demeaned losses.
pub fn sw_at<T: Real>(y: &[T], m: usize, config: &DswConfig) -> Result<MStep<T>> {
    let LossSeries { losses, n, .. } = oos_losses_of(y, m, &config.forecast_spec())?;
    if n < MIN_SW_LEN {
        return Err(Error::TooShort {
            needed: MIN_SW_LEN,
            got: n,
        });
    }
    if is_degenerate(&losses) {
        return Err(Error::Degenerate("loss series has zero variance".into()));
    }
    let range = trimmed_range(n, config.epsilon)?;
    let split = match config.variance {
        LrvMethod::Mac => cusum_argmax(&losses, config.epsilon)?.0,
        LrvMethod::Hac => ssr_reduction_argmax(&losses, range.clone()).1,
    };
    let demeaned = segment_demean(&losses, split);

    let (d_hat, lrv) = match config.variance {
        LrvMethod::Mac => {
            let pg = periodogram_of(&demeaned)?;
            let w_lw = bandwidth_for(n, config.lw_bandwidth_exp).clamp(2, pg.len());
            let d_hat = local_whittle_from(&pg, w_lw)?.d_hat;
            let w_mac = bandwidth_for(n, config.mac_bandwidth_exp).clamp(1, pg.len());
            let v = mac_from(&pg, d_hat, w_mac)?;
            (d_hat, v.value)
        }
        LrvMethod::Hac => (T::zero(), hac_variance_of(&demeaned)?.value),
    };
    let (reduction, sw_argmax) = ssr_reduction_argmax(&losses, range);
    Ok(MStep {
        m,
        sw: reduction / lrv,
        break_pos: split,
        sw_argmax,
        d_hat,
        lrv,
    })
}

fn segment_demean<T: Real>(x: &[T], split: usize) -> Vec<T> {
    let (a, b) = x.split_at(split);
    let (ma, mb) = (mean(a), mean(b));
    a.iter().map(|&v| v - ma).chain(b.iter().map(|&v| v - mb)).collect()
}

pub fn dsw_test<T: Real>(series: &TimeSeries<T>, config: &DswConfig) -> Result<DswResult<T>> {
    let y = series.values();
    let ms = config.m_values(y.len())?;
    let trace: Vec<MStep<T>> = ms
        .par_iter()
        .map(|&m| {
            sw_at(y, m, config).map_err(|e| Error::AtInSample {
                m,
                source: Box::new(e),
            })
        })
        .collect::<Result<_>>()?;
    let best = trace
        .iter()
        .fold(&trace[0], |acc, s| if s.sw > acc.sw { s } else { acc });
    let break_index = best.m + config.tau + best.break_pos;
    Ok(DswResult {
        statistic: best.sw,
        m_star: best.m,
        break_index,
        break_date: series.date_at(break_index - 1),
        d_hat_loss: best.d_hat,
        lrv: best.lrv,
        variance: config.variance,
        m_stride: config.m_stride,
        per_m_trace: trace,
    })
}

/// Empirical quantiles of a statistic, with bookkeeping of failed draws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalValues {
    pub probs: Vec<f64>,
    pub values: Vec<f64>,
    pub reps: usize,
    pub failures: usize,
}

impl CriticalValues {
    /// Critical value for a nominal size `alpha` (quantile `1 - alpha`).
    pub fn for_level(&self, alpha: f64) -> Option<f64> {
        self.probs
            .iter()
            .position(|&p| (p - (1.0 - alpha)).abs() < 1e-9)
            .map(|i| self.values[i])
    }
}

fn validate_probs(probs: &[f64]) -> Result<()> {
    if probs.is_empty() || probs.iter().any(|&p| !(p > 0.0 && p < 1.0)) {
        return Err(Error::Domain(format!("quantile levels {probs:?} must lie in (0, 1)")));
    }
    Ok(())
}

/// Null distribution of the DSW statistic from `reps` paths of `generator`.
///
/// Repetition `r` draws from `rep_rng(seed, r)`; failed repetitions are
/// counted and excluded.
pub fn simulate_critical_values(
    generator: &ArfimaSpec,
    config: &DswConfig,
    t_len: usize,
    reps: usize,
    probs: &[f64],
    seed: u64,
) -> Result<CriticalValues> {
    if reps < 100 {
        return Err(Error::InvalidInput(format!("need at least 100 repetitions, got {reps}")));
    }
    validate_probs(probs)?;
    config.m_bounds(t_len)?;
    let stats = simulate_statistics(generator, config, t_len, reps, seed)?;
    let failures = stats.iter().filter(|s| s.is_none()).count();
    let mut ok: Vec<f64> = stats.into_iter().flatten().collect();
    if ok.len() * 2 < reps {
        return Err(Error::Numerical(format!("{failures} of {reps} repetitions failed")));
    }
    Ok(CriticalValues {
        probs: probs.to_vec(),
        values: quantiles(&mut ok, probs),
        reps,
        failures,
    })
}

/// DSW statistic for each repetition; `None` where the test failed.
pub fn simulate_statistics(
    generator: &ArfimaSpec,
    config: &DswConfig,
    t_len: usize,
    reps: usize,
    seed: u64,
) -> Result<Vec<Option<f64>>> {
    let gen = ArfimaGenerator::new(generator, t_len)?;
    Ok((0..reps)
        .into_par_iter()
        .map(|r| {
            let path: TimeSeries<f64> = gen.sample(&mut rep_rng(seed, r as u64));
            dsw_test(&path, config).ok().map(|res| res.statistic)
        })
        .collect())
}

/// Double supremum over `μ ∈ [0, μ̄]` and
/// `λ ∈ [μ + ε(1-μ), 1 - ε(1-μ)]` of
/// `[(λ-μ)W(1) + (1-λ)W(μ) - (1-μ)W(λ)]² / ((1-λ)(1-μ)(λ-μ))` for one path
/// `W(j/N)`, `j = 0..=N`.
pub fn limit_functional(w: &[f64], mu_bar: f64, epsilon: f64) -> f64 {
    let grid = w.len() - 1;
    let nf = grid as f64;
    let w1 = w[grid];
    let mu_max = (mu_bar * nf + 1e-9).floor() as usize;
    let mut sup = 0.0f64;
    for i in 0..=mu_max.min(grid - 1) {
        let mu = i as f64 / nf;
        let lo = (((mu + epsilon * (1.0 - mu)) * nf - 1e-9).ceil() as usize).max(i + 1);
        let hi = (((1.0 - epsilon * (1.0 - mu)) * nf + 1e-9).floor() as usize).min(grid - 1);
        let wm = w[i];
        for j in lo..=hi {
            let lam = j as f64 / nf;
            let num = (lam - mu) * w1 + (1.0 - lam) * wm - (1.0 - mu) * w[j];
            let v = num * num / ((1.0 - lam) * (1.0 - mu) * (lam - mu));
            sup = sup.max(v);
        }
    }
    sup
}

/// Quantiles of the asymptotic DSW distribution for memory `d`, simulated
/// from discretised fBm paths.
///
/// The functional describes the statistic after normalisation by the
/// matching power of the sample size; for `d = 0` it is directly comparable
/// with finite-sample critical values.
pub fn limit_distribution_quantiles(
    d: f64,
    mu_bar: f64,
    epsilon: f64,
    grid: usize,
    reps: usize,
    probs: &[f64],
    seed: u64,
) -> Result<Vec<f64>> {
    if grid < 200 {
        return Err(Error::InvalidInput(format!("grid must have at least 200 steps, got {grid}")));
    }
    if reps < 500 {
        return Err(Error::InvalidInput(format!("need at least 500 repetitions, got {reps}")));
    }
    if !(mu_bar >= 0.0 && mu_bar < 1.0) {
        return Err(Error::Domain(format!("mu_bar = {mu_bar} outside [0, 1)")));
    }
    if !(epsilon > 0.0 && epsilon < 0.5) {
        return Err(Error::Domain(format!("epsilon = {epsilon} outside (0, 0.5)")));
    }
    validate_probs(probs)?;
    let gen = FbmGenerator::new(d, grid)?;
    let mut sups: Vec<f64> = (0..reps)
        .into_par_iter()
        .map(|r| limit_functional(&gen.sample(&mut rep_rng(seed, r as u64)), mu_bar, epsilon))
        .collect();
    Ok(quantiles(&mut sups, probs))
}
