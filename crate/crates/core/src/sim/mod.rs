//! Simulation of fractional white noise, ARFIMA processes, fractional
//! Brownian motion paths, and break injection.

mod fwn;

pub use fwn::GaussianSampler;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{mean, Real};
use crate::series::TimeSeries;

/// Observations discarded after ARMA filtering of the fractional noise.
pub const DEFAULT_BURN_IN: usize = 1_000;

/// Random stream for repetition `rep` of a run seeded with `master`.
///
/// Every repetition owns an independent ChaCha stream, so results do not
/// depend on how repetitions are scheduled across threads.
pub fn rep_rng(master: u64, rep: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(rep);
    rng
}

/// Autocovariances `γ(0..=max_lag)` of ARFIMA(0, d, 0) with innovation
/// standard deviation `sigma`.
///
/// `γ(0) = σ² Γ(1-2d) / Γ(1-d)²` and `γ(k) = γ(k-1) (k-1+d) / (k-d)`.
pub fn acvf_fwn(d: f64, sigma: f64, max_lag: usize) -> Result<Vec<f64>> {
    if !(d > -0.5 && d < 0.5) {
        return Err(Error::Domain(format!("memory parameter d = {d} outside (-0.5, 0.5)")));
    }
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::Domain(format!("sigma = {sigma} must be positive")));
    }
    let g0 = sigma * sigma * (libm::lgamma(1.0 - 2.0 * d) - 2.0 * libm::lgamma(1.0 - d)).exp();
    let mut out = Vec::with_capacity(max_lag + 1);
    out.push(g0);
    let mut g = g0;
    for k in 1..=max_lag {
        let k = k as f64;
        g *= (k - 1.0 + d) / (k - d);
        out.push(g);
    }
    Ok(out)
}

/// Generative description of an ARFIMA(p, d, q) process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArfimaSpec {
    pub d: f64,
    #[serde(default)]
    pub ar: Vec<f64>,
    #[serde(default)]
    pub ma: Vec<f64>,
    #[serde(default = "one")]
    pub sigma: f64,
    #[serde(default)]
    pub mean: f64,
    #[serde(default = "default_burn_in")]
    pub burn_in: usize,
}

fn one() -> f64 {
    1.0
}

fn default_burn_in() -> usize {
    DEFAULT_BURN_IN
}

impl ArfimaSpec {
    pub fn new(d: f64, ar: Vec<f64>, ma: Vec<f64>, sigma: f64, mean: f64) -> Result<Self> {
        let spec = Self {
            d,
            ar,
            ma,
            sigma,
            mean,
            burn_in: DEFAULT_BURN_IN,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Fractional white noise with unit innovation variance.
    pub fn fwn(d: f64) -> Result<Self> {
        Self::new(d, Vec::new(), Vec::new(), 1.0, 0.0)
    }

    /// ARFIMA(1, d, 0) with unit innovation variance.
    pub fn ar1(d: f64, phi: f64) -> Result<Self> {
        let ar = if phi == 0.0 { Vec::new() } else { vec![phi] };
        Self::new(d, ar, Vec::new(), 1.0, 0.0)
    }

    pub fn with_burn_in(mut self, burn_in: usize) -> Self {
        self.burn_in = burn_in;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..0.5).contains(&self.d) {
            return Err(Error::Domain(format!("d = {} outside [0, 0.5)", self.d)));
        }
        if !(self.sigma > 0.0) || !self.sigma.is_finite() {
            return Err(Error::Domain(format!("sigma = {} must be positive", self.sigma)));
        }
        if !self.mean.is_finite() || self.ar.iter().chain(&self.ma).any(|c| !c.is_finite()) {
            return Err(Error::Domain("non-finite ARMA coefficient or mean".into()));
        }
        if !ar_is_stationary(&self.ar) {
            return Err(Error::Domain(format!(
                "AR polynomial {:?} has a root on or inside the unit circle",
                self.ar
            )));
        }
        Ok(())
    }

    fn has_arma(&self) -> bool {
        !self.ar.is_empty() || !self.ma.is_empty()
    }
}

/// Stationarity of `x_t = Σ φ_j x_{t-j} + e_t` via the step-down recursion:
/// the process is causal iff every partial autocorrelation lies in (-1, 1).
pub fn ar_is_stationary(phi: &[f64]) -> bool {
    let mut a = phi.to_vec();
    while let Some(&r) = a.last() {
        if !(r.abs() < 1.0) {
            return false;
        }
        let k = a.len();
        let denom = 1.0 - r * r;
        let next: Vec<f64> = (0..k - 1).map(|j| (a[j] + r * a[k - 2 - j]) / denom).collect();
        a = next;
    }
    true
}

/// Reusable ARFIMA sampler for one `(spec, length)` pair.
///
/// The circulant eigenvalues are computed once, so Monte Carlo loops only
/// pay one FFT per path.
#[derive(Debug, Clone)]
pub struct ArfimaGenerator {
    spec: ArfimaSpec,
    length: usize,
    burn_in: usize,
    sampler: GaussianSampler,
}

impl ArfimaGenerator {
    pub fn new(spec: &ArfimaSpec, length: usize) -> Result<Self> {
        spec.validate()?;
        if length < 2 {
            return Err(Error::TooShort { needed: 2, got: length });
        }
        let burn_in = if spec.has_arma() { spec.burn_in } else { 0 };
        let total = length + burn_in;
        let acvf = acvf_fwn(spec.d, spec.sigma, total - 1)?;
        Ok(Self {
            spec: spec.clone(),
            length,
            burn_in,
            sampler: GaussianSampler::new(acvf)?,
        })
    }

    pub fn length(&self) -> usize {
        self.length
    }

    pub fn spec(&self) -> &ArfimaSpec {
        &self.spec
    }

    pub fn sample_raw<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let noise = self.sampler.sample(rng);
        let mut y = if self.spec.has_arma() {
            arma_filter(&noise, &self.spec.ar, &self.spec.ma)
        } else {
            noise
        };
        y.drain(..self.burn_in);
        if self.spec.mean != 0.0 {
            for v in &mut y {
                *v += self.spec.mean;
            }
        }
        y
    }

    pub fn sample<T: Real, R: rand::Rng + ?Sized>(&self, rng: &mut R) -> TimeSeries<T> {
        let raw = self.sample_raw(rng);
        TimeSeries::new(raw.into_iter().map(T::lit).collect())
            .expect("generator output is finite and long enough")
    }
}

/// `y_t = Σ φ_i y_{t-i} + u_t + Σ θ_j u_{t-j}` with zero pre-sample values.
pub fn arma_filter(u: &[f64], ar: &[f64], ma: &[f64]) -> Vec<f64> {
    let mut y = Vec::with_capacity(u.len());
    for t in 0..u.len() {
        let mut v = u[t];
        for (j, &th) in ma.iter().enumerate() {
            if t > j {
                v += th * u[t - 1 - j];
            }
        }
        for (i, &ph) in ar.iter().enumerate() {
            if t > i {
                v += ph * y[t - 1 - i];
            }
        }
        y.push(v);
    }
    y
}

/// One exact ARFIMA path, deterministic in `(spec, length, seed)`.
pub fn gen_arfima<T: Real>(spec: &ArfimaSpec, length: usize, seed: u64) -> Result<TimeSeries<T>> {
    let generator = ArfimaGenerator::new(spec, length)?;
    Ok(generator.sample(&mut rep_rng(seed, 0)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BreakKind {
    MeanShift,
    VarianceShift,
}

/// A single break starting at the 1-based observation `at`.
///
/// For a mean shift `magnitude` is added; for a variance shift it is the
/// factor applied to deviations from the pre-break mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BreakSpec {
    pub kind: BreakKind,
    pub at: usize,
    pub magnitude: f64,
}

impl BreakSpec {
    pub fn mean_shift(at: usize, delta: f64) -> Self {
        Self {
            kind: BreakKind::MeanShift,
            at,
            magnitude: delta,
        }
    }

    pub fn variance_shift(at: usize, factor: f64) -> Self {
        Self {
            kind: BreakKind::VarianceShift,
            at,
            magnitude: factor,
        }
    }

    /// Mean shift of size `k T^(d - 1/2)`, the local-alternative scaling
    /// under which power stays non-trivial as `T` grows.
    pub fn local_mean_shift(at: usize, k: f64, t_len: usize, d: f64) -> Self {
        Self::mean_shift(at, k * (t_len as f64).powf(d - 0.5))
    }
}

pub fn apply_break<T: Real>(series: &TimeSeries<T>, brk: &BreakSpec) -> Result<TimeSeries<T>> {
    let n = series.len();
    if brk.at == 0 || brk.at > n {
        return Err(Error::OutOfRange { index: brk.at, len: n });
    }
    if !brk.magnitude.is_finite() {
        return Err(Error::Domain("break magnitude must be finite".into()));
    }
    let start = brk.at - 1;
    let mag = T::lit(brk.magnitude);
    let mut values = series.values().to_vec();
    match brk.kind {
        BreakKind::MeanShift => {
            if brk.magnitude != 0.0 {
                values[start..].iter_mut().for_each(|v| *v += mag);
            }
        }
        BreakKind::VarianceShift => {
            if !(brk.magnitude > 0.0) {
                return Err(Error::Domain("variance factor must be positive".into()));
            }
            if brk.magnitude != 1.0 {
                // With no pre-break observations the whole-sample mean is the centre.
                let centre = if start == 0 { mean(&values) } else { mean(&values[..start]) };
                values[start..]
                    .iter_mut()
                    .for_each(|v| *v = centre + mag * (*v - centre));
            }
        }
    }
    match series.dates() {
        Some(d) => TimeSeries::with_dates(values, d.to_vec()),
        None => TimeSeries::new(values),
    }
}

/// Sampler of discretised fractional Brownian motion on `[0, 1]`.
///
/// Paths are partial sums of exact FWN(d) increments scaled by the exact
/// standard deviation of the full sum, so `Var W(1) = 1`.
#[derive(Debug, Clone)]
pub struct FbmGenerator {
    grid_points: usize,
    scale: f64,
    sampler: GaussianSampler,
}

impl FbmGenerator {
    pub fn new(d: f64, grid_points: usize) -> Result<Self> {
        if grid_points < 2 {
            return Err(Error::InvalidInput("fBm grid needs at least 2 points".into()));
        }
        let acvf = acvf_fwn(d, 1.0, grid_points - 1)?;
        let n = grid_points as f64;
        let var_sum: f64 = acvf[0] * n
            + 2.0
                * acvf
                    .iter()
                    .enumerate()
                    .skip(1)
                    .map(|(k, g)| (n - k as f64) * g)
                    .sum::<f64>();
        Ok(Self {
            grid_points,
            scale: 1.0 / var_sum.sqrt(),
            sampler: GaussianSampler::new(acvf)?,
        })
    }

    pub fn grid_points(&self) -> usize {
        self.grid_points
    }

    /// `W(j/N)` for `j = 0..=N`.
    pub fn sample<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let inc = self.sampler.sample(rng);
        let mut path = Vec::with_capacity(inc.len() + 1);
        path.push(0.0);
        let mut acc = 0.0;
        for x in inc {
            acc += x;
            path.push(acc * self.scale);
        }
        path
    }
}

pub fn gen_fbm_path(d: f64, grid_points: usize, seed: u64) -> Result<Vec<f64>> {
    Ok(FbmGenerator::new(d, grid_points)?.sample(&mut rep_rng(seed, 0)))
}

/// Type-II fractional difference `(1 - L)^d x_t`, truncated at the sample
/// start.
pub fn frac_diff(values: &[f64], d: f64) -> Vec<f64> {
    let n = values.len();
    let mut w = Vec::with_capacity(n);
    let mut c = 1.0;
    w.push(c);
    for k in 1..n {
        c *= (k as f64 - 1.0 - d) / k as f64;
        w.push(c);
    }
    (0..n)
        .map(|t| (0..=t).map(|k| w[k] * values[t - k]).sum())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn white_noise_acvf() {
        let g = acvf_fwn(0.0, 1.0, 5).unwrap();
        assert_eq!(g, vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn acvf_rejects_nonstationary_d() {
        assert!(acvf_fwn(0.5, 1.0, 3).is_err());
        assert!(acvf_fwn(-0.5, 1.0, 3).is_err());
        assert!(acvf_fwn(0.2, 0.0, 3).is_err());
    }

    #[test]
    fn stationarity_check() {
        assert!(ar_is_stationary(&[]));
        assert!(ar_is_stationary(&[0.9]));
        assert!(!ar_is_stationary(&[1.0]));
        assert!(ar_is_stationary(&[0.5, 0.3]));
        assert!(!ar_is_stationary(&[0.5, 0.6]));
        assert!(ArfimaSpec::new(0.2, vec![1.2], vec![], 1.0, 0.0).is_err());
        assert!(ArfimaSpec::new(0.5, vec![], vec![], 1.0, 0.0).is_err());
    }

    #[test]
    fn mean_shift_on_zeros() {
        let s = TimeSeries::new(vec![0.0f64; 10]).unwrap();
        let out = apply_break(&s, &BreakSpec::mean_shift(6, 1.0)).unwrap();
        assert_eq!(out.values(), &[0., 0., 0., 0., 0., 1., 1., 1., 1., 1.]);
    }

    #[test]
    fn identity_breaks() {
        let s: TimeSeries<f64> = gen_arfima(&ArfimaSpec::fwn(0.3).unwrap(), 50, 3).unwrap();
        assert_eq!(apply_break(&s, &BreakSpec::mean_shift(10, 0.0)).unwrap(), s);
        assert_eq!(apply_break(&s, &BreakSpec::variance_shift(10, 1.0)).unwrap(), s);
    }

    #[test]
    fn break_out_of_range() {
        let s = TimeSeries::new(vec![0.0f64; 10]).unwrap();
        assert!(apply_break(&s, &BreakSpec::mean_shift(0, 1.0)).is_err());
        assert!(apply_break(&s, &BreakSpec::mean_shift(11, 1.0)).is_err());
        assert!(apply_break(&s, &BreakSpec::variance_shift(5, 0.0)).is_err());
    }

    #[test]
    fn variance_shift_scales_deviations() {
        let s = TimeSeries::new(vec![1.0f64, 3.0, 2.0, 4.0, 0.0]).unwrap();
        let out = apply_break(&s, &BreakSpec::variance_shift(4, 2.0)).unwrap();
        // pre-break mean 2
        assert_eq!(out.values(), &[1.0, 3.0, 2.0, 6.0, -2.0]);
    }

    #[test]
    fn fbm_starts_at_zero() {
        for seed in 0..5 {
            let p = gen_fbm_path(0.3, 64, seed).unwrap();
            assert_eq!(p.len(), 65);
            assert_eq!(p[0], 0.0);
        }
    }

    #[test]
    fn reproducible_paths() {
        let spec = ArfimaSpec::ar1(0.25, 0.4).unwrap();
        let a: TimeSeries<f64> = gen_arfima(&spec, 300, 42).unwrap();
        let b: TimeSeries<f64> = gen_arfima(&spec, 300, 42).unwrap();
        let c: TimeSeries<f64> = gen_arfima(&spec, 300, 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn frac_diff_inverts_integration() {
        // (1-L)^1 of a cumulative sum recovers the increments.
        let x = [1.0, -2.0, 0.5, 3.0];
        let cum: Vec<f64> = x.iter().scan(0.0, |a, v| { *a += v; Some(*a) }).collect();
        let back = frac_diff(&cum, 1.0);
        for (a, b) in back.iter().zip(x) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(frac_diff(&x, 0.0), x.to_vec());
    }
}
