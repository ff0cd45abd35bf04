//! Long-run variance estimators: the memory and autocorrelation consistent
//! (MAC) estimator and a quadratic-spectral HAC baseline.

use rustfft::num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::memory_est::bandwidth_for;
use crate::scalar::{is_degenerate, mean, Real};
use crate::series::TimeSeries;
use crate::spectral::{periodogram_of, SpectralEstimate};

pub const MAC_BANDWIDTH_EXPONENT: f64 = 0.8;
pub const MIN_LRV_LEN: usize = 16;
/// Memory parameters are clamped to `±D_CLAMP` before evaluating `p(d)`,
/// which has a pole at `d = 1/2`.
pub const D_CLAMP: f64 = 0.49;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LrvMethod {
    Mac,
    Hac,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LrvEstimate<T> {
    pub value: T,
    /// Memory parameter plugged into the estimator (zero for HAC).
    pub d_used: T,
    /// Whether `d_used` was clamped into `[-0.49, 0.49]`.
    pub clamped: bool,
    /// Number of Fourier frequencies for MAC; kernel bandwidth for HAC.
    pub bandwidth: f64,
    pub method: LrvMethod,
}

/// `p(d) = 2 Γ(1-2d) sin(πd) / (d (1+2d))`, with `p(0) = 2π`.
pub fn p_factor(d: f64) -> Result<f64> {
    if !(d > -0.5 && d < 0.5) {
        return Err(Error::Domain(format!("p(d) undefined for d = {d}")));
    }
    if d == 0.0 {
        return Ok(2.0 * std::f64::consts::PI);
    }
    Ok(2.0 * libm::tgamma(1.0 - 2.0 * d) * (std::f64::consts::PI * d).sin() / (d * (1.0 + 2.0 * d)))
}

pub fn clamp_memory<T: Real>(d: T) -> (T, bool) {
    let lim = T::lit(D_CLAMP);
    if d > lim {
        (lim, true)
    } else if d < -lim {
        (-lim, true)
    } else {
        (d, false)
    }
}

/// MAC estimate `p(d) · w⁻¹ Σ_{j≤w} λ_j^{2d} I(λ_j)` with `w` defaulting to
/// `⌊n^0.8⌋`.
pub fn mac_variance<T: Real>(
    series: &TimeSeries<T>,
    d: T,
    bandwidth: Option<usize>,
) -> Result<LrvEstimate<T>> {
    mac_variance_of(series.values(), d, bandwidth)
}

pub fn mac_variance_of<T: Real>(values: &[T], d: T, bandwidth: Option<usize>) -> Result<LrvEstimate<T>> {
    let n = values.len();
    if n < MIN_LRV_LEN {
        return Err(Error::TooShort {
            needed: MIN_LRV_LEN,
            got: n,
        });
    }
    if is_degenerate(values) {
        return Err(Error::Degenerate("constant series has zero long-run variance".into()));
    }
    let pg = periodogram_of(values)?;
    let w = bandwidth.unwrap_or_else(|| bandwidth_for(n, MAC_BANDWIDTH_EXPONENT).min(pg.len()));
    mac_from(&pg, d, w)
}

pub fn mac_from<T: Real>(pg: &SpectralEstimate<T>, d: T, w: usize) -> Result<LrvEstimate<T>> {
    if w == 0 || w > pg.len() {
        return Err(Error::InvalidInput(format!(
            "MAC bandwidth {w} outside [1, {}]",
            pg.len()
        )));
    }
    if !d.is_finite() {
        return Err(Error::Domain("non-finite memory parameter".into()));
    }
    let (d, clamped) = clamp_memory(d);
    let two_d = d + d;
    let b = if d == T::zero() {
        pg.ordinates[..w].iter().copied().sum::<T>()
    } else {
        pg.frequencies[..w]
            .iter()
            .zip(&pg.ordinates[..w])
            .map(|(&lam, &i)| lam.powf(two_d) * i)
            .sum::<T>()
    } / T::from_count(w);
    let value = T::lit(p_factor(d.as_f64())?) * b;
    if !(value > T::zero()) || !value.is_finite() {
        return Err(Error::Numerical(format!("MAC estimate not positive: {value}")));
    }
    Ok(LrvEstimate {
        value,
        d_used: d,
        clamped,
        bandwidth: w as f64,
        method: LrvMethod::Mac,
    })
}

/// Quadratic-spectral kernel.
pub fn qs_kernel(x: f64) -> f64 {
    if x == 0.0 {
        return 1.0;
    }
    let z = 6.0 * std::f64::consts::PI * x / 5.0;
    25.0 / (12.0 * std::f64::consts::PI.powi(2) * x * x) * (z.sin() / z - z.cos())
}

/// Automatic QS bandwidth `1.3221 (α(2) n)^{1/5}` from an AR(1) fit,
/// `α(2) = 4ρ² / (1-ρ)⁴`.
pub fn qs_plugin_bandwidth(rho: f64, n: usize) -> f64 {
    let alpha2 = 4.0 * rho * rho / (1.0 - rho).powi(4);
    1.3221 * (alpha2 * n as f64).powf(0.2)
}

/// Sample autocovariances `γ̂(0..n)` (divisor `n`) of an already centred
/// series, via a zero-padded FFT.
pub fn autocovariances<T: Real>(centred: &[T]) -> Vec<T> {
    let n = centred.len();
    let m = (2 * n).next_power_of_two();
    let mut buf: Vec<Complex<T>> = centred
        .iter()
        .map(|&v| Complex::new(v, T::zero()))
        .chain(std::iter::repeat(Complex::new(T::zero(), T::zero())))
        .take(m)
        .collect();
    T::fft_forward(m).process(&mut buf);
    for c in &mut buf {
        *c = Complex::new(c.norm_sqr(), T::zero());
    }
    T::fft_inverse(m).process(&mut buf);
    let scale = T::one() / (T::from_count(m) * T::from_count(n));
    buf[..n].iter().map(|c| c.re * scale).collect()
}

/// HAC estimate with the QS kernel and AR(1) plug-in bandwidth; the series
/// is demeaned first.
pub fn hac_variance<T: Real>(series: &TimeSeries<T>) -> Result<LrvEstimate<T>> {
    hac_variance_of(series.values())
}

pub fn hac_variance_of<T: Real>(values: &[T]) -> Result<LrvEstimate<T>> {
    let n = values.len();
    if n < MIN_LRV_LEN {
        return Err(Error::TooShort {
            needed: MIN_LRV_LEN,
            got: n,
        });
    }
    if is_degenerate(values) {
        return Err(Error::Degenerate("constant series has zero long-run variance".into()));
    }
    let mu = mean(values);
    let e: Vec<T> = values.iter().map(|&v| v - mu).collect();
    let gamma = autocovariances(&e);

    let num: T = e.windows(2).map(|w| w[0] * w[1]).sum();
    let den: T = e[..n - 1].iter().map(|&v| v * v).sum();
    // Keep the plug-in finite for near-unit-root fits.
    let rho = (num / den).as_f64().clamp(-0.97, 0.97);
    let bw = qs_plugin_bandwidth(rho, n);

    let mut value = gamma[0].as_f64();
    if bw > 0.0 {
        for (j, g) in gamma.iter().enumerate().skip(1) {
            value += 2.0 * qs_kernel(j as f64 / bw) * g.as_f64();
        }
    }
    if !(value > 0.0) || !value.is_finite() {
        return Err(Error::Numerical(format!("HAC estimate not positive: {value}")));
    }
    Ok(LrvEstimate {
        value: T::lit(value),
        d_used: T::zero(),
        clamped: false,
        bandwidth: bw,
        method: LrvMethod::Hac,
    })
}
