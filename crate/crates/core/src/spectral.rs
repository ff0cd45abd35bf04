//! Periodogram at the Fourier frequencies.

use rustfft::num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::series::TimeSeries;

pub const MIN_PERIODOGRAM_LEN: usize = 4;

/// `I_n(λ_j) = |Σ_t x_t e^{itλ_j}|² / (2πn)` for `j = 1..=⌊n/2⌋`, with
/// `λ_j = 2πj/n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralEstimate<T> {
    pub ordinates: Vec<T>,
    pub frequencies: Vec<T>,
    pub n: usize,
}

impl<T: Real> SpectralEstimate<T> {
    pub fn len(&self) -> usize {
        self.ordinates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ordinates.is_empty()
    }

    /// Sum of the ordinates over `j = 1..n-1`, recovered from the stored
    /// half by conjugate symmetry.
    pub fn full_plane_sum(&self) -> T {
        let half = self.ordinates.iter().copied().sum::<T>();
        if self.n % 2 == 0 {
            let nyquist = *self.ordinates.last().unwrap_or(&T::zero());
            half + half - nyquist
        } else {
            half + half
        }
    }
}

pub fn periodogram<T: Real>(series: &TimeSeries<T>) -> Result<SpectralEstimate<T>> {
    periodogram_of(series.values())
}

/// Periodogram of the raw values; no demeaning is applied.
pub fn periodogram_of<T: Real>(values: &[T]) -> Result<SpectralEstimate<T>> {
    let n = values.len();
    if n < MIN_PERIODOGRAM_LEN {
        return Err(Error::TooShort {
            needed: MIN_PERIODOGRAM_LEN,
            got: n,
        });
    }
    let mut buf: Vec<Complex<T>> = values.iter().map(|&v| Complex::new(v, T::zero())).collect();
    T::fft_forward(n).process(&mut buf);

    let two_pi = T::PI() + T::PI();
    let norm = T::one() / (two_pi * T::from_count(n));
    let half = n / 2;
    let ordinates = buf[1..=half].iter().map(|c| c.norm_sqr() * norm).collect();
    let frequencies = (1..=half)
        .map(|j| two_pi * T::from_count(j) / T::from_count(n))
        .collect();
    Ok(SpectralEstimate {
        ordinates,
        frequencies,
        n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_series_has_no_mass_off_zero() {
        let s = TimeSeries::new(vec![3.5f64; 32]).unwrap();
        let p = periodogram(&s).unwrap();
        assert_eq!(p.len(), 16);
        assert!(p.ordinates.iter().all(|&v| v.abs() < 1e-25));
    }

    #[test]
    fn frequencies_increase_to_pi() {
        let p = periodogram_of(&[1.0f64, -2.0, 0.5, 4.0, 1.0, 0.0, 2.0]).unwrap();
        assert_eq!(p.len(), 3);
        assert!(p.frequencies.windows(2).all(|w| w[1] > w[0]));
        assert!(*p.frequencies.last().unwrap() <= std::f64::consts::PI);
        let p = periodogram_of(&[1.0f64, -2.0, 0.5, 4.0]).unwrap();
        assert_eq!(*p.frequencies.last().unwrap(), std::f64::consts::PI);
    }

    #[test]
    fn too_short() {
        assert!(periodogram_of(&[1.0f64, 2.0, 3.0]).is_err());
    }

    #[test]
    fn cosine_concentrates_at_its_frequency() {
        let n = 64;
        let x: Vec<f64> = (0..n)
            .map(|t| (2.0 * std::f64::consts::PI * 5.0 * t as f64 / n as f64).cos())
            .collect();
        let p = periodogram_of(&x).unwrap();
        let total: f64 = p.ordinates.iter().sum();
        assert!(p.ordinates[4] / total > 0.99);
    }

    #[test]
    fn runs_in_single_precision() {
        let x: Vec<f32> = (0..16).map(|t| (t as f32 * 0.7).sin()).collect();
        let p = periodogram_of(&x).unwrap();
        assert!(p.ordinates.iter().all(|v| *v >= 0.0));
    }
}
