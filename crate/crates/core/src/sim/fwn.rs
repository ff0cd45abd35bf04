//! Exact Gaussian sampling of stationary sequences with a given
//! autocovariance.

use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex;
use rustfft::Fft;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Eigenvalues below `-NEG_TOL * max_eigenvalue` reject the embedding.
const NEG_TOL: f64 = 1e-10;

#[derive(Clone)]
enum Method {
    Circulant {
        sqrt_eig: Vec<f64>,
        fft: Arc<dyn Fft<f64>>,
    },
    DurbinLevinson {
        acvf: Vec<f64>,
    },
}

/// Draws `N(0, Σ)` vectors where `Σ` is the Toeplitz matrix of an
/// autocovariance sequence.
///
/// The covariance is embedded in a circulant matrix of size `2(n-1)` and
/// sampled through one complex FFT per draw. When the embedding has
/// materially negative eigenvalues the sampler falls back to the
/// `O(n²)` Durbin–Levinson recursion.
#[derive(Clone)]
pub struct GaussianSampler {
    n: usize,
    method: Method,
}

impl std::fmt::Debug for GaussianSampler {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GaussianSampler")
            .field("n", &self.n)
            .field("circulant", &self.is_circulant())
            .finish()
    }
}

impl GaussianSampler {
    /// `acvf` must hold `γ(0..n)`, i.e. exactly `n` lags.
    pub fn new(acvf: Vec<f64>) -> Result<Self> {
        let n = acvf.len();
        if n == 0 {
            return Err(Error::InvalidInput("empty autocovariance".into()));
        }
        if !(acvf[0] > 0.0) {
            return Err(Error::Domain("autocovariance at lag 0 must be positive".into()));
        }
        if n == 1 {
            return Ok(Self {
                n,
                method: Method::DurbinLevinson { acvf },
            });
        }
        let m = 2 * (n - 1);
        let mut row: Vec<Complex<f64>> = Vec::with_capacity(m);
        row.extend(acvf.iter().map(|&g| Complex::new(g, 0.0)));
        row.extend(acvf[1..n - 1].iter().rev().map(|&g| Complex::new(g, 0.0)));
        let fft = f64::fft_forward(m);
        fft.process(&mut row);

        let max_eig = row.iter().fold(0.0f64, |a, c| a.max(c.re));
        if row.iter().any(|c| c.re < -NEG_TOL * max_eig) {
            log::debug!("circulant embedding not nonnegative for n = {n}; using Durbin-Levinson");
            return Ok(Self {
                n,
                method: Method::DurbinLevinson { acvf },
            });
        }
        let scale = 1.0 / m as f64;
        let sqrt_eig = row.iter().map(|c| (c.re.max(0.0) * scale).sqrt()).collect();
        Ok(Self {
            n,
            method: Method::Circulant { sqrt_eig, fft },
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn is_circulant(&self) -> bool {
        matches!(self.method, Method::Circulant { .. })
    }

    /// Forces the Durbin–Levinson path; used to cross-check the embedding.
    pub fn durbin_levinson(acvf: Vec<f64>) -> Self {
        Self {
            n: acvf.len(),
            method: Method::DurbinLevinson { acvf },
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        match &self.method {
            Method::Circulant { sqrt_eig, fft } => {
                let mut buf: Vec<Complex<f64>> = sqrt_eig
                    .iter()
                    .map(|&s| {
                        let re: f64 = rng.sample(StandardNormal);
                        let im: f64 = rng.sample(StandardNormal);
                        Complex::new(s * re, s * im)
                    })
                    .collect();
                fft.process(&mut buf);
                buf.truncate(self.n);
                buf.into_iter().map(|c| c.re).collect()
            }
            Method::DurbinLevinson { acvf } => durbin_levinson_sample(acvf, rng),
        }
    }
}

fn durbin_levinson_sample<R: Rng + ?Sized>(acvf: &[f64], rng: &mut R) -> Vec<f64> {
    let n = acvf.len();
    let mut x = Vec::with_capacity(n);
    let mut phi: Vec<f64> = Vec::with_capacity(n);
    let mut prev: Vec<f64> = Vec::with_capacity(n);
    let mut v = acvf[0];

    let z: f64 = rng.sample(StandardNormal);
    x.push(v.sqrt() * z);
    for t in 1..n {
        // Levinson update of the order-t predictor.
        let mut num = acvf[t];
        for (j, &p) in phi.iter().enumerate() {
            num -= p * acvf[t - 1 - j];
        }
        let kappa = num / v;
        prev.clear();
        prev.extend_from_slice(&phi);
        for j in 0..phi.len() {
            phi[j] = prev[j] - kappa * prev[prev.len() - 1 - j];
        }
        phi.push(kappa);
        v *= 1.0 - kappa * kappa;

        let pred: f64 = phi.iter().enumerate().map(|(j, &p)| p * x[t - 1 - j]).sum();
        let z: f64 = rng.sample(StandardNormal);
        x.push(pred + v.max(0.0).sqrt() * z);
    }
    x
}
