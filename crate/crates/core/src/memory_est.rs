//! Local Whittle estimation of the memory parameter.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{is_degenerate, Real};
use crate::series::TimeSeries;
use crate::spectral::{periodogram_of, SpectralEstimate};

pub const LW_BANDWIDTH_EXPONENT: f64 = 0.65;
pub const MIN_LW_LEN: usize = 16;

const GRID_POINTS: usize = 201;
const D_LO: f64 = -0.5;
const D_HI: f64 = 0.5;
const REFINE_TOL: f64 = 1e-6;

/// `⌊n^exponent⌋`.
pub fn bandwidth_for(n: usize, exponent: f64) -> usize {
    (n as f64).powf(exponent).floor() as usize
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MemoryEstimate<T> {
    pub d_hat: T,
    pub bandwidth: usize,
    pub objective_value: T,
    /// The minimiser sits on the edge of `[-0.5, 0.5]`.
    pub at_boundary: bool,
}

/// Local Whittle estimate with bandwidth `w` (default `⌊n^0.65⌋`).
pub fn local_whittle<T: Real>(
    series: &TimeSeries<T>,
    bandwidth: Option<usize>,
) -> Result<MemoryEstimate<T>> {
    local_whittle_of(series.values(), bandwidth)
}

pub fn local_whittle_of<T: Real>(values: &[T], bandwidth: Option<usize>) -> Result<MemoryEstimate<T>> {
    let n = values.len();
    if n < MIN_LW_LEN {
        return Err(Error::TooShort {
            needed: MIN_LW_LEN,
            got: n,
        });
    }
    if is_degenerate(values) {
        return Err(Error::Degenerate("constant series has no memory to estimate".into()));
    }
    let pg = periodogram_of(values)?;
    let w = bandwidth.unwrap_or_else(|| bandwidth_for(n, LW_BANDWIDTH_EXPONENT));
    local_whittle_from(&pg, w)
}

/// Local Whittle estimate from a precomputed periodogram.
pub fn local_whittle_from<T: Real>(pg: &SpectralEstimate<T>, w: usize) -> Result<MemoryEstimate<T>> {
    let objective = WhittleObjective::new(pg, w)?;
    let (d_hat, value) = minimise(&objective);
    let eps = T::lit(REFINE_TOL);
    Ok(MemoryEstimate {
        d_hat,
        bandwidth: w,
        objective_value: value,
        at_boundary: d_hat <= T::lit(D_LO) + eps || d_hat >= T::lit(D_HI) - eps,
    })
}

/// `R(d) = log(w⁻¹ Σ j^{2d} I_j) - 2d w⁻¹ Σ log j`.
///
/// Ordinates are divided by their mean over the band, which shifts `R` by a
/// constant and makes the argmin exactly invariant to power-of-two rescaling
/// of the data.
pub struct WhittleObjective<T> {
    log_j: Vec<T>,
    norm_ord: Vec<T>,
    mean_log_j: T,
}

impl<T: Real> WhittleObjective<T> {
    pub fn new(pg: &SpectralEstimate<T>, w: usize) -> Result<Self> {
        if w < 2 || w > pg.len() {
            return Err(Error::InvalidInput(format!(
                "local Whittle bandwidth {w} outside [2, {}]",
                pg.len()
            )));
        }
        let band = &pg.ordinates[..w];
        let wt = T::from_count(w);
        let scale = band.iter().copied().sum::<T>() / wt;
        if !(scale > T::zero()) {
            return Err(Error::Degenerate("periodogram vanishes over the bandwidth".into()));
        }
        let log_j: Vec<T> = (1..=w).map(|j| T::from_count(j).ln()).collect();
        let mean_log_j = log_j.iter().copied().sum::<T>() / wt;
        Ok(Self {
            norm_ord: band.iter().map(|&v| v / scale).collect(),
            log_j,
            mean_log_j,
        })
    }

    pub fn eval(&self, d: T) -> T {
        let two_d = d + d;
        let s = self
            .log_j
            .iter()
            .zip(&self.norm_ord)
            .map(|(&lj, &i)| (two_d * lj).exp() * i)
            .sum::<T>()
            / T::from_count(self.log_j.len());
        s.ln() - two_d * self.mean_log_j
    }

    /// Best point of the uniform grid `lo + i·step`, `i < GRID_POINTS`. The
    /// weights `j^{2d}` are advanced multiplicatively instead of calling
    /// `exp` at every grid point.
    fn grid_argmin(&self, lo: T, step: T) -> (usize, T) {
        let two = T::lit(2.0);
        let mut cur: Vec<T> = self
            .log_j
            .iter()
            .zip(&self.norm_ord)
            .map(|(&lj, &i)| (two * lo * lj).exp() * i)
            .collect();
        let growth: Vec<T> = self.log_j.iter().map(|&lj| (two * step * lj).exp()).collect();
        let wt = T::from_count(self.log_j.len());
        let mut best = (0usize, T::infinity());
        for i in 0..GRID_POINTS {
            let d = lo + step * T::from_count(i);
            let v = (cur.iter().copied().sum::<T>() / wt).ln() - two * d * self.mean_log_j;
            if v < best.1 {
                best = (i, v);
            }
            for (c, g) in cur.iter_mut().zip(&growth) {
                *c *= *g;
            }
        }
        best
    }
}

/// Grid scan over `[-0.5, 0.5]` then golden-section refinement inside the
/// bracket of the best grid point.
fn minimise<T: Real>(f: &WhittleObjective<T>) -> (T, T) {
    let lo = T::lit(D_LO);
    let step = T::lit((D_HI - D_LO) / (GRID_POINTS - 1) as f64);
    let best = f.grid_argmin(lo, step);
    let a = lo + step * T::from_count(best.0.saturating_sub(1));
    let b = lo + step * T::from_count((best.0 + 1).min(GRID_POINTS - 1));
    let (d_ref, v_ref) = golden_section(|d| f.eval(d), a, b, T::lit(REFINE_TOL));
    let d_grid = lo + step * T::from_count(best.0);
    if v_ref <= best.1 {
        (d_ref, v_ref)
    } else {
        (d_grid, best.1)
    }
}

pub(crate) fn golden_section<T: Real>(f: impl Fn(T) -> T, mut a: T, mut b: T, tol: T) -> (T, T) {
    let inv_phi = T::lit((5f64.sqrt() - 1.0) / 2.0);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    let fa = f(a);
    let fb = f(b);
    [(c, fc), (d, fd), (a, fa), (b, fb)]
        .into_iter()
        .fold((c, fc), |acc, p| if p.1 < acc.1 { p } else { acc })
}
