//! Out-of-sample squared-error losses under fixed, rolling, and recursive
//! forecasting schemes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::series::TimeSeries;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum ForecastModel {
    /// Forecast with the mean of the estimation window.
    #[default]
    ConstantMean,
    /// AR(p) with intercept fitted by least squares, iterated to the horizon.
    Ar { p: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// Estimate once on observations `1..=m`.
    #[default]
    Fixed,
    /// Re-estimate on the trailing `m` observations at every origin.
    Rolling,
    /// Re-estimate on all observations up to the origin.
    Recursive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForecastSpec {
    pub model: ForecastModel,
    pub scheme: Scheme,
    pub horizon: usize,
}

impl Default for ForecastSpec {
    fn default() -> Self {
        Self {
            model: ForecastModel::ConstantMean,
            scheme: Scheme::Fixed,
            horizon: 1,
        }
    }
}

impl ForecastSpec {
    pub fn min_in_sample(&self) -> usize {
        match self.model {
            ForecastModel::ConstantMean => 2,
            ForecastModel::Ar { p } => (p + 2).max(2),
        }
    }
}

/// Losses `L_{t+τ} = (y_{t+τ} - ŷ_{t+τ})²` for origins `t = m..=T-τ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossSeries<T> {
    pub losses: Vec<T>,
    pub m: usize,
    pub n: usize,
}

/// Model parameters estimated on one window.
#[derive(Debug, Clone, PartialEq)]
pub enum Fitted<T> {
    Mean(T),
    /// Intercept followed by `φ_1..φ_p`.
    Ar(Vec<T>),
}

impl<T: Real> Fitted<T> {
    /// `τ`-step forecast from `history`, whose last element is the origin.
    pub fn forecast(&self, history: &[T], horizon: usize) -> T {
        match self {
            Fitted::Mean(mu) => *mu,
            Fitted::Ar(beta) => {
                let p = beta.len() - 1;
                let mut path: Vec<T> = history[history.len() - p..].to_vec();
                for _ in 0..horizon {
                    let k = path.len();
                    let next = beta[0]
                        + (1..=p).map(|i| beta[i] * path[k - i]).sum::<T>();
                    path.push(next);
                }
                *path.last().expect("horizon ≥ 1")
            }
        }
    }
}

/// Estimates `model` on `window`.
///
/// A singular AR design (for instance a constant window) falls back to the
/// window mean.
pub fn fit<T: Real>(model: ForecastModel, window: &[T]) -> Fitted<T> {
    let mean = window.iter().copied().sum::<T>() / T::from_count(window.len());
    match model {
        ForecastModel::ConstantMean | ForecastModel::Ar { p: 0 } => Fitted::Mean(mean),
        ForecastModel::Ar { p } => {
            let k = p + 1;
            let mut xtx = vec![T::zero(); k * k];
            let mut xty = vec![T::zero(); k];
            let mut row = vec![T::zero(); k];
            for t in p..window.len() {
                row[0] = T::one();
                for i in 1..=p {
                    row[i] = window[t - i];
                }
                for a in 0..k {
                    xty[a] += row[a] * window[t];
                    for b in 0..k {
                        xtx[a * k + b] += row[a] * row[b];
                    }
                }
            }
            match solve(&mut xtx, &mut xty, k) {
                Some(beta) => Fitted::Ar(beta),
                None => Fitted::Mean(mean),
            }
        }
    }
}

/// Gaussian elimination with partial pivoting; `None` when singular.
fn solve<T: Real>(a: &mut [T], b: &mut [T], k: usize) -> Option<Vec<T>> {
    let scale = a.iter().fold(T::zero(), |m, v| m.max(v.abs()));
    let tiny = T::epsilon() * T::lit(1e3) * scale.max(T::one());
    for col in 0..k {
        let piv = (col..k).max_by(|&i, &j| a[i * k + col].abs().partial_cmp(&a[j * k + col].abs()).unwrap())?;
        if a[piv * k + col].abs() <= tiny {
            return None;
        }
        if piv != col {
            for c in 0..k {
                a.swap(piv * k + c, col * k + c);
            }
            b.swap(piv, col);
        }
        for r in col + 1..k {
            let f = a[r * k + col] / a[col * k + col];
            for c in col..k {
                let v = a[col * k + c];
                a[r * k + c] -= f * v;
            }
            let v = b[col];
            b[r] -= f * v;
        }
    }
    let mut x = vec![T::zero(); k];
    for r in (0..k).rev() {
        let s: T = (r + 1..k).map(|c| a[r * k + c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r * k + r];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

pub fn oos_losses<T: Real>(series: &TimeSeries<T>, m: usize, spec: &ForecastSpec) -> Result<LossSeries<T>> {
    oos_losses_of(series.values(), m, spec)
}

pub fn oos_losses_of<T: Real>(y: &[T], m: usize, spec: &ForecastSpec) -> Result<LossSeries<T>> {
    let total = y.len();
    let tau = spec.horizon;
    if tau == 0 {
        return Err(Error::InvalidInput("forecast horizon must be at least 1".into()));
    }
    if m < spec.min_in_sample() {
        return Err(Error::InvalidInput(format!(
            "in-sample size {m} too small for {:?} (need {})",
            spec.model,
            spec.min_in_sample()
        )));
    }
    if m + tau > total {
        return Err(Error::InvalidInput(format!(
            "in-sample size {m} plus horizon {tau} exceeds series length {total}"
        )));
    }
    let n = total - m - tau + 1;
    let mut losses = Vec::with_capacity(n);

    if spec.model == ForecastModel::ConstantMean {
        let mut prefix = Vec::with_capacity(total + 1);
        prefix.push(T::zero());
        let mut acc = T::zero();
        for &v in y {
            acc += v;
            prefix.push(acc);
        }
        let fixed_mean = prefix[m] / T::from_count(m);
        // origin is the 1-based index of the last observation used.
        for origin in m..=total - tau {
            let yhat = match spec.scheme {
                Scheme::Fixed => fixed_mean,
                Scheme::Rolling => (prefix[origin] - prefix[origin - m]) / T::from_count(m),
                Scheme::Recursive => prefix[origin] / T::from_count(origin),
            };
            let e = y[origin + tau - 1] - yhat;
            losses.push(e * e);
        }
    } else {
        let fixed = fit(spec.model, &y[..m]);
        for origin in m..=total - tau {
            let model = match spec.scheme {
                Scheme::Fixed => fixed.clone(),
                Scheme::Rolling => fit(spec.model, &y[origin - m..origin]),
                Scheme::Recursive => fit(spec.model, &y[..origin]),
            };
            let e = y[origin + tau - 1] - model.forecast(&y[..origin], tau);
            losses.push(e * e);
        }
    }
    debug_assert_eq!(losses.len(), n);
    Ok(LossSeries { losses, m, n })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_computed_fixed_mean() {
        let l = oos_losses_of(&[1.0f64, 2.0, 3.0, 4.0], 2, &ForecastSpec::default()).unwrap();
        assert_eq!(l.losses, vec![2.25, 6.25]);
        assert_eq!(l.n, 2);
    }

    #[test]
    fn constant_series_has_zero_loss() {
        let y = vec![4.25f64; 30];
        for model in [ForecastModel::ConstantMean, ForecastModel::Ar { p: 2 }] {
            for scheme in [Scheme::Fixed, Scheme::Rolling, Scheme::Recursive] {
                let spec = ForecastSpec { model, scheme, horizon: 2 };
                let l = oos_losses_of(&y, 10, &spec).unwrap();
                assert!(l.losses.iter().all(|&v| v == 0.0), "{model:?} {scheme:?}");
            }
        }
    }

    #[test]
    fn rolling_and_recursive_means() {
        let y = [1.0f64, 2.0, 3.0, 4.0, 5.0];
        let roll = ForecastSpec { scheme: Scheme::Rolling, ..Default::default() };
        let rec = ForecastSpec { scheme: Scheme::Recursive, ..Default::default() };
        // origins 2,3,4 -> rolling means 1.5, 2.5, 3.5
        assert_eq!(oos_losses_of(&y, 2, &roll).unwrap().losses, vec![2.25, 2.25, 2.25]);
        // recursive means 1.5, 2, 2.5
        assert_eq!(oos_losses_of(&y, 2, &rec).unwrap().losses, vec![2.25, 4.0, 6.25]);
    }

    #[test]
    fn ar_recovers_exact_recursion() {
        // y_t = 1 + 0.5 y_{t-1} exactly, so one- and two-step forecasts are exact.
        let mut y = vec![4.0f64];
        for _ in 0..40 {
            let last = *y.last().unwrap();
            y.push(1.0 + 0.5 * last + if y.len() % 2 == 0 { 1e-3 } else { -1e-3 });
        }
        let f = fit(ForecastModel::Ar { p: 1 }, &y[..20]);
        match &f {
            Fitted::Ar(b) => assert!((b[1] - 0.5).abs() < 0.05),
            _ => panic!("expected AR fit"),
        }
        let spec = ForecastSpec { model: ForecastModel::Ar { p: 1 }, ..Default::default() };
        let l = oos_losses_of(&y, 20, &spec).unwrap();
        assert!(l.losses.iter().all(|&v| v < 1e-4));
    }

    #[test]
    fn argument_errors() {
        let y = [1.0f64, 2.0, 3.0, 4.0];
        assert!(oos_losses_of(&y, 1, &ForecastSpec::default()).is_err());
        assert!(oos_losses_of(&y, 4, &ForecastSpec::default()).is_err());
        let ar = ForecastSpec { model: ForecastModel::Ar { p: 2 }, ..Default::default() };
        assert!(oos_losses_of(&y, 3, &ar).is_err());
        let h0 = ForecastSpec { horizon: 0, ..Default::default() };
        assert!(oos_losses_of(&y, 2, &h0).is_err());
    }
}
