//! Memory of the squared forecast error implied by the memory of the target
//! and the forecast, and a simulation check of those predictions.
//!
//! Without fractional cointegration the loss inherits `max(d_y, d_ŷ)` when
//! the forecast is biased; when it is unbiased only the squared terms are
//! left and their memory is `max(2·max(d_y, d_ŷ) − 1/2, 0)`.
//!
//! Under fractional cointegration `y = β_y + κ_y x + ε_y` and
//! `ŷ = β_ŷ + κ_ŷ x + ε_ŷ`, so `y − ŷ = (β_y − β_ŷ) + (κ_y − κ_ŷ)x + ε_y − ε_ŷ`.
//! With `κ_y ≠ κ_ŷ` the common factor survives: a bias keeps it linear
//! (memory `d_x`), no bias leaves `x²` (memory `max(2d_x − 1/2, 0)`). With
//! `κ_y = κ_ŷ` the factor cancels and only the error memories remain, which
//! bounds the loss memory by `[0, d_x)` without pinning it down.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::memory_est::{bandwidth_for, local_whittle_of, LW_BANDWIDTH_EXPONENT};
use crate::sim::{rep_rng, ArfimaGenerator, ArfimaSpec};

/// Mean gap between target and forecast in biased simulations.
pub const BIAS_GAP: f64 = 1.0;
/// Loading of the target on the common factor.
pub const KAPPA_Y: f64 = 1.0;
/// Loading of the forecast on the common factor when it differs from
/// [`KAPPA_Y`].
pub const KAPPA_YHAT_DISTINCT: f64 = -1.0;
/// Standard deviation of the idiosyncratic errors relative to the factor.
pub const ERROR_SCALE: f64 = 0.5;

pub const MIN_TRANSFER_LEN: usize = 1000;
pub const MIN_TRANSFER_REPS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cointegration {
    pub d_x: f64,
    pub kappa_equal: bool,
    pub d_eps_y: f64,
    pub d_eps_yhat: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransferCase {
    pub d_y: f64,
    pub d_yhat: f64,
    pub biased: bool,
    #[serde(default)]
    pub fci: Option<Cointegration>,
}

impl TransferCase {
    pub fn independent(d_y: f64, d_yhat: f64, biased: bool) -> Self {
        Self {
            d_y,
            d_yhat,
            biased,
            fci: None,
        }
    }

    /// Cointegrated pair; both series carry the factor memory `d_x`.
    pub fn cointegrated(d_x: f64, kappa_equal: bool, d_eps_y: f64, d_eps_yhat: f64, biased: bool) -> Self {
        Self {
            d_y: d_x,
            d_yhat: d_x,
            biased,
            fci: Some(Cointegration {
                d_x,
                kappa_equal,
                d_eps_y,
                d_eps_yhat,
            }),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let in_range = |name: &str, d: f64| {
            if (0.0..0.5).contains(&d) {
                Ok(())
            } else {
                Err(Error::Domain(format!("{name} = {d} outside [0, 0.5)")))
            }
        };
        in_range("d_y", self.d_y)?;
        in_range("d_yhat", self.d_yhat)?;
        if let Some(c) = &self.fci {
            in_range("d_x", c.d_x)?;
            in_range("d_eps_y", c.d_eps_y)?;
            in_range("d_eps_yhat", c.d_eps_yhat)?;
            if c.d_x <= c.d_eps_y.max(c.d_eps_yhat) {
                return Err(Error::Domain(format!(
                    "factor memory {} must exceed the error memories {} and {}",
                    c.d_x, c.d_eps_y, c.d_eps_yhat
                )));
            }
            if self.d_y != c.d_x || self.d_yhat != c.d_x {
                return Err(Error::Domain(
                    "cointegrated series must share the factor memory d_x".into(),
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum LossMemory {
    Exact { d: f64 },
    /// Half-open interval `[lo, hi)`.
    Interval { lo: f64, hi: f64 },
}

impl LossMemory {
    pub fn exact(&self) -> Option<f64> {
        match *self {
            LossMemory::Exact { d } => Some(d),
            LossMemory::Interval { .. } => None,
        }
    }

    pub fn contains(&self, d: f64) -> bool {
        match *self {
            LossMemory::Exact { d: e } => d == e,
            LossMemory::Interval { lo, hi } => lo <= d && d < hi,
        }
    }
}

fn squared_memory(d: f64) -> f64 {
    (2.0 * d - 0.5).max(0.0)
}

pub fn predicted_loss_memory(case: &TransferCase) -> Result<LossMemory> {
    case.validate()?;
    match (&case.fci, case.biased) {
        (None, true) => Ok(LossMemory::Exact {
            d: case.d_y.max(case.d_yhat),
        }),
        (None, false) => Ok(LossMemory::Exact {
            d: squared_memory(case.d_y.max(case.d_yhat)),
        }),
        (Some(c), true) if !c.kappa_equal => Ok(LossMemory::Exact { d: c.d_x }),
        (Some(c), true) => Ok(LossMemory::Interval { lo: 0.0, hi: c.d_x }),
        (Some(c), false) if !c.kappa_equal => Ok(LossMemory::Exact {
            d: squared_memory(c.d_x),
        }),
        (Some(_), false) => Err(Error::InvalidInput(
            "unbiased forecast with equal factor loadings: the factor cancels from the \
             forecast error and the loss memory is not determined by d_x"
                .into(),
        )),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferSummary {
    pub case: TransferCase,
    pub predicted: LossMemory,
    pub t_len: usize,
    pub reps: usize,
    pub failures: usize,
    pub bandwidth: usize,
    pub mean_d_hat: f64,
    /// Standard deviation of `d̂_L` across repetitions.
    pub sd_d_hat: f64,
}

impl TransferSummary {
    /// Distance between the empirical mean and an exact prediction in units
    /// of the per-repetition standard deviation.
    pub fn deviation_in_sd(&self) -> Option<f64> {
        self.predicted
            .exact()
            .map(|d| (self.mean_d_hat - d).abs() / self.sd_d_hat.max(f64::MIN_POSITIVE))
    }
}

/// One simulated `(y, ŷ)` pair realising `case`.
pub fn simulate_pair<R: Rng + ?Sized>(
    case: &TransferCase,
    gens: &PairGenerators,
    rng: &mut R,
) -> (Vec<f64>, Vec<f64>) {
    let bias = if case.biased { BIAS_GAP } else { 0.0 };
    match (&case.fci, gens) {
        (None, PairGenerators::Independent { y, yhat }) => {
            let a = y.sample_raw(rng);
            let b: Vec<f64> = yhat.sample_raw(rng).into_iter().map(|v| v + bias).collect();
            (a, b)
        }
        (Some(c), PairGenerators::Factor { x, eps_y, eps_yhat }) => {
            let kappa_yhat = if c.kappa_equal { KAPPA_Y } else { KAPPA_YHAT_DISTINCT };
            let xs = x.sample_raw(rng);
            let ey = eps_y.sample_raw(rng);
            let eyh = eps_yhat.sample_raw(rng);
            let y = xs
                .iter()
                .zip(&ey)
                .map(|(&x, &e)| KAPPA_Y * x + ERROR_SCALE * e)
                .collect();
            let yhat = xs
                .iter()
                .zip(&eyh)
                .map(|(&x, &e)| bias + kappa_yhat * x + ERROR_SCALE * e)
                .collect();
            (y, yhat)
        }
        _ => unreachable!("generators built for a different case"),
    }
}

pub enum PairGenerators {
    Independent {
        y: ArfimaGenerator,
        yhat: ArfimaGenerator,
    },
    Factor {
        x: ArfimaGenerator,
        eps_y: ArfimaGenerator,
        eps_yhat: ArfimaGenerator,
    },
}

impl PairGenerators {
    pub fn new(case: &TransferCase, t_len: usize) -> Result<Self> {
        let gen = |d: f64| ArfimaGenerator::new(&ArfimaSpec::fwn(d)?, t_len);
        Ok(match &case.fci {
            None => PairGenerators::Independent {
                y: gen(case.d_y)?,
                yhat: gen(case.d_yhat)?,
            },
            Some(c) => PairGenerators::Factor {
                x: gen(c.d_x)?,
                eps_y: gen(c.d_eps_y)?,
                eps_yhat: gen(c.d_eps_yhat)?,
            },
        })
    }
}

/// Local Whittle estimates of the memory of `(y − ŷ)²` over `reps`
/// simulated pairs.
pub fn empirical_transfer(case: &TransferCase, t_len: usize, reps: usize, seed: u64) -> Result<TransferSummary> {
    if t_len < MIN_TRANSFER_LEN {
        return Err(Error::TooShort {
            needed: MIN_TRANSFER_LEN,
            got: t_len,
        });
    }
    if reps < MIN_TRANSFER_REPS {
        return Err(Error::InvalidInput(format!(
            "need at least {MIN_TRANSFER_REPS} repetitions, got {reps}"
        )));
    }
    let predicted = match predicted_loss_memory(case) {
        Ok(p) => p,
        Err(Error::InvalidInput(_)) => {
            let c = case.fci.expect("only cointegrated cases are undetermined");
            LossMemory::Interval { lo: 0.0, hi: c.d_x }
        }
        Err(e) => return Err(e),
    };
    let gens = PairGenerators::new(case, t_len)?;
    let estimates: Vec<Option<f64>> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let mut rng = rep_rng(seed, r as u64);
            let (y, yhat) = simulate_pair(case, &gens, &mut rng);
            let loss: Vec<f64> = y.iter().zip(&yhat).map(|(a, b)| (a - b) * (a - b)).collect();
            local_whittle_of(&loss, None).ok().map(|m| m.d_hat)
        })
        .collect();
    let ok: Vec<f64> = estimates.iter().flatten().copied().collect();
    if ok.len() < 2 {
        return Err(Error::Numerical("local Whittle failed on almost every repetition".into()));
    }
    let k = ok.len() as f64;
    let mean = ok.iter().sum::<f64>() / k;
    let sd = (ok.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (k - 1.0)).sqrt();
    Ok(TransferSummary {
        case: *case,
        predicted,
        t_len,
        reps,
        failures: reps - ok.len(),
        bandwidth: bandwidth_for(t_len, LW_BANDWIDTH_EXPONENT),
        mean_d_hat: mean,
        sd_d_hat: sd,
    })
}
