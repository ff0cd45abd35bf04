//! Forecast accuracy breakdown testing for long-memory time series.
//!
//! The double sup-Wald (DSW) test looks for a single break in the mean of
//! the out-of-sample squared-error loss series, maximising a Wald statistic
//! over candidate break dates and over a window of in-sample sizes. Under
//! long memory the statistic is standardised with the MAC long-run variance
//! estimator, fed by a local Whittle estimate of the loss series' memory,
//! and the demeaning split is located with a long-memory CUSUM.
//!
//! The estimation chain is generic over [`Real`] (`f32` or `f64`); the
//! aliases below fix it to `f64`, which is what the simulation layer
//! produces.

pub mod breakpoint;
pub mod dsw;
pub mod error;
pub mod forecast;
pub mod ingest;
pub mod lrv;
pub mod mc_harness;
pub mod memory_est;
pub mod memory_transfer;
pub mod scalar;
pub mod series;
pub mod sim;
pub mod spectral;

pub use error::{Error, Result};
pub use scalar::Real;
pub use series::TimeSeries;

pub type Series = series::TimeSeries<f64>;
pub type Spectrum = spectral::SpectralEstimate<f64>;
pub type MemoryEstimate = memory_est::MemoryEstimate<f64>;
pub type LrvEstimate = lrv::LrvEstimate<f64>;
pub type BreakEstimate = breakpoint::BreakEstimate<f64>;
pub type LossSeries = forecast::LossSeries<f64>;
pub type DswResult = dsw::DswResult<f64>;
pub type MStep = dsw::MStep<f64>;
