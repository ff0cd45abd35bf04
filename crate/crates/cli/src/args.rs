use std::path::PathBuf;

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use lmdsw::dsw::DswConfig;
use lmdsw::forecast::{ForecastModel, Scheme};
use lmdsw::ingest::{parse_date, CritvalSettings, PriceSeriesInput};
use lmdsw::lrv::LrvMethod;
use lmdsw::mc_harness::{ExperimentSpec, TestVariant};
use lmdsw::sim::{ArfimaSpec, BreakKind};

use crate::CliError;

#[derive(Debug, Parser)]
#[command(name = "lmdsw", version, about = "Forecast breakdown testing under long memory")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Master seed; repetitions derive their own streams from it.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// TOML file with `seed`, `[dsw]`, `[generator]`, `[experiment]`,
    /// `[critvals]` and `[[series]]` sections. Flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output file; stdout when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Repeat for more log output.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate an ARFIMA path, optionally with a break.
    Simulate(SimulateArgs),
    /// Periodogram at the Fourier frequencies.
    Periodogram(InputArgs),
    /// Local Whittle estimate of the memory parameter.
    EstimateD(EstimateArgs),
    /// Long-memory CUSUM break location.
    Breakpoint(BreakpointArgs),
    /// Double sup-Wald test on a series.
    Test(TestArgs),
    /// Simulated critical values of the DSW statistic.
    Critvals(CritvalArgs),
    /// Predicted and simulated memory of squared forecast errors.
    Transfer(TransferArgs),
    /// Empirical size of the MAC and HAC tests.
    McSize(McArgs),
    /// Local power curves for mean shifts of size k·T^(d-1/2).
    McPower(McArgs),
    /// Deflate price series, test them and print report rows.
    Apply(ApplyArgs),
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// CSV with a `value` (or `price`) column and an optional `date` column.
    #[arg(long)]
    pub input: PathBuf,
}

#[derive(Debug, Args, Default)]
pub struct GeneratorArgs {
    #[arg(long)]
    pub d: Option<f64>,
    /// AR coefficients, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub ar: Option<Vec<f64>>,
    /// MA coefficients, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub ma: Option<Vec<f64>>,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub mean: Option<f64>,
    #[arg(long)]
    pub burn_in: Option<usize>,
}

impl GeneratorArgs {
    pub fn apply(&self, base: Option<ArfimaSpec>) -> Result<ArfimaSpec, CliError> {
        let mut spec = base.unwrap_or_else(|| ArfimaSpec::fwn(0.0).expect("valid"));
        if let Some(d) = self.d {
            spec.d = d;
        }
        if let Some(ar) = &self.ar {
            spec.ar = ar.clone();
        }
        if let Some(ma) = &self.ma {
            spec.ma = ma.clone();
        }
        if let Some(s) = self.sigma {
            spec.sigma = s;
        }
        if let Some(m) = self.mean {
            spec.mean = m;
        }
        if let Some(b) = self.burn_in {
            spec.burn_in = b;
        }
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BreakKindArg {
    Mean,
    Variance,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub generator: GeneratorArgs,
    #[arg(long, default_value_t = 1000)]
    pub length: usize,
    #[arg(long, value_enum)]
    pub break_kind: Option<BreakKindArg>,
    /// 1-based index of the first affected observation.
    #[arg(long)]
    pub break_at: Option<usize>,
    /// Additive shift, or factor on the standard deviation.
    #[arg(long, allow_hyphen_values = true)]
    pub break_magnitude: Option<f64>,
    /// Mean shift of size k·T^(d-1/2); overrides `--break-magnitude`.
    #[arg(long, allow_hyphen_values = true)]
    pub local_k: Option<f64>,
    /// Attach consecutive weekday dates starting here.
    #[arg(long, value_parser = date_arg)]
    pub start_date: Option<NaiveDate>,
}

impl SimulateArgs {
    pub fn break_kind(&self) -> BreakKind {
        match self.break_kind {
            Some(BreakKindArg::Variance) => BreakKind::VarianceShift,
            _ => BreakKind::MeanShift,
        }
    }
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, default_value_t = lmdsw::memory_est::LW_BANDWIDTH_EXPONENT)]
    pub bandwidth_exp: f64,
}

#[derive(Debug, Args)]
pub struct BreakpointArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Memory parameter; estimated by local Whittle when absent.
    #[arg(long)]
    pub d: Option<f64>,
    #[arg(long, default_value_t = 0.1)]
    pub trim: f64,
}

#[derive(Debug, Args, Default)]
pub struct DswArgs {
    #[arg(long)]
    pub m0_frac: Option<f64>,
    #[arg(long)]
    pub mu_bar: Option<f64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub tau: Option<usize>,
    #[arg(long)]
    pub m_stride: Option<usize>,
    #[arg(long)]
    pub mac_bandwidth_exp: Option<f64>,
    #[arg(long)]
    pub lw_bandwidth_exp: Option<f64>,
    /// `mean` or `ar<p>` (e.g. `ar1`).
    #[arg(long, value_parser = model_arg)]
    pub model: Option<ForecastModel>,
    #[arg(long, value_parser = scheme_arg)]
    pub scheme: Option<Scheme>,
    /// `mac` or `hac`.
    #[arg(long, value_parser = variance_arg)]
    pub variance: Option<LrvMethod>,
    /// Explicit smallest in-sample size.
    #[arg(long, requires = "m1")]
    pub m0: Option<usize>,
    /// Explicit largest in-sample size.
    #[arg(long, requires = "m0")]
    pub m1: Option<usize>,
}

impl DswArgs {
    pub fn apply(&self, base: Option<DswConfig>) -> DswConfig {
        let mut c = base.unwrap_or_default();
        macro_rules! set {
            ($($f:ident),*) => {$(if let Some(v) = self.$f { c.$f = v; })*};
        }
        set!(m0_frac, mu_bar, epsilon, tau, m_stride, mac_bandwidth_exp, lw_bandwidth_exp, model, scheme, variance);
        if let (Some(a), Some(b)) = (self.m0, self.m1) {
            c.m_range = Some((a, b));
        }
        c
    }
}

#[derive(Debug, Args)]
pub struct TestArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub dsw: DswArgs,
    /// Smallest in-sample end date (needs a dated input).
    #[arg(long, value_parser = date_arg, requires = "window_end")]
    pub window_start: Option<NaiveDate>,
    /// Largest in-sample end date.
    #[arg(long, value_parser = date_arg, requires = "window_start")]
    pub window_end: Option<NaiveDate>,
    /// Write the per-m trace as CSV here.
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CritvalArgs {
    #[command(flatten)]
    pub generator: GeneratorArgs,
    #[command(flatten)]
    pub dsw: DswArgs,
    #[arg(long, default_value_t = 1000)]
    pub length: usize,
    #[arg(long, default_value_t = 1000)]
    pub reps: usize,
    #[arg(long, value_delimiter = ',', default_value = "0.9,0.95,0.99")]
    pub quantiles: Vec<f64>,
    /// Quantiles of the limit functional instead, on this many grid points.
    #[arg(long)]
    pub limit_grid: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TransferArgs {
    /// Memory of the target; omit all case flags to run the standard table.
    #[arg(long)]
    pub d_y: Option<f64>,
    #[arg(long)]
    pub d_yhat: Option<f64>,
    #[arg(long)]
    pub unbiased: bool,
    /// Common-factor memory; makes the pair fractionally cointegrated.
    #[arg(long)]
    pub d_x: Option<f64>,
    #[arg(long)]
    pub kappa_equal: bool,
    #[arg(long, default_value_t = 0.1)]
    pub d_eps_y: f64,
    #[arg(long, default_value_t = 0.0)]
    pub d_eps_yhat: f64,
    #[arg(long, default_value_t = 4000)]
    pub length: usize,
    #[arg(long, default_value_t = 100)]
    pub reps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VariantArg {
    Mac,
    Hac,
}

impl From<VariantArg> for TestVariant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Mac => TestVariant::Mac,
            VariantArg::Hac => TestVariant::HacBaseline,
        }
    }
}

#[derive(Debug, Args)]
pub struct McArgs {
    /// Memory parameters, one cell each.
    #[arg(long, value_delimiter = ',')]
    pub d: Option<Vec<f64>>,
    /// AR(1) coefficients, crossed with `--d`.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub phi: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', value_enum)]
    pub variant: Option<Vec<VariantArg>>,
    #[arg(long)]
    pub length: Option<usize>,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub critval_reps: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub k_grid: Option<Vec<u32>>,
    #[arg(long)]
    pub break_at: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub levels: Option<Vec<f64>>,
    /// Full-size study: 2,000 repetitions, unit stride, k = 0..25.
    #[arg(long)]
    pub full_scale: bool,
    #[command(flatten)]
    pub dsw: DswArgs,
    #[arg(long, default_value = "lmdsw-cache")]
    pub cache_dir: PathBuf,
    #[arg(long)]
    pub no_cache: bool,
    /// JSON metadata file; defaults to `<out>.meta.json`.
    #[arg(long)]
    pub meta_out: Option<PathBuf>,
    /// Whitespace-separated power curves, one block per cell and level.
    #[arg(long)]
    pub gnuplot: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ApplyArgs {
    /// Price CSV (`date,price`); `[[series]]` entries in the config add more.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub name: Option<String>,
    /// Price index CSV (`period,index`).
    #[arg(long)]
    pub deflator: Option<PathBuf>,
    /// Base period of the index, e.g. `2015` or `2015-01`.
    #[arg(long)]
    pub base_period: Option<String>,
    #[arg(long, value_parser = date_arg, requires = "window_end")]
    pub window_start: Option<NaiveDate>,
    #[arg(long, value_parser = date_arg, requires = "window_start")]
    pub window_end: Option<NaiveDate>,
    #[arg(long)]
    pub drop_weekends: bool,
    #[arg(long)]
    pub critval_reps: Option<usize>,
    #[command(flatten)]
    pub dsw: DswArgs,
}

impl ApplyArgs {
    pub fn input(&self) -> Option<PriceSeriesInput> {
        let path = self.input.clone()?;
        let name = self.name.clone().unwrap_or_else(|| {
            path.file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "series".into())
        });
        Some(PriceSeriesInput {
            name,
            path,
            deflator: self.deflator.clone(),
            base_period: self.base_period.clone(),
            window: self.window_start.zip(self.window_end),
            drop_weekends: self.drop_weekends,
        })
    }
}

/// Contents of `--config`.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub dsw: Option<DswConfig>,
    pub generator: Option<ArfimaSpec>,
    pub experiment: Option<ExperimentSpec>,
    pub critvals: Option<CritvalSettings>,
    #[serde(default)]
    pub series: Vec<PriceSeriesInput>,
}

impl FileConfig {
    pub fn load(path: Option<&PathBuf>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Input(format!("config {}: {e}", path.display())))
    }
}

fn date_arg(s: &str) -> Result<NaiveDate, String> {
    parse_date(s).map_err(|e| e.to_string())
}

fn model_arg(s: &str) -> Result<ForecastModel, String> {
    let s = s.to_ascii_lowercase();
    if s == "mean" || s == "constant-mean" {
        return Ok(ForecastModel::ConstantMean);
    }
    s.strip_prefix("ar")
        .map(|p| p.trim_start_matches([':', '(']).trim_end_matches(')'))
        .and_then(|p| p.parse().ok())
        .map(|p| ForecastModel::Ar { p })
        .ok_or_else(|| format!("unknown model '{s}' (expected mean or ar<p>)"))
}

fn scheme_arg(s: &str) -> Result<Scheme, String> {
    match s.to_ascii_lowercase().as_str() {
        "fixed" => Ok(Scheme::Fixed),
        "rolling" => Ok(Scheme::Rolling),
        "recursive" => Ok(Scheme::Recursive),
        _ => Err(format!("unknown scheme '{s}' (fixed, rolling, recursive)")),
    }
}

fn variance_arg(s: &str) -> Result<LrvMethod, String> {
    match s.to_ascii_lowercase().as_str() {
        "mac" => Ok(LrvMethod::Mac),
        "hac" => Ok(LrvMethod::Hac),
        _ => Err(format!("unknown variance estimator '{s}' (mac, hac)")),
    }
}
