//! Size and local-power experiments for the DSW test.
//!
//! Critical values are simulated per cell (generator, configuration, `T`)
//! and can be cached on disk under a SHA-256 hash of everything that
//! determines them.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dsw::{dsw_test, simulate_critical_values, CriticalValues, DswConfig};
use crate::error::{Error, Result};
use crate::lrv::LrvMethod;
use crate::series::TimeSeries;
use crate::sim::{apply_break, rep_rng, ArfimaGenerator, ArfimaSpec, BreakSpec};

pub const DEFAULT_REPS: usize = 500;
pub const DEFAULT_T: usize = 500;
pub const DEFAULT_STRIDE: usize = 8;
pub const DEFAULT_BREAK_AT: usize = 300;
pub const DEFAULT_CRITVAL_REPS: usize = 1000;
pub const MIN_REPS: usize = 100;

/// Offset between the seed of the test paths and the seed of the
/// critical-value paths, so the two sets are independent.
const CRITVAL_SEED_OFFSET: u64 = 0x5eed_c417;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TestVariant {
    /// MAC standardisation, CUSUM split; critical values simulated under the
    /// experiment's own generator.
    Mac,
    /// QS-HAC standardisation, least-squares split; critical values simulated
    /// under iid noise, the null the short-memory test is built for.
    HacBaseline,
}

impl TestVariant {
    pub fn lrv(self) -> LrvMethod {
        match self {
            TestVariant::Mac => LrvMethod::Mac,
            TestVariant::HacBaseline => LrvMethod::Hac,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            TestVariant::Mac => "MAC",
            TestVariant::HacBaseline => "HAC",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentSpec {
    pub generator: ArfimaSpec,
    pub t_len: usize,
    pub reps: usize,
    pub seed: u64,
    pub variant: TestVariant,
    pub k_grid: Vec<u32>,
    /// 1-based index of the first shifted observation.
    pub break_at: usize,
    pub levels: Vec<f64>,
    pub config: DswConfig,
    pub critval_reps: usize,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            generator: ArfimaSpec::fwn(0.0).expect("valid"),
            t_len: DEFAULT_T,
            reps: DEFAULT_REPS,
            seed: 0,
            variant: TestVariant::Mac,
            k_grid: vec![0, 5, 10, 15, 20, 25],
            break_at: DEFAULT_BREAK_AT,
            levels: vec![0.10, 0.05, 0.01],
            config: DswConfig::default().with_stride(DEFAULT_STRIDE),
            critval_reps: DEFAULT_CRITVAL_REPS,
        }
    }
}

impl ExperimentSpec {
    /// Full-size study: 2,000 repetitions, 5,000 critical-value
    /// repetitions, unit stride.
    pub fn full_scale(generator: ArfimaSpec, variant: TestVariant) -> Self {
        Self {
            generator,
            variant,
            reps: 2000,
            critval_reps: 5000,
            k_grid: (0..=25).collect(),
            config: DswConfig::default(),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.generator.validate()?;
        if self.reps < MIN_REPS || self.critval_reps < MIN_REPS {
            return Err(Error::InvalidInput(format!(
                "need at least {MIN_REPS} repetitions (reps = {}, critval_reps = {})",
                self.reps, self.critval_reps
            )));
        }
        if self.levels.is_empty() || self.levels.iter().any(|&a| !(a > 0.0 && a < 1.0)) {
            return Err(Error::InvalidInput("levels must lie in (0, 1)".into()));
        }
        if self.break_at == 0 || self.break_at > self.t_len {
            return Err(Error::OutOfRange {
                index: self.break_at,
                len: self.t_len,
            });
        }
        self.test_config().m_bounds(self.t_len)?;
        Ok(())
    }

    pub fn test_config(&self) -> DswConfig {
        self.config.clone().with_variance(self.variant.lrv())
    }

    /// Generator under which critical values are simulated.
    pub fn null_generator(&self) -> ArfimaSpec {
        match self.variant {
            TestVariant::Mac => self.generator.clone(),
            TestVariant::HacBaseline => ArfimaSpec::fwn(0.0).expect("valid"),
        }
    }

    pub fn critval_request(&self) -> CritvalRequest {
        CritvalRequest {
            generator: self.null_generator(),
            config: self.test_config(),
            t_len: self.t_len,
            reps: self.critval_reps,
            probs: self.levels.iter().map(|a| 1.0 - a).collect(),
            seed: self.seed.wrapping_add(CRITVAL_SEED_OFFSET),
        }
    }

    pub fn phi(&self) -> f64 {
        self.generator.ar.first().copied().unwrap_or(0.0)
    }
}

/// Everything that determines a simulated critical-value table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CritvalRequest {
    pub generator: ArfimaSpec,
    pub config: DswConfig,
    pub t_len: usize,
    pub reps: usize,
    pub probs: Vec<f64>,
    pub seed: u64,
}

impl CritvalRequest {
    /// Hex SHA-256 of the JSON encoding together with the crate version.
    pub fn content_hash(&self) -> String {
        let json = serde_json::to_string(self).expect("request serialises");
        let mut h = Sha256::new();
        h.update(env!("CARGO_PKG_VERSION").as_bytes());
        h.update(b"\0");
        h.update(json.as_bytes());
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn simulate(&self) -> Result<CriticalValues> {
        simulate_critical_values(&self.generator, &self.config, self.t_len, self.reps, &self.probs, self.seed)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CacheEntry {
    request: CritvalRequest,
    values: CriticalValues,
}

/// On-disk store of simulated critical values.
#[derive(Debug, Clone)]
pub struct CritvalCache {
    dir: PathBuf,
}

impl CritvalCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path_for(&self, req: &CritvalRequest) -> PathBuf {
        self.dir.join(format!("{}.json", req.content_hash()))
    }

    pub fn lookup(&self, req: &CritvalRequest) -> Option<CriticalValues> {
        let text = std::fs::read_to_string(self.path_for(req)).ok()?;
        match serde_json::from_str::<CacheEntry>(&text) {
            Ok(entry) if entry.request == *req => Some(entry.values),
            Ok(_) => {
                log::warn!("critical-value cache entry does not match its key; ignoring");
                None
            }
            Err(e) => {
                log::warn!("unreadable critical-value cache entry: {e}");
                None
            }
        }
    }

    pub fn store(&self, req: &CritvalRequest, values: &CriticalValues) -> Result<()> {
        std::fs::create_dir_all(&self.dir)?;
        let entry = CacheEntry {
            request: req.clone(),
            values: values.clone(),
        };
        std::fs::write(self.path_for(req), serde_json::to_string_pretty(&entry)?)?;
        Ok(())
    }

    pub fn get_or_simulate(&self, req: &CritvalRequest) -> Result<CriticalValues> {
        if let Some(v) = self.lookup(req) {
            log::info!("critical values loaded from cache {}", self.path_for(req).display());
            return Ok(v);
        }
        let v = req.simulate()?;
        self.store(req, &v)?;
        Ok(v)
    }
}

/// Critical values for `req`, through `cache` when one is given.
pub fn critical_values(req: &CritvalRequest, cache: Option<&CritvalCache>) -> Result<CriticalValues> {
    match cache {
        Some(c) => c.get_or_simulate(req),
        None => req.simulate(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub variant: String,
    pub d: f64,
    pub phi: f64,
    /// Shift multiplier; `None` in size experiments.
    pub k: Option<u32>,
    pub level: f64,
    pub critical_value: f64,
    pub rejection_rate: f64,
    /// Binomial standard error of the rate.
    pub mc_se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub version: String,
    pub spec_hash: String,
    pub seed: u64,
    pub critval_seed: u64,
    pub m_stride: usize,
    pub t_len: usize,
    pub reps: usize,
    pub critval_reps: usize,
    pub failures: usize,
    pub runtime_secs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub spec: ExperimentSpec,
    pub critical_values: CriticalValues,
    pub rows: Vec<ReportRow>,
    pub metadata: ReportMetadata,
}

impl ExperimentReport {
    pub fn rate(&self, k: Option<u32>, level: f64) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.k == k && (r.level - level).abs() < 1e-12)
            .map(|r| r.rejection_rate)
    }
}

fn spec_hash(spec: &ExperimentSpec) -> String {
    let json = serde_json::to_string(spec).expect("spec serialises");
    Sha256::digest(json.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

/// Rejection counts per level for each statistic; failed repetitions are
/// left out of the denominator.
fn rows_for(spec: &ExperimentSpec, cv: &CriticalValues, k: Option<u32>, stats: &[Option<f64>]) -> Vec<ReportRow> {
    let ok: Vec<f64> = stats.iter().flatten().copied().collect();
    let n = ok.len().max(1) as f64;
    spec.levels
        .iter()
        .map(|&alpha| {
            let c = cv.for_level(alpha).expect("requested level");
            let rate = ok.iter().filter(|&&s| s > c).count() as f64 / n;
            ReportRow {
                variant: spec.variant.label().to_string(),
                d: spec.generator.d,
                phi: spec.phi(),
                k,
                level: alpha,
                critical_value: c,
                rejection_rate: rate,
                mc_se: (rate * (1.0 - rate) / n).sqrt(),
            }
        })
        .collect()
}

fn metadata(spec: &ExperimentSpec, failures: usize, started: Instant) -> ReportMetadata {
    ReportMetadata {
        version: env!("CARGO_PKG_VERSION").to_string(),
        spec_hash: spec_hash(spec),
        seed: spec.seed,
        critval_seed: spec.critval_request().seed,
        m_stride: spec.config.m_stride,
        t_len: spec.t_len,
        reps: spec.reps,
        critval_reps: spec.critval_reps,
        failures,
        runtime_secs: started.elapsed().as_secs_f64(),
    }
}

/// DSW statistics on `reps` paths, each shifted by `shift` from `break_at`
/// on. Repetition `r` uses the same underlying path for every shift.
fn statistics(spec: &ExperimentSpec, gen: &ArfimaGenerator, shift: f64) -> Result<Vec<Option<f64>>> {
    let config = spec.test_config();
    let brk = BreakSpec::mean_shift(spec.break_at, shift);
    (0..spec.reps)
        .into_par_iter()
        .map(|r| {
            let path: TimeSeries<f64> = gen.sample(&mut rep_rng(spec.seed, r as u64));
            let path = if shift != 0.0 { apply_break(&path, &brk)? } else { path };
            Ok(dsw_test(&path, &config).ok().map(|res| res.statistic))
        })
        .collect()
}

/// Rejection rates under the null at each nominal level.
pub fn size_experiment(spec: &ExperimentSpec, cache: Option<&CritvalCache>) -> Result<ExperimentReport> {
    let started = Instant::now();
    spec.validate()?;
    let cv = critical_values(&spec.critval_request(), cache)?;
    let gen = ArfimaGenerator::new(&spec.generator, spec.t_len)?;
    let stats = statistics(spec, &gen, 0.0)?;
    let failures = stats.iter().filter(|s| s.is_none()).count();
    Ok(ExperimentReport {
        rows: rows_for(spec, &cv, None, &stats),
        critical_values: cv,
        metadata: metadata(spec, failures, started),
        spec: spec.clone(),
    })
}

/// Rejection rates for mean shifts of size `k·T^{d−1/2}` over the k grid.
pub fn power_experiment(spec: &ExperimentSpec, cache: Option<&CritvalCache>) -> Result<ExperimentReport> {
    let started = Instant::now();
    spec.validate()?;
    if spec.k_grid.is_empty() {
        return Err(Error::InvalidInput("power experiment needs a nonempty k grid".into()));
    }
    let cv = critical_values(&spec.critval_request(), cache)?;
    let gen = ArfimaGenerator::new(&spec.generator, spec.t_len)?;
    let mut rows = Vec::new();
    let mut failures = 0;
    for &k in &spec.k_grid {
        let shift = BreakSpec::local_mean_shift(spec.break_at, k as f64, spec.t_len, spec.generator.d).magnitude;
        let stats = statistics(spec, &gen, shift)?;
        failures += stats.iter().filter(|s| s.is_none()).count();
        rows.extend(rows_for(spec, &cv, Some(k), &stats));
    }
    Ok(ExperimentReport {
        rows,
        critical_values: cv,
        metadata: metadata(spec, failures, started),
        spec: spec.clone(),
    })
}
