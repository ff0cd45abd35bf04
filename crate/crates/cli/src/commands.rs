use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::{Datelike, Days, NaiveDate, Weekday};
use serde::Serialize;

use lmdsw::breakpoint::cusum_break;
use lmdsw::dsw::{dsw_test, limit_distribution_quantiles, simulate_critical_values, DswConfig, MStep};
use lmdsw::ingest::{apply_input, parse_date, window_bounds, ApplicationRow, PriceSeriesInput};
use lmdsw::lrv::mac_variance_of;
use lmdsw::mc_harness::{power_experiment, size_experiment, CritvalCache, ExperimentReport, ExperimentSpec, ReportRow};
use lmdsw::memory_est::{bandwidth_for, local_whittle_of};
use lmdsw::memory_transfer::{empirical_transfer, LossMemory, TransferCase};
use lmdsw::sim::{apply_break, gen_arfima, ArfimaSpec, BreakSpec};
use lmdsw::spectral::periodogram;
use lmdsw::{Series, TimeSeries};

use crate::args::*;
use crate::output::{emit_record, emit_rows, sink, write_csv_rows, Meta};
use crate::CliError;

pub fn run(cli: &Cli, file: FileConfig) -> Result<(), CliError> {
    let common = &cli.common;
    let seed = common.seed.or(file.seed);
    let out = common.out.as_deref();
    match &cli.command {
        Command::Simulate(a) => simulate(a, &file, seed.unwrap_or(0), out, common.format),
        Command::Periodogram(a) => periodogram_cmd(a, out, common.format),
        Command::EstimateD(a) => estimate_d(a, out, common.format),
        Command::Breakpoint(a) => breakpoint(a, out, common.format),
        Command::Test(a) => test(a, &file, out, common.format),
        Command::Critvals(a) => critvals(a, &file, seed.unwrap_or(0), out, common.format),
        Command::Transfer(a) => transfer(a, seed.unwrap_or(0), out, common.format),
        Command::McSize(a) => monte_carlo(a, &file, seed, false, out, common.format),
        Command::McPower(a) => monte_carlo(a, &file, seed, true, out, common.format),
        Command::Apply(a) => apply(a, &file, seed, out, common.format),
    }
}

/// Reads a `value` (or `price`) column and an optional `date` column.
pub fn read_series(path: &Path) -> Result<Series, CliError> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    let headers = rdr.headers()?.clone();
    let find = |n: &str| headers.iter().position(|h| h.eq_ignore_ascii_case(n));
    let vc = find("value")
        .or_else(|| find("price"))
        .unwrap_or(headers.len().saturating_sub(1));
    let dc = find("date");
    let mut values = Vec::new();
    let mut dates = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let field = rec.get(vc).unwrap_or("");
        let v: f64 = field
            .parse()
            .map_err(|_| CliError::Input(format!("{}:{line}: bad value '{field}'", path.display())))?;
        values.push(v);
        if let Some(dc) = dc {
            dates.push(parse_date(rec.get(dc).unwrap_or("")).map_err(|e| {
                CliError::Input(format!("{}:{line}: {e}", path.display()))
            })?);
        }
    }
    Ok(if dc.is_some() {
        TimeSeries::with_dates(values, dates)?
    } else {
        TimeSeries::new(values)?
    })
}

fn weekdays_from(start: NaiveDate, n: usize) -> Vec<NaiveDate> {
    let mut out = Vec::with_capacity(n);
    let mut d = start;
    while out.len() < n {
        if !matches!(d.weekday(), Weekday::Sat | Weekday::Sun) {
            out.push(d);
        }
        d = d + Days::new(1);
    }
    out
}

#[derive(Serialize)]
struct ValueRow {
    #[serde(skip_serializing_if = "Option::is_none")]
    date: Option<NaiveDate>,
    value: f64,
}

fn simulate(a: &SimulateArgs, file: &FileConfig, seed: u64, out: Option<&Path>, fmt: Format) -> Result<(), CliError> {
    let spec = a.generator.apply(file.generator.clone())?;
    let mut series: Series = gen_arfima(&spec, a.length, seed)?;
    let brk = match a.break_at {
        Some(at) => {
            let magnitude = match (a.local_k, a.break_magnitude) {
                (Some(k), _) => BreakSpec::local_mean_shift(at, k, a.length, spec.d).magnitude,
                (None, Some(m)) => m,
                (None, None) => return Err(CliError::Input("--break-at needs --break-magnitude or --local-k".into())),
            };
            let brk = BreakSpec {
                kind: a.break_kind(),
                at,
                magnitude,
            };
            series = apply_break(&series, &brk)?;
            Some(brk)
        }
        None => None,
    };
    let dates = a.start_date.map(|s| weekdays_from(s, a.length));
    let rows: Vec<ValueRow> = series
        .values()
        .iter()
        .enumerate()
        .map(|(i, &value)| ValueRow {
            date: dates.as_ref().map(|d| d[i]),
            value,
        })
        .collect();
    let settings = serde_json::json!({"generator": spec, "length": a.length, "break": brk, "start_date": a.start_date});
    emit_rows(out, fmt, &Meta::new("simulate", Some(seed), &settings), &rows)
}

#[derive(Serialize)]
struct SpectrumRow {
    j: usize,
    frequency: f64,
    ordinate: f64,
}

fn periodogram_cmd(a: &InputArgs, out: Option<&Path>, fmt: Format) -> Result<(), CliError> {
    let series = read_series(&a.input)?;
    let pg = periodogram(&series)?;
    let rows: Vec<SpectrumRow> = pg
        .frequencies
        .iter()
        .zip(&pg.ordinates)
        .enumerate()
        .map(|(i, (&frequency, &ordinate))| SpectrumRow {
            j: i + 1,
            frequency,
            ordinate,
        })
        .collect();
    let settings = serde_json::json!({"input": a.input, "n": pg.n});
    emit_rows(out, fmt, &Meta::new("periodogram", None, &settings), &rows)
}

#[derive(Serialize)]
struct EstimateRow {
    n: usize,
    d_hat: f64,
    bandwidth: usize,
    objective: f64,
    at_boundary: bool,
}

fn estimate_d(a: &EstimateArgs, out: Option<&Path>, fmt: Format) -> Result<(), CliError> {
    let series = read_series(&a.input.input)?;
    if !(a.bandwidth_exp > 0.0 && a.bandwidth_exp < 1.0) {
        return Err(CliError::Input(format!("bandwidth exponent {} outside (0, 1)", a.bandwidth_exp)));
    }
    let w = bandwidth_for(series.len(), a.bandwidth_exp);
    let est = local_whittle_of(series.values(), Some(w))?;
    let row = EstimateRow {
        n: series.len(),
        d_hat: est.d_hat,
        bandwidth: est.bandwidth,
        objective: est.objective_value,
        at_boundary: est.at_boundary,
    };
    let settings = serde_json::json!({"input": a.input.input, "bandwidth_exp": a.bandwidth_exp});
    emit_record(out, fmt, &Meta::new("estimate-d", None, &settings), &row, &row)
}

#[derive(Serialize)]
struct BreakRow {
    /// Size of the first segment.
    split: usize,
    /// 1-based index of the first observation after the break.
    break_at: usize,
    break_date: Option<NaiveDate>,
    statistic: f64,
    d_used: f64,
    lrv: f64,
}

fn breakpoint(a: &BreakpointArgs, out: Option<&Path>, fmt: Format) -> Result<(), CliError> {
    let series = read_series(&a.input.input)?;
    let d = match a.d {
        Some(d) => d,
        None => local_whittle_of(series.values(), None)?.d_hat,
    };
    let lrv = mac_variance_of(series.values(), d, None)?;
    let est = cusum_break(&series, lrv.d_used, lrv.value, a.trim)?;
    let row = BreakRow {
        split: est.index,
        break_at: est.index + 1,
        break_date: series.date_at(est.index),
        statistic: est.statistic,
        d_used: est.d_used,
        lrv: lrv.value,
    };
    let settings = serde_json::json!({"input": a.input.input, "d": a.d, "trim": a.trim});
    emit_record(out, fmt, &Meta::new("breakpoint", None, &settings), &row, &row)
}

#[derive(Serialize)]
struct TestRow {
    statistic: f64,
    m_star: usize,
    m0: usize,
    m1: usize,
    break_index: usize,
    break_date: Option<NaiveDate>,
    d_hat_loss: f64,
    lrv: f64,
    variance: String,
    m_stride: usize,
}

fn dsw_config(args: &DswArgs, file: &FileConfig) -> DswConfig {
    args.apply(file.dsw.clone())
}

fn test(a: &TestArgs, file: &FileConfig, out: Option<&Path>, fmt: Format) -> Result<(), CliError> {
    let series = read_series(&a.input.input)?;
    let mut config = dsw_config(&a.dsw, file);
    if let (Some(start), Some(end)) = (a.window_start, a.window_end) {
        let dates = series
            .dates()
            .ok_or_else(|| CliError::Input("a date window needs a dated input".into()))?;
        config.m_range = Some(window_bounds(dates, start, end)?);
    }
    let (m0, m1) = config.m_bounds(series.len())?;
    let res = dsw_test(&series, &config)?;
    let meta = Meta::new("test", None, &serde_json::json!({"input": a.input.input, "config": config}));
    if let Some(path) = &a.trace {
        let mut w = sink(Some(path))?;
        let trace: Vec<MStep<f64>> = res.per_m_trace.clone();
        write_csv_rows(&mut *w, &meta, &trace)?;
        w.flush()?;
    }
    let row = TestRow {
        statistic: res.statistic,
        m_star: res.m_star,
        m0,
        m1,
        break_index: res.break_index,
        break_date: res.break_date,
        d_hat_loss: res.d_hat_loss,
        lrv: res.lrv,
        variance: format!("{:?}", res.variance).to_lowercase(),
        m_stride: res.m_stride,
    };
    emit_record(out, fmt, &meta, &row, &res)
}

#[derive(Serialize)]
struct QuantileRow {
    prob: f64,
    value: f64,
}

fn critvals(a: &CritvalArgs, file: &FileConfig, seed: u64, out: Option<&Path>, fmt: Format) -> Result<(), CliError> {
    let spec = a.generator.apply(file.generator.clone())?;
    let config = dsw_config(&a.dsw, file);
    let (values, settings) = match a.limit_grid {
        Some(grid) => (
            limit_distribution_quantiles(spec.d, config.mu_bar, config.epsilon, grid, a.reps, &a.quantiles, seed)?,
            serde_json::json!({"limit": true, "d": spec.d, "mu_bar": config.mu_bar,
                "epsilon": config.epsilon, "grid": grid, "reps": a.reps, "probs": a.quantiles}),
        ),
        None => {
            let cv = simulate_critical_values(&spec, &config, a.length, a.reps, &a.quantiles, seed)?;
            if cv.failures > 0 {
                log::warn!("{} of {} repetitions failed and were excluded", cv.failures, cv.reps);
            }
            (
                cv.values,
                serde_json::json!({"generator": spec, "config": config, "length": a.length,
                    "reps": a.reps, "probs": a.quantiles}),
            )
        }
    };
    let rows: Vec<QuantileRow> = a
        .quantiles
        .iter()
        .zip(values)
        .map(|(&prob, value)| QuantileRow { prob, value })
        .collect();
    emit_rows(out, fmt, &Meta::new("critvals", Some(seed), &settings), &rows)
}

#[derive(Serialize)]
struct TransferRow {
    case: String,
    d_y: f64,
    d_yhat: f64,
    biased: bool,
    d_x: Option<f64>,
    kappa_equal: Option<bool>,
    predicted: String,
    mean_d_hat: f64,
    sd_d_hat: f64,
    deviation_sd: Option<f64>,
}

fn describe(case: &TransferCase) -> String {
    let bias = if case.biased { "biased" } else { "unbiased" };
    match &case.fci {
        None => format!("no-fci {bias}"),
        Some(c) => format!("fci {bias} kappa-{}", if c.kappa_equal { "equal" } else { "distinct" }),
    }
}

fn standard_cases() -> Vec<TransferCase> {
    vec![
        TransferCase::independent(0.4, 0.1, true),
        TransferCase::independent(0.45, 0.45, false),
        TransferCase::independent(0.1, 0.1, false),
        TransferCase::cointegrated(0.4, false, 0.1, 0.0, true),
        TransferCase::cointegrated(0.45, false, 0.1, 0.0, false),
        TransferCase::cointegrated(0.4, true, 0.1, 0.0, true),
    ]
}

fn transfer(a: &TransferArgs, seed: u64, out: Option<&Path>, fmt: Format) -> Result<(), CliError> {
    let cases = match (a.d_x, a.d_y) {
        (Some(d_x), _) => vec![TransferCase::cointegrated(d_x, a.kappa_equal, a.d_eps_y, a.d_eps_yhat, !a.unbiased)],
        (None, Some(d_y)) => vec![TransferCase::independent(d_y, a.d_yhat.unwrap_or(d_y), !a.unbiased)],
        (None, None) => standard_cases(),
    };
    let mut rows = Vec::with_capacity(cases.len());
    for case in &cases {
        let s = empirical_transfer(case, a.length, a.reps, seed)?;
        rows.push(TransferRow {
            case: describe(case),
            d_y: case.d_y,
            d_yhat: case.d_yhat,
            biased: case.biased,
            d_x: case.fci.map(|c| c.d_x),
            kappa_equal: case.fci.map(|c| c.kappa_equal),
            predicted: match s.predicted {
                LossMemory::Exact { d } => format!("{d:.4}"),
                LossMemory::Interval { lo, hi } => format!("[{lo:.4}, {hi:.4})"),
            },
            mean_d_hat: s.mean_d_hat,
            sd_d_hat: s.sd_d_hat,
            deviation_sd: s.deviation_in_sd(),
        });
    }
    let settings = serde_json::json!({"cases": cases, "length": a.length, "reps": a.reps});
    emit_rows(out, fmt, &Meta::new("transfer", Some(seed), &settings), &rows)
}

#[derive(Serialize)]
struct CellSummary<'a> {
    spec: &'a ExperimentSpec,
    critical_values: &'a lmdsw::dsw::CriticalValues,
    metadata: &'a lmdsw::mc_harness::ReportMetadata,
}

#[derive(Serialize)]
struct McOutput<'a> {
    rows: &'a [ReportRow],
    cells: Vec<CellSummary<'a>>,
}

fn experiment_cells(a: &McArgs, file: &FileConfig, seed: Option<u64>) -> Result<Vec<ExperimentSpec>, CliError> {
    let mut base = file.experiment.clone().unwrap_or_default();
    if a.full_scale {
        base = ExperimentSpec::full_scale(base.generator, base.variant);
    }
    if let Some(s) = seed {
        base.seed = s;
    }
    if let Some(t) = a.length {
        base.t_len = t;
    }
    if let Some(r) = a.reps {
        base.reps = r;
    }
    if let Some(r) = a.critval_reps {
        base.critval_reps = r;
    }
    if let Some(k) = &a.k_grid {
        base.k_grid = k.clone();
    }
    if let Some(b) = a.break_at {
        base.break_at = b;
    }
    if let Some(l) = &a.levels {
        base.levels = l.clone();
    }
    let dsw_base = file.dsw.clone().unwrap_or_else(|| base.config.clone());
    base.config = a.dsw.apply(Some(dsw_base));

    let ds = a.d.clone().unwrap_or_else(|| vec![base.generator.d]);
    let phis = a
        .phi
        .clone()
        .unwrap_or_else(|| vec![base.generator.ar.first().copied().unwrap_or(0.0)]);
    let variants: Vec<_> = match &a.variant {
        Some(v) => v.iter().map(|&v| v.into()).collect(),
        None => vec![base.variant],
    };
    let mut cells = Vec::new();
    for &variant in &variants {
        for &d in &ds {
            for &phi in &phis {
                let generator = if phi == 0.0 {
                    ArfimaSpec { d, ar: vec![], ..base.generator.clone() }
                } else {
                    ArfimaSpec { d, ar: vec![phi], ..base.generator.clone() }
                };
                generator.validate()?;
                cells.push(ExperimentSpec {
                    generator,
                    variant,
                    ..base.clone()
                });
            }
        }
    }
    Ok(cells)
}

fn write_gnuplot(path: &Path, reports: &[ExperimentReport]) -> Result<(), CliError> {
    let mut w = sink(Some(path))?;
    for r in reports {
        for &level in &r.spec.levels {
            writeln!(
                w,
                "# {} d={} phi={} level={}",
                r.spec.variant.label(),
                r.spec.generator.d,
                r.spec.phi(),
                level
            )?;
            writeln!(w, "# k rate mc_se")?;
            for row in r.rows.iter().filter(|row| (row.level - level).abs() < 1e-12) {
                writeln!(w, "{} {} {}", row.k.unwrap_or(0), row.rejection_rate, row.mc_se)?;
            }
            writeln!(w, "\n")?;
        }
    }
    w.flush()?;
    Ok(())
}

fn monte_carlo(
    a: &McArgs,
    file: &FileConfig,
    seed: Option<u64>,
    power: bool,
    out: Option<&Path>,
    fmt: Format,
) -> Result<(), CliError> {
    let cells = experiment_cells(a, file, seed)?;
    let cache = (!a.no_cache).then(|| CritvalCache::new(&a.cache_dir));
    let mut reports = Vec::with_capacity(cells.len());
    for spec in &cells {
        log::info!(
            "{} cell: {} d={} phi={}",
            if power { "power" } else { "size" },
            spec.variant.label(),
            spec.generator.d,
            spec.phi()
        );
        let r = if power {
            power_experiment(spec, cache.as_ref())?
        } else {
            size_experiment(spec, cache.as_ref())?
        };
        reports.push(r);
    }
    let rows: Vec<ReportRow> = reports.iter().flat_map(|r| r.rows.iter().cloned()).collect();
    let summaries: Vec<CellSummary> = reports
        .iter()
        .map(|r| CellSummary {
            spec: &r.spec,
            critical_values: &r.critical_values,
            metadata: &r.metadata,
        })
        .collect();
    let command = if power { "mc-power" } else { "mc-size" };
    let meta = Meta::new(command, cells.first().map(|c| c.seed), &cells);
    match fmt {
        Format::Csv => {
            emit_rows(out, fmt, &meta, &rows)?;
            let meta_path: Option<PathBuf> = a
                .meta_out
                .clone()
                .or_else(|| out.map(|o| PathBuf::from(format!("{}.meta.json", o.display()))));
            if let Some(p) = meta_path {
                let mut w = sink(Some(&p))?;
                serde_json::to_writer_pretty(&mut w, &serde_json::json!({"metadata": meta, "cells": summaries}))?;
                writeln!(w)?;
                w.flush()?;
            }
        }
        Format::Json => {
            let body = McOutput {
                rows: &rows,
                cells: summaries,
            };
            crate::output::emit_record(out, fmt, &meta, &(), &body)?;
        }
    }
    if let Some(p) = &a.gnuplot {
        write_gnuplot(p, &reports)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct ApplyRow {
    name: String,
    cv90: f64,
    cv95: f64,
    cv99: f64,
    statistic: f64,
    break_date: String,
    break_index: usize,
    m_star: usize,
    d_hat_loss: f64,
    generator_d: f64,
    generator_phi: f64,
    critval_reps: usize,
    critval_seed: u64,
}

impl From<&ApplicationRow> for ApplyRow {
    fn from(r: &ApplicationRow) -> Self {
        let break_date = match (r.significant(), r.break_date) {
            (false, _) => "-".to_string(),
            (true, Some(d)) => d.to_string(),
            (true, None) => r.break_index.to_string(),
        };
        Self {
            name: r.name.clone(),
            cv90: r.critical_values[0],
            cv95: r.critical_values[1],
            cv99: r.critical_values[2],
            statistic: r.statistic,
            break_date,
            break_index: r.break_index,
            m_star: r.m_star,
            d_hat_loss: r.d_hat_loss,
            generator_d: r.generator.d,
            generator_phi: r.generator.ar.first().copied().unwrap_or(0.0),
            critval_reps: r.critval_reps,
            critval_seed: r.critval_seed,
        }
    }
}

fn apply(a: &ApplyArgs, file: &FileConfig, seed: Option<u64>, out: Option<&Path>, fmt: Format) -> Result<(), CliError> {
    let mut inputs: Vec<PriceSeriesInput> = file.series.clone();
    inputs.extend(a.input());
    if inputs.is_empty() {
        return Err(CliError::Input("no series given (use --input or [[series]] in the config)".into()));
    }
    let config = dsw_config(&a.dsw, file);
    let mut critvals = file.critvals.clone().unwrap_or_default();
    if let Some(r) = a.critval_reps {
        critvals.reps = r;
    }
    if let Some(s) = seed {
        critvals.seed = s;
    }
    let mut rows = Vec::with_capacity(inputs.len());
    for input in &inputs {
        let row = apply_input(input, &config, &critvals).map_err(|e| {
            let e = CliError::from(e);
            match e {
                CliError::Input(m) => CliError::Input(format!("{}: {m}", input.name)),
                CliError::Numerical(m) => CliError::Numerical(format!("{}: {m}", input.name)),
            }
        })?;
        eprintln!("{} \\\\", row.render());
        rows.push(row);
    }
    let settings = serde_json::json!({"series": inputs, "config": config, "critvals": critvals});
    let meta = Meta::new("apply", Some(critvals.seed), &settings);
    match fmt {
        Format::Csv => {
            let flat: Vec<ApplyRow> = rows.iter().map(ApplyRow::from).collect();
            emit_rows(out, fmt, &meta, &flat)
        }
        Format::Json => emit_rows(out, fmt, &meta, &rows),
    }
}
