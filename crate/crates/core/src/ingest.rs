//! Loading price series from CSV, deflating them, and running the test on
//! a date-bounded window of in-sample sizes.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::{Path, PathBuf};

use chrono::{Datelike, NaiveDate, Weekday};
use serde::{Deserialize, Serialize};

use crate::dsw::{dsw_test, simulate_critical_values, CriticalValues, DswConfig};
use crate::error::{Error, Result};
use crate::memory_est::local_whittle_of;
use crate::scalar::mean;
use crate::series::TimeSeries;
use crate::sim::{frac_diff, ArfimaSpec};

const DATE_FORMATS: [&str; 4] = ["%Y-%m-%d", "%m/%d/%Y", "%d.%m.%Y", "%Y%m%d"];
/// Bounds on the memory and AR parameters of the critical-value generator.
const D_MAX: f64 = 0.49;
const PHI_MAX: f64 = 0.95;

pub fn parse_date(s: &str) -> Result<NaiveDate> {
    let s = s.trim();
    DATE_FORMATS
        .iter()
        .find_map(|f| NaiveDate::parse_from_str(s, f).ok())
        .ok_or_else(|| Error::InvalidInput(format!("unrecognised date '{s}'")))
}

fn is_missing(s: &str) -> bool {
    matches!(s.trim().to_ascii_lowercase().as_str(), "" | "na" | "nan" | "null" | "-" | ".")
}

/// Columns `(date, value)` of a CSV with a header row. Named columns
/// `date`/`price` (or `period`/`index`) are used when present, otherwise
/// the first two columns.
fn column_positions(headers: &csv::StringRecord, names: [&str; 2]) -> Result<(usize, usize)> {
    if headers.len() < 2 {
        return Err(Error::InvalidInput("expected at least two columns".into()));
    }
    let find = |n: &str| headers.iter().position(|h| h.trim().eq_ignore_ascii_case(n));
    Ok((find(names[0]).unwrap_or(0), find(names[1]).unwrap_or(1)))
}

/// Dated observations; rows with a missing value are dropped and counted.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceTable {
    pub dates: Vec<NaiveDate>,
    pub prices: Vec<f64>,
    pub dropped: usize,
}

pub fn read_prices<R: Read>(reader: R) -> Result<PriceTable> {
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(reader);
    let (dc, pc) = column_positions(rdr.headers()?, ["date", "price"])?;
    let mut dates = Vec::new();
    let mut prices = Vec::new();
    let mut dropped = 0;
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let date_field = rec.get(dc).unwrap_or("");
        let price_field = rec.get(pc).unwrap_or("");
        if is_missing(price_field) {
            dropped += 1;
            continue;
        }
        let date = parse_date(date_field).map_err(|e| Error::InvalidInput(format!("line {line}: {e}")))?;
        let price: f64 = price_field
            .parse()
            .map_err(|_| Error::InvalidInput(format!("line {line}: bad price '{price_field}'")))?;
        if !price.is_finite() {
            return Err(Error::InvalidInput(format!("line {line}: non-finite price")));
        }
        if let Some(&prev) = dates.last() {
            if date <= prev {
                return Err(Error::InvalidInput(format!(
                    "line {line}: date {date} does not follow {prev}"
                )));
            }
        }
        dates.push(date);
        prices.push(price);
    }
    if dropped > 0 {
        log::info!("dropped {dropped} rows with missing prices");
    }
    Ok(PriceTable { dates, prices, dropped })
}

/// A calendar month or year labelling a deflator value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Period {
    Year(i32),
    Month(i32, u32),
}

impl Period {
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::InvalidInput(format!("unrecognised period '{s}'"));
        if let Ok(d) = parse_date(s) {
            return Ok(Period::Month(d.year(), d.month()));
        }
        let parts: Vec<&str> = s.split(['-', '/', 'M', 'm']).filter(|p| !p.is_empty()).collect();
        match parts.as_slice() {
            [y] => Ok(Period::Year(y.parse().map_err(|_| bad())?)),
            [y, m] => {
                let year: i32 = y.parse().map_err(|_| bad())?;
                let month: u32 = m.parse().map_err(|_| bad())?;
                if !(1..=12).contains(&month) {
                    return Err(bad());
                }
                Ok(Period::Month(year, month))
            }
            _ => Err(bad()),
        }
    }

    pub fn contains(&self, date: NaiveDate) -> bool {
        match *self {
            Period::Year(y) => date.year() == y,
            Period::Month(y, m) => date.year() == y && date.month() == m,
        }
    }
}

/// Price index keyed by period. Either all monthly or all annual.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceIndex {
    values: BTreeMap<Period, f64>,
}

impl PriceIndex {
    pub fn new(entries: impl IntoIterator<Item = (Period, f64)>) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (p, v) in entries {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidInput(format!("non-positive index value {v} for {p:?}")));
            }
            if values.insert(p, v).is_some() {
                return Err(Error::InvalidInput(format!("duplicate index period {p:?}")));
            }
        }
        let monthly = values.keys().filter(|p| matches!(p, Period::Month(..))).count();
        if values.is_empty() || (monthly != 0 && monthly != values.len()) {
            return Err(Error::InvalidInput("index must be nonempty and either all monthly or all annual".into()));
        }
        Ok(Self { values })
    }

    pub fn first_period(&self) -> Period {
        *self.values.keys().next().expect("nonempty")
    }

    /// Step interpolation: every day takes the value of its month (or year).
    pub fn value_on(&self, date: NaiveDate) -> Option<f64> {
        let key = match self.first_period() {
            Period::Month(..) => Period::Month(date.year(), date.month()),
            Period::Year(_) => Period::Year(date.year()),
        };
        self.values.get(&key).copied()
    }

    /// Value of the base period; a year base on a monthly index is the mean
    /// of that year's months.
    pub fn base_value(&self, base: Period) -> Result<f64> {
        let hits: Vec<f64> = self
            .values
            .iter()
            .filter(|(p, _)| match (base, **p) {
                (Period::Year(y), Period::Month(py, _)) => y == py,
                (b, p) => b == p,
            })
            .map(|(_, &v)| v)
            .collect();
        if hits.is_empty() {
            return Err(Error::InvalidInput(format!("base period {base:?} not covered by the index")));
        }
        Ok(hits.iter().sum::<f64>() / hits.len() as f64)
    }
}

pub fn read_index<R: Read>(reader: R) -> Result<PriceIndex> {
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(reader);
    let (pc, vc) = column_positions(rdr.headers()?, ["period", "index"])?;
    let mut entries = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let period = Period::parse(rec.get(pc).unwrap_or("")).map_err(|e| Error::InvalidInput(format!("line {line}: {e}")))?;
        let field = rec.get(vc).unwrap_or("");
        let v: f64 = field
            .parse()
            .map_err(|_| Error::InvalidInput(format!("line {line}: bad index value '{field}'")))?;
        entries.push((period, v));
    }
    PriceIndex::new(entries)
}

/// Divides each price by the index rebased to 1 in `base` (default: the
/// first period of the index). Observations outside the index coverage are
/// dropped; no overlap at all is an error.
pub fn deflate(table: &PriceTable, index: &PriceIndex, base: Option<Period>) -> Result<PriceTable> {
    let base_value = index.base_value(base.unwrap_or_else(|| index.first_period()))?;
    let mut out = PriceTable {
        dates: Vec::with_capacity(table.dates.len()),
        prices: Vec::with_capacity(table.prices.len()),
        dropped: table.dropped,
    };
    let mut uncovered = 0;
    for (&d, &p) in table.dates.iter().zip(&table.prices) {
        match index.value_on(d) {
            Some(v) => {
                out.dates.push(d);
                out.prices.push(p / (v / base_value));
            }
            None => uncovered += 1,
        }
    }
    if out.dates.is_empty() {
        return Err(Error::InvalidInput("price dates and deflator periods do not overlap".into()));
    }
    if uncovered > 0 {
        log::warn!("dropped {uncovered} observations outside the deflator coverage");
    }
    Ok(out)
}

/// Inverse of [`deflate`] on the dates it kept.
pub fn reinflate(table: &PriceTable, index: &PriceIndex, base: Option<Period>) -> Result<PriceTable> {
    let base_value = index.base_value(base.unwrap_or_else(|| index.first_period()))?;
    let prices = table
        .dates
        .iter()
        .zip(&table.prices)
        .map(|(&d, &p)| {
            index
                .value_on(d)
                .map(|v| p * (v / base_value))
                .ok_or_else(|| Error::InvalidInput(format!("no index value for {d}")))
        })
        .collect::<Result<_>>()?;
    Ok(PriceTable {
        dates: table.dates.clone(),
        prices,
        dropped: table.dropped,
    })
}

pub fn drop_weekends(table: &PriceTable) -> PriceTable {
    let (dates, prices) = table
        .dates
        .iter()
        .zip(&table.prices)
        .filter(|(d, _)| !matches!(d.weekday(), Weekday::Sat | Weekday::Sun))
        .map(|(&d, &p)| (d, p))
        .unzip();
    PriceTable {
        dates,
        prices,
        dropped: table.dropped,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceSeriesInput {
    pub name: String,
    pub path: PathBuf,
    #[serde(default)]
    pub deflator: Option<PathBuf>,
    /// Period label such as `2015` or `2015-01`.
    #[serde(default)]
    pub base_period: Option<String>,
    /// Smallest and largest in-sample end dates.
    #[serde(default)]
    pub window: Option<(NaiveDate, NaiveDate)>,
    #[serde(default)]
    pub drop_weekends: bool,
}

impl PriceSeriesInput {
    pub fn new(name: impl Into<String>, path: impl Into<PathBuf>) -> Self {
        Self {
            name: name.into(),
            path: path.into(),
            deflator: None,
            base_period: None,
            window: None,
            drop_weekends: false,
        }
    }
}

fn open(path: &Path) -> Result<std::fs::File> {
    std::fs::File::open(path).map_err(|e| Error::InvalidInput(format!("cannot open {}: {e}", path.display())))
}

pub fn load_and_deflate(input: &PriceSeriesInput) -> Result<TimeSeries<f64>> {
    let mut table = read_prices(open(&input.path)?)?;
    if input.drop_weekends {
        table = drop_weekends(&table);
    }
    if let Some(path) = &input.deflator {
        let index = read_index(open(path)?)?;
        let base = input.base_period.as_deref().map(Period::parse).transpose()?;
        table = deflate(&table, &index, base)?;
    }
    TimeSeries::with_dates(table.prices, table.dates)
}

/// Number of observations dated on or before `date`, i.e. the in-sample
/// size whose last observation is the latest one not after `date`.
pub fn in_sample_size(dates: &[NaiveDate], date: NaiveDate) -> Result<usize> {
    let m = dates.partition_point(|&d| d <= date);
    if m == 0 {
        return Err(Error::InvalidInput(format!("window date {date} precedes the first observation")));
    }
    if m == dates.len() {
        return Err(Error::InvalidInput(format!(
            "window date {date} leaves no out-of-sample observations"
        )));
    }
    Ok(m)
}

/// `(m0, m1)` for in-sample periods ending between `start` and `end`.
pub fn window_bounds(dates: &[NaiveDate], start: NaiveDate, end: NaiveDate) -> Result<(usize, usize)> {
    if end < start {
        return Err(Error::InvalidInput(format!("window end {end} precedes start {start}")));
    }
    Ok((in_sample_size(dates, start)?, in_sample_size(dates, end)?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CritvalSettings {
    pub reps: usize,
    pub seed: u64,
}

impl Default for CritvalSettings {
    fn default() -> Self {
        Self { reps: 5000, seed: 0 }
    }
}

pub const REPORT_PROBS: [f64; 3] = [0.90, 0.95, 0.99];

/// Generator for a series' critical values: local Whittle `d̂` on the full
/// series and the least-squares AR(1) coefficient of the fractionally
/// differenced, demeaned series.
pub fn fitted_generator(values: &[f64]) -> Result<ArfimaSpec> {
    let d = local_whittle_of(values, None)?.d_hat.clamp(0.0, D_MAX);
    let mu = mean(values);
    let centred: Vec<f64> = values.iter().map(|v| v - mu).collect();
    let u = frac_diff(&centred, d);
    let (num, den) = u
        .windows(2)
        .fold((0.0, 0.0), |(n, dd), w| (n + w[0] * w[1], dd + w[0] * w[0]));
    let phi = if den > 0.0 { (num / den).clamp(-PHI_MAX, PHI_MAX) } else { 0.0 };
    ArfimaSpec::ar1(d, phi)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApplicationRow {
    pub name: String,
    pub critical_values: [f64; 3],
    pub statistic: f64,
    pub break_index: usize,
    pub break_date: Option<NaiveDate>,
    pub m_star: usize,
    pub d_hat_loss: f64,
    pub generator: ArfimaSpec,
    pub critval_reps: usize,
    pub critval_seed: u64,
}

impl ApplicationRow {
    /// Whether the statistic exceeds the 90% critical value.
    pub fn significant(&self) -> bool {
        self.statistic > self.critical_values[0]
    }

    /// `name & cv90 & cv95 & cv99 & statistic & mm/dd/yyyy`, with `-` in
    /// place of the date when the statistic is not significant at 10%.
    pub fn render(&self) -> String {
        let date = match (self.significant(), self.break_date) {
            (true, Some(d)) => d.format("%m/%d/%Y").to_string(),
            (true, None) => format!("t={}", self.break_index),
            (false, _) => "-".to_string(),
        };
        format!(
            "{} & {:.3} & {:.3} & {:.3} & {:.3} & {}",
            self.name, self.critical_values[0], self.critical_values[1], self.critical_values[2], self.statistic, date
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApplicationReport {
    pub rows: Vec<ApplicationRow>,
}

impl ApplicationReport {
    pub fn render(&self) -> String {
        self.rows.iter().map(|r| r.render() + " \\\\\n").collect()
    }
}

/// Runs the test on `series` with `config` and simulates series-specific
/// critical values at the same length and in-sample window.
pub fn apply_test(
    name: &str,
    series: &TimeSeries<f64>,
    config: &DswConfig,
    critvals: &CritvalSettings,
) -> Result<ApplicationRow> {
    let generator = fitted_generator(series.values())?;
    let cv = simulate_critical_values(&generator, config, series.len(), critvals.reps, &REPORT_PROBS, critvals.seed)?;
    apply_with(name, series, config, generator, &cv, critvals)
}

fn apply_with(
    name: &str,
    series: &TimeSeries<f64>,
    config: &DswConfig,
    generator: ArfimaSpec,
    cv: &CriticalValues,
    critvals: &CritvalSettings,
) -> Result<ApplicationRow> {
    let res = dsw_test(series, config)?;
    Ok(ApplicationRow {
        name: name.to_string(),
        critical_values: [cv.values[0], cv.values[1], cv.values[2]],
        statistic: res.statistic,
        break_index: res.break_index,
        break_date: res.break_date,
        m_star: res.m_star,
        d_hat_loss: res.d_hat_loss,
        generator,
        critval_reps: critvals.reps,
        critval_seed: critvals.seed,
    })
}

/// Loads, deflates, maps the date window to `(m0, m1)` and applies the
/// test.
pub fn apply_input(input: &PriceSeriesInput, config: &DswConfig, critvals: &CritvalSettings) -> Result<ApplicationRow> {
    let series = load_and_deflate(input)?;
    let mut config = config.clone();
    if let Some((start, end)) = input.window {
        let dates = series.dates().expect("loaded series carry dates");
        config.m_range = Some(window_bounds(dates, start, end)?);
    }
    apply_test(&input.name, &series, &config, critvals)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn date(y: i32, m: u32, d: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, d).unwrap()
    }

    #[test]
    fn parses_dates_and_periods() {
        assert_eq!(parse_date("2021-09-22").unwrap(), date(2021, 9, 22));
        assert_eq!(parse_date("09/22/2021").unwrap(), date(2021, 9, 22));
        assert_eq!(parse_date("22.09.2021").unwrap(), date(2021, 9, 22));
        assert!(parse_date("yesterday").is_err());
        assert_eq!(Period::parse("2015-03").unwrap(), Period::Month(2015, 3));
        assert_eq!(Period::parse("2015M03").unwrap(), Period::Month(2015, 3));
        assert_eq!(Period::parse("2015").unwrap(), Period::Year(2015));
        assert!(Period::parse("2015-13").is_err());
    }

    #[test]
    fn reads_prices_dropping_missing() {
        let csv = "date,price\n2021-01-04,10\n2021-01-05,NA\n2021-01-06,12.5\n2021-01-07,\n";
        let t = read_prices(csv.as_bytes()).unwrap();
        assert_eq!(t.prices, vec![10.0, 12.5]);
        assert_eq!(t.dropped, 2);
        let bad = "date,price\n2021-01-05,1\n2021-01-04,2\n";
        assert!(read_prices(bad.as_bytes()).unwrap_err().to_string().contains("line 3"));
    }

    #[test]
    fn named_columns_in_any_order() {
        let csv = "price,region,date\n5,x,2020-02-03\n";
        let t = read_prices(csv.as_bytes()).unwrap();
        assert_eq!(t.dates, vec![date(2020, 2, 3)]);
        assert_eq!(t.prices, vec![5.0]);
    }

    #[test]
    fn deflation_arithmetic() {
        let index = read_index("period,index\n2020-01,100\n2020-02,200\n".as_bytes()).unwrap();
        let table = PriceTable {
            dates: vec![date(2020, 1, 15), date(2020, 2, 3), date(2020, 3, 2)],
            prices: vec![100.0, 100.0, 100.0],
            dropped: 0,
        };
        let out = deflate(&table, &index, None).unwrap();
        assert_eq!(out.prices, vec![100.0, 50.0]);
        assert_eq!(out.dates.len(), 2);
        let back = reinflate(&out, &index, None).unwrap();
        assert_eq!(back.prices, vec![100.0, 100.0]);
    }

    #[test]
    fn flat_index_is_identity_and_base_year_averages() {
        let index = PriceIndex::new([(Period::Month(2020, 1), 7.0), (Period::Month(2020, 2), 7.0)]).unwrap();
        let table = PriceTable {
            dates: vec![date(2020, 1, 1), date(2020, 2, 1)],
            prices: vec![3.0, 4.0],
            dropped: 0,
        };
        assert_eq!(deflate(&table, &index, None).unwrap().prices, table.prices);
        let index = PriceIndex::new([(Period::Month(2020, 1), 1.0), (Period::Month(2020, 2), 3.0)]).unwrap();
        assert_eq!(index.base_value(Period::Year(2020)).unwrap(), 2.0);
        assert!(index.base_value(Period::Year(2019)).is_err());
    }

    #[test]
    fn rejects_bad_index() {
        assert!(PriceIndex::new([(Period::Month(2020, 1), 0.0)]).is_err());
        assert!(PriceIndex::new([(Period::Month(2020, 1), 1.0), (Period::Year(2021), 1.0)]).is_err());
        let index = PriceIndex::new([(Period::Year(1999), 1.0)]).unwrap();
        let table = PriceTable {
            dates: vec![date(2020, 1, 1)],
            prices: vec![1.0],
            dropped: 0,
        };
        assert!(deflate(&table, &index, None).is_err());
    }

    #[test]
    fn weekends_removed() {
        // 2021-01-01 is a Friday.
        let dates: Vec<NaiveDate> = (1..=7).map(|d| date(2021, 1, d)).collect();
        let t = PriceTable {
            prices: (1..=7).map(f64::from).collect(),
            dates,
            dropped: 0,
        };
        let w = drop_weekends(&t);
        assert_eq!(w.prices, vec![1.0, 4.0, 5.0, 6.0, 7.0]);
    }

    #[test]
    fn window_maps_to_last_observation_on_or_before() {
        let dates = vec![date(2018, 1, 1), date(2018, 1, 3), date(2018, 1, 5), date(2018, 1, 8)];
        assert_eq!(in_sample_size(&dates, date(2018, 1, 3)).unwrap(), 2);
        assert_eq!(in_sample_size(&dates, date(2018, 1, 4)).unwrap(), 2);
        assert_eq!(window_bounds(&dates, date(2018, 1, 1), date(2018, 1, 6)).unwrap(), (1, 3));
        let err = in_sample_size(&dates, date(2017, 12, 31)).unwrap_err();
        assert!(err.to_string().contains("2017-12-31"));
        assert!(in_sample_size(&dates, date(2018, 1, 8)).is_err());
        assert!(window_bounds(&dates, date(2018, 1, 5), date(2018, 1, 3)).is_err());
    }

    #[test]
    fn row_rendering() {
        let row = ApplicationRow {
            name: "Germany".into(),
            critical_values: [9.807, 11.828, 16.343],
            statistic: 248.031,
            break_index: 900,
            break_date: Some(date(2021, 9, 22)),
            m_star: 600,
            d_hat_loss: 0.2,
            generator: ArfimaSpec::fwn(0.3).unwrap(),
            critval_reps: 5000,
            critval_seed: 0,
        };
        assert_eq!(row.render(), "Germany & 9.807 & 11.828 & 16.343 & 248.031 & 09/22/2021");
        let quiet = ApplicationRow {
            statistic: 5.0,
            ..row
        };
        assert!(quiet.render().ends_with("& 5.000 & -"));
    }
}
