//! Monte Carlo checks of simulated moments and estimator behaviour.

use chrono::{Days, NaiveDate};
use rayon::prelude::*;

use lmdsw::breakpoint::{cusum_break, fbb_sup_quantile};
use lmdsw::dsw::{dsw_test, limit_distribution_quantiles, limit_functional, simulate_critical_values, DswConfig};
use lmdsw::ingest::{apply_test, CritvalSettings};
use lmdsw::lrv::{hac_variance_of, mac_variance_of};
use lmdsw::memory_est::local_whittle_of;
use lmdsw::scalar::{mean, variance};
use lmdsw::sim::{apply_break, gen_arfima, rep_rng, ArfimaGenerator, ArfimaSpec, BreakSpec, FbmGenerator};
use lmdsw::TimeSeries;

fn draws(spec: &ArfimaSpec, n: usize, reps: usize, seed: u64) -> Vec<Vec<f64>> {
    let gen = ArfimaGenerator::new(spec, n).unwrap();
    (0..reps)
        .into_par_iter()
        .map(|r| gen.sample_raw(&mut rep_rng(seed, r as u64)))
        .collect()
}

fn acf(x: &[f64], lag: usize) -> f64 {
    let m = mean(x);
    let c0: f64 = x.iter().map(|v| (v - m) * (v - m)).sum();
    let ck: f64 = x.windows(lag + 1).map(|w| (w[0] - m) * (w[lag] - m)).sum();
    ck / c0
}

fn average(xs: impl IntoIterator<Item = f64>) -> f64 {
    let v: Vec<f64> = xs.into_iter().collect();
    mean(&v)
}

#[test]
fn white_noise_moments() {
    let n = 10_000;
    let x: TimeSeries<f64> = gen_arfima(&ArfimaSpec::fwn(0.0).unwrap(), n, 11).unwrap();
    let se = 1.0 / (n as f64).sqrt();
    assert!(mean(x.values()).abs() < 4.0 * se);
    assert!((variance(x.values()) - 1.0).abs() < 4.0 * 2f64.sqrt() * se);
    for lag in 1..=5 {
        assert!(acf(x.values(), lag).abs() < 4.0 * se, "lag {lag}");
    }
}

#[test]
fn fractional_noise_first_autocorrelation() {
    let paths = draws(&ArfimaSpec::fwn(0.3).unwrap(), 10_000, 100, 12);
    let r1 = average(paths.iter().map(|p| acf(p, 1)));
    assert!((r1 - 0.3 / 0.7).abs() < 0.05, "{r1}");
}

#[test]
fn local_whittle_recovers_memory() {
    let iid = draws(&ArfimaSpec::fwn(0.0).unwrap(), 2000, 200, 13);
    let d0 = average(iid.iter().map(|p| local_whittle_of(p, None).unwrap().d_hat));
    assert!(d0.abs() < 0.04, "{d0}");

    let fwn = draws(&ArfimaSpec::fwn(0.3).unwrap(), 1000, 200, 14);
    let d3 = average(fwn.iter().map(|p| local_whittle_of(p, None).unwrap().d_hat));
    assert!((d3 - 0.3).abs() < 0.05, "{d3}");

    let arfima = draws(&ArfimaSpec::ar1(0.2, 0.4).unwrap(), 10_000, 100, 15);
    let d2 = average(arfima.iter().map(|p| local_whittle_of(p, None).unwrap().d_hat));
    assert!((d2 - 0.2).abs() < 0.06, "{d2}");
}

#[test]
fn memory_estimates_increase_with_d() {
    let means: Vec<f64> = [0.0, 0.1, 0.2, 0.3, 0.4]
        .iter()
        .map(|&d| {
            let paths = draws(&ArfimaSpec::fwn(d).unwrap(), 1000, 50, 16);
            average(paths.iter().map(|p| local_whittle_of(p, None).unwrap().d_hat))
        })
        .collect();
    assert!(means.windows(2).all(|w| w[1] > w[0]), "{means:?}");
}

#[test]
fn long_run_variance_of_short_memory() {
    let iid = draws(&ArfimaSpec::fwn(0.0).unwrap(), 5000, 200, 17);
    let mac = average(iid.iter().map(|p| mac_variance_of(p, 0.0, None).unwrap().value));
    let hac = average(iid.iter().map(|p| hac_variance_of(p).unwrap().value));
    assert!((mac - 1.0).abs() < 0.1, "{mac}");
    assert!((hac - 1.0).abs() < 0.1, "{hac}");

    let n = 10_000;
    let ar = draws(&ArfimaSpec::ar1(0.0, 0.5).unwrap(), n, 200, 18);
    let hac = average(ar.iter().map(|p| hac_variance_of(p).unwrap().value));
    assert!((hac - 4.0).abs() < 0.5, "{hac}");

    // With w = n^0.8 the band reaches λ ≈ 1, where the AR(1) spectrum has
    // fallen to a third of its value at zero; the estimate tracks the band
    // average of 2πf rather than 2πf(0) = 4.
    let w = (n as f64).powf(0.8) as usize;
    let band = (1..=w)
        .map(|j| {
            let lam = 2.0 * std::f64::consts::PI * j as f64 / n as f64;
            1.0 / (1.25 - lam.cos())
        })
        .sum::<f64>()
        / w as f64;
    let mac = average(ar.iter().map(|p| mac_variance_of(p, 0.0, None).unwrap().value));
    assert!((mac / band - 1.0).abs() < 0.05, "{mac} vs {band}");
    let narrow = average(ar.iter().map(|p| mac_variance_of(p, 0.0, Some(100)).unwrap().value));
    assert!((narrow - 4.0).abs() < 0.5, "{narrow}");
}

#[test]
fn fbm_variance_and_self_similarity() {
    let bm = FbmGenerator::new(0.0, 1000).unwrap();
    let ends: Vec<f64> = (0..2000).map(|r| bm.sample(&mut rep_rng(19, r))[1000]).collect();
    let v = ends.iter().map(|x| x * x).sum::<f64>() / ends.len() as f64;
    assert!((v - 1.0).abs() < 0.1, "{v}");

    let fbm = FbmGenerator::new(0.3, 1000).unwrap();
    let (mut full, mut half) = (0.0, 0.0);
    for r in 0..5000 {
        let w = fbm.sample(&mut rep_rng(20, r));
        full += w[1000] * w[1000];
        half += w[500] * w[500];
    }
    let ratio = full / half;
    let expected = 2f64.powf(1.6);
    assert!((ratio / expected - 1.0).abs() < 0.1, "{ratio}");
}

#[test]
fn injected_shift_moves_the_mean() {
    let (t_len, at, k, d) = (500, 300, 25.0, 0.3);
    let brk = BreakSpec::local_mean_shift(at, k, t_len, d);
    let diffs: Vec<f64> = (0..200)
        .map(|seed| {
            let y: TimeSeries<f64> = gen_arfima(&ArfimaSpec::fwn(d).unwrap(), t_len, seed).unwrap();
            let z = apply_break(&y, &brk).unwrap();
            let v = z.values();
            mean(&v[at - 1..]) - mean(&v[..at - 1])
        })
        .collect();
    let se = (variance(&diffs) / diffs.len() as f64).sqrt();
    assert!((mean(&diffs) - brk.magnitude).abs() < 3.0 * se, "{} vs {}", mean(&diffs), brk.magnitude);
}

#[test]
fn cusum_locates_a_large_shift() {
    let spec = ArfimaSpec::fwn(0.3).unwrap();
    let gen = ArfimaGenerator::new(&spec, 500).unwrap();
    let sd = lmdsw::sim::acvf_fwn(0.3, 1.0, 0).unwrap()[0].sqrt();
    let hits = (0..500u64)
        .filter(|&r| {
            let y: TimeSeries<f64> = gen.sample(&mut rep_rng(21, r));
            let y = apply_break(&y, &BreakSpec::mean_shift(300, 5.0 * sd)).unwrap();
            let est = cusum_break(&y, 0.3, 1.0, 0.1).unwrap();
            est.index.abs_diff(300) <= 10
        })
        .count();
    assert!(hits >= 475, "{hits}");
}

#[test]
fn bridge_supremum_quantiles() {
    // The grid maximum undershoots the continuous supremum by about
    // 0.583/√N, hence the finer grid.
    let q = fbb_sup_quantile(0.0, 0.95, 20_000, 4000, 0.0, 22).unwrap();
    assert!((q - 1.358).abs() < 0.02, "{q}");
    let median = fbb_sup_quantile(0.0, 0.5, 2000, 500, 0.1, 23).unwrap();
    let upper = fbb_sup_quantile(0.0, 0.99, 2000, 500, 0.1, 23).unwrap();
    assert!(median < upper);
    // With Var W(1) = 1 the bridge variance at r = 1/2 is 2^{-2H} - 1/4,
    // H = d + 1/2, so the bridge narrows as d grows.
    let q3 = fbb_sup_quantile(0.3, 0.95, 20_000, 500, 0.1, 24).unwrap();
    let q0 = fbb_sup_quantile(0.0, 0.95, 20_000, 500, 0.1, 24).unwrap();
    assert!(q3 < q0, "{q3} vs {q0}");
}

#[test]
fn fbm_bridge_midpoint_variance() {
    for d in [0.0, 0.3] {
        let gen = FbmGenerator::new(d, 200).unwrap();
        let mids: Vec<f64> = (0..5000)
            .map(|r| {
                let w = gen.sample(&mut rep_rng(33, r));
                w[100] - 0.5 * w[200]
            })
            .collect();
        let v = mids.iter().map(|x| x * x).sum::<f64>() / mids.len() as f64;
        let expected = 2f64.powf(-(2.0 * d + 1.0)) - 0.25;
        // Relative sd of a 5000-draw variance is 2%.
        assert!((v / expected - 1.0).abs() < 0.08, "d={d}: {v} vs {expected}");
    }
}

#[test]
fn squared_errors_of_unbiased_forecast_lose_memory() {
    let paths = draws(&ArfimaSpec::fwn(0.3).unwrap(), 2000, 200, 25);
    let d = average(paths.iter().map(|p| {
        let m = mean(p);
        let loss: Vec<f64> = p.iter().map(|v| (v - m) * (v - m)).collect();
        local_whittle_of(&loss, None).unwrap().d_hat
    }));
    assert!((d - 0.1).abs() < 0.08, "{d}");
}

#[test]
fn single_sample_limit_is_the_classical_sup_wald() {
    let q = limit_distribution_quantiles(0.0, 0.0, 0.15, 2000, 20_000, &[0.95], 26).unwrap()[0];
    assert!((q - 8.85).abs() < 0.3, "{q}");
}

#[test]
fn limit_functional_is_sign_symmetric() {
    let gen = FbmGenerator::new(0.2, 400).unwrap();
    for r in 0..10 {
        let w = gen.sample(&mut rep_rng(27, r));
        let neg: Vec<f64> = w.iter().map(|v| -v).collect();
        assert_eq!(limit_functional(&w, 0.3, 0.1), limit_functional(&neg, 0.3, 0.1));
    }
}

#[test]
fn dsw_is_sign_symmetric() {
    let config = DswConfig::default().with_stride(6);
    for seed in 0..3 {
        let y: TimeSeries<f64> = gen_arfima(&ArfimaSpec::fwn(0.25).unwrap(), 300, seed).unwrap();
        let a = dsw_test(&y, &config).unwrap();
        let b = dsw_test(&y.scaled(-1.0).unwrap(), &config).unwrap();
        assert!((a.statistic - b.statistic).abs() <= 1e-9 * a.statistic);
        assert_eq!(a.break_index, b.break_index);
    }
}

#[test]
fn simulation_is_deterministic() {
    let config = DswConfig::default().with_stride(10);
    let spec = ArfimaSpec::ar1(0.2, 0.3).unwrap();
    let a = simulate_critical_values(&spec, &config, 200, 100, &[0.9, 0.95], 28).unwrap();
    let b = simulate_critical_values(&spec, &config, 200, 100, &[0.9, 0.95], 28).unwrap();
    assert_eq!(a, b);
    let c = simulate_critical_values(&spec, &config, 200, 100, &[0.9, 0.95], 29).unwrap();
    assert_ne!(a.values, c.values);
    let x: TimeSeries<f64> = gen_arfima(&spec, 300, 5).unwrap();
    assert_eq!(x, gen_arfima(&spec, 300, 5).unwrap());
}

fn dated(values: Vec<f64>) -> TimeSeries<f64> {
    let start = NaiveDate::from_ymd_opt(2015, 1, 1).unwrap();
    let dates = (0..values.len() as u64).map(|i| start + Days::new(i)).collect();
    TimeSeries::with_dates(values, dates).unwrap()
}

#[test]
fn applied_test_holds_size_without_a_break() {
    let config = DswConfig::default().with_stride(10);
    let settings = CritvalSettings { reps: 200, seed: 30 };
    let spec = ArfimaSpec::fwn(0.2).unwrap();
    let quiet = (0..100u64)
        .into_par_iter()
        .filter(|&seed| {
            let y: TimeSeries<f64> = gen_arfima(&spec, 300, 1000 + seed).unwrap();
            !apply_test("synthetic", &dated(y.into_values()), &config, &settings).unwrap().significant()
        })
        .count();
    assert!(quiet >= 85, "{quiet}");
}

#[test]
fn applied_test_dates_a_large_break() {
    let (t_len, at) = (400, 280);
    let config = DswConfig::default().with_stride(10);
    let settings = CritvalSettings { reps: 100, seed: 31 };
    let spec = ArfimaSpec::fwn(0.2).unwrap();
    let start = NaiveDate::from_ymd_opt(2015, 1, 1).unwrap();
    let injected = start + Days::new(at as u64 - 1);
    let tolerance = (t_len / 20) as i64;
    let hits = (0..100u64)
        .into_par_iter()
        .filter(|&seed| {
            let y: TimeSeries<f64> = gen_arfima(&spec, t_len, 2000 + seed).unwrap();
            let y = apply_break(&y, &BreakSpec::mean_shift(at, 5.0)).unwrap();
            let row = apply_test("synthetic", &dated(y.into_values()), &config, &settings).unwrap();
            row.break_date.is_some_and(|d| (d - injected).num_days().abs() <= tolerance)
        })
        .count();
    assert!(hits >= 90, "{hits}");
}

#[test]
fn dsw_locates_a_local_break() {
    let (t_len, at, d) = (500, 300, 0.1);
    let config = DswConfig::default().with_stride(8);
    let gen = ArfimaGenerator::new(&ArfimaSpec::fwn(d).unwrap(), t_len).unwrap();
    let brk = BreakSpec::local_mean_shift(at, 25.0, t_len, d);
    let hits = (0..100u64)
        .into_par_iter()
        .filter(|&r| {
            let y: TimeSeries<f64> = gen.sample(&mut rep_rng(32, r));
            let res = dsw_test(&apply_break(&y, &brk).unwrap(), &config).unwrap();
            res.break_index.abs_diff(at) <= t_len / 20
        })
        .count();
    assert!(hits >= 90, "{hits}");
}
