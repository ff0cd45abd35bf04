use approx::assert_relative_eq;
use chrono::NaiveDate;
use proptest::prelude::*;

use lmdsw::breakpoint::cusum_argmax;
use lmdsw::dsw::{dsw_test, sup_wald, DswConfig};
use lmdsw::ingest::{deflate, reinflate, Period, PriceIndex, PriceTable};
use lmdsw::lrv::mac_variance_of;
use lmdsw::memory_est::local_whittle_of;
use lmdsw::scalar::variance;
use lmdsw::sim::{apply_break, gen_arfima, ArfimaSpec, BreakSpec};
use lmdsw::spectral::periodogram_of;
use lmdsw::TimeSeries;

fn series(len: std::ops::Range<usize>) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-100.0f64..100.0, len)
}

fn non_flat(x: &[f64]) -> bool {
    variance(x) > 1e-6
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn parseval(x in series(4..300)) {
        prop_assume!(non_flat(&x));
        let m = x.iter().sum::<f64>() / x.len() as f64;
        let c: Vec<f64> = x.iter().map(|v| v - m).collect();
        let pg = periodogram_of(&c).unwrap();
        let lhs = 2.0 * std::f64::consts::PI / x.len() as f64 * pg.full_plane_sum();
        prop_assert!((lhs - variance(&c)).abs() <= 1e-10 * variance(&c));
    }

    #[test]
    fn periodogram_scale_and_shift(x in series(4..200), c in 0.1f64..10.0, s in -50.0f64..50.0) {
        let base = periodogram_of(&x).unwrap();
        let scaled: Vec<f64> = x.iter().map(|v| c * v).collect();
        for (a, b) in periodogram_of(&scaled).unwrap().ordinates.iter().zip(&base.ordinates) {
            prop_assert!((a - c * c * b).abs() <= 1e-9 * (1.0 + a.abs()));
        }
        let shifted: Vec<f64> = x.iter().map(|v| v + s).collect();
        let scale = x.iter().map(|v| v * v).sum::<f64>() + s * s * x.len() as f64;
        for (a, b) in periodogram_of(&shifted).unwrap().ordinates.iter().zip(&base.ordinates) {
            prop_assert!((a - b).abs() <= 1e-9 * scale);
        }
    }

    #[test]
    fn local_whittle_ignores_power_of_two_scale(x in series(32..300), e in -8i32..8) {
        prop_assume!(non_flat(&x));
        let c = 2f64.powi(e);
        let y: Vec<f64> = x.iter().map(|v| c * v).collect();
        let a = local_whittle_of(&x, None).unwrap();
        let b = local_whittle_of(&y, None).unwrap();
        prop_assert_eq!(a.d_hat, b.d_hat);
    }

    #[test]
    fn local_whittle_nearly_ignores_any_scale(x in series(32..300), c in 1e-3f64..1e3) {
        prop_assume!(non_flat(&x));
        let y: Vec<f64> = x.iter().map(|v| c * v).collect();
        let a = local_whittle_of(&x, None).unwrap();
        let b = local_whittle_of(&y, None).unwrap();
        prop_assert!((a.d_hat - b.d_hat).abs() < 1e-6);
    }

    #[test]
    fn mac_scale_equivariance(x in series(16..300), c in 0.1f64..10.0, d in -0.4f64..0.4) {
        prop_assume!(non_flat(&x));
        let y: Vec<f64> = x.iter().map(|v| c * v).collect();
        let a = mac_variance_of(&x, d, None).unwrap().value;
        let b = mac_variance_of(&y, d, None).unwrap().value;
        prop_assert!((b - c * c * a).abs() <= 1e-10 * b.abs());
    }

    #[test]
    fn cusum_argmax_shift_and_scale(x in series(20..300), c in 0.1f64..10.0, s in -50.0f64..50.0) {
        prop_assume!(non_flat(&x));
        let (k, stat) = cusum_argmax(&x, 0.1).unwrap();
        // Ties can flip under rounding; require a clear maximum.
        let m = x.iter().sum::<f64>() / x.len() as f64;
        let mut partial = 0.0;
        let runner_up = x.iter().enumerate().filter_map(|(i, v)| {
            partial += v - m;
            (i + 1 != k).then_some(partial.abs())
        }).fold(0.0, f64::max);
        prop_assume!(stat - runner_up > 1e-6 * stat);
        let y: Vec<f64> = x.iter().map(|v| c * v + s).collect();
        prop_assert_eq!(cusum_argmax(&y, 0.1).unwrap().0, k);
    }

    #[test]
    fn sup_wald_nonnegative_and_scale_free(x in series(20..200), c in 0.5f64..4.0) {
        prop_assume!(non_flat(&x));
        let (a, ka) = sup_wald(&x, 0.1, 1.0).unwrap();
        prop_assert!(a >= 0.0);
        let y: Vec<f64> = x.iter().map(|v| c * v).collect();
        let (b, kb) = sup_wald(&y, 0.1, c * c).unwrap();
        prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a));
        prop_assert_eq!(ka, kb);
    }

    #[test]
    fn deflation_round_trip(
        prices in prop::collection::vec(0.01f64..1e4, 1..60),
        index in prop::collection::vec(0.5f64..500.0, 12),
        base in 1u32..=12,
    ) {
        let idx = PriceIndex::new(index.iter().enumerate().map(|(m, &v)| (Period::Month(2020, m as u32 + 1), v))).unwrap();
        let start = NaiveDate::from_ymd_opt(2020, 1, 1).unwrap();
        let table = PriceTable {
            dates: (0..prices.len()).map(|i| start + chrono::Days::new(5 * i as u64)).collect(),
            prices: prices.clone(),
            dropped: 0,
        };
        let base = Some(Period::Month(2020, base));
        let back = reinflate(&deflate(&table, &idx, base).unwrap(), &idx, base).unwrap();
        for (a, b) in back.prices.iter().zip(&prices) {
            prop_assert!((a - b).abs() <= 1e-12 * b.abs());
        }
    }
}

#[test]
fn dsw_is_scale_invariant() {
    let config = DswConfig::default().with_stride(5);
    for seed in 0..4 {
        let y: TimeSeries<f64> = gen_arfima(&ArfimaSpec::fwn(0.2).unwrap(), 300, seed).unwrap();
        let a = dsw_test(&y, &config).unwrap();
        for c in [0.01, 3.7, 250.0] {
            let b = dsw_test(&y.scaled(c).unwrap(), &config).unwrap();
            assert_relative_eq!(a.statistic, b.statistic, max_relative = 1e-9);
            assert_eq!(a.break_index, b.break_index);
            assert_eq!(a.m_star, b.m_star);
        }
    }
}

#[test]
fn dsw_dominates_every_m() {
    let y: TimeSeries<f64> = gen_arfima(&ArfimaSpec::fwn(0.3).unwrap(), 400, 7).unwrap();
    let res = dsw_test(&y, &DswConfig::default().with_stride(3)).unwrap();
    assert!(res.per_m_trace.iter().all(|s| s.sw <= res.statistic));
    assert!(res.per_m_trace.iter().any(|s| s.sw == res.statistic));
}

#[test]
fn zero_breaks_are_identities() {
    let y: TimeSeries<f64> = gen_arfima(&ArfimaSpec::fwn(0.3).unwrap(), 50, 1).unwrap();
    assert_eq!(apply_break(&y, &BreakSpec::mean_shift(10, 0.0)).unwrap(), y);
    assert_eq!(apply_break(&y, &BreakSpec::variance_shift(10, 1.0)).unwrap(), y);
}

#[test]
fn single_precision_agrees_with_double() {
    let y64: TimeSeries<f64> = gen_arfima(&ArfimaSpec::fwn(0.3).unwrap(), 500, 3).unwrap();
    let y32: TimeSeries<f32> = gen_arfima(&ArfimaSpec::fwn(0.3).unwrap(), 500, 3).unwrap();
    let d64 = local_whittle_of(y64.values(), None).unwrap().d_hat;
    let d32 = local_whittle_of(y32.values(), None).unwrap().d_hat;
    assert!((d64 - d32 as f64).abs() < 1e-3);
    let config = DswConfig::default().with_stride(10);
    let s64 = dsw_test(&y64, &config).unwrap().statistic;
    let s32 = dsw_test(&y32, &config).unwrap().statistic;
    assert!((s64 - s32 as f64).abs() < 1e-2 * s64);
}
