mod common;

use common::ym;
use crashvol_core::engine::{
    forecast_quantiles, simulate_heston, simulate_vasicek, BoundaryScheme, ForecastQuantiles, HestonParams,
    SimulationResult, SpikeSpec, VasicekParams, DEFAULT_DT,
};
use crashvol_core::format::KvFile;
use proptest::prelude::*;

const C1: f64 = 0.00498;

fn reference_spikes() -> Vec<SpikeSpec> {
    vec![
        SpikeSpec::new(1, -0.173, 0.125).unwrap(),
        SpikeSpec::new(7, 0.334, 0.056).unwrap(),
        SpikeSpec::new(8, -0.121, 0.041).unwrap(),
    ]
}

fn reference_params(spikes: Vec<SpikeSpec>) -> HestonParams {
    HestonParams::from_vol_units(C1, 0.1361, 0.6333, 0.6333, 0.0545, 0.2626, -0.5936, spikes, ym(2015, 1)).unwrap()
}

fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

fn all_nonnegative(sim: &SimulationResult) -> bool {
    sim.rate_paths
        .iter()
        .chain(&sim.base_paths)
        .chain(&sim.var_paths)
        .flatten()
        .all(|x| *x >= 0.0 && x.is_finite())
}

/// Reflection turns `E[x]` into `E|x|`, so once a sizeable share of paths
/// touches zero the mean sits above the linear drift.
#[test]
fn reflection_lifts_reference_mean_above_linear_drift() {
    let p = reference_params(reference_spikes());
    let sim = simulate_heston(&p, 60, 5000, 7, &[C1; 12]).unwrap();
    let (m, se) = mean_and_se(&sim.base_column(59));
    let want = C1 * (1.0 + 0.1361 * 5.0);
    assert!(m > want + 3.0 * se, "mean {m} vs {want} (se {se})");
}

#[test]
fn rate_mean_follows_linear_drift_away_from_zero() {
    let p = HestonParams::from_vol_units(C1, 0.1361, 0.1, 0.1, 2.0, 0.05, -0.5936, vec![], ym(2015, 1)).unwrap();
    let sim = simulate_heston(&p, 60, 20_000, 11, &[C1; 12]).unwrap();
    for t in [12usize, 36, 60] {
        let (m, se) = mean_and_se(&sim.base_column(t - 1));
        let want = C1 * (1.0 + 0.1361 * t as f64 / 12.0);
        assert!((m - want).abs() <= 3.0 * se, "month {t}: {m} vs {want} (se {se})");
    }
}

#[test]
fn reference_variance_mean_stays_at_theta() {
    let p = reference_params(reference_spikes());
    let sim = simulate_heston(&p, 60, 5000, 7, &[C1; 12]).unwrap();
    for t in [11, 35, 59] {
        let (m, se) = mean_and_se(&sim.var_column(t));
        assert!((m - p.theta).abs() <= 3.0 * se, "month {}: {m} vs {} (se {se})", t + 1, p.theta);
    }
}

#[test]
fn july_exceeds_june() {
    let sim = simulate_heston(&reference_params(reference_spikes()), 24, 5000, 3, &[C1; 12]).unwrap();
    for year in 0..2 {
        let june = mean_and_se(&sim.month_column(12 * year + 5)).0;
        let july = mean_and_se(&sim.month_column(12 * year + 6)).0;
        assert!(july > june, "year {year}: july {july} <= june {june}");
    }
}

#[test]
fn identical_across_thread_counts() {
    let p = reference_params(reference_spikes());
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| simulate_heston(&p, 36, 2000, 99, &[C1; 12]).unwrap())
    };
    assert_eq!(run(1), run(4));
    assert_ne!(run(1), simulate_heston(&p, 36, 2000, 100, &[C1; 12]).unwrap());
}

#[test]
fn vasicek_tracks_growth_curve_without_noise() {
    let params = VasicekParams {
        c0: C1,
        c1: C1,
        mu: 0.1,
        kappa: 12.0,
        sigma: 0.0,
        spikes: vec![],
        start: ym(2015, 1),
        dt: DEFAULT_DT,
        scheme: BoundaryScheme::Reflect,
    };
    // the discrete update lags the target by about mu / kappa per year
    let sim = simulate_vasicek(&params, 60, 3, 1, &[C1]).unwrap();
    for t in 12..60 {
        let target = params.target(t);
        let got = sim.base_paths[0][t];
        assert!((got - target).abs() / target < 0.01, "month {t}: {got} vs {target}");
    }
}

#[test]
fn vasicek_without_reversion_or_noise_is_constant() {
    let params = VasicekParams {
        c0: 0.004,
        c1: C1,
        mu: 0.2,
        kappa: 0.0,
        sigma: 0.0,
        spikes: vec![],
        start: ym(2015, 1),
        dt: DEFAULT_DT,
        scheme: BoundaryScheme::Truncate,
    };
    let sim = simulate_vasicek(&params, 24, 4, 5, &[]).unwrap();
    assert!(sim.rate_paths.iter().flatten().all(|x| *x == 0.004));
}

#[test]
fn reflection_lifts_median_above_truncation() {
    let mut p = reference_params(vec![]);
    let reflect = forecast_quantiles(&simulate_heston(&p, 60, 4000, 2, &[C1; 12]).unwrap(), &[0.25, 0.75]).unwrap();
    p.scheme = BoundaryScheme::Truncate;
    let truncate = forecast_quantiles(&simulate_heston(&p, 60, 4000, 2, &[C1; 12]).unwrap(), &[0.25, 0.75]).unwrap();
    assert!(reflect.median[59] >= truncate.median[59]);
}

fn arb_heston() -> impl Strategy<Value = HestonParams> {
    (
        1e-6..0.05f64,
        -0.9..3.0f64,
        0.0..3.0f64,
        0.0..3.0f64,
        0.0..50.0f64,
        0.0..5.0f64,
        -1.0..=1.0f64,
        proptest::bool::ANY,
        proptest::bool::ANY,
    )
        .prop_map(|(c1, mu, v0, theta, kappa, xi, rho, spikes, truncate)| HestonParams {
            c1,
            mu,
            v0: v0 * v0,
            theta: theta * theta,
            kappa,
            xi,
            rho,
            spikes: if spikes {
                vec![SpikeSpec::new(3, -2.0, 1.5).unwrap(), SpikeSpec::new(9, 1.0, 3.0).unwrap()]
            } else {
                vec![]
            },
            start: ym(2020, 1),
            dt: DEFAULT_DT,
            scheme: if truncate { BoundaryScheme::Truncate } else { BoundaryScheme::Reflect },
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn heston_paths_are_nonnegative(p in arb_heston(), seed in any::<u64>()) {
        let sim = simulate_heston(&p, 36, 40, seed, &[p.c1; 12]).unwrap();
        prop_assert!(all_nonnegative(&sim));
    }

    #[test]
    fn vasicek_paths_are_nonnegative(
        c1 in 1e-6..0.05f64,
        mu in -0.9..3.0f64,
        kappa in 0.0..30.0f64,
        sigma in 0.0..5.0f64,
        seed in any::<u64>(),
    ) {
        let params = VasicekParams {
            c0: c1, c1, mu, kappa, sigma,
            spikes: vec![SpikeSpec::new(1, -1.5, 2.0).unwrap()],
            start: ym(2020, 1),
            dt: DEFAULT_DT,
            scheme: BoundaryScheme::Reflect,
        };
        let sim = simulate_vasicek(&params, 36, 40, seed, &[c1; 3]).unwrap();
        prop_assert!(all_nonnegative(&sim));
    }

    #[test]
    fn quantiles_are_monotone(p in arb_heston(), seed in any::<u64>()) {
        let sim = simulate_heston(&p, 12, 25, seed, &[p.c1]).unwrap();
        let q = forecast_quantiles(&sim, &[0.05, 0.25, 0.75, 0.95]).unwrap();
        for t in 0..12 {
            let col = [q.bands[0][t], q.bands[1][t], q.median[t], q.bands[2][t], q.bands[3][t]];
            prop_assert!(col.windows(2).all(|w| w[0] <= w[1]), "month {}: {:?}", t, col);
        }
    }

    #[test]
    fn heston_params_file_roundtrip(p in arb_heston()) {
        let back = HestonParams::from_kv(&KvFile::parse(&p.to_kv().to_text()).unwrap()).unwrap();
        let rel = |a: f64, b: f64| (a - b).abs() <= 1e-8 * a.abs().max(b.abs()).max(1e-300);
        prop_assert!(rel(p.c1, back.c1) && rel(p.mu, back.mu) && rel(p.kappa, back.kappa));
        prop_assert!(rel(p.v0, back.v0) && rel(p.theta, back.theta) && rel(p.xi, back.xi));
        prop_assert!(rel(p.rho, back.rho));
        prop_assert_eq!(p.spikes.len(), back.spikes.len());
        prop_assert_eq!(p.scheme, back.scheme);
        prop_assert_eq!(p.start, back.start);
    }

    #[test]
    fn forecast_csv_roundtrip(p in arb_heston(), seed in any::<u64>()) {
        let sim = simulate_heston(&p, 6, 10, seed, &[p.c1]).unwrap();
        let q = forecast_quantiles(&sim, &[0.1, 0.9]).unwrap();
        let back = ForecastQuantiles::parse_csv(&q.to_csv_string()).unwrap();
        prop_assert_eq!(back.start, q.start);
        prop_assert_eq!(&back.levels, &q.levels);
        for (a, b) in q.median.iter().zip(&back.median) {
            prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1e-300));
        }
    }
}
