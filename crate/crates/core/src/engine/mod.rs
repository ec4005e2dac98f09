//! Seeded Euler-Maruyama Monte Carlo for the amended Heston model and the
//! amended Vasicek baseline.
//!
//! Both engines share the same month loop:
//!
//! 1. draw `z_c`, `z_v` (correlated for Heston), then the spike draw if the
//!    calendar month carries a [`SpikeSpec`];
//! 2. advance the base rate with increments scaled by `C1` rather than the
//!    current level, mapping negative values back through the boundary scheme;
//! 3. report `|base + prevailing_year_average * G_t|`.
//!
//! The base (pre-spike) path feeds the next step and the prevailing average,
//! so spikes are transient.

mod params;
mod quantiles;
mod rng;

pub use params::{BoundaryScheme, HestonParams, SpikeSpec, VasicekParams, DEFAULT_DT};
pub use quantiles::{forecast_quantiles, level_column, quantile_sorted, ForecastQuantiles};
pub(crate) use quantiles::validate_levels;
pub use rng::path_rng;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::series::YearMonth;

/// Length of the trailing window standing in for the calendar-year average.
pub const YEAR_WINDOW: usize = 12;

/// Returns `(z1, rho z1 + sqrt(1 - rho^2) z2)`.
pub fn correlated_normal_pair(z1: f64, z2: f64, rho: f64) -> Result<(f64, f64)> {
    if !(-1.0..=1.0).contains(&rho) {
        return Err(Error::Domain(format!("correlation must lie in [-1, 1], got {rho}")));
    }
    Ok((z1, rho * z1 + (1.0 - rho * rho).sqrt() * z2))
}

/// `xi^2 / (2 theta_vol)`: the mean-reversion threshold when the long-run
/// level is expressed as a volatility rather than a variance.
pub fn feller_bound(xi: f64, theta_vol: f64) -> Result<f64> {
    if !(theta_vol > 0.0) {
        return Err(Error::Domain(format!(
            "long-run volatility must be positive, got {theta_vol}"
        )));
    }
    Ok(xi * xi / (2.0 * theta_vol))
}

/// One Euler step of `dv = kappa (theta - v) dt + xi sqrt(v) dW`.
pub fn step_variance(v: f64, params: &HestonParams, dt: f64, z_v: f64) -> f64 {
    let raw = v + params.kappa * (params.theta - v) * dt + params.xi * (v * dt).sqrt() * z_v;
    params.scheme.apply(raw)
}

/// One state-independent Euler step of `dC = mu C1 dt + sqrt(v) C1 dW`.
pub fn step_rate(c_prev: f64, params: &HestonParams, v: f64, dt: f64, z_c: f64) -> f64 {
    let raw = c_prev + params.mu * params.c1 * dt + (v * dt).sqrt() * params.c1 * z_c;
    params.scheme.apply(raw)
}

/// `G_t`: `mean + std z` when `month` carries a spike, otherwise 0.
pub fn spike_adjustment(month: u32, spikes: &[SpikeSpec], z: f64) -> f64 {
    spikes
        .iter()
        .find(|s| s.month == month)
        .map_or(0.0, |s| s.mean + s.std * z)
}

/// Mean of the most recent (up to twelve) base rates, taking simulated months
/// first and backfilling from the observed history tail.
pub fn prevailing_year_average(path_so_far: &[f64], history_tail: &[f64]) -> Result<f64> {
    let from_path = path_so_far.len().min(YEAR_WINDOW);
    let from_history = (YEAR_WINDOW - from_path).min(history_tail.len());
    let n = from_path + from_history;
    if n == 0 {
        return Err(Error::InsufficientData(
            "prevailing average needs at least one rate".into(),
        ));
    }
    let sum: f64 = path_so_far[path_so_far.len() - from_path..].iter().sum::<f64>()
        + history_tail[history_tail.len() - from_history..].iter().sum::<f64>();
    Ok(sum / n as f64)
}

/// Monte Carlo output; every matrix is `n_paths x horizon`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationResult {
    /// Reported rates `C_t` including spikes.
    pub rate_paths: Vec<Vec<f64>>,
    /// Pre-spike rates.
    pub base_paths: Vec<Vec<f64>>,
    /// Variance `v_t` after each step (constant `sigma^2` for Vasicek).
    pub var_paths: Vec<Vec<f64>>,
    pub seed: u64,
    pub dt: f64,
    pub start: YearMonth,
    pub history_tail: Vec<f64>,
    /// Free-form provenance (model name, parameters).
    pub metadata: Vec<(String, String)>,
}

impl SimulationResult {
    pub fn n_paths(&self) -> usize {
        self.rate_paths.len()
    }

    pub fn horizon(&self) -> usize {
        self.rate_paths.first().map_or(0, Vec::len)
    }

    /// All paths' values at forecast month `t` (0-based).
    pub fn month_column(&self, t: usize) -> Vec<f64> {
        self.rate_paths.iter().map(|p| p[t]).collect()
    }

    pub fn base_column(&self, t: usize) -> Vec<f64> {
        self.base_paths.iter().map(|p| p[t]).collect()
    }

    pub fn var_column(&self, t: usize) -> Vec<f64> {
        self.var_paths.iter().map(|p| p[t]).collect()
    }
}

struct PathOutput {
    rates: Vec<f64>,
    base: Vec<f64>,
    var: Vec<f64>,
}

fn check_shape(horizon: usize, n_paths: usize) -> Result<()> {
    if horizon == 0 || n_paths == 0 {
        return Err(Error::Validation(format!(
            "horizon and path count must be at least 1 (got {horizon}, {n_paths})"
        )));
    }
    Ok(())
}

fn tail12(history: &[f64]) -> Vec<f64> {
    history[history.len().saturating_sub(YEAR_WINDOW)..].to_vec()
}

/// Applies the spike for `date` to `base`, drawing from `rng` only when the
/// month carries a spike.
fn spiked<R: Rng>(
    rng: &mut R,
    date: YearMonth,
    spikes: &[SpikeSpec],
    base_so_far: &[f64],
    history: &[f64],
) -> f64 {
    let base = *base_so_far.last().expect("at least one base rate");
    if !spikes.iter().any(|s| s.month == date.month) {
        return base;
    }
    let z: f64 = rng.sample(StandardNormal);
    let g = spike_adjustment(date.month, spikes, z);
    let avg = prevailing_year_average(base_so_far, history).expect("non-empty path");
    (base + avg * g).abs()
}

type Paths = Vec<Vec<f64>>;

fn collect(paths: Vec<PathOutput>) -> (Paths, Paths, Paths) {
    let mut rates = Vec::with_capacity(paths.len());
    let mut base = Vec::with_capacity(paths.len());
    let mut var = Vec::with_capacity(paths.len());
    for p in paths {
        rates.push(p.rates);
        base.push(p.base);
        var.push(p.var);
    }
    (rates, base, var)
}

/// Simulates `n_paths` amended-Heston paths of `horizon` months. Results
/// depend only on the arguments, not on the thread count.
pub fn simulate_heston(
    params: &HestonParams,
    horizon: usize,
    n_paths: usize,
    seed: u64,
    history_tail: &[f64],
) -> Result<SimulationResult> {
    params.validate()?;
    check_shape(horizon, n_paths)?;
    let history = tail12(history_tail);
    let dt = params.dt;

    let paths: Vec<PathOutput> = (0..n_paths as u64)
        .into_par_iter()
        .map(|p| {
            let mut rng = path_rng(seed, p);
            let mut c = params.c1;
            let mut v = params.v0;
            let mut out = PathOutput {
                rates: Vec::with_capacity(horizon),
                base: Vec::with_capacity(horizon),
                var: Vec::with_capacity(horizon),
            };
            for t in 0..horizon {
                let date = params.start.add_months(t as i64);
                let z1: f64 = rng.sample(StandardNormal);
                let z2: f64 = rng.sample(StandardNormal);
                let (z_c, z_v) = correlated_normal_pair(z1, z2, params.rho)
                    .expect("rho validated");
                // rate uses the start-of-step variance
                let c_next = step_rate(c, params, v, dt, z_c);
                v = step_variance(v, params, dt, z_v);
                c = c_next;
                out.base.push(c);
                out.var.push(v);
                let reported = spiked(&mut rng, date, &params.spikes, &out.base, &history);
                out.rates.push(reported);
            }
            out
        })
        .collect();

    let (rate_paths, base_paths, var_paths) = collect(paths);
    Ok(SimulationResult {
        rate_paths,
        base_paths,
        var_paths,
        seed,
        dt,
        start: params.start,
        history_tail: history,
        metadata: vec![
            ("model".into(), "heston".into()),
            ("scheme".into(), params.scheme.to_string()),
            ("feller_satisfied".into(), params.feller_satisfied().to_string()),
        ],
    })
}

/// Simulates the amended Vasicek baseline. Draw order per month matches the
/// Heston engine (`z_c`, an unused `z_v`, then the spike draw) so both models
/// consume their substreams identically.
pub fn simulate_vasicek(
    params: &VasicekParams,
    horizon: usize,
    n_paths: usize,
    seed: u64,
    history_tail: &[f64],
) -> Result<SimulationResult> {
    params.validate()?;
    check_shape(horizon, n_paths)?;
    let history = tail12(history_tail);
    let dt = params.dt;
    let variance = params.sigma * params.sigma;

    let paths: Vec<PathOutput> = (0..n_paths as u64)
        .into_par_iter()
        .map(|p| {
            let mut rng = path_rng(seed, p);
            let mut c = params.c0;
            let mut out = PathOutput {
                rates: Vec::with_capacity(horizon),
                base: Vec::with_capacity(horizon),
                var: vec![variance; horizon],
            };
            for t in 0..horizon {
                let date = params.start.add_months(t as i64);
                let z_c: f64 = rng.sample(StandardNormal);
                let _z_v: f64 = rng.sample(StandardNormal);
                let raw = c
                    + params.kappa * (params.target(t) - c) * dt
                    + params.sigma * params.c1 * dt.sqrt() * z_c;
                c = params.scheme.apply(raw);
                out.base.push(c);
                let reported = spiked(&mut rng, date, &params.spikes, &out.base, &history);
                out.rates.push(reported);
            }
            out
        })
        .collect();

    let (rate_paths, base_paths, var_paths) = collect(paths);
    Ok(SimulationResult {
        rate_paths,
        base_paths,
        var_paths,
        seed,
        dt,
        start: params.start,
        history_tail: history,
        metadata: vec![
            ("model".into(), "vasicek".into()),
            ("scheme".into(), params.scheme.to_string()),
            ("kappa".into(), crate::format::sig10(params.kappa)),
            ("sigma".into(), crate::format::sig10(params.sigma)),
            ("mu".into(), crate::format::sig10(params.mu)),
        ],
    })
}
