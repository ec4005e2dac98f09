//! Parameter assembly for the stochastic models from a training window.

use crate::engine::{feller_bound, BoundaryScheme, HestonParams, SpikeSpec, VasicekParams, DEFAULT_DT, YEAR_WINDOW};
use crate::error::{Error, Result};
use crate::series::{MonthlySeries, YearMonth};
use crate::stats::{
    annual_growth_rate, annualized_volatility, detect_spike_months, log_differences, season_profile,
    volatility_profile, GrowthEstimate, GrowthMethod, SeasonProfile, VolatilityProfile,
};

/// Rate/variance innovation correlation used when none is supplied.
pub const DEFAULT_RHO: f64 = -0.5936;

/// Minimum |mean deviation| for a calendar month to carry a spike.
///
/// March's 2010-2014 deviations are sign-consistent with a mean of -10.7%,
/// so a 0.10 cut would add it to January, July and August.
pub const DEFAULT_SPIKE_THRESHOLD: f64 = 0.11;

/// Relative margin placing the default kappa just above the Feller bound.
pub const FELLER_MARGIN: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationConfig {
    pub rho: f64,
    pub spike_threshold: f64,
    pub scheme: BoundaryScheme,
    /// Overrides; `None` means estimate from the training window.
    pub c1: Option<f64>,
    pub kappa: Option<f64>,
    pub xi: Option<f64>,
    pub mu: Option<f64>,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        Self {
            rho: DEFAULT_RHO,
            spike_threshold: DEFAULT_SPIKE_THRESHOLD,
            scheme: BoundaryScheme::Reflect,
            c1: None,
            kappa: None,
            xi: None,
            mu: None,
        }
    }
}

/// Statistics of a training window.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingStats {
    pub volatility: VolatilityProfile,
    pub growth: GrowthEstimate,
    pub season: SeasonProfile,
    pub spike_months: Vec<u32>,
}

/// Training slice used for statistics: the window itself plus the month
/// before it when the series has it, so the first January contributes its
/// log-difference.
pub fn training_slice(series: &MonthlySeries, start: YearMonth, end: YearMonth) -> Result<MonthlySeries> {
    if start > end {
        return Err(Error::Range(format!("training window {start}..{end} is empty")));
    }
    let from = if series.contains(start.prev()) { start.prev() } else { start };
    series.slice_window(from, end)
}

pub fn training_stats(
    series: &MonthlySeries,
    start: YearMonth,
    end: YearMonth,
    spike_threshold: f64,
) -> Result<TrainingStats> {
    if !(spike_threshold > 0.0) {
        return Err(Error::Validation(format!(
            "spike threshold must be positive, got {spike_threshold}"
        )));
    }
    let slice = training_slice(series, start, end)?;
    let season = season_profile(&slice)?;
    let spike_months = detect_spike_months(&season, spike_threshold);
    let volatility = match volatility_profile(&slice) {
        Ok(v) => v,
        Err(Error::InsufficientData(msg) | Error::DegenerateVariance(msg)) => {
            log::warn!("{msg}; using pooled volatility and zero vol-of-vol");
            pooled_volatility(&slice)?
        }
        Err(e) => return Err(e),
    };
    let growth = match annual_growth_rate(&slice) {
        Ok(g) => g,
        Err(Error::InsufficientData(msg)) => {
            log::warn!("{msg}; using zero growth");
            GrowthEstimate {
                annual_growth: 0.0,
                method: GrowthMethod::Unavailable,
            }
        }
        Err(e) => return Err(e),
    };
    Ok(TrainingStats {
        volatility,
        growth,
        season,
        spike_months,
    })
}

/// Fallback for short or flat windows: one annualized volatility over every
/// log-difference and no vol-of-vol.
fn pooled_volatility(slice: &MonthlySeries) -> Result<VolatilityProfile> {
    let window_vol = annualized_volatility(&log_differences(slice.rates())?)?;
    Ok(VolatilityProfile {
        years: Vec::new(),
        yearly_vols: Vec::new(),
        yearly_vol_logdiffs: Vec::new(),
        window_vol,
        vol_of_vol: 0.0,
    })
}

impl TrainingStats {
    pub fn spikes(&self) -> Vec<SpikeSpec> {
        self.spike_months
            .iter()
            .map(|&m| SpikeSpec {
                month: m,
                mean: self.season.mean[m as usize - 1],
                std: self.season.std[m as usize - 1],
            })
            .collect()
    }
}

/// Initial rate: the override, else the observed rate of the first forecast
/// month, else the last training rate.
pub fn initial_rate(series: &MonthlySeries, train_end: YearMonth, forecast_start: YearMonth, c1: Option<f64>) -> Result<f64> {
    if let Some(c) = c1 {
        return Ok(c);
    }
    if let Some(r) = series.rate_at(forecast_start) {
        return Ok(r);
    }
    let fallback = series
        .rate_at(train_end)
        .ok_or_else(|| Error::Range(format!("training end {train_end} is not in the series")))?;
    log::warn!("no observed rate for {forecast_start}; using the {train_end} rate {fallback} as the initial rate");
    Ok(fallback)
}

/// Up to twelve observed rates ending at `end`.
pub fn history_tail(series: &MonthlySeries, end: YearMonth) -> Result<Vec<f64>> {
    let start = end.add_months(-(YEAR_WINDOW as i64 - 1));
    let from = if series.contains(start) { start } else { series.start() };
    Ok(series.slice_window(from, end)?.rates().to_vec())
}

fn check_forecast_start(train_end: YearMonth, forecast_start: YearMonth) -> Result<()> {
    if forecast_start <= train_end {
        return Err(Error::Range(format!(
            "forecast start {forecast_start} must come after training end {train_end}"
        )));
    }
    Ok(())
}

pub fn calibrate_heston(
    series: &MonthlySeries,
    train_start: YearMonth,
    train_end: YearMonth,
    forecast_start: YearMonth,
    cfg: &CalibrationConfig,
) -> Result<(HestonParams, TrainingStats)> {
    check_forecast_start(train_end, forecast_start)?;
    let stats = training_stats(series, train_start, train_end, cfg.spike_threshold)?;
    let vol = stats.volatility.window_vol;
    let xi = cfg.xi.unwrap_or(stats.volatility.vol_of_vol);
    let kappa = match cfg.kappa {
        Some(k) => k,
        None if xi == 0.0 => 0.0,
        None => feller_bound(xi, vol)? * (1.0 + FELLER_MARGIN),
    };
    let mut params = HestonParams::from_vol_units(
        initial_rate(series, train_end, forecast_start, cfg.c1)?,
        cfg.mu.unwrap_or(stats.growth.annual_growth),
        vol,
        vol,
        kappa,
        xi,
        cfg.rho,
        stats.spikes(),
        forecast_start,
    )?;
    params.scheme = cfg.scheme;
    Ok((params, stats))
}

/// OLS slope of `x_t` on `x_{t-1}` (with intercept).
pub fn ar1_slope(xs: &[f64]) -> Result<f64> {
    if xs.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "AR(1) slope needs at least 3 values, got {}",
            xs.len()
        )));
    }
    let x = &xs[..xs.len() - 1];
    let y = &xs[1..];
    let mx = crate::stats::mean(x);
    let my = crate::stats::mean(y);
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::DegenerateVariance("constant series has no AR(1) slope".into()));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    Ok(sxy / sxx)
}

/// Annual mean-reversion speed `-12 ln(slope)`; a slope at or above one
/// means no reversion.
pub fn reversion_speed(slope: f64, dt: f64) -> Result<f64> {
    if !(slope > 0.0) {
        return Err(Error::Domain(format!(
            "AR(1) slope {slope} is not positive; mean-reversion speed is undefined"
        )));
    }
    Ok((-slope.ln() / dt).max(0.0))
}

pub fn calibrate_vasicek(
    series: &MonthlySeries,
    train_start: YearMonth,
    train_end: YearMonth,
    forecast_start: YearMonth,
    cfg: &CalibrationConfig,
) -> Result<(VasicekParams, TrainingStats)> {
    check_forecast_start(train_end, forecast_start)?;
    let stats = training_stats(series, train_start, train_end, cfg.spike_threshold)?;
    let train = series.slice_window(train_start, train_end)?;
    let c1 = initial_rate(series, train_end, forecast_start, cfg.c1)?;
    let kappa = match cfg.kappa {
        Some(k) => k,
        None => reversion_speed(ar1_slope(train.rates())?, DEFAULT_DT)?,
    };
    let params = VasicekParams {
        c0: c1,
        c1,
        mu: cfg.mu.unwrap_or(stats.growth.annual_growth),
        kappa,
        sigma: stats.volatility.window_vol,
        spikes: stats.spikes(),
        start: forecast_start,
        dt: DEFAULT_DT,
        scheme: cfg.scheme,
    };
    params.validate()?;
    Ok((params, stats))
}
