//! Descriptive statistics that turn a monthly rate series into model inputs.
//!
//! Log-differences `ln(r_t / r_{t-1})` are attributed to the calendar year of
//! their endpoint `t`. Only complete calendar years contribute to yearly
//! figures; a partial leading year (for example a lone December) only supplies
//! the first log-difference of the following January.

use crate::error::{Error, Result};
use crate::series::MonthlySeries;

const MONTHS_PER_YEAR: f64 = 12.0;

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample (n - 1) standard deviation. `NaN` for fewer than two values.
pub fn sample_std(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return f64::NAN;
    }
    let m = mean(xs);
    let ss: f64 = xs.iter().map(|x| (x - m).powi(2)).sum();
    (ss / (xs.len() - 1) as f64).sqrt()
}

pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::InsufficientData(
            "correlation needs two equally long samples of at least 2 values".into(),
        ));
    }
    let (mx, my) = (mean(xs), mean(ys));
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx).powi(2);
        syy += (y - my).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::DegenerateVariance(
            "correlation undefined for a constant sample".into(),
        ));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

pub fn log_differences(rates: &[f64]) -> Result<Vec<f64>> {
    if rates.len() < 2 {
        return Err(Error::InsufficientData(
            "log-differences need at least 2 rates".into(),
        ));
    }
    if let Some(bad) = rates.iter().find(|r| !(**r > 0.0)) {
        return Err(Error::Domain(format!(
            "log-differences need positive rates, got {bad}"
        )));
    }
    Ok(rates.windows(2).map(|w| (w[1] / w[0]).ln()).collect())
}

/// Sample standard deviation of monthly log-differences scaled by sqrt(12).
pub fn annualized_volatility(logdiffs: &[f64]) -> Result<f64> {
    if logdiffs.len() < 2 {
        return Err(Error::InsufficientData(
            "volatility needs at least 2 log-differences".into(),
        ));
    }
    Ok(sample_std(logdiffs) * MONTHS_PER_YEAR.sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct VolatilityProfile {
    pub years: Vec<i32>,
    /// Annualized volatility of each calendar year's log-differences.
    pub yearly_vols: Vec<f64>,
    /// `ln(vol[y+1] / vol[y])`.
    pub yearly_vol_logdiffs: Vec<f64>,
    /// Annualized volatility over every log-difference ending in a full year.
    pub window_vol: f64,
    /// Sample standard deviation of `yearly_vol_logdiffs`, not annualized.
    pub vol_of_vol: f64,
}

/// Log-differences grouped by the calendar year of their endpoint, restricted
/// to the series' full years.
fn logdiffs_by_full_year(series: &MonthlySeries) -> Result<Vec<(i32, Vec<f64>)>> {
    let ld = log_differences(series.rates())?;
    let years = series.full_years();
    let start = series.start();
    let mut out: Vec<(i32, Vec<f64>)> = years.iter().map(|y| (*y, Vec::new())).collect();
    for (i, x) in ld.iter().enumerate() {
        let endpoint = start.add_months(i as i64 + 1);
        if let Some((_, bucket)) = out.iter_mut().find(|(y, _)| *y == endpoint.year) {
            bucket.push(*x);
        }
    }
    Ok(out)
}

pub fn volatility_profile(series: &MonthlySeries) -> Result<VolatilityProfile> {
    if series.full_years().len() < 2 {
        return Err(Error::InsufficientData(
            "volatility profile needs at least 2 full calendar years".into(),
        ));
    }
    let grouped = logdiffs_by_full_year(series)?;
    let mut years = Vec::with_capacity(grouped.len());
    let mut yearly_vols = Vec::with_capacity(grouped.len());
    let mut window = Vec::new();
    for (year, ld) in &grouped {
        years.push(*year);
        yearly_vols.push(annualized_volatility(ld)?);
        window.extend_from_slice(ld);
    }
    let yearly_vol_logdiffs = if yearly_vols.iter().all(|v| *v > 0.0) {
        log_differences(&yearly_vols)?
    } else {
        return Err(Error::DegenerateVariance(
            "a calendar year has zero volatility".into(),
        ));
    };
    let vol_of_vol = if yearly_vol_logdiffs.len() >= 2 {
        sample_std(&yearly_vol_logdiffs)
    } else {
        0.0
    };
    Ok(VolatilityProfile {
        years,
        yearly_vols,
        yearly_vol_logdiffs,
        window_vol: annualized_volatility(&window)?,
        vol_of_vol,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GrowthMethod {
    /// Geometric mean of year-over-year ratios of calendar-year mean rates.
    GeometricMeanOfYearlyMeans,
    /// Fewer than two full years; growth taken as zero.
    Unavailable,
}

impl GrowthMethod {
    pub fn name(self) -> &'static str {
        match self {
            GrowthMethod::GeometricMeanOfYearlyMeans => "geometric_mean_yearly_means",
            GrowthMethod::Unavailable => "unavailable",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrowthEstimate {
    pub annual_growth: f64,
    pub method: GrowthMethod,
}

/// Mean crash rate of each full calendar year.
pub fn yearly_mean_rates(series: &MonthlySeries) -> Vec<(i32, f64)> {
    series
        .full_years()
        .into_iter()
        .map(|y| {
            let rates: Vec<f64> = series
                .observations()
                .iter()
                .zip(series.rates())
                .filter(|(o, _)| o.year == y)
                .map(|(_, r)| *r)
                .collect();
            (y, mean(&rates))
        })
        .collect()
}

pub fn annual_growth_rate(series: &MonthlySeries) -> Result<GrowthEstimate> {
    let means = yearly_mean_rates(series);
    if means.len() < 2 {
        return Err(Error::InsufficientData(
            "growth needs at least 2 full calendar years".into(),
        ));
    }
    // geometric mean of consecutive ratios telescopes to the endpoint ratio
    let n = (means.len() - 1) as f64;
    let log_sum: f64 = means.windows(2).map(|w| (w[1].1 / w[0].1).ln()).sum();
    Ok(GrowthEstimate {
        annual_growth: (log_sum / n).exp() - 1.0,
        method: GrowthMethod::GeometricMeanOfYearlyMeans,
    })
}

/// Per-calendar-month deviations `r_m / mean(r over year) - 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct SeasonProfile {
    pub years: Vec<i32>,
    /// One row of twelve deviations per year.
    pub deviations: Vec<[f64; 12]>,
    pub mean: [f64; 12],
    /// Sample standard deviation across years (0 with a single year).
    pub std: [f64; 12],
}

pub fn season_profile(series: &MonthlySeries) -> Result<SeasonProfile> {
    let years = series.full_years();
    if years.is_empty() {
        return Err(Error::InsufficientData(
            "season profile needs at least 1 full calendar year".into(),
        ));
    }
    let mut deviations = Vec::with_capacity(years.len());
    for &y in &years {
        let mut row = [0.0; 12];
        for (o, r) in series.observations().iter().zip(series.rates()) {
            if o.year == y {
                row[o.month as usize - 1] = *r;
            }
        }
        let avg = mean(&row);
        for r in row.iter_mut() {
            *r = *r / avg - 1.0;
        }
        deviations.push(row);
    }
    let mut mean_dev = [0.0; 12];
    let mut std_dev = [0.0; 12];
    for m in 0..12 {
        let col: Vec<f64> = deviations.iter().map(|row| row[m]).collect();
        mean_dev[m] = mean(&col);
        std_dev[m] = if col.len() > 1 { sample_std(&col) } else { 0.0 };
    }
    Ok(SeasonProfile {
        years,
        deviations,
        mean: mean_dev,
        std: std_dev,
    })
}

/// Months (1-12) whose mean deviation reaches `threshold` in magnitude and
/// whose deviation has the same sign in every year.
pub fn detect_spike_months(profile: &SeasonProfile, threshold: f64) -> Vec<u32> {
    (0..12)
        .filter(|&m| {
            let avg = profile.mean[m];
            let consistent = profile
                .deviations
                .iter()
                .all(|row| row[m] != 0.0 && row[m].signum() == avg.signum());
            avg.abs() >= threshold && consistent
        })
        .map(|m| m as u32 + 1)
        .collect()
}

/// Pearson correlation between yearly mean rates and yearly volatilities.
pub fn rate_vol_correlation(series: &MonthlySeries) -> Result<f64> {
    if series.full_years().len() < 3 {
        return Err(Error::InsufficientData(
            "rate/volatility correlation needs at least 3 full calendar years".into(),
        ));
    }
    let profile = volatility_profile(series)?;
    let means: Vec<f64> = yearly_mean_rates(series).into_iter().map(|(_, m)| m).collect();
    pearson(&means, &profile.yearly_vols)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    /// `edges.len() == counts.len() + 1`
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

impl Histogram {
    /// Equal-width bins; the bin count follows Sturges' rule when `bins` is `None`.
    pub fn new(xs: &[f64], bins: Option<usize>) -> Result<Self> {
        if xs.is_empty() {
            return Err(Error::InsufficientData("histogram of empty sample".into()));
        }
        let bins = bins
            .unwrap_or_else(|| (xs.len() as f64).log2().ceil() as usize + 1)
            .max(1);
        let lo = xs.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
        let edges: Vec<f64> = (0..=bins).map(|i| lo + width * i as f64).collect();
        let mut counts = vec![0; bins];
        for x in xs {
            let idx = (((x - lo) / width) as usize).min(bins - 1);
            counts[idx] += 1;
        }
        Ok(Self { edges, counts })
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("bin_low,bin_high,count\n");
        for (i, c) in self.counts.iter().enumerate() {
            out.push_str(&format!(
                "{},{},{}\n",
                crate::format::sig10(self.edges[i]),
                crate::format::sig10(self.edges[i + 1]),
                c
            ));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JarqueBera {
    pub statistic: f64,
    pub p_value: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
}

/// Jarque-Bera normality test. The statistic is chi-squared with two degrees
/// of freedom under normality, so the p-value is `exp(-JB / 2)`.
pub fn jarque_bera(xs: &[f64]) -> Result<JarqueBera> {
    if xs.len() < 3 {
        return Err(Error::InsufficientData(
            "Jarque-Bera needs at least 3 values".into(),
        ));
    }
    let n = xs.len() as f64;
    let m = mean(xs);
    let m2 = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
    // log-differences of a constant series are zero up to rounding
    if m2.sqrt() < 1e-12 {
        return Err(Error::DegenerateVariance(
            "sample has zero variance".into(),
        ));
    }
    let m3 = xs.iter().map(|x| (x - m).powi(3)).sum::<f64>() / n;
    let m4 = xs.iter().map(|x| (x - m).powi(4)).sum::<f64>() / n;
    let skewness = m3 / m2.powf(1.5);
    let excess_kurtosis = m4 / (m2 * m2) - 3.0;
    let statistic = n / 6.0 * (skewness.powi(2) + excess_kurtosis.powi(2) / 4.0);
    Ok(JarqueBera {
        statistic,
        p_value: (-statistic / 2.0).exp(),
        skewness,
        excess_kurtosis,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistributionDiagnostics {
    pub rate_histogram: Histogram,
    pub logdiff_histogram: Histogram,
    /// Normality test on the log-differences.
    pub jarque_bera: JarqueBera,
}

pub const MIN_DIAGNOSTIC_OBSERVATIONS: usize = 24;

pub fn distribution_diagnostics(series: &MonthlySeries) -> Result<DistributionDiagnostics> {
    diagnostics_from_rates(series.rates())
}

pub fn diagnostics_from_rates(rates: &[f64]) -> Result<DistributionDiagnostics> {
    if rates.len() < MIN_DIAGNOSTIC_OBSERVATIONS {
        return Err(Error::InsufficientData(format!(
            "diagnostics need at least {MIN_DIAGNOSTIC_OBSERVATIONS} observations, got {}",
            rates.len()
        )));
    }
    let ld = log_differences(rates)?;
    Ok(DistributionDiagnostics {
        rate_histogram: Histogram::new(rates, None)?,
        jarque_bera: jarque_bera(&ld)?,
        logdiff_histogram: Histogram::new(&ld, None)?,
    })
}
