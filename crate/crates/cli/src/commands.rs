use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use crashvol_core::arima_garch::{fit_baseline, FittedBaseline};
use crashvol_core::calibrate::{calibrate_heston, calibrate_vasicek, history_tail, CalibrationConfig};
use crashvol_core::engine::{
    forecast_quantiles, simulate_heston, simulate_vasicek, ForecastQuantiles, HestonParams, VasicekParams,
};
use crashvol_core::evaluation::{
    backtest as run_backtest, effective_orders, interval_coverage, yearly_error_report, BacktestConfig, ModelKind,
    Window,
};
use crashvol_core::format::{sig10, KvFile};
use crashvol_core::stats::{
    annual_growth_rate, detect_spike_months, distribution_diagnostics, rate_vol_correlation, season_profile,
    volatility_profile, MIN_DIAGNOSTIC_OBSERVATIONS,
};
use crashvol_core::{parse_monthly_csv, MonthlySeries, RateSeries};

use crate::{BacktestArgs, DiagnoseArgs, EvaluateArgs, FitArgs, ForecastArgs, ModelArgs, SimulationArgs};

fn load_series(paths: &[PathBuf]) -> Result<MonthlySeries> {
    let mut merged: Option<MonthlySeries> = None;
    for path in paths {
        let series = parse_monthly_csv(path).with_context(|| format!("reading {}", path.display()))?;
        merged = Some(match merged {
            None => series,
            Some(m) => m
                .merge(&series)
                .with_context(|| format!("merging {}", path.display()))?,
        });
    }
    merged.context("no input files")
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn write_or_print(path: Option<&Path>, contents: &str) -> Result<()> {
    match path {
        Some(p) => write_file(p, contents),
        None => {
            print!("{contents}");
            Ok(())
        }
    }
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn calibration(model: &ModelArgs) -> CalibrationConfig {
    CalibrationConfig {
        rho: model.rho,
        spike_threshold: model.spike_threshold,
        scheme: model.scheme,
        c1: model.c1,
        kappa: model.kappa,
        xi: model.xi,
        mu: model.mu,
    }
}

fn require_seed(sim: &SimulationArgs) -> Result<u64> {
    sim.seed
        .ok_or_else(|| crashvol_core::Error::Validation("stochastic models need --seed".into()).into())
}

pub fn diagnose(args: &DiagnoseArgs) -> Result<()> {
    let series = load_series(&args.input.inputs)?;
    ensure_dir(&args.out)?;

    let vol = volatility_profile(&series)?;
    let mut text = String::from("statistic,value\n");
    for (year, v) in vol.years.iter().zip(&vol.yearly_vols) {
        text.push_str(&format!("yearly_vol.{year},{}\n", sig10(*v)));
    }
    for (year, d) in vol.years.iter().skip(1).zip(&vol.yearly_vol_logdiffs) {
        text.push_str(&format!("vol_logdiff.{year},{}\n", sig10(*d)));
    }
    text.push_str(&format!("window_vol,{}\n", sig10(vol.window_vol)));
    text.push_str(&format!("vol_of_vol,{}\n", sig10(vol.vol_of_vol)));
    if vol.years.len() >= 3 {
        text.push_str(&format!("rate_vol_correlation,{}\n", sig10(rate_vol_correlation(&series)?)));
    }
    write_file(&args.out.join("volatility.csv"), &text)?;

    let growth = annual_growth_rate(&series)?;
    write_file(
        &args.out.join("growth.csv"),
        &format!(
            "statistic,value\ngrowth,{}\nmethod,{}\n",
            sig10(growth.annual_growth),
            growth.method.name()
        ),
    )?;

    let season = season_profile(&series)?;
    let spikes = detect_spike_months(&season, args.spike_threshold);
    let mut text = String::from("month,mean,std,spike\n");
    for m in 0..12 {
        text.push_str(&format!(
            "{},{},{},{}\n",
            m + 1,
            sig10(season.mean[m]),
            sig10(season.std[m]),
            spikes.contains(&(m as u32 + 1))
        ));
    }
    write_file(&args.out.join("season.csv"), &text)?;

    if series.len() >= MIN_DIAGNOSTIC_OBSERVATIONS {
        let diag = distribution_diagnostics(&series)?;
        let jb = diag.jarque_bera;
        write_file(
            &args.out.join("distribution.csv"),
            &format!(
                "statistic,value\njarque_bera,{}\np_value,{}\nskewness,{}\nexcess_kurtosis,{}\n",
                sig10(jb.statistic),
                sig10(jb.p_value),
                sig10(jb.skewness),
                sig10(jb.excess_kurtosis)
            ),
        )?;
        write_file(&args.out.join("rate_histogram.csv"), &diag.rate_histogram.to_csv_string())?;
        write_file(&args.out.join("logdiff_histogram.csv"), &diag.logdiff_histogram.to_csv_string())?;
    } else {
        log::warn!(
            "skipping distribution diagnostics: {} observations, need {MIN_DIAGNOSTIC_OBSERVATIONS}",
            series.len()
        );
    }
    Ok(())
}

pub fn fit(args: &FitArgs) -> Result<()> {
    let series = load_series(&args.input.inputs)?;
    let train = Window::new(args.train_start, args.train_end)?;
    let forecast_start = args.test_start.unwrap_or_else(|| train.end.next());
    let cfg = calibration(&args.model);
    let kv = match args.model.model {
        ModelKind::Heston => {
            let (params, _) = calibrate_heston(&series, train.start, train.end, forecast_start, &cfg)?;
            let mut kv = params.to_kv();
            kv.push_list("history_tail", &history_tail(&series, train.end)?);
            kv
        }
        ModelKind::Vasicek => {
            let (params, _) = calibrate_vasicek(&series, train.start, train.end, forecast_start, &cfg)?;
            let mut kv = params.to_kv();
            kv.push_list("history_tail", &history_tail(&series, train.end)?);
            kv
        }
        kind @ (ModelKind::Arima | ModelKind::ArimaGarch) => {
            if forecast_start != train.end.next() {
                bail!(crashvol_core::Error::Range(format!(
                    "ARIMA forecasts start right after the training window ({}), not {forecast_start}",
                    train.end.next()
                )));
            }
            let orders = effective_orders(kind, args.model.orders)?;
            let rates = series.slice_window(train.start, train.end)?.rate_series();
            fit_baseline(&rates, orders, args.model.log_levels)?.to_kv()
        }
    };
    write_or_print(args.out.as_deref(), &kv.to_text())
}

fn simulate_from_file(
    kv: &KvFile,
    args: &ForecastArgs,
) -> Result<ForecastQuantiles> {
    let levels = &args.sim.levels.0;
    let tail = kv.list("history_tail")?;
    match kv.get("model") {
        Some("heston") => {
            let mut params = HestonParams::from_kv(kv)?;
            if let Some(s) = args.scheme {
                params.scheme = s;
            }
            let seed = require_seed(&args.sim)?;
            let sim = simulate_heston(&params, args.horizon, args.sim.n_paths, seed, &tail)?;
            Ok(forecast_quantiles(&sim, levels)?)
        }
        Some("vasicek") => {
            let mut params = VasicekParams::from_kv(kv)?;
            if let Some(s) = args.scheme {
                params.scheme = s;
            }
            let seed = require_seed(&args.sim)?;
            let sim = simulate_vasicek(&params, args.horizon, args.sim.n_paths, seed, &tail)?;
            Ok(forecast_quantiles(&sim, levels)?)
        }
        Some("arima") | Some("arima-garch") => {
            let fitted = FittedBaseline::from_kv(kv)?;
            Ok(fitted.forecast_quantiles(args.horizon, levels)?)
        }
        other => Err(crashvol_core::Error::Validation(format!(
            "parameter file has unknown model {other:?}"
        ))
        .into()),
    }
}

pub fn forecast(args: &ForecastArgs) -> Result<()> {
    let text = fs::read_to_string(&args.params).with_context(|| format!("reading {}", args.params.display()))?;
    let kv = KvFile::parse(&text).with_context(|| format!("parsing {}", args.params.display()))?;
    let quantiles = simulate_from_file(&kv, args)?;
    write_or_print(args.out.as_deref(), &quantiles.to_csv_string())
}

/// Coverage rows for each symmetric level pair `(l, 1 - l)` in the forecast.
fn coverage_csv(quantiles: &ForecastQuantiles, observed: &RateSeries) -> Result<String> {
    let mut text = String::from("low,high,outside,total,fraction_outside\n");
    for &low in quantiles.levels.iter().filter(|l| **l < 0.5) {
        let high = 1.0 - low;
        if quantiles.band(high).is_none() {
            continue;
        }
        let c = interval_coverage(quantiles, observed, low, high)?;
        text.push_str(&format!(
            "{},{},{},{},{}\n",
            sig10(low),
            sig10(high),
            c.outside,
            c.total,
            sig10(c.fraction_outside())
        ));
    }
    Ok(text)
}

fn observed_for(series: &MonthlySeries, quantiles: &ForecastQuantiles) -> Result<RateSeries> {
    let end = quantiles.start.add_months(quantiles.horizon() as i64 - 1);
    Ok(series.rate_series().window(quantiles.start, end)?)
}

pub fn evaluate(args: &EvaluateArgs) -> Result<()> {
    let text = fs::read_to_string(&args.forecast).with_context(|| format!("reading {}", args.forecast.display()))?;
    let quantiles =
        ForecastQuantiles::parse_csv(&text).with_context(|| format!("parsing {}", args.forecast.display()))?;
    let series = load_series(&args.input.inputs)?;
    let observed = observed_for(&series, &quantiles)?;
    let report = yearly_error_report(&quantiles.median_series(), &observed, &args.model_id)?;
    ensure_dir(&args.out)?;
    write_file(&args.out.join("report.csv"), &report.to_csv_string())?;
    write_file(&args.out.join("coverage.csv"), &coverage_csv(&quantiles, &observed)?)?;
    Ok(())
}

pub fn backtest(args: &BacktestArgs) -> Result<()> {
    let series = load_series(&args.input.inputs)?;
    let train = Window::new(args.train_start, args.train_end)?;
    let test = Window::new(args.test_start, args.test_end)?;
    let model = args.model.model;
    let seed = if model.is_stochastic() {
        require_seed(&args.sim)?
    } else {
        args.sim.seed.unwrap_or(0)
    };
    let cfg = BacktestConfig {
        model,
        calibration: calibration(&args.model),
        orders: args.model.orders,
        log_levels: args.model.log_levels,
        n_paths: args.sim.n_paths,
        levels: args.sim.levels.0.clone(),
    };
    let outcome = run_backtest(&series, train, test, &cfg, seed)?;
    let observed = observed_for(&series, &outcome.quantiles)?;
    ensure_dir(&args.out)?;
    write_file(&args.out.join("params.txt"), &outcome.parameters.to_text())?;
    write_file(&args.out.join("forecast.csv"), &outcome.quantiles.to_csv_string())?;
    write_file(&args.out.join("report.csv"), &outcome.report.to_csv_string())?;
    write_file(&args.out.join("coverage.csv"), &coverage_csv(&outcome.quantiles, &observed)?)?;
    log::info!(
        "{model} backtest {train} -> {test}: overall MAPE {:.2}%",
        outcome.report.overall.mape * 100.0
    );
    Ok(())
}
