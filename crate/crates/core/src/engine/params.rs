use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::format::KvFile;
use crate::series::YearMonth;

/// How a negative Euler update is mapped back onto `[0, inf)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BoundaryScheme {
    /// `|x|`
    #[default]
    Reflect,
    /// `max(x, 0)`
    Truncate,
}

impl BoundaryScheme {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            BoundaryScheme::Reflect => x.abs(),
            BoundaryScheme::Truncate => x.max(0.0),
        }
    }
}

impl fmt::Display for BoundaryScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BoundaryScheme::Reflect => "reflect",
            BoundaryScheme::Truncate => "truncate",
        })
    }
}

impl FromStr for BoundaryScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "reflect" => Ok(BoundaryScheme::Reflect),
            "truncate" => Ok(BoundaryScheme::Truncate),
            other => Err(Error::Validation(format!(
                "scheme must be reflect or truncate, got {other:?}"
            ))),
        }
    }
}

/// Calendar-month spike: a fresh `N(mean, std)` draw scaled by the prevailing
/// yearly average rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpikeSpec {
    pub month: u32,
    pub mean: f64,
    pub std: f64,
}

impl SpikeSpec {
    pub fn new(month: u32, mean: f64, std: f64) -> Result<Self> {
        let spec = Self { month, mean, std };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=12).contains(&self.month) {
            return Err(Error::Validation(format!(
                "spike month must be in 1..=12, got {}",
                self.month
            )));
        }
        if !(self.std >= 0.0) || !self.mean.is_finite() {
            return Err(Error::Validation(format!(
                "spike for month {} needs finite mean and std >= 0",
                self.month
            )));
        }
        Ok(())
    }
}

pub const DEFAULT_DT: f64 = 1.0 / 12.0;

/// Amended Heston parameters. `v0` and `theta` are variances (per year);
/// files and constructors take them in volatility units and square them.
#[derive(Debug, Clone, PartialEq)]
pub struct HestonParams {
    pub c1: f64,
    pub mu: f64,
    pub v0: f64,
    pub theta: f64,
    pub kappa: f64,
    pub xi: f64,
    pub rho: f64,
    pub spikes: Vec<SpikeSpec>,
    pub start: YearMonth,
    pub dt: f64,
    pub scheme: BoundaryScheme,
}

impl HestonParams {
    #[allow(clippy::too_many_arguments)]
    pub fn from_vol_units(
        c1: f64,
        mu: f64,
        v0_vol: f64,
        theta_vol: f64,
        kappa: f64,
        xi: f64,
        rho: f64,
        spikes: Vec<SpikeSpec>,
        start: YearMonth,
    ) -> Result<Self> {
        let params = Self {
            c1,
            mu,
            v0: v0_vol * v0_vol,
            theta: theta_vol * theta_vol,
            kappa,
            xi,
            rho,
            spikes,
            start,
            dt: DEFAULT_DT,
            scheme: BoundaryScheme::Reflect,
        };
        params.validate()?;
        params.warn_if_feller_violated();
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        let mut violated = Vec::new();
        if !(self.c1 > 0.0 && self.c1.is_finite()) {
            violated.push(format!("c1 > 0 (got {})", self.c1));
        }
        if !self.mu.is_finite() {
            violated.push(format!("mu finite (got {})", self.mu));
        }
        for (name, v) in [
            ("v0", self.v0),
            ("theta", self.theta),
            ("kappa", self.kappa),
            ("xi", self.xi),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                violated.push(format!("{name} >= 0 (got {v})"));
            }
        }
        if !(-1.0..=1.0).contains(&self.rho) {
            violated.push(format!("-1 <= rho <= 1 (got {})", self.rho));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            violated.push(format!("dt > 0 (got {})", self.dt));
        }
        for s in &self.spikes {
            if let Err(e) = s.validate() {
                violated.push(e.to_string());
            }
        }
        if violated.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(format!(
                "invalid Heston parameters: {}",
                violated.join("; ")
            )))
        }
    }

    /// `kappa > xi^2 / (2 theta)` with `theta` as a variance.
    pub fn feller_satisfied(&self) -> bool {
        if self.theta <= 0.0 {
            return self.xi == 0.0;
        }
        self.kappa > self.xi * self.xi / (2.0 * self.theta)
    }

    pub fn warn_if_feller_violated(&self) {
        if !self.feller_satisfied() {
            log::warn!(
                "Feller condition violated: kappa = {} <= xi^2/(2 theta) = {}",
                self.kappa,
                self.xi * self.xi / (2.0 * self.theta)
            );
        }
    }

    pub fn to_kv(&self) -> KvFile {
        let mut kv = KvFile::new();
        kv.push("model", "heston");
        kv.push_f64("c1", self.c1);
        kv.push_f64("mu", self.mu);
        kv.push_f64("v0_vol", self.v0.sqrt());
        kv.push_f64("theta_vol", self.theta.sqrt());
        kv.push_f64("kappa", self.kappa);
        kv.push_f64("xi", self.xi);
        kv.push_f64("rho", self.rho);
        kv.push_f64("dt", self.dt);
        push_common(&mut kv, &self.spikes, self.scheme, self.start);
        kv.push("feller_satisfied", self.feller_satisfied().to_string());
        kv
    }

    pub fn from_kv(kv: &KvFile) -> Result<Self> {
        let v0_vol = kv.f64("v0_vol")?;
        let theta_vol = kv.f64("theta_vol")?;
        let params = Self {
            c1: kv.f64("c1")?,
            mu: kv.f64("mu")?,
            v0: v0_vol * v0_vol,
            theta: theta_vol * theta_vol,
            kappa: kv.f64("kappa")?,
            xi: kv.f64("xi")?,
            rho: kv.f64("rho")?,
            spikes: read_spikes(kv)?,
            start: read_start(kv)?,
            dt: kv.f64_or("dt", DEFAULT_DT)?,
            scheme: read_scheme(kv)?,
        };
        params.validate()?;
        params.warn_if_feller_violated();
        Ok(params)
    }
}

/// Amended Vasicek (Ornstein-Uhlenbeck) baseline:
/// `dC = kappa (theta(t) - C) dt + sigma C1 dW`, `theta(t) = C1 (1 + mu)^(t/12)`,
/// with the same spike mechanism and boundary scheme as the Heston engine.
#[derive(Debug, Clone, PartialEq)]
pub struct VasicekParams {
    pub c0: f64,
    pub c1: f64,
    pub mu: f64,
    pub kappa: f64,
    pub sigma: f64,
    pub spikes: Vec<SpikeSpec>,
    pub start: YearMonth,
    pub dt: f64,
    pub scheme: BoundaryScheme,
}

impl VasicekParams {
    pub fn validate(&self) -> Result<()> {
        let mut violated = Vec::new();
        if !(self.c0 >= 0.0 && self.c0.is_finite()) {
            violated.push(format!("c0 >= 0 (got {})", self.c0));
        }
        if !(self.c1 > 0.0 && self.c1.is_finite()) {
            violated.push(format!("c1 > 0 (got {})", self.c1));
        }
        if !(self.mu > -1.0 && self.mu.is_finite()) {
            violated.push(format!("mu > -1 (got {})", self.mu));
        }
        if !(self.kappa >= 0.0 && self.kappa.is_finite()) {
            violated.push(format!("kappa >= 0 (got {})", self.kappa));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            violated.push(format!("sigma >= 0 (got {})", self.sigma));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            violated.push(format!("dt > 0 (got {})", self.dt));
        }
        for s in &self.spikes {
            if let Err(e) = s.validate() {
                violated.push(e.to_string());
            }
        }
        if violated.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(format!(
                "invalid Vasicek parameters: {}",
                violated.join("; ")
            )))
        }
    }

    /// Mean-reversion target `t` steps after the start.
    pub fn target(&self, step: usize) -> f64 {
        self.c1 * (1.0 + self.mu).powf(step as f64 * self.dt)
    }

    pub fn to_kv(&self) -> KvFile {
        let mut kv = KvFile::new();
        kv.push("model", "vasicek");
        kv.push_f64("c0", self.c0);
        kv.push_f64("c1", self.c1);
        kv.push_f64("mu", self.mu);
        kv.push_f64("kappa", self.kappa);
        kv.push_f64("sigma", self.sigma);
        kv.push_f64("dt", self.dt);
        push_common(&mut kv, &self.spikes, self.scheme, self.start);
        kv
    }

    pub fn from_kv(kv: &KvFile) -> Result<Self> {
        let c1 = kv.f64("c1")?;
        let params = Self {
            c0: kv.f64_or("c0", c1)?,
            c1,
            mu: kv.f64("mu")?,
            kappa: kv.f64("kappa")?,
            sigma: kv.f64("sigma")?,
            spikes: read_spikes(kv)?,
            start: read_start(kv)?,
            dt: kv.f64_or("dt", DEFAULT_DT)?,
            scheme: read_scheme(kv)?,
        };
        params.validate()?;
        Ok(params)
    }
}

fn push_common(kv: &mut KvFile, spikes: &[SpikeSpec], scheme: BoundaryScheme, start: YearMonth) {
    let mut sorted = spikes.to_vec();
    sorted.sort_by_key(|s| s.month);
    for s in sorted {
        kv.push_f64(format!("spike.{}.mean", s.month), s.mean);
        kv.push_f64(format!("spike.{}.std", s.month), s.std);
    }
    kv.push("scheme", scheme.to_string());
    kv.push("start_year", start.year.to_string());
    kv.push("start_month", start.month.to_string());
}

fn read_spikes(kv: &KvFile) -> Result<Vec<SpikeSpec>> {
    let mut months: Vec<u32> = Vec::new();
    for key in kv.keys() {
        if let Some(rest) = key.strip_prefix("spike.") {
            let (m, field) = rest.split_once('.').ok_or_else(|| {
                Error::Validation(format!("malformed spike key `{key}`"))
            })?;
            if field != "mean" && field != "std" {
                return Err(Error::Validation(format!("unknown spike field in `{key}`")));
            }
            let month: u32 = m
                .parse()
                .map_err(|_| Error::Validation(format!("malformed spike month in `{key}`")))?;
            if !months.contains(&month) {
                months.push(month);
            }
        }
    }
    months.sort_unstable();
    months
        .into_iter()
        .map(|m| {
            SpikeSpec::new(
                m,
                kv.f64(&format!("spike.{m}.mean"))?,
                kv.f64(&format!("spike.{m}.std"))?,
            )
        })
        .collect()
}

fn read_start(kv: &KvFile) -> Result<YearMonth> {
    let year: i32 = kv
        .require("start_year")?
        .parse()
        .map_err(|_| Error::Validation("invalid start_year".into()))?;
    YearMonth::new(year, kv.usize("start_month")? as u32)
}

fn read_scheme(kv: &KvFile) -> Result<BoundaryScheme> {
    kv.get("scheme").map_or(Ok(BoundaryScheme::Reflect), str::parse)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference_spikes() -> Vec<SpikeSpec> {
        vec![
            SpikeSpec::new(1, -0.173, 0.125).unwrap(),
            SpikeSpec::new(7, 0.334, 0.056).unwrap(),
            SpikeSpec::new(8, -0.121, 0.041).unwrap(),
        ]
    }

    #[test]
    fn heston_kv_roundtrip() {
        let p = HestonParams::from_vol_units(
            0.00498,
            0.1361,
            0.6333,
            0.6333,
            0.0545,
            0.2626,
            -0.5936,
            reference_spikes(),
            YearMonth::new(2015, 1).unwrap(),
        )
        .unwrap();
        let text = p.to_kv().to_text();
        assert!(text.contains("spike.7.mean = 0.3340000000"));
        let back = HestonParams::from_kv(&KvFile::parse(&text).unwrap()).unwrap();
        assert_eq!(back.spikes, p.spikes);
        assert!((back.theta - p.theta).abs() < 1e-12);
        assert_eq!(back.start, p.start);
    }

    #[test]
    fn invalid_params_list_every_violation() {
        let mut p = HestonParams::from_vol_units(
            0.005,
            0.1,
            0.5,
            0.5,
            1.0,
            0.1,
            0.0,
            vec![],
            YearMonth::new(2015, 1).unwrap(),
        )
        .unwrap();
        p.rho = 1.5;
        p.c1 = 0.0;
        let msg = p.validate().unwrap_err().to_string();
        assert!(msg.contains("rho") && msg.contains("c1"), "{msg}");
    }

    #[test]
    fn feller_flag_uses_variance_units() {
        let p = HestonParams::from_vol_units(
            0.005,
            0.1,
            0.6333,
            0.6333,
            0.0545,
            0.2626,
            0.0,
            vec![],
            YearMonth::new(2015, 1).unwrap(),
        )
        .unwrap();
        // 0.2626^2 / (2 * 0.6333^2) = 0.086 > 0.0545
        assert!(!p.feller_satisfied());
    }

    #[test]
    fn scheme_parsing() {
        assert_eq!("truncate".parse::<BoundaryScheme>().unwrap(), BoundaryScheme::Truncate);
        assert!("clip".parse::<BoundaryScheme>().is_err());
        assert_eq!(BoundaryScheme::Reflect.apply(-2.0), 2.0);
        assert_eq!(BoundaryScheme::Truncate.apply(-2.0), 0.0);
    }

    #[test]
    fn spike_validation() {
        assert!(SpikeSpec::new(13, 0.1, 0.1).is_err());
        assert!(SpikeSpec::new(1, 0.1, -0.1).is_err());
    }
}
