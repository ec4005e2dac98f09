use crate::error::{Error, Result};
use crate::format::sig10;
use crate::series::{RateSeries, YearMonth};

use super::SimulationResult;

/// Per-month cross-path median and quantile bands.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastQuantiles {
    pub start: YearMonth,
    pub levels: Vec<f64>,
    pub median: Vec<f64>,
    /// `bands[k][t]` is the `levels[k]` quantile at month `t`.
    pub bands: Vec<Vec<f64>>,
}

/// Linear-interpolation quantile (Hyndman-Fan type 7) of sorted data.
pub fn quantile_sorted(sorted: &[f64], level: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * level;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub(crate) fn validate_levels(levels: &[f64]) -> Result<()> {
    if levels.iter().any(|l| !(*l > 0.0 && *l < 1.0)) {
        return Err(Error::Validation(format!(
            "quantile levels must lie in (0, 1), got {levels:?}"
        )));
    }
    if levels.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Validation(format!(
            "quantile levels must be sorted and unique, got {levels:?}"
        )));
    }
    Ok(())
}

pub fn forecast_quantiles(result: &SimulationResult, levels: &[f64]) -> Result<ForecastQuantiles> {
    validate_levels(levels)?;
    if result.n_paths() == 0 || result.horizon() == 0 {
        return Err(Error::InsufficientData("simulation result is empty".into()));
    }
    let horizon = result.horizon();
    let mut median = Vec::with_capacity(horizon);
    let mut bands = vec![Vec::with_capacity(horizon); levels.len()];
    for t in 0..horizon {
        let mut col = result.month_column(t);
        col.sort_by(f64::total_cmp);
        median.push(quantile_sorted(&col, 0.5));
        for (k, level) in levels.iter().enumerate() {
            bands[k].push(quantile_sorted(&col, *level));
        }
    }
    Ok(ForecastQuantiles {
        start: result.start,
        levels: levels.to_vec(),
        median,
        bands,
    })
}

/// Column name for a level: `q05`, `q25`, `q975` for 0.975 etc.
pub fn level_column(level: f64) -> String {
    let pct = level * 100.0;
    if (pct - pct.round()).abs() < 1e-9 {
        format!("q{:02}", pct.round() as u32)
    } else {
        let digits = format!("{pct}").replace('.', "");
        format!("q{digits}")
    }
}

impl ForecastQuantiles {
    pub fn horizon(&self) -> usize {
        self.median.len()
    }

    pub fn median_series(&self) -> RateSeries {
        RateSeries::new(self.start, self.median.clone())
    }

    /// The band for `level`; 0.5 maps to the median.
    pub fn band(&self, level: f64) -> Option<&[f64]> {
        if (level - 0.5).abs() < 1e-12 {
            return Some(&self.median);
        }
        self.levels
            .iter()
            .position(|l| (l - level).abs() < 1e-12)
            .map(|k| self.bands[k].as_slice())
    }

    /// `year,month,median,q..` with values at 10 significant digits.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("year,month,median");
        for l in &self.levels {
            out.push(',');
            out.push_str(&level_column(*l));
        }
        out.push('\n');
        for t in 0..self.horizon() {
            let d = self.start.add_months(t as i64);
            out.push_str(&format!("{},{},{}", d.year, d.month, sig10(self.median[t])));
            for band in &self.bands {
                out.push(',');
                out.push_str(&sig10(band[t]));
            }
            out.push('\n');
        }
        out
    }

    pub fn parse_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or_else(|| Error::Parse {
            line: 1,
            message: "empty forecast file".into(),
        })?;
        let cols: Vec<&str> = header.split(',').map(str::trim).collect();
        if cols.len() < 3 || cols[..3] != ["year", "month", "median"] {
            return Err(Error::Parse {
                line: 1,
                message: "expected header starting with `year,month,median`".into(),
            });
        }
        let mut levels = Vec::new();
        for c in &cols[3..] {
            let digits = c.strip_prefix('q').ok_or_else(|| Error::Parse {
                line: 1,
                message: format!("unexpected column {c:?}"),
            })?;
            let value: f64 = format!("0.{digits}").parse().map_err(|_| Error::Parse {
                line: 1,
                message: format!("unexpected column {c:?}"),
            })?;
            levels.push(value);
        }
        validate_levels(&levels)?;
        let mut start = None;
        let mut median = Vec::new();
        let mut bands = vec![Vec::new(); levels.len()];
        for (i, line) in lines {
            let lineno = i + 1;
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != cols.len() {
                return Err(Error::Parse {
                    line: lineno,
                    message: format!("expected {} fields, got {}", cols.len(), fields.len()),
                });
            }
            let num = |s: &str| -> Result<f64> {
                s.parse().map_err(|_| Error::Parse {
                    line: lineno,
                    message: format!("invalid number {s:?}"),
                })
            };
            let year = num(fields[0])? as i32;
            let month = num(fields[1])? as u32;
            let date = YearMonth::new(year, month).map_err(|e| Error::Parse {
                line: lineno,
                message: e.to_string(),
            })?;
            match start {
                None => start = Some(date),
                Some(s) => {
                    let expected = YearMonth::add_months(s, median.len() as i64);
                    if date != expected {
                        return Err(Error::Misaligned(format!(
                            "forecast row {date} where {expected} was expected"
                        )));
                    }
                }
            }
            median.push(num(fields[2])?);
            for (k, f) in fields[3..].iter().enumerate() {
                bands[k].push(num(f)?);
            }
        }
        let start = start.ok_or_else(|| Error::Parse {
            line: 2,
            message: "forecast has no rows".into(),
        })?;
        Ok(Self {
            start,
            levels,
            median,
            bands,
        })
    }
}
