//! Monthly crash/VMT ingestion.
//!
//! A [`MonthlySeries`] is an immutable, gap-free run of calendar months with
//! crash rates stored as dimensionless fractions (crashes per thousand
//! vehicle-miles). Percent formatting never happens in this crate.

use std::fmt;
use std::fs;
use std::io::Read;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

pub const CSV_HEADER: [&str; 4] = ["year", "month", "crashes", "vmt_thousands"];

/// A calendar month.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct YearMonth {
    pub year: i32,
    pub month: u32,
}

impl YearMonth {
    pub fn new(year: i32, month: u32) -> Result<Self> {
        if !(1..=12).contains(&month) {
            return Err(Error::Validation(format!(
                "month must be in 1..=12, got {month}"
            )));
        }
        Ok(Self { year, month })
    }

    pub fn next(self) -> Self {
        self.add_months(1)
    }

    pub fn prev(self) -> Self {
        self.add_months(-1)
    }

    pub fn add_months(self, n: i64) -> Self {
        let idx = self.index() + n;
        Self {
            year: idx.div_euclid(12) as i32,
            month: idx.rem_euclid(12) as u32 + 1,
        }
    }

    /// Months elapsed from `self` to `other` (negative when `other` is earlier).
    pub fn months_until(self, other: YearMonth) -> i64 {
        other.index() - self.index()
    }

    fn index(self) -> i64 {
        self.year as i64 * 12 + self.month as i64 - 1
    }
}

impl fmt::Display for YearMonth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

impl FromStr for YearMonth {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Validation(format!("expected YYYY-MM, got {s:?}"));
        let (y, m) = s.trim().split_once('-').ok_or_else(bad)?;
        let year = y.parse().map_err(|_| bad())?;
        let month = m.parse().map_err(|_| bad())?;
        YearMonth::new(year, month)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonthlyObservation {
    pub year: i32,
    pub month: u32,
    pub crashes: u64,
    pub vmt_thousands: f64,
}

impl MonthlyObservation {
    pub fn new(year: i32, month: u32, crashes: u64, vmt_thousands: f64) -> Result<Self> {
        YearMonth::new(year, month)?;
        if !(vmt_thousands.is_finite() && vmt_thousands > 0.0) {
            return Err(Error::Validation(format!(
                "{year:04}-{month:02}: vmt_thousands must be positive, got {vmt_thousands}"
            )));
        }
        Ok(Self {
            year,
            month,
            crashes,
            vmt_thousands,
        })
    }

    pub fn date(&self) -> YearMonth {
        YearMonth {
            year: self.year,
            month: self.month,
        }
    }

    pub fn rate(&self) -> f64 {
        self.crashes as f64 / self.vmt_thousands
    }
}

/// Consecutive monthly observations with derived crash rates.
#[derive(Debug, Clone, PartialEq)]
pub struct MonthlySeries {
    observations: Vec<MonthlyObservation>,
    rates: Vec<f64>,
}

impl MonthlySeries {
    /// Sorts the observations by date and checks that they cover a gap-free
    /// run of months.
    pub fn new(mut observations: Vec<MonthlyObservation>) -> Result<Self> {
        if observations.is_empty() {
            return Err(Error::InsufficientData("series has no observations".into()));
        }
        observations.sort_by_key(MonthlyObservation::date);
        for pair in observations.windows(2) {
            let (a, b) = (pair[0].date(), pair[1].date());
            if a == b {
                return Err(Error::DuplicateMonth(b));
            }
            if a.next() != b {
                return Err(Error::MissingMonth(a.next()));
            }
        }
        for obs in &observations {
            MonthlyObservation::new(obs.year, obs.month, obs.crashes, obs.vmt_thousands)?;
        }
        let rates = observations.iter().map(MonthlyObservation::rate).collect();
        Ok(Self {
            observations,
            rates,
        })
    }

    pub fn observations(&self) -> &[MonthlyObservation] {
        &self.observations
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn start(&self) -> YearMonth {
        self.observations[0].date()
    }

    pub fn end(&self) -> YearMonth {
        self.observations[self.len() - 1].date()
    }

    pub fn contains(&self, date: YearMonth) -> bool {
        self.start() <= date && date <= self.end()
    }

    pub fn rate_at(&self, date: YearMonth) -> Option<f64> {
        if !self.contains(date) {
            return None;
        }
        Some(self.rates[self.start().months_until(date) as usize])
    }

    /// Calendar years for which all twelve months are present.
    pub fn full_years(&self) -> Vec<i32> {
        let first = if self.start().month == 1 {
            self.start().year
        } else {
            self.start().year + 1
        };
        let last = if self.end().month == 12 {
            self.end().year
        } else {
            self.end().year - 1
        };
        (first..=last).collect()
    }

    /// Inclusive sub-series `start..=end`.
    pub fn slice_window(&self, start: YearMonth, end: YearMonth) -> Result<MonthlySeries> {
        if start > end {
            return Err(Error::Range(format!("window start {start} is after end {end}")));
        }
        if !self.contains(start) || !self.contains(end) {
            return Err(Error::Range(format!(
                "window {start}..{end} is outside series span {}..{}",
                self.start(),
                self.end()
            )));
        }
        let i = self.start().months_until(start) as usize;
        let j = self.start().months_until(end) as usize;
        Ok(MonthlySeries {
            observations: self.observations[i..=j].to_vec(),
            rates: self.rates[i..=j].to_vec(),
        })
    }

    /// Joins two series. Months present in both must carry identical values.
    pub fn merge(&self, other: &MonthlySeries) -> Result<MonthlySeries> {
        let mut all = self.observations.clone();
        for obs in &other.observations {
            match all.iter().find(|o| o.date() == obs.date()) {
                Some(existing) if existing == obs => {}
                Some(_) => return Err(Error::DuplicateMonth(obs.date())),
                None => all.push(obs.clone()),
            }
        }
        MonthlySeries::new(all)
    }

    pub fn rate_series(&self) -> RateSeries {
        RateSeries {
            start: self.start(),
            values: self.rates.clone(),
        }
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = CSV_HEADER.join(",");
        out.push('\n');
        for o in &self.observations {
            out.push_str(&format!(
                "{},{},{},{}\n",
                o.year, o.month, o.crashes, o.vmt_thousands
            ));
        }
        out
    }
}

/// Parses a monthly CSV file (`year,month,crashes,vmt_thousands`).
pub fn parse_monthly_csv(path: impl AsRef<Path>) -> Result<MonthlySeries> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_monthly_reader(file)
}

pub fn parse_monthly_str(text: &str) -> Result<MonthlySeries> {
    parse_monthly_reader(text.as_bytes())
}

fn parse_monthly_reader<R: Read>(reader: R) -> Result<MonthlySeries> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers().map_err(|e| Error::Parse {
        line: 1,
        message: e.to_string(),
    })?;
    if headers.is_empty() || headers.iter().collect::<Vec<_>>() != CSV_HEADER {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected header `{}`", CSV_HEADER.join(",")),
        });
    }
    let mut observations = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let field = |i: usize, name: &str| -> Result<&str> {
            record.get(i).ok_or_else(|| Error::Parse {
                line,
                message: format!("missing field `{name}`"),
            })
        };
        let parse_err = |name: &str, raw: &str| Error::Parse {
            line,
            message: format!("invalid {name} {raw:?}"),
        };
        let year_raw = field(0, "year")?;
        let month_raw = field(1, "month")?;
        let crashes_raw = field(2, "crashes")?;
        let vmt_raw = field(3, "vmt_thousands")?;
        let year: i32 = year_raw.parse().map_err(|_| parse_err("year", year_raw))?;
        let month: u32 = month_raw.parse().map_err(|_| parse_err("month", month_raw))?;
        let crashes: u64 = crashes_raw
            .parse()
            .map_err(|_| parse_err("crashes", crashes_raw))?;
        let vmt: f64 = vmt_raw.parse().map_err(|_| parse_err("vmt_thousands", vmt_raw))?;
        if !(1..=12).contains(&month) {
            return Err(Error::Parse {
                line,
                message: format!("month {month} out of range 1..=12"),
            });
        }
        observations.push(MonthlyObservation::new(year, month, crashes, vmt)?);
    }
    if observations.is_empty() {
        return Err(Error::Parse {
            line: 2,
            message: "no data rows".into(),
        });
    }
    MonthlySeries::new(observations)
}

/// Rates on a contiguous run of months; the shape shared by forecasts and
/// observations in evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct RateSeries {
    pub start: YearMonth,
    pub values: Vec<f64>,
}

impl RateSeries {
    pub fn new(start: YearMonth, values: Vec<f64>) -> Self {
        Self { start, values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn end(&self) -> YearMonth {
        self.start.add_months(self.values.len() as i64 - 1)
    }

    pub fn dates(&self) -> impl Iterator<Item = YearMonth> + '_ {
        (0..self.values.len()).map(|i| self.start.add_months(i as i64))
    }

    /// Restricts to `start..=end`, failing if the range is not fully covered.
    pub fn window(&self, start: YearMonth, end: YearMonth) -> Result<RateSeries> {
        if start < self.start || end > self.end() || start > end {
            return Err(Error::Misaligned(format!(
                "requested {start}..{end} but series covers {}..{}",
                self.start,
                self.end()
            )));
        }
        let i = self.start.months_until(start) as usize;
        let j = self.start.months_until(end) as usize;
        Ok(RateSeries::new(start, self.values[i..=j].to_vec()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = "year,month,crashes,vmt_thousands\n";

    #[test]
    fn year_month_arithmetic() {
        let ym = YearMonth::new(2014, 12).unwrap();
        assert_eq!(ym.next(), YearMonth::new(2015, 1).unwrap());
        assert_eq!(ym.next().prev(), ym);
        assert_eq!(ym.add_months(-24), YearMonth::new(2012, 12).unwrap());
        assert_eq!(ym.months_until(YearMonth::new(2015, 6).unwrap()), 6);
        assert_eq!("2010-02".parse::<YearMonth>().unwrap().to_string(), "2010-02");
        assert!("2010-13".parse::<YearMonth>().is_err());
        assert!("201002".parse::<YearMonth>().is_err());
    }

    #[test]
    fn rate_from_first_table_row() {
        let s = parse_monthly_str(&format!("{HEADER}2010,1,881,287000\n")).unwrap();
        assert_eq!(s.rates()[0], 881.0 / 287000.0);
        assert!((s.rates()[0] - 0.00307).abs() < 5e-6);
    }

    #[test]
    fn zero_vmt_is_rejected() {
        let err = parse_monthly_str(&format!("{HEADER}2010,1,881,0\n")).unwrap_err();
        assert!(matches!(err, Error::Validation(_)), "{err:?}");
    }

    #[test]
    fn gap_names_missing_month() {
        let err =
            parse_monthly_str(&format!("{HEADER}2010,1,881,287000\n2010,3,936,353000\n"))
                .unwrap_err();
        match err {
            Error::MissingMonth(m) => assert_eq!(m.to_string(), "2010-02"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn duplicate_month_is_gap_error() {
        let err =
            parse_monthly_str(&format!("{HEADER}2010,1,881,287000\n2010,1,881,287000\n"))
                .unwrap_err();
        assert_eq!(err.code(), "E_GAP");
    }

    #[test]
    fn unsorted_rows_are_sorted() {
        let s = parse_monthly_str(&format!("{HEADER}2010,2,947,307000\n2010,1,881,287000\n"))
            .unwrap();
        assert_eq!(s.start().to_string(), "2010-01");
        assert_eq!(s.observations()[1].crashes, 947);
    }

    #[test]
    fn malformed_row_reports_line() {
        let err = parse_monthly_str(&format!("{HEADER}2010,1,881,287000\n2010,2,abc,307000\n"))
            .unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bad_header_and_empty_input() {
        assert_eq!(parse_monthly_str("").unwrap_err().code(), "E_PARSE");
        assert_eq!(parse_monthly_str(HEADER).unwrap_err().code(), "E_PARSE");
        assert_eq!(
            parse_monthly_str("y,m,c,v\n2010,1,1,1\n").unwrap_err().code(),
            "E_PARSE"
        );
    }

    #[test]
    fn slicing() {
        let mut text = HEADER.to_string();
        for m in 1..=12 {
            text.push_str(&format!("2010,{m},{},300000\n", 900 + m));
        }
        let s = parse_monthly_str(&text).unwrap();
        let one = s
            .slice_window("2010-05".parse().unwrap(), "2010-05".parse().unwrap())
            .unwrap();
        assert_eq!(one.len(), 1);
        assert_eq!(one.observations()[0].crashes, 905);
        let err = s
            .slice_window("2008-01".parse().unwrap(), "2008-12".parse().unwrap())
            .unwrap_err();
        assert_eq!(err.code(), "E_RANGE");
        assert!(s
            .slice_window("2010-05".parse().unwrap(), "2010-04".parse().unwrap())
            .is_err());
    }

    #[test]
    fn merge_tolerates_identical_overlap_only() {
        let a = parse_monthly_str(&format!("{HEADER}2010,1,881,287000\n2010,2,947,307000\n"))
            .unwrap();
        let b = parse_monthly_str(&format!("{HEADER}2010,2,947,307000\n2010,3,936,353000\n"))
            .unwrap();
        assert_eq!(a.merge(&b).unwrap().len(), 3);
        let c = parse_monthly_str(&format!("{HEADER}2010,2,948,307000\n")).unwrap();
        assert_eq!(a.merge(&c).unwrap_err().code(), "E_GAP");
    }

    #[test]
    fn full_years_skip_partial_edges() {
        let mut text = HEADER.to_string();
        text.push_str("2009,12,1000,300000\n");
        for m in 1..=12 {
            text.push_str(&format!("2010,{m},900,300000\n"));
        }
        text.push_str("2011,1,900,300000\n");
        let s = parse_monthly_str(&text).unwrap();
        assert_eq!(s.full_years(), vec![2010]);
    }
}
