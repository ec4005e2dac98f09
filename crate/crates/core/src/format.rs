//! Text formatting shared by the CSV and `key = value` writers.

use crate::error::{Error, Result};

/// Plain decimal with 10 significant digits (no exponent).
pub fn sig10(x: f64) -> String {
    sig(x, 10)
}

pub fn sig(x: f64, digits: usize) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let exponent = x.abs().log10().floor() as i64;
    let decimals = (digits as i64 - 1 - exponent).max(0) as usize;
    let s = format!("{x:.decimals$}");
    // rounding can carry into a new leading digit (9.99.. -> 10.0..)
    if s.trim_start_matches('-').replace('.', "").trim_start_matches('0').len() > digits
        && decimals > 0
    {
        let decimals = decimals - 1;
        return format!("{x:.decimals$}");
    }
    s
}

/// Ordered `key = value` pairs; `#` starts a comment line.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KvFile {
    entries: Vec<(String, String)>,
}

impl KvFile {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut kv = KvFile::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: i + 1,
                message: format!("expected `key = value`, got {line:?}"),
            })?;
            let key = k.trim();
            if key.is_empty() {
                return Err(Error::Parse {
                    line: i + 1,
                    message: "empty key".into(),
                });
            }
            if kv.get(key).is_some() {
                return Err(Error::Parse {
                    line: i + 1,
                    message: format!("duplicate key `{key}`"),
                });
            }
            kv.entries.push((key.to_string(), v.trim().to_string()));
        }
        Ok(kv)
    }

    /// Appends `key`, or replaces its value in place if already present.
    pub fn push(&mut self, key: impl Into<String>, value: impl Into<String>) {
        let (key, value) = (key.into(), value.into());
        match self.entries.iter_mut().find(|(k, _)| *k == key) {
            Some(entry) => entry.1 = value,
            None => self.entries.push((key, value)),
        }
    }

    pub fn extend(&mut self, other: KvFile) {
        for (k, v) in other.entries {
            self.push(k, v);
        }
    }

    pub fn push_f64(&mut self, key: impl Into<String>, value: f64) {
        self.push(key, sig10(value));
    }

    pub fn push_list(&mut self, key: impl Into<String>, values: &[f64]) {
        let joined: Vec<String> = values.iter().map(|v| sig10(*v)).collect();
        self.push(key, joined.join(","));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(k, _)| k.as_str())
    }

    pub fn require(&self, key: &str) -> Result<&str> {
        self.get(key)
            .ok_or_else(|| Error::Validation(format!("missing key `{key}`")))
    }

    pub fn f64(&self, key: &str) -> Result<f64> {
        let raw = self.require(key)?;
        raw.parse()
            .map_err(|_| Error::Validation(format!("key `{key}`: invalid number {raw:?}")))
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64> {
        match self.get(key) {
            Some(_) => self.f64(key),
            None => Ok(default),
        }
    }

    pub fn usize(&self, key: &str) -> Result<usize> {
        let raw = self.require(key)?;
        raw.parse()
            .map_err(|_| Error::Validation(format!("key `{key}`: invalid integer {raw:?}")))
    }

    /// Comma-separated numbers; an empty value is an empty list.
    pub fn list(&self, key: &str) -> Result<Vec<f64>> {
        match self.get(key) {
            None => Ok(Vec::new()),
            Some("") => Ok(Vec::new()),
            Some(raw) => raw
                .split(',')
                .map(|t| {
                    t.trim().parse().map_err(|_| {
                        Error::Validation(format!("key `{key}`: invalid number {t:?}"))
                    })
                })
                .collect(),
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(v);
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ten_significant_digits() {
        assert_eq!(sig10(0.004977346278317152), "0.004977346278");
        assert_eq!(sig10(1.0), "1.000000000");
        assert_eq!(sig10(-0.5936), "-0.5936000000");
        assert_eq!(sig10(0.0), "0");
        assert_eq!(sig10(9.9999999999), "10.00000000");
        assert_eq!(sig10(123456.0), "123456.0000");
    }

    #[test]
    fn kv_roundtrip_and_errors() {
        let mut kv = KvFile::new();
        kv.push_f64("c1", 0.00498);
        kv.push("scheme", "reflect");
        kv.push_list("history_tail", &[0.1, 0.2]);
        let back = KvFile::parse(&kv.to_text()).unwrap();
        assert_eq!(back.f64("c1").unwrap(), 0.00498);
        assert_eq!(back.get("scheme"), Some("reflect"));
        assert_eq!(back.list("history_tail").unwrap(), vec![0.1, 0.2]);
        assert!(KvFile::parse("a = 1\na = 2\n").is_err());
        assert!(KvFile::parse("no equals sign\n").is_err());
        assert!(KvFile::parse("# comment\n\nx = 1\n").is_ok());
        assert!(back.f64("missing").is_err());
    }
}
