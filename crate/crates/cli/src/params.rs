//! `--params k=v,...` parsing with typed, range-checked getters.
//!
//! Every getter marks its key as consumed and records the value actually
//! used, defaults included, so the bundle can echo a complete configuration.
//! List values are separated by `:`; wavevector components by `/`.

use std::collections::{BTreeMap, BTreeSet};

use num_complex::Complex64;

use crate::error::{CliError, CliResult};
use crate::io::{format_complex, parse_complex};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Params {
    given: BTreeMap<String, String>,
    used: BTreeSet<String>,
    resolved: BTreeMap<String, String>,
}

/// Shortest text that parses back to the same `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

fn parse_f64(key: &str, v: &str) -> CliResult<f64> {
    v.trim().parse::<f64>().map_err(|_| CliError::input(format!("parameter {key}: '{v}' is not a number")))
}

fn parse_usize(key: &str, v: &str) -> CliResult<usize> {
    let v = v.trim();
    if let Ok(n) = v.parse::<usize>() {
        return Ok(n);
    }
    // Accept 1e4-style counts when they are exact integers.
    match v.parse::<f64>() {
        Ok(x) if x >= 0.0 && x.fract() == 0.0 && x <= usize::MAX as f64 => Ok(x as usize),
        _ => Err(CliError::input(format!("parameter {key}: '{v}' is not a nonnegative integer"))),
    }
}

impl Params {
    pub fn parse(text: &str) -> CliResult<Self> {
        let mut given = BTreeMap::new();
        for item in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| CliError::input(format!("parameter '{item}' is not of the form key=value")))?;
            let k = k.trim();
            if k.is_empty() {
                return Err(CliError::input(format!("parameter '{item}' has an empty key")));
            }
            if given.insert(k.to_string(), v.trim().to_string()).is_some() {
                return Err(CliError::input(format!("parameter {k} given twice")));
            }
        }
        Ok(Params { given, ..Default::default() })
    }

    pub fn given(&self) -> &BTreeMap<String, String> {
        &self.given
    }

    pub fn contains(&self, key: &str) -> bool {
        self.given.contains_key(key)
    }

    fn take(&mut self, key: &str) -> Option<String> {
        self.used.insert(key.to_string());
        self.given.get(key).cloned()
    }

    fn record(&mut self, key: &str, value: String) {
        self.resolved.insert(key.to_string(), value);
    }

    pub fn opt_f64(&mut self, key: &str) -> CliResult<Option<f64>> {
        let v = self.take(key).map(|v| parse_f64(key, &v)).transpose()?;
        if let Some(x) = v {
            if !x.is_finite() {
                return Err(CliError::input(format!("parameter {key} must be finite")));
            }
            self.record(key, fmt_f64(x));
        }
        Ok(v)
    }

    pub fn f64(&mut self, key: &str, default: f64) -> CliResult<f64> {
        let x = self.opt_f64(key)?.unwrap_or(default);
        self.record(key, fmt_f64(x));
        Ok(x)
    }

    /// A value strictly greater than zero.
    pub fn positive(&mut self, key: &str, default: f64) -> CliResult<f64> {
        let x = self.f64(key, default)?;
        if x <= 0.0 {
            return Err(CliError::input(format!("parameter {key} must be positive, got {x}")));
        }
        Ok(x)
    }

    pub fn opt_usize(&mut self, key: &str) -> CliResult<Option<usize>> {
        let v = self.take(key).map(|v| parse_usize(key, &v)).transpose()?;
        if let Some(n) = v {
            self.record(key, n.to_string());
        }
        Ok(v)
    }

    /// An integer no smaller than `min`.
    pub fn usize_at_least(&mut self, key: &str, default: usize, min: usize) -> CliResult<usize> {
        let n = self.opt_usize(key)?.unwrap_or(default);
        if n < min {
            return Err(CliError::input(format!("parameter {key} must be at least {min}, got {n}")));
        }
        self.record(key, n.to_string());
        Ok(n)
    }

    pub fn bool(&mut self, key: &str, default: bool) -> CliResult<bool> {
        let b = match self.take(key).as_deref() {
            None => default,
            Some("true" | "yes" | "1") => true,
            Some("false" | "no" | "0") => false,
            Some(other) => return Err(CliError::input(format!("parameter {key}: '{other}' is not a boolean"))),
        };
        self.record(key, b.to_string());
        Ok(b)
    }

    /// One of `allowed`; the first entry is the default.
    pub fn choice(&mut self, key: &str, allowed: &[&str]) -> CliResult<String> {
        let v = self.take(key).unwrap_or_else(|| allowed[0].to_string());
        if !allowed.contains(&v.as_str()) {
            return Err(CliError::input(format!("parameter {key}: '{v}' is not one of {}", allowed.join(", "))));
        }
        self.record(key, v.clone());
        Ok(v)
    }

    pub fn opt_f64_list(&mut self, key: &str) -> CliResult<Option<Vec<f64>>> {
        let Some(v) = self.take(key) else { return Ok(None) };
        let list = v.split(':').map(|s| parse_f64(key, s)).collect::<CliResult<Vec<f64>>>()?;
        if list.iter().any(|x| !x.is_finite()) {
            return Err(CliError::input(format!("parameter {key} must be finite")));
        }
        self.record(key, list.iter().map(|&x| fmt_f64(x)).collect::<Vec<_>>().join(":"));
        Ok(Some(list))
    }

    pub fn f64_list(&mut self, key: &str, default: &[f64]) -> CliResult<Vec<f64>> {
        let list = self.opt_f64_list(key)?.unwrap_or_else(|| default.to_vec());
        self.record(key, list.iter().map(|&x| fmt_f64(x)).collect::<Vec<_>>().join(":"));
        Ok(list)
    }

    /// `lo:hi` with `lo < hi`.
    pub fn range(&mut self, key: &str, default: (f64, f64)) -> CliResult<(f64, f64)> {
        let r = self.opt_range(key)?.unwrap_or(default);
        self.record(key, format!("{}:{}", fmt_f64(r.0), fmt_f64(r.1)));
        Ok(r)
    }

    pub fn opt_range(&mut self, key: &str) -> CliResult<Option<(f64, f64)>> {
        let Some(list) = self.opt_f64_list(key)? else { return Ok(None) };
        match list[..] {
            [lo, hi] if lo < hi => Ok(Some((lo, hi))),
            _ => Err(CliError::input(format!("parameter {key} must be lo:hi with lo < hi"))),
        }
    }

    /// `a:b` positive integer pair.
    pub fn counts(&mut self, key: &str, default: (usize, usize)) -> CliResult<(usize, usize)> {
        let c = match self.take(key) {
            None => default,
            Some(v) => match v.split(':').collect::<Vec<_>>()[..] {
                [a, b] => (parse_usize(key, a)?, parse_usize(key, b)?),
                _ => return Err(CliError::input(format!("parameter {key} must be of the form a:b"))),
            },
        };
        if c.0 == 0 || c.1 == 0 {
            return Err(CliError::input(format!("parameter {key} must be positive")));
        }
        self.record(key, format!("{}:{}", c.0, c.1));
        Ok(c)
    }

    pub fn opt_usize_list(&mut self, key: &str) -> CliResult<Option<Vec<usize>>> {
        let Some(v) = self.take(key) else { return Ok(None) };
        let list = v.split(':').map(|s| parse_usize(key, s)).collect::<CliResult<Vec<_>>>()?;
        self.record(key, list.iter().map(usize::to_string).collect::<Vec<_>>().join(":"));
        Ok(Some(list))
    }

    pub fn opt_complex_list(&mut self, key: &str) -> CliResult<Option<Vec<Complex64>>> {
        let Some(v) = self.take(key) else { return Ok(None) };
        let list = v
            .split(':')
            .map(|s| parse_complex(s).ok_or_else(|| CliError::input(format!("parameter {key}: '{s}' is not a number"))))
            .collect::<CliResult<Vec<_>>>()?;
        self.record(key, list.iter().map(|&z| format_complex(z)).collect::<Vec<_>>().join(":"));
        Ok(Some(list))
    }

    /// Integer wavevectors, `1/0:0/1` for `(1,0)` and `(0,1)`.
    pub fn opt_wavevectors(&mut self, key: &str, dims: usize) -> CliResult<Option<Vec<Vec<i32>>>> {
        let Some(v) = self.take(key) else { return Ok(None) };
        let mut list = Vec::new();
        for item in v.split(':') {
            let k = item
                .split('/')
                .map(|c| c.trim().parse::<i32>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|_| CliError::input(format!("parameter {key}: '{item}' is not an integer wavevector")))?;
            if k.len() != dims {
                return Err(CliError::input(format!("parameter {key}: '{item}' has {} components, expected {dims}", k.len())));
            }
            list.push(k);
        }
        self.record(key, v);
        Ok(Some(list))
    }

    /// Raw text for keys with command-specific syntax.
    pub fn opt_text(&mut self, key: &str) -> Option<String> {
        let v = self.take(key)?;
        self.record(key, v.clone());
        Some(v)
    }

    /// Records a derived setting that was not given explicitly.
    pub fn note(&mut self, key: &str, value: impl Into<String>) {
        self.record(key, value.into());
    }

    /// Fails on keys no getter asked for; otherwise returns every setting
    /// in effect.
    pub fn finish(&self) -> CliResult<BTreeMap<String, String>> {
        let unknown: Vec<&str> = self.given.keys().filter(|k| !self.used.contains(*k)).map(String::as_str).collect();
        if !unknown.is_empty() {
            return Err(CliError::input(format!("unknown parameter(s) for this command: {}", unknown.join(", "))));
        }
        Ok(self.resolved.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_pairs_and_rejects_junk() {
        let mut p = Params::parse("eps=0.15, n=1e4,x0=0.1:0.2").unwrap();
        assert_eq!(p.f64("eps", 0.0).unwrap(), 0.15);
        assert_eq!(p.usize_at_least("n", 1, 1).unwrap(), 10_000);
        assert_eq!(p.f64_list("x0", &[]).unwrap(), vec![0.1, 0.2]);
        assert_eq!(p.f64("tol", 1e-3).unwrap(), 1e-3);
        let echo = p.finish().unwrap();
        assert_eq!(echo["tol"], "0.001");
        assert_eq!(echo["n"], "10000");

        assert!(Params::parse("eps").is_err());
        assert!(Params::parse("a=1,a=2").is_err());
        assert!(Params::parse("=3").is_err());
    }

    #[test]
    fn unknown_keys_are_reported() {
        let mut p = Params::parse("eps=0.1,bogus=3").unwrap();
        p.f64("eps", 0.0).unwrap();
        let err = p.finish().unwrap_err();
        assert!(err.message.contains("bogus"));
    }

    #[test]
    fn range_checks() {
        assert!(Params::parse("n=0").unwrap().usize_at_least("n", 5, 1).is_err());
        assert!(Params::parse("tol=-1").unwrap().positive("tol", 1.0).is_err());
        assert!(Params::parse("r=2:1").unwrap().range("r", (0.0, 1.0)).is_err());
        assert!(Params::parse("c=3:0").unwrap().counts("c", (1, 1)).is_err());
        assert!(Params::parse("n=2.5").unwrap().opt_usize("n").is_err());
        assert!(Params::parse("b=maybe").unwrap().bool("b", false).is_err());
        assert!(Params::parse("v=x").unwrap().choice("v", &["a", "b"]).is_err());
    }

    #[test]
    fn complex_lists_and_wavevectors() {
        let mut p = Params::parse("eigs=0.9:0.5+0.1j:-2j,k=1/0:0/-1").unwrap();
        let z = p.opt_complex_list("eigs").unwrap().unwrap();
        assert_eq!(z, vec![Complex64::new(0.9, 0.0), Complex64::new(0.5, 0.1), Complex64::new(0.0, -2.0)]);
        let k = p.opt_wavevectors("k", 2).unwrap().unwrap();
        assert_eq!(k, vec![vec![1, 0], vec![0, -1]]);
        assert!(Params::parse("k=1/2/3").unwrap().opt_wavevectors("k", 2).is_err());
    }
}
