//! JSON run reports: resolved config, measurements and named assertions.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assertion {
    pub name: String,
    pub expected: String,
    pub measured: f64,
    pub tol: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub config: BTreeMap<String, Value>,
    pub measurements: BTreeMap<String, Value>,
    pub assertions: Vec<Assertion>,
}

impl Report {
    pub fn new<K: ToString, V: Into<Value>>(config: impl IntoIterator<Item = (K, V)>) -> Self {
        Report {
            config: config.into_iter().map(|(k, v)| (k.to_string(), v.into())).collect(),
            ..Report::default()
        }
    }

    pub fn measure(&mut self, name: &str, value: impl Serialize) {
        let v = serde_json::to_value(value).unwrap_or(Value::Null);
        self.measurements.insert(name.to_string(), v);
    }

    pub fn assert(&mut self, name: &str, expected: impl Into<String>, measured: f64, tol: f64, pass: bool) -> bool {
        self.assertions.push(Assertion {
            name: name.to_string(),
            expected: expected.into(),
            measured,
            tol,
            pass,
        });
        pass
    }

    /// `|measured - target| <= tol`.
    pub fn assert_close(&mut self, name: &str, target: f64, measured: f64, tol: f64) -> bool {
        let pass = (measured - target).abs() <= tol;
        self.assert(name, format!("{target:e} ± {tol:e}"), measured, tol, pass)
    }

    /// `measured <= bound`.
    pub fn assert_at_most(&mut self, name: &str, bound: f64, measured: f64) -> bool {
        self.assert(name, format!("<= {bound:e}"), measured, bound, measured <= bound)
    }

    /// `measured >= bound`.
    pub fn assert_at_least(&mut self, name: &str, bound: f64, measured: f64) -> bool {
        self.assert(name, format!(">= {bound:e}"), measured, bound, measured >= bound)
    }

    pub fn passed(&self) -> bool {
        self.assertions.iter().all(|a| a.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Assertion> {
        self.assertions.iter().filter(|a| !a.pass)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn assertions_and_json_keys() {
        let mut r = Report::new([("grid.nx", "64")]);
        r.measure("sigma", 0.5);
        assert!(r.assert_close("speed", 0.5, 0.51, 0.02));
        assert!(!r.assert_at_most("drift", 1e-3, 2e-3));
        assert!(r.assert_at_least("rate", 0.7, 1.0));
        assert!(!r.passed());
        assert_eq!(r.failures().count(), 1);
        let v: Value = serde_json::from_str(&r.to_json().unwrap()).unwrap();
        for key in ["config", "measurements", "assertions"] {
            assert!(v.get(key).is_some());
        }
        let a = &v["assertions"][0];
        for key in ["name", "expected", "measured", "tol", "pass"] {
            assert!(a.get(key).is_some());
        }
        let back: Report = serde_json::from_str(&r.to_json().unwrap()).unwrap();
        assert_eq!(back, r);
    }
}
