use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

use crate::error::Result;

/// One judged quantity. `pass` is `None` for advisory checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    /// How the metric is compared, e.g. `max_abs <= tolerance`.
    pub criterion: String,
    pub tolerance: f64,
    pub metrics: BTreeMap<String, serde_json::Value>,
    pub pass: Option<bool>,
}

impl Check {
    pub fn new(name: impl Into<String>, criterion: impl Into<String>, tolerance: f64) -> Self {
        Check { name: name.into(), criterion: criterion.into(), tolerance, metrics: BTreeMap::new(), pass: None }
    }

    pub fn metric(mut self, key: &str, value: impl Serialize) -> Self {
        self.metrics.insert(key.to_string(), serde_json::to_value(value).unwrap_or(serde_json::Value::Null));
        self
    }

    pub fn verdict(mut self, pass: bool) -> Self {
        self.pass = Some(pass);
        self
    }

    pub fn passed(&self) -> bool {
        self.pass != Some(false)
    }
}

/// Deterministic record of one suite run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub suite: String,
    pub version: String,
    pub master_seed: u64,
    pub load: Option<f64>,
    pub checks: Vec<Check>,
    pub pass: bool,
}

impl RunReport {
    pub fn new(suite: impl Into<String>, master_seed: u64, load: Option<f64>) -> Self {
        RunReport {
            suite: suite.into(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            master_seed,
            load,
            checks: Vec::new(),
            pass: true,
        }
    }

    pub fn push(&mut self, c: Check) {
        self.pass &= c.passed();
        self.checks.push(c);
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Write `report.json`, and `timing.json` with wall-clock seconds when given.
    pub fn write(&self, dir: &Path, wall_seconds: Option<f64>) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("report.json"), self.to_json()?)?;
        if let Some(s) = wall_seconds {
            let t = serde_json::json!({ "suite": self.suite, "wall_seconds": s });
            std::fs::write(dir.join("timing.json"), serde_json::to_string_pretty(&t)?)?;
        }
        Ok(())
    }
}
