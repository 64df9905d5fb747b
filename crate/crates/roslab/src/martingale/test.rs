use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{bonferroni_threshold, summarize};

pub const MIN_REPLICATIONS: usize = 100;

/// Per-time z-scores of replicated values against mean zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZeroTestReport {
    pub label: String,
    pub times: Vec<f64>,
    pub means: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub z_scores: Vec<f64>,
    pub level: f64,
    pub threshold: f64,
    pub pass: bool,
}

/// `samples[r][i]` is replication `r` at `times[i]`. Bonferroni over the grid at `level`.
pub fn martingale_zero_test(samples: &[Vec<f64>], times: &[f64], level: f64) -> Result<ZeroTestReport> {
    martingale_zero_test_family(samples, times, level, 1)
}

/// As [`martingale_zero_test`], with the correction also covering `family` series tested together.
pub fn martingale_zero_test_family(
    samples: &[Vec<f64>],
    times: &[f64],
    level: f64,
    family: usize,
) -> Result<ZeroTestReport> {
    if samples.len() < MIN_REPLICATIONS {
        return Err(Error::Precondition(format!(
            "{} replications, at least {MIN_REPLICATIONS} required",
            samples.len()
        )));
    }
    if samples.iter().any(|s| s.len() != times.len()) {
        return Err(Error::Precondition("replication length differs from the time grid".into()));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Precondition(format!("level {level} outside (0, 1)")));
    }
    let threshold = bonferroni_threshold(level, times.len() * family.max(1));
    let mut report = ZeroTestReport {
        label: String::new(),
        times: times.to_vec(),
        means: Vec::new(),
        std_errors: Vec::new(),
        z_scores: Vec::new(),
        level,
        threshold,
        pass: true,
    };
    let mut column = vec![0.0; samples.len()];
    for i in 0..times.len() {
        for (c, s) in column.iter_mut().zip(samples) {
            *c = s[i];
        }
        let s = summarize(&column);
        let z = if s.std_error > 0.0 {
            s.mean / s.std_error
        } else if s.mean == 0.0 {
            0.0
        } else {
            f64::INFINITY.copysign(s.mean)
        };
        report.pass &= z.abs() < threshold;
        report.means.push(s.mean);
        report.std_errors.push(s.std_error);
        report.z_scores.push(z);
    }
    Ok(report)
}

impl ZeroTestReport {
    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }
}
