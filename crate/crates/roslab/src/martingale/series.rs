use serde::{Deserialize, Serialize};
use std::io::Write;

use crate::error::Result;
use crate::testfn::TestFunction;

/// The point process driving a decomposition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Driver {
    Arrival { class: usize },
    Service { server: usize, class: usize },
}

impl Driver {
    pub fn label(&self) -> String {
        match self {
            Driver::Arrival { class } => format!("arrival[{class}]"),
            Driver::Service { server, class } => format!("service[{server},{class}]"),
        }
    }
}

/// Value of a right-continuous step series at `t`; `jumps[i]` is the level from `times[i]` on.
pub(crate) fn step_value(times: &[f64], levels: &[f64], t: f64) -> f64 {
    let n = times.partition_point(|&s| s <= t);
    if n == 0 {
        0.0
    } else {
        levels[n - 1]
    }
}

/// Cumulative raw sum Δ, martingale part Y and compensator H of one driver acting on
/// one class's measure. All three start at 0 and change only at `times`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecomposedSeries {
    pub driver: Driver,
    pub target: usize,
    pub f: TestFunction,
    pub times: Vec<f64>,
    pub delta: Vec<f64>,
    pub martingale: Vec<f64>,
    pub compensator: Vec<f64>,
}

impl DecomposedSeries {
    pub(crate) fn new(driver: Driver, target: usize, f: TestFunction) -> Self {
        DecomposedSeries {
            driver,
            target,
            f,
            times: Vec::new(),
            delta: Vec::new(),
            martingale: Vec::new(),
            compensator: Vec::new(),
        }
    }

    pub(crate) fn push(&mut self, t: f64, d_delta: f64, d_comp: f64) {
        let last = |v: &Vec<f64>| v.last().copied().unwrap_or(0.0);
        let (d, y, h) = (last(&self.delta), last(&self.martingale), last(&self.compensator));
        self.times.push(t);
        self.delta.push(d + d_delta);
        self.martingale.push(y + (d_delta - d_comp));
        self.compensator.push(h + d_comp);
    }

    pub fn delta_at(&self, t: f64) -> f64 {
        step_value(&self.times, &self.delta, t)
    }

    pub fn martingale_at(&self, t: f64) -> f64 {
        step_value(&self.times, &self.martingale, t)
    }

    pub fn compensator_at(&self, t: f64) -> f64 {
        step_value(&self.times, &self.compensator, t)
    }

    /// Increments of `Y` at each driver jump.
    pub fn martingale_jumps(&self) -> Vec<f64> {
        let mut prev = 0.0;
        self.martingale
            .iter()
            .map(|&y| {
                let d = y - prev;
                prev = y;
                d
            })
            .collect()
    }

    /// Largest `|Δ − Y − H|` over the jump grid.
    pub fn identity_error(&self) -> f64 {
        self.delta
            .iter()
            .zip(&self.martingale)
            .zip(&self.compensator)
            .map(|((d, y), h)| (d - y - h).abs())
            .fold(0.0, f64::max)
    }

    /// Diffusion scaling for a log of the `m`-th system: `t ↦ t/m`, values `/√m`.
    pub fn diffusion_scaled(&self, m: f64) -> Self {
        let r = m.sqrt();
        let scale = |v: &Vec<f64>| v.iter().map(|x| x / r).collect();
        DecomposedSeries {
            times: self.times.iter().map(|t| t / m).collect(),
            delta: scale(&self.delta),
            martingale: scale(&self.martingale),
            compensator: scale(&self.compensator),
            ..self.clone()
        }
    }

    /// CSV rows `t,delta,martingale,compensator`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t,delta,martingale,compensator")?;
        for i in 0..self.times.len() {
            writeln!(w, "{},{},{},{}", self.times[i], self.delta[i], self.martingale[i], self.compensator[i])?;
        }
        Ok(())
    }
}

/// Predictable and realized quadratic covariation of two martingale parts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QvSeries {
    pub driver: Driver,
    pub targets: (usize, usize),
    pub f_a: TestFunction,
    pub f_b: TestFunction,
    pub times: Vec<f64>,
    pub predictable: Vec<f64>,
    pub realized: Vec<f64>,
}

impl QvSeries {
    pub fn predictable_at(&self, t: f64) -> f64 {
        step_value(&self.times, &self.predictable, t)
    }

    pub fn realized_at(&self, t: f64) -> f64 {
        step_value(&self.times, &self.realized, t)
    }

    /// `t ↦ t/m`, values `/m`.
    pub fn scaled(&self, m: f64) -> Self {
        QvSeries {
            times: self.times.iter().map(|t| t / m).collect(),
            predictable: self.predictable.iter().map(|v| v / m).collect(),
            realized: self.realized.iter().map(|v| v / m).collect(),
            ..self.clone()
        }
    }
}

/// Right-continuous step function given by change points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepSeries {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl StepSeries {
    pub fn at(&self, t: f64) -> f64 {
        step_value(&self.times, &self.values, t)
    }

    /// `sup_{s ≤ t} |value(s)|`.
    pub fn sup_abs(&self, t: f64) -> f64 {
        self.times
            .iter()
            .zip(&self.values)
            .take_while(|(s, _)| **s <= t)
            .map(|(_, v)| v.abs())
            .fold(0.0, f64::max)
    }

    pub fn diffusion_scaled(&self, m: f64) -> Self {
        let r = m.sqrt();
        StepSeries {
            times: self.times.iter().map(|t| t / m).collect(),
            values: self.values.iter().map(|v| v / r).collect(),
        }
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t,value")?;
        for (t, v) in self.times.iter().zip(&self.values) {
            writeln!(w, "{t},{v}")?;
        }
        Ok(())
    }
}
