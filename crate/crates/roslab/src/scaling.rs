//! The `m`-th system and the fluid and diffusion scalings of its paths.

use crate::error::{config, domain, Result};
use crate::simulator::functional::replay_on_grid;
use crate::simulator::{EventLog, InitialQueue, PathSeries, QueueMeasure, SystemConfig};
use crate::testfn::TestFunction;
use serde::{Deserialize, Serialize};
use std::io::Write;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingSchedule {
    pub m_values: Vec<u64>,
    pub replications: usize,
}

impl ScalingSchedule {
    pub fn validate(&self) -> Result<()> {
        if self.m_values.is_empty() {
            return config("scaling schedule needs at least one m");
        }
        if self.m_values[0] == 0 || self.m_values.windows(2).any(|w| w[1] <= w[0]) {
            return config("m values must be positive and strictly increasing");
        }
        Ok(())
    }
}

/// Patience scaled by `m`, initial counts `round(m·z₀)`, horizon `m·T`.
pub fn build_mth_system(base: &SystemConfig, m: u64) -> Result<SystemConfig> {
    if m == 0 {
        return domain("m must be >= 1");
    }
    base.validate()?;
    let mf = m as f64;
    let mut cfg = base.clone();
    cfg.horizon = base.horizon * mf;
    if m == 1 {
        return Ok(cfg);
    }
    cfg.patience = base.patience.iter().map(|d| d.scaled(mf)).collect();
    cfg.initial_queues = base
        .initial_queues
        .iter()
        .map(|q| match q {
            InitialQueue::Drawn { mass, patience } => {
                Ok(InitialQueue::Drawn { mass: (mf * mass).round(), patience: patience.scaled(mf) })
            }
            InitialQueue::Explicit { remaining } if remaining.is_empty() => Ok(q.clone()),
            InitialQueue::Explicit { .. } => {
                config("explicit initial queues cannot be scaled; use a drawn initial mass")
            }
        })
        .collect::<Result<_>>()?;
    cfg.validate()?;
    Ok(cfg)
}

/// `⟨f, Z̄^m_j(t)⟩ = (1/m) Σ f((deadline − mt)/m)` per class on a fluid-time grid.
pub fn fluid_scale_path(log: &EventLog, f: &TestFunction, grid: &[f64], m: u64) -> Result<PathSeries> {
    let mf = m as f64;
    let raw: Vec<f64> = grid.iter().map(|t| t * mf).collect();
    let mut s = replay_on_grid(log, &raw, log.config.horizon, |x, _| f.eval(x / mf))?;
    s.grid = grid.to_vec();
    for v in s.values.iter_mut().flatten() {
        *v /= mf;
    }
    Ok(s)
}

/// The measure `Z̄^m(t) = (1/m) Σ δ_{(deadline − mt)/m}` of one class.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaledMeasure {
    pub atoms: Vec<f64>,
    pub m: f64,
}

impl ScaledMeasure {
    /// Scale a raw queue observed at raw time `raw_now`.
    pub fn from_queue(q: &QueueMeasure, raw_now: f64, m: u64) -> Self {
        let mf = m as f64;
        ScaledMeasure { atoms: q.iter().map(|e| (e.deadline - raw_now) / mf).collect(), m: mf }
    }

    /// Mass of `(a, b]`.
    pub fn mass(&self, a: f64, b: f64) -> f64 {
        self.atoms.iter().filter(|&&x| x > a && x <= b).count() as f64 / self.m
    }

    pub fn pairing(&self, f: &TestFunction) -> f64 {
        self.atoms.iter().fold(0.0, |acc, &x| acc + f.eval(x)) / self.m
    }
}

fn same_grid(a: &PathSeries, b: &PathSeries) -> Result<()> {
    if a.grid.len() != b.grid.len()
        || a.values.len() != b.values.len()
        || a.grid.iter().zip(&b.grid).any(|(x, y)| (x - y).abs() > 1e-12 * (1.0 + x.abs()))
    {
        return domain("series are not on the same grid");
    }
    Ok(())
}

/// `√m (fluid-scaled − fluid model)` pointwise.
pub fn diffusion_scale(fluid_scaled: &PathSeries, fluid_model: &PathSeries, m: u64) -> Result<PathSeries> {
    same_grid(fluid_scaled, fluid_model)?;
    let r = (m as f64).sqrt();
    let values = fluid_scaled
        .values
        .iter()
        .zip(&fluid_model.values)
        .map(|(a, b)| a.iter().zip(b).map(|(x, y)| r * (x - y)).collect())
        .collect();
    Ok(PathSeries { grid: fluid_scaled.grid.clone(), values })
}

/// Inverse of [`diffusion_scale`]: `fluid model + diffusion / √m`.
pub fn undo_diffusion_scale(diffusion: &PathSeries, fluid_model: &PathSeries, m: u64) -> Result<PathSeries> {
    same_grid(diffusion, fluid_model)?;
    let r = (m as f64).sqrt();
    let values = diffusion
        .values
        .iter()
        .zip(&fluid_model.values)
        .map(|(a, b)| a.iter().zip(b).map(|(x, y)| y + x / r).collect())
        .collect();
    Ok(PathSeries { grid: diffusion.grid.clone(), values })
}

/// CSV rows `m,replication,t,class,value`.
pub fn write_scaled_csv<W: Write>(mut w: W, m: u64, rep: usize, s: &PathSeries, header: bool) -> Result<()> {
    if header {
        writeln!(w, "m,replication,t,class,value")?;
    }
    for (i, t) in s.grid.iter().enumerate() {
        for (j, v) in s.values.iter().enumerate() {
            writeln!(w, "{m},{rep},{t},{j},{}", v[i])?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::primitives::DistributionSpec;
    use crate::simulator::{QueueEntry, ServiceSpecs};

    fn base() -> SystemConfig {
        SystemConfig {
            classes: 2,
            servers: 1,
            weights: vec![0.5, 0.5],
            interarrival: vec![DistributionSpec::exponential(1.0); 2],
            first_arrival: vec![],
            service: ServiceSpecs::PerClass(vec![DistributionSpec::exponential(1.0); 2]),
            patience: vec![DistributionSpec::exponential(2.0); 2],
            initial_queues: vec![
                InitialQueue::Drawn { mass: 0.5, patience: DistributionSpec::exponential(1.0) },
                InitialQueue::Drawn { mass: 0.25, patience: DistributionSpec::exponential(1.0) },
            ],
            initial_servers: vec![crate::simulator::InitialServer::Busy {
                residual: DistributionSpec::exponential(1.0),
                class: 0,
            }],
            horizon: 5.0,
            seed: 3,
        }
    }

    #[test]
    fn mth_system_examples() {
        let b = base();
        let one = build_mth_system(&b, 1).unwrap();
        assert_eq!(one, SystemConfig { horizon: 5.0, ..b.clone() });
        let c = build_mth_system(&b, 100).unwrap();
        assert_eq!(c.initial_queue(0).count(), 50);
        assert_eq!(c.initial_queue(1).count(), 25);
        assert_eq!(c.horizon, 500.0);
        assert_eq!(c.interarrival, b.interarrival);
        let c = build_mth_system(&b, 10).unwrap();
        assert_eq!(c.patience[0], DistributionSpec::exponential(0.2));
    }

    #[test]
    fn overflow_is_a_config_error() {
        let mut b = base();
        b.initial_queues[0] = InitialQueue::Drawn { mass: 1e6, patience: DistributionSpec::exponential(1.0) };
        assert!(matches!(build_mth_system(&b, 1_000_000), Err(crate::Error::Config(_))));
    }

    #[test]
    fn two_scaling_forms_agree() {
        let m = 10u64;
        let mut q = QueueMeasure::new();
        q.insert(QueueEntry { deadline: 50.0, seq: 0 });
        q.insert(QueueEntry { deadline: 41.0, seq: 1 });
        let now = 30.0;
        let s = ScaledMeasure::from_queue(&q, now, m);
        let direct = |f: &TestFunction| q.pairing(now, |x| f.eval(x / m as f64)) / m as f64;
        for f in [TestFunction::Indicator, TestFunction::exp(1.0), TestFunction::exp(0.3)] {
            assert_eq!(s.pairing(&f), direct(&f));
        }
        assert_eq!(s.mass(0.0, f64::INFINITY), direct(&TestFunction::Indicator));
        let one_job = ScaledMeasure { atoms: vec![2.0], m: m as f64 };
        let id = TestFunction::PolyExp { coef: 1.0, power: 1, rate: 0.0 };
        assert!((one_job.pairing(&id) - 2.0 / m as f64).abs() < 1e-15);
    }

    #[test]
    fn diffusion_examples_and_inverse() {
        let a = PathSeries { grid: vec![0.0, 1.0], values: vec![vec![1.01, 2.0]] };
        let b = PathSeries { grid: vec![0.0, 1.0], values: vec![vec![1.0, 2.0]] };
        let d = diffusion_scale(&a, &b, 10_000).unwrap();
        assert!((d.values[0][0] - 1.0).abs() < 1e-9);
        assert_eq!(d.values[0][1], 0.0);
        assert_eq!(diffusion_scale(&a, &b, 1).unwrap().values[0][0], 1.01 - 1.0);
        let back = undo_diffusion_scale(&d, &b, 10_000).unwrap();
        for (x, y) in back.values[0].iter().zip(&a.values[0]) {
            assert!((x - y).abs() < 1e-12);
        }
        let c = PathSeries { grid: vec![0.0, 2.0], values: vec![vec![0.0, 0.0]] };
        assert!(diffusion_scale(&a, &c, 4).is_err());
    }
}
