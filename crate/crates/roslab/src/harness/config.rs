use serde::{Deserialize, Serialize};
use std::path::PathBuf;

use crate::error::{config, Error, Result};
use crate::primitives::DistributionSpec;
use crate::scaling::ScalingSchedule;
use crate::simulator::SystemConfig;
use crate::testfn::TestFunction;

/// Environment variable naming the default output directory.
pub const OUTPUT_DIR_ENV: &str = "ROSLAB_OUTPUT_DIR";

fn default_schedule() -> ScalingSchedule {
    ScalingSchedule { m_values: vec![100, 1_000, 10_000], replications: 50 }
}

fn default_functions() -> Vec<TestFunction> {
    vec![TestFunction::Indicator, TestFunction::exp(1.0)]
}

fn default_betas() -> Vec<f64> {
    vec![1.0]
}

fn default_seed() -> u64 {
    20_240_601
}

fn default_fluid_dt() -> f64 {
    1e-3
}

/// Tolerances and sample sizes; defaults follow the acceptance thresholds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    pub renewal_identity: f64,
    pub renewal_streams: usize,
    pub renewal_horizon: f64,
    pub fclt_law: DistributionSpec,
    pub fclt_m: f64,
    pub fclt_replications: usize,
    pub fclt_relative: f64,
    pub conservation_replications: usize,
    pub residual_factor: f64,
    pub refinement_ratio: f64,
    pub converge_fraction: f64,
    pub converge_grid: f64,
    pub martingale_replications: usize,
    pub martingale_times: Vec<f64>,
    pub martingale_level: f64,
    pub qv_replications: usize,
    pub qv_m: u64,
    pub qv_time: f64,
    pub qv_relative: f64,
    pub psd: f64,
    pub diffusion_m: Vec<u64>,
    pub diffusion_replications: usize,
    pub diffusion_times: Vec<f64>,
    pub diffusion_relative: f64,
    pub sde_paths: usize,
    pub sde_dt: f64,
    pub proxy_beta: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            renewal_identity: 1e-9,
            renewal_streams: 100,
            renewal_horizon: 50.0,
            fclt_law: DistributionSpec::Hyperexponential { probs: vec![0.5, 0.5], rates: vec![0.5, 2.0] },
            fclt_m: 1e4,
            fclt_replications: 10_000,
            fclt_relative: 0.05,
            conservation_replications: 100,
            residual_factor: 5.0,
            refinement_ratio: 1.8,
            converge_fraction: 0.05,
            converge_grid: 0.01,
            martingale_replications: 2_000,
            martingale_times: vec![1.0, 2.0, 3.0, 4.0, 5.0],
            martingale_level: 0.01,
            qv_replications: 500,
            qv_m: 100,
            qv_time: 5.0,
            qv_relative: 0.10,
            psd: 1e-10,
            diffusion_m: vec![1_000, 10_000],
            diffusion_replications: 1_000,
            diffusion_times: vec![1.0, 3.0],
            diffusion_relative: 0.25,
            sde_paths: 10_000,
            sde_dt: 1e-2,
            proxy_beta: 1e-3,
        }
    }
}

/// A single JSON experiment document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub system: SystemConfig,
    #[serde(default = "default_schedule")]
    pub schedule: ScalingSchedule,
    #[serde(default = "default_seed")]
    pub master_seed: u64,
    #[serde(default = "default_functions")]
    pub test_functions: Vec<TestFunction>,
    /// Laplace rates for the diffusion comparison.
    #[serde(default = "default_betas")]
    pub betas: Vec<f64>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    /// Checks run by `verify`; empty means all.
    #[serde(default)]
    pub suites: Vec<String>,
    #[serde(default = "default_fluid_dt")]
    pub fluid_dt: f64,
    #[serde(default)]
    pub tolerances: Tolerances,
    /// Worker threads for replications; `None` uses all cores.
    #[serde(default)]
    pub workers: Option<usize>,
    /// SHA-256 of the JSONL log of `system` at `system.seed`.
    #[serde(default)]
    pub golden_hash: Option<String>,
}

impl ExperimentConfig {
    pub fn new(system: SystemConfig) -> Self {
        ExperimentConfig {
            system,
            schedule: default_schedule(),
            master_seed: default_seed(),
            test_functions: default_functions(),
            betas: default_betas(),
            output_dir: None,
            suites: Vec::new(),
            fluid_dt: default_fluid_dt(),
            tolerances: Tolerances::default(),
            workers: None,
            golden_hash: None,
        }
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.system.validate()?;
        self.schedule.validate()?;
        if !(self.fluid_dt > 0.0) {
            return config("fluid_dt must be > 0");
        }
        if self.workers == Some(0) {
            return config("workers must be >= 1");
        }
        if self.betas.iter().any(|&b| !(b > 0.0 && b.is_finite())) {
            return config("betas must be finite and > 0");
        }
        Ok(())
    }

    pub fn load(&self) -> Result<f64> {
        self.system.load()
    }

    /// Suites that center on the fluid model need an overloaded system.
    pub fn require_overload(&self) -> Result<f64> {
        let rho = self.load()?;
        if rho <= 1.0 {
            return config(format!("this suite needs load > 1, got {rho}"));
        }
        Ok(rho)
    }

    /// Explicit directory, then the environment variable, then `./roslab-out`.
    pub fn resolve_output_dir(&self, flag: Option<PathBuf>) -> PathBuf {
        flag.or_else(|| self.output_dir.clone())
            .or_else(|| std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("roslab-out"))
    }

    pub fn wants(&self, suite: &str) -> bool {
        self.suites.is_empty() || self.suites.iter().any(|s| s == suite)
    }
}
