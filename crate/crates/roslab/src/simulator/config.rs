use crate::error::{config, Error, Result};
use crate::primitives::{DistributionSpec, Role};
use serde::{Deserialize, Serialize};

/// Service laws: one per class shared by all servers, or a full `[server][class]` table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ServiceSpecs {
    PerClass(Vec<DistributionSpec>),
    PerServer(Vec<Vec<DistributionSpec>>),
}

impl ServiceSpecs {
    pub fn get(&self, server: usize, class: usize) -> &DistributionSpec {
        match self {
            ServiceSpecs::PerClass(v) => &v[class],
            ServiceSpecs::PerServer(v) => &v[server][class],
        }
    }
}

/// Jobs waiting at time 0 in one class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialQueue {
    /// Remaining patience of each queued job.
    Explicit { remaining: Vec<f64> },
    /// `round(mass)` jobs with i.i.d. remaining patience.
    Drawn { mass: f64, patience: DistributionSpec },
}

impl InitialQueue {
    pub fn empty() -> Self {
        InitialQueue::Explicit { remaining: Vec::new() }
    }

    pub fn count(&self) -> usize {
        match self {
            InitialQueue::Explicit { remaining } => remaining.len(),
            InitialQueue::Drawn { mass, .. } => mass.round() as usize,
        }
    }
}

/// Server state at time 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialServer {
    Idle,
    /// Busy until a residual time drawn from `residual`, on a job of `class`.
    Busy {
        residual: DistributionSpec,
        #[serde(default)]
        class: usize,
    },
}

/// Full parameterization of one prelimit system. Classes and servers are 0-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    pub classes: usize,
    pub servers: usize,
    pub weights: Vec<f64>,
    pub interarrival: Vec<DistributionSpec>,
    /// Law of the first arrival time per class; missing entries mean non-delayed.
    #[serde(default)]
    pub first_arrival: Vec<Option<DistributionSpec>>,
    pub service: ServiceSpecs,
    pub patience: Vec<DistributionSpec>,
    #[serde(default)]
    pub initial_queues: Vec<InitialQueue>,
    /// Missing entries mean idle.
    #[serde(default)]
    pub initial_servers: Vec<InitialServer>,
    pub horizon: f64,
    #[serde(default)]
    pub seed: u64,
}

const MAX_INITIAL_JOBS: f64 = 1e9;

impl SystemConfig {
    pub fn from_json(s: &str) -> Result<Self> {
        let cfg: SystemConfig = serde_json::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn first_arrival(&self, class: usize) -> Option<&DistributionSpec> {
        self.first_arrival.get(class).and_then(|d| d.as_ref())
    }

    pub fn initial_queue(&self, class: usize) -> InitialQueue {
        self.initial_queues.get(class).cloned().unwrap_or_else(InitialQueue::empty)
    }

    pub fn initial_server(&self, server: usize) -> &InitialServer {
        self.initial_servers.get(server).unwrap_or(&InitialServer::Idle)
    }

    pub fn validate(&self) -> Result<()> {
        let (j, k) = (self.classes, self.servers);
        if j == 0 || k == 0 {
            return config("need at least one class and one server");
        }
        let len = |name: &str, n: usize, want: usize| -> Result<()> {
            if n != want {
                config(format!("`{name}` has length {n}, expected {want}"))
            } else {
                Ok(())
            }
        };
        len("weights", self.weights.len(), j)?;
        len("interarrival", self.interarrival.len(), j)?;
        len("patience", self.patience.len(), j)?;
        if self.first_arrival.len() > j {
            return config("`first_arrival` longer than the class count");
        }
        if self.initial_queues.len() > j {
            return config("`initial_queues` longer than the class count");
        }
        if self.initial_servers.len() > k {
            return config("`initial_servers` longer than the server count");
        }
        for &p in &self.weights {
            if !(p > 0.0 && p <= 1.0) {
                return config(format!("weights must lie in (0, 1], got {p}"));
            }
        }
        let total: f64 = self.weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return config(format!("weights must sum to 1, got {total}"));
        }
        match &self.service {
            ServiceSpecs::PerClass(v) => len("service", v.len(), j)?,
            ServiceSpecs::PerServer(v) => {
                len("service", v.len(), k)?;
                for row in v {
                    len("service row", row.len(), j)?;
                }
            }
        }
        for c in 0..j {
            self.interarrival[c].validate(Role::Interarrival)?;
            if let Some(d) = self.first_arrival(c) {
                d.validate(Role::FirstArrival)?;
            }
            self.patience[c].validate(Role::Patience)?;
            for s in 0..k {
                self.service.get(s, c).validate(Role::Service)?;
            }
            match self.initial_queue(c) {
                InitialQueue::Explicit { remaining } => {
                    if let Some(x) = remaining.iter().find(|x| !(x.is_finite() && **x > 0.0)) {
                        return config(format!("initial remaining patience must be > 0, got {x}"));
                    }
                }
                InitialQueue::Drawn { mass, patience } => {
                    if !(mass.is_finite() && mass >= 0.0) {
                        return config(format!("initial mass must be finite and >= 0, got {mass}"));
                    }
                    if mass.round() > MAX_INITIAL_JOBS {
                        return config(format!("initial count {} overflows the supported range", mass.round()));
                    }
                    patience.validate(Role::InitialPatience)?;
                }
            }
        }
        let mut any_idle = false;
        for s in 0..k {
            match self.initial_server(s) {
                InitialServer::Idle => any_idle = true,
                InitialServer::Busy { residual, class } => {
                    residual.validate(Role::InitialResidual)?;
                    if *class >= j {
                        return config(format!("initial server {s} busy on unknown class {class}"));
                    }
                }
            }
        }
        if any_idle && (0..j).any(|c| self.initial_queue(c).count() > 0) {
            return config("non-idling violated: a server is idle at time 0 while a queue is nonempty");
        }
        if !(self.horizon.is_finite() && self.horizon >= 0.0) {
            return config(format!("horizon must be finite and >= 0, got {}", self.horizon));
        }
        Ok(())
    }

    /// `α_j`, reciprocal mean interarrival time.
    pub fn arrival_rates(&self) -> Vec<f64> {
        self.interarrival.iter().map(|d| d.rate()).collect()
    }

    /// `β_j`; requires every server to share the class mean.
    pub fn service_rates(&self) -> Result<Vec<f64>> {
        (0..self.classes)
            .map(|c| {
                let beta = self.service.get(0, c).rate();
                for s in 1..self.servers {
                    let other = self.service.get(s, c).rate();
                    if (other - beta).abs() > 1e-12 * beta {
                        return config(format!("class {c} service rate differs across servers ({beta} vs {other})"));
                    }
                }
                Ok(beta)
            })
            .collect()
    }

    /// `ρ = Σ α_j / (β_j K)`.
    pub fn load(&self) -> Result<f64> {
        let beta = self.service_rates()?;
        Ok(crate::fluid::load(&self.arrival_rates(), &beta, self.servers))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn two_class() -> SystemConfig {
        SystemConfig {
            classes: 2,
            servers: 2,
            weights: vec![0.6, 0.4],
            interarrival: vec![DistributionSpec::exponential(1.6), DistributionSpec::exponential(1.0)],
            first_arrival: vec![],
            service: ServiceSpecs::PerClass(vec![DistributionSpec::exponential(1.0); 2]),
            patience: vec![DistributionSpec::exponential(0.5), DistributionSpec::exponential(0.4)],
            initial_queues: vec![],
            initial_servers: vec![],
            horizon: 10.0,
            seed: 1,
        }
    }

    #[test]
    fn valid_config_and_load() {
        let c = two_class();
        c.validate().unwrap();
        assert!((c.load().unwrap() - 1.3).abs() < 1e-12);
    }

    #[test]
    fn weight_violations_are_named() {
        let mut c = two_class();
        c.weights = vec![0.5, 0.4];
        let msg = c.validate().unwrap_err().to_string();
        assert!(msg.contains("weights must sum to 1"), "{msg}");
    }

    #[test]
    fn non_idling_consistency() {
        let mut c = two_class();
        c.initial_queues = vec![InitialQueue::Explicit { remaining: vec![1.0] }];
        assert!(c.validate().is_err());
        c.initial_servers = vec![
            InitialServer::Busy { residual: DistributionSpec::exponential(1.0), class: 0 },
            InitialServer::Busy { residual: DistributionSpec::exponential(1.0), class: 1 },
        ];
        c.validate().unwrap();
    }

    #[test]
    fn atomless_roles() {
        let mut c = two_class();
        c.service = ServiceSpecs::PerClass(vec![DistributionSpec::deterministic(1.0); 2]);
        assert!(c.validate().is_err());
        let mut c = two_class();
        c.first_arrival = vec![Some(DistributionSpec::deterministic(100.0))];
        c.validate().unwrap();
    }

    #[test]
    fn json_round_trip() {
        let c = two_class();
        let s = serde_json::to_string(&c).unwrap();
        assert_eq!(SystemConfig::from_json(&s).unwrap(), c);
    }
}
