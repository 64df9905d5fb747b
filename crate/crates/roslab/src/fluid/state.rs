use crate::error::{config, Result};
use crate::primitives::{DistributionSpec, Role};
use crate::scalar::Real;
use crate::simulator::{InitialQueue, SystemConfig};
use crate::testfn::TestFunction;
use serde::{Deserialize, Serialize};

/// Fluid model parameters `(α, β, p, θ)` and the server count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FluidParams {
    pub arrival_rates: Vec<f64>,
    pub service_rates: Vec<f64>,
    pub weights: Vec<f64>,
    pub servers: usize,
    pub patience: Vec<DistributionSpec>,
    /// Time at which class-`j` arrivals begin; empty means all start at 0.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub arrival_start: Vec<f64>,
}

impl FluidParams {
    pub fn from_config(cfg: &SystemConfig) -> Result<Self> {
        cfg.validate()?;
        let p = FluidParams {
            arrival_rates: cfg.arrival_rates(),
            service_rates: cfg.service_rates()?,
            weights: cfg.weights.clone(),
            servers: cfg.servers,
            patience: cfg.patience.clone(),
            arrival_start: Vec::new(),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn classes(&self) -> usize {
        self.weights.len()
    }

    pub fn validate(&self) -> Result<()> {
        let j = self.classes();
        if j == 0 || self.servers == 0 {
            return config("fluid parameters need at least one class and one server");
        }
        if self.arrival_rates.len() != j || self.service_rates.len() != j || self.patience.len() != j {
            return config("fluid parameter vectors must all have length J");
        }
        for (&a, &b) in self.arrival_rates.iter().zip(&self.service_rates) {
            if !(a > 0.0 && a.is_finite() && b > 0.0 && b.is_finite()) {
                return config("arrival and service rates must be finite and > 0");
            }
        }
        if self.weights.iter().any(|&p| !(p > 0.0 && p <= 1.0))
            || (self.weights.iter().sum::<f64>() - 1.0).abs() > 1e-9
        {
            return config("weights must lie in (0, 1] and sum to 1");
        }
        for d in &self.patience {
            d.validate(Role::Patience)?;
        }
        if !self.arrival_start.is_empty()
            && (self.arrival_start.len() != j || self.arrival_start.iter().any(|&s| !(s >= 0.0)))
        {
            return config("arrival start times must have length J and be >= 0");
        }
        Ok(())
    }

    /// `α_j` if class-`j` arrivals are active at `t`, else 0.
    pub fn arrival_rate_at(&self, j: usize, t: f64) -> f64 {
        match self.arrival_start.get(j) {
            Some(&s) if t < s => 0.0,
            _ => self.arrival_rates[j],
        }
    }

    pub fn load(&self) -> f64 {
        super::mass::load(&self.arrival_rates, &self.service_rates, self.servers)
    }
}

/// Continuous initial condition `ξ_j(0) = z₀ⱼ · law_j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FluidInitial {
    pub masses: Vec<f64>,
    pub laws: Vec<DistributionSpec>,
}

impl FluidInitial {
    /// Limit of the scaled initial queues of `cfg` (drawn masses only).
    pub fn from_config(cfg: &SystemConfig) -> Result<Self> {
        let mut masses = Vec::new();
        let mut laws = Vec::new();
        for j in 0..cfg.classes {
            match cfg.initial_queue(j) {
                InitialQueue::Drawn { mass, patience } => {
                    masses.push(mass);
                    laws.push(patience);
                }
                InitialQueue::Explicit { remaining } if remaining.is_empty() => {
                    masses.push(0.0);
                    laws.push(cfg.patience[j].clone());
                }
                InitialQueue::Explicit { .. } => {
                    return config("fluid initial condition needs drawn (continuous) initial queues")
                }
            }
        }
        Ok(FluidInitial { masses, laws })
    }

    pub fn zero(params: &FluidParams) -> Self {
        FluidInitial { masses: vec![0.0; params.classes()], laws: params.patience.clone() }
    }
}

/// Survival-function representation `F_j(x_i) = ξ_j(t)(x_i, ∞)` on `x_i = i·dx`.
#[derive(Debug, Clone, PartialEq)]
pub struct FluidState<T> {
    pub t: T,
    pub dx: T,
    pub survival: Vec<Vec<T>>,
}

impl<T: Real> FluidState<T> {
    pub fn zero(classes: usize, nodes: usize, dx: f64) -> Self {
        FluidState { t: T::zero(), dx: T::lit(dx), survival: vec![vec![T::zero(); nodes]; classes] }
    }

    pub fn from_initial(init: &FluidInitial, dx: f64, nodes: usize) -> Self {
        let survival = init
            .masses
            .iter()
            .zip(&init.laws)
            .map(|(&m, law)| (0..nodes).map(|i| T::lit(m * law.survival(i as f64 * dx))).collect())
            .collect();
        FluidState { t: T::zero(), dx: T::lit(dx), survival }
    }

    pub fn classes(&self) -> usize {
        self.survival.len()
    }

    pub fn nodes(&self) -> usize {
        self.survival.first().map_or(0, |s| s.len())
    }

    pub fn z(&self) -> Vec<T> {
        self.survival.iter().map(|s| s[0]).collect()
    }

    pub fn is_zero(&self) -> bool {
        self.survival.iter().all(|s| s[0] == T::zero())
    }

    /// `⟨f, ξ_j⟩` by trapezoidal Stieltjes integration against `−dF_j`; the indicator
    /// reads `F_j(0)` directly.
    pub fn pairing(&self, class: usize, f: &TestFunction) -> T {
        if *f == TestFunction::Indicator {
            return self.survival[class][0];
        }
        let values = grid_values(f, self.dx, self.nodes());
        pairing_on_grid(&self.survival[class], &values)
    }
}

/// `f` on the grid, with the right limit at 0.
pub(crate) fn grid_values<T: Real>(f: &TestFunction, dx: T, nodes: usize) -> Vec<T> {
    let mut v: Vec<T> = (0..nodes).map(|i| f.eval_at(T::from_usize(i).expect("index") * dx)).collect();
    if let Some(first) = v.first_mut() {
        *first = T::lit(f.at_zero());
    }
    v
}

pub(crate) fn pairing_on_grid<T: Real>(survival: &[T], f: &[T]) -> T {
    let n = survival.len();
    let half = T::lit(0.5);
    let mut acc = T::zero();
    for i in 0..n - 1 {
        acc = acc + half * (f[i] + f[i + 1]) * (survival[i] - survival[i + 1]);
    }
    acc + f[n - 1] * survival[n - 1]
}

/// Read access to the fluid solution at one time, shared by the SDE builders.
pub trait FluidView<T: Real> {
    fn time(&self) -> T;
    fn z(&self) -> Vec<T>;
    fn pairing(&self, class: usize, f: &TestFunction) -> Result<T>;
}

impl<T: Real> FluidView<T> for FluidState<T> {
    fn time(&self) -> T {
        self.t
    }
    fn z(&self) -> Vec<T> {
        FluidState::z(self)
    }
    fn pairing(&self, class: usize, f: &TestFunction) -> Result<T> {
        Ok(FluidState::pairing(self, class, f))
    }
}
