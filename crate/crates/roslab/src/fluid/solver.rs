//! Characteristics scheme for the per-class survival functions.
//!
//! With `Δx = dt`, one step maps node `i+1` to node `i`:
//!
//! ```text
//! F(t+dt, x_i) = F(t, x_{i+1})·E + α·dt/2·(θ̄(x_i) + θ̄(x_{i+1})·E),   E = e^{−c̄·dt}
//! ```
//!
//! where `c̄` averages the removal rate `K p_j / 𝓛(z)` at the old state and at a
//! predicted new state (Heun). Only node 0 is needed for the prediction.

use super::state::{grid_values, pairing_on_grid, FluidInitial, FluidParams, FluidState, FluidView};
use crate::error::{config, domain, Error, Result};
use crate::scalar::Real;
use crate::testfn::TestFunction;
use serde::{Deserialize, Serialize};
use std::io::Write;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FluidOptions {
    pub dt: f64,
    /// Floor for `𝓛(z)` on a nonzero state.
    pub floor: f64,
    /// Survival level at which the x-grid is truncated.
    pub truncation: f64,
    pub max_nodes: usize,
    /// Test functions whose pairings are cached at every time node.
    pub functionals: Vec<TestFunction>,
    /// Keep the full state every this many steps (initial and final are always kept).
    pub snapshot_every: Option<usize>,
    /// The integrated total-mass balance residual may not exceed
    /// `factor · dt · (1 + Σα)`; exceeding it is an accuracy error.
    pub mass_balance_factor: Option<f64>,
}

impl FluidOptions {
    pub fn new(dt: f64) -> Self {
        FluidOptions {
            dt,
            floor: 1e-10,
            truncation: 1e-10,
            max_nodes: 20_000_000,
            functionals: vec![TestFunction::Indicator],
            snapshot_every: None,
            mass_balance_factor: Some(5.0),
        }
    }

    pub fn with_functionals(mut self, fs: impl IntoIterator<Item = TestFunction>) -> Self {
        for f in fs {
            if !self.functionals.contains(&f) {
                self.functionals.push(f);
            }
        }
        self
    }
}

/// Number of x-nodes so that the initial survival and every `θ̄_j` are below
/// `opts.truncation` at the last node.
pub fn grid_nodes(params: &FluidParams, init: &FluidInitial, opts: &FluidOptions) -> Result<usize> {
    if !(opts.dt > 0.0 && opts.dt.is_finite()) {
        return domain(format!("dt must be > 0, got {}", opts.dt));
    }
    let tol = opts.truncation;
    let above = |x: f64| {
        params.patience.iter().any(|d| d.survival(x) > tol)
            || init.masses.iter().zip(&init.laws).any(|(&m, d)| m * d.survival(x) > tol)
    };
    let mut hi = 1.0;
    while above(hi) {
        hi *= 2.0;
        if hi > opts.max_nodes as f64 * opts.dt {
            return Err(Error::Accuracy(format!(
                "survival functions exceed {tol:e} beyond {} grid nodes",
                opts.max_nodes
            )));
        }
    }
    let mut lo = 0.0;
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if above(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let nodes = (hi / opts.dt).ceil() as usize + 2;
    if nodes > opts.max_nodes {
        return Err(Error::Accuracy(format!("grid needs {nodes} nodes, limit {}", opts.max_nodes)));
    }
    Ok(nodes)
}

/// Initial state on the grid chosen by [`grid_nodes`].
pub fn initial_state<T: Real>(params: &FluidParams, init: &FluidInitial, opts: &FluidOptions) -> Result<FluidState<T>> {
    params.validate()?;
    if init.masses.len() != params.classes() || init.laws.len() != params.classes() {
        return config("initial condition must have one mass and one law per class");
    }
    for d in &init.laws {
        d.validate(crate::primitives::Role::InitialPatience)?;
    }
    let nodes = grid_nodes(params, init, opts)?;
    Ok(FluidState::from_initial(init, opts.dt, nodes))
}

/// One-step map of the scheme.
pub struct FluidStepper<T> {
    params: FluidParams,
    alpha: Vec<T>,
    coupling: Vec<T>,
    removal: Vec<T>,
    theta: Vec<Vec<T>>,
    floor: T,
    pub state: FluidState<T>,
}

impl<T: Real> FluidStepper<T> {
    pub fn new(params: &FluidParams, state: FluidState<T>, floor: f64) -> Result<Self> {
        params.validate()?;
        if state.classes() != params.classes() {
            return config("state and parameters disagree on the class count");
        }
        let nodes = state.nodes();
        let dx = state.dx.to64();
        let k = T::from_usize(params.servers).expect("servers");
        Ok(FluidStepper {
            params: params.clone(),
            alpha: params.arrival_rates.iter().map(|&a| T::lit(a)).collect(),
            coupling: params.weights.iter().zip(&params.service_rates).map(|(&p, &b)| T::lit(p / b)).collect(),
            removal: params.weights.iter().map(|&p| k * T::lit(p)).collect(),
            theta: params
                .patience
                .iter()
                .map(|d| (0..nodes).map(|i| T::lit(d.survival(i as f64 * dx))).collect())
                .collect(),
            floor: T::lit(floor),
            state,
        })
    }

    fn adjusted(&self, z: impl Iterator<Item = T>) -> T {
        z.zip(&self.coupling).map(|(a, &c)| a * c).sum()
    }

    fn checked_rate(&self, lcal: T, t: T) -> Result<T> {
        if lcal < self.floor {
            return Err(Error::Singularity { t: t.to64(), value: lcal.to64(), floor: self.floor.to64() });
        }
        Ok(T::one() / lcal)
    }

    /// Advance by one step.
    pub fn step(&mut self) -> Result<()> {
        self.advance(false).map(|_| ())
    }

    /// Advance by one step and return the sup-norm change of the state.
    pub fn step_measured(&mut self) -> Result<T> {
        self.advance(true)
    }

    fn advance(&mut self, measure: bool) -> Result<T> {
        let dt = self.state.dx;
        let half = T::lit(0.5) * dt;
        let t = self.state.t;
        let mid = (t + half).to64();
        for (j, a) in self.alpha.iter_mut().enumerate() {
            *a = T::lit(self.params.arrival_rate_at(j, mid));
        }
        if self.state.is_zero() {
            if self.alpha.iter().any(|&a| a > T::zero()) {
                return Err(Error::Precondition(format!(
                    "fluid state is zero at t={t} while arrivals are active; start from a nonzero state"
                )));
            }
            self.state.t = t + dt;
            return Ok(T::zero());
        }
        self.state.t = t + dt;
        let inv0 = self.checked_rate(self.adjusted(self.state.survival.iter().map(|s| s[0])), t)?;
        let predicted = self.state.survival.iter().enumerate().map(|(j, s)| {
            let e = (-self.removal[j] * inv0 * dt).exp();
            let next = if s.len() > 1 { s[1] } else { T::zero() };
            let th1 = if s.len() > 1 { self.theta[j][1] } else { T::zero() };
            next * e + self.alpha[j] * half * (self.theta[j][0] + th1 * e)
        });
        let inv1 = self.checked_rate(self.adjusted(predicted), t + dt)?;
        let mut change = T::zero();
        for j in 0..self.state.survival.len() {
            let rate = self.removal[j] * T::lit(0.5) * (inv0 + inv1);
            let e = (-rate * dt).exp();
            let src = self.alpha[j] * half;
            let th = &self.theta[j];
            let s = &mut self.state.survival[j];
            let n = s.len();
            for i in 0..n - 1 {
                let new = s[i + 1] * e + src * (th[i] + th[i + 1] * e);
                if measure {
                    change = change.max((new - s[i]).abs());
                }
                s[i] = new;
            }
            let last = src * th[n - 1];
            change = change.max((last - s[n - 1]).abs());
            s[n - 1] = last;
        }
        Ok(change)
    }
}

/// Time-gridded fluid solution with cached functionals and sparse snapshots.
#[derive(Debug, Clone)]
pub struct FluidPath<T> {
    pub dt: T,
    pub times: Vec<T>,
    /// `z[n][j]`.
    pub z: Vec<Vec<T>>,
    functionals: Vec<TestFunction>,
    /// `cache[r][n][j] = ⟨f_r, ξ_j(t_n)⟩`.
    cache: Vec<Vec<Vec<T>>>,
    pub snapshots: Vec<FluidState<T>>,
    pub final_state: FluidState<T>,
    /// Mass that may have been dropped by truncating the x-grid.
    pub truncated_mass: T,
    /// Largest integrated total-mass balance residual over the path.
    pub mass_balance_residual: T,
    pub coupling: Vec<T>,
    pub weights: Vec<T>,
}

impl<T: Real> FluidPath<T> {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn registered(&self) -> &[TestFunction] {
        &self.functionals
    }

    /// Node index of grid time `t`.
    pub fn node(&self, t: f64) -> Result<usize> {
        let t0 = self.times[0].to64();
        let dt = self.dt.to64();
        let pos = (t - t0) / dt;
        let n = pos.round();
        if n < 0.0 || n as usize >= self.times.len() || (pos - n).abs() > 1e-6 {
            return domain(format!("t={t} is not on the fluid grid"));
        }
        Ok(n as usize)
    }

    fn slot(&self, f: &TestFunction) -> Result<usize> {
        self.functionals
            .iter()
            .position(|g| g == f)
            .ok_or_else(|| Error::Config(format!("test function {} not registered with the fluid path", f.tag())))
    }

    /// `⟨f, ξ_j(t)⟩` for a registered `f` at grid time `t`.
    pub fn functional(&self, f: &TestFunction, t: f64, class: usize) -> Result<T> {
        let r = self.slot(f)?;
        Ok(self.cache[r][self.node(t)?][class])
    }

    pub fn functional_at_node(&self, f: &TestFunction, n: usize, class: usize) -> Result<T> {
        Ok(self.cache[self.slot(f)?][n][class])
    }

    pub fn at(&self, n: usize) -> NodeView<'_, T> {
        NodeView { path: self, n }
    }

    pub fn snapshot_at(&self, t: f64) -> Option<&FluidState<T>> {
        self.snapshots
            .iter()
            .chain(std::iter::once(&self.final_state))
            .find(|s| (s.t.to64() - t).abs() <= 1e-6 * self.dt.to64())
    }

    /// CSV rows `t,class,z`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t,class,z")?;
        for (t, z) in self.times.iter().zip(&self.z) {
            for (j, v) in z.iter().enumerate() {
                writeln!(w, "{t},{j},{v}")?;
            }
        }
        Ok(())
    }

    /// Survival dump of the snapshots: one line per `(t, class)` holding `x0`, `dx`
    /// and the space-separated values with the zero tail trimmed.
    pub fn write_survival_dump<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t,class,x0,dx,F")?;
        for s in self.snapshots.iter().chain(std::iter::once(&self.final_state)) {
            for (j, f) in s.survival.iter().enumerate() {
                let end = f.iter().rposition(|v| *v != T::zero()).map_or(0, |p| p + 1);
                let vals: Vec<String> = f[..end].iter().map(|v| v.to_string()).collect();
                writeln!(w, "{},{j},0,{},{}", s.t, s.dx, vals.join(" "))?;
            }
        }
        Ok(())
    }
}

/// The path at one node, read through the functional cache.
#[derive(Clone, Copy)]
pub struct NodeView<'a, T> {
    path: &'a FluidPath<T>,
    n: usize,
}

impl<T: Real> FluidView<T> for NodeView<'_, T> {
    fn time(&self) -> T {
        self.path.times[self.n]
    }
    fn z(&self) -> Vec<T> {
        self.path.z[self.n].clone()
    }
    fn pairing(&self, class: usize, f: &TestFunction) -> Result<T> {
        self.path.functional_at_node(f, self.n, class)
    }
}

/// Solve on `[t0, t0 + horizon]` from `initial` (whose `dx` must equal `opts.dt`).
pub fn fluid_solve<T: Real>(
    params: &FluidParams,
    initial: &FluidState<T>,
    horizon: f64,
    opts: &FluidOptions,
) -> Result<FluidPath<T>> {
    fluid_solve_observed(params, initial, horizon, opts, |_| {})
}

/// [`fluid_solve`] calling `observer` on the state at every time node.
pub fn fluid_solve_observed<T: Real>(
    params: &FluidParams,
    initial: &FluidState<T>,
    horizon: f64,
    opts: &FluidOptions,
    mut observer: impl FnMut(&FluidState<T>),
) -> Result<FluidPath<T>> {
    if !(opts.dt > 0.0) {
        return domain(format!("dt must be > 0, got {}", opts.dt));
    }
    if (initial.dx.to64() - opts.dt).abs() > 1e-12 * opts.dt {
        return domain("initial state grid spacing must equal dt");
    }
    if !(horizon >= 0.0 && horizon.is_finite()) {
        return domain(format!("horizon must be finite and >= 0, got {horizon}"));
    }
    let steps = (horizon / opts.dt).round() as usize;
    let mut stepper = FluidStepper::new(params, initial.clone(), opts.floor)?;
    let nodes = initial.nodes();
    let fvals: Vec<Vec<T>> = opts.functionals.iter().map(|f| grid_values(f, initial.dx, nodes)).collect();
    let jn = params.classes();
    let mut times = Vec::with_capacity(steps + 1);
    let mut z = Vec::with_capacity(steps + 1);
    let mut cache = vec![Vec::with_capacity(steps + 1); opts.functionals.len()];
    let mut snapshots = vec![initial.clone()];

    let coupling: Vec<T> = stepper.coupling.clone();
    let removal: Vec<T> = stepper.removal.clone();
    let dt = initial.dx;
    let half = T::lit(0.5);
    // Integrated balance z(t) − z(0) − ∫(α − renege − K p z/𝓛) per class.
    let mut balance = vec![T::zero(); jn];
    let mut worst = T::zero();
    let mut prev_rate: Option<Vec<T>> = None;
    let rate_of = |s: &FluidState<T>| -> Vec<T> {
        let zz = s.z();
        let lcal: T = zz.iter().zip(&coupling).map(|(&a, &c)| a * c).sum();
        (0..jn)
            .map(|j| {
                if s.is_zero() {
                    return T::zero();
                }
                let f = &s.survival[j];
                let renege = if f.len() > 1 { (f[0] - f[1]) / dt } else { T::zero() };
                T::lit(params.arrival_rate_at(j, s.t.to64())) - renege - removal[j] * zz[j] / lcal
            })
            .collect()
    };
    let z0 = initial.z();

    for n in 0..=steps {
        let s = &stepper.state;
        observer(s);
        times.push(s.t);
        z.push(s.z());
        for (r, fv) in fvals.iter().enumerate() {
            let row = if opts.functionals[r] == TestFunction::Indicator {
                s.z()
            } else {
                (0..jn).map(|j| pairing_on_grid(&s.survival[j], fv)).collect::<Vec<T>>()
            };
            cache[r].push(row);
        }
        let rate = rate_of(s);
        if let Some(prev) = prev_rate.as_ref() {
            for j in 0..jn {
                balance[j] = balance[j] + half * dt * (prev[j] + rate[j]);
                worst = worst.max((s.survival[j][0] - z0[j] - balance[j]).abs());
            }
        }
        prev_rate = Some(rate);
        if n > 0 && n < steps {
            if let Some(every) = opts.snapshot_every {
                if every > 0 && n % every == 0 {
                    snapshots.push(s.clone());
                }
            }
        }
        if n < steps {
            stepper.step()?;
        }
    }
    if let Some(factor) = opts.mass_balance_factor {
        let tol = factor * opts.dt * (1.0 + params.arrival_rates.iter().sum::<f64>());
        if worst.to64() > tol {
            return Err(Error::Accuracy(format!(
                "total-mass balance residual {} exceeds {tol}; refine dt",
                worst
            )));
        }
    }
    let truncated = params
        .arrival_rates
        .iter()
        .zip(&stepper.theta)
        .map(|(&a, th)| T::lit(a * horizon) * *th.last().expect("nonempty grid"))
        .sum::<T>()
        + initial.survival.iter().map(|s| *s.last().expect("nonempty grid")).sum::<T>();
    Ok(FluidPath {
        dt,
        times,
        z,
        functionals: opts.functionals.clone(),
        cache,
        snapshots,
        final_state: stepper.state,
        truncated_mass: truncated,
        mass_balance_residual: worst,
        coupling,
        weights: params.weights.iter().map(|&p| T::lit(p)).collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvariantOptions {
    pub dt: f64,
    pub tolerance: f64,
    pub max_horizon: f64,
}

impl Default for InvariantOptions {
    fn default() -> Self {
        InvariantOptions { dt: 1e-2, tolerance: 1e-8, max_horizon: 2_000.0 }
    }
}

/// Integrate until successive states differ by less than `tolerance` in sup norm.
///
/// Starts from the arrival-only profile `α_j ∫_x^∞ θ̄_j`.
pub fn invariant_state<T: Real>(params: &FluidParams, opts: &InvariantOptions) -> Result<FluidState<T>> {
    params.validate()?;
    if params.load() <= 1.0 {
        return Err(Error::Precondition(format!("invariant state needs load > 1, got {}", params.load())));
    }
    let fopts = FluidOptions::new(opts.dt);
    let nodes = grid_nodes(params, &FluidInitial::zero(params), &fopts)?;
    let dx = opts.dt;
    let survival: Vec<Vec<T>> = params
        .patience
        .iter()
        .zip(&params.arrival_rates)
        .map(|(d, &a)| {
            let th: Vec<f64> = (0..nodes).map(|i| d.survival(i as f64 * dx)).collect();
            let mut tail = vec![0.0; nodes];
            for i in (0..nodes - 1).rev() {
                tail[i] = tail[i + 1] + 0.5 * dx * (th[i] + th[i + 1]);
            }
            tail.into_iter().map(|v| T::lit(a * v)).collect()
        })
        .collect();
    let start = FluidState { t: T::zero(), dx: T::lit(dx), survival };
    let mut stepper = FluidStepper::new(params, start, fopts.floor)?;
    let max_steps = (opts.max_horizon / dx).ceil() as usize;
    for _ in 0..max_steps {
        if stepper.step_measured()?.to64() < opts.tolerance {
            let mut s = stepper.state;
            s.t = T::zero();
            return Ok(s);
        }
    }
    Err(Error::Convergence(format!(
        "fluid state still changing after t={} (tolerance {:e})",
        opts.max_horizon, opts.tolerance
    )))
}

/// `max_j |z_j(t+dt) − z_j(t)| / dt` after one step from `state`.
pub fn stationarity_residual<T: Real>(params: &FluidParams, state: &FluidState<T>) -> Result<T> {
    let mut stepper = FluidStepper::new(params, state.clone(), 1e-10)?;
    let z0 = state.z();
    stepper.step()?;
    let z1 = stepper.state.z();
    Ok(z0.iter().zip(&z1).map(|(&a, &b)| (a - b).abs()).fold(T::zero(), T::max) / state.dx)
}
