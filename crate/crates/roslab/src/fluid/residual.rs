//! Quadrature check of the fluid equation, independent of the solver's own pairings.
//!
//! For `g = f − f(0)` (so `g(0) = 0`) every pairing is computed by parts,
//! `⟨h, ξ⟩ = h(0)F(0) + ∫ h'(x) F(x) dx`, with Simpson's rule in `x` and the
//! trapezoidal rule in time.

use super::solver::{fluid_solve_observed, FluidOptions};
use super::state::{FluidParams, FluidState};
use crate::error::Result;
use crate::scalar::Real;
use crate::testfn::TestFunction;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub dt: f64,
    pub max_abs: f64,
    pub per_class: Vec<f64>,
}

/// Simpson weights on `n` equally spaced nodes (trapezoid on a leftover interval).
fn simpson_weights(n: usize, h: f64) -> Vec<f64> {
    let mut w = vec![0.0; n];
    if n < 2 {
        return w;
    }
    let odd_end = if (n - 1) % 2 == 0 { n - 1 } else { n - 2 };
    for (i, wi) in w.iter_mut().enumerate().take(odd_end + 1) {
        *wi = if i == 0 || i == odd_end {
            h / 3.0
        } else if i % 2 == 1 {
            4.0 * h / 3.0
        } else {
            2.0 * h / 3.0
        };
    }
    if odd_end != n - 1 {
        w[n - 2] += 0.5 * h;
        w[n - 1] += 0.5 * h;
    }
    w
}

/// Largest `|residual|` of the fluid equation for `g = f − f(0)` along the solution
/// started at `initial`.
pub fn fluid_residual<T: Real>(
    params: &FluidParams,
    initial: &FluidState<T>,
    horizon: f64,
    opts: &FluidOptions,
    f: &TestFunction,
) -> Result<ResidualReport> {
    let jn = params.classes();
    let dx = opts.dt;
    let nodes = initial.nodes();
    let xs: Vec<f64> = (0..nodes).map(|i| i as f64 * dx).collect();
    let weights = simpson_weights(nodes, dx);
    let g1: Vec<f64> = xs.iter().zip(&weights).map(|(&x, w)| w * f.derivative(x)).collect();
    let g2: Vec<f64> = xs.iter().zip(&weights).map(|(&x, w)| w * f.second_derivative(x)).collect();
    let g1_0 = f.derivative(0.0);
    let source: Vec<f64> = params.patience.iter().map(|d| d.pairing(f) - f.at_zero()).collect();
    let coupling: Vec<f64> = params.weights.iter().zip(&params.service_rates).map(|(p, b)| p / b).collect();
    let k = params.servers as f64;

    struct Sample {
        a: Vec<f64>,
        drift: Vec<f64>,
    }
    let mut samples: Vec<Sample> = Vec::new();
    fluid_solve_observed(params, initial, horizon, opts, |s: &FluidState<T>| {
        let z: Vec<f64> = s.z().iter().map(|v| v.to64()).collect();
        let nonzero = z.iter().any(|&v| v != 0.0);
        let lcal: f64 = z.iter().zip(&coupling).map(|(a, c)| a * c).sum();
        let mut a = Vec::with_capacity(jn);
        let mut drift = Vec::with_capacity(jn);
        for j in 0..jn {
            let fj = &s.survival[j];
            let (mut aj, mut bj) = (0.0, g1_0 * fj[0].to64());
            for ((u, v1), v2) in fj.iter().zip(&g1).zip(&g2) {
                let u = u.to64();
                aj += u * v1;
                bj += u * v2;
            }
            let service = if nonzero { k * params.weights[j] * aj / lcal } else { 0.0 };
            let arrivals = params.arrival_rate_at(j, s.t.to64()) * source[j];
            a.push(aj);
            drift.push(-bj - service + arrivals);
        }
        samples.push(Sample { a, drift });
    })?;

    let mut per_class = vec![0.0f64; jn];
    let mut integral = vec![0.0f64; jn];
    for n in 1..samples.len() {
        for j in 0..jn {
            integral[j] += 0.5 * dx * (samples[n - 1].drift[j] + samples[n].drift[j]);
            let r = samples[n].a[j] - samples[0].a[j] - integral[j];
            per_class[j] = per_class[j].max(r.abs());
        }
    }
    let max_abs = per_class.iter().cloned().fold(0.0, f64::max);
    Ok(ResidualReport { dt: opts.dt, max_abs, per_class })
}
