//! Euler–Maruyama integration with one random substream per path and channel.

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;

use super::coefficients::SdeCoefficients;
use super::matrix::{psd_sqrt, Matrix};
use crate::error::{domain, Result};
use crate::primitives::{substream, StreamKind};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialCondition {
    Zero,
    Fixed { value: Vec<f64> },
    Gaussian { mean: Vec<f64>, covariance: Vec<Vec<f64>> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegrateOptions {
    pub dt: f64,
    pub horizon: f64,
    pub paths: usize,
    pub seed: u64,
    /// Times at which states are stored; the terminal time is always stored last.
    #[serde(default)]
    pub record: Vec<f64>,
}

/// `states[path][r][coordinate]` at `times[r]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SdeSamples<T> {
    pub times: Vec<f64>,
    pub states: Vec<Vec<Vec<T>>>,
}

impl<T: Real> SdeSamples<T> {
    /// Values of coordinate `c` at recorded time index `r`, across paths.
    pub fn coordinate(&self, r: usize, c: usize) -> Vec<f64> {
        self.states.iter().map(|p| p[r][c].to64()).collect()
    }

    pub fn terminal(&self, c: usize) -> Vec<f64> {
        self.coordinate(self.times.len() - 1, c)
    }

    /// Rows `path,t,x0,x1,…`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let d = self.states.first().and_then(|p| p.first()).map_or(0, |s| s.len());
        let cols: Vec<String> = (0..d).map(|c| format!("x{c}")).collect();
        writeln!(w, "path,t,{}", cols.join(","))?;
        for (p, path) in self.states.iter().enumerate() {
            for (t, x) in self.times.iter().zip(path) {
                let vals: Vec<String> = x.iter().map(|v| v.to_string()).collect();
                writeln!(w, "{p},{t},{}", vals.join(","))?;
            }
        }
        Ok(())
    }
}

fn initial_sampler<T: Real>(init: &InitialCondition, d: usize) -> Result<(Vec<T>, Option<Matrix<T>>)> {
    match init {
        InitialCondition::Zero => Ok((vec![T::zero(); d], None)),
        InitialCondition::Fixed { value } => {
            if value.len() != d {
                return domain(format!("initial value has {} entries, expected {d}", value.len()));
            }
            Ok((value.iter().map(|&v| T::lit(v)).collect(), None))
        }
        InitialCondition::Gaussian { mean, covariance } => {
            if mean.len() != d || covariance.len() != d {
                return domain("initial Gaussian has the wrong dimension");
            }
            let cov = Matrix::<T>::from_rows(
                &covariance.iter().map(|r| r.iter().map(|&v| T::lit(v)).collect()).collect::<Vec<_>>(),
            )?;
            Ok((mean.iter().map(|&v| T::lit(v)).collect(), Some(psd_sqrt(&cov)?)))
        }
    }
}

/// Integrate `n_paths` independent paths from `t = nodes[0].t` over `horizon`.
pub fn integrate<T: Real>(
    coeffs: &SdeCoefficients<T>,
    init: &InitialCondition,
    opts: &IntegrateOptions,
) -> Result<SdeSamples<T>> {
    if !(opts.dt > 0.0 && opts.dt.is_finite()) {
        return domain(format!("dt must be > 0, got {}", opts.dt));
    }
    if !(opts.horizon >= 0.0) {
        return domain("horizon must be ≥ 0");
    }
    if coeffs.nodes.is_empty() {
        return domain("no coefficient nodes");
    }
    let spacing = coeffs.nodes.windows(2).map(|w| (w[1].t - w[0].t).to64()).fold(0.0, f64::max);
    if spacing > opts.dt * (1.0 + 1e-9) {
        return domain(format!("coefficient grid spacing {spacing} is coarser than dt {}", opts.dt));
    }
    let d = coeffs.dim();
    let (mean, chol) = initial_sampler::<T>(init, d)?;
    let t0 = coeffs.nodes[0].t.to64();
    let steps = (opts.horizon / opts.dt).round() as usize;
    let mut record: Vec<(usize, f64)> = opts
        .record
        .iter()
        .filter(|&&t| t >= 0.0 && t < opts.horizon)
        .map(|&t| ((t / opts.dt).round() as usize, t))
        .collect();
    record.push((steps, opts.horizon));
    let times: Vec<f64> = record.iter().map(|&(_, t)| t).collect();
    let sqrt_dt = T::lit(opts.dt.sqrt());
    let dt = T::lit(opts.dt);
    let widths: Vec<usize> = coeffs.channels.iter().map(|c| c.width).collect();

    let states = (0..opts.paths)
        .into_par_iter()
        .map(|path| {
            let mut x = mean.clone();
            if let Some(s) = &chol {
                let mut rng = substream(opts.seed, StreamKind::SdeInitial, path as u64, 0);
                let z: Vec<T> = (0..d).map(|_| T::lit(StandardNormal.sample(&mut rng))).collect();
                s.apply_add(&z, &mut x);
            }
            let mut rngs: Vec<_> =
                (0..widths.len()).map(|c| substream(opts.seed, StreamKind::Sde, path as u64, c as u64)).collect();
            let mut out = Vec::with_capacity(record.len());
            let mut next = 0;
            let mut dx = vec![T::zero(); d];
            let mut noise: Vec<Vec<T>> = widths.iter().map(|&w| vec![T::zero(); w]).collect();
            for step in 0..=steps {
                while next < record.len() && record[next].0 == step {
                    out.push(x.clone());
                    next += 1;
                }
                if step == steps {
                    break;
                }
                let node = coeffs.node_at(T::lit(t0 + step as f64 * opts.dt));
                dx.iter_mut().for_each(|v| *v = T::zero());
                node.drift.apply_add(&x, &mut dx);
                for v in dx.iter_mut() {
                    *v = *v * dt;
                }
                for ((g, rng), w) in node.channels.iter().zip(rngs.iter_mut()).zip(noise.iter_mut()) {
                    for v in w.iter_mut() {
                        let z: f64 = StandardNormal.sample(rng);
                        *v = T::lit(z) * sqrt_dt;
                    }
                    g.apply_add(w, &mut dx);
                }
                for (xi, di) in x.iter_mut().zip(&dx) {
                    *xi = *xi + *di;
                }
            }
            out
        })
        .collect();
    Ok(SdeSamples { times, states })
}
