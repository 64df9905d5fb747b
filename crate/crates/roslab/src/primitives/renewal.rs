//! Renewal counting processes and their martingale/remainder decomposition.
//!
//! Convention: the first jump happens at `x₀`, later jumps are separated by
//! `x₁, x₂, …`. A delayed stream fixes `x₀`; a non-delayed stream draws `x₀` from
//! the interevent law and is then handled exactly like a delayed one. With `E(t)`
//! jumps in `[0, t]`,
//!
//! ```text
//! O(t) = Σ_{l=1}^{E(t)} (1 − x_l / E[x])
//! r(t) = Σ_{l=0}^{E(t)} x_l − t
//! R(t) = (r(t) + t − x₀) / E[x]
//! ```
//!
//! so that `E(t) = O(t) + R(t)` holds pathwise and `O` has mean zero.

use super::distribution::{DistributionSpec, Sampler};
use super::rng::StreamRng;
use crate::error::{domain, Error, Result};
use rand::SeedableRng;
use rand_distr::Distribution;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone)]
pub struct RenewalStream {
    mean: f64,
    delay: Option<f64>,
    source: Option<(Sampler, StreamRng)>,
    /// `x₁, x₂, …`
    draws: Vec<f64>,
    /// `x₀, x₀+x₁, …`
    jumps: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RenewalDecomposition {
    pub count: usize,
    pub martingale: f64,
    pub remainder: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScaleMode {
    Fluid,
    Diffusion,
}

impl RenewalStream {
    /// Random stream. `delay = None` draws `x₀` from `interevent`.
    pub fn new(interevent: &DistributionSpec, delay: Option<f64>, seed: u64) -> Result<Self> {
        if let Some(d) = delay {
            if !(d.is_finite() && d >= 0.0) {
                return domain(format!("delay must be finite and >= 0, got {d}"));
            }
        }
        let sampler = interevent.sampler();
        let mut rng = StreamRng::seed_from_u64(seed);
        let x0 = delay.unwrap_or_else(|| sampler.sample(&mut rng));
        Ok(RenewalStream {
            mean: interevent.mean(),
            delay,
            source: Some((sampler, rng)),
            draws: Vec::new(),
            jumps: vec![x0],
        })
    }

    /// Hand-built stream from `x₀` and the subsequent interevents.
    pub fn from_interevents(mean: f64, x0: f64, draws: Vec<f64>, delayed: bool) -> Self {
        let mut jumps = Vec::with_capacity(draws.len() + 1);
        jumps.push(x0);
        for &x in &draws {
            let last = *jumps.last().expect("nonempty");
            jumps.push(last + x);
        }
        RenewalStream { mean, delay: delayed.then_some(x0), source: None, draws, jumps }
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn is_delayed(&self) -> bool {
        self.delay.is_some()
    }

    pub fn x0(&self) -> f64 {
        self.jumps[0]
    }

    pub fn jumps(&self) -> &[f64] {
        &self.jumps
    }

    pub fn draws(&self) -> &[f64] {
        &self.draws
    }

    /// Whether the jump following `t` is known.
    pub fn covers(&self, t: f64) -> bool {
        *self.jumps.last().expect("nonempty") > t
    }

    /// Draw interevents until some jump lies strictly after `t`.
    pub fn realize_until(&mut self, t: f64) -> Result<()> {
        while !self.covers(t) {
            let (sampler, rng) = self
                .source
                .as_mut()
                .ok_or_else(|| Error::Precondition(format!("hand-built stream not realized past t={t}")))?;
            let x = sampler.sample(rng);
            let last = *self.jumps.last().expect("nonempty");
            self.draws.push(x);
            self.jumps.push(last + x);
        }
        Ok(())
    }

    /// `E(t)`, the number of jumps in `[0, t]`.
    pub fn count(&self, t: f64) -> usize {
        self.jumps.partition_point(|&s| s <= t)
    }

    pub fn decompose(&self, t: f64) -> Result<RenewalDecomposition> {
        if !(t >= 0.0) {
            return domain(format!("renewal time must be >= 0, got {t}"));
        }
        if !self.covers(t) {
            return Err(Error::Precondition(format!("stream not realized past t={t}")));
        }
        let count = self.count(t);
        let used: f64 = self.draws[..count].iter().sum();
        let martingale = count as f64 - used / self.mean;
        let residual = self.jumps[count] - t;
        let remainder = (residual + t - self.x0()) / self.mean;
        Ok(RenewalDecomposition { count, martingale, remainder })
    }

    /// Scaled view of this stream for the `m`-th system; `rate` is `1/E[x]`.
    pub fn scaled(&self, m: f64, mode: ScaleMode, rate: f64) -> Result<ScaledRenewal<'_>> {
        if !(m >= 1.0) {
            return domain(format!("scaling index m must be >= 1, got {m}"));
        }
        Ok(ScaledRenewal { stream: self, m, mode, rate })
    }
}

/// `Ē^m(t) = E(mt)/m` or `Ê^m(t) = (E(mt) − μmt)/√m`.
#[derive(Debug, Clone, Copy)]
pub struct ScaledRenewal<'a> {
    stream: &'a RenewalStream,
    m: f64,
    mode: ScaleMode,
    rate: f64,
}

impl ScaledRenewal<'_> {
    pub fn at(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0) {
            return domain(format!("time must be >= 0, got {t}"));
        }
        let mt = self.m * t;
        if !self.stream.covers(mt) {
            return Err(Error::Precondition(format!("stream not realized past {mt}")));
        }
        let count = self.stream.count(mt) as f64;
        Ok(match self.mode {
            ScaleMode::Fluid => count / self.m,
            ScaleMode::Diffusion => (count - self.rate * mt) / self.m.sqrt(),
        })
    }
}

/// Free-function form of [`RenewalStream::decompose`].
pub fn renewal_decompose(stream: &RenewalStream, t: f64) -> Result<RenewalDecomposition> {
    stream.decompose(t)
}

/// Free-function form of [`RenewalStream::scaled`] evaluated at `t`.
pub fn scale_renewal(stream: &RenewalStream, m: f64, mode: ScaleMode, rate: f64, t: f64) -> Result<f64> {
    stream.scaled(m, mode, rate)?.at(t)
}
