//! Distribution families with closed-form moments, survival functions and
//! test-function pairings.

use crate::error::{config, Result};
use crate::testfn::TestFunction;
use rand::distr::Open01;
use rand::Rng;
use rand_distr::{Distribution, Exp, Gamma, LogNormal};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use statrs::function::gamma::{gamma_lr, gamma_ur, ln_gamma};

/// A positive random variable. Serialized as `{"family": ..., "params": {...}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "params", rename_all = "kebab-case")]
pub enum DistributionSpec {
    Exponential { rate: f64 },
    Gamma { shape: f64, rate: f64 },
    /// Uniform on `[shift, shift + width]`.
    UniformShifted { shift: f64, width: f64 },
    /// `median · e^{σZ}` with `Z` standard normal.
    Lognormal { median: f64, sigma: f64 },
    Hyperexponential { probs: Vec<f64>, rates: Vec<f64> },
    Deterministic { value: f64 },
}

/// What a distribution is used for; decides which families are admissible.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Interarrival,
    FirstArrival,
    Service,
    InitialResidual,
    Patience,
    InitialPatience,
}

impl Role {
    fn requires_atomless(self) -> bool {
        matches!(
            self,
            Role::Interarrival | Role::Service | Role::InitialResidual
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub mean: f64,
    pub variance: f64,
    pub third_abs: f64,
}

fn positive(name: &str, x: f64) -> Result<()> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        config(format!("parameter `{name}` must be finite and > 0, got {x}"))
    }
}

impl DistributionSpec {
    pub fn exponential(rate: f64) -> Self {
        DistributionSpec::Exponential { rate }
    }

    pub fn deterministic(value: f64) -> Self {
        DistributionSpec::Deterministic { value }
    }

    pub fn family(&self) -> &'static str {
        match self {
            DistributionSpec::Exponential { .. } => "exponential",
            DistributionSpec::Gamma { .. } => "gamma",
            DistributionSpec::UniformShifted { .. } => "uniform-shifted",
            DistributionSpec::Lognormal { .. } => "lognormal",
            DistributionSpec::Hyperexponential { .. } => "hyperexponential",
            DistributionSpec::Deterministic { .. } => "deterministic",
        }
    }

    pub fn validate(&self, role: Role) -> Result<()> {
        match self {
            DistributionSpec::Exponential { rate } => positive("rate", *rate)?,
            DistributionSpec::Gamma { shape, rate } => {
                positive("shape", *shape)?;
                positive("rate", *rate)?;
            }
            DistributionSpec::UniformShifted { shift, width } => {
                if !(shift.is_finite() && *shift >= 0.0) {
                    return config(format!("parameter `shift` must be finite and >= 0, got {shift}"));
                }
                positive("width", *width)?;
            }
            DistributionSpec::Lognormal { median, sigma } => {
                positive("median", *median)?;
                positive("sigma", *sigma)?;
            }
            DistributionSpec::Hyperexponential { probs, rates } => {
                if probs.is_empty() || probs.len() != rates.len() {
                    return config("hyperexponential needs equally many probs and rates");
                }
                for (&p, &r) in probs.iter().zip(rates) {
                    positive("probs", p)?;
                    positive("rates", r)?;
                }
                let total: f64 = probs.iter().sum();
                if (total - 1.0).abs() > 1e-9 {
                    return config(format!("hyperexponential probs sum to {total}, not 1"));
                }
            }
            DistributionSpec::Deterministic { value } => {
                positive("value", *value)?;
                if role.requires_atomless() {
                    return config(format!("deterministic family not allowed for {role:?} (must be atomless)"));
                }
            }
        }
        Ok(())
    }

    pub fn moments(&self) -> Moments {
        match self {
            DistributionSpec::Exponential { rate } => Moments {
                mean: 1.0 / rate,
                variance: 1.0 / (rate * rate),
                third_abs: 6.0 / rate.powi(3),
            },
            DistributionSpec::Gamma { shape, rate } => Moments {
                mean: shape / rate,
                variance: shape / (rate * rate),
                third_abs: shape * (shape + 1.0) * (shape + 2.0) / rate.powi(3),
            },
            DistributionSpec::UniformShifted { shift, width } => Moments {
                mean: shift + width / 2.0,
                variance: width * width / 12.0,
                third_abs: ((shift + width).powi(4) - shift.powi(4)) / (4.0 * width),
            },
            DistributionSpec::Lognormal { median, sigma } => {
                let raw = |n: f64| (n * median.ln() + n * n * sigma * sigma / 2.0).exp();
                let mean = raw(1.0);
                Moments { mean, variance: raw(2.0) - mean * mean, third_abs: raw(3.0) }
            }
            DistributionSpec::Hyperexponential { probs, rates } => {
                let raw = |n: i32, fact: f64| {
                    probs.iter().zip(rates).map(|(p, r)| p * fact / r.powi(n)).sum::<f64>()
                };
                let mean = raw(1, 1.0);
                Moments { mean, variance: raw(2, 2.0) - mean * mean, third_abs: raw(3, 6.0) }
            }
            DistributionSpec::Deterministic { value } => Moments {
                mean: *value,
                variance: 0.0,
                third_abs: value.powi(3),
            },
        }
    }

    pub fn mean(&self) -> f64 {
        self.moments().mean
    }

    /// Reciprocal of the mean.
    pub fn rate(&self) -> f64 {
        1.0 / self.mean()
    }

    /// `P(X > x)`.
    pub fn survival(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 1.0;
        }
        match self {
            DistributionSpec::Exponential { rate } => (-rate * x).exp(),
            DistributionSpec::Gamma { shape, rate } => {
                if x == 0.0 {
                    1.0
                } else {
                    gamma_ur(*shape, rate * x)
                }
            }
            DistributionSpec::UniformShifted { shift, width } => {
                ((shift + width - x) / width).clamp(0.0, 1.0)
            }
            DistributionSpec::Lognormal { median, sigma } => {
                if x == 0.0 {
                    1.0
                } else {
                    0.5 * erfc((x / median).ln() / (sigma * std::f64::consts::SQRT_2))
                }
            }
            DistributionSpec::Hyperexponential { probs, rates } => {
                probs.iter().zip(rates).map(|(p, r)| p * (-r * x).exp()).sum()
            }
            DistributionSpec::Deterministic { value } => {
                if x < *value {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// Law of `c·X`.
    pub fn scaled(&self, c: f64) -> DistributionSpec {
        match self {
            DistributionSpec::Exponential { rate } => DistributionSpec::Exponential { rate: rate / c },
            DistributionSpec::Gamma { shape, rate } => DistributionSpec::Gamma { shape: *shape, rate: rate / c },
            DistributionSpec::UniformShifted { shift, width } => {
                DistributionSpec::UniformShifted { shift: shift * c, width: width * c }
            }
            DistributionSpec::Lognormal { median, sigma } => {
                DistributionSpec::Lognormal { median: median * c, sigma: *sigma }
            }
            DistributionSpec::Hyperexponential { probs, rates } => DistributionSpec::Hyperexponential {
                probs: probs.clone(),
                rates: rates.iter().map(|r| r / c).collect(),
            },
            DistributionSpec::Deterministic { value } => DistributionSpec::Deterministic { value: value * c },
        }
    }

    /// `E f(X)` in closed form (lognormal: fixed-node quadrature).
    pub fn pairing(&self, f: &TestFunction) -> f64 {
        match *f {
            TestFunction::Zero => 0.0,
            TestFunction::Indicator => 1.0,
            TestFunction::PolyExp { coef, power, rate } => coef * self.poly_exp_moment(power, rate),
        }
    }

    /// `E[Xⁿ e^{−rX}]`.
    fn poly_exp_moment(&self, n: u32, r: f64) -> f64 {
        let nf = n as f64;
        match self {
            DistributionSpec::Exponential { rate } => {
                (rate.ln() + ln_gamma(nf + 1.0) - (nf + 1.0) * (rate + r).ln()).exp()
            }
            DistributionSpec::Gamma { shape, rate } => (shape * rate.ln() + ln_gamma(shape + nf)
                - ln_gamma(*shape)
                - (shape + nf) * (rate + r).ln())
            .exp(),
            DistributionSpec::Hyperexponential { probs, rates } => probs
                .iter()
                .zip(rates)
                .map(|(p, l)| p * (l.ln() + ln_gamma(nf + 1.0) - (nf + 1.0) * (l + r).ln()).exp())
                .sum(),
            DistributionSpec::Deterministic { value } => value.powi(n as i32) * (-r * value).exp(),
            DistributionSpec::UniformShifted { shift, width } => uniform_poly_exp(*shift, *width, n, r),
            DistributionSpec::Lognormal { median, sigma } => lognormal_poly_exp(*median, *sigma, n, r),
        }
    }

    pub fn sampler(&self) -> Sampler {
        match self {
            DistributionSpec::Exponential { rate } => Sampler::Exp(Exp::new(*rate).expect("validated rate")),
            DistributionSpec::Gamma { shape, rate } => {
                Sampler::Gamma(Gamma::new(*shape, 1.0 / rate).expect("validated gamma"))
            }
            DistributionSpec::UniformShifted { shift, width } => Sampler::Uniform { shift: *shift, width: *width },
            DistributionSpec::Lognormal { median, sigma } => {
                Sampler::LogNormal(LogNormal::new(median.ln(), *sigma).expect("validated lognormal"))
            }
            DistributionSpec::Hyperexponential { probs, rates } => {
                let mut acc = 0.0;
                let cumulative = probs
                    .iter()
                    .map(|p| {
                        acc += p;
                        acc
                    })
                    .collect();
                let phases = rates.iter().map(|r| Exp::new(*r).expect("validated rate")).collect();
                Sampler::Hyper { cumulative, phases }
            }
            DistributionSpec::Deterministic { value } => Sampler::Point(*value),
        }
    }
}

/// `E[Xⁿ e^{−rX}]` for `X ~ U[a, a+w]`, via `e^{−ra} Σ C(n,j) a^{n−j} ∫₀ʷ uʲ e^{−ru} du`.
fn uniform_poly_exp(a: f64, w: f64, n: u32, r: f64) -> f64 {
    let mut total = 0.0;
    let mut binom = 1.0;
    for j in 0..=n {
        let jf = j as f64;
        let inner = if r == 0.0 {
            w.powi(j as i32 + 1) / (jf + 1.0)
        } else {
            (ln_gamma(jf + 1.0) - (jf + 1.0) * r.ln()).exp() * gamma_lr(jf + 1.0, r * w)
        };
        total += binom * a.powi((n - j) as i32) * inner;
        binom = binom * (n - j) as f64 / (jf + 1.0);
    }
    (-r * a).exp() * total / w
}

/// `E[Xⁿ e^{−rX}]` for `X = M e^{σZ}`: composite Simpson in `z` over `[−12, 12]`.
fn lognormal_poly_exp(median: f64, sigma: f64, n: u32, r: f64) -> f64 {
    const NODES: usize = 4800;
    let (lo, hi) = (-12.0_f64, 12.0_f64);
    let h = (hi - lo) / NODES as f64;
    let norm = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
    let g = |z: f64| {
        let x = median * (sigma * z).exp();
        x.powi(n as i32) * (-r * x).exp() * norm * (-0.5 * z * z).exp()
    };
    let mut sum = g(lo) + g(hi);
    for i in 1..NODES {
        let weight = if i % 2 == 1 { 4.0 } else { 2.0 };
        sum += weight * g(lo + i as f64 * h);
    }
    sum * h / 3.0
}

/// Prepared sampler for one [`DistributionSpec`].
#[derive(Debug, Clone)]
pub enum Sampler {
    Exp(Exp<f64>),
    Gamma(Gamma<f64>),
    Uniform { shift: f64, width: f64 },
    LogNormal(LogNormal<f64>),
    Hyper { cumulative: Vec<f64>, phases: Vec<Exp<f64>> },
    Point(f64),
}

impl Distribution<f64> for Sampler {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Sampler::Exp(d) => d.sample(rng),
            Sampler::Gamma(d) => d.sample(rng),
            Sampler::Uniform { shift, width } => shift + width * rng.sample::<f64, _>(Open01),
            Sampler::LogNormal(d) => d.sample(rng),
            Sampler::Hyper { cumulative, phases } => {
                let u: f64 = rng.random();
                let k = cumulative.iter().position(|&c| u < c).unwrap_or(phases.len() - 1);
                phases[k].sample(rng)
            }
            Sampler::Point(v) => *v,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::primitives::rng::{substream, StreamKind};

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + b.abs())
    }

    fn families() -> Vec<DistributionSpec> {
        vec![
            DistributionSpec::exponential(2.0),
            DistributionSpec::Gamma { shape: 2.5, rate: 1.5 },
            DistributionSpec::UniformShifted { shift: 0.2, width: 1.3 },
            DistributionSpec::Lognormal { median: 0.8, sigma: 0.6 },
            DistributionSpec::Hyperexponential { probs: vec![0.5, 0.5], rates: vec![2.0, 2.0 / 3.0] },
            DistributionSpec::deterministic(1.25),
        ]
    }

    #[test]
    fn moments_examples() {
        let m = DistributionSpec::exponential(2.0).moments();
        assert!(close(m.mean, 0.5, 1e-15) && close(m.variance, 0.25, 1e-15) && close(m.third_abs, 0.75, 1e-15));
        let m = DistributionSpec::deterministic(1.0).moments();
        assert_eq!((m.mean, m.variance, m.third_abs), (1.0, 0.0, 1.0));
        let m = DistributionSpec::Gamma { shape: 2.0, rate: 2.0 }.moments();
        assert!(close(m.mean, 1.0, 1e-15) && close(m.variance, 0.5, 1e-15) && close(m.third_abs, 3.0, 1e-15));
        let m = DistributionSpec::Hyperexponential { probs: vec![0.5, 0.5], rates: vec![2.0, 2.0 / 3.0] }.moments();
        assert!(close(m.mean, 1.0, 1e-14) && close(m.variance, 1.5, 1e-14));
    }

    #[test]
    fn survival_examples() {
        let e = DistributionSpec::exponential(1.0);
        assert_eq!(e.survival(0.0), 1.0);
        assert!(close(e.survival(1.0), 0.367879441171, 1e-11));
        assert_eq!(DistributionSpec::deterministic(2.0).survival(3.0), 0.0);
        let g = DistributionSpec::Gamma { shape: 1.0, rate: 3.0 };
        assert!(close(g.survival(0.4), (-1.2f64).exp(), 1e-12));
        let ln = DistributionSpec::Lognormal { median: 2.0, sigma: 0.5 };
        assert!(close(ln.survival(2.0), 0.5, 1e-14));
    }

    #[test]
    fn validation_rules() {
        let det = DistributionSpec::deterministic(1.0);
        assert!(det.validate(Role::Service).is_err());
        assert!(det.validate(Role::Interarrival).is_err());
        assert!(det.validate(Role::Patience).is_ok());
        assert!(DistributionSpec::exponential(0.0).validate(Role::Patience).is_err());
        assert!(DistributionSpec::exponential(-1.0).validate(Role::Patience).is_err());
        let bad = DistributionSpec::Hyperexponential { probs: vec![0.3, 0.3], rates: vec![1.0, 2.0] };
        assert!(bad.validate(Role::Service).is_err());
        for d in families() {
            d.validate(Role::Patience).unwrap();
        }
    }

    #[test]
    fn serde_shape() {
        let d: DistributionSpec =
            serde_json::from_str(r#"{"family":"uniform-shifted","params":{"shift":0.5,"width":1.0}}"#).unwrap();
        assert_eq!(d, DistributionSpec::UniformShifted { shift: 0.5, width: 1.0 });
        let s = serde_json::to_string(&DistributionSpec::exponential(2.0)).unwrap();
        assert_eq!(s, r#"{"family":"exponential","params":{"rate":2.0}}"#);
        assert!(serde_json::from_str::<DistributionSpec>(r#"{"family":"weibull","params":{"k":1}}"#).is_err());
    }

    /// Pairing oracle: trapezoid on `E f(X) = f(0) + ∫ f'(x) P(X > x) dx`.
    fn pairing_by_survival(d: &DistributionSpec, f: &TestFunction) -> f64 {
        let (n, hi) = (400_000usize, 60.0);
        let h = hi / n as f64;
        let g = |x: f64| f.derivative(x) * d.survival(x);
        let mut s = 0.5 * (g(0.0) + g(hi));
        for i in 1..n {
            s += g(i as f64 * h);
        }
        f.at_zero() + s * h
    }

    #[test]
    fn pairings_match_survival_integral() {
        let fs = [
            TestFunction::exp(1.0),
            TestFunction::exp(0.3),
            TestFunction::PolyExp { coef: 2.0, power: 2, rate: 1.5 },
            TestFunction::PolyExp { coef: 1.0, power: 1, rate: 0.0 },
        ];
        for d in families() {
            for f in &fs {
                let closed = d.pairing(f);
                let oracle = pairing_by_survival(&d, f);
                let tol = if matches!(d, DistributionSpec::Deterministic { .. }) { 1e-3 } else { 1e-6 };
                assert!(close(closed, oracle, tol), "{} {}: {closed} vs {oracle}", d.family(), f.tag());
            }
        }
    }

    #[test]
    fn scaling_is_law_of_multiple() {
        for d in families() {
            let s = d.scaled(10.0);
            for &x in &[0.3, 2.0, 9.0] {
                assert!(close(s.survival(10.0 * x), d.survival(x), 1e-12), "{}", d.family());
            }
            assert!(close(s.mean(), 10.0 * d.mean(), 1e-12));
        }
        assert_eq!(DistributionSpec::exponential(0.5).scaled(10.0), DistributionSpec::exponential(0.05));
    }

    #[test]
    fn sample_means_agree_with_moments() {
        let n = 200_000;
        for (i, d) in families().into_iter().enumerate() {
            let mut rng = substream(7, StreamKind::Renewal, i as u64, 0);
            let s = d.sampler();
            let xs: Vec<f64> = (0..n).map(|_| s.sample(&mut rng)).collect();
            let mean = xs.iter().sum::<f64>() / n as f64;
            let m = d.moments();
            let se = (m.variance / n as f64).sqrt();
            assert!((mean - m.mean).abs() <= 5.0 * se + 1e-12, "{}: {mean} vs {}", d.family(), m.mean);
            assert!(xs.iter().all(|&x| x > 0.0));
        }
    }
}
