//! Drift and diffusion coefficients of the limiting SDE along a fluid path.

use serde::{Deserialize, Serialize};

use super::matrix::{psd_sqrt, Matrix};
use super::renewal_clt::RenewalDriver;
use crate::error::{config, domain, Error, Result};
use crate::fluid::{stationarity_residual, FluidParams, FluidPath, FluidState, FluidView};
use crate::primitives::DistributionSpec;
use crate::scalar::Real;
use crate::simulator::SystemConfig;
use crate::testfn::TestFunction;

/// Default exponential rate standing in for the indicator when closing the `ẑ` channel.
pub const DEFAULT_PROXY_BETA: f64 = 1e-3;

/// Default floor on the adjusted weighted mass.
pub const DEFAULT_FLOOR: f64 = 1e-10;

/// Largest `|dz/dt|` accepted as a stationary fluid state.
pub const STATIONARY_TOLERANCE: f64 = 1e-5;

/// Fluid parameters plus the interarrival and service laws whose variances enter
/// the renewal noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SdeModel {
    pub params: FluidParams,
    pub interarrival: Vec<DistributionSpec>,
    pub service: Vec<DistributionSpec>,
}

impl SdeModel {
    pub fn from_config(cfg: &SystemConfig) -> Result<Self> {
        let params = FluidParams::from_config(cfg)?;
        let service = (0..cfg.classes).map(|j| cfg.service.get(0, j).clone()).collect();
        Ok(SdeModel { params, interarrival: cfg.interarrival.clone(), service })
    }

    /// Exponential interarrival and service laws with the given rates.
    pub fn exponential(params: FluidParams) -> Self {
        let interarrival = params.arrival_rates.iter().map(|&a| DistributionSpec::exponential(a)).collect();
        let service = params.service_rates.iter().map(|&b| DistributionSpec::exponential(b)).collect();
        SdeModel { params, interarrival, service }
    }

    pub fn classes(&self) -> usize {
        self.params.classes()
    }
}

/// State coordinates `(L^{β_1}_1, …, L^{β_J}_J, ẑ_1, …, ẑ_J)` with `ẑ_j ≈ L^{β₀}_j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observables {
    pub betas: Vec<f64>,
    pub proxy_beta: f64,
}

impl Observables {
    pub fn new(betas: Vec<f64>, proxy_beta: f64) -> Result<Self> {
        if betas.is_empty() {
            return config("at least one Laplace rate is required");
        }
        if betas.iter().chain([&proxy_beta]).any(|&b| !(b > 0.0 && b.is_finite())) {
            return config("Laplace rates must be finite and > 0");
        }
        Ok(Observables { betas, proxy_beta })
    }

    pub fn classes(&self) -> usize {
        self.betas.len()
    }

    pub fn dim(&self) -> usize {
        2 * self.betas.len()
    }

    /// Class and exponential rate of coordinate `c`.
    pub fn coordinate(&self, c: usize) -> (usize, f64) {
        let j = self.classes();
        if c < j {
            (c, self.betas[c])
        } else {
            (c - j, self.proxy_beta)
        }
    }

    pub fn coordinates(&self) -> Vec<(usize, TestFunction)> {
        (0..self.dim())
            .map(|c| {
                let (j, r) = self.coordinate(c);
                (j, TestFunction::exp(r))
            })
            .collect()
    }

    /// Index of the `ẑ_j` proxy coordinate.
    pub fn proxy_index(&self, class: usize) -> usize {
        self.classes() + class
    }

    /// Test functions whose fluid pairings the coefficients read.
    pub fn required_functionals(&self) -> Vec<TestFunction> {
        let coords = self.coordinates();
        let mut out = vec![TestFunction::Indicator];
        for (ja, fa) in &coords {
            for (jb, fb) in &coords {
                for f in [*fa, fa.product(fb)] {
                    if ja == jb && !out.contains(&f) {
                        out.push(f);
                    }
                }
            }
        }
        out
    }
}

/// Which expression supplies the arrival-count and service-renewal noise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseForm {
    /// `√(α⟨f,θ⟩)` per class and `√(p_j z_j/𝓛)` per server and class.
    #[default]
    Stated,
    /// Rank-one renewal CLT blocks `b bᵀ ι³σ² ḡ′` for the arrival and service renewals.
    RenewalClt,
}

/// Named group of independent Brownian motions and its width.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelInfo {
    pub label: String,
    pub width: usize,
}

/// Coefficients in force from time `t` until the next node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientNode<T> {
    pub t: T,
    pub drift: Matrix<T>,
    pub channels: Vec<Matrix<T>>,
}

impl<T: Real> CoefficientNode<T> {
    /// Instantaneous covariance `Σ_c G_c G_cᵀ`.
    pub fn covariance(&self) -> Matrix<T> {
        let d = self.drift.rows();
        self.channels.iter().fold(Matrix::zeros(d, d), |acc, g| acc.add(&g.gram()))
    }
}

/// `dX = A(t) X dt + Σ_c G_c(t) dW_c` on a time grid, coefficients piecewise constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SdeCoefficients<T> {
    pub observables: Observables,
    pub noise_form: NoiseForm,
    pub channels: Vec<ChannelInfo>,
    pub nodes: Vec<CoefficientNode<T>>,
}

impl<T: Real> SdeCoefficients<T> {
    pub fn dim(&self) -> usize {
        self.observables.dim()
    }

    /// Coefficients in force at `t`.
    pub fn node_at(&self, t: T) -> &CoefficientNode<T> {
        let n = self.nodes.partition_point(|n| n.t <= t);
        &self.nodes[n.saturating_sub(1)]
    }

    pub fn is_constant(&self) -> bool {
        self.nodes.len() == 1
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}

/// Masses and pairings of the fluid state needed at one time.
struct Snapshot<T> {
    t: T,
    z: Vec<T>,
    weighted: T,
    adjusted: T,
}

fn snapshot<T: Real, V: FluidView<T>>(params: &FluidParams, view: &V, floor: f64) -> Result<Snapshot<T>> {
    let z = view.z();
    let p: Vec<T> = params.weights.iter().map(|&v| T::lit(v)).collect();
    let weighted: T = z.iter().zip(&p).map(|(&z, &p)| p * z).sum();
    let adjusted: T =
        z.iter().zip(&p).zip(&params.service_rates).map(|((&z, &p), &mu)| p * z / T::lit(mu)).sum();
    if !(adjusted.to64() > floor) {
        return Err(Error::Singularity { t: view.time().to64(), value: adjusted.to64(), floor });
    }
    Ok(Snapshot { t: view.time(), z, weighted, adjusted })
}

fn check_indices(params: &FluidParams, coords: &[(usize, TestFunction)], k: usize, j: usize) -> Result<()> {
    let classes = params.classes();
    if k >= params.servers || j >= classes {
        return config(format!("driver ({k},{j}) out of range"));
    }
    if coords.iter().any(|(c, _)| *c >= classes) {
        return config("coordinate class out of range");
    }
    Ok(())
}

/// The service covariance matrix of server `k` on class `j`, term by term.
///
/// `coords[a] = (class, f)`; classes may repeat with different test functions.
pub fn build_d<T: Real, V: FluidView<T>>(
    params: &FluidParams,
    view: &V,
    coords: &[(usize, TestFunction)],
    k: usize,
    j: usize,
) -> Result<Matrix<T>> {
    check_indices(params, coords, k, j)?;
    let s = snapshot(params, view, DEFAULT_FLOOR)?;
    let nj = params.classes();
    let d = coords.len();
    let p: Vec<T> = params.weights.iter().map(|&v| T::lit(v)).collect();
    let inv_mu: Vec<T> = params.service_rates.iter().map(|&m| T::lit(1.0 / m)).collect();
    let (l, ll) = (s.weighted, s.adjusted);
    let rate = p[j] * s.z[j] / ll;
    // pf[a] = p_i ⟨f_a, ξ_i⟩ for the class i of coordinate a.
    let mut pf = Vec::with_capacity(d);
    for (i, f) in coords {
        pf.push(p[*i] * view.pairing(*i, f)?);
    }
    let mut out = Matrix::zeros(d, d);
    for a in 0..d {
        for b in 0..d {
            let (i, fa) = coords[a];
            let (li, fb) = coords[b];
            let mut first = -pf[a] * pf[b] / (l * l);
            if i == li {
                first = first + p[i] * view.pairing(i, &fa.product(&fb))? / l;
            }
            let mut second = T::zero();
            let mut third = T::zero();
            for n in 0..nj {
                let pzn = p[n] * s.z[n];
                let ind_l = if n == li { pf[b] / l } else { T::zero() };
                let ind_i = if n == i { pf[a] / l } else { T::zero() };
                second = second + pf[a] / ll * inv_mu[n] * (ind_l - pzn * pf[b] / (l * l));
                third = third + pf[b] / ll * inv_mu[n] * (ind_i - pzn * pf[a] / (l * l));
            }
            let mut fourth = T::zero();
            for n in 0..nj {
                for x in 0..nj {
                    let pzn = p[n] * s.z[n];
                    let pzx = p[x] * s.z[x];
                    let cov = if n == x { pzn / l } else { T::zero() } - pzn * pzx / (l * l);
                    fourth = fourth + pf[a] / ll * inv_mu[n] * pf[b] / ll * inv_mu[x] * cov;
                }
            }
            out[(a, b)] = (first - second - third + fourth) * rate;
        }
    }
    Ok(out)
}

/// The same matrix as [`build_d`], written as `rate · Cov(u)` for the jump vector
/// `u_a = 1{class a selected} f_a(remaining) − (p_a⟨f_a,ξ_a⟩/𝓛)·(mean service of the selected class)`.
pub fn build_d_covariance<T: Real, V: FluidView<T>>(
    params: &FluidParams,
    view: &V,
    coords: &[(usize, TestFunction)],
    k: usize,
    j: usize,
) -> Result<Matrix<T>> {
    check_indices(params, coords, k, j)?;
    let s = snapshot(params, view, DEFAULT_FLOOR)?;
    let d = coords.len();
    let p: Vec<T> = params.weights.iter().map(|&v| T::lit(v)).collect();
    let inv_mu: Vec<T> = params.service_rates.iter().map(|&m| T::lit(1.0 / m)).collect();
    let (l, ll) = (s.weighted, s.adjusted);
    let mut f_mass = Vec::with_capacity(d);
    for (i, f) in coords {
        f_mass.push(view.pairing(*i, f)?);
    }
    let c: Vec<T> = coords.iter().zip(&f_mass).map(|((i, _), &m)| p[*i] * m / ll).collect();
    // Given class n is selected (probability p_n z_n / L), the remaining patience is
    // distributed as ξ_n / z_n.
    let mut second = Matrix::<T>::zeros(d, d);
    let mut first = vec![T::zero(); d];
    for n in 0..params.classes() {
        if s.z[n] <= T::zero() {
            continue;
        }
        let pi = p[n] * s.z[n] / l;
        for a in 0..d {
            let (ia, fa) = coords[a];
            let ea = if ia == n { f_mass[a] / s.z[n] } else { T::zero() };
            first[a] = first[a] + pi * (ea - c[a] * inv_mu[n]);
            for b in 0..d {
                let (ib, fb) = coords[b];
                let eb = if ib == n { f_mass[b] / s.z[n] } else { T::zero() };
                let eab = if ia == n && ib == n { view.pairing(n, &fa.product(&fb))? / s.z[n] } else { T::zero() };
                let m = eab - ea * c[b] * inv_mu[n] - eb * c[a] * inv_mu[n] + c[a] * c[b] * inv_mu[n] * inv_mu[n];
                second[(a, b)] = second[(a, b)] + pi * m;
            }
        }
    }
    let rate = p[j] * s.z[j] / ll;
    Ok(Matrix::from_fn(d, d, |a, b| (second[(a, b)] - first[a] * first[b]) * rate))
}

/// Drift matrix at one fluid state.
fn drift<T: Real>(params: &FluidParams, obs: &Observables, s: &Snapshot<T>, pairings: &[T]) -> Matrix<T> {
    let d = obs.dim();
    let kk = T::lit(params.servers as f64);
    let mut a = Matrix::zeros(d, d);
    for c in 0..d {
        let (i, r) = obs.coordinate(c);
        let pi = T::lit(params.weights[i]);
        a[(c, c)] = T::lit(r) - kk * pi / s.adjusted;
        let gain = kk * pi * pairings[c] / (s.adjusted * s.adjusted);
        for n in 0..obs.classes() {
            let w = T::lit(params.weights[n] / params.service_rates[n]);
            let col = obs.proxy_index(n);
            a[(c, col)] = a[(c, col)] + gain * w;
        }
    }
    a
}

/// Coefficients at one fluid state.
pub fn coefficients_at<T: Real, V: FluidView<T>>(
    model: &SdeModel,
    obs: &Observables,
    view: &V,
    form: NoiseForm,
) -> Result<CoefficientNode<T>> {
    let params = &model.params;
    let nj = params.classes();
    if obs.classes() != nj {
        return config(format!("{} Laplace rates for {nj} classes", obs.classes()));
    }
    let s = snapshot(params, view, DEFAULT_FLOOR)?;
    let coords = obs.coordinates();
    let d = coords.len();
    let mut pairings = Vec::with_capacity(d);
    for (i, f) in &coords {
        pairings.push(view.pairing(*i, f)?);
    }
    let drift = drift(params, obs, &s, &pairings);
    let mut channels = Vec::new();

    // Arrival counts.
    let theta_f: Vec<f64> = coords.iter().map(|(i, f)| params.patience[*i].pairing(f)).collect();
    let g1 = match form {
        NoiseForm::Stated => Matrix::from_fn(d, nj, |a, i| {
            let (ia, _) = coords[a];
            if ia == i {
                T::lit((params.arrival_rates[i] * theta_f[a]).sqrt())
            } else {
                T::zero()
            }
        }),
        NoiseForm::RenewalClt => {
            let mut g = Matrix::zeros(d, nj);
            for i in 0..nj {
                let law = &model.interarrival[i];
                let b: Vec<T> =
                    (0..d).map(|a| if coords[a].0 == i { T::lit(theta_f[a]) } else { T::zero() }).collect();
                let driver = RenewalDriver::from_law(law, vec![b], vec![T::one()])?;
                let col = renewal_column(&driver)?;
                for a in 0..d {
                    g[(a, i)] = col[a];
                }
            }
            g
        }
    };
    channels.push(g1);

    // Patience draws.
    let mut cov2 = Matrix::zeros(d, d);
    for a in 0..d {
        for b in 0..d {
            let (ia, fa) = coords[a];
            let (ib, fb) = coords[b];
            if ia == ib {
                let law = &params.patience[ia];
                let v = params.arrival_rates[ia] * (law.pairing(&fa.product(&fb)) - theta_f[a] * theta_f[b]);
                cov2[(a, b)] = T::lit(v);
            }
        }
    }
    channels.push(psd_sqrt(&cov2)?);

    // Selections at service completions.
    for k in 0..params.servers {
        for j in 0..nj {
            let dm = build_d(params, view, &coords, k, j)?;
            channels.push(psd_sqrt(&dm)?.scale(-T::one()));
        }
    }

    // Service renewals.
    for _k in 0..params.servers {
        for j in 0..nj {
            let rate = T::lit(params.weights[j]) * s.z[j] / s.adjusted;
            let g4 = match form {
                NoiseForm::Stated => Matrix::from_fn(d, nj, |a, i| {
                    if coords[a].0 == i {
                        -rate.sqrt()
                    } else {
                        T::zero()
                    }
                }),
                NoiseForm::RenewalClt => {
                    let mu = T::lit(params.service_rates[j]);
                    let g_prime = rate / mu;
                    let b: Vec<T> = (0..d)
                        .map(|a| T::lit(params.weights[coords[a].0]) * pairings[a] / (s.adjusted * mu))
                        .collect();
                    let driver = RenewalDriver::from_law(&model.service[j], vec![b], vec![g_prime])?;
                    let col = renewal_column(&driver)?;
                    Matrix::from_fn(d, 1, |a, _| -col[a])
                }
            };
            channels.push(g4);
        }
    }
    Ok(CoefficientNode { t: s.t, drift, channels })
}

/// `b √(ι³σ²ḡ′)` at the single node of a driver: the column whose outer product is `B`.
fn renewal_column<T: Real>(driver: &RenewalDriver<T>) -> Result<Vec<T>> {
    let scale = driver.variance_rate(0).sqrt();
    Ok(driver.b[0].iter().map(|&v| v * scale).collect())
}

/// Channel labels and widths for a model.
pub fn channel_layout(model: &SdeModel, form: NoiseForm) -> Vec<ChannelInfo> {
    let (nj, nk) = (model.classes(), model.params.servers);
    let d = 2 * nj;
    let mut out = vec![ChannelInfo { label: "W1".into(), width: nj }, ChannelInfo { label: "W2".into(), width: d }];
    for k in 0..nk {
        for j in 0..nj {
            out.push(ChannelInfo { label: format!("W3[{k},{j}]"), width: d });
        }
    }
    let w4 = match form {
        NoiseForm::Stated => nj,
        NoiseForm::RenewalClt => 1,
    };
    for k in 0..nk {
        for j in 0..nj {
            out.push(ChannelInfo { label: format!("W4[{k},{j}]"), width: w4 });
        }
    }
    out
}

/// Coefficients at every `stride`-th node of a fluid path.
pub fn build_sde_coefficients<T: Real>(
    model: &SdeModel,
    obs: &Observables,
    path: &FluidPath<T>,
    form: NoiseForm,
    stride: usize,
) -> Result<SdeCoefficients<T>> {
    if stride == 0 {
        return domain("stride must be ≥ 1");
    }
    let nodes = (0..path.len())
        .step_by(stride)
        .map(|n| coefficients_at(model, obs, &path.at(n), form))
        .collect::<Result<Vec<_>>>()?;
    Ok(SdeCoefficients { observables: obs.clone(), noise_form: form, channels: channel_layout(model, form), nodes })
}

/// Constant coefficients at a stationary fluid state: the Laplace-transform OU system.
pub fn ou_laplace_system<T: Real>(
    model: &SdeModel,
    obs: &Observables,
    invariant: &FluidState<T>,
    form: NoiseForm,
) -> Result<SdeCoefficients<T>> {
    if model.params.load() <= 1.0 {
        return Err(Error::Precondition(format!("OU system needs load > 1, got {}", model.params.load())));
    }
    let drift = stationarity_residual(&model.params, invariant)?.to64();
    if !(drift <= STATIONARY_TOLERANCE) {
        return Err(Error::Precondition(format!(
            "fluid state is not stationary: |dz/dt| = {drift:e} > {STATIONARY_TOLERANCE:e}"
        )));
    }
    let node = coefficients_at(model, obs, invariant, form)?;
    Ok(SdeCoefficients {
        observables: obs.clone(),
        noise_form: form,
        channels: channel_layout(model, form),
        nodes: vec![node],
    })
}
