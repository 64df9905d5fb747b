//! Limiting diffusion: coefficients along a fluid path, the Laplace-transform OU
//! system, renewal CLT blocks, matrix square roots and an Euler–Maruyama integrator.

pub mod coefficients;
pub mod integrate;
pub mod lyapunov;
pub mod matrix;
pub mod renewal_clt;

pub use coefficients::{
    build_d, build_d_covariance, build_sde_coefficients, channel_layout, coefficients_at, ou_laplace_system,
    ChannelInfo, CoefficientNode, NoiseForm, Observables, SdeCoefficients, SdeModel, DEFAULT_PROXY_BETA,
};
pub use integrate::{integrate, InitialCondition, IntegrateOptions, SdeSamples};
pub use lyapunov::{is_hurwitz, lyapunov_differential, lyapunov_stationary};
pub use matrix::{min_eigenvalue, psd_sqrt, psd_tolerance, Matrix};
pub use renewal_clt::{build_renewal_clt, RenewalCltCoefficients, RenewalDriver};
