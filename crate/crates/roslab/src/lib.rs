//! Laboratory for the multiclass multi-server random-order-of-service queue with
//! reneging: exact simulation, fluid and diffusion scalings, a fluid model solver,
//! martingale decompositions of the event log, and the limiting diffusion SDE.
//!
//! Numeric kernels (fluid solver, SDE coefficients and integrator, linear algebra)
//! are generic over [`Real`] (`f32`/`f64`); the aliases below fix `f64`.
//! Simulation and statistics work in `f64` only.

pub mod error;
pub mod fluid;
pub mod harness;
pub mod martingale;
pub mod primitives;
pub mod scalar;
pub mod scaling;
pub mod sde;
pub mod simulator;
pub mod stats;
pub mod testfn;

pub use error::{Error, Result};
pub use scalar::Real;
pub use testfn::TestFunction;

pub type FluidState64 = fluid::FluidState<f64>;
pub type FluidPath64 = fluid::FluidPath<f64>;
pub type FluidState32 = fluid::FluidState<f32>;
pub type FluidPath32 = fluid::FluidPath<f32>;
pub type Matrix64 = sde::Matrix<f64>;
pub type Matrix32 = sde::Matrix<f32>;
pub type SdeCoefficients64 = sde::SdeCoefficients<f64>;
pub type SdeCoefficients32 = sde::SdeCoefficients<f32>;
