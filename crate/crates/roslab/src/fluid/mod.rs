//! Fluid model: survival-function transport along characteristics.

pub mod mass;
pub mod residual;
pub mod solver;
pub mod state;

pub use mass::{adjusted_mass, load, weighted_mass};
pub use residual::{fluid_residual, ResidualReport};
pub use solver::{
    fluid_solve, fluid_solve_observed, grid_nodes, initial_state, invariant_state, stationarity_residual,
    FluidOptions, FluidPath, FluidStepper, InvariantOptions, NodeView,
};
pub use state::{FluidInitial, FluidParams, FluidState, FluidView};
