//! Counting-martingale decompositions of event logs, their quadratic
//! variations, the service-entry error term, and Monte Carlo checks.

pub mod decompose;
pub mod series;
pub mod test;

pub use decompose::{arrival_decompose, epsilon_term, predictable_qv, service_decompose, service_decompose_all, ArrivalVariant};
pub use series::{DecomposedSeries, Driver, QvSeries, StepSeries};
pub use test::{martingale_zero_test, martingale_zero_test_family, ZeroTestReport, MIN_REPLICATIONS};
