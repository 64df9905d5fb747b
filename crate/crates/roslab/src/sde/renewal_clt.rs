//! Rank-one covariance blocks of renewal-driven noise.

use serde::{Deserialize, Serialize};

use super::matrix::Matrix;
use crate::error::{domain, Result};
use crate::primitives::DistributionSpec;
use crate::scalar::Real;

/// One renewal driver: rate `ι`, interevent standard deviation `σ`, jump-effect
/// vectors `b` and time-change derivatives `ḡ′` on a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenewalDriver<T> {
    pub iota: T,
    pub sigma: T,
    pub b: Vec<Vec<T>>,
    pub g_prime: Vec<T>,
}

impl<T: Real> RenewalDriver<T> {
    /// Rate and standard deviation taken from an interevent law.
    pub fn from_law(law: &DistributionSpec, b: Vec<Vec<T>>, g_prime: Vec<T>) -> Result<Self> {
        let m = law.moments();
        Ok(RenewalDriver { iota: T::lit(1.0 / m.mean), sigma: T::lit(m.variance.sqrt()), b, g_prime })
    }

    /// `ι³σ²ḡ′` at node `n`.
    pub fn variance_rate(&self, n: usize) -> T {
        self.iota.powi(3) * self.sigma * self.sigma * self.g_prime[n]
    }
}

/// `B_i(t_n)` for each driver `i` and node `n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenewalCltCoefficients<T> {
    pub blocks: Vec<Vec<Matrix<T>>>,
}

/// `(B_i)_{n,l} = b_n b_l ι³σ²ḡ′` per driver and node.
pub fn build_renewal_clt<T: Real>(drivers: &[RenewalDriver<T>]) -> Result<RenewalCltCoefficients<T>> {
    let mut blocks = Vec::with_capacity(drivers.len());
    for d in drivers {
        if d.b.len() != d.g_prime.len() {
            return domain("b and ḡ′ grids differ in length");
        }
        if d.g_prime.iter().any(|&g| !(g >= T::zero() && g <= T::one())) {
            return domain("ḡ′ must lie in [0, 1]");
        }
        let per_node = (0..d.b.len())
            .map(|n| {
                let s = d.variance_rate(n);
                let b = &d.b[n];
                Matrix::from_fn(b.len(), b.len(), |x, y| b[x] * b[y] * s)
            })
            .collect();
        blocks.push(per_node);
    }
    Ok(RenewalCltCoefficients { blocks })
}
