//! Covariance equations of linear SDEs.

use super::coefficients::SdeCoefficients;
use super::matrix::{min_eigenvalue, Matrix};
use crate::error::{domain, Error, Result};
use crate::scalar::Real;

/// Solve `A P + P Aᵀ + Q = 0` through the Kronecker-form linear system.
pub fn lyapunov_stationary<T: Real>(a: &Matrix<T>, q: &Matrix<T>) -> Result<Matrix<T>> {
    let n = a.rows();
    if !a.is_square() || q.rows() != n || q.cols() != n {
        return domain("Lyapunov equation needs square matrices of equal size");
    }
    let mut k = Matrix::zeros(n * n, n * n);
    for i in 0..n {
        for j in 0..n {
            let row = i * n + j;
            for m in 0..n {
                k[(row, m * n + j)] = k[(row, m * n + j)] + a[(i, m)];
                k[(row, i * n + m)] = k[(row, i * n + m)] + a[(j, m)];
            }
        }
    }
    let rhs: Vec<T> = (0..n * n).map(|r| -q[(r / n, r % n)]).collect();
    let p = k.solve(&rhs)?;
    let p = Matrix::from_fn(n, n, |i, j| p[i * n + j]);
    Ok(Matrix::from_fn(n, n, |i, j| (p[(i, j)] + p[(j, i)]) / T::lit(2.0)))
}

/// Whether every eigenvalue of `a` has negative real part, via the Lyapunov test.
pub fn is_hurwitz<T: Real>(a: &Matrix<T>) -> Result<bool> {
    match lyapunov_stationary(a, &Matrix::identity(a.rows())) {
        Ok(p) => Ok(min_eigenvalue(&p)? > T::zero()),
        Err(Error::Precondition(_)) => Ok(false),
        Err(e) => Err(e),
    }
}

fn lyapunov_rhs<T: Real>(a: &Matrix<T>, q: &Matrix<T>, p: &Matrix<T>) -> Matrix<T> {
    let ap = a.matmul(p);
    ap.add(&ap.transpose()).add(q)
}

/// Integrate `dP/dt = A P + P Aᵀ + Q` with RK4 from `p0` over `horizon`, using the
/// coefficients in force at each step's start.
pub fn lyapunov_differential<T: Real>(
    coeffs: &SdeCoefficients<T>,
    p0: &Matrix<T>,
    horizon: f64,
    dt: f64,
) -> Result<Matrix<T>> {
    if !(dt > 0.0) {
        return domain(format!("dt must be > 0, got {dt}"));
    }
    let steps = (horizon / dt).round() as usize;
    let t0 = coeffs.nodes[0].t.to64();
    let h = T::lit(dt);
    let half = T::lit(0.5);
    let mut p = p0.clone();
    for s in 0..steps {
        let node = coeffs.node_at(T::lit(t0 + s as f64 * dt));
        let (a, q) = (&node.drift, node.covariance());
        let k1 = lyapunov_rhs(a, &q, &p);
        let k2 = lyapunov_rhs(a, &q, &p.add(&k1.scale(h * half)));
        let k3 = lyapunov_rhs(a, &q, &p.add(&k2.scale(h * half)));
        let k4 = lyapunov_rhs(a, &q, &p.add(&k3.scale(h)));
        let incr = k1.add(&k2.scale(T::lit(2.0))).add(&k3.scale(T::lit(2.0))).add(&k4).scale(h / T::lit(6.0));
        p = p.add(&incr);
    }
    Ok(p)
}
