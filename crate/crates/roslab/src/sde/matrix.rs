//! Dense row-major matrices with the few operations the SDE code needs.

use serde::{Deserialize, Serialize};
use std::ops::{Index, IndexMut};

use crate::error::{domain, Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diag(&vec![T::one(); n])
    }

    pub fn from_diag(d: &[T]) -> Self {
        let mut m = Self::zeros(d.len(), d.len());
        for (i, &v) in d.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != cols) {
            return domain("ragged matrix rows");
        }
        Ok(Matrix { rows: rows.len(), cols, data: rows.concat() })
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> T) -> Self {
        let mut m = Self::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<T>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "matmul shape mismatch");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == T::zero() {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] = out[(i, j)] + a * other[(k, j)];
                }
            }
        }
        out
    }

    /// `self · x`.
    pub fn apply(&self, x: &[T]) -> Vec<T> {
        assert_eq!(self.cols, x.len(), "matvec shape mismatch");
        (0..self.rows).map(|i| self.row(i).iter().zip(x).map(|(&a, &b)| a * b).sum()).collect()
    }

    /// `y += self · x`.
    pub fn apply_add(&self, x: &[T], y: &mut [T]) {
        for (i, yi) in y.iter_mut().enumerate() {
            let mut acc = T::zero();
            for (&a, &b) in self.row(i).iter().zip(x) {
                acc = acc + a * b;
            }
            *yi = *yi + acc;
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols), "add shape mismatch");
        Matrix { rows: self.rows, cols: self.cols, data: self.data.iter().zip(&other.data).map(|(&a, &b)| a + b).collect() }
    }

    pub fn scale(&self, c: T) -> Self {
        Matrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&a| a * c).collect() }
    }

    /// `self · selfᵀ`.
    pub fn gram(&self) -> Self {
        self.matmul(&self.transpose())
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, &v| m.max(v.abs()))
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.data.iter().zip(&other.data).fold(T::zero(), |m, (&a, &b)| m.max((a - b).abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn asymmetry(&self) -> T {
        let mut m = T::zero();
        for i in 0..self.rows {
            for j in 0..i {
                m = m.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        m
    }

    pub fn is_symmetric(&self, tol: T) -> bool {
        self.is_square() && self.asymmetry() <= tol
    }

    pub fn cast<U: Real>(&self) -> Matrix<U> {
        Matrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|v| U::lit(v.to64())).collect() }
    }

    /// Eigen decomposition of a symmetric matrix by cyclic Jacobi rotations.
    /// Returns eigenvalues and a matrix whose columns are the eigenvectors.
    pub fn symmetric_eigen(&self) -> Result<(Vec<T>, Matrix<T>)> {
        if !self.is_square() {
            return domain("eigen decomposition needs a square matrix");
        }
        let n = self.rows;
        let mut a = self.clone();
        let mut v = Self::identity(n);
        let scale = a.max_abs();
        if scale == T::zero() {
            return Ok((vec![T::zero(); n], v));
        }
        let eps = T::epsilon() * scale;
        let two = T::lit(2.0);
        for _ in 0..100 {
            let mut off = T::zero();
            for p in 0..n {
                for q in p + 1..n {
                    off = off.max(a[(p, q)].abs());
                }
            }
            if off <= eps {
                let vals = (0..n).map(|i| a[(i, i)]).collect();
                return Ok((vals, v));
            }
            for p in 0..n {
                for q in p + 1..n {
                    let apq = a[(p, q)];
                    if apq.abs() <= T::min_positive_value() {
                        continue;
                    }
                    let theta = (a[(q, q)] - a[(p, p)]) / (two * apq);
                    let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                    let c = T::one() / (t * t + T::one()).sqrt();
                    let s = t * c;
                    a[(p, p)] = a[(p, p)] - t * apq;
                    a[(q, q)] = a[(q, q)] + t * apq;
                    a[(p, q)] = T::zero();
                    a[(q, p)] = T::zero();
                    for r in 0..n {
                        if r != p && r != q {
                            let (arp, arq) = (a[(r, p)], a[(r, q)]);
                            let np = c * arp - s * arq;
                            let nq = s * arp + c * arq;
                            a[(r, p)] = np;
                            a[(p, r)] = np;
                            a[(r, q)] = nq;
                            a[(q, r)] = nq;
                        }
                        let (vrp, vrq) = (v[(r, p)], v[(r, q)]);
                        v[(r, p)] = c * vrp - s * vrq;
                        v[(r, q)] = s * vrp + c * vrq;
                    }
                }
            }
        }
        Err(Error::Convergence("Jacobi eigen iteration did not converge".into()))
    }

    /// Solve `self · x = b` by Gaussian elimination with partial pivoting.
    pub fn solve(&self, b: &[T]) -> Result<Vec<T>> {
        if !self.is_square() || b.len() != self.rows {
            return domain("solve needs a square system");
        }
        let n = self.rows;
        let mut a = self.clone();
        let mut x = b.to_vec();
        let tiny = T::epsilon() * a.max_abs() * T::lit(n as f64);
        for col in 0..n {
            let piv = (col..n).max_by(|&i, &j| a[(i, col)].abs().partial_cmp(&a[(j, col)].abs()).unwrap()).unwrap();
            if a[(piv, col)].abs() <= tiny {
                return Err(Error::Precondition("singular linear system".into()));
            }
            if piv != col {
                for j in 0..n {
                    let t = a[(col, j)];
                    a[(col, j)] = a[(piv, j)];
                    a[(piv, j)] = t;
                }
                x.swap(col, piv);
            }
            for i in col + 1..n {
                let f = a[(i, col)] / a[(col, col)];
                if f == T::zero() {
                    continue;
                }
                for j in col..n {
                    a[(i, j)] = a[(i, j)] - f * a[(col, j)];
                }
                x[i] = x[i] - f * x[col];
            }
        }
        for i in (0..n).rev() {
            let mut acc = x[i];
            for j in i + 1..n {
                acc = acc - a[(i, j)] * x[j];
            }
            x[i] = acc / a[(i, i)];
        }
        Ok(x)
    }
}

impl<T> Index<(usize, usize)> for Matrix<T> {
    type Output = T;
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for Matrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

/// Eigenvalues below `−psd_tolerance` make a matrix non-PSD.
pub fn psd_tolerance<T: Real>(scale: T) -> T {
    T::lit(1e-10).max(T::lit(64.0) * T::epsilon()) * scale.max(T::one())
}

/// Symmetric PSD square root. Slightly negative eigenvalues are clamped to 0.
pub fn psd_sqrt<T: Real>(a: &Matrix<T>) -> Result<Matrix<T>> {
    let scale = a.max_abs();
    let tol = psd_tolerance(scale);
    if !a.is_symmetric(tol) {
        return domain(format!("matrix is not symmetric (asymmetry {})", a.asymmetry()));
    }
    let (vals, vecs) = a.symmetric_eigen()?;
    let n = a.rows();
    if let Some(&worst) = vals.iter().min_by(|x, y| x.partial_cmp(y).unwrap()) {
        if worst < -tol {
            return Err(Error::NotPsd(worst.to64()));
        }
    }
    let roots: Vec<T> = vals.iter().map(|&l| l.max(T::zero()).sqrt()).collect();
    let mut s = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let v: T = (0..n).map(|k| vecs[(i, k)] * roots[k] * vecs[(j, k)]).sum();
            s[(i, j)] = v;
            s[(j, i)] = v;
        }
    }
    Ok(s)
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue<T: Real>(a: &Matrix<T>) -> Result<T> {
    let (vals, _) = a.symmetric_eigen()?;
    Ok(vals.into_iter().fold(T::infinity(), T::min))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sqrt_of_identity_and_diagonal() {
        let i = Matrix::<f64>::identity(3);
        assert_eq!(psd_sqrt(&i).unwrap(), i);
        let s = psd_sqrt(&Matrix::from_diag(&[4.0, 9.0])).unwrap();
        assert!(s.max_abs_diff(&Matrix::from_diag(&[2.0, 3.0])) < 1e-15);
    }

    #[test]
    fn negative_eigenvalue_is_rejected() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap();
        assert!(matches!(psd_sqrt(&a), Err(Error::NotPsd(v)) if (v + 1.0).abs() < 1e-12));
        let tiny = Matrix::from_diag(&[1.0, -1e-12]);
        assert_eq!(psd_sqrt(&tiny).unwrap()[(1, 1)], 0.0);
    }

    #[test]
    fn eigen_reconstructs() {
        let a = Matrix::from_rows(&[vec![4.0, 1.0, 0.5], vec![1.0, 3.0, 0.2], vec![0.5, 0.2, 1.0]]).unwrap();
        let (vals, v) = a.symmetric_eigen().unwrap();
        let back = v.matmul(&Matrix::from_diag(&vals)).matmul(&v.transpose());
        assert!(back.max_abs_diff(&a) < 1e-13);
    }

    #[test]
    fn solve_small_system() {
        let a = Matrix::<f64>::from_rows(&[vec![0.0, 2.0], vec![3.0, 1.0]]).unwrap();
        let x = a.solve(&[4.0, 5.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-15 && (x[1] - 2.0).abs() < 1e-15);
        assert!(Matrix::<f64>::zeros(2, 2).solve(&[1.0, 1.0]).is_err());
    }

    #[test]
    fn f32_sqrt() {
        let a = Matrix::<f32>::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let s = psd_sqrt(&a).unwrap();
        assert!(s.matmul(&s).max_abs_diff(&a) < 1e-5);
    }
}
