//! The positive-definite metric `W` and generalized symmetric eigenproblems.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{check_dim, Error, Result};
use crate::linalg;

/// Symmetric positive-definite weight matrix defining `‖v‖_W = √(vᵀWv)`.
#[derive(Clone, Debug)]
pub struct Metric {
    n: usize,
    /// `None` marks the identity.
    w: Option<DMatrix<f64>>,
    chol: Option<Cholesky<f64, Dyn>>,
    lambda_min: f64,
    lambda_max: f64,
}

impl Metric {
    pub fn identity(n: usize) -> Self {
        Metric {
            n,
            w: None,
            chol: None,
            lambda_min: 1.0,
            lambda_max: 1.0,
        }
    }

    /// Wraps a dense symmetric positive-definite matrix.
    pub fn new(w: DMatrix<f64>) -> Result<Self> {
        if !w.is_square() {
            return Err(Error::InvalidArgument("metric must be square".into()));
        }
        if !linalg::is_symmetric(&w, 1e-12) {
            return Err(Error::InvalidArgument("metric must be symmetric".into()));
        }
        let w = linalg::symmetrize(&w);
        let n = w.nrows();
        let eig = w.clone().symmetric_eigenvalues();
        let lambda_min = eig.iter().copied().fold(f64::INFINITY, f64::min);
        let lambda_max = eig.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if n > 0 && lambda_min <= 0.0 {
            return Err(Error::NotPositiveDefinite);
        }
        let chol = Cholesky::new(w.clone()).ok_or(Error::NotPositiveDefinite)?;
        Ok(Metric {
            n,
            w: Some(w),
            chol: Some(chol),
            lambda_min: if n == 0 { 1.0 } else { lambda_min },
            lambda_max: if n == 0 { 1.0 } else { lambda_max },
        })
    }

    pub fn diagonal(d: &DVector<f64>) -> Result<Self> {
        Metric::new(DMatrix::from_diagonal(d))
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn is_identity(&self) -> bool {
        self.w.is_none()
    }

    pub fn lambda_min(&self) -> f64 {
        self.lambda_min
    }

    pub fn lambda_max(&self) -> f64 {
        self.lambda_max
    }

    /// Dense copy of `W`.
    pub fn matrix(&self) -> DMatrix<f64> {
        match &self.w {
            Some(w) => w.clone(),
            None => DMatrix::identity(self.n, self.n),
        }
    }

    /// Diagonal of `W` if `W` is diagonal.
    pub fn diagonal_entries(&self) -> Option<DVector<f64>> {
        match &self.w {
            None => Some(DVector::from_element(self.n, 1.0)),
            Some(w) => {
                for j in 0..self.n {
                    for i in 0..self.n {
                        if i != j && w[(i, j)] != 0.0 {
                            return None;
                        }
                    }
                }
                Some(w.diagonal())
            }
        }
    }

    /// `W v`.
    pub fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        match &self.w {
            Some(w) => w * v,
            None => v.clone(),
        }
    }

    pub fn norm_sq(&self, v: &DVector<f64>) -> f64 {
        match &self.w {
            Some(w) => v.dot(&(w * v)),
            None => v.norm_squared(),
        }
    }

    pub fn norm(&self, v: &DVector<f64>) -> f64 {
        self.norm_sq(v).max(0.0).sqrt()
    }

    /// `A + c W` without materializing the identity twice.
    pub fn add_scaled_to(&self, a: &DMatrix<f64>, c: f64) -> DMatrix<f64> {
        let mut out = a.clone();
        self.add_scaled_into(&mut out, c);
        out
    }

    pub fn add_scaled_into(&self, a: &mut DMatrix<f64>, c: f64) {
        match &self.w {
            Some(w) => *a += w * c,
            None => {
                for i in 0..self.n {
                    a[(i, i)] += c;
                }
            }
        }
    }

    /// Metric `C⁻ᵀ W C⁻¹` given `C⁻¹`.
    pub fn congruence(&self, c_inv: &DMatrix<f64>) -> Result<Metric> {
        check_dim(self.n, c_inv.nrows())?;
        let w = match &self.w {
            Some(w) => c_inv.transpose() * w * c_inv,
            None => c_inv.transpose() * c_inv,
        };
        Metric::new(linalg::symmetrize(&w))
    }

    /// Lower Cholesky factor of `W`.
    pub fn cholesky_l(&self) -> DMatrix<f64> {
        match &self.chol {
            Some(c) => c.l(),
            None => DMatrix::identity(self.n, self.n),
        }
    }
}

/// Solution of `A U = W U D` with `Uᵀ W U = I` and ascending `D`.
#[derive(Clone, Debug)]
pub struct GenEig {
    pub values: DVector<f64>,
    pub vectors: DMatrix<f64>,
}

impl GenEig {
    pub fn min_value(&self) -> f64 {
        if self.values.is_empty() {
            0.0
        } else {
            self.values[0]
        }
    }
}

/// Generalized eigendecomposition of the pencil `(A, W)` via `W = LLᵀ`.
pub fn generalized_eig(a: &DMatrix<f64>, w: &Metric) -> Result<GenEig> {
    check_dim(w.dim(), a.nrows())?;
    check_dim(w.dim(), a.ncols())?;
    let a = linalg::symmetrize(a);
    match &w.chol {
        None => {
            let (values, vectors) = linalg::sorted_eigen(&a);
            Ok(GenEig { values, vectors })
        }
        Some(chol) => {
            let l = chol.l();
            // L⁻¹ A L⁻ᵀ
            let x = l
                .solve_lower_triangular(&a)
                .ok_or(Error::NotPositiveDefinite)?;
            let c = l
                .solve_lower_triangular(&x.transpose())
                .ok_or(Error::NotPositiveDefinite)?;
            let (values, q) = linalg::sorted_eigen(&linalg::symmetrize(&c));
            let u = l
                .transpose()
                .solve_upper_triangular(&q)
                .ok_or(Error::NotPositiveDefinite)?;
            Ok(GenEig { values, vectors: u })
        }
    }
}

/// Smallest eigenvalue of the pencil `(A, W)`.
pub fn pencil_min_eigenvalue(a: &DMatrix<f64>, w: &Metric) -> Result<f64> {
    if w.is_identity() {
        check_dim(w.dim(), a.nrows())?;
        return Ok(linalg::min_eigenvalue(&linalg::symmetrize(a)));
    }
    Ok(generalized_eig(a, w)?.min_value())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn residuals(a: &DMatrix<f64>, w: &Metric, e: &GenEig) -> (f64, f64) {
        let wm = w.matrix();
        let d = DMatrix::from_diagonal(&e.values);
        let r1 = (a * &e.vectors - &wm * &e.vectors * d).norm();
        let r2 = (e.vectors.transpose() * &wm * &e.vectors
            - DMatrix::identity(a.nrows(), a.nrows()))
        .norm();
        (r1, r2)
    }

    #[test]
    fn diagonal_identity_pencil() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, 2.0]));
        let e = generalized_eig(&a, &Metric::identity(2)).unwrap();
        assert_eq!(e.values.as_slice(), &[2.0, 3.0]);
        assert!((e.vectors[(1, 0)].abs() - 1.0).abs() < 1e-14);
        assert!((e.vectors[(0, 1)].abs() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn pencil_with_itself_gives_unit_eigenvalues() {
        let w = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 2.0]);
        let m = Metric::new(w.clone()).unwrap();
        let e = generalized_eig(&w, &m).unwrap();
        for v in e.values.iter() {
            assert!((v - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn random_pencil_residuals() {
        let a = DMatrix::from_fn(5, 5, |i, j| {
            ((i * 7 + j * 3) % 5) as f64 - 2.0 + if i == j { 0.3 } else { 0.0 }
        });
        let a = linalg::symmetrize(&a);
        let b = DMatrix::from_fn(5, 5, |i, j| ((i + 2 * j) % 4) as f64 * 0.3);
        let w = &b * b.transpose() + DMatrix::identity(5, 5);
        let m = Metric::new(w).unwrap();
        let e = generalized_eig(&a, &m).unwrap();
        let (r1, r2) = residuals(&a, &m, &e);
        assert!(r1 < 1e-10 && r2 < 1e-10, "{r1} {r2}");
        for k in 1..5 {
            assert!(e.values[k - 1] <= e.values[k]);
        }
    }

    #[test]
    fn rejects_indefinite_metric() {
        let w = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -1.0]));
        assert!(Metric::new(w).is_err());
    }

    #[test]
    fn norm_matches_quadratic_form() {
        let m = Metric::diagonal(&DVector::from_vec(vec![4.0, 1.0])).unwrap();
        let v = DVector::from_vec(vec![1.0, 2.0]);
        assert!((m.norm_sq(&v) - 8.0).abs() < 1e-15);
        assert!(m.norm_sq(&v) >= m.lambda_min() * v.norm_squared());
    }
}
