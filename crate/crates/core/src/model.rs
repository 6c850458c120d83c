//! Quartically regularized cubic polynomials and their separable variant.

use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, Error, Result};
use crate::linalg;
use crate::metric::Metric;
use crate::tensor::{idx, SymTensor3};

/// Multiple of the unit roundoff times [`QuarticModel::gradient_scale`] below
/// which a gradient norm carries no information.
pub const GRADIENT_FLOOR_FACTOR: f64 = 100.0;

/// `m(s) = f0 + gᵀs + ½H[s]² + ⅙T[s]³ + (σ/4)‖s‖_W⁴`.
#[derive(Clone, Debug)]
pub struct QuarticModel {
    pub f0: f64,
    pub g: DVector<f64>,
    pub h: DMatrix<f64>,
    pub t: SymTensor3,
    pub sigma: f64,
    pub w: Metric,
}

/// Value and optionally the first two derivatives at a point.
#[derive(Clone, Debug)]
pub struct Evaluation {
    pub value: f64,
    pub gradient: Option<DVector<f64>>,
    pub hessian: Option<DMatrix<f64>>,
}

/// The four terms of `m(s+v) − m(s)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DifferenceTerms {
    /// `(g + B(s)s)ᵀv`
    pub linear: f64,
    /// `½ G(s)[v]²`
    pub quadratic: f64,
    /// `⅙ T[v]³`
    pub cubic: f64,
    /// `(σ/4)(‖s+v‖_W² − ‖s‖_W²)²`
    pub quartic: f64,
}

impl DifferenceTerms {
    pub fn sum(&self) -> f64 {
        self.linear + self.quadratic + self.cubic + self.quartic
    }
}

impl QuarticModel {
    pub fn new(
        f0: f64,
        g: DVector<f64>,
        h: DMatrix<f64>,
        t: SymTensor3,
        sigma: f64,
        w: Metric,
    ) -> Result<Self> {
        let n = g.len();
        check_dim(n, h.nrows())?;
        check_dim(n, h.ncols())?;
        check_dim(n, t.dim())?;
        check_dim(n, w.dim())?;
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "sigma must be positive, got {sigma}"
            )));
        }
        if !linalg::is_symmetric(&h, 1e-10) {
            return Err(Error::InvalidArgument("H must be symmetric".into()));
        }
        Ok(QuarticModel {
            f0,
            g,
            h: linalg::symmetrize(&h),
            t,
            sigma,
            w,
        })
    }

    pub fn dim(&self) -> usize {
        self.g.len()
    }

    /// Evaluates the model; `upto` selects value (0), gradient (1) or Hessian (2).
    pub fn evaluate(&self, s: &DVector<f64>, upto: u8) -> Result<Evaluation> {
        check_dim(self.dim(), s.len())?;
        let ws = self.w.apply(s);
        let ns = s.dot(&ws);
        let hs = &self.h * s;
        let (ts, ts2) = if upto >= 2 {
            let m = self.t.contract1(s);
            let v = &m * s;
            (Some(m), v)
        } else {
            (None, self.t.contract2(s))
        };
        let value = self.f0
            + self.g.dot(s)
            + 0.5 * s.dot(&hs)
            + s.dot(&ts2) / 6.0
            + 0.25 * self.sigma * ns * ns;
        let gradient = (upto >= 1).then(|| &self.g + &hs + &ts2 * 0.5 + &ws * (self.sigma * ns));
        let hessian = ts.map(|m| {
            let mut out = &self.h + m;
            self.w.add_scaled_into(&mut out, self.sigma * ns);
            out.ger(2.0 * self.sigma, &ws, &ws, 1.0);
            out
        });
        Ok(Evaluation {
            value,
            gradient,
            hessian,
        })
    }

    /// # Panics
    /// On dimension mismatch.
    pub fn value(&self, s: &DVector<f64>) -> f64 {
        let ns = self.w.norm_sq(s);
        self.f0
            + self.g.dot(s)
            + 0.5 * s.dot(&(&self.h * s))
            + self.t.contract3(s) / 6.0
            + 0.25 * self.sigma * ns * ns
    }

    /// # Panics
    /// On dimension mismatch.
    pub fn gradient(&self, s: &DVector<f64>) -> DVector<f64> {
        let ws = self.w.apply(s);
        let ns = s.dot(&ws);
        &self.g + &self.h * s + self.t.contract2(s) * 0.5 + ws * (self.sigma * ns)
    }

    /// Sum of the norms of the gradient's terms at `s`, which sets the size of
    /// its rounding error.
    pub fn gradient_scale(&self, s: &DVector<f64>) -> f64 {
        let ws = self.w.apply(s);
        let ns = s.dot(&ws);
        self.g.norm()
            + (&self.h * s).norm()
            + 0.5 * self.t.contract2(s).norm()
            + self.sigma * ns * ws.norm()
    }

    /// Smallest gradient norm that is meaningful in floating point at `s`.
    pub fn gradient_floor(&self, s: &DVector<f64>) -> f64 {
        GRADIENT_FLOOR_FACTOR * f64::EPSILON * self.gradient_scale(s)
    }

    /// # Panics
    /// On dimension mismatch.
    pub fn hessian(&self, s: &DVector<f64>) -> DMatrix<f64> {
        self.evaluate(s, 2)
            .expect("dimension mismatch")
            .hessian
            .unwrap()
    }

    /// `B(s) = H + ½T[s] + σ‖s‖_W² W`.
    pub fn b_operator(&self, s: &DVector<f64>) -> DMatrix<f64> {
        let mut b = &self.h + self.t.contract1(s) * 0.5;
        self.w
            .add_scaled_into(&mut b, self.sigma * self.w.norm_sq(s));
        b
    }

    /// `G(s) = H + T[s] + σ‖s‖_W² W`.
    pub fn g_operator(&self, s: &DVector<f64>) -> DMatrix<f64> {
        let mut g = &self.h + self.t.contract1(s);
        self.w
            .add_scaled_into(&mut g, self.sigma * self.w.norm_sq(s));
        g
    }

    /// The model recentered at `p`: `m'(s) = m(p + s)` exactly.
    ///
    /// For `p ≠ 0` the returned tensor is dense and includes the third
    /// derivative of the regularizer.
    pub fn shift(&self, p: &DVector<f64>) -> Result<QuarticModel> {
        check_dim(self.dim(), p.len())?;
        if p.iter().all(|x| *x == 0.0) {
            return Ok(self.clone());
        }
        let ev = self.evaluate(p, 2)?;
        Ok(QuarticModel {
            f0: ev.value,
            g: ev.gradient.unwrap(),
            h: linalg::symmetrize(&ev.hessian.unwrap()),
            t: self.third_derivative(p),
            sigma: self.sigma,
            w: self.w.clone(),
        })
    }

    /// Dense `∇³m(p) = T + 2σ·sym(Wp ⊗ W)`.
    pub fn third_derivative(&self, p: &DVector<f64>) -> SymTensor3 {
        let n = self.dim();
        let mut e = self.t.to_dense_entries();
        let wp = self.w.apply(p) * (2.0 * self.sigma);
        let wm = self.w.matrix();
        for i in 0..n {
            for j in 0..n {
                let base = idx(n, i, j, 0);
                let (wpi, wpj, wij) = (wp[i], wp[j], wm[(i, j)]);
                for k in 0..n {
                    e[base + k] += wpi * wm[(j, k)] + wpj * wm[(i, k)] + wp[k] * wij;
                }
            }
        }
        SymTensor3::dense_unchecked(n, e)
    }

    /// Superdiagonal of `∇³m(p)` without forming the dense tensor.
    pub fn third_derivative_superdiagonal(&self, p: &DVector<f64>) -> DVector<f64> {
        let wp = self.w.apply(p);
        let wd = match self.w.diagonal_entries() {
            Some(d) => d,
            None => self.w.matrix().diagonal(),
        };
        self.t.superdiagonal() + wp.component_mul(&wd) * (6.0 * self.sigma)
    }

    /// Splits `m(s+v) − m(s)` into its linear, quadratic, cubic and quartic parts.
    pub fn difference_decomposition(
        &self,
        s: &DVector<f64>,
        v: &DVector<f64>,
    ) -> Result<DifferenceTerms> {
        check_dim(self.dim(), s.len())?;
        check_dim(self.dim(), v.len())?;
        let b = self.b_operator(s);
        let g = self.g_operator(s);
        let sv = s + v;
        let d = self.w.norm_sq(&sv) - self.w.norm_sq(s);
        Ok(DifferenceTerms {
            linear: (&self.g + &b * s).dot(v),
            quadratic: 0.5 * v.dot(&(&g * v)),
            cubic: self.t.contract3(v) / 6.0,
            quartic: 0.25 * self.sigma * d * d,
        })
    }
}

/// Separable variant `f0 + gᵀs + ½H[s]² + Σ_j (t_j s_j³/6 + σ_j s_j⁴/4)`.
#[derive(Clone, Debug)]
pub struct SqrModel {
    pub f0: f64,
    pub g: DVector<f64>,
    pub h: DMatrix<f64>,
    pub t: DVector<f64>,
    pub sig: DVector<f64>,
}

/// The three terms of `m_SQR(s+v) − m_SQR(s)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SqrTerms {
    pub linear: f64,
    pub quadratic: f64,
    /// Always nonnegative.
    pub sos: f64,
}

impl SqrTerms {
    pub fn sum(&self) -> f64 {
        self.linear + self.quadratic + self.sos
    }
}

impl SqrModel {
    pub fn new(
        f0: f64,
        g: DVector<f64>,
        h: DMatrix<f64>,
        t: DVector<f64>,
        sig: DVector<f64>,
    ) -> Result<Self> {
        let n = g.len();
        check_dim(n, h.nrows())?;
        check_dim(n, h.ncols())?;
        check_dim(n, t.len())?;
        check_dim(n, sig.len())?;
        if sig.iter().any(|x| !(*x > 0.0)) {
            return Err(Error::InvalidArgument(
                "all quartic weights must be positive".into(),
            ));
        }
        if !linalg::is_symmetric(&h, 1e-10) {
            return Err(Error::InvalidArgument("H must be symmetric".into()));
        }
        Ok(SqrModel {
            f0,
            g,
            h: linalg::symmetrize(&h),
            t,
            sig,
        })
    }

    pub fn dim(&self) -> usize {
        self.g.len()
    }

    pub fn value(&self, s: &DVector<f64>) -> f64 {
        let sep: f64 = (0..self.dim())
            .map(|j| {
                let x = s[j];
                self.t[j] * x * x * x / 6.0 + 0.25 * self.sig[j] * x * x * x * x
            })
            .sum();
        self.f0 + self.g.dot(s) + 0.5 * s.dot(&(&self.h * s)) + sep
    }

    pub fn gradient(&self, s: &DVector<f64>) -> DVector<f64> {
        let sep = DVector::from_fn(self.dim(), |j, _| {
            let x = s[j];
            0.5 * self.t[j] * x * x + self.sig[j] * x * x * x
        });
        &self.g + &self.h * s + sep
    }

    pub fn hessian(&self, s: &DVector<f64>) -> DMatrix<f64> {
        let d = DVector::from_fn(self.dim(), |j, _| {
            self.t[j] * s[j] + 3.0 * self.sig[j] * s[j] * s[j]
        });
        &self.h + DMatrix::from_diagonal(&d)
    }

    /// `B̂(s) = H + ½diag(t∘s) + diag(σ∘s²)`.
    pub fn b_hat(&self, s: &DVector<f64>) -> DMatrix<f64> {
        let d = DVector::from_fn(self.dim(), |j, _| {
            0.5 * self.t[j] * s[j] + self.sig[j] * s[j] * s[j]
        });
        &self.h + DMatrix::from_diagonal(&d)
    }

    /// `Ĝ(s) = H + ⅓diag(t∘s) + diag(σ∘s²) − diag(t²/(18σ))`.
    pub fn g_hat(&self, s: &DVector<f64>) -> DMatrix<f64> {
        let d = DVector::from_fn(self.dim(), |j, _| {
            self.t[j] * s[j] / 3.0 + self.sig[j] * s[j] * s[j]
                - self.t[j] * self.t[j] / (18.0 * self.sig[j])
        });
        &self.h + DMatrix::from_diagonal(&d)
    }

    pub fn decomposition(&self, s: &DVector<f64>, v: &DVector<f64>) -> Result<SqrTerms> {
        check_dim(self.dim(), s.len())?;
        check_dim(self.dim(), v.len())?;
        let sos: f64 = (0..self.dim())
            .map(|j| {
                let w = v[j] * (v[j] + 2.0 * s[j] + self.t[j] / (3.0 * self.sig[j]));
                self.sig[j] * w * w
            })
            .sum::<f64>()
            * 0.25;
        Ok(SqrTerms {
            linear: (&self.g + self.b_hat(s) * s).dot(v),
            quadratic: 0.5 * v.dot(&(self.g_hat(s) * v)),
            sos,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    /// m(s) = −s³ + ¾s⁴
    pub(crate) fn univariate() -> QuarticModel {
        QuarticModel::new(
            0.0,
            v(&[0.0]),
            DMatrix::zeros(1, 1),
            SymTensor3::diagonal(v(&[-6.0])),
            3.0,
            Metric::identity(1),
        )
        .unwrap()
    }

    #[test]
    fn evaluate_at_zero_returns_coefficients() {
        let m = QuarticModel::new(
            1.5,
            v(&[1.0, -2.0]),
            DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, -1.0]),
            SymTensor3::diagonal(v(&[1.0, 1.0])),
            2.0,
            Metric::identity(2),
        )
        .unwrap();
        let e = m.evaluate(&v(&[0.0, 0.0]), 2).unwrap();
        assert_eq!(e.value, 1.5);
        assert_eq!(e.gradient.unwrap(), m.g);
        assert_eq!(e.hessian.unwrap(), m.h);
    }

    #[test]
    fn univariate_values() {
        let m = univariate();
        let e = m.evaluate(&v(&[1.0]), 2).unwrap();
        assert!((e.value + 0.25).abs() < 1e-15);
        assert!(e.gradient.unwrap()[0].abs() < 1e-15);
        assert!((e.hessian.unwrap()[(0, 0)] - 3.0).abs() < 1e-15);
    }

    #[test]
    fn shift_of_pure_quartic() {
        let m = QuarticModel::new(
            0.0,
            v(&[0.0]),
            DMatrix::zeros(1, 1),
            SymTensor3::zero(1),
            4.0,
            Metric::identity(1),
        )
        .unwrap();
        let s = m.shift(&v(&[1.0])).unwrap();
        assert_eq!(s.f0, 1.0);
        assert_eq!(s.g[0], 4.0);
        assert_eq!(s.h[(0, 0)], 12.0);
        assert_eq!(s.t.entry(0, 0, 0), 24.0);
        assert_eq!(s.sigma, 4.0);
    }

    #[test]
    fn shift_at_zero_is_identity() {
        let m = univariate();
        let s = m.shift(&v(&[0.0])).unwrap();
        assert_eq!(s.t, m.t);
        assert_eq!(s.f0, m.f0);
    }

    #[test]
    fn univariate_difference() {
        let m = univariate();
        let d = m.difference_decomposition(&v(&[1.0]), &v(&[-2.0])).unwrap();
        assert!((d.sum() - 2.0).abs() < 1e-14);
        let d0 = m.difference_decomposition(&v(&[0.0]), &v(&[0.7])).unwrap();
        assert!((d0.quartic - 0.75 * 0.7f64.powi(4)).abs() < 1e-15);
        assert_eq!(d0.linear, 0.0);
    }

    #[test]
    fn operators_on_univariate() {
        let m = univariate();
        let s = v(&[1.0]);
        assert!(m.b_operator(&s)[(0, 0)].abs() < 1e-15);
        assert!((m.g_operator(&s)[(0, 0)] + 3.0).abs() < 1e-15);
    }

    #[test]
    fn sqr_univariate_difference() {
        let m = SqrModel::new(0.0, v(&[0.0]), DMatrix::zeros(1, 1), v(&[-6.0]), v(&[3.0])).unwrap();
        let d = m.decomposition(&v(&[1.0]), &v(&[-2.0])).unwrap();
        assert!((d.sum() - 2.0).abs() < 1e-14);
        assert!(d.sos >= 0.0);
    }

    #[test]
    fn sqr_without_cubic_has_equal_operators() {
        let m = SqrModel::new(
            0.0,
            v(&[1.0, 2.0]),
            DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 2.0]),
            v(&[0.0, 0.0]),
            v(&[1.0, 3.0]),
        )
        .unwrap();
        let s = v(&[0.3, -0.4]);
        assert_eq!(m.b_hat(&s), m.g_hat(&s));
    }

    #[test]
    fn sqr_rejects_nonpositive_weight() {
        assert!(SqrModel::new(0.0, v(&[1.0]), DMatrix::zeros(1, 1), v(&[0.0]), v(&[0.0])).is_err());
    }

    #[test]
    fn superdiagonal_shortcut_matches_dense_shift() {
        let m = QuarticModel::new(
            0.0,
            v(&[1.0, -1.0]),
            DMatrix::identity(2, 2),
            SymTensor3::diagonal(v(&[2.0, -3.0])),
            1.5,
            Metric::new(DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0])).unwrap(),
        )
        .unwrap();
        let p = v(&[0.4, -0.7]);
        let dense = m.third_derivative(&p).superdiagonal();
        let fast = m.third_derivative_superdiagonal(&p);
        assert!((dense - fast).norm() < 1e-13);
    }
}
