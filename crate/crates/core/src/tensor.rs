//! Supersymmetric third-order tensors.

use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, Error, Result};
use crate::metric::Metric;

/// A supersymmetric tensor `T ∈ ℝ^{n×n×n}` in one of four storage forms.
///
/// Contractions follow the derivative convention: `T[s]` is the matrix
/// `Σ_i T_ijk s_i`, `T[s]²` the vector `Σ_jk T_ijk s_j s_k` and `T[s]³`
/// the scalar `Σ_ijk T_ijk s_i s_j s_k`.
#[derive(Clone, Debug, PartialEq)]
pub enum SymTensor3 {
    Zero {
        n: usize,
    },
    /// `T_jjj = t_j`, all other entries zero.
    Diagonal {
        t: DVector<f64>,
    },
    /// `Σ_k a_k ⊗ a_k ⊗ a_k`.
    LowRank {
        n: usize,
        factors: Vec<DVector<f64>>,
    },
    /// Row-major `n³` entries, `T_ijk = entries[(i n + j) n + k]`.
    Dense {
        n: usize,
        entries: Vec<f64>,
    },
}

/// Result of [`SymTensor3::contract`].
#[derive(Clone, Debug, PartialEq)]
pub enum Contraction {
    Matrix(DMatrix<f64>),
    Vector(DVector<f64>),
    Scalar(f64),
}

impl SymTensor3 {
    pub fn zero(n: usize) -> Self {
        SymTensor3::Zero { n }
    }

    pub fn diagonal(t: DVector<f64>) -> Self {
        SymTensor3::Diagonal { t }
    }

    pub fn low_rank(n: usize, factors: Vec<DVector<f64>>) -> Result<Self> {
        for a in &factors {
            check_dim(n, a.len())?;
        }
        Ok(SymTensor3::LowRank { n, factors })
    }

    /// Dense tensor from entries that are already supersymmetric.
    pub fn dense(n: usize, entries: Vec<f64>) -> Result<Self> {
        check_dim(n * n * n, entries.len())?;
        let scale = 1.0 + entries.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let x = entries[idx(n, i, j, k)];
                    for y in [
                        entries[idx(n, i, k, j)],
                        entries[idx(n, j, i, k)],
                        entries[idx(n, k, j, i)],
                    ] {
                        if (x - y).abs() > 1e-12 * scale {
                            return Err(Error::InvalidArgument(
                                "dense tensor entries are not supersymmetric".into(),
                            ));
                        }
                    }
                }
            }
        }
        Ok(SymTensor3::Dense { n, entries })
    }

    /// Dense tensor obtained by averaging `entries` over all six index permutations.
    pub fn dense_symmetrized(n: usize, entries: &[f64]) -> Result<Self> {
        check_dim(n * n * n, entries.len())?;
        let mut out = vec![0.0; entries.len()];
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let sum = entries[idx(n, i, j, k)]
                        + entries[idx(n, i, k, j)]
                        + entries[idx(n, j, i, k)]
                        + entries[idx(n, j, k, i)]
                        + entries[idx(n, k, i, j)]
                        + entries[idx(n, k, j, i)];
                    out[idx(n, i, j, k)] = sum / 6.0;
                }
            }
        }
        Ok(SymTensor3::Dense { n, entries: out })
    }

    pub(crate) fn dense_unchecked(n: usize, entries: Vec<f64>) -> Self {
        debug_assert_eq!(entries.len(), n * n * n);
        SymTensor3::Dense { n, entries }
    }

    pub fn dim(&self) -> usize {
        match self {
            SymTensor3::Zero { n }
            | SymTensor3::LowRank { n, .. }
            | SymTensor3::Dense { n, .. } => *n,
            SymTensor3::Diagonal { t } => t.len(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            SymTensor3::Zero { .. } => "zero",
            SymTensor3::Diagonal { .. } => "diagonal",
            SymTensor3::LowRank { .. } => "lowrank",
            SymTensor3::Dense { .. } => "dense",
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            SymTensor3::Zero { .. } => true,
            SymTensor3::Diagonal { t } => t.iter().all(|x| *x == 0.0),
            SymTensor3::LowRank { factors, .. } => {
                factors.iter().all(|a| a.iter().all(|x| *x == 0.0))
            }
            SymTensor3::Dense { entries, .. } => entries.iter().all(|x| *x == 0.0),
        }
    }

    pub fn entry(&self, i: usize, j: usize, k: usize) -> f64 {
        match self {
            SymTensor3::Zero { .. } => 0.0,
            SymTensor3::Diagonal { t } => {
                if i == j && j == k {
                    t[i]
                } else {
                    0.0
                }
            }
            SymTensor3::LowRank { factors, .. } => factors.iter().map(|a| a[i] * a[j] * a[k]).sum(),
            SymTensor3::Dense { n, entries } => entries[idx(*n, i, j, k)],
        }
    }

    /// The superdiagonal `(T_111, …, T_nnn)`.
    pub fn superdiagonal(&self) -> DVector<f64> {
        match self {
            SymTensor3::Diagonal { t } => t.clone(),
            _ => DVector::from_fn(self.dim(), |j, _| self.entry(j, j, j)),
        }
    }

    /// Row-major dense entries.
    pub fn to_dense_entries(&self) -> Vec<f64> {
        let n = self.dim();
        match self {
            SymTensor3::Dense { entries, .. } => entries.clone(),
            SymTensor3::Zero { .. } => vec![0.0; n * n * n],
            SymTensor3::Diagonal { t } => {
                let mut e = vec![0.0; n * n * n];
                for j in 0..n {
                    e[idx(n, j, j, j)] = t[j];
                }
                e
            }
            SymTensor3::LowRank { factors, .. } => {
                let mut e = vec![0.0; n * n * n];
                for a in factors {
                    for i in 0..n {
                        for j in 0..n {
                            let aij = a[i] * a[j];
                            let row = &mut e[idx(n, i, j, 0)..idx(n, i, j, 0) + n];
                            for (k, x) in row.iter_mut().enumerate() {
                                *x += aij * a[k];
                            }
                        }
                    }
                }
                e
            }
        }
    }

    pub fn to_dense(&self) -> SymTensor3 {
        SymTensor3::Dense {
            n: self.dim(),
            entries: self.to_dense_entries(),
        }
    }

    /// Checked contraction of the requested order (1, 2 or 3).
    pub fn contract(&self, s: &DVector<f64>, order: u8) -> Result<Contraction> {
        check_dim(self.dim(), s.len())?;
        match order {
            1 => Ok(Contraction::Matrix(self.contract1(s))),
            2 => Ok(Contraction::Vector(self.contract2(s))),
            3 => Ok(Contraction::Scalar(self.contract3(s))),
            _ => Err(Error::InvalidArgument(format!("contraction order {order}"))),
        }
    }

    /// The symmetric matrix `T[s]`.
    ///
    /// # Panics
    /// If `s.len() != self.dim()`.
    pub fn contract1(&self, s: &DVector<f64>) -> DMatrix<f64> {
        let n = self.dim();
        assert_eq!(s.len(), n, "tensor contraction dimension mismatch");
        match self {
            SymTensor3::Zero { .. } => DMatrix::zeros(n, n),
            SymTensor3::Diagonal { t } => DMatrix::from_diagonal(&t.component_mul(s)),
            SymTensor3::LowRank { factors, .. } => {
                let mut m = DMatrix::zeros(n, n);
                for a in factors {
                    m.ger(a.dot(s), a, a, 1.0);
                }
                m
            }
            SymTensor3::Dense { entries, .. } => {
                let mut m = DMatrix::zeros(n, n);
                let out = m.as_mut_slice();
                for i in 0..n {
                    let si = s[i];
                    if si == 0.0 {
                        continue;
                    }
                    // slice i is symmetric, so row-major and column-major agree
                    let slab = &entries[i * n * n..(i + 1) * n * n];
                    for (o, x) in out.iter_mut().zip(slab) {
                        *o += si * x;
                    }
                }
                m
            }
        }
    }

    /// The vector `T[s]²`.
    ///
    /// # Panics
    /// If `s.len() != self.dim()`.
    pub fn contract2(&self, s: &DVector<f64>) -> DVector<f64> {
        let n = self.dim();
        assert_eq!(s.len(), n, "tensor contraction dimension mismatch");
        match self {
            SymTensor3::Zero { .. } => DVector::zeros(n),
            SymTensor3::Diagonal { t } => t.component_mul(&s.component_mul(s)),
            SymTensor3::LowRank { factors, .. } => {
                let mut v = DVector::zeros(n);
                for a in factors {
                    let c = a.dot(s);
                    v.axpy(c * c, a, 1.0);
                }
                v
            }
            SymTensor3::Dense { .. } => self.contract1(s) * s,
        }
    }

    /// The scalar `T[s]³`.
    ///
    /// # Panics
    /// If `s.len() != self.dim()`.
    pub fn contract3(&self, s: &DVector<f64>) -> f64 {
        let n = self.dim();
        assert_eq!(s.len(), n, "tensor contraction dimension mismatch");
        match self {
            SymTensor3::Zero { .. } => 0.0,
            SymTensor3::Diagonal { t } => t.iter().zip(s.iter()).map(|(t, x)| t * x * x * x).sum(),
            SymTensor3::LowRank { factors, .. } => factors.iter().map(|a| a.dot(s).powi(3)).sum(),
            SymTensor3::Dense { .. } => s.dot(&self.contract2(s)),
        }
    }

    /// Scalar multiplications spent by one contraction of the given order.
    pub fn contraction_cost(&self, order: u8) -> usize {
        let n = self.dim();
        match self {
            SymTensor3::Zero { .. } => 0,
            SymTensor3::Diagonal { .. } => match order {
                1 => n,
                2 => 2 * n,
                _ => 3 * n,
            },
            SymTensor3::LowRank { factors, .. } => {
                let p = factors.len();
                match order {
                    1 => p * (n + n * n),
                    2 => p * (2 * n + 1),
                    _ => p * (n + 2),
                }
            }
            SymTensor3::Dense { .. } => match order {
                1 => n * n * n,
                2 => n * n * n + n * n,
                _ => n * n * n + n * n + n,
            },
        }
    }

    /// Frobenius norm `(Σ T_ijk²)^{1/2}`.
    pub fn frobenius_norm(&self) -> f64 {
        match self {
            SymTensor3::Zero { .. } => 0.0,
            SymTensor3::Diagonal { t } => t.norm(),
            SymTensor3::LowRank { factors, .. } => {
                let mut acc = 0.0;
                for a in factors {
                    for b in factors {
                        acc += a.dot(b).powi(3);
                    }
                }
                acc.max(0.0).sqrt()
            }
            SymTensor3::Dense { entries, .. } => entries.iter().map(|x| x * x).sum::<f64>().sqrt(),
        }
    }

    /// Upper bound on `Λ₃ = max_{‖u‖=‖v‖=1} |T[u][v]²|`.
    pub fn frobenius_bound(&self) -> f64 {
        match self {
            SymTensor3::Diagonal { t } => t.amax(),
            _ => self.frobenius_norm(),
        }
    }

    /// Upper bound on `Λ_W`, the smallest constant with
    /// `|T[u][v]²| ≤ Λ_W ‖u‖_W ‖v‖_W²`.
    ///
    /// Exact for a diagonal tensor paired with a diagonal metric.
    pub fn lambda_w(&self, w: &Metric) -> f64 {
        if let SymTensor3::Diagonal { t } = self {
            if let Some(d) = w.diagonal_entries() {
                return t
                    .iter()
                    .zip(d.iter())
                    .map(|(t, w)| t.abs() / w.powf(1.5))
                    .fold(0.0, f64::max);
            }
        }
        self.frobenius_bound() * w.lambda_min().powf(-1.5)
    }
}

#[inline]
pub(crate) fn idx(n: usize, i: usize, j: usize, k: usize) -> usize {
    (i * n + j) * n + k
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    fn t112() -> SymTensor3 {
        let mut e = vec![0.0; 8];
        for (i, j, k) in [(0, 0, 1), (0, 1, 0), (1, 0, 0)] {
            e[idx(2, i, j, k)] = 1.0;
        }
        SymTensor3::dense(2, e).unwrap()
    }

    #[test]
    fn diagonal_contractions() {
        let t = SymTensor3::diagonal(v(&[1.0, 2.0]));
        let s = v(&[1.0, 1.0]);
        assert_eq!(t.contract3(&s), 3.0);
        assert_eq!(t.contract2(&s), v(&[1.0, 2.0]));
    }

    #[test]
    fn dense_contractions() {
        let t = t112();
        let s = v(&[1.0, 1.0]);
        assert_eq!(t.contract3(&s), 3.0);
        assert_eq!(t.contract2(&s), v(&[2.0, 1.0]));
        assert_eq!(
            t.contract(&s, 1).unwrap(),
            Contraction::Matrix(DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 0.0]))
        );
    }

    #[test]
    fn low_rank_contraction() {
        let t = SymTensor3::low_rank(2, vec![v(&[1.0, 2.0])]).unwrap();
        assert_eq!(t.contract3(&v(&[1.0, 1.0])), 27.0);
    }

    #[test]
    fn contraction_rejects_bad_dimension() {
        let t = SymTensor3::zero(3);
        assert!(t.contract(&v(&[1.0]), 2).is_err());
        assert!(t.contract(&v(&[1.0, 2.0, 3.0]), 4).is_err());
    }

    #[test]
    fn frobenius_bounds() {
        assert_eq!(SymTensor3::zero(4).frobenius_bound(), 0.0);
        let d = SymTensor3::diagonal(v(&[3.0, 4.0]));
        let b = d.frobenius_bound();
        assert!((4.0..=5.0).contains(&b));
        assert!((d.frobenius_norm() - 5.0).abs() < 1e-15);
        // three unit entries T_112 = T_121 = T_211 = 1
        assert!((t112().frobenius_bound() - 3f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn lambda_w_cases() {
        let t = SymTensor3::diagonal(v(&[2.0, -5.0, 1.0]));
        assert_eq!(t.lambda_w(&Metric::identity(3)), 5.0);
        let t = SymTensor3::diagonal(v(&[8.0, 1.0]));
        let w = Metric::diagonal(&v(&[4.0, 1.0])).unwrap();
        assert!((t.lambda_w(&w) - 1.0).abs() < 1e-15);
        assert!((t112().lambda_w(&Metric::identity(2)) - 3f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn symmetrized_constructor_is_supersymmetric() {
        let raw: Vec<f64> = (0..27).map(|x| (x as f64 * 0.37).sin()).collect();
        let t = SymTensor3::dense_symmetrized(3, &raw).unwrap();
        if let SymTensor3::Dense { entries, .. } = &t {
            assert!(SymTensor3::dense(3, entries.clone()).is_ok());
        }
        assert!(SymTensor3::dense(3, raw).is_err());
    }

    #[test]
    fn low_rank_frobenius_matches_dense() {
        let t = SymTensor3::low_rank(3, vec![v(&[1.0, -2.0, 0.5]), v(&[0.3, 0.1, 2.0])]).unwrap();
        assert!((t.frobenius_norm() - t.to_dense().frobenius_norm()).abs() < 1e-12);
    }
}
