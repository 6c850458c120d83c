//! Construction of the diagonal tensor model `M_d` at an iterate.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg;
use crate::metric::Metric;
use crate::model::QuarticModel;
use crate::tensor::SymTensor3;

use super::rank::rank_approx;
use super::{DtmConfig, Rule};

/// Rows spanning the orthogonal complement of the rows of `c_hat` (P×n).
pub fn orth_complement(c_hat: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (p, n) = c_hat.shape();
    if p > n {
        return Err(Error::InvalidArgument("more rows than columns".into()));
    }
    let gram = c_hat.transpose() * c_hat;
    let (vals, vecs) = linalg::sorted_eigen(&gram);
    let top = vals.iter().copied().fold(0.0, f64::max);
    if p > 0 && !(vals[n - p] > 1e-12 * top && top > 0.0) {
        return Err(Error::InvalidArgument("rows are linearly dependent".into()));
    }
    // eigenvectors of the zero eigenvalues, with one Gram–Schmidt pass against c_hat
    let q = c_hat.transpose().qr().q();
    let mut out = DMatrix::zeros(n - p, n);
    for r in 0..n - p {
        let mut x: DVector<f64> = vecs.column(r).into_owned();
        let proj = q.transpose() * &x;
        x -= &q * proj;
        for prev in 0..r {
            let y = out.row(prev).transpose();
            let d = y.dot(&x);
            x.axpy(-d, &y, 1.0);
        }
        let nx = x.norm();
        out.set_row(r, &(x / nx).transpose());
    }
    Ok(out)
}

/// Change of variables `s̃ = C s`.
#[derive(Clone, Debug)]
pub struct Basis {
    pub c: DMatrix<f64>,
    pub c_inv: DMatrix<f64>,
}

/// `M_d(s) = f + gᵀs + ½H[s]² + ⅙Σ t_j s_j³ + (σ_d/4)‖s‖_W⁴` in the working basis.
#[derive(Clone, Debug)]
pub struct BuiltModel {
    pub diag_t: DVector<f64>,
    pub f: f64,
    pub g: DVector<f64>,
    pub h: DMatrix<f64>,
    pub basis: Option<Basis>,
    pub sigma_d: f64,
    pub w_eff: Metric,
    /// Set when the low-rank rule fell back to the diagonal rule.
    pub fell_back: bool,
}

impl BuiltModel {
    pub fn model(&self) -> QuarticModel {
        QuarticModel {
            f0: self.f,
            g: self.g.clone(),
            h: self.h.clone(),
            t: SymTensor3::diagonal(self.diag_t.clone()),
            sigma: self.sigma_d,
            w: self.w_eff.clone(),
        }
    }

    /// Step in original coordinates.
    pub fn to_original(&self, s_work: &DVector<f64>) -> DVector<f64> {
        match &self.basis {
            Some(b) => &b.c_inv * s_work,
            None => s_work.clone(),
        }
    }

    /// `Σ t_j ŝ_j³` with `ŝ = s/‖s‖_W` in the working basis.
    pub fn beta(&self, s_work: &DVector<f64>) -> f64 {
        let ns = self.w_eff.norm(s_work);
        if ns == 0.0 {
            return 0.0;
        }
        self.diag_t
            .iter()
            .zip(s_work.iter())
            .map(|(t, x)| t * (x / ns).powi(3))
            .sum()
    }
}

/// Value, gradient and Hessian of `m₃` at the current iterate.
#[derive(Clone, Debug)]
pub struct Iterate {
    pub s: DVector<f64>,
    pub f: f64,
    pub g: DVector<f64>,
    pub h: DMatrix<f64>,
}

impl Iterate {
    pub fn at_origin(m: &QuarticModel) -> Self {
        Iterate {
            s: DVector::zeros(m.dim()),
            f: m.f0,
            g: m.g.clone(),
            h: m.h.clone(),
        }
    }

    pub fn is_origin(&self) -> bool {
        self.s.iter().all(|x| *x == 0.0)
    }
}

/// Diagonal rule: the superdiagonal of the third derivative at the iterate, clipped to `±cfg.cap_b`.
pub fn diagonal_model(m: &QuarticModel, it: &Iterate, d: f64, cfg: &DtmConfig) -> BuiltModel {
    let raw = if it.is_origin() {
        m.t.superdiagonal()
    } else {
        m.third_derivative_superdiagonal(&it.s)
    };
    let b = cfg.cap_b;
    BuiltModel {
        diag_t: raw.map(|x| x.clamp(-b, b)),
        f: it.f,
        g: it.g.clone(),
        h: it.h.clone(),
        basis: None,
        sigma_d: m.sigma + d,
        w_eff: m.w.clone(),
        fell_back: false,
    }
}

fn low_rank_model<R: Rng>(
    m: &QuarticModel,
    it: &Iterate,
    d: f64,
    rank: usize,
    exact: Option<&[DVector<f64>]>,
    rng: &mut R,
) -> Result<BuiltModel> {
    let n = m.dim();
    let factors = match exact {
        Some(f) if it.is_origin() => f.to_vec(),
        _ => {
            let t_i = if it.is_origin() {
                m.t.clone()
            } else {
                m.third_derivative(&it.s)
            };
            rank_approx(&t_i, rank, rng)?
        }
    };
    let p = factors.len();
    let c_hat = DMatrix::from_fn(p, n, |k, j| factors[k][j]);
    let comp = orth_complement(&c_hat)?;
    let mut c = DMatrix::zeros(n, n);
    c.view_mut((0, 0), (p, n)).copy_from(&c_hat);
    c.view_mut((p, 0), (n - p, n)).copy_from(&comp);
    let c_inv = c
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::RankApprox("singular change of basis".into()))?;
    let w_eff = m.w.congruence(&c_inv)?;
    let g = c_inv.transpose() * &it.g;
    let h = linalg::symmetrize(&(c_inv.transpose() * &it.h * &c_inv));
    let diag_t = DVector::from_fn(n, |j, _| if j < p { 1.0 } else { 0.0 });
    Ok(BuiltModel {
        diag_t,
        f: it.f,
        g,
        h,
        basis: Some(Basis { c, c_inv }),
        sigma_d: m.sigma + d,
        w_eff,
        fell_back: false,
    })
}

/// Builds `M_d` at `it` according to `rule`.
pub fn build_model<R: Rng>(
    m: &QuarticModel,
    it: &Iterate,
    d: f64,
    cfg: &DtmConfig,
    rng: &mut R,
) -> Result<BuiltModel> {
    if !(d >= 0.0) {
        return Err(Error::InvalidArgument("d must be nonnegative".into()));
    }
    match &cfg.rule {
        Rule::Diagonal => Ok(diagonal_model(m, it, d, cfg)),
        Rule::LowRank { rank, factors } => {
            match low_rank_model(m, it, d, *rank, factors.as_deref(), rng) {
                Ok(b) => Ok(b),
                Err(e) => {
                    log::warn!("low-rank model failed ({e}); using the diagonal rule");
                    let mut b = diagonal_model(m, it, d, cfg);
                    b.fell_back = true;
                    Ok(b)
                }
            }
        }
    }
}
