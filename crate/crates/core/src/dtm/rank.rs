//! Symmetric rank-P approximation `T ≈ Σ_k a_k ⊗ a_k ⊗ a_k`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg;
use crate::tensor::{idx, SymTensor3};

const RESTARTS: usize = 50;
const HOPM_TOL: f64 = 1e-10;
const HOPM_MAX_ITER: usize = 500;
const LM_MAX_ITER: usize = 200;

/// `Σ_jk E_ijk u_j u_k` for row-major dense entries.
fn apply2(n: usize, e: &[f64], u: &DVector<f64>) -> DVector<f64> {
    let mut out = DVector::zeros(n);
    for i in 0..n {
        let slab = &e[i * n * n..(i + 1) * n * n];
        let mut acc = 0.0;
        for j in 0..n {
            let row = &slab[j * n..(j + 1) * n];
            let mut r = 0.0;
            for k in 0..n {
                r += row[k] * u[k];
            }
            acc += u[j] * r;
        }
        out[i] = acc;
    }
    out
}

fn subtract_cube(n: usize, e: &mut [f64], a: &DVector<f64>) {
    for i in 0..n {
        for j in 0..n {
            let aij = a[i] * a[j];
            let base = idx(n, i, j, 0);
            for k in 0..n {
                e[base + k] -= aij * a[k];
            }
        }
    }
}

/// Frobenius norm of `T − Σ a_k⊗³`.
pub fn residual_norm(t: &SymTensor3, factors: &[DVector<f64>]) -> f64 {
    let n = t.dim();
    let mut e = t.to_dense_entries();
    for a in factors {
        subtract_cube(n, &mut e, a);
    }
    e.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Leading symmetric rank-one term by the symmetric higher-order power method.
fn best_rank_one<R: Rng>(n: usize, e: &[f64], rng: &mut R) -> Option<DVector<f64>> {
    let mut best: Option<(f64, DVector<f64>)> = None;
    for _ in 0..RESTARTS {
        let mut u = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let nu = u.norm();
        if nu == 0.0 {
            continue;
        }
        u /= nu;
        let mut lam = apply2(n, e, &u).dot(&u);
        for _ in 0..HOPM_MAX_ITER {
            let y = apply2(n, e, &u);
            let ny = y.norm();
            if !(ny > 0.0) {
                break;
            }
            u = y / ny;
            let next = apply2(n, e, &u).dot(&u);
            let done = (next - lam).abs() < HOPM_TOL * lam.abs().max(1.0);
            lam = next;
            if done {
                break;
            }
        }
        if lam.is_finite() && best.as_ref().is_none_or(|(b, _)| lam.abs() > b.abs()) {
            best = Some((lam, u));
        }
    }
    best.map(|(lam, u)| u * lam.cbrt())
}

/// Jointly refines all factors by Levenberg–Marquardt on `‖T − Σ a_k⊗³‖_F²`.
fn refine(t: &SymTensor3, factors: &mut [DVector<f64>]) {
    let n = t.dim();
    let p = factors.len();
    if p == 0 {
        return;
    }
    let dense = t.to_dense_entries();
    let tnorm = dense.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-300);
    let mut res = residual_norm(t, factors);
    let mut mu = 1e-3;
    for _ in 0..LM_MAX_ITER {
        if res <= 1e-15 * tnorm {
            break;
        }
        let c = DMatrix::from_fn(p, p, |k, l| factors[k].dot(&factors[l]));
        let mut jtj = DMatrix::zeros(n * p, n * p);
        let mut jtr = DVector::zeros(n * p);
        for k in 0..p {
            let tk = apply2(n, &dense, &factors[k]);
            let mut gk = -tk;
            for l in 0..p {
                gk.axpy(c[(k, l)] * c[(k, l)], &factors[l], 1.0);
                let mut block = DMatrix::identity(n, n) * (3.0 * c[(k, l)] * c[(k, l)]);
                block.ger(6.0 * c[(k, l)], &factors[l], &factors[k], 1.0);
                jtj.view_mut((k * n, l * n), (n, n)).copy_from(&block);
            }
            jtr.rows_mut(k * n, n).copy_from(&(gk * 3.0));
        }
        let jtj = linalg::symmetrize(&jtj);
        let dscale = jtj.diagonal().amax().max(1e-300);
        let mut improved = false;
        for _ in 0..20 {
            let mut a = jtj.clone();
            for i in 0..n * p {
                a[(i, i)] += mu * dscale;
            }
            let Some(chol) = a.cholesky() else {
                mu *= 10.0;
                continue;
            };
            let delta = chol.solve(&(-&jtr));
            let trial: Vec<DVector<f64>> =
                (0..p).map(|k| &factors[k] + delta.rows(k * n, n)).collect();
            let r = residual_norm(t, &trial);
            if r < res {
                factors.clone_from_slice(&trial);
                let gain = res - r;
                res = r;
                mu = (mu / 3.0).max(1e-15);
                improved = gain > 1e-15 * tnorm;
                break;
            }
            mu *= 10.0;
        }
        if !improved {
            break;
        }
    }
}

/// Rank-`P` symmetric approximation of `T`.
///
/// Greedy power-method deflation provides the starting factors, which are
/// then refined jointly. The result never fits worse than the zero tensor.
pub fn rank_approx<R: Rng>(t: &SymTensor3, p: usize, rng: &mut R) -> Result<Vec<DVector<f64>>> {
    let n = t.dim();
    if p == 0 || p > n {
        return Err(Error::InvalidArgument(format!("rank {p} outside 1..={n}")));
    }
    if let SymTensor3::LowRank { factors, .. } = t {
        if factors.len() == p {
            return Ok(factors.clone());
        }
    }
    let tnorm = t.frobenius_norm();
    if tnorm == 0.0 {
        return Ok(vec![DVector::zeros(n); p]);
    }
    let mut e = t.to_dense_entries();
    let mut factors = Vec::with_capacity(p);
    for _ in 0..p {
        let a = best_rank_one(n, &e, rng)
            .ok_or_else(|| Error::RankApprox("power iteration failed".into()))?;
        subtract_cube(n, &mut e, &a);
        factors.push(a);
    }
    refine(t, &mut factors);
    if factors.iter().any(|a| a.iter().any(|x| !x.is_finite())) {
        return Err(Error::RankApprox("non-finite factor".into()));
    }
    if residual_norm(t, &factors) > tnorm {
        return Err(Error::RankApprox("approximation worse than zero".into()));
    }
    Ok(factors)
}
