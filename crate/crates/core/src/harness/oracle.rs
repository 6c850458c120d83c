//! Brute-force global minimization for small dimensions.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::arc::{arc_minimize, ArcConfig};
use crate::error::{Error, Result};
use crate::linalg;
use crate::model::QuarticModel;

pub const MAX_ORACLE_DIM: usize = 3;
const STARTS: usize = 10;
const MAX_EXPANSIONS: usize = 30;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OracleResult {
    pub s_star: DVector<f64>,
    pub value: f64,
    pub method: String,
    pub radius: f64,
}

/// Radius beyond which `m(s) > m(0)` for every `s`.
///
/// Positive-root bound of `(σλ_min(W)²/4)r³ − (Λ/6)r² − (‖H‖/2)r − ‖g‖`.
pub fn coercivity_radius(m: &QuarticModel) -> f64 {
    let c4 = m.sigma * m.w.lambda_min().powi(2) / 4.0;
    let c3 = m.t.frobenius_norm() / 6.0;
    let c2 = linalg::max_eigenvalue(&m.h)
        .abs()
        .max(linalg::min_eigenvalue(&m.h).abs())
        / 2.0;
    let c1 = m.g.norm();
    2.0 * (c3 / c4).max((c2 / c4).sqrt()).max((c1 / c4).cbrt())
}

fn grid_points(n: usize, grid: usize, radius: f64) -> impl Iterator<Item = DVector<f64>> {
    let total = grid.pow(n as u32);
    let step = if grid > 1 {
        2.0 * radius / (grid - 1) as f64
    } else {
        0.0
    };
    (0..total).map(move |mut k| {
        let mut x = DVector::zeros(n);
        for i in 0..n {
            let c = k % grid;
            k /= grid;
            x[i] = if grid > 1 {
                -radius + step * c as f64
            } else {
                0.0
            };
        }
        x
    })
}

/// Global minimizer of `m` by grid search on `[−radius, radius]ⁿ` followed by
/// local refinement from the `refinements` best cells.
///
/// The box doubles while the best point lies near its boundary.
pub fn brute_force_min(
    m: &QuarticModel,
    radius: f64,
    grid: usize,
    refinements: usize,
) -> Result<OracleResult> {
    let n = m.dim();
    if n > MAX_ORACLE_DIM {
        return Err(Error::TooLarge(n));
    }
    if !(radius > 0.0) || grid < 2 {
        return Err(Error::InvalidArgument(
            "need radius > 0 and grid ≥ 2".into(),
        ));
    }
    let k = if refinements == 0 {
        STARTS
    } else {
        refinements
    };
    let cfg = ArcConfig {
        tol: 1e-12,
        max_iter: 1000,
        ..ArcConfig::default()
    };
    let mut r = radius;
    for _ in 0..MAX_EXPANSIONS {
        let mut cells: Vec<(f64, DVector<f64>)> =
            grid_points(n, grid, r).map(|x| (m.value(&x), x)).collect();
        cells.sort_by(|a, b| a.0.total_cmp(&b.0));
        cells.truncate(k);
        cells.push((m.f0, DVector::zeros(n)));

        let mut best = (m.f0, DVector::zeros(n));
        for (v0, x0) in cells {
            let (x, tr) = arc_minimize(m, &x0, &cfg);
            let (v, x) = if tr.final_value <= v0 {
                (tr.final_value, x)
            } else {
                (v0, x0)
            };
            if v < best.0 {
                best = (v, x);
            }
        }
        if best.1.amax() < 0.9 * r {
            let value = m.value(&best.1);
            return Ok(OracleResult {
                s_star: best.1,
                value,
                method: format!("grid{grid}^{n}+arc×{k}"),
                radius: r,
            });
        }
        r *= 2.0;
    }
    Err(Error::InvalidArgument(
        "oracle radius did not stabilize".into(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::Metric;
    use crate::tensor::SymTensor3;
    use nalgebra::DMatrix;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    #[test]
    fn univariate_cubic() {
        let m = QuarticModel::new(
            0.5,
            v(&[0.0]),
            DMatrix::zeros(1, 1),
            SymTensor3::diagonal(v(&[-6.0])),
            3.0,
            Metric::identity(1),
        )
        .unwrap();
        let r = brute_force_min(&m, 0.3, 101, 10).unwrap();
        assert!((r.s_star[0] - 1.0).abs() < 1e-8);
        assert!((r.value - 0.25).abs() < 1e-12);
        assert!(r.radius > 1.0);
    }

    #[test]
    fn quadratic_quartic() {
        let m = QuarticModel::new(
            0.0,
            v(&[-1.0]),
            DMatrix::identity(1, 1),
            SymTensor3::zero(1),
            1.0,
            Metric::identity(1),
        )
        .unwrap();
        let r = brute_force_min(&m, 2.0, 101, 10).unwrap();
        assert!((r.s_star[0] - 0.682_327_803_828_019_3).abs() < 1e-8);
    }

    #[test]
    fn convex_zero_gradient() {
        let m = QuarticModel::new(
            0.0,
            v(&[0.0, 0.0]),
            DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]),
            SymTensor3::zero(2),
            1.0,
            Metric::identity(2),
        )
        .unwrap();
        let r = brute_force_min(&m, 1.0, 41, 10).unwrap();
        assert!(r.s_star.norm() < 1e-10);
        assert_eq!(r.value, m.value(&r.s_star));
    }

    #[test]
    fn rejects_large_dimension() {
        let m = QuarticModel::new(
            0.0,
            DVector::zeros(4),
            DMatrix::zeros(4, 4),
            SymTensor3::zero(4),
            1.0,
            Metric::identity(4),
        )
        .unwrap();
        assert!(matches!(
            brute_force_min(&m, 1.0, 5, 1),
            Err(Error::TooLarge(4))
        ));
    }

    #[test]
    fn coercivity_radius_encloses_minimizer() {
        let m = QuarticModel::new(
            0.0,
            v(&[0.0]),
            DMatrix::zeros(1, 1),
            SymTensor3::diagonal(v(&[-6.0])),
            3.0,
            Metric::identity(1),
        )
        .unwrap();
        assert!(coercivity_radius(&m) >= 1.0);
    }
}
