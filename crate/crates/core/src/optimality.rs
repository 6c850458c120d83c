//! Local and global optimality certificates and the σ thresholds that close the gap between them.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::linalg;
use crate::model::{QuarticModel, SqrModel};

/// Pass/fail state of each certificate at a given tolerance.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Flags {
    pub first_order: bool,
    pub local2: bool,
    pub necessary: bool,
    pub sufficient: bool,
}

/// Combined reading of the flags.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    NotStationary,
    /// Stationary but fails the necessary global condition.
    NotGlobal,
    /// Passes the necessary but not the sufficient condition.
    Undetermined,
    GlobalMinimizer,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OptimalityReport {
    /// `‖∇m(s)‖`
    pub first_order_residual: f64,
    /// `λ_min(∇²m(s))`
    pub local2_min_eig: f64,
    /// `λ_min(H + ⅔T[s] + σ‖s‖_W²W + (Λ_W/3)‖s‖_W W)`
    pub necessary_min_eig: f64,
    /// `λ_min(H + ⅔T[s] + σ‖s‖_W²W − (Λ_W/3)‖s‖_W W − Λ_W²/(18σ) W)`
    pub sufficient_min_eig: f64,
    pub lambda_w_used: f64,
    pub tol: f64,
    /// Margins are compared against `−tol·scale` with `scale = 1 + ‖H‖_F`.
    pub scale: f64,
    pub flags: Flags,
    pub verdict: Verdict,
}

fn verdict(flags: &Flags) -> Verdict {
    if !flags.first_order {
        Verdict::NotStationary
    } else if flags.sufficient {
        Verdict::GlobalMinimizer
    } else if flags.necessary {
        Verdict::Undetermined
    } else {
        Verdict::NotGlobal
    }
}

/// `(B(s), G(s))`.
pub fn operators(m: &QuarticModel, s: &DVector<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    check_dim(m.dim(), s.len())?;
    let ts = m.t.contract1(s);
    let mut b = &m.h + &ts * 0.5;
    m.w.add_scaled_into(&mut b, m.sigma * m.w.norm_sq(s));
    let g = &b + ts * 0.5;
    Ok((b, g))
}

/// Evaluates all four certificates at `s` using the model's own `Λ_W` bound.
pub fn classify(m: &QuarticModel, s: &DVector<f64>, tol: f64) -> Result<OptimalityReport> {
    classify_with_lambda(m, s, tol, m.t.lambda_w(&m.w))
}

/// As [`classify`] with a caller-supplied upper bound on `Λ_W`.
pub fn classify_with_lambda(
    m: &QuarticModel,
    s: &DVector<f64>,
    tol: f64,
    lambda_w: f64,
) -> Result<OptimalityReport> {
    check_dim(m.dim(), s.len())?;
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument("tol must be positive".into()));
    }
    let ev = m.evaluate(s, 2)?;
    let grad = ev.gradient.unwrap();
    let hess = ev.hessian.unwrap();
    let ns = m.w.norm(s);

    let mut core = &m.h + m.t.contract1(s) * (2.0 / 3.0);
    m.w.add_scaled_into(&mut core, m.sigma * ns * ns);
    let shift = lambda_w * ns / 3.0;
    let necessary = m.w.add_scaled_to(&core, shift);
    let sufficient =
        m.w.add_scaled_to(&core, -shift - lambda_w * lambda_w / (18.0 * m.sigma));

    let scale = 1.0 + m.h.norm();
    let bar = -tol * scale;
    let first_order_residual = grad.norm();
    let local2_min_eig = linalg::min_eigenvalue(&hess);
    let necessary_min_eig = linalg::min_eigenvalue(&necessary);
    let sufficient_min_eig = linalg::min_eigenvalue(&sufficient);
    let flags = Flags {
        first_order: -first_order_residual >= bar,
        local2: local2_min_eig >= bar,
        necessary: necessary_min_eig >= bar,
        sufficient: sufficient_min_eig >= bar,
    };
    Ok(OptimalityReport {
        first_order_residual,
        local2_min_eig,
        necessary_min_eig,
        sufficient_min_eig,
        lambda_w_used: lambda_w,
        tol,
        scale,
        verdict: verdict(&flags),
        flags,
    })
}

/// Certificates for the separable model.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SqrReport {
    pub first_order_residual: f64,
    pub local2_min_eig: f64,
    /// `λ_min(Ĝ(s)) + 2‖H₀‖₁`
    pub necessary_min_eig: f64,
    /// `λ_min(Ĝ(s))`
    pub sufficient_min_eig: f64,
    /// Sum of absolute off-diagonal entries of `H`.
    pub offdiag_l1: f64,
    pub tol: f64,
    pub scale: f64,
    pub flags: Flags,
    pub verdict: Verdict,
}

pub fn classify_sqr(m: &SqrModel, s: &DVector<f64>, tol: f64) -> Result<SqrReport> {
    check_dim(m.dim(), s.len())?;
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument("tol must be positive".into()));
    }
    let h0 = linalg::offdiag_l1(&m.h);
    let sufficient_min_eig = linalg::min_eigenvalue(&m.g_hat(s));
    let necessary_min_eig = sufficient_min_eig + 2.0 * h0;
    let first_order_residual = m.gradient(s).norm();
    let local2_min_eig = linalg::min_eigenvalue(&m.hessian(s));
    let scale = 1.0 + m.h.norm();
    let bar = -tol * scale;
    let flags = Flags {
        first_order: -first_order_residual >= bar,
        local2: local2_min_eig >= bar,
        necessary: necessary_min_eig >= bar,
        sufficient: sufficient_min_eig >= bar,
    };
    Ok(SqrReport {
        first_order_residual,
        local2_min_eig,
        necessary_min_eig,
        sufficient_min_eig,
        offdiag_l1: h0,
        tol,
        scale,
        verdict: verdict(&flags),
        flags,
    })
}

/// Regularization levels above which the certificates simplify.
#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize)]
pub struct SigmaThresholds {
    /// Necessary and sufficient conditions coincide at `s` for σ at least this.
    pub equivalence_at_s: Option<f64>,
    /// `m` is convex on `‖s‖_W ≥ s₀` for σ above this.
    pub convexify_outside: Option<f64>,
    /// `m` is convex everywhere for σ above this when `H ≻ 0`.
    pub convexify_locally_convex: Option<f64>,
    /// σ making any nonzero global minimizer certifiable when `‖∇T₃‖ ≥ ε_T`.
    pub eps_t_bound: Option<f64>,
    /// SoS-convexity level `8Λ²/δ` (with `R = 1`).
    pub sos_bound: Option<f64>,
}

/// Parameters for [`sigma_thresholds`]; absent entries leave the matching field empty.
#[derive(Clone, Debug, Default)]
pub struct ThresholdInputs {
    pub s: Option<DVector<f64>>,
    pub s0: Option<f64>,
    pub eps_t: Option<f64>,
}

/// `3·max{−λ_min(H)‖s‖_W⁻²λ_min(W)⁻¹, (7/3)Λ_W‖s‖_W⁻¹}`.
pub fn equivalence_threshold(
    lambda_min_h: f64,
    s_norm_w: f64,
    lambda_min_w: f64,
    lambda_w: f64,
) -> Result<f64> {
    if !(s_norm_w > 0.0) {
        return Err(Error::InvalidArgument(
            "equivalence threshold needs s ≠ 0".into(),
        ));
    }
    Ok(3.0
        * f64::max(
            -lambda_min_h / (s_norm_w * s_norm_w * lambda_min_w),
            7.0 / 3.0 * lambda_w / s_norm_w,
        ))
}

/// `2·max{−λ_min(H)·max{s₀⁻², 1}, Λ_W·max{s₀⁻¹, 1}}`.
pub fn convexify_outside_threshold(lambda_min_h: f64, s0: f64, lambda_w: f64) -> Result<f64> {
    if !(s0 > 0.0) {
        return Err(Error::InvalidArgument("s0 must be positive".into()));
    }
    Ok(2.0
        * f64::max(
            -lambda_min_h * (s0 * s0).recip().max(1.0),
            lambda_w * s0.recip().max(1.0),
        ))
}

/// `¼Λ_W²/δ`.
pub fn locally_convex_threshold(delta: f64, lambda_w: f64) -> Result<f64> {
    if !(delta > 0.0) {
        return Err(Error::InvalidArgument("delta must be positive".into()));
    }
    Ok(0.25 * lambda_w * lambda_w / delta)
}

/// `8Λ₃²/δ`.
pub fn sos_threshold(delta: f64, lambda3: f64) -> Result<f64> {
    if !(delta > 0.0) {
        return Err(Error::InvalidArgument("delta must be positive".into()));
    }
    Ok(8.0 * lambda3 * lambda3 / delta)
}

/// `max{(3λ)³ε_T⁻², (7Λ_W)^{3/2}ε_T^{−1/2}}`.
pub fn eps_t_threshold(lambda: f64, lambda_w: f64, eps_t: f64) -> Result<f64> {
    if !(eps_t > 0.0 && eps_t < 1.0) {
        return Err(Error::InvalidArgument("eps_t must lie in (0, 1)".into()));
    }
    Ok(f64::max(
        (3.0 * lambda).powi(3) / (eps_t * eps_t),
        (7.0 * lambda_w).powf(1.5) / eps_t.sqrt(),
    ))
}

/// Evaluates every threshold whose inputs are available for `m`.
///
/// The locally convex and SoS levels are filled only when `λ_min(H) > 0`.
pub fn sigma_thresholds(m: &QuarticModel, inputs: &ThresholdInputs) -> Result<SigmaThresholds> {
    let lmin_h = linalg::min_eigenvalue(&m.h);
    let lw = m.t.lambda_w(&m.w);
    let lmin_w = m.w.lambda_min();
    let mut out = SigmaThresholds::default();
    if let Some(s) = &inputs.s {
        check_dim(m.dim(), s.len())?;
        out.equivalence_at_s = Some(equivalence_threshold(lmin_h, m.w.norm(s), lmin_w, lw)?);
    }
    if let Some(s0) = inputs.s0 {
        out.convexify_outside = Some(convexify_outside_threshold(lmin_h, s0, lw)?);
    }
    if lmin_h > 0.0 {
        out.convexify_locally_convex = Some(locally_convex_threshold(lmin_h, lw)?);
        out.sos_bound = Some(sos_threshold(lmin_h, m.t.frobenius_bound())?);
    }
    if let Some(eps_t) = inputs.eps_t {
        let lambda = (-lmin_h).max(0.0) / lmin_w;
        out.eps_t_bound = Some(eps_t_threshold(lambda, lw, eps_t)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::Metric;
    use crate::tensor::SymTensor3;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    fn univariate() -> QuarticModel {
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
    fn univariate_gap_example() {
        let r = classify(&univariate(), &v(&[1.0]), 1e-10).unwrap();
        assert!(r.flags.first_order && r.flags.local2 && r.flags.necessary);
        assert!(!r.flags.sufficient);
        assert_eq!(r.lambda_w_used, 6.0);
        assert!((r.necessary_min_eig - 1.0).abs() < 1e-14);
        assert!((r.sufficient_min_eig - (-3.0 - 36.0 / 54.0)).abs() < 1e-14);
        assert!((r.local2_min_eig - 3.0).abs() < 1e-14);
        assert_eq!(r.verdict, Verdict::Undetermined);
    }

    #[test]
    fn operators_without_tensor_coincide() {
        let m = QuarticModel::new(
            0.0,
            v(&[1.0, 0.0]),
            DMatrix::identity(2, 2),
            SymTensor3::zero(2),
            1.0,
            Metric::identity(2),
        )
        .unwrap();
        let (b, g) = operators(&m, &v(&[0.3, 0.2])).unwrap();
        assert_eq!(b, g);
    }

    #[test]
    fn operators_univariate() {
        let (b, g) = operators(&univariate(), &v(&[1.0])).unwrap();
        assert!(b[(0, 0)].abs() < 1e-15);
        assert!((g[(0, 0)] + 3.0).abs() < 1e-15);
    }

    #[test]
    fn quadratic_case_certifies_both() {
        // (1 + s²)s = 1 at the real root of s³ + s − 1
        let s = 0.682_327_803_828_019_3;
        let m = QuarticModel::new(
            0.0,
            v(&[-1.0]),
            DMatrix::identity(1, 1),
            SymTensor3::zero(1),
            1.0,
            Metric::identity(1),
        )
        .unwrap();
        let r = classify(&m, &v(&[s]), 1e-10).unwrap();
        assert_eq!(r.verdict, Verdict::GlobalMinimizer);
        assert!(r.flags.necessary);
    }

    #[test]
    fn threshold_examples() {
        assert_eq!(equivalence_threshold(0.0, 1.0, 1.0, 6.0).unwrap(), 42.0);
        assert_eq!(locally_convex_threshold(2.0, 6.0).unwrap(), 4.5);
        assert_eq!(sos_threshold(2.0, 6.0).unwrap(), 144.0);
        assert!((eps_t_threshold(1.0, 1.0, 0.01).unwrap() - 270_000.0).abs() < 1e-6);
        assert!(equivalence_threshold(0.0, 0.0, 1.0, 6.0).is_err());
        assert!(locally_convex_threshold(0.0, 1.0).is_err());
    }

    #[test]
    fn sqr_flags_coincide_for_diagonal_h() {
        let m = SqrModel::new(
            0.0,
            v(&[-1.0, 0.5]),
            DMatrix::from_diagonal(&v(&[-0.5, 1.0])),
            v(&[-6.0, 2.0]),
            v(&[3.0, 1.0]),
        )
        .unwrap();
        let r = classify_sqr(&m, &v(&[1.0, -0.3]), 1e-8).unwrap();
        assert_eq!(r.flags.necessary, r.flags.sufficient);
        assert_eq!(r.offdiag_l1, 0.0);
    }
}
