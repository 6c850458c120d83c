//! Cholesky-based Newton root finder for the secular system
//!
//! `(H + ½Γ + λW)s = −g`, `λ = σ‖s‖_W²`, `Γ = T[s]`.
//!
//! The inner loop runs Newton on `φ(λ) = ‖s(λ)‖_W⁻¹ − (σ/λ)^{1/q}` for a frozen `Γ`;
//! the outer loop refreshes `Γ`. The same kernel with `q = 1` solves the cubic
//! regularization subproblem of the ARC baseline.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric::{generalized_eig, Metric};
use crate::model::GRADIENT_FLOOR_FACTOR;
use crate::tensor::SymTensor3;

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SecularConfig {
    /// Inner Newton tolerance on `|φ|·‖s‖_W`.
    pub eps_l: f64,
    /// Outer residual tolerance.
    pub eps_kappa: f64,
    pub l_max: usize,
    pub kappa_max: usize,
    /// Relative margin added above the smallest admissible `λ`.
    pub lambda_offset: f64,
}

impl Default for SecularConfig {
    fn default() -> Self {
        SecularConfig {
            eps_l: 1e-7,
            eps_kappa: 1e-8,
            l_max: 100,
            kappa_max: 50,
            lambda_offset: 1e-8,
        }
    }
}

impl SecularConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps_l > self.eps_kappa && self.eps_kappa > 0.0) {
            return Err(Error::InvalidArgument("need eps_l > eps_kappa > 0".into()));
        }
        if self.l_max == 0 || self.kappa_max == 0 || !(self.lambda_offset > 0.0) {
            return Err(Error::InvalidArgument(
                "caps and offset must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SafeguardReason {
    CholeskyFailure,
    InnerCap,
    OuterCap,
    DegenerateG,
    HardCase,
    /// The stationary point found is not a local minimizer.
    NotSecondOrder,
    NonFinite,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "status", content = "reason")]
pub enum SecularStatus {
    Converged,
    SafeguardNeeded(SafeguardReason),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SecularCounters {
    pub cholesky_count: usize,
    pub newton_steps: usize,
    pub outer_loops: usize,
    pub eig_count: usize,
}

impl std::ops::AddAssign for SecularCounters {
    fn add_assign(&mut self, o: Self) {
        self.cholesky_count += o.cholesky_count;
        self.newton_steps += o.newton_steps;
        self.outer_loops += o.outer_loops;
        self.eig_count += o.eig_count;
    }
}

#[derive(Clone, Debug)]
pub struct SecularResult {
    pub s: DVector<f64>,
    pub lambda: f64,
    pub status: SecularStatus,
    pub counters: SecularCounters,
}

impl SecularResult {
    pub fn converged(&self) -> bool {
        self.status == SecularStatus::Converged
    }
}

/// Exponent linking `λ` to the step length: `λ = σ‖s‖_W^q`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Power {
    Cubic,
    Quartic,
}

impl Power {
    /// `(σ/λ)^{1/q}`
    fn k_inv(self, sigma: f64, lambda: f64) -> f64 {
        match self {
            Power::Cubic => sigma / lambda,
            Power::Quartic => (sigma / lambda).sqrt(),
        }
    }

    /// `−d/dλ (σ/λ)^{1/q}`
    fn k_inv_slope(self, sigma: f64, lambda: f64) -> f64 {
        match self {
            Power::Cubic => sigma / (lambda * lambda),
            Power::Quartic => 0.5 * sigma.sqrt() * lambda.powf(-1.5),
        }
    }
}

/// One Newton correction of the inner iteration.
#[derive(Clone, Debug)]
pub struct NewtonStep {
    pub delta_lambda: f64,
    pub s: DVector<f64>,
    /// `L⁻¹Ws` with `LLᵀ = H_eff + λW`.
    pub omega: DVector<f64>,
    /// `φ(λ)`
    pub phi: f64,
}

fn factor(a: &DMatrix<f64>, w: &Metric, lambda: f64) -> Option<Cholesky<f64, Dyn>> {
    let m = w.add_scaled_to(a, lambda);
    Cholesky::new(m)
}

fn step_from_factor(
    chol: &Cholesky<f64, Dyn>,
    g: &DVector<f64>,
    w: &Metric,
    sigma: f64,
    lambda: f64,
    power: Power,
) -> NewtonStep {
    let s = -chol.solve(g);
    let ws = w.apply(&s);
    let ns = s.dot(&ws).max(0.0).sqrt();
    let omega = chol
        .l_dirty()
        .solve_lower_triangular(&ws)
        .unwrap_or_else(|| DVector::from_element(s.len(), f64::NAN));
    let phi = 1.0 / ns - power.k_inv(sigma, lambda);
    let slope = omega.norm_squared() / (ns * ns * ns) + power.k_inv_slope(sigma, lambda);
    NewtonStep {
        delta_lambda: -phi / slope,
        s,
        omega,
        phi,
    }
}

/// Newton correction `Δλ = −φ(λ)/φ'(λ)` for the quartic secular equation.
pub fn newton_update(
    h_eff: &DMatrix<f64>,
    g: &DVector<f64>,
    w: &Metric,
    sigma: f64,
    lambda: f64,
) -> Result<NewtonStep> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidArgument("lambda must be positive".into()));
    }
    if g.iter().all(|x| *x == 0.0) {
        return Err(Error::InvalidArgument("g must be nonzero".into()));
    }
    let chol = factor(h_eff, w, lambda).ok_or(Error::NotPositiveDefinite)?;
    Ok(step_from_factor(&chol, g, w, sigma, lambda, Power::Quartic))
}

/// Smallest `λ ≥ 0` with `A + λW ⪰ 0`, and whether `g` is (numerically)
/// orthogonal to the leading generalized eigenvector.
pub(crate) fn psd_shift(a: &DMatrix<f64>, g: &DVector<f64>, w: &Metric) -> Result<(f64, bool)> {
    let e = generalized_eig(a, w)?;
    let shift = (-e.min_value()).max(0.0);
    let hard = shift > 0.0 && e.vectors.column(0).dot(g).abs() < 1e-10 * g.norm();
    Ok((shift, hard))
}

/// Inner Newton state shared by the quartic and cubic secular solvers.
pub(crate) struct Kernel<'a> {
    pub a: &'a DMatrix<f64>,
    pub g: &'a DVector<f64>,
    pub w: &'a Metric,
    pub sigma: f64,
    pub power: Power,
    pub cfg: &'a SecularConfig,
}

impl Kernel<'_> {
    fn offset(&self, floor: f64) -> f64 {
        self.cfg.lambda_offset * floor.max(1.0)
    }

    /// Runs Newton from `lambda` until `|φ|·‖s‖_W < eps_l`, taking at least
    /// `min_steps` corrections. `floor` caches the PSD shift once known.
    pub fn run(
        &self,
        mut lambda: f64,
        floor: &mut Option<f64>,
        min_steps: usize,
        counters: &mut SecularCounters,
    ) -> std::result::Result<(DVector<f64>, f64), SafeguardReason> {
        let mut steps = 0usize;
        let mut failures = 0u32;
        loop {
            let chol = factor(self.a, self.w, lambda);
            counters.cholesky_count += 1;
            let chol = match chol {
                Some(c) => c,
                None => {
                    let f = match *floor {
                        Some(f) => f,
                        None => {
                            counters.eig_count += 1;
                            let (f, hard) = psd_shift(self.a, self.g, self.w)
                                .map_err(|_| SafeguardReason::CholeskyFailure)?;
                            if hard {
                                return Err(SafeguardReason::HardCase);
                            }
                            *floor = Some(f);
                            f
                        }
                    };
                    if failures >= 4 {
                        return Err(SafeguardReason::CholeskyFailure);
                    }
                    lambda = lambda.max(f) + self.offset(f) * 10f64.powi(failures as i32);
                    failures += 1;
                    continue;
                }
            };
            let step = step_from_factor(&chol, self.g, self.w, self.sigma, lambda, self.power);
            let ns = self.w.norm(&step.s);
            if !(step.delta_lambda.is_finite() && ns.is_finite()) {
                return Err(SafeguardReason::NonFinite);
            }
            if steps >= min_steps && (step.phi * ns).abs() < self.cfg.eps_l {
                return Ok((step.s, lambda));
            }
            if steps >= self.cfg.l_max {
                return Err(SafeguardReason::InnerCap);
            }
            let lo = floor.unwrap_or(0.0).max(0.0);
            let next = (lambda + step.delta_lambda).max(lo + 0.5 * (lambda - lo));
            steps += 1;
            counters.newton_steps += 1;
            if next == lambda && steps > min_steps {
                return Ok((step.s, lambda));
            }
            lambda = next;
        }
    }

    /// Initial `λ`: the root of the secular equation written in the
    /// eigenbasis of the pencil `(A, W)`, kept above the PSD shift.
    pub fn initial_lambda(
        &self,
        counters: &mut SecularCounters,
    ) -> std::result::Result<(f64, f64), SafeguardReason> {
        counters.eig_count += 1;
        let e = generalized_eig(self.a, self.w).map_err(|_| SafeguardReason::CholeskyFailure)?;
        let f = (-e.min_value()).max(0.0);
        let ghat = e.vectors.tr_mul(self.g);
        if f > 0.0 && ghat[0].abs() < 1e-10 * self.g.norm() {
            return Err(SafeguardReason::HardCase);
        }
        let lo = f + self.offset(f);
        let root = spectral_root(&e.values, &ghat, self.sigma, self.power, lo);
        Ok((root.max(lo), f))
    }
}

/// Root of `φ(λ) = (Σ ĝ_j²/(d_j+λ)²)^{-1/2} − (σ/λ)^{1/q}` on `λ ≥ lo`,
/// by Newton safeguarded with bisection.
fn spectral_root(d: &DVector<f64>, ghat: &DVector<f64>, sigma: f64, power: Power, lo: f64) -> f64 {
    let eval = |lam: f64| {
        let (mut n2, mut w2) = (0.0, 0.0);
        for (dj, gj) in d.iter().zip(ghat.iter()) {
            let r = 1.0 / (dj + lam);
            let t = gj * gj * r * r;
            n2 += t;
            w2 += t * r;
        }
        let ns = n2.sqrt();
        let phi = 1.0 / ns - power.k_inv(sigma, lam);
        let slope = w2 / (ns * ns * ns) + power.k_inv_slope(sigma, lam);
        (phi, slope)
    };
    let mut a = lo;
    if eval(a).0 >= 0.0 {
        return a;
    }
    let mut b = (2.0 * a).max(1.0);
    let mut grow = 0;
    while eval(b).0 < 0.0 {
        a = b;
        b *= 4.0;
        grow += 1;
        if grow > 200 {
            return a;
        }
    }
    let mut x = 0.5 * (a + b);
    for _ in 0..200 {
        let (phi, slope) = eval(x);
        if phi == 0.0 {
            return x;
        }
        if phi < 0.0 {
            a = x;
        } else {
            b = x;
        }
        let newton = x - phi / slope;
        let next = if newton > a && newton < b && newton.is_finite() {
            newton
        } else {
            0.5 * (a + b)
        };
        if (next - x).abs() <= 1e-15 * x.abs().max(1e-300) || b - a <= 1e-15 * b {
            return next;
        }
        x = next;
    }
    x
}

fn safeguard(
    s: DVector<f64>,
    lambda: f64,
    reason: SafeguardReason,
    counters: SecularCounters,
) -> SecularResult {
    log::debug!("secular safeguard: {reason:?}");
    SecularResult {
        s,
        lambda,
        status: SecularStatus::SafeguardNeeded(reason),
        counters,
    }
}

/// `ε_κ`, raised to the rounding floor of a residual whose terms sum to `scale` in norm.
pub fn residual_tolerance(eps_kappa: f64, scale: f64) -> f64 {
    eps_kappa.max(GRADIENT_FLOOR_FACTOR * f64::EPSILON * scale)
}

/// Solves the secular system for `min gᵀs + ½H[s]² + ⅙T[s]³ + (σ/4)‖s‖_W⁴`.
///
/// Never fails: problems are reported through [`SecularStatus::SafeguardNeeded`].
pub fn solve(
    h: &DMatrix<f64>,
    g: &DVector<f64>,
    t: &SymTensor3,
    sigma: f64,
    w: &Metric,
    cfg: &SecularConfig,
) -> SecularResult {
    let n = g.len();
    let mut counters = SecularCounters::default();
    let zero = DVector::zeros(n);

    let kernel = Kernel {
        a: h,
        g,
        w,
        sigma,
        power: Power::Quartic,
        cfg,
    };
    let gnorm = g.norm();
    if gnorm <= 1e2 * cfg.eps_kappa {
        counters.eig_count += 1;
        let indefinite = match crate::metric::pencil_min_eigenvalue(h, w) {
            Ok(l) => l < 0.0,
            Err(_) => true,
        };
        if indefinite {
            return safeguard(zero, 0.0, SafeguardReason::DegenerateG, counters);
        }
        if gnorm == 0.0 {
            return SecularResult {
                s: zero,
                lambda: 0.0,
                status: SecularStatus::Converged,
                counters,
            };
        }
    }

    let (mut lambda, f0) = match kernel.initial_lambda(&mut counters) {
        Ok(x) => x,
        Err(r) => return safeguard(zero, 0.0, r, counters),
    };
    let mut floor = Some(f0);
    let mut a = h.clone();
    let mut s = zero;

    for _ in 0..cfg.kappa_max {
        let kernel = Kernel { a: &a, ..kernel };
        let (s_new, lambda_new) = match kernel.run(lambda, &mut floor, 1, &mut counters) {
            Ok(x) => x,
            Err(r) => return safeguard(s, lambda, r, counters),
        };
        counters.outer_loops += 1;
        s = s_new;
        lambda = lambda_new;

        let gamma = t.contract1(&s);
        let ws = w.apply(&s);
        let ns2 = s.dot(&ws);
        let hs = h * &s;
        let gs = &gamma * &s * 0.5;
        let tol = residual_tolerance(
            cfg.eps_kappa,
            g.norm() + hs.norm() + gs.norm() + lambda * ws.norm(),
        );
        let base = hs + gs + g;
        let res_lambda = (&base + &ws * lambda).norm();
        let res_true = (&base + &ws * (sigma * ns2)).norm();
        let consistent = (lambda - sigma * ns2).abs() <= 1e-6 * lambda.max(1.0);
        if res_lambda <= tol && res_true <= tol && consistent {
            if !t.is_zero() && !second_order_ok(h, &gamma, sigma, w, &s, ns2, &mut counters) {
                return safeguard(s, lambda, SafeguardReason::NotSecondOrder, counters);
            }
            return SecularResult {
                s,
                lambda,
                status: SecularStatus::Converged,
                counters,
            };
        }
        a = h + gamma * 0.5;
        // the old shift is no longer a valid lower bound once Γ changes
        floor = if t.is_zero() { floor } else { None };
    }
    safeguard(s, lambda, SafeguardReason::OuterCap, counters)
}

/// `H + T[s] + σ(‖s‖²W + 2WssᵀW) ⪰ 0`, tested by Cholesky with a tiny relative shift.
fn second_order_ok(
    h: &DMatrix<f64>,
    gamma: &DMatrix<f64>,
    sigma: f64,
    w: &Metric,
    s: &DVector<f64>,
    ns2: f64,
    counters: &mut SecularCounters,
) -> bool {
    let mut m = h + gamma;
    w.add_scaled_into(&mut m, sigma * ns2);
    let ws = w.apply(s);
    m.ger(2.0 * sigma, &ws, &ws, 1.0);
    let scale = 1.0 + m.amax();
    for i in 0..m.nrows() {
        m[(i, i)] += 1e-10 * scale;
    }
    counters.cholesky_count += 1;
    Cholesky::new(m).is_some()
}

/// Cubic subproblem `min gᵀs + ½H[s]² + (σ/3)‖s‖³` (Euclidean norm).
///
/// Returns the global minimizer in the easy case; `Err` signals the hard case or a numerical failure.
pub(crate) fn solve_cubic(
    h: &DMatrix<f64>,
    g: &DVector<f64>,
    sigma: f64,
    cfg: &SecularConfig,
    counters: &mut SecularCounters,
) -> std::result::Result<(DVector<f64>, f64), SafeguardReason> {
    let w = Metric::identity(g.len());
    let kernel = Kernel {
        a: h,
        g,
        w: &w,
        sigma,
        power: Power::Cubic,
        cfg,
    };
    let (lambda, f) = kernel.initial_lambda(counters)?;
    let mut floor = Some(f);
    kernel.run(lambda, &mut floor, 1, counters)
}
