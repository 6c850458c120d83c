//! Adaptive cubic regularization, used as a safeguard and as a baseline.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::linalg;
use crate::model::QuarticModel;
use crate::secular::{self, SecularConfig, SecularCounters};

/// A twice differentiable function.
pub trait Objective {
    fn dim(&self) -> usize;
    fn value(&self, x: &DVector<f64>) -> f64;
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64>;
    fn hessian(&self, x: &DVector<f64>) -> DMatrix<f64>;

    /// Gradient norm at `x` below which rounding dominates.
    fn gradient_floor(&self, _x: &DVector<f64>) -> f64 {
        0.0
    }
}

impl Objective for QuarticModel {
    fn dim(&self) -> usize {
        QuarticModel::dim(self)
    }

    fn value(&self, x: &DVector<f64>) -> f64 {
        QuarticModel::value(self, x)
    }

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        QuarticModel::gradient(self, x)
    }

    fn hessian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        QuarticModel::hessian(self, x)
    }

    fn gradient_floor(&self, x: &DVector<f64>) -> f64 {
        QuarticModel::gradient_floor(self, x)
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ArcConfig {
    pub sigma0: f64,
    pub increase: f64,
    pub decrease: f64,
    /// Acceptance threshold.
    pub eta1: f64,
    /// Very successful threshold.
    pub eta2: f64,
    pub sigma_min: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub secular: SecularConfig,
}

impl Default for ArcConfig {
    fn default() -> Self {
        ArcConfig {
            sigma0: 1.0,
            increase: 2.0,
            decrease: 0.5,
            eta1: 0.1,
            eta2: 0.9,
            sigma_min: 1e-8,
            tol: 1e-8,
            max_iter: 500,
            secular: SecularConfig::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArcStatus {
    Converged,
    MaxIterations,
    /// A non-finite value was produced.
    Failed,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ArcTrace {
    pub status: ArcStatus,
    pub iterations: usize,
    pub successful: usize,
    pub function_evals: usize,
    pub derivative_evals: usize,
    pub cholesky_count: usize,
    /// Subproblems solved by the eigenvector fallback instead of the secular kernel.
    pub fallback_steps: usize,
    pub final_sigma: f64,
    pub final_value: f64,
    pub grad_norm: f64,
}

/// Minimizer of `τ a + ½τ² b + (c/3)τ³` over `τ ≥ 0` with `a ≤ 0`, `c > 0`.
fn cubic_line_min(a: f64, b: f64, c: f64) -> f64 {
    let disc = (b * b - 4.0 * a * c).max(0.0);
    let tau = (-b + disc.sqrt()) / (2.0 * c);
    if tau.is_finite() {
        tau.max(0.0)
    } else {
        0.0
    }
}

fn cubic_model(g: &DVector<f64>, h: &DMatrix<f64>, sigma: f64, s: &DVector<f64>) -> f64 {
    g.dot(s) + 0.5 * s.dot(&(h * s)) + sigma / 3.0 * s.norm().powi(3)
}

/// Best of the Cauchy step and the leading negative curvature step.
fn fallback_step(g: &DVector<f64>, h: &DMatrix<f64>, sigma: f64) -> DVector<f64> {
    let mut best = DVector::zeros(g.len());
    let mut best_val = 0.0;
    let mut dirs = Vec::with_capacity(2);
    if g.norm() > 0.0 {
        dirs.push(-g / g.norm());
    }
    let (vals, vecs) = linalg::sorted_eigen(h);
    if !vals.is_empty() && vals[0] < 0.0 {
        let u: DVector<f64> = vecs.column(0).into_owned();
        dirs.push(if u.dot(g) > 0.0 { -u } else { u });
    }
    for d in dirs {
        let tau = cubic_line_min(g.dot(&d), d.dot(&(h * &d)), sigma * d.norm().powi(3));
        let s = d * tau;
        let val = cubic_model(g, h, sigma, &s);
        if val < best_val {
            best_val = val;
            best = s;
        }
    }
    best
}

/// Relative changes of `f` below this many roundoffs are treated as noise.
const VALUE_NOISE: f64 = 10.0;

fn stationary<O: Objective + ?Sized>(
    obj: &O,
    x: &DVector<f64>,
    g: &DVector<f64>,
    tol: f64,
) -> bool {
    let gn = g.norm();
    gn <= tol || gn <= obj.gradient_floor(x)
}

/// Minimizes `obj` from `x0` by adaptive cubic regularization.
///
/// Stops once `‖∇f‖ ≤ tol` or the gradient is below its rounding floor.
pub fn arc_minimize<O: Objective + ?Sized>(
    obj: &O,
    x0: &DVector<f64>,
    cfg: &ArcConfig,
) -> (DVector<f64>, ArcTrace) {
    let mut x = x0.clone();
    let mut sigma = cfg.sigma0;
    let mut f = obj.value(&x);
    let mut g = obj.gradient(&x);
    let mut h = obj.hessian(&x);
    let mut trace = ArcTrace {
        status: ArcStatus::MaxIterations,
        iterations: 0,
        successful: 0,
        function_evals: 1,
        derivative_evals: 1,
        cholesky_count: 0,
        fallback_steps: 0,
        final_sigma: sigma,
        final_value: f,
        grad_norm: g.norm(),
    };
    for _ in 0..cfg.max_iter {
        if !(f.is_finite() && g.iter().all(|v| v.is_finite())) {
            trace.status = ArcStatus::Failed;
            break;
        }
        if stationary(obj, &x, &g, cfg.tol) {
            trace.status = ArcStatus::Converged;
            break;
        }
        trace.iterations += 1;
        let mut counters = SecularCounters::default();
        let s = match secular::solve_cubic(&h, &g, sigma, &cfg.secular, &mut counters) {
            Ok((s, _)) => s,
            Err(_) => {
                trace.fallback_steps += 1;
                fallback_step(&g, &h, sigma)
            }
        };
        trace.cholesky_count += counters.cholesky_count;
        let pred = -cubic_model(&g, &h, sigma, &s);
        let xt = &x + &s;
        let ft = obj.value(&xt);
        trace.function_evals += 1;
        let rho = if pred > 0.0 {
            (f - ft) / pred
        } else {
            f64::NEG_INFINITY
        };
        // below the resolution of f, judge the step by the gradient instead
        let noise = VALUE_NOISE * f64::EPSILON * (1.0 + f.abs());
        let mut gt = None;
        let accept = if pred <= noise && (f - ft).abs() <= noise {
            let gn = obj.gradient(&xt);
            trace.derivative_evals += 1;
            let better = gn.norm() < g.norm();
            gt = Some(gn);
            better
        } else {
            rho >= cfg.eta1 && ft <= f
        };
        if accept {
            x = xt;
            f = ft;
            g = match gt {
                Some(gn) => gn,
                None => {
                    trace.derivative_evals += 1;
                    obj.gradient(&x)
                }
            };
            h = obj.hessian(&x);
            trace.successful += 1;
            if rho >= cfg.eta2 {
                sigma = (sigma * cfg.decrease).max(cfg.sigma_min);
            }
        } else {
            sigma *= cfg.increase;
        }
    }
    if trace.status == ArcStatus::MaxIterations && stationary(obj, &x, &g, cfg.tol) {
        trace.status = ArcStatus::Converged;
    }
    trace.final_sigma = sigma;
    trace.final_value = f;
    trace.grad_norm = g.norm();
    (x, trace)
}
