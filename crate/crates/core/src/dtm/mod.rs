//! The diagonal tensor method.
//!
//! Each iteration replaces the cubic term of `m₃` recentered at the iterate by a
//! diagonal one (possibly after a change of basis), minimizes the resulting
//! model with the secular solver and adapts the extra regularization `d`.

mod build;
pub mod rank;

pub use build::{build_model, diagonal_model, orth_complement, Basis, BuiltModel, Iterate};
pub use rank::{rank_approx, residual_norm};

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::arc::{arc_minimize, ArcConfig, ArcStatus};
use crate::model::QuarticModel;
use crate::secular::{self, SecularConfig, SecularStatus};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Ratio test with very successful / successful / unsuccessful classes.
    Practical,
    /// Acceptance additionally gated on the normalized cubic term `β`.
    Variant1,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Rule {
    Diagonal,
    /// Rank-`rank` approximation followed by a change of basis. Exact
    /// factors of the original tensor, if known, are used at the origin.
    LowRank {
        rank: usize,
        factors: Option<Vec<DVector<f64>>>,
    },
}

#[derive(Clone, Debug)]
pub struct DtmConfig {
    pub eta: f64,
    pub eta1: f64,
    pub gamma2: f64,
    pub gamma: f64,
    pub alpha: f64,
    /// Clip level for diagonal tensor entries.
    pub cap_b: f64,
    /// First-order tolerance.
    pub eps: f64,
    pub d0: f64,
    pub mode: Mode,
    pub rule: Rule,
    pub max_outer: usize,
    pub secular: SecularConfig,
    pub arc: ArcConfig,
    /// Seed for the random restarts of the rank approximation.
    pub seed: u64,
}

impl Default for DtmConfig {
    fn default() -> Self {
        DtmConfig {
            eta: 0.3,
            eta1: 3.0,
            gamma2: 0.5,
            gamma: 2.0,
            alpha: 0.1,
            cap_b: 1e6,
            eps: 1e-5,
            d0: 0.0,
            mode: Mode::Practical,
            rule: Rule::Diagonal,
            max_outer: 200,
            secular: SecularConfig::default(),
            arc: ArcConfig::default(),
            seed: 0,
        }
    }
}

impl DtmConfig {
    pub fn validate(&self) -> crate::Result<()> {
        use crate::Error::InvalidArgument;
        if !(self.eta1 > self.eta && self.eta > 0.0) {
            return Err(InvalidArgument("need eta1 > eta > 0".into()));
        }
        if !(self.gamma > 1.0 && 1.0 > self.gamma2 && self.gamma2 > 0.0) {
            return Err(InvalidArgument("need gamma > 1 > gamma2 > 0".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 0.5) {
            return Err(InvalidArgument("alpha must lie in (0, 1/2)".into()));
        }
        if !(self.cap_b > 0.0 && self.eps > 0.0 && self.d0 >= 0.0) {
            return Err(InvalidArgument(
                "cap_b, eps must be positive and d0 nonnegative".into(),
            ));
        }
        if let Rule::LowRank { rank, factors } = &self.rule {
            if *rank == 0 || factors.as_ref().is_some_and(|f| f.len() != *rank) {
                return Err(InvalidArgument(
                    "low-rank rule needs rank ≥ 1 matching the factors".into(),
                ));
            }
        }
        self.secular.validate()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepTag {
    VerySuccessful,
    Successful,
    Unsuccessful,
}

/// How the step of one iteration was computed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepSource {
    Secular,
    /// ARC on `M_d` after the secular solver asked for a safeguard.
    ArcModel,
    /// ARC on `m₃` itself.
    ArcObjective,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IterRecord {
    pub d: f64,
    pub sigma_d: f64,
    pub rho: f64,
    pub beta: f64,
    pub step_norm_w: f64,
    pub tag: StepTag,
    /// `m₃(s_i) − m₃(s_{i+1})`, zero on rejected steps.
    pub decrease: f64,
    pub predicted: f64,
    pub source: StepSource,
    pub terminal: bool,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct DtmTrace {
    pub iterations: Vec<IterRecord>,
    pub successful_iters: usize,
    pub total_iters: usize,
    pub function_evals: usize,
    pub derivative_evals: usize,
    pub cholesky_count: usize,
    /// Iterations whose step did not come from a converged secular solve.
    pub safeguards: usize,
    /// Scalar multiplications spent on contractions with the model tensor.
    pub model_tensor_mults: usize,
    /// Low-rank rule iterations that fell back to the diagonal rule.
    pub rule_fallbacks: usize,
    /// Successful non-terminal variant-1 steps below the guaranteed decrease.
    pub decrease_violations: usize,
    /// Every converged secular solve met its residual and consistency contract.
    pub secular_contract_ok: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DtmStatus {
    Converged,
    MaxIterations,
}

#[derive(Clone, Debug)]
pub struct DtmResult {
    pub s: DVector<f64>,
    pub value: f64,
    pub grad_norm: f64,
    pub status: DtmStatus,
    pub trace: DtmTrace,
}

struct Step {
    work: DVector<f64>,
    source: StepSource,
}

fn secular_contract(md: &QuarticModel, r: &secular::SecularResult, eps_kappa: f64) -> bool {
    let s = &r.s;
    let ws = md.w.apply(s);
    let ns2 = s.dot(&ws);
    let hs = &md.h * s;
    let ts = md.t.contract2(s) * 0.5;
    let tol = secular::residual_tolerance(
        eps_kappa,
        md.g.norm() + hs.norm() + ts.norm() + r.lambda * ws.norm(),
    );
    let res = (hs + ts + &ws * r.lambda + &md.g).norm();
    (r.lambda - md.sigma * ns2).abs() <= 1e-6 * r.lambda.max(1.0) && res <= tol
}

/// Minimizes `m` to first-order tolerance `cfg.eps`, or until the gradient
/// falls below its rounding floor [`QuarticModel::gradient_floor`].
pub fn minimize(m: &QuarticModel, cfg: &DtmConfig) -> DtmResult {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut trace = DtmTrace {
        secular_contract_ok: true,
        ..DtmTrace::default()
    };
    let mut it = Iterate::at_origin(m);
    let mut d = cfg.d0;
    let arc_cfg = ArcConfig {
        tol: (1e-2 * cfg.eps).max(cfg.secular.eps_kappa),
        ..cfg.arc
    };

    let mut gnorm = it.g.norm();
    let mut status = DtmStatus::MaxIterations;
    for _ in 0..cfg.max_outer {
        if gnorm <= cfg.eps || gnorm <= m.gradient_floor(&it.s) {
            status = DtmStatus::Converged;
            break;
        }
        trace.total_iters += 1;
        let built = match build_model(m, &it, d, cfg, &mut rng) {
            Ok(b) => b,
            Err(e) => {
                log::error!("model construction failed: {e}");
                break;
            }
        };
        if built.fell_back {
            trace.rule_fallbacks += 1;
        }
        let md = built.model();

        let sec = secular::solve(&md.h, &md.g, &md.t, md.sigma, &md.w, &cfg.secular);
        trace.cholesky_count += sec.counters.cholesky_count;
        trace.model_tensor_mults += md.dim()
            + sec.counters.outer_loops * (md.t.contraction_cost(1) + md.t.contraction_cost(2));
        let step = if sec.status == SecularStatus::Converged {
            if !secular_contract(&md, &sec, cfg.secular.eps_kappa) {
                trace.secular_contract_ok = false;
            }
            Step {
                work: sec.s,
                source: StepSource::Secular,
            }
        } else {
            trace.safeguards += 1;
            let warm = if sec.s.iter().all(|x| x.is_finite()) && md.value(&sec.s) <= md.f0 {
                sec.s.clone()
            } else {
                DVector::zeros(md.dim())
            };
            let (x, tr) = arc_minimize(&md, &warm, &arc_cfg);
            trace.cholesky_count += tr.cholesky_count;
            if tr.status == ArcStatus::Converged {
                Step {
                    work: x,
                    source: StepSource::ArcModel,
                }
            } else {
                Step {
                    work: DVector::zeros(0),
                    source: StepSource::ArcObjective,
                }
            }
        };

        if step.source == StepSource::ArcObjective {
            let (x, tr) = arc_minimize(m, &it.s, &arc_cfg);
            trace.cholesky_count += tr.cholesky_count;
            trace.function_evals += tr.function_evals;
            trace.derivative_evals += tr.derivative_evals;
            let decrease = it.f - tr.final_value;
            let ok = decrease >= 0.0;
            trace.iterations.push(IterRecord {
                d,
                sigma_d: built.sigma_d,
                rho: f64::NAN,
                beta: f64::NAN,
                step_norm_w: m.w.norm(&(&x - &it.s)),
                tag: if ok {
                    StepTag::Successful
                } else {
                    StepTag::Unsuccessful
                },
                decrease: if ok { decrease } else { 0.0 },
                predicted: f64::NAN,
                source: StepSource::ArcObjective,
                terminal: tr.status == ArcStatus::Converged,
            });
            if ok {
                trace.successful_iters += 1;
                let ev = m.evaluate(&x, 2).expect("dimension");
                it = Iterate {
                    s: x,
                    f: ev.value,
                    g: ev.gradient.unwrap(),
                    h: ev.hessian.unwrap(),
                };
                gnorm = it.g.norm();
            } else {
                d = cfg.gamma * d.max(1.0);
            }
            continue;
        }

        let s_d = built.to_original(&step.work);
        let predicted = it.f - md.value(&step.work);
        let trial = &it.s + &s_d;
        let f_trial = m.value(&trial);
        trace.function_evals += 1;
        let g_trial = m.gradient(&trial);
        trace.derivative_evals += 1;
        let actual = it.f - f_trial;
        let scale = 1.0 + it.f.abs() + f_trial.abs();
        let tiny = 1e-14 * scale;
        let rho = if predicted > tiny {
            actual / predicted
        } else if actual.abs() <= tiny && predicted.abs() <= tiny {
            1.0
        } else {
            f64::NEG_INFINITY
        };
        let beta = built.beta(&step.work);
        let step_norm = m.w.norm(&s_d);
        let g_trial_norm = g_trial.norm();
        let terminal = (g_trial_norm <= cfg.eps || g_trial_norm <= m.gradient_floor(&trial))
            && actual >= -tiny;

        let accepted = match cfg.mode {
            Mode::Practical => rho >= cfg.eta,
            Mode::Variant1 => {
                let sd = built.sigma_d;
                let a = cfg.alpha;
                let c = (-beta + a) / step_norm;
                rho >= cfg.eta
                    && (beta >= a
                        || (beta <= -4.0 * a && !(sd >= c / 6.0 && sd <= 2.0 * c / 3.0))
                        || ((-4.0 * a..=a).contains(&beta) && sd >= 2.0 * c / 3.0))
            }
        } || terminal;
        let tag = if !accepted {
            StepTag::Unsuccessful
        } else if cfg.mode == Mode::Practical && rho >= cfg.eta1 {
            StepTag::VerySuccessful
        } else {
            StepTag::Successful
        };

        if accepted && !terminal && cfg.mode == Mode::Variant1 {
            let bound = cfg.alpha * cfg.eta / 24.0 * step_norm.powi(3);
            if actual < bound - 1e-10 * scale {
                trace.decrease_violations += 1;
            }
        }

        trace.iterations.push(IterRecord {
            d,
            sigma_d: built.sigma_d,
            rho,
            beta,
            step_norm_w: step_norm,
            tag,
            decrease: if accepted { actual } else { 0.0 },
            predicted,
            source: step.source,
            terminal,
        });

        if accepted {
            trace.successful_iters += 1;
            if terminal {
                it.s = trial;
                it.f = f_trial;
                it.g = g_trial;
                gnorm = g_trial_norm;
                status = DtmStatus::Converged;
                break;
            }
            let h_trial = m.hessian(&trial);
            it = Iterate {
                s: trial,
                f: f_trial,
                g: g_trial,
                h: h_trial,
            };
            gnorm = g_trial_norm;
            d = match (cfg.mode, tag) {
                (Mode::Practical, StepTag::Successful) => d,
                _ => cfg.gamma2 * d,
            };
        } else {
            d = cfg.gamma * d.max(1.0);
        }
    }
    if status == DtmStatus::MaxIterations && (gnorm <= cfg.eps || gnorm <= m.gradient_floor(&it.s))
    {
        status = DtmStatus::Converged;
    }
    DtmResult {
        value: it.f,
        s: it.s,
        grad_norm: gnorm,
        status,
        trace,
    }
}
