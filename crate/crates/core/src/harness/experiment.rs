//! Benchmark runs, parameter sweeps and cost comparisons.

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::arc::{arc_minimize, ArcConfig, ArcStatus};
use crate::dtm::{self, build_model, DtmConfig, DtmResult, DtmStatus, Iterate, Mode, Rule};
use crate::error::{Error, Result};
use crate::model::{QuarticModel, SqrModel};
use crate::optimality::classify;
use crate::secular::{self, SecularConfig};
use crate::tensor::SymTensor3;

use super::gen::{generate, GenSpec, SetKind};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    Dtm,
    Arc,
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SolverKind::Dtm => "dtm",
            SolverKind::Arc => "arc",
        })
    }
}

impl FromStr for SolverKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dtm" => Ok(SolverKind::Dtm),
            "arc" => Ok(SolverKind::Arc),
            _ => Err(Error::InvalidArgument(format!("unknown solver {s:?}"))),
        }
    }
}

/// How the DTM builds its model in a benchmark.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RuleChoice {
    Diagonal,
    /// `exact`: pass the generating factors of a low-rank tensor to the solver.
    LowRank {
        rank: usize,
        exact: bool,
    },
}

#[derive(Clone, Debug)]
pub struct TrialOptions {
    pub solver: SolverKind,
    pub mode: Mode,
    pub rule: RuleChoice,
    pub tol: f64,
}

impl Default for TrialOptions {
    fn default() -> Self {
        TrialOptions {
            solver: SolverKind::Dtm,
            mode: Mode::Practical,
            rule: RuleChoice::Diagonal,
            tol: 1e-5,
        }
    }
}

impl TrialOptions {
    pub fn dtm_config(&self, m: &QuarticModel, seed: u64) -> DtmConfig {
        let rule = match self.rule {
            RuleChoice::Diagonal => Rule::Diagonal,
            RuleChoice::LowRank { rank, exact } => {
                let factors = match (&m.t, exact) {
                    (SymTensor3::LowRank { factors, .. }, true) if factors.len() == rank => {
                        Some(factors.clone())
                    }
                    _ => None,
                };
                Rule::LowRank { rank, factors }
            }
        };
        DtmConfig {
            eps: self.tol,
            mode: self.mode,
            rule,
            seed,
            ..DtmConfig::default()
        }
    }

    pub fn arc_config(&self) -> ArcConfig {
        ArcConfig {
            tol: self.tol,
            ..ArcConfig::default()
        }
    }
}

/// One CSV row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub solver: String,
    pub set: String,
    pub n: usize,
    pub seed: u64,
    pub trial: u64,
    pub iters_success: usize,
    pub iters_total: usize,
    pub fevals: usize,
    pub devals: usize,
    pub chol_count: usize,
    pub cpu_ms: f64,
    pub final_value: f64,
    pub grad_norm: f64,
    pub first_order_ok: bool,
    pub local2_ok: bool,
    pub necessary_ok: bool,
    pub sufficient_ok: bool,
    pub safeguards: usize,
    /// Solver status; not part of the CSV schema.
    #[serde(skip)]
    pub converged: bool,
}

/// Outcome of one solver run on one generated instance.
#[derive(Clone, Debug)]
pub struct TrialOutcome {
    pub row: Row,
    pub s: DVector<f64>,
    pub dtm: Option<DtmResult>,
    pub arc_status: Option<ArcStatus>,
}

/// Solves the instance of `spec` and certifies the returned point.
///
/// With the low-rank rule and `exact = false` the solver only sees the dense
/// tensor, so its factors have to be recovered.
pub fn run_trial(
    model: &QuarticModel,
    spec: &GenSpec,
    set_label: &str,
    opts: &TrialOptions,
) -> Result<TrialOutcome> {
    let densified;
    let model = match (&model.t, opts.rule) {
        (SymTensor3::LowRank { .. }, RuleChoice::LowRank { exact: false, .. }) => {
            densified = QuarticModel {
                t: model.t.to_dense(),
                ..model.clone()
            };
            &densified
        }
        _ => model,
    };
    let n = model.dim();
    let start = Instant::now();
    let (s, mut row, dtm, arc_status) = match opts.solver {
        SolverKind::Dtm => {
            let cfg = opts.dtm_config(model, spec.seed ^ spec.stream.rotate_left(32));
            cfg.validate()?;
            let r = dtm::minimize(model, &cfg);
            let t = &r.trace;
            let row = Row {
                solver: "dtm".into(),
                set: set_label.into(),
                n,
                seed: spec.seed,
                trial: spec.stream,
                iters_success: t.successful_iters,
                iters_total: t.total_iters,
                fevals: t.function_evals,
                devals: t.derivative_evals,
                chol_count: t.cholesky_count,
                cpu_ms: 0.0,
                final_value: r.value,
                grad_norm: r.grad_norm,
                first_order_ok: false,
                local2_ok: false,
                necessary_ok: false,
                sufficient_ok: false,
                safeguards: t.safeguards,
                converged: r.status == DtmStatus::Converged,
            };
            (r.s.clone(), row, Some(r), None)
        }
        SolverKind::Arc => {
            let (x, t) = arc_minimize(model, &DVector::zeros(n), &opts.arc_config());
            let row = Row {
                solver: "arc".into(),
                set: set_label.into(),
                n,
                seed: spec.seed,
                trial: spec.stream,
                iters_success: t.successful,
                iters_total: t.iterations,
                fevals: t.function_evals,
                devals: t.derivative_evals,
                chol_count: t.cholesky_count,
                cpu_ms: 0.0,
                final_value: t.final_value,
                grad_norm: t.grad_norm,
                first_order_ok: false,
                local2_ok: false,
                necessary_ok: false,
                sufficient_ok: false,
                safeguards: t.fallback_steps,
                converged: t.status == ArcStatus::Converged,
            };
            (x, row, None, Some(t.status))
        }
    };
    row.cpu_ms = start.elapsed().as_secs_f64() * 1e3;
    let report = classify(model, &s, opts.tol)?;
    row.first_order_ok = report.flags.first_order;
    row.local2_ok = report.flags.local2;
    row.necessary_ok = report.flags.necessary;
    row.sufficient_ok = report.flags.sufficient;
    Ok(TrialOutcome {
        row,
        s,
        dtm,
        arc_status,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    Sigma,
    C,
}

impl FromStr for SweepParam {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sigma" => Ok(SweepParam::Sigma),
            "c" => Ok(SweepParam::C),
            _ => Err(Error::InvalidArgument(format!("cannot sweep {s:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub param: SweepParam,
    pub from: f64,
    pub to: f64,
    pub steps: usize,
}

impl Sweep {
    pub fn values(&self) -> Vec<f64> {
        match self.steps {
            0 => vec![],
            1 => vec![self.from],
            k => (0..k)
                .map(|i| self.from + (self.to - self.from) * i as f64 / (k - 1) as f64)
                .collect(),
        }
    }
}

/// Benchmark description; unset parameters keep the defaults of the set.
#[derive(Clone, Debug)]
pub struct BenchPlan {
    pub set: SetKind,
    pub ns: Vec<usize>,
    pub trials: u64,
    pub seed: u64,
    pub solvers: Vec<SolverKind>,
    pub options: TrialOptions,
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub c: Option<f64>,
    pub sigma: Option<f64>,
    pub sweep: Option<Sweep>,
}

impl BenchPlan {
    pub fn new(set: SetKind, ns: Vec<usize>, trials: u64, seed: u64) -> Self {
        BenchPlan {
            set,
            ns,
            trials,
            seed,
            solvers: vec![SolverKind::Dtm],
            options: TrialOptions::default(),
            a: None,
            b: None,
            c: None,
            sigma: None,
            sweep: None,
        }
    }

    fn spec(&self, n: usize, trial: u64, sweep_value: Option<f64>) -> GenSpec {
        let mut s = GenSpec::new(self.set, n, self.seed, trial);
        s.a = self.a.unwrap_or(s.a);
        s.b = self.b.unwrap_or(s.b);
        s.c = self.c.unwrap_or(s.c);
        s.sigma = self.sigma.unwrap_or(s.sigma);
        match (self.sweep, sweep_value) {
            (
                Some(Sweep {
                    param: SweepParam::Sigma,
                    ..
                }),
                Some(v),
            ) => s.sigma = v,
            (
                Some(Sweep {
                    param: SweepParam::C,
                    ..
                }),
                Some(v),
            ) => s.c = v,
            _ => {}
        }
        s
    }
}

/// Means over the trials of one (solver, n, sweep value) group.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Aggregate {
    pub solver: String,
    pub set: String,
    pub n: usize,
    pub sweep_value: Option<f64>,
    pub trials: usize,
    pub mean_iters_success: f64,
    pub mean_iters_total: f64,
    pub mean_fevals: f64,
    pub mean_cpu_ms: f64,
    pub converged_fraction: f64,
    pub sufficient_fraction: f64,
}

fn aggregate(rows: &[Row], sweep_value: Option<f64>) -> Aggregate {
    let k = rows.len().max(1) as f64;
    let mean = |f: &dyn Fn(&Row) -> f64| rows.iter().map(f).sum::<f64>() / k;
    Aggregate {
        solver: rows.first().map(|r| r.solver.clone()).unwrap_or_default(),
        set: rows.first().map(|r| r.set.clone()).unwrap_or_default(),
        n: rows.first().map_or(0, |r| r.n),
        sweep_value,
        trials: rows.len(),
        mean_iters_success: mean(&|r| r.iters_success as f64),
        mean_iters_total: mean(&|r| r.iters_total as f64),
        mean_fevals: mean(&|r| r.fevals as f64),
        mean_cpu_ms: mean(&|r| r.cpu_ms),
        converged_fraction: mean(&|r| f64::from(u8::from(r.converged))),
        sufficient_fraction: mean(&|r| f64::from(u8::from(r.sufficient_ok))),
    }
}

#[derive(Clone, Debug, Default)]
pub struct BenchReport {
    pub rows: Vec<Row>,
    pub aggregates: Vec<Aggregate>,
    /// Runs whose solver did not report convergence.
    pub failures: usize,
}

/// CSV writer for benchmark rows; the header is written with the first row.
pub fn open_csv(path: &std::path::Path) -> Result<csv::Writer<std::fs::File>> {
    Ok(csv::Writer::from_path(path)?)
}

/// Runs `plan`, streaming rows to `csv` as they complete.
pub fn run_bench<W: Write>(
    plan: &BenchPlan,
    mut csv: Option<&mut csv::Writer<W>>,
) -> Result<BenchReport> {
    if plan.ns.is_empty() || plan.trials == 0 || plan.solvers.is_empty() {
        return Err(Error::InvalidArgument("empty benchmark".into()));
    }
    let sweep_values: Vec<Option<f64>> = match plan.sweep {
        Some(sw) => sw.values().into_iter().map(Some).collect(),
        None => vec![None],
    };
    let mut report = BenchReport::default();
    for &n in &plan.ns {
        for &sv in &sweep_values {
            let label = match (plan.sweep, sv) {
                (Some(sw), Some(v)) => format!(
                    "{}:{}={v}",
                    plan.set,
                    if sw.param == SweepParam::Sigma {
                        "sigma"
                    } else {
                        "c"
                    }
                ),
                _ => plan.set.to_string(),
            };
            let mut groups: Vec<Vec<Row>> = vec![Vec::new(); plan.solvers.len()];
            for trial in 0..plan.trials {
                let spec = plan.spec(n, trial, sv);
                let model = generate(&spec)?;
                for (gi, &solver) in plan.solvers.iter().enumerate() {
                    let opts = TrialOptions {
                        solver,
                        ..plan.options.clone()
                    };
                    let out = run_trial(&model, &spec, &label, &opts)?;
                    if !out.row.converged {
                        report.failures += 1;
                    }
                    if let Some(w) = csv.as_deref_mut() {
                        w.serialize(&out.row)?;
                        w.flush()?;
                    }
                    groups[gi].push(out.row);
                }
            }
            for g in groups {
                report.aggregates.push(aggregate(&g, sv));
                report.rows.extend(g);
            }
        }
    }
    Ok(report)
}

/// Evaluation and solve times of the dense-tensor model against the diagonal model.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CostComparison {
    pub n: usize,
    pub iterates: usize,
    /// Mean time of value, gradient and Hessian of the dense model at an iterate.
    pub dense_eval_ms: f64,
    /// Same for the diagonal model `M_d`.
    pub diagonal_eval_ms: f64,
    /// Wall time of one secular solve of the dense model.
    pub dense_solve_ms: f64,
    /// Wall time of one secular solve of `M_d`.
    pub diagonal_solve_ms: f64,
}

impl CostComparison {
    pub fn eval_ratio(&self) -> f64 {
        self.dense_eval_ms / self.diagonal_eval_ms
    }

    pub fn solve_ratio(&self) -> f64 {
        self.dense_solve_ms / self.diagonal_solve_ms
    }
}

fn time_ms<T>(reps: usize, mut f: impl FnMut() -> T) -> f64 {
    let start = Instant::now();
    for _ in 0..reps {
        std::hint::black_box(f());
    }
    start.elapsed().as_secs_f64() * 1e3 / reps as f64
}

/// Compares per-iteration model costs along a diagonal-model descent path of `m`.
///
/// At each iterate the dense model (recentered `m₃` with its full third
/// derivative) and the diagonal model are both evaluated at the step taken,
/// and both are solved once by the secular solver.
pub fn cost_comparison(
    m: &QuarticModel,
    tol: f64,
    reps: usize,
    max_iterates: usize,
) -> Result<CostComparison> {
    let reps = reps.max(1);
    let cfg = DtmConfig {
        eps: tol,
        ..DtmConfig::default()
    };
    let sec_cfg = SecularConfig::default();
    let mut rng = rand::thread_rng();
    let mut it = Iterate::at_origin(m);
    let (mut dense_eval, mut diag_eval, mut dense_solve, mut diag_solve) = (0.0, 0.0, 0.0, 0.0);
    let mut count = 0;
    while count < max_iterates.max(1) {
        let dense = m.shift(&it.s)?;
        let built = build_model(m, &it, 0.0, &cfg, &mut rng)?;
        let md = built.model();
        let start = Instant::now();
        let sec = secular::solve(&md.h, &md.g, &md.t, md.sigma, &md.w, &sec_cfg);
        diag_solve += start.elapsed().as_secs_f64() * 1e3;
        dense_solve += time_ms(1, || {
            secular::solve(
                &dense.h,
                &dense.g,
                &dense.t,
                dense.sigma,
                &dense.w,
                &sec_cfg,
            )
        });
        let step = if sec.s.norm() > 0.0 && sec.s.iter().all(|x| x.is_finite()) {
            built.to_original(&sec.s)
        } else {
            DVector::from_element(m.dim(), 1e-2)
        };
        dense_eval += time_ms(reps, || dense.evaluate(&step, 2));
        diag_eval += time_ms(reps, || md.evaluate(&step, 2));
        count += 1;
        let next = &it.s + &step;
        let ev = m.evaluate(&next, 2)?;
        if !sec.converged() || ev.value >= it.f {
            break;
        }
        let g = ev.gradient.unwrap_or_else(|| DVector::zeros(0));
        let done = g.norm() <= tol;
        it = Iterate {
            s: next,
            f: ev.value,
            g,
            h: ev.hessian.unwrap_or_else(|| DMatrix::zeros(0, 0)),
        };
        if done {
            break;
        }
    }
    let c = count as f64;
    Ok(CostComparison {
        n: m.dim(),
        iterates: count,
        dense_eval_ms: dense_eval / c,
        diagonal_eval_ms: diag_eval / c,
        dense_solve_ms: dense_solve / c,
        diagonal_solve_ms: diag_solve / c,
    })
}

/// Per sweep value, the fraction of DTM runs whose final point passes the
/// sufficient certificate.
pub fn sufficient_fraction(plan: &BenchPlan) -> Result<Vec<(f64, f64)>> {
    let sweep = plan
        .sweep
        .ok_or_else(|| Error::InvalidArgument("a sweep is required".into()))?;
    let mut p = plan.clone();
    p.solvers = vec![SolverKind::Dtm];
    let report = run_bench::<std::io::Sink>(&p, None)?;
    Ok(sweep
        .values()
        .into_iter()
        .map(|v| {
            let groups: Vec<&Aggregate> = report
                .aggregates
                .iter()
                .filter(|a| a.sweep_value == Some(v))
                .collect();
            let runs: usize = groups.iter().map(|a| a.trials).sum();
            let pass: f64 = groups
                .iter()
                .map(|a| a.sufficient_fraction * a.trials as f64)
                .sum();
            (v, pass / runs.max(1) as f64)
        })
        .collect())
}

/// Global minimizer of a separable model by minimizing each coordinate's quartic.
pub fn sqr_separable_min(m: &SqrModel) -> Result<DVector<f64>> {
    let n = m.dim();
    for i in 0..n {
        for j in 0..n {
            if i != j && m.h[(i, j)] != 0.0 {
                return Err(Error::InvalidArgument(
                    "the Hessian must be diagonal".into(),
                ));
            }
        }
    }
    Ok(DVector::from_fn(n, |j, _| {
        univariate_quartic_min(m.g[j], m.h[(j, j)], m.t[j], m.sig[j])
    }))
}

/// Minimizer of `g x + ½h x² + (t/6)x³ + (σ/4)x⁴`, `σ > 0`.
pub fn univariate_quartic_min(g: f64, h: f64, t: f64, sigma: f64) -> f64 {
    let p = |x: f64| g * x + 0.5 * h * x * x + t / 6.0 * x.powi(3) + sigma / 4.0 * x.powi(4);
    // stationary points are roots of σx³ + (t/2)x² + h x + g
    let comp = DMatrix::from_row_slice(
        3,
        3,
        &[
            -t / (2.0 * sigma),
            -h / sigma,
            -g / sigma,
            1.0,
            0.0,
            0.0,
            0.0,
            1.0,
            0.0,
        ],
    );
    let mut best = (p(0.0), 0.0);
    for z in comp.complex_eigenvalues().iter() {
        let mut x = z.re;
        for _ in 0..50 {
            let d1 = g + h * x + 0.5 * t * x * x + sigma * x.powi(3);
            let d2 = h + t * x + 3.0 * sigma * x * x;
            if d2 == 0.0 {
                break;
            }
            let nx = x - d1 / d2;
            if (nx - x).abs() <= 1e-16 * (1.0 + x.abs()) {
                x = nx;
                break;
            }
            x = nx;
        }
        if x.is_finite() && p(x) < best.0 {
            best = (p(x), x);
        }
    }
    best.1
}
