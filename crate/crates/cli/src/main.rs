use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use ar3_core::harness::{
    self, generate_sqr, BenchPlan, RuleChoice, SolverKind, Sweep, SweepParam, TrialOptions,
};
use ar3_core::io::{self, AnyModel};
use ar3_core::optimality::classify_sqr;
use ar3_core::{arc_minimize, classify, minimize, DVector, DtmStatus, GenSpec, Mode, SetKind};

/// Solver status failures exit with this code; usage and I/O errors with 1 or 2.
const SOLVER_FAILURE: u8 = 3;

#[derive(Parser)]
#[command(
    name = "ar3",
    version,
    about = "Minimize and certify quartically regularized cubic models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Minimize a model read from JSON.
    Solve(SolveArgs),
    /// Run a seeded benchmark and write one CSV row per run.
    Bench(BenchArgs),
    /// Evaluate the optimality certificates at a point.
    Check(CheckArgs),
    /// Write a generated test problem as JSON.
    Gen(GenArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum SolverArg {
    Dtm,
    Arc,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Practical,
    Variant1,
}

#[derive(Clone, Copy, ValueEnum)]
enum RuleArg {
    Diagonal,
    Lowrank,
}

#[derive(Clone, Copy, ValueEnum)]
enum SweepArg {
    Sigma,
    C,
}

#[derive(Args)]
struct StrategyArgs {
    #[arg(long, value_enum, default_value = "practical")]
    mode: ModeArg,
    #[arg(long, value_enum, default_value = "diagonal")]
    rule: RuleArg,
    /// Rank of the low-rank rule.
    #[arg(long, default_value_t = 1)]
    rank: usize,
    /// First-order tolerance.
    #[arg(long, default_value_t = 1e-5)]
    tol: f64,
}

impl StrategyArgs {
    fn options(&self, solver: SolverKind) -> TrialOptions {
        TrialOptions {
            solver,
            mode: match self.mode {
                ModeArg::Practical => Mode::Practical,
                ModeArg::Variant1 => Mode::Variant1,
            },
            rule: match self.rule {
                RuleArg::Diagonal => RuleChoice::Diagonal,
                RuleArg::Lowrank => RuleChoice::LowRank {
                    rank: self.rank,
                    exact: true,
                },
            },
            tol: self.tol,
        }
    }
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long, value_enum, default_value = "dtm")]
    solver: SolverArg,
    #[command(flatten)]
    strategy: StrategyArgs,
    /// Seed for the randomized rank approximation.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// diagonal, lowrank, lowrankP, full, ill_hessian or ill_tensor.
    #[arg(long)]
    set: String,
    /// Comma-separated dimensions.
    #[arg(long, value_delimiter = ',', required = true)]
    n: Vec<usize>,
    #[arg(long, default_value_t = 10)]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Comma-separated solvers to run on every instance.
    #[arg(long, value_enum, value_delimiter = ',', default_value = "dtm")]
    solver: Vec<SolverArg>,
    #[command(flatten)]
    strategy: StrategyArgs,
    /// Supply the generating factors to the low-rank rule instead of recovering them.
    #[arg(long)]
    exact_factors: bool,
    #[arg(long)]
    a: Option<f64>,
    #[arg(long)]
    b: Option<f64>,
    #[arg(long)]
    c: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long, value_enum, requires_all = ["from", "to", "steps"])]
    sweep: Option<SweepArg>,
    #[arg(long)]
    from: Option<f64>,
    #[arg(long)]
    to: Option<f64>,
    #[arg(long)]
    steps: Option<usize>,
}

#[derive(Args)]
struct CheckArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    point: PathBuf,
    /// Tolerance of the certificates, relative to `1 + ‖H‖_F`.
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    set: String,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Generator stream, as used for the trials of a benchmark.
    #[arg(long, default_value_t = 0)]
    trial: u64,
    #[arg(long)]
    a: Option<f64>,
    #[arg(long)]
    b: Option<f64>,
    #[arg(long)]
    c: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    /// Write a separable model with diagonal Hessian instead.
    #[arg(long)]
    separable: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn solver_kind(s: SolverArg) -> SolverKind {
    match s {
        SolverArg::Dtm => SolverKind::Dtm,
        SolverArg::Arc => SolverKind::Arc,
    }
}

fn emit(value: &Value, out: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match out {
        Some(p) => fs::write(p, text + "\n").with_context(|| format!("writing {}", p.display())),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn solve(args: &SolveArgs) -> Result<bool> {
    let m = io::read_quartic(&args.model)
        .with_context(|| format!("reading {}", args.model.display()))?;
    let opts = args.strategy.options(solver_kind(args.solver));
    let n = m.dim();
    let start = Instant::now();
    let (s, mut out, converged) = match opts.solver {
        SolverKind::Dtm => {
            let cfg = opts.dtm_config(&m, args.seed);
            cfg.validate()?;
            let r = minimize(&m, &cfg);
            let t = &r.trace;
            let out = json!({
                "solver": "dtm",
                "status": r.status,
                "value": r.value,
                "grad_norm": r.grad_norm,
                "iters_success": t.successful_iters,
                "iters_total": t.total_iters,
                "fevals": t.function_evals,
                "devals": t.derivative_evals,
                "chol_count": t.cholesky_count,
                "safeguards": t.safeguards,
                "trace": t,
            });
            (r.s.clone(), out, r.status == DtmStatus::Converged)
        }
        SolverKind::Arc => {
            let (x, t) = arc_minimize(&m, &DVector::zeros(n), &opts.arc_config());
            let out = json!({
                "solver": "arc",
                "status": t.status,
                "value": t.final_value,
                "grad_norm": t.grad_norm,
                "iters_success": t.successful,
                "iters_total": t.iterations,
                "fevals": t.function_evals,
                "devals": t.derivative_evals,
                "chol_count": t.cholesky_count,
                "safeguards": t.fallback_steps,
            });
            (x, out, t.status == ar3_core::ArcStatus::Converged)
        }
    };
    let cpu_ms = start.elapsed().as_secs_f64() * 1e3;
    let report = classify(&m, &s, opts.tol)?;
    out["cpu_ms"] = json!(cpu_ms);
    out["s"] = json!(s.as_slice());
    out["report"] = serde_json::to_value(&report)?;
    emit(&out, args.out.as_deref())?;
    Ok(converged)
}

fn bench(args: &BenchArgs) -> Result<bool> {
    let set: SetKind = args.set.parse()?;
    let mut plan = BenchPlan::new(set, args.n.clone(), args.trials, args.seed);
    plan.solvers = args.solver.iter().map(|s| solver_kind(*s)).collect();
    plan.options = args.strategy.options(SolverKind::Dtm);
    if let RuleChoice::LowRank { rank, .. } = plan.options.rule {
        plan.options.rule = RuleChoice::LowRank {
            rank,
            exact: args.exact_factors,
        };
    }
    plan.a = args.a;
    plan.b = args.b;
    plan.c = args.c;
    plan.sigma = args.sigma;
    if let (Some(p), Some(from), Some(to), Some(steps)) =
        (args.sweep, args.from, args.to, args.steps)
    {
        plan.sweep = Some(Sweep {
            param: match p {
                SweepArg::Sigma => SweepParam::Sigma,
                SweepArg::C => SweepParam::C,
            },
            from,
            to,
            steps,
        });
    }
    let report = match &args.csv {
        Some(path) => {
            let mut w =
                harness::open_csv(path).with_context(|| format!("creating {}", path.display()))?;
            harness::run_bench(&plan, Some(&mut w))?
        }
        None => harness::run_bench::<std::io::Sink>(&plan, None)?,
    };
    for a in &report.aggregates {
        println!("{}", serde_json::to_string(a)?);
    }
    if report.failures > 0 {
        log::warn!(
            "{} of {} runs did not converge",
            report.failures,
            report.rows.len()
        );
    }
    Ok(report.failures == 0)
}

fn check(args: &CheckArgs) -> Result<()> {
    let model =
        io::read_model(&args.model).with_context(|| format!("reading {}", args.model.display()))?;
    let s =
        io::read_point(&args.point).with_context(|| format!("reading {}", args.point.display()))?;
    let value = match model {
        AnyModel::Quartic(m) => serde_json::to_value(classify(&m, &s, args.tol)?)?,
        AnyModel::Sqr(m) => serde_json::to_value(classify_sqr(&m, &s, args.tol)?)?,
    };
    emit(&value, None)
}

fn gen(args: &GenArgs) -> Result<()> {
    let kind: SetKind = args.set.parse()?;
    let mut spec = GenSpec::new(kind, args.n, args.seed, args.trial);
    spec.a = args.a.unwrap_or(spec.a);
    spec.b = args.b.unwrap_or(spec.b);
    spec.c = args.c.unwrap_or(spec.c);
    spec.sigma = args.sigma.unwrap_or(spec.sigma);
    let text = if args.separable {
        io::sqr_to_string(&generate_sqr(&spec)?)?
    } else {
        io::model_to_string(&ar3_core::generate(&spec)?)?
    };
    match &args.out {
        Some(p) => fs::write(p, text + "\n").with_context(|| format!("writing {}", p.display()))?,
        None => println!("{text}"),
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<bool> {
    match &cli.command {
        Command::Solve(a) => solve(a),
        Command::Bench(a) => bench(a),
        Command::Check(a) => check(a).map(|_| true),
        Command::Gen(a) => gen(a).map(|_| true),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("error: solver did not converge");
            ExitCode::from(SOLVER_FAILURE)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn rejects_unknown_set() {
        let args = GenArgs {
            set: "nope".into(),
            n: 2,
            seed: 0,
            trial: 0,
            a: None,
            b: None,
            c: None,
            sigma: None,
            separable: false,
            out: None,
        };
        assert!(gen(&args).is_err());
    }
}
