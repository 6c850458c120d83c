//! Test problem generation, a brute-force oracle and experiment drivers.

pub mod experiment;
pub mod gen;
pub mod oracle;

pub use experiment::{
    cost_comparison, open_csv, run_bench, run_trial, sqr_separable_min, sufficient_fraction,
    univariate_quartic_min, Aggregate, BenchPlan, BenchReport, CostComparison, Row, RuleChoice,
    SolverKind, Sweep, SweepParam, TrialOptions, TrialOutcome,
};
pub use gen::{generate, generate_sqr, GenSpec, SetKind};
pub use oracle::{brute_force_min, coercivity_radius, OracleResult};
