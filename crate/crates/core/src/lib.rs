//! Minimization and global optimality certification for quartically
//! regularized cubic polynomials
//!
//! `m(s) = f0 + gᵀs + ½H[s]² + ⅙T[s]³ + (σ/4)‖s‖_W⁴`.

pub mod arc;
pub mod dtm;
pub mod error;
pub mod harness;
pub mod io;
pub mod linalg;
pub mod metric;
pub mod model;
pub mod optimality;
pub mod secular;
pub mod tensor;

pub use arc::{arc_minimize, ArcConfig, ArcStatus, ArcTrace, Objective};
pub use dtm::{minimize, DtmConfig, DtmResult, DtmStatus, DtmTrace, Mode, Rule};
pub use error::{Error, Result};
pub use harness::{brute_force_min, generate, GenSpec, OracleResult, SetKind};
pub use metric::{generalized_eig, GenEig, Metric};
pub use model::{DifferenceTerms, Evaluation, QuarticModel, SqrModel, SqrTerms};
pub use optimality::{
    classify, classify_sqr, operators, sigma_thresholds, Flags, OptimalityReport, SigmaThresholds,
    Verdict,
};
pub use secular::{SecularConfig, SecularResult, SecularStatus};
pub use tensor::{Contraction, SymTensor3};

pub use nalgebra::{DMatrix, DVector};
