//! Fixed instances shared by the criterion benchmarks.

use ar3_core::dtm::{diagonal_model, Iterate};
use ar3_core::{generate, DVector, DtmConfig, GenSpec, QuarticModel, SetKind};

pub const SEED: u64 = 2024;

/// Generated problem of `kind` and dimension `n`, trial 0.
pub fn instance(kind: SetKind, n: usize) -> QuarticModel {
    generate(&GenSpec::new(kind, n, SEED, 0)).expect("valid generator parameters")
}

/// Dense model recentered at `p` and the diagonal model built there.
pub fn model_pair(m: &QuarticModel, p: &DVector<f64>) -> (QuarticModel, QuarticModel) {
    let dense = m.shift(p).expect("matching dimension");
    let ev = m.evaluate(p, 2).expect("matching dimension");
    let it = Iterate {
        s: p.clone(),
        f: ev.value,
        g: ev.gradient.expect("requested"),
        h: ev.hessian.expect("requested"),
    };
    (
        dense,
        diagonal_model(m, &it, 0.0, &DtmConfig::default()).model(),
    )
}

/// A point of moderate size for evaluation benchmarks.
pub fn probe_point(n: usize) -> DVector<f64> {
    DVector::from_fn(n, |i, _| ((i as f64 + 1.0) * 0.37).sin() * 0.1)
}
