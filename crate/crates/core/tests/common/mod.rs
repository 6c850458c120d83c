#![allow(dead_code)]

use ar3_core::{DMatrix, DVector, Metric, QuarticModel, SymTensor3};
use rand::Rng;
use rand_distr::StandardNormal;

pub fn randn<R: Rng>(rng: &mut R, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.sample(StandardNormal))
}

pub fn sym_randn<R: Rng>(rng: &mut R, n: usize) -> DMatrix<f64> {
    let a = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    (&a + a.transpose()) * 0.5
}

/// Symmetric positive definite with spectrum in `[lo, hi]`.
pub fn spd<R: Rng>(rng: &mut R, n: usize, lo: f64, hi: f64) -> DMatrix<f64> {
    let q = sym_randn(rng, n).symmetric_eigen().eigenvectors;
    let d = DVector::from_fn(n, |_, _| rng.gen_range(lo..=hi));
    &q * DMatrix::from_diagonal(&d) * q.transpose()
}

pub fn random_tensor<R: Rng>(rng: &mut R, n: usize) -> SymTensor3 {
    match rng.gen_range(0..4) {
        0 => SymTensor3::zero(n),
        1 => SymTensor3::diagonal(randn(rng, n) * 3.0),
        2 => {
            let p = rng.gen_range(1..=3);
            SymTensor3::low_rank(n, (0..p).map(|_| randn(rng, n)).collect()).unwrap()
        }
        _ => {
            let raw: Vec<f64> = (0..n * n * n).map(|_| rng.sample(StandardNormal)).collect();
            SymTensor3::dense_symmetrized(n, &raw).unwrap()
        }
    }
}

pub fn random_metric<R: Rng>(rng: &mut R, n: usize) -> Metric {
    match rng.gen_range(0..3) {
        0 => Metric::identity(n),
        1 => Metric::diagonal(&DVector::from_fn(n, |_, _| rng.gen_range(0.5..2.0))).unwrap(),
        _ => Metric::new(spd(rng, n, 0.5, 2.0)).unwrap(),
    }
}

pub fn random_model<R: Rng>(rng: &mut R, n: usize) -> QuarticModel {
    let f0 = rng.sample(StandardNormal);
    let g = randn(rng, n);
    let h = sym_randn(rng, n);
    let t = random_tensor(rng, n);
    let sigma = rng.gen_range(0.1..10.0);
    let w = random_metric(rng, n);
    QuarticModel::new(f0, g, h, t, sigma, w).unwrap()
}
