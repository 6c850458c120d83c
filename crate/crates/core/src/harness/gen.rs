//! Seeded random test problems.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric::Metric;
use crate::model::{QuarticModel, SqrModel};
use crate::tensor::SymTensor3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SetKind {
    Diagonal,
    LowRank(usize),
    Full,
    IllHessian,
    IllTensor,
}

impl fmt::Display for SetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SetKind::Diagonal => write!(f, "diagonal"),
            SetKind::LowRank(p) => write!(f, "lowrank{p}"),
            SetKind::Full => write!(f, "full"),
            SetKind::IllHessian => write!(f, "ill_hessian"),
            SetKind::IllTensor => write!(f, "ill_tensor"),
        }
    }
}

impl FromStr for SetKind {
    type Err = Error;

    /// Accepts `diagonal`, `lowrank` (rank 1), `lowrankP`, `full`, `ill_hessian`, `ill_tensor`.
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "diagonal" => Ok(SetKind::Diagonal),
            "full" => Ok(SetKind::Full),
            "ill_hessian" => Ok(SetKind::IllHessian),
            "ill_tensor" => Ok(SetKind::IllTensor),
            "lowrank" => Ok(SetKind::LowRank(1)),
            _ => s
                .strip_prefix("lowrank")
                .and_then(|p| p.parse().ok())
                .filter(|p: &usize| *p > 0)
                .map(SetKind::LowRank)
                .ok_or_else(|| Error::InvalidArgument(format!("unknown test set {s:?}"))),
        }
    }
}

/// Parameters of one generated problem.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenSpec {
    pub kind: SetKind,
    pub n: usize,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub sigma: f64,
    pub seed: u64,
    /// Independent stream of the generator, typically the trial index.
    pub stream: u64,
}

impl GenSpec {
    /// Standard parameters of each set: `a = 10, b = 20, c = 20, σ = 100`,
    /// `a = b = c = 80` for the full set and `σ = 500` for ill-conditioned tensors.
    pub fn new(kind: SetKind, n: usize, seed: u64, stream: u64) -> Self {
        let (a, b, c, sigma) = match kind {
            SetKind::Full => (80.0, 80.0, 80.0, 100.0),
            SetKind::IllTensor => (10.0, 20.0, 20.0, 500.0),
            _ => (10.0, 20.0, 20.0, 100.0),
        };
        GenSpec {
            kind,
            n,
            a,
            b,
            c,
            sigma,
            seed,
            stream,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidArgument("n must be at least 1".into()));
        }
        if !(self.sigma > 0.0) {
            return Err(Error::InvalidArgument("sigma must be positive".into()));
        }
        if let SetKind::LowRank(p) = self.kind {
            if p == 0 || p > self.n {
                return Err(Error::InvalidArgument(format!(
                    "rank {p} outside 1..={}",
                    self.n
                )));
            }
        }
        Ok(())
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }
}

fn randn<R: Rng>(rng: &mut R, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.sample(StandardNormal))
}

/// `(R + Rᵀ)/2` with standard normal `R`.
fn symm_randn<R: Rng>(rng: &mut R, n: usize) -> DMatrix<f64> {
    let r = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    (&r + r.transpose()) * 0.5
}

fn uniform_ill<R: Rng>(rng: &mut R, n: usize) -> DVector<f64> {
    let u = Uniform::new_inclusive(1e-6, 1e3);
    DVector::from_fn(n, |_, _| rng.sample(u))
}

/// Deterministic model for `spec`; the low-rank set keeps its factors in the tensor.
pub fn generate(spec: &GenSpec) -> Result<QuarticModel> {
    spec.validate()?;
    let n = spec.n;
    let mut rng = spec.rng();
    let g = randn(&mut rng, n) * spec.a;
    let h = match spec.kind {
        SetKind::IllHessian => DMatrix::from_diagonal(&uniform_ill(&mut rng, n)),
        _ => symm_randn(&mut rng, n) * spec.b,
    };
    let t = match spec.kind {
        SetKind::Diagonal | SetKind::IllHessian => {
            SymTensor3::diagonal(randn(&mut rng, n) * spec.c)
        }
        SetKind::IllTensor => SymTensor3::diagonal(uniform_ill(&mut rng, n)),
        SetKind::LowRank(p) => {
            let factors = (0..p).map(|_| randn(&mut rng, n) * spec.c).collect();
            SymTensor3::low_rank(n, factors)?
        }
        SetKind::Full => {
            let raw: Vec<f64> = (0..n * n * n)
                .map(|_| spec.c * rng.sample::<f64, _>(StandardNormal))
                .collect();
            SymTensor3::dense_symmetrized(n, &raw)?
        }
    };
    QuarticModel::new(0.0, g, h, t, spec.sigma, Metric::identity(n))
}

/// Separable model with diagonal `H`, `t = c·randn` and weights `σ_j ∈ [σ/2, 3σ/2]`.
pub fn generate_sqr(spec: &GenSpec) -> Result<SqrModel> {
    spec.validate()?;
    let n = spec.n;
    let mut rng = spec.rng();
    let g = randn(&mut rng, n) * spec.a;
    let h = DMatrix::from_diagonal(&(randn(&mut rng, n) * spec.b));
    let t = randn(&mut rng, n) * spec.c;
    let u = Uniform::new_inclusive(0.5, 1.5);
    let sig = DVector::from_fn(n, |_, _| spec.sigma * rng.sample(u));
    SqrModel::new(0.0, g, h, t, sig)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic() {
        let spec = GenSpec::new(SetKind::Full, 4, 7, 3);
        let a = generate(&spec).unwrap();
        let b = generate(&spec).unwrap();
        assert_eq!(a.g, b.g);
        assert_eq!(a.h, b.h);
        assert_eq!(a.t, b.t);
    }

    #[test]
    fn streams_differ() {
        let a = generate(&GenSpec::new(SetKind::Diagonal, 5, 7, 0)).unwrap();
        let b = generate(&GenSpec::new(SetKind::Diagonal, 5, 7, 1)).unwrap();
        assert_ne!(a.g, b.g);
    }

    #[test]
    fn diagonal_shape() {
        let m = generate(&GenSpec::new(SetKind::Diagonal, 100, 1, 0)).unwrap();
        assert_eq!(m.t.kind(), "diagonal");
        assert_eq!(m.t.superdiagonal().len(), 100);
    }

    #[test]
    fn full_is_supersymmetric() {
        let m = generate(&GenSpec::new(SetKind::Full, 5, 1, 0)).unwrap();
        let SymTensor3::Dense { entries, .. } = &m.t else {
            panic!()
        };
        let n = 5;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let x = m.t.entry(i, j, k);
                    for y in [
                        m.t.entry(i, k, j),
                        m.t.entry(j, i, k),
                        m.t.entry(j, k, i),
                        m.t.entry(k, i, j),
                        m.t.entry(k, j, i),
                    ] {
                        assert!((x - y).abs() <= 1e-14 * (1.0 + x.abs()));
                    }
                }
            }
        }
        assert_eq!(entries.len(), 125);
    }

    #[test]
    fn ill_conditioned_ranges() {
        let m = generate(&GenSpec::new(SetKind::IllHessian, 50, 3, 0)).unwrap();
        assert!(m.h.diagonal().iter().all(|x| (1e-6..=1e3).contains(x)));
        let m = generate(&GenSpec::new(SetKind::IllTensor, 50, 3, 0)).unwrap();
        assert_eq!(m.sigma, 500.0);
        assert!(m.t.superdiagonal().iter().all(|x| (1e-6..=1e3).contains(x)));
    }

    #[test]
    fn parses_set_names() {
        assert_eq!("lowrank4".parse::<SetKind>().unwrap(), SetKind::LowRank(4));
        assert_eq!("lowrank".parse::<SetKind>().unwrap(), SetKind::LowRank(1));
        assert!("lowrank0".parse::<SetKind>().is_err());
        assert!("other".parse::<SetKind>().is_err());
    }
}
