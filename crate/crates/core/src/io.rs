//! JSON encodings of models and points.

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric::Metric;
use crate::model::{QuarticModel, SqrModel};
use crate::tensor::SymTensor3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TensorJson {
    Zero {
        n: usize,
    },
    Diagonal {
        t: Vec<f64>,
    },
    LowRank {
        factors: Vec<Vec<f64>>,
    },
    /// Row-major `n³` entries, `T_ijk` at `(i·n + j)·n + k`.
    Dense {
        n: usize,
        entries: Vec<f64>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MetricJson {
    Diagonal { diagonal: Vec<f64> },
    Full(Vec<Vec<f64>>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelJson {
    #[serde(default)]
    pub f0: f64,
    pub g: Vec<f64>,
    pub h: Vec<Vec<f64>>,
    pub t: TensorJson,
    pub sigma: f64,
    /// Identity when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w: Option<MetricJson>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SqrJson {
    #[serde(default)]
    pub f0: f64,
    pub g: Vec<f64>,
    pub h: Vec<Vec<f64>>,
    pub t: Vec<f64>,
    pub sig: Vec<f64>,
}

/// Either model family; a separable model is recognized by its `sig` field.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AnyModelJson {
    Sqr(SqrJson),
    Quartic(ModelJson),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum PointJson {
    Bare(Vec<f64>),
    Wrapped { s: Vec<f64> },
}

fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn matrix_from_rows(rows: &[Vec<f64>], n: usize, what: &str) -> Result<DMatrix<f64>> {
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        return Err(Error::InvalidArgument(format!("{what} must be {n}×{n}")));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

impl From<&SymTensor3> for TensorJson {
    fn from(t: &SymTensor3) -> Self {
        match t {
            SymTensor3::Zero { n } => TensorJson::Zero { n: *n },
            SymTensor3::Diagonal { t } => TensorJson::Diagonal {
                t: t.as_slice().to_vec(),
            },
            SymTensor3::LowRank { factors, .. } => TensorJson::LowRank {
                factors: factors.iter().map(|a| a.as_slice().to_vec()).collect(),
            },
            SymTensor3::Dense { n, entries } => TensorJson::Dense {
                n: *n,
                entries: entries.clone(),
            },
        }
    }
}

impl TensorJson {
    pub fn into_tensor(self, n: usize) -> Result<SymTensor3> {
        let t = match self {
            TensorJson::Zero { n } => SymTensor3::zero(n),
            TensorJson::Diagonal { t } => SymTensor3::diagonal(DVector::from_vec(t)),
            TensorJson::LowRank { factors } => {
                SymTensor3::low_rank(n, factors.into_iter().map(DVector::from_vec).collect())?
            }
            TensorJson::Dense { n, entries } => SymTensor3::dense(n, entries)?,
        };
        if t.dim() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: t.dim(),
            });
        }
        Ok(t)
    }
}

impl From<&QuarticModel> for ModelJson {
    fn from(m: &QuarticModel) -> Self {
        let w = if m.w.is_identity() {
            None
        } else if let Some(d) = m.w.diagonal_entries() {
            Some(MetricJson::Diagonal {
                diagonal: d.as_slice().to_vec(),
            })
        } else {
            Some(MetricJson::Full(matrix_rows(&m.w.matrix())))
        };
        ModelJson {
            f0: m.f0,
            g: m.g.as_slice().to_vec(),
            h: matrix_rows(&m.h),
            t: TensorJson::from(&m.t),
            sigma: m.sigma,
            w,
        }
    }
}

impl ModelJson {
    pub fn into_model(self) -> Result<QuarticModel> {
        let n = self.g.len();
        let h = matrix_from_rows(&self.h, n, "h")?;
        let t = self.t.into_tensor(n)?;
        let w = match self.w {
            None => Metric::identity(n),
            Some(MetricJson::Diagonal { diagonal }) => {
                Metric::diagonal(&DVector::from_vec(diagonal))?
            }
            Some(MetricJson::Full(rows)) => Metric::new(matrix_from_rows(&rows, n, "w")?)?,
        };
        QuarticModel::new(self.f0, DVector::from_vec(self.g), h, t, self.sigma, w)
    }
}

impl From<&SqrModel> for SqrJson {
    fn from(m: &SqrModel) -> Self {
        SqrJson {
            f0: m.f0,
            g: m.g.as_slice().to_vec(),
            h: matrix_rows(&m.h),
            t: m.t.as_slice().to_vec(),
            sig: m.sig.as_slice().to_vec(),
        }
    }
}

impl SqrJson {
    pub fn into_model(self) -> Result<SqrModel> {
        let n = self.g.len();
        let h = matrix_from_rows(&self.h, n, "h")?;
        SqrModel::new(
            self.f0,
            DVector::from_vec(self.g),
            h,
            DVector::from_vec(self.t),
            DVector::from_vec(self.sig),
        )
    }
}

/// A decoded model file.
#[derive(Clone, Debug)]
pub enum AnyModel {
    Quartic(QuarticModel),
    Sqr(SqrModel),
}

pub fn parse_model(text: &str) -> Result<AnyModel> {
    match serde_json::from_str::<AnyModelJson>(text)? {
        AnyModelJson::Quartic(m) => Ok(AnyModel::Quartic(m.into_model()?)),
        AnyModelJson::Sqr(m) => Ok(AnyModel::Sqr(m.into_model()?)),
    }
}

pub fn read_model(path: &Path) -> Result<AnyModel> {
    parse_model(&fs::read_to_string(path)?)
}

/// Reads a quartic model, rejecting separable ones.
pub fn read_quartic(path: &Path) -> Result<QuarticModel> {
    match read_model(path)? {
        AnyModel::Quartic(m) => Ok(m),
        AnyModel::Sqr(_) => Err(Error::InvalidArgument(
            "expected a quartic model, found a separable one".into(),
        )),
    }
}

pub fn model_to_string(m: &QuarticModel) -> Result<String> {
    Ok(serde_json::to_string_pretty(&ModelJson::from(m))?)
}

pub fn sqr_to_string(m: &SqrModel) -> Result<String> {
    Ok(serde_json::to_string_pretty(&SqrJson::from(m))?)
}

/// A point is either a bare array or `{"s": [...]}`.
pub fn parse_point(text: &str) -> Result<DVector<f64>> {
    let v = match serde_json::from_str::<PointJson>(text)? {
        PointJson::Bare(v) | PointJson::Wrapped { s: v } => v,
    };
    Ok(DVector::from_vec(v))
}

pub fn read_point(path: &Path) -> Result<DVector<f64>> {
    parse_point(&fs::read_to_string(path)?)
}
