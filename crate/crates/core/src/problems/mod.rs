//! Concrete problem instances: seeded quadratics with controlled per-block
//! spectra, logistic regression over LIBSVM data, and the strong-convexity
//! regularization wrapper.

pub mod libsvm;
pub mod logistic;
pub mod quadratic;
pub mod regularize;

use thiserror::Error;

pub use libsvm::{parse_libsvm, parse_libsvm_file, LibsvmDataset, LibsvmError, LibsvmRow};
pub use logistic::{estimate_smoothness, make_logistic, LogisticProblem};
pub use quadratic::{gen_quadratic, QuadraticArchive, QuadraticProblem, QuadraticSpec};
pub use regularize::{regularize, Regularized, RegularizedBlocks};

use serde::{Deserialize, Serialize};

/// On-disk description of a logistic problem: dataset reference plus the
/// regularization weights (the data itself lives in its own file).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogisticArchive {
    pub format_version: u32,
    pub d_x: usize,
    pub d_y: usize,
    pub dataset: String,
    pub lambda_x: f64,
    pub lambda_y: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l_data: Option<f64>,
}

/// The problem archive file: one JSON document, discriminated by `kind`.
#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProblemArchive {
    Quadratic(QuadraticArchive),
    Logistic(LogisticArchive),
}

/// Feature width the LIBSVM collection declares for the `a1a` family; the
/// 1605-sample training split only realizes indices up to 119.
pub const A1A_DECLARED_FEATURES: usize = 123;

#[derive(Debug, Error)]
pub enum ProblemError {
    #[error("{0}")]
    Shape(String),
    #[error("coupling infeasible: mu = {mu} but off-diagonal norm {norm} requires mu > 2*norm")]
    InfeasibleCoupling { mu: f64, norm: f64 },
    #[error("certification failed for block {block}: Hessian spectrum [{}, {}] outside [{}, {}]",
            .spectrum.0, .spectrum.1, .interval.0, .interval.1)]
    CertificationFailed {
        block: String,
        spectrum: (f64, f64),
        interval: (f64, f64),
    },
    #[error(transparent)]
    Constants(#[from] crate::block::BlockError),
}
