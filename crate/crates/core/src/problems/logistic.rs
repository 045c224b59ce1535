//! Two-block L2-regularized logistic regression over a LIBSVM dataset:
//! `f(x, y) = (1/n) sum log(1 + exp(-label <features, (x, y)>))
//!            + lambda_x ||x||^2 + lambda_y ||y||^2`,
//! where the first `d_x` feature coordinates form the `x` block and the next
//! `d_y` the `y` block (remaining features are dropped).

use nalgebra::DVector;

use crate::block::{BlockConstants, BlockVector};
use crate::oracle::{BlockObjective, OracleCounters};
use crate::problems::libsvm::LibsvmDataset;
use crate::problems::ProblemError;

/// Power-iteration relative tolerance for the data smoothness estimate.
const POWER_TOL: f64 = 1e-6;
const POWER_MAX_ITERS: usize = 20_000;

#[derive(Debug, Clone)]
pub struct LogisticProblem {
    /// Per-sample sparse features restricted to the first `d_x + d_y`
    /// coordinates, with the label already folded in (entries are
    /// `-label * value`).
    rows: Vec<Vec<(usize, f64)>>,
    n_samples: usize,
    d_x: usize,
    d_y: usize,
    lambda_x: f64,
    lambda_y: f64,
    constants: BlockConstants,
    l_data: f64,
    counters: OracleCounters,
}

/// `log(1 + exp(t))` without overflow.
fn log1p_exp(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

/// Logistic sigmoid `1 / (1 + exp(-t))`.
fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// Builds a logistic problem over the first `d_x + d_y` feature coordinates.
///
/// Constants follow from the composition rule: the data term is `L_data`
/// smooth (jointly), and `lambda ||.||^2` adds `2 lambda` of curvature, so
/// `mu = 2 lambda` and `L = L_data + 2 lambda` per block. Pass `l_data` to
/// reuse a known data smoothness bound, otherwise it is estimated by power
/// iteration.
pub fn make_logistic(
    data: &LibsvmDataset,
    d_x: usize,
    d_y: usize,
    lambda_x: f64,
    lambda_y: f64,
    l_data: Option<f64>,
) -> Result<LogisticProblem, ProblemError> {
    if d_x == 0 || d_y == 0 {
        return Err(ProblemError::Shape(format!(
            "block dimensions must be positive, got ({d_x}, {d_y})"
        )));
    }
    if d_x + d_y > data.n_features {
        return Err(ProblemError::Shape(format!(
            "block split {d_x} + {d_y} exceeds the dataset's {} features",
            data.n_features
        )));
    }
    if !(lambda_x >= 0.0 && lambda_y >= 0.0) {
        return Err(ProblemError::Shape(
            "regularization weights must be nonnegative".into(),
        ));
    }
    let l_data = match l_data {
        Some(v) if v > 0.0 => v,
        Some(v) => {
            return Err(ProblemError::Shape(format!(
                "supplied data smoothness {v} must be positive"
            )))
        }
        None => estimate_smoothness(data)?,
    };
    let keep = d_x + d_y;
    let rows: Vec<Vec<(usize, f64)>> = data
        .rows
        .iter()
        .map(|r| {
            r.features
                .iter()
                .filter(|(idx, _)| *idx < keep)
                .map(|&(idx, val)| (idx, -r.label * val))
                .collect()
        })
        .collect();
    let constants = BlockConstants::new(
        l_data + 2.0 * lambda_x,
        l_data + 2.0 * lambda_y,
        2.0 * lambda_x,
        2.0 * lambda_y,
    )?;
    Ok(LogisticProblem {
        n_samples: rows.len(),
        rows,
        d_x,
        d_y,
        lambda_x,
        lambda_y,
        constants,
        l_data,
        counters: OracleCounters::new(),
    })
}

/// Estimates the logistic data smoothness `lambda_max(X' X) / (4 n)` by power
/// iteration on the sparse feature matrix.
pub fn estimate_smoothness(data: &LibsvmDataset) -> Result<f64, ProblemError> {
    if data.rows.is_empty() {
        return Err(ProblemError::Shape("dataset is empty".into()));
    }
    let n = data.rows.len();
    let d = data.n_features.max(1);
    // X' X v in two sparse passes.
    let gram_apply = |v: &DVector<f64>| -> DVector<f64> {
        let mut xv = vec![0.0f64; n];
        for (i, row) in data.rows.iter().enumerate() {
            let mut s = 0.0;
            for &(idx, val) in &row.features {
                s += val * v[idx];
            }
            xv[i] = s;
        }
        let mut out = DVector::zeros(d);
        for (i, row) in data.rows.iter().enumerate() {
            let s = xv[i];
            for &(idx, val) in &row.features {
                out[idx] += val * s;
            }
        }
        out
    };
    let mut v = DVector::from_element(d, 1.0 / (d as f64).sqrt());
    let mut lambda = 0.0f64;
    for _ in 0..POWER_MAX_ITERS {
        let w = gram_apply(&v);
        let norm = w.norm();
        if norm == 0.0 {
            // Feature matrix is zero; the data term contributes no curvature.
            return Err(ProblemError::Shape(
                "feature matrix is identically zero".into(),
            ));
        }
        let next = w / norm;
        let new_lambda = next.dot(&gram_apply(&next));
        let done = (new_lambda - lambda).abs() <= POWER_TOL * new_lambda.max(f64::MIN_POSITIVE);
        v = next;
        lambda = new_lambda;
        if done {
            break;
        }
    }
    Ok(lambda / (4.0 * n as f64))
}

impl LogisticProblem {
    pub fn lambda_x(&self) -> f64 {
        self.lambda_x
    }

    pub fn lambda_y(&self) -> f64 {
        self.lambda_y
    }

    /// The data smoothness bound used for the certified constants.
    pub fn l_data(&self) -> f64 {
        self.l_data
    }

    /// Margins `-label * <features, w>` for each sample.
    fn margins(&self, p: &BlockVector) -> Vec<f64> {
        self.rows
            .iter()
            .map(|row| {
                let mut m = 0.0;
                for &(idx, val) in row {
                    m += val
                        * if idx < self.d_x {
                            p.x[idx]
                        } else {
                            p.y[idx - self.d_x]
                        };
                }
                m
            })
            .collect()
    }
}

impl BlockObjective for LogisticProblem {
    fn dim_x(&self) -> usize {
        self.d_x
    }

    fn dim_y(&self) -> usize {
        self.d_y
    }

    fn constants(&self) -> BlockConstants {
        self.constants
    }

    fn counters(&self) -> &OracleCounters {
        &self.counters
    }

    fn eval_raw(&self, p: &BlockVector) -> f64 {
        let loss: f64 = self.margins(p).iter().map(|&m| log1p_exp(m)).sum();
        loss / self.n_samples as f64
            + self.lambda_x * p.x.norm_squared()
            + self.lambda_y * p.y.norm_squared()
    }

    fn grad_x_raw(&self, p: &BlockVector) -> DVector<f64> {
        self.full_gradient(p).0
    }

    fn grad_y_raw(&self, p: &BlockVector) -> DVector<f64> {
        self.full_gradient(p).1
    }
}

impl LogisticProblem {
    fn full_gradient(&self, p: &BlockVector) -> (DVector<f64>, DVector<f64>) {
        let margins = self.margins(p);
        let inv_n = 1.0 / self.n_samples as f64;
        let mut gx = &p.x * (2.0 * self.lambda_x);
        let mut gy = &p.y * (2.0 * self.lambda_y);
        for (row, &m) in self.rows.iter().zip(margins.iter()) {
            let w = sigmoid(m) * inv_n;
            for &(idx, val) in row {
                if idx < self.d_x {
                    gx[idx] += w * val;
                } else {
                    gy[idx - self.d_x] += w * val;
                }
            }
        }
        (gx, gy)
    }
}
