//! The block oracle contract: objective evaluation, per-block gradients, and
//! exact per-block call accounting.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use std::sync::atomic::{AtomicU64, Ordering};
use thiserror::Error;

use crate::block::{BlockConstants, BlockVector};

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("dimension mismatch: problem is ({dx}, {dy}), point is ({px}, {py})")]
    DimensionMismatch {
        dx: usize,
        dy: usize,
        px: usize,
        py: usize,
    },
    #[error("oracle produced a non-finite {what} at a finite point")]
    NonFiniteOutput { what: &'static str },
    #[error("non-finite entries in query point")]
    NonFiniteInput,
}

/// Monotone per-block oracle call counters.
///
/// Counters sit next to the problem instance and are bumped through `&self`
/// so that immutable problem handles can be shared; increments are atomic.
#[derive(Debug, Default)]
pub struct OracleCounters {
    grad_x_calls: AtomicU64,
    grad_y_calls: AtomicU64,
    eval_calls: AtomicU64,
}

/// Immutable copy of the counters at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CounterSnapshot {
    pub grad_x_calls: u64,
    pub grad_y_calls: u64,
    pub eval_calls: u64,
}

impl OracleCounters {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_grad_x(&self) {
        self.grad_x_calls.fetch_add(1, Ordering::Relaxed);
    }

    pub fn add_grad_y(&self) {
        self.grad_y_calls.fetch_add(1, Ordering::Relaxed);
    }

    pub fn add_eval(&self) {
        self.eval_calls.fetch_add(1, Ordering::Relaxed);
    }

    pub fn snapshot(&self) -> CounterSnapshot {
        CounterSnapshot {
            grad_x_calls: self.grad_x_calls.load(Ordering::Relaxed),
            grad_y_calls: self.grad_y_calls.load(Ordering::Relaxed),
            eval_calls: self.eval_calls.load(Ordering::Relaxed),
        }
    }

    pub fn reset(&self) {
        self.grad_x_calls.store(0, Ordering::Relaxed);
        self.grad_y_calls.store(0, Ordering::Relaxed);
        self.eval_calls.store(0, Ordering::Relaxed);
    }
}

impl Clone for OracleCounters {
    fn clone(&self) -> Self {
        let s = self.snapshot();
        Self {
            grad_x_calls: AtomicU64::new(s.grad_x_calls),
            grad_y_calls: AtomicU64::new(s.grad_y_calls),
            eval_calls: AtomicU64::new(s.eval_calls),
        }
    }
}

/// A block-structured objective with certified constants and counted oracles.
///
/// Implementors provide the raw value/gradient kernels; the provided methods
/// add dimension checks, finiteness checks and call counting. Solvers must go
/// through the counted entry points ([`eval`](Self::eval),
/// [`grad_x`](Self::grad_x), [`grad_y`](Self::grad_y)). Measurements that must
/// not distort complexity accounting (traces, Lyapunov values, residual
/// checks) use the uncounted [`probe_value`](Self::probe_value) channel.
pub trait BlockObjective: Send + Sync {
    fn dim_x(&self) -> usize;
    fn dim_y(&self) -> usize;
    fn constants(&self) -> BlockConstants;
    fn counters(&self) -> &OracleCounters;

    fn eval_raw(&self, p: &BlockVector) -> f64;
    fn grad_x_raw(&self, p: &BlockVector) -> DVector<f64>;
    fn grad_y_raw(&self, p: &BlockVector) -> DVector<f64>;

    fn check_point(&self, p: &BlockVector) -> Result<(), OracleError> {
        if p.dim_x() != self.dim_x() || p.dim_y() != self.dim_y() {
            return Err(OracleError::DimensionMismatch {
                dx: self.dim_x(),
                dy: self.dim_y(),
                px: p.dim_x(),
                py: p.dim_y(),
            });
        }
        if !p.is_finite() {
            return Err(OracleError::NonFiniteInput);
        }
        Ok(())
    }

    /// Objective value; counts one evaluation call.
    fn eval(&self, p: &BlockVector) -> Result<f64, OracleError> {
        self.check_point(p)?;
        let v = self.eval_raw(p);
        self.counters().add_eval();
        if !v.is_finite() {
            return Err(OracleError::NonFiniteOutput { what: "value" });
        }
        Ok(v)
    }

    /// Partial gradient in the `x` block; counts one `grad_x` call.
    fn grad_x(&self, p: &BlockVector) -> Result<DVector<f64>, OracleError> {
        self.check_point(p)?;
        let g = self.grad_x_raw(p);
        self.counters().add_grad_x();
        if !g.iter().all(|v| v.is_finite()) {
            return Err(OracleError::NonFiniteOutput { what: "x-gradient" });
        }
        Ok(g)
    }

    /// Partial gradient in the `y` block; counts one `grad_y` call.
    fn grad_y(&self, p: &BlockVector) -> Result<DVector<f64>, OracleError> {
        self.check_point(p)?;
        let g = self.grad_y_raw(p);
        self.counters().add_grad_y();
        if !g.iter().all(|v| v.is_finite()) {
            return Err(OracleError::NonFiniteOutput { what: "y-gradient" });
        }
        Ok(g)
    }

    /// Objective value on the uncounted measurement channel.
    fn probe_value(&self, p: &BlockVector) -> Result<f64, OracleError> {
        self.check_point(p)?;
        let v = self.eval_raw(p);
        if !v.is_finite() {
            return Err(OracleError::NonFiniteOutput { what: "value" });
        }
        Ok(v)
    }
}

/// Instrumented decorator that independently tallies the calls it forwards.
///
/// Used by counter-discipline checks to confirm that a problem's own counters
/// agree with what actually flowed through the oracle.
pub struct CountingProbe<'a> {
    inner: &'a dyn BlockObjective,
    counters: OracleCounters,
}

impl<'a> CountingProbe<'a> {
    pub fn new(inner: &'a dyn BlockObjective) -> Self {
        Self {
            inner,
            counters: OracleCounters::new(),
        }
    }

    /// The decorator's independent tally (not the wrapped problem's).
    pub fn observed(&self) -> CounterSnapshot {
        self.counters.snapshot()
    }
}

impl BlockObjective for CountingProbe<'_> {
    fn dim_x(&self) -> usize {
        self.inner.dim_x()
    }

    fn dim_y(&self) -> usize {
        self.inner.dim_y()
    }

    fn constants(&self) -> BlockConstants {
        self.inner.constants()
    }

    fn counters(&self) -> &OracleCounters {
        &self.counters
    }

    fn eval_raw(&self, p: &BlockVector) -> f64 {
        self.inner.eval_raw(p)
    }

    fn grad_x_raw(&self, p: &BlockVector) -> DVector<f64> {
        self.inner.grad_x_raw(p)
    }

    fn grad_y_raw(&self, p: &BlockVector) -> DVector<f64> {
        self.inner.grad_y_raw(p)
    }
}

/// Adapter that reports different constants for an existing problem.
///
/// Intended for fault-injection checks (feeding a solver deliberately wrong
/// constants) and for what-if experiments; the underlying oracles and the
/// underlying problem's counters are untouched.
pub struct ConstantsOverride<'a> {
    inner: &'a dyn BlockObjective,
    constants: BlockConstants,
}

impl<'a> ConstantsOverride<'a> {
    pub fn new(inner: &'a dyn BlockObjective, constants: BlockConstants) -> Self {
        Self { inner, constants }
    }
}

impl BlockObjective for ConstantsOverride<'_> {
    fn dim_x(&self) -> usize {
        self.inner.dim_x()
    }

    fn dim_y(&self) -> usize {
        self.inner.dim_y()
    }

    fn constants(&self) -> BlockConstants {
        self.constants
    }

    fn counters(&self) -> &OracleCounters {
        self.inner.counters()
    }

    fn eval_raw(&self, p: &BlockVector) -> f64 {
        self.inner.eval_raw(p)
    }

    fn grad_x_raw(&self, p: &BlockVector) -> DVector<f64> {
        self.inner.grad_x_raw(p)
    }

    fn grad_y_raw(&self, p: &BlockVector) -> DVector<f64> {
        self.inner.grad_y_raw(p)
    }
}
