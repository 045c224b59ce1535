//! Accelerated first-order methods for two-block "min-min" strongly convex
//! problems, where the cost of a gradient oracle differs per block.
//!
//! The crate is organized around a block-structured oracle contract
//! ([`oracle::BlockObjective`]) that counts gradient calls separately for the
//! `x` and `y` blocks. On top of it live:
//!
//! * [`bam`] — the block accelerated method: an accelerated outer loop in `x`
//!   whose `y` update is an inexact proximal subproblem, together with the
//!   Lyapunov function and per-iteration descent/contraction diagnostics.
//! * [`inner`] — the inner subproblem machinery: the proximal auxiliary
//!   objective, the relative gradient-norm acceptance test, and the composite
//!   NAG + OGM-G solver with adaptive budget doubling.
//! * [`baselines`] — joint NAG, accelerated coordinate descent with
//!   square-root-of-smoothness block sampling, and a linear-coupling method,
//!   all over the same oracle contract.
//! * [`problems`] — seeded quadratic instances with controlled per-block
//!   spectra, L2-regularized logistic regression over LIBSVM data, and the
//!   strong-convexity regularization wrapper.
//! * [`harness`] — declarative experiment configs, CSV trace persistence,
//!   rate fitting, and runtime invariant-check suites.

pub mod bam;
pub mod baselines;
pub mod block;
pub mod fd;
pub mod harness;
pub mod inner;
pub mod oracle;
pub mod problems;
pub mod trace;

pub use block::{BlockConstants, BlockVector};
pub use oracle::{BlockObjective, CounterSnapshot, OracleCounters, OracleError};
pub use trace::{Reference, StoppingPolicy, Trace, TraceRow};
