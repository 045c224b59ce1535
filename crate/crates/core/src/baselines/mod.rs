//! Comparison methods over the same oracle contract and counters: joint
//! accelerated gradient, accelerated randomized block-coordinate descent with
//! square-root-of-smoothness sampling, and a restarted linear-coupling
//! method.

pub mod acdm;
pub mod lincoupling;
pub mod nag;

pub use acdm::{acdm, Rescaling};
pub use lincoupling::lincoupling;
pub use nag::{nag, reference_run, JointView};

use nalgebra::DVector;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::block::BlockVector;
use crate::oracle::BlockObjective;
use crate::trace::Reference;

/// Common per-run knobs for the baselines.
#[derive(Debug, Clone, Copy, Default)]
pub struct BaselineOptions {
    /// Record every `stride`-th sampling instant (and always the last).
    pub stride: usize,
    /// Fill `wall_time_s` from a real clock instead of zeros.
    pub record_wall_time: bool,
}

/// Which block a randomized method drew.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Block {
    X,
    Y,
}

/// Draws a block with probability `p_x` for the `x` block.
pub(crate) fn sample_block(rng: &mut ChaCha8Rng, p_x: f64) -> Block {
    if rng.gen::<f64>() < p_x {
        Block::X
    } else {
        Block::Y
    }
}

pub(crate) fn f_gap_at(
    problem: &dyn BlockObjective,
    point: &BlockVector,
    reference: Option<&Reference>,
) -> Result<(f64, f64), crate::oracle::OracleError> {
    let v = problem.probe_value(point)?;
    Ok((v, reference.map_or(f64::NAN, |r| v - r.f_star)))
}

pub(crate) fn all_finite(v: &DVector<f64>) -> bool {
    v.iter().all(|x| x.is_finite())
}
