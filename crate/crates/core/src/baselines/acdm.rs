//! Accelerated randomized block-coordinate descent.
//!
//! The `y` block is first rescaled by `sqrt(mu_y / mu_x)` so both blocks
//! share the strong convexity `mu_x`; the method then samples a block with
//! probability proportional to the square root of its (rescaled) smoothness
//! and takes one block gradient step plus a weighted dual step. Per
//! iteration, exactly one block gradient is evaluated and counted.

use std::time::Instant;

use nalgebra::DVector;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::bam::SolverError;
use crate::block::{BlockConstants, BlockVector};
use crate::oracle::{BlockObjective, OracleError};
use crate::trace::{Reference, StoppingPolicy, Trace, TraceRow};

use super::{all_finite, sample_block, BaselineOptions, Block};

/// The change of variables `y' = scale * y` with `scale = sqrt(mu_y / mu_x)`,
/// which equalizes the strong convexity of both blocks at `mu_x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rescaling {
    pub scale: f64,
}

impl Rescaling {
    pub fn from_constants(c: &BlockConstants) -> Result<Self, SolverError> {
        if !c.is_strongly_convex() {
            return Err(SolverError::NotStronglyConvex {
                mu_x: c.mu_x,
                mu_y: c.mu_y,
            });
        }
        Ok(Self {
            scale: (c.mu_y / c.mu_x).sqrt(),
        })
    }

    /// Maps an original-coordinates `y` into the rescaled space.
    pub fn apply(&self, y: &DVector<f64>) -> DVector<f64> {
        y * self.scale
    }

    /// Maps a rescaled `y'` back to original coordinates.
    pub fn invert(&self, y_scaled: &DVector<f64>) -> DVector<f64> {
        y_scaled / self.scale
    }

    /// Smoothness of the rescaled `y` block: `L_y / scale^2 = L_y mu_x / mu_y`.
    pub fn l_y_rescaled(&self, c: &BlockConstants) -> f64 {
        c.l_y / (self.scale * self.scale)
    }
}

struct RescaledOracle<'a> {
    base: &'a dyn BlockObjective,
    rescaling: Rescaling,
}

impl RescaledOracle<'_> {
    fn original_point(&self, z: &BlockVector) -> BlockVector {
        BlockVector {
            x: z.x.clone(),
            y: self.rescaling.invert(&z.y),
        }
    }

    fn grad_x(&self, z: &BlockVector) -> Result<DVector<f64>, OracleError> {
        self.base.grad_x(&self.original_point(z))
    }

    /// Chain rule: `grad_{y'} f(x, y'/s) = (1/s) grad_y f`; still one counted
    /// `grad_y` call.
    fn grad_y(&self, z: &BlockVector) -> Result<DVector<f64>, OracleError> {
        Ok(self.base.grad_y(&self.original_point(z))? / self.rescaling.scale)
    }
}

/// Runs the method from `start` (original coordinates) with the given seed.
/// Sampling instants for the trace are epochs of `d_x + d_y` block draws.
pub fn acdm(
    problem: &dyn BlockObjective,
    start: &BlockVector,
    stop: &StoppingPolicy,
    seed: u64,
    reference: Option<&Reference>,
    opts: &BaselineOptions,
) -> Result<Trace, SolverError> {
    randomized_block_run(problem, start, stop, seed, reference, opts, Scheme::Acdm)
}

pub(crate) enum Scheme {
    Acdm,
    LinCoupling,
}

/// Shared driver for the two randomized block baselines; they differ only in
/// how one iteration updates the coupled sequences.
pub(crate) fn randomized_block_run(
    problem: &dyn BlockObjective,
    start: &BlockVector,
    stop: &StoppingPolicy,
    seed: u64,
    reference: Option<&Reference>,
    opts: &BaselineOptions,
    scheme: Scheme,
) -> Result<Trace, SolverError> {
    let constants = problem.constants();
    let rescaling = Rescaling::from_constants(&constants)?;
    problem.check_point(start)?;
    stop.validate(reference.is_some())?;
    if stop.psi_ratio.is_some() {
        return Err(crate::trace::TraceError::EmptyPolicy.into());
    }

    let oracle = RescaledOracle {
        base: problem,
        rescaling,
    };
    let mu = constants.mu_x;
    let l_x = constants.l_x;
    let l_y = rescaling.l_y_rescaled(&constants);
    let s_total = l_x.sqrt() + l_y.sqrt();
    let p_x = l_x.sqrt() / s_total;

    // Iteration caps are counted in block draws.
    let kappa_sum = constants.kappa_x().sqrt() + constants.kappa_y().sqrt();
    let cap = if let Some(k) = stop.max_outer {
        k
    } else {
        let eps = stop.tightest_eps().expect("validated policy has a target");
        (10.0 * kappa_sum * (1.0 / eps).ln().max(1.0)).ceil() as usize
    };
    let explicit_cap = stop.max_outer.is_some();
    let epoch = problem.dim_x() + problem.dim_y();
    let stride_draws = (epoch * opts.stride.max(1)) as u64;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let clock = Instant::now();
    let mut trace = Trace::new(false);

    let z0 = BlockVector {
        x: start.x.clone(),
        y: rescaling.apply(&start.y),
    };
    let mut primal = z0.clone();
    let mut dual = z0;
    let mut k: u64 = 0;

    // ACDM constant-step parameters (see module derivation): with
    // theta = sqrt(mu) / S and eta = 1 / (theta S^2), the dual damping
    // eta * mu equals theta and the expected contraction is 1 / (1 + theta).
    let theta = mu.sqrt() / s_total;
    let eta = 1.0 / (theta * s_total * s_total);
    // Linear-coupling restart length: gap halves every ceil(2 sqrt(2) S /
    // sqrt(mu)) draws when restarted from the current primal point.
    let restart_len = (2.0 * 2.0f64.sqrt() * s_total / mu.sqrt()).ceil() as u64;
    let mut since_restart: u64 = 0;

    loop {
        let original = oracle.original_point(&primal);
        let (f_value, f_gap) = super::f_gap_at(problem, &original, reference)?;
        let row = TraceRow {
            outer_iter: k,
            grad_x_calls: problem.counters().snapshot().grad_x_calls,
            grad_y_calls: problem.counters().snapshot().grad_y_calls,
            f_value,
            f_gap,
            wall_time_s: if opts.record_wall_time {
                clock.elapsed().as_secs_f64()
            } else {
                0.0
            },
            psi: None,
            lemma1_residual: None,
            contraction_ratio: None,
        };
        let done = stop.f_gap.is_some_and(|eps| f_gap <= eps);
        if done || k.is_multiple_of(stride_draws) {
            trace.rows.push(row);
        }
        if done {
            break;
        }
        if k as usize >= cap {
            if explicit_cap {
                if !k.is_multiple_of(stride_draws) {
                    trace.rows.push(row);
                }
                break;
            }
            return Err(SolverError::SafetyCapExceeded { cap });
        }

        // One epoch of draws between sampling instants.
        for _ in 0..epoch.min(cap.saturating_sub(k as usize).max(1)) {
            match scheme {
                Scheme::Acdm => acdm_iteration(
                    &oracle,
                    &mut primal,
                    &mut dual,
                    &mut rng,
                    (p_x, l_x, l_y),
                    (theta, eta, mu),
                )?,
                Scheme::LinCoupling => {
                    lc_iteration(
                        &oracle,
                        &mut primal,
                        &mut dual,
                        &mut rng,
                        (p_x, l_x, l_y),
                        s_total,
                        since_restart,
                    )?;
                    since_restart += 1;
                    if since_restart >= restart_len {
                        dual = primal.clone();
                        since_restart = 0;
                    }
                }
            }
            if !all_finite(&primal.x) || !all_finite(&primal.y) {
                return Err(OracleError::NonFiniteOutput { what: "iterate" }.into());
            }
            k += 1;
        }
    }
    Ok(trace)
}

fn acdm_iteration(
    oracle: &RescaledOracle,
    primal: &mut BlockVector,
    dual: &mut BlockVector,
    rng: &mut ChaCha8Rng,
    (p_x, l_x, l_y): (f64, f64, f64),
    (theta, eta, mu): (f64, f64, f64),
) -> Result<(), SolverError> {
    // coupling point
    let probe = BlockVector {
        x: &primal.x * (1.0 - theta) + &dual.x * theta,
        y: &primal.y * (1.0 - theta) + &dual.y * theta,
    };
    let damp = 1.0 + eta * mu;
    let block = sample_block(rng, p_x);
    // full-vector part of the dual step
    dual.x = (&dual.x + &probe.x * (eta * mu)) / damp;
    dual.y = (&dual.y + &probe.y * (eta * mu)) / damp;
    match block {
        Block::X => {
            let g = oracle.grad_x(&probe)?;
            primal.y = probe.y.clone();
            primal.x = &probe.x - &g * (1.0 / l_x);
            dual.x -= &g * (eta / p_x / damp);
        }
        Block::Y => {
            let g = oracle.grad_y(&probe)?;
            primal.x = probe.x.clone();
            primal.y = &probe.y - &g * (1.0 / l_y);
            dual.y -= &g * (eta / (1.0 - p_x) / damp);
        }
    }
    Ok(())
}

/// One linear-coupling iteration: gradient step into the primal sequence,
/// mirror step into the dual, with the classical `tau_k = 2 / (k + 2)`,
/// `a_{k+1} = (k + 2) / (2 S^2)` schedule (restart clock `k`).
fn lc_iteration(
    oracle: &RescaledOracle,
    primal: &mut BlockVector,
    dual: &mut BlockVector,
    rng: &mut ChaCha8Rng,
    (p_x, l_x, l_y): (f64, f64, f64),
    s_total: f64,
    k_since_restart: u64,
) -> Result<(), SolverError> {
    let kf = k_since_restart as f64;
    let tau = 2.0 / (kf + 2.0);
    let a_next = (kf + 2.0) / (2.0 * s_total * s_total);
    let probe = BlockVector {
        x: &primal.x * (1.0 - tau) + &dual.x * tau,
        y: &primal.y * (1.0 - tau) + &dual.y * tau,
    };
    let block = sample_block(rng, p_x);
    match block {
        Block::X => {
            let g = oracle.grad_x(&probe)?;
            primal.y = probe.y.clone();
            primal.x = &probe.x - &g * (1.0 / l_x);
            dual.x -= &g * (a_next / p_x);
        }
        Block::Y => {
            let g = oracle.grad_y(&probe)?;
            primal.x = probe.x.clone();
            primal.y = &probe.y - &g * (1.0 / l_y);
            dual.y -= &g * (a_next / (1.0 - p_x));
        }
    }
    Ok(())
}
