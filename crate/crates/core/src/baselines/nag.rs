//! Joint accelerated gradient over the concatenated variable: momentum
//! `(sqrt(kappa) - 1) / (sqrt(kappa) + 1)` with `kappa = L_joint / mu_joint`,
//! stepsize `1 / L_joint`. Each step costs one `grad_x` and one `grad_y`
//! call (the joint gradient).

use std::time::Instant;

use crate::bam::SolverError;
use crate::block::BlockVector;
use crate::oracle::{BlockObjective, OracleError};
use crate::trace::{Reference, StoppingPolicy, Trace, TraceRow};

use super::{all_finite, BaselineOptions};

/// A block objective seen as a single function of the concatenated variable.
pub struct JointView<'a> {
    base: &'a dyn BlockObjective,
}

impl<'a> JointView<'a> {
    pub fn new(base: &'a dyn BlockObjective) -> Self {
        Self { base }
    }

    pub fn l_joint(&self) -> f64 {
        self.base.constants().l_joint()
    }

    pub fn mu_joint(&self) -> f64 {
        self.base.constants().mu_joint()
    }

    /// Joint gradient; one counted call per block.
    pub fn grad(&self, p: &BlockVector) -> Result<BlockVector, OracleError> {
        Ok(BlockVector {
            x: self.base.grad_x(p)?,
            y: self.base.grad_y(p)?,
        })
    }
}

/// Runs joint NAG until the stopping policy is met.
pub fn nag(
    problem: &dyn BlockObjective,
    start: &BlockVector,
    stop: &StoppingPolicy,
    reference: Option<&Reference>,
    opts: &BaselineOptions,
) -> Result<Trace, SolverError> {
    let joint = JointView::new(problem);
    let mu = joint.mu_joint();
    if mu <= 0.0 {
        return Err(SolverError::NotStronglyConvex {
            mu_x: problem.constants().mu_x,
            mu_y: problem.constants().mu_y,
        });
    }
    problem.check_point(start)?;
    stop.validate(reference.is_some())?;
    if stop.psi_ratio.is_some() {
        return Err(crate::trace::TraceError::EmptyPolicy.into());
    }
    let kappa = joint.l_joint() / mu;
    let cap = stop
        .safety_cap(kappa)
        .expect("validated policy always yields a cap");
    let explicit_cap = stop.max_outer.is_some();
    let stride = opts.stride.max(1);

    let gamma = 1.0 / joint.l_joint();
    let beta = (kappa.sqrt() - 1.0) / (kappa.sqrt() + 1.0);

    let clock = Instant::now();
    let mut trace = Trace::new(false);
    let mut z = start.clone();
    let mut v = start.clone();
    let mut k: u64 = 0;

    loop {
        let (f_value, f_gap) = super::f_gap_at(problem, &z, reference)?;
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
        if done || k.is_multiple_of(stride as u64) {
            trace.rows.push(row);
        }
        if done {
            break;
        }
        if k as usize >= cap {
            if explicit_cap {
                if !k.is_multiple_of(stride as u64) {
                    trace.rows.push(row);
                }
                break;
            }
            return Err(SolverError::SafetyCapExceeded { cap });
        }

        let g = joint.grad(&v)?;
        let z_next = BlockVector {
            x: &v.x - &g.x * gamma,
            y: &v.y - &g.y * gamma,
        };
        v = BlockVector {
            x: &z_next.x + (&z_next.x - &z.x) * beta,
            y: &z_next.y + (&z_next.y - &z.y) * beta,
        };
        if !all_finite(&v.x) || !all_finite(&v.y) {
            return Err(OracleError::NonFiniteOutput { what: "iterate" }.into());
        }
        z = z_next;
        k += 1;
    }
    Ok(trace)
}

/// High-accuracy reference optimum by a long NAG run on the uncounted
/// channel, stopped by the certified gap bound
/// `||grad f(v)||^2 / (2 mu) <= tol`.
///
/// Strong convexity turns the observed gradient norm into a rigorous bound
/// on the remaining function gap, so no prior reference is needed.
pub fn reference_run(
    problem: &dyn BlockObjective,
    start: &BlockVector,
    tol: f64,
) -> Result<Reference, SolverError> {
    let c = problem.constants();
    let mu = c.mu_joint();
    if mu <= 0.0 {
        return Err(SolverError::NotStronglyConvex {
            mu_x: c.mu_x,
            mu_y: c.mu_y,
        });
    }
    problem.check_point(start)?;
    let kappa = c.l_joint() / mu;
    let gamma = 1.0 / c.l_joint();
    let beta = (kappa.sqrt() - 1.0) / (kappa.sqrt() + 1.0);
    // Gradient-norm certificates need more iterations than gap targets; give
    // the cap generous extra log-kappa headroom.
    let cap = (20.0 * kappa.sqrt() * ((1.0 / tol).ln() + kappa.ln()).max(1.0)).ceil() as u64;

    let mut z = start.clone();
    let mut v = start.clone();
    let mut best: Option<(f64, BlockVector)> = None;
    for _ in 0..cap {
        let gx = problem.grad_x_raw(&v);
        let gy = problem.grad_y_raw(&v);
        if !all_finite(&gx) || !all_finite(&gy) {
            return Err(OracleError::NonFiniteOutput { what: "gradient" }.into());
        }
        let grad_sq = gx.norm_squared() + gy.norm_squared();
        let certified = grad_sq / (2.0 * mu);
        let f_v = problem.probe_value(&v)?;
        if best.as_ref().is_none_or(|(fb, _)| f_v < *fb) {
            best = Some((f_v, v.clone()));
        }
        if certified <= tol * (1.0 + f_v.abs()) {
            // f(v) overestimates f* by at most `certified`.
            return Ok(Reference {
                optimum: v,
                f_star: f_v - certified,
            });
        }
        let z_next = BlockVector {
            x: &v.x - &gx * gamma,
            y: &v.y - &gy * gamma,
        };
        v = BlockVector {
            x: &z_next.x + (&z_next.x - &z.x) * beta,
            y: &z_next.y + (&z_next.y - &z.y) * beta,
        };
        z = z_next;
    }
    Err(SolverError::SafetyCapExceeded { cap: cap as usize })
}
