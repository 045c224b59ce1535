//! The block accelerated method: an accelerated outer loop in the `x` block
//! whose `y` update is an inexact proximal subproblem solved to the relative
//! gradient-norm test, plus the Lyapunov function certifying its geometric
//! contraction and the per-iteration descent diagnostic.

use std::time::Instant;

use nalgebra::DVector;
use thiserror::Error;

use crate::block::{BlockConstants, BlockVector};
use crate::inner::{CompositeInner, InnerBudget, InnerError, InnerSolver};
use crate::oracle::{BlockObjective, OracleError};
use crate::trace::{Reference, StoppingPolicy, Trace, TraceError, TraceRow};
use crate::inner::AuxProblem;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Inner(#[from] InnerError),
    #[error(transparent)]
    Stopping(#[from] TraceError),
    #[error(transparent)]
    Constants(#[from] crate::block::BlockError),
    #[error("constants must be strongly convex in both blocks (mu_x = {mu_x}, mu_y = {mu_y})")]
    NotStronglyConvex { mu_x: f64, mu_y: f64 },
    #[error("safety cap of {cap} outer iterations reached before the stopping target")]
    SafetyCapExceeded { cap: usize },
}

/// The tuned scalars of the outer loop.
///
/// From the constants: `alpha = sqrt(mu_x / L_x)`,
/// `eta_x = 1 / sqrt(mu_x L_x)`, `eta_y = sqrt(mu_x / L_x) / mu_y`.
/// These satisfy `alpha * L_x * eta_x = 1`, the edge of the descent lemma's
/// validity region.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BamParams {
    pub alpha: f64,
    pub eta_x: f64,
    pub eta_y: f64,
}

impl BamParams {
    /// Weight of the proximal term in the inner subproblem: `(eta_y alpha)^-1`.
    pub fn rho(&self) -> f64 {
        1.0 / (self.eta_y * self.alpha)
    }
}

/// Evaluates the parameter formulas; requires strongly convex constants.
pub fn compute_parameters(c: &BlockConstants) -> Result<BamParams, SolverError> {
    c.validate()?;
    if !c.is_strongly_convex() {
        return Err(SolverError::NotStronglyConvex {
            mu_x: c.mu_x,
            mu_y: c.mu_y,
        });
    }
    Ok(BamParams {
        alpha: (c.mu_x / c.l_x).sqrt(),
        eta_x: 1.0 / (c.mu_x * c.l_x).sqrt(),
        eta_y: (c.mu_x / c.l_x).sqrt() / c.mu_y,
    })
}

/// Iterate quadruple of the outer loop, plus the last extrapolation point for
/// diagnostics.
#[derive(Debug, Clone)]
pub struct BamState {
    pub k: u64,
    /// Momentum iterates `x^k`, `y^k`.
    pub x: DVector<f64>,
    pub y: DVector<f64>,
    /// Anchor iterates `x_bar^k`, `y_bar^k`.
    pub x_bar: DVector<f64>,
    pub y_bar: DVector<f64>,
    /// Extrapolation point of the step that produced this state.
    pub last_under: Option<(DVector<f64>, DVector<f64>)>,
}

impl BamState {
    /// Initial state: momentum and anchor iterates coincide with the start.
    pub fn new(start: &BlockVector) -> Self {
        Self {
            k: 0,
            x: start.x.clone(),
            y: start.y.clone(),
            x_bar: start.x.clone(),
            y_bar: start.y.clone(),
            last_under: None,
        }
    }

    pub fn is_finite(&self) -> bool {
        let fin = |v: &DVector<f64>| v.iter().all(|x| x.is_finite());
        fin(&self.x) && fin(&self.y) && fin(&self.x_bar) && fin(&self.y_bar)
    }

    pub fn anchor(&self) -> BlockVector {
        BlockVector {
            x: self.x_bar.clone(),
            y: self.y_bar.clone(),
        }
    }
}

/// Convex combination `alpha * momentum + (1 - alpha) * anchor` per block.
pub fn extrapolate(state: &BamState, params: &BamParams) -> (DVector<f64>, DVector<f64>) {
    let a = params.alpha;
    (
        &state.x * a + &state.x_bar * (1.0 - a),
        &state.y * a + &state.y_bar * (1.0 - a),
    )
}

/// Resolves an update of the form `v+ = prev + alpha (pull - v+) - step_grad`
/// in closed form: `v+ = (prev + alpha pull - step_grad) / (1 + alpha)`.
pub(crate) fn resolve_implicit(
    prev: &DVector<f64>,
    pull: &DVector<f64>,
    step_grad: &DVector<f64>,
    alpha: f64,
) -> DVector<f64> {
    (prev + pull * alpha - step_grad) / (1.0 + alpha)
}

/// Everything a diagnostic needs to audit one outer step.
#[derive(Debug, Clone)]
pub struct StepReport {
    /// `grad_x f` at the extrapolation point and accepted inner iterate,
    /// shared by the anchor and momentum updates.
    pub g_x: DVector<f64>,
    /// Gradient calls spent by the inner solve (all counted on the y block).
    pub inner_calls: u64,
    pub inner_doublings: u32,
}

/// One outer iteration: extrapolate, solve the inner subproblem for the new
/// `y` anchor, take the `x` anchor gradient step, and resolve both implicit
/// momentum updates. Makes exactly one `grad_x` call; every `grad_y` call is
/// made by the inner solver.
pub fn bam_step(
    state: &BamState,
    problem: &dyn BlockObjective,
    params: &BamParams,
    inner: &dyn InnerSolver,
) -> Result<(BamState, StepReport), SolverError> {
    let (x_under, y_under) = extrapolate(state, params);
    let aux = AuxProblem::new(problem, x_under.clone(), y_under.clone(), params.rho());
    let sol = inner.solve(&aux)?;
    let y_bar_next = sol.y;
    let g_y = sol.grad_y_f;

    let probe = BlockVector {
        x: x_under.clone(),
        y: y_bar_next.clone(),
    };
    let g_x = problem.grad_x(&probe)?;

    let x_bar_next = &x_under - &g_x * (params.eta_x * params.alpha);
    let x_next = resolve_implicit(&state.x, &x_under, &(&g_x * params.eta_x), params.alpha);
    let y_next = resolve_implicit(&state.y, &y_bar_next, &(&g_y * params.eta_y), params.alpha);

    let next = BamState {
        k: state.k + 1,
        x: x_next,
        y: y_next,
        x_bar: x_bar_next,
        y_bar: y_bar_next,
        last_under: Some((x_under, y_under)),
    };
    if !next.is_finite() {
        return Err(OracleError::NonFiniteOutput { what: "iterate" }.into());
    }
    Ok((
        next,
        StepReport {
            g_x,
            inner_calls: sol.aux_grad_calls,
            inner_doublings: sol.doublings,
        },
    ))
}

/// The Lyapunov value and its components at one state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LyapunovReport {
    /// `(1 + alpha)(R_x / eta_x + R_y / eta_y) + (2 / alpha) f_gap`.
    pub psi: f64,
    pub r_x: f64,
    pub r_y: f64,
    pub f_gap: f64,
}

/// Evaluates the Lyapunov function against a reference optimum, on the
/// uncounted measurement channel.
pub fn lyapunov(
    state: &BamState,
    params: &BamParams,
    reference: &Reference,
    problem: &dyn BlockObjective,
) -> Result<LyapunovReport, OracleError> {
    let r_x = (&state.x - &reference.optimum.x).norm_squared();
    let r_y = (&state.y - &reference.optimum.y).norm_squared();
    let f_gap = problem.probe_value(&state.anchor())? - reference.f_star;
    Ok(LyapunovReport {
        psi: (1.0 + params.alpha) * (r_x / params.eta_x + r_y / params.eta_y)
            + (2.0 / params.alpha) * f_gap,
        r_x,
        r_y,
        f_gap,
    })
}

/// Residual of the descent inequality for one step:
/// `f(x_bar_next, y_bar_next) + (eta_x alpha / 2) ||g_x||^2 - f(x_under, y_bar_next)`,
/// nonpositive (up to roundoff) whenever `eta_x alpha L_x <= 1`.
pub fn check_lemma1(
    x_under: &DVector<f64>,
    y_bar_next: &DVector<f64>,
    g_x: &DVector<f64>,
    params: &BamParams,
    problem: &dyn BlockObjective,
) -> Result<f64, OracleError> {
    let x_bar_next = x_under - g_x * (params.eta_x * params.alpha);
    let moved = problem.probe_value(&BlockVector {
        x: x_bar_next,
        y: y_bar_next.clone(),
    })?;
    let base = problem.probe_value(&BlockVector {
        x: x_under.clone(),
        y: y_bar_next.clone(),
    })?;
    Ok(moved + 0.5 * params.eta_x * params.alpha * g_x.norm_squared() - base)
}

/// Options for a full run.
#[derive(Debug, Clone, Default)]
pub struct BamOptions {
    pub stop: StoppingPolicy,
    /// Record Lyapunov values, descent residuals and contraction ratios
    /// (needs a reference).
    pub diagnostics: bool,
    /// Inner budget override; derived from the parameters when absent.
    pub inner_budget: Option<InnerBudget>,
    /// Record every `stride`-th outer iteration (and always the last).
    pub stride: usize,
    /// Fill `wall_time_s` from a real clock instead of zeros.
    pub record_wall_time: bool,
}

/// A finished run: the trace plus the final state and tuned parameters.
#[derive(Debug, Clone)]
pub struct BamRun {
    pub trace: Trace,
    pub state: BamState,
    pub params: BamParams,
}

/// Runs the outer loop until the stopping policy is met.
///
/// The trace records, per outer iteration: the iteration number, both oracle
/// counters, and the objective gap at the anchor point; with diagnostics on,
/// also the Lyapunov value, the descent residual of the step, and the
/// step-to-step Lyapunov ratio. Measurements use the uncounted channel, so
/// counters reflect the algorithm alone.
pub fn run(
    problem: &dyn BlockObjective,
    start: &BlockVector,
    opts: &BamOptions,
    reference: Option<&Reference>,
) -> Result<BamRun, SolverError> {
    let constants = problem.constants();
    let params = compute_parameters(&constants)?;
    problem.check_point(start)?;
    opts.stop.validate(reference.is_some())?;
    if opts.diagnostics && reference.is_none() {
        return Err(TraceError::MissingReference.into());
    }
    let cap = opts
        .stop
        .safety_cap(constants.kappa_x())
        .expect("validated policy always yields a cap");
    let explicit_cap = opts.stop.max_outer.is_some();
    let stride = opts.stride.max(1);
    let budget = opts.inner_budget.unwrap_or_else(|| {
        InnerBudget::from_step_scale(params.eta_y * params.alpha, constants.l_y)
    });
    let inner = CompositeInner::new(budget);

    let clock = Instant::now();
    let mut trace = Trace::new(opts.diagnostics);
    let mut state = BamState::new(start);
    let mut psi_prev: Option<f64> = None;
    let mut psi_0: Option<f64> = None;

    loop {
        // Measure the current state.
        let f_value = problem.probe_value(&state.anchor())?;
        let f_gap = reference.map_or(f64::NAN, |r| f_value - r.f_star);
        let mut row = TraceRow {
            outer_iter: state.k,
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
        let need_psi = opts.diagnostics || opts.stop.psi_ratio.is_some();
        let mut psi_now = None;
        if need_psi {
            let report = lyapunov(&state, &params, reference.expect("validated above"), problem)?;
            psi_now = Some(report.psi);
            if opts.diagnostics {
                row.psi = psi_now;
                row.contraction_ratio = psi_prev.map(|p| report.psi / p);
            }
            if psi_0.is_none() {
                psi_0 = Some(report.psi);
            }
        }

        let mut done = false;
        if let (Some(target), Some(_)) = (opts.stop.f_gap, reference) {
            done |= f_gap <= target;
        }
        if let (Some(target), Some(psi)) = (opts.stop.psi_ratio, psi_now) {
            let base = psi_0.expect("psi_0 set with diagnostics");
            done |= base == 0.0 || psi / base <= target;
        }
        let record = done || state.k.is_multiple_of(stride as u64);

        if done {
            if record {
                trace.rows.push(row);
            }
            break;
        }
        if state.k as usize >= cap {
            if explicit_cap {
                trace.rows.push(row);
                break;
            }
            return Err(SolverError::SafetyCapExceeded { cap });
        }

        let (next, report) = bam_step(&state, problem, &params, &inner)?;
        if opts.diagnostics {
            let (x_under, _) = next.last_under.as_ref().expect("step caches extrapolation");
            row.lemma1_residual =
                Some(check_lemma1(x_under, &next.y_bar, &report.g_x, &params, problem)?);
        }
        if record {
            trace.rows.push(row);
        }
        psi_prev = psi_now;
        state = next;
    }

    Ok(BamRun {
        trace,
        state,
        params,
    })
}
