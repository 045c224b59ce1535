//! The inner subproblem: minimize the proximal auxiliary objective
//! `A(y) = f(x_under, y) + (rho/2) ||y - y_center||^2` far enough that the
//! relative gradient-norm test `||grad A(y)|| <= rho ||y - y_center||` holds.
//!
//! The solver is a composite strategy: accelerated gradient (NAG) for the
//! first half of an iteration budget to shrink the function gap, then the
//! gradient-norm-optimal OGM-G for the second half to convert the gap into a
//! small gradient. Because the constant in OGM-G's `O(1/N^2)` rate is not
//! known a priori, the budget doubles adaptively until the test passes.

use nalgebra::DVector;
use thiserror::Error;

use crate::block::BlockVector;
use crate::oracle::{BlockObjective, OracleError};

/// Default scale for the absolute criterion floor guarding the degenerate
/// case `y = y_center` (where the test reads `0 <= 0`).
const ABS_FLOOR_SCALE: f64 = 1e-13;

#[derive(Debug, Error)]
pub enum InnerError {
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error("OGM-G schedule needs at least one step")]
    EmptySchedule,
    #[error(
        "inner budget exhausted after {attempts} attempts (last N = {last_n}, {grad_calls} gradient calls): best criterion ratio {best_ratio}"
    )]
    BudgetExhausted {
        attempts: u32,
        last_n: usize,
        grad_calls: u64,
        best_ratio: f64,
        best_candidate: Box<DVector<f64>>,
    },
    #[error("non-finite iterate during inner solve")]
    NonFinite,
}

/// The proximal auxiliary objective for one outer step.
pub struct AuxProblem<'a> {
    base: &'a dyn BlockObjective,
    x_under: DVector<f64>,
    y_center: DVector<f64>,
    rho: f64,
    abs_floor: f64,
}

impl<'a> AuxProblem<'a> {
    pub fn new(
        base: &'a dyn BlockObjective,
        x_under: DVector<f64>,
        y_center: DVector<f64>,
        rho: f64,
    ) -> Self {
        let abs_floor = ABS_FLOOR_SCALE * (1.0 + y_center.norm());
        Self {
            base,
            x_under,
            y_center,
            rho,
            abs_floor,
        }
    }

    pub fn with_abs_floor(mut self, abs_floor: f64) -> Self {
        self.abs_floor = abs_floor;
        self
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn y_center(&self) -> &DVector<f64> {
        &self.y_center
    }

    pub fn abs_floor(&self) -> f64 {
        self.abs_floor
    }

    /// Smoothness of the auxiliary objective: `L_y + rho`.
    pub fn smoothness(&self) -> f64 {
        self.base.constants().l_y + self.rho
    }

    fn point(&self, y: &DVector<f64>) -> BlockVector {
        BlockVector {
            x: self.x_under.clone(),
            y: y.clone(),
        }
    }

    /// `A(y)`; costs one counted objective evaluation.
    pub fn value(&self, y: &DVector<f64>) -> Result<f64, OracleError> {
        let f = self.base.eval(&self.point(y))?;
        Ok(f + 0.5 * self.rho * (y - &self.y_center).norm_squared())
    }

    /// `grad A(y)`; costs exactly one counted `grad_y` call.
    pub fn grad(&self, y: &DVector<f64>) -> Result<DVector<f64>, OracleError> {
        Ok(self.grad_split(y)?.0)
    }

    /// `(grad A(y), grad_y f(x_under, y))` from the same single oracle call.
    pub fn grad_split(&self, y: &DVector<f64>) -> Result<(DVector<f64>, DVector<f64>), OracleError> {
        let g_base = self.base.grad_y(&self.point(y))?;
        let g_aux = &g_base + (y - &self.y_center) * self.rho;
        Ok((g_aux, g_base))
    }
}

/// The relative gradient-norm acceptance test:
/// `||g|| <= rho ||y - y_center|| + abs_floor * rho`.
pub fn check_criterion(g: &DVector<f64>, y: &DVector<f64>, aux: &AuxProblem) -> bool {
    criterion_ratio(g, y, aux) <= 1.0
}

/// Left-hand side over right-hand side of the acceptance test; `<= 1` passes.
pub fn criterion_ratio(g: &DVector<f64>, y: &DVector<f64>, aux: &AuxProblem) -> f64 {
    let rhs = aux.rho * (y - &aux.y_center).norm() + aux.abs_floor * aux.rho;
    g.norm() / rhs
}

/// The OGM-G coefficient ladder `theta_0 .. theta_N`:
/// `theta_N = 1`, `theta_i = (1 + sqrt(1 + 4 theta_{i+1}^2)) / 2` for
/// `1 <= i <= N-1`, and `theta_0 = (1 + sqrt(1 + 8 theta_1^2)) / 2`.
pub fn ogmg_thetas(n: usize) -> Result<Vec<f64>, InnerError> {
    if n == 0 {
        return Err(InnerError::EmptySchedule);
    }
    let mut thetas = vec![0.0f64; n + 1];
    thetas[n] = 1.0;
    for i in (1..n).rev() {
        let next = thetas[i + 1];
        thetas[i] = 0.5 * (1.0 + (1.0 + 4.0 * next * next).sqrt());
    }
    let t1 = thetas[1];
    thetas[0] = 0.5 * (1.0 + (1.0 + 8.0 * t1 * t1).sqrt());
    Ok(thetas)
}

/// A point at which a phase evaluated the gradient and found the acceptance
/// test satisfied.
struct Accepted {
    y: DVector<f64>,
    g_aux: DVector<f64>,
}

enum PhaseOutcome {
    /// Some evaluated iterate passed the acceptance test after this many
    /// gradient calls.
    Accepted(Accepted, u64),
    /// Phase ran its full budget without an acceptable iterate.
    Ran(DVector<f64>),
}

/// OGM-G steps with the two-coefficient momentum ladder. When `accept` is
/// set, the acceptance test is evaluated at every point whose gradient is
/// computed anyway, and the phase stops at the first pass.
fn ogmg_phase(
    aux: &AuxProblem,
    start: &DVector<f64>,
    n: usize,
    accept: bool,
) -> Result<PhaseOutcome, InnerError> {
    let thetas = ogmg_thetas(n)?;
    let gamma = 1.0 / aux.smoothness();
    let mut x = start.clone();
    let mut y_prev = start.clone();
    for i in 0..n {
        let g = aux.grad(&x)?;
        if accept && check_criterion(&g, &x, aux) {
            return Ok(PhaseOutcome::Accepted(Accepted { y: x, g_aux: g }, i as u64 + 1));
        }
        let y_next = &x - &g * gamma;
        let th_i = thetas[i];
        let th_next = thetas[i + 1];
        let c_momentum = ((th_i - 1.0) * (2.0 * th_next - 1.0)) / (th_i * (2.0 * th_i - 1.0));
        let c_gradient = (2.0 * th_next - 1.0) / (2.0 * th_i - 1.0);
        let x_next = &y_next + (&y_next - &y_prev) * c_momentum + (&y_next - &x) * c_gradient;
        if !x_next.iter().all(|v| v.is_finite()) {
            return Err(InnerError::NonFinite);
        }
        y_prev = y_next;
        x = x_next;
    }
    Ok(PhaseOutcome::Ran(x))
}

/// Accelerated gradient steps with the `t`-sequence momentum; same optional
/// per-iterate acceptance checking as [`ogmg_phase`].
fn nag_phase(
    aux: &AuxProblem,
    start: &DVector<f64>,
    n: usize,
    accept: bool,
) -> Result<PhaseOutcome, InnerError> {
    let gamma = 1.0 / aux.smoothness();
    let mut x_prev = start.clone();
    let mut v = start.clone();
    let mut t = 1.0f64;
    for i in 0..n {
        let g = aux.grad(&v)?;
        if accept && check_criterion(&g, &v, aux) {
            return Ok(PhaseOutcome::Accepted(Accepted { y: v, g_aux: g }, i as u64 + 1));
        }
        let x = &v - &g * gamma;
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        v = &x + (&x - &x_prev) * ((t - 1.0) / t_next);
        if !v.iter().all(|val| val.is_finite()) {
            return Err(InnerError::NonFinite);
        }
        x_prev = x;
        t = t_next;
    }
    Ok(PhaseOutcome::Ran(x_prev))
}

/// OGM-G: `N` gradient steps with the two-coefficient momentum ladder,
/// stepsize `gamma = 1 / (L_y + rho)`. The returned point's gradient norm
/// decays at the optimal rate in the starting function gap; composed after a
/// gap-reducing phase this yields the distance-based `O(1/N^2)` rate.
pub fn ogmg_run(aux: &AuxProblem, start: &DVector<f64>, n: usize) -> Result<DVector<f64>, InnerError> {
    match ogmg_phase(aux, start, n, false)? {
        PhaseOutcome::Ran(x) => Ok(x),
        PhaseOutcome::Accepted(..) => unreachable!("checking disabled"),
    }
}

/// Convex-case accelerated gradient with the `t`-sequence momentum
/// `t_{k+1} = (1 + sqrt(1 + 4 t_k^2)) / 2`, stepsize `1 / (L_y + rho)`.
/// Makes exactly `n` gradient calls.
pub fn nag_run(aux: &AuxProblem, start: &DVector<f64>, n: usize) -> Result<DVector<f64>, InnerError> {
    match nag_phase(aux, start, n, false)? {
        PhaseOutcome::Ran(x) => Ok(x),
        PhaseOutcome::Accepted(..) => unreachable!("checking disabled"),
    }
}

/// Iteration budget policy for the adaptive composite solver.
#[derive(Debug, Clone, Copy)]
pub struct InnerBudget {
    /// First budget tried; even and at least 2.
    pub initial_n: usize,
    /// How many times the budget may double before giving up.
    pub max_doublings: u32,
    /// Absolute criterion floor override; `None` uses the per-step default
    /// `1e-13 * (1 + ||y_center||)`.
    pub abs_floor: Option<f64>,
}

impl InnerBudget {
    /// Seeds the budget at `2 ceil(2 max(1, sqrt(eta_y alpha L_y)))`, the
    /// theoretical inner complexity scale with a fixed stand-in for its
    /// unknown universal constant.
    pub fn from_step_scale(eta_y_alpha: f64, l_y: f64) -> Self {
        let scale = (eta_y_alpha * l_y).sqrt().max(1.0);
        Self {
            initial_n: 2 * (2.0 * scale).ceil() as usize,
            max_doublings: 30,
            abs_floor: None,
        }
    }

    fn sanitized_initial(&self) -> usize {
        let n = self.initial_n.max(2);
        n + n % 2
    }
}

impl Default for InnerBudget {
    fn default() -> Self {
        Self {
            initial_n: 4,
            max_doublings: 30,
            abs_floor: None,
        }
    }
}

/// Output of a successful inner solve.
#[derive(Debug, Clone)]
pub struct InnerSolution {
    /// The accepted iterate.
    pub y: DVector<f64>,
    /// `grad_y f(x_under, y)` at the accepted iterate, recovered from the
    /// final criterion check (no extra oracle call).
    pub grad_y_f: DVector<f64>,
    /// Total gradient calls spent, criterion checks included.
    pub aux_grad_calls: u64,
    /// How many times the budget doubled.
    pub doublings: u32,
}

/// Something that can produce an acceptable inner iterate.
pub trait InnerSolver {
    fn solve(&self, aux: &AuxProblem) -> Result<InnerSolution, InnerError>;
}

/// The adaptive NAG + OGM-G composite.
///
/// Checks the criterion at the center first (one call), then runs `N/2` NAG
/// steps and `N/2` OGM-G steps from the center, doubling `N` and restarting
/// from the center on failure. Since every inner iterate's gradient is
/// computed anyway, the acceptance test is evaluated along the whole
/// trajectory and the solver returns at the first passing point, so the
/// budget only acts as a cap.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompositeInner {
    pub budget: InnerBudget,
}

impl CompositeInner {
    pub fn new(budget: InnerBudget) -> Self {
        Self { budget }
    }
}

impl InnerSolver for CompositeInner {
    fn solve(&self, aux: &AuxProblem) -> Result<InnerSolution, InnerError> {
        solve_inner(aux, &self.budget)
    }
}

/// See [`CompositeInner`].
pub fn solve_inner(aux: &AuxProblem, budget: &InnerBudget) -> Result<InnerSolution, InnerError> {
    let floor = budget.abs_floor.unwrap_or(aux.abs_floor);
    let effective = AuxProblem {
        base: aux.base,
        x_under: aux.x_under.clone(),
        y_center: aux.y_center.clone(),
        rho: aux.rho,
        abs_floor: floor,
    };
    let aux = &effective;

    let mut calls: u64 = 0;
    let accept = |acc: Accepted, calls: u64, doublings: u32| {
        // recover grad_y f = grad A - rho (y - center) without another call
        let grad_y_f = &acc.g_aux - (&acc.y - &aux.y_center) * aux.rho;
        debug_assert!(check_criterion(&acc.g_aux, &acc.y, aux));
        Ok(InnerSolution {
            y: acc.y,
            grad_y_f,
            aux_grad_calls: calls,
            doublings,
        })
    };

    let mut n = budget.sanitized_initial();
    let mut best_ratio = f64::INFINITY;
    let mut best_candidate = aux.y_center.clone();
    for attempt in 0..=budget.max_doublings {
        let half = aux_half(n);
        // The NAG phase's first iterate is the center itself, so the
        // "criterion at the center" probe is its first acceptance check.
        let mid = match nag_phase(aux, &aux.y_center, half, true)? {
            PhaseOutcome::Accepted(acc, used) => return accept(acc, calls + used, attempt),
            PhaseOutcome::Ran(mid) => {
                calls += half as u64;
                mid
            }
        };
        let candidate = match ogmg_phase(aux, &mid, half, true)? {
            PhaseOutcome::Accepted(acc, used) => return accept(acc, calls + used, attempt),
            PhaseOutcome::Ran(candidate) => {
                calls += half as u64;
                candidate
            }
        };
        let (g_aux, g_base) = aux.grad_split(&candidate)?;
        calls += 1;
        let ratio = criterion_ratio(&g_aux, &candidate, aux);
        if ratio <= 1.0 {
            debug_assert!(check_criterion(&g_aux, &candidate, aux));
            return Ok(InnerSolution {
                y: candidate,
                grad_y_f: g_base,
                aux_grad_calls: calls,
                doublings: attempt,
            });
        }
        if ratio < best_ratio {
            best_ratio = ratio;
            best_candidate = candidate;
        }
        n *= 2;
    }
    Err(InnerError::BudgetExhausted {
        attempts: budget.max_doublings + 1,
        last_n: n / 2,
        grad_calls: calls,
        best_ratio,
        best_candidate: Box::new(best_candidate),
    })
}

fn aux_half(n: usize) -> usize {
    (n / 2).max(1)
}
