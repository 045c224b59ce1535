//! Central finite differences over the block oracle.
//!
//! This is the independent cross-check for every analytic gradient in the
//! crate: it only consumes objective values, never the gradient code paths it
//! validates.

use nalgebra::DVector;

use crate::block::BlockVector;
use crate::oracle::{BlockObjective, OracleError};

/// Step size `1e-6 * (1 + ||p||)`, scaled to the point's magnitude.
pub fn step_for(p: &BlockVector) -> f64 {
    1e-6 * (1.0 + (p.x.norm_squared() + p.y.norm_squared()).sqrt())
}

/// Central finite-difference approximation of the `x`-block gradient.
pub fn grad_x(problem: &dyn BlockObjective, p: &BlockVector) -> Result<DVector<f64>, OracleError> {
    let h = step_for(p);
    let mut g = DVector::zeros(p.dim_x());
    let mut q = p.clone();
    for i in 0..p.dim_x() {
        q.x[i] = p.x[i] + h;
        let fp = problem.eval(&q)?;
        q.x[i] = p.x[i] - h;
        let fm = problem.eval(&q)?;
        q.x[i] = p.x[i];
        g[i] = (fp - fm) / (2.0 * h);
    }
    Ok(g)
}

/// Central finite-difference approximation of the `y`-block gradient.
pub fn grad_y(problem: &dyn BlockObjective, p: &BlockVector) -> Result<DVector<f64>, OracleError> {
    let h = step_for(p);
    let mut g = DVector::zeros(p.dim_y());
    let mut q = p.clone();
    for i in 0..p.dim_y() {
        q.y[i] = p.y[i] + h;
        let fp = problem.eval(&q)?;
        q.y[i] = p.y[i] - h;
        let fm = problem.eval(&q)?;
        q.y[i] = p.y[i];
        g[i] = (fp - fm) / (2.0 * h);
    }
    Ok(g)
}

/// Relative deviation `||a - b|| / max(1, ||a||, ||b||)`.
pub fn relative_error(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a - b).norm() / a.norm().max(b.norm()).max(1.0)
}

/// Max relative error between analytic and finite-difference gradients over
/// both blocks at one point.
pub fn max_gradient_error(
    problem: &dyn BlockObjective,
    p: &BlockVector,
) -> Result<f64, OracleError> {
    let gx = problem.grad_x(p)?;
    let gy = problem.grad_y(p)?;
    let fx = grad_x(problem, p)?;
    let fy = grad_y(problem, p)?;
    Ok(relative_error(&gx, &fx).max(relative_error(&gy, &fy)))
}
