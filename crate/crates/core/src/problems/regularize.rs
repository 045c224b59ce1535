//! Strong-convexity repair: add a small proximal quadratic
//! `(mu0/2) ||. - center||^2` with `mu0 = eps / (2 R^2)` to blocks that are
//! merely convex, so that solving the repaired problem to `eps/2` solves the
//! original to `eps`.

use nalgebra::DVector;

use crate::block::{BlockConstants, BlockVector};
use crate::oracle::{BlockObjective, OracleCounters};
use crate::problems::ProblemError;

/// Which block(s) receive the regularizer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegularizedBlocks {
    X,
    Y,
    Both,
}

/// A base objective plus per-block proximal quadratics.
pub struct Regularized<P> {
    base: P,
    blocks: RegularizedBlocks,
    mu0: f64,
    center: BlockVector,
    constants: BlockConstants,
}

/// Wraps `base` with `(mu0/2) ||. - center||^2` on the selected blocks, where
/// `mu0 = eps / (2 R^2)` and `R` bounds the start-to-solution distance. The
/// certified constants gain `mu0` on the touched blocks.
pub fn regularize<P: BlockObjective>(
    base: P,
    blocks: RegularizedBlocks,
    eps: f64,
    radius: f64,
    center: BlockVector,
) -> Result<Regularized<P>, ProblemError> {
    if !eps.is_finite() || eps <= 0.0 || !radius.is_finite() || radius <= 0.0 {
        return Err(ProblemError::Shape(format!(
            "regularization needs eps > 0 and R > 0, got eps = {eps}, R = {radius}"
        )));
    }
    if center.dim_x() != base.dim_x() || center.dim_y() != base.dim_y() {
        return Err(ProblemError::Shape(
            "regularization center does not match problem dimensions".into(),
        ));
    }
    let mu0 = eps / (2.0 * radius * radius);
    let c = base.constants();
    let (on_x, on_y) = match blocks {
        RegularizedBlocks::X => (true, false),
        RegularizedBlocks::Y => (false, true),
        RegularizedBlocks::Both => (true, true),
    };
    let constants = BlockConstants::new(
        c.l_x + if on_x { mu0 } else { 0.0 },
        c.l_y + if on_y { mu0 } else { 0.0 },
        c.mu_x + if on_x { mu0 } else { 0.0 },
        c.mu_y + if on_y { mu0 } else { 0.0 },
    )?;
    Ok(Regularized {
        base,
        blocks,
        mu0,
        center,
        constants,
    })
}

impl<P> Regularized<P> {
    pub fn mu0(&self) -> f64 {
        self.mu0
    }

    pub fn base(&self) -> &P {
        &self.base
    }

    fn on_x(&self) -> bool {
        matches!(self.blocks, RegularizedBlocks::X | RegularizedBlocks::Both)
    }

    fn on_y(&self) -> bool {
        matches!(self.blocks, RegularizedBlocks::Y | RegularizedBlocks::Both)
    }
}

impl<P: BlockObjective> BlockObjective for Regularized<P> {
    fn dim_x(&self) -> usize {
        self.base.dim_x()
    }

    fn dim_y(&self) -> usize {
        self.base.dim_y()
    }

    fn constants(&self) -> BlockConstants {
        self.constants
    }

    fn counters(&self) -> &OracleCounters {
        self.base.counters()
    }

    fn eval_raw(&self, p: &BlockVector) -> f64 {
        let mut v = self.base.eval_raw(p);
        if self.on_x() {
            v += 0.5 * self.mu0 * (&p.x - &self.center.x).norm_squared();
        }
        if self.on_y() {
            v += 0.5 * self.mu0 * (&p.y - &self.center.y).norm_squared();
        }
        v
    }

    fn grad_x_raw(&self, p: &BlockVector) -> DVector<f64> {
        let mut g = self.base.grad_x_raw(p);
        if self.on_x() {
            g += (&p.x - &self.center.x) * self.mu0;
        }
        g
    }

    fn grad_y_raw(&self, p: &BlockVector) -> DVector<f64> {
        let mut g = self.base.grad_y_raw(p);
        if self.on_y() {
            g += (&p.y - &self.center.y) * self.mu0;
        }
        g
    }
}
