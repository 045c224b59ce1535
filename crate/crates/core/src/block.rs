//! Two-block points and per-block smoothness/strong-convexity constants.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum BlockError {
    #[error("block dimensions must be at least 1 (got d_x = {dx}, d_y = {dy})")]
    EmptyBlock { dx: usize, dy: usize },
    #[error("non-finite entry in block vector")]
    NonFinite,
    #[error("invalid constants: require 0 <= mu <= L and L > 0 per block (got {0})")]
    InvalidConstants(String),
}

/// A point split into an `x` block and a `y` block of fixed dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockVector {
    pub x: DVector<f64>,
    pub y: DVector<f64>,
}

impl BlockVector {
    /// Builds a point, rejecting empty blocks and non-finite entries.
    pub fn new(x: DVector<f64>, y: DVector<f64>) -> Result<Self, BlockError> {
        if x.is_empty() || y.is_empty() {
            return Err(BlockError::EmptyBlock {
                dx: x.len(),
                dy: y.len(),
            });
        }
        let v = Self { x, y };
        if !v.is_finite() {
            return Err(BlockError::NonFinite);
        }
        Ok(v)
    }

    pub fn from_slices(x: &[f64], y: &[f64]) -> Result<Self, BlockError> {
        Self::new(DVector::from_row_slice(x), DVector::from_row_slice(y))
    }

    pub fn zeros(dx: usize, dy: usize) -> Self {
        Self {
            x: DVector::zeros(dx),
            y: DVector::zeros(dy),
        }
    }

    pub fn dim_x(&self) -> usize {
        self.x.len()
    }

    pub fn dim_y(&self) -> usize {
        self.y.len()
    }

    pub fn is_finite(&self) -> bool {
        self.x.iter().all(|v| v.is_finite()) && self.y.iter().all(|v| v.is_finite())
    }

    /// Squared Euclidean distance over both blocks.
    pub fn dist_sq(&self, other: &Self) -> f64 {
        (&self.x - &other.x).norm_squared() + (&self.y - &other.y).norm_squared()
    }
}

/// Certified smoothness and strong-convexity constants, one pair per block.
///
/// `mu = 0` is representable so that merely-convex blocks can be described
/// (and then rejected by solvers that need strong convexity, or repaired by
/// the regularization wrapper).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockConstants {
    pub l_x: f64,
    pub l_y: f64,
    pub mu_x: f64,
    pub mu_y: f64,
}

impl BlockConstants {
    pub fn new(l_x: f64, l_y: f64, mu_x: f64, mu_y: f64) -> Result<Self, BlockError> {
        let c = Self {
            l_x,
            l_y,
            mu_x,
            mu_y,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), BlockError> {
        let ok_block = |mu: f64, l: f64| mu.is_finite() && l.is_finite() && mu >= 0.0 && mu <= l && l > 0.0;
        if ok_block(self.mu_x, self.l_x) && ok_block(self.mu_y, self.l_y) {
            Ok(())
        } else {
            Err(BlockError::InvalidConstants(format!(
                "L_x = {}, L_y = {}, mu_x = {}, mu_y = {}",
                self.l_x, self.l_y, self.mu_x, self.mu_y
            )))
        }
    }

    /// True when both blocks have strictly positive strong convexity.
    pub fn is_strongly_convex(&self) -> bool {
        self.mu_x > 0.0 && self.mu_y > 0.0
    }

    pub fn kappa_x(&self) -> f64 {
        self.l_x / self.mu_x
    }

    pub fn kappa_y(&self) -> f64 {
        self.l_y / self.mu_y
    }

    /// Smoothness of the joint function over the concatenated variable.
    pub fn l_joint(&self) -> f64 {
        self.l_x.max(self.l_y)
    }

    /// Strong convexity of the joint function over the concatenated variable.
    pub fn mu_joint(&self) -> f64 {
        self.mu_x.min(self.mu_y)
    }
}
