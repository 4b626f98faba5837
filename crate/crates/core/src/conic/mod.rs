//! Cone-program exchange format and the solver interface.
//!
//! A program is
//!
//! ```text
//! minimize    c^T x
//! subject to  A x + s = b,   s in K
//! ```
//!
//! where `K` is a product of nonnegative orthants and second-order cones
//! `{(t, u) : ||u|| <= t}`, listed in row order. `A` is given as
//! `(row, col, value)` triplets; duplicates are summed. Any backend that
//! accepts this form and reports a primal point can drive the power-control
//! code through [`ConicBackend`]. [`DenseIpm`] is the built-in backend.

mod cones;
mod ipm;

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;
use thiserror::Error;

pub use ipm::{DenseIpm, IpmSettings};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cone {
    Nonnegative(usize),
    /// Second-order cone of total dimension `d` (head first).
    SecondOrder(usize),
}

impl Cone {
    pub fn dim(&self) -> usize {
        match *self {
            Cone::Nonnegative(d) | Cone::SecondOrder(d) => d,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConeProgram {
    pub num_vars: usize,
    pub c: Vec<f64>,
    pub a: Vec<(usize, usize, f64)>,
    pub b: Vec<f64>,
    pub cones: Vec<Cone>,
}

impl ConeProgram {
    pub fn new(num_vars: usize) -> Self {
        ConeProgram {
            num_vars,
            c: vec![0.0; num_vars],
            ..Default::default()
        }
    }

    pub fn num_rows(&self) -> usize {
        self.b.len()
    }

    /// Appends a cone block; `rows[k]` lists the `(col, coef)` entries of
    /// `A` for the block's `k`-th row and `rhs[k]` its entry of `b`.
    pub fn push_block(&mut self, cone: Cone, rows: &[Vec<(usize, f64)>], rhs: &[f64]) {
        debug_assert_eq!(rows.len(), cone.dim());
        debug_assert_eq!(rhs.len(), cone.dim());
        let base = self.b.len();
        for (k, row) in rows.iter().enumerate() {
            for &(col, v) in row {
                if v != 0.0 {
                    self.a.push((base + k, col, v));
                }
            }
        }
        self.b.extend_from_slice(rhs);
        self.cones.push(cone);
    }

    pub fn validate(&self) -> Result<(), ConicError> {
        if self.c.len() != self.num_vars {
            return Err(ConicError::InvalidProgram(format!(
                "objective has {} entries for {} variables",
                self.c.len(),
                self.num_vars
            )));
        }
        let rows: usize = self.cones.iter().map(Cone::dim).sum();
        if rows != self.b.len() {
            return Err(ConicError::InvalidProgram(format!(
                "cones cover {rows} rows but b has {}",
                self.b.len()
            )));
        }
        if let Some(c) = self.cones.iter().find(|c| c.dim() == 0) {
            return Err(ConicError::InvalidProgram(format!("empty cone {c:?}")));
        }
        if let Some(&(r, c, _)) = self.a.iter().find(|&&(r, c, _)| r >= rows || c >= self.num_vars) {
            return Err(ConicError::InvalidProgram(format!("triplet ({r}, {c}) out of range")));
        }
        let finite = self.c.iter().chain(&self.b).all(|v| v.is_finite()) && self.a.iter().all(|t| t.2.is_finite());
        if !finite {
            return Err(ConicError::InvalidProgram("non-finite data".into()));
        }
        Ok(())
    }

    /// `b - A x`, the slack implied by `x`.
    pub fn slack(&self, x: &[f64]) -> Vec<f64> {
        let mut s = self.b.clone();
        for &(r, c, v) in &self.a {
            s[r] -= v * x[c];
        }
        s
    }

    /// Largest violation of `b - A x in K`, in absolute units.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        cone_violation(&self.cones, &self.slack(x))
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        self.c.iter().zip(x).map(|(c, x)| c * x).sum()
    }
}

/// Distance-like violation of `s in K`: `max(-s_i)` on orthants and
/// `||u|| - t` on second-order cones, floored at zero.
pub fn cone_violation(cones: &[Cone], s: &[f64]) -> f64 {
    let mut worst = 0.0_f64;
    let mut at = 0;
    for cone in cones {
        let blk = &s[at..at + cone.dim()];
        let v = match cone {
            Cone::Nonnegative(_) => blk.iter().fold(0.0_f64, |m, x| m.max(-x)),
            Cone::SecondOrder(_) => {
                let tail = Float::sqrt(blk[1..].iter().map(|x| x * x).sum::<f64>());
                tail - blk[0]
            }
        };
        worst = worst.max(v);
        at += cone.dim();
    }
    worst
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConicStatus {
    Solved,
    /// Converged to reduced accuracy.
    AlmostSolved,
    PrimalInfeasible,
    DualInfeasible,
    MaxIterations,
    NumericalError,
}

impl ConicStatus {
    pub fn is_solved(self) -> bool {
        matches!(self, ConicStatus::Solved | ConicStatus::AlmostSolved)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConicSolution {
    pub status: ConicStatus,
    pub x: Vec<f64>,
    pub s: Vec<f64>,
    pub z: Vec<f64>,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConicError {
    #[error("invalid cone program: {0}")]
    InvalidProgram(String),
    #[error("backend failure: {0}")]
    Backend(String),
}

/// A solver for [`ConeProgram`]s. Implementations must allow independent
/// concurrent solves.
pub trait ConicBackend: Send + Sync {
    fn name(&self) -> &str;
    fn solve(&self, program: &ConeProgram) -> Result<ConicSolution, ConicError>;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn violation_measures() {
        let cones = [Cone::Nonnegative(2), Cone::SecondOrder(3)];
        assert_eq!(cone_violation(&cones, &[1.0, 0.0, 5.0, 3.0, 4.0]), 0.0);
        assert_eq!(cone_violation(&cones, &[1.0, -0.5, 5.0, 3.0, 4.0]), 0.5);
        assert!((cone_violation(&cones, &[1.0, 0.0, 4.0, 3.0, 4.0]) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn validation_catches_shape_errors() {
        let mut p = ConeProgram::new(2);
        p.push_block(Cone::Nonnegative(1), &[vec![(0, 1.0)]], &[1.0]);
        assert!(p.validate().is_ok());
        p.a.push((0, 5, 1.0));
        assert!(p.validate().is_err());
        let mut q = ConeProgram::new(1);
        q.b.push(1.0);
        assert!(q.validate().is_err());
    }
}
