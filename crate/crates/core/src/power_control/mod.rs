//! Downlink resource allocation: uniform power, max-min power control by
//! bisection over cone feasibility problems, SCA pilot/data allocation and
//! the alternating joint optimizer for superimposed pilots.
//!
//! The solvers speak to a [`ConicBackend`](crate::conic::ConicBackend), so
//! the same code runs on the built-in dense interior-point method or on any
//! external conic solver.

mod alternating;
mod bisection;
mod feasibility;
mod sca;

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::EstimationStats;
use crate::linalg::{solve_dense, RealMatrix};
use crate::spectral_efficiency::{ap_loads, sinr_unchecked};

pub use alternating::{alternate_maxmin_sp, maxmin_ep, pct_only_sp, JointReport, DEFAULT_PILOT_FRACTION};
pub use bisection::{bisect_max_min, bisection_steps, bisection_upper_bound, BisectionOutcome};
pub use feasibility::{socp_feasible, FeasibilityOutcome, SocpFeasibilityProblem, SocpSize};
pub use sca::{sca_pilot_data, taylor_surrogate, ScaOutcome};

/// Relative slack when replaying a certificate against its SINR target.
pub const REPLAY_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Converged,
    IterationCap,
    Infeasible,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerSolution {
    pub eta: RealMatrix,
    /// Pilot fractions (superimposed pilots only).
    pub mu: Option<Vec<f64>>,
    /// Link qualities the allocation was computed for.
    pub varrho: RealMatrix,
    /// Exact minimum SINR of `eta` on `varrho`.
    pub t: f64,
    /// Objective after each outer iteration.
    pub trace: Vec<f64>,
    pub status: SolveStatus,
    pub bisection_iterations: usize,
    pub sca_iterations: usize,
    /// Solver calls that ended without a usable answer.
    pub backend_failures: usize,
}

impl PowerSolution {
    /// Placeholder for schemes that cannot run on a drop.
    pub fn infeasible(m_a: usize, k_u: usize) -> Self {
        PowerSolution {
            eta: RealMatrix::zeros(m_a, k_u),
            mu: None,
            varrho: RealMatrix::zeros(m_a, k_u),
            t: 0.0,
            trace: Vec::new(),
            status: SolveStatus::Infeasible,
            bisection_iterations: 0,
            sca_iterations: 0,
            backend_failures: 0,
        }
    }
}

/// Every AP at full power with equal coefficients across users.
pub fn uniform_eta(stats: &EstimationStats) -> Result<RealMatrix> {
    uniform_eta_for(&stats.varrho)
}

pub fn uniform_eta_for(varrho: &RealMatrix) -> Result<RealMatrix> {
    let mut eta = RealMatrix::zeros(varrho.rows(), varrho.cols());
    for p in 0..varrho.rows() {
        let total: f64 = varrho.row(p).iter().sum();
        if !(total > 0.0) {
            return Err(Error::InfeasibleAp { ap: p });
        }
        eta.row_mut(p).iter_mut().for_each(|e| *e = 1.0 / total);
    }
    Ok(eta)
}

pub fn sinr_vector(eta: &RealMatrix, varrho: &RealMatrix, beta_sum: &RealMatrix, rho_d: f64) -> Vec<f64> {
    (0..eta.cols())
        .map(|q| sinr_unchecked(eta, varrho, beta_sum, rho_d, q))
        .collect()
}

pub fn min_sinr(eta: &RealMatrix, varrho: &RealMatrix, beta_sum: &RealMatrix, rho_d: f64) -> f64 {
    sinr_vector(eta, varrho, beta_sum, rho_d)
        .into_iter()
        .fold(f64::INFINITY, f64::min)
}

/// Scales down every AP row whose load exceeds one.
pub fn project_power(eta: &mut RealMatrix, varrho: &RealMatrix) {
    for (p, load) in ap_loads(eta, varrho).into_iter().enumerate() {
        if load > 1.0 {
            eta.row_mut(p).iter_mut().for_each(|e| *e /= load);
        }
    }
}

/// Rescales each user's column so that every user reaches SINR exactly `t`.
///
/// With `N_q = rho (sum_p sqrt(eta_pq) varrho_pq)^2` and
/// `S_qq' = rho sum_p beta_pq eta_pq' varrho_pq'`, column factors `v` solve
/// `(N_q - t S_qq) v_q - t sum_{q' != q} S_qq' v_q' = t`. When `eta` already
/// reaches `t` for everyone the factors are at most one, so AP loads can only
/// shrink. Returns `None` when the system has no positive solution.
pub fn equalize(
    eta: &RealMatrix,
    varrho: &RealMatrix,
    beta_sum: &RealMatrix,
    rho_d: f64,
    t: f64,
) -> Option<RealMatrix> {
    let (m_a, k_u) = eta.shape();
    let mut sys = RealMatrix::zeros(k_u, k_u);
    for q in 0..k_u {
        let amp: f64 = (0..m_a).map(|p| libm_sqrt(eta[(p, q)]) * varrho[(p, q)]).sum();
        sys[(q, q)] += rho_d * amp * amp;
        for q2 in 0..k_u {
            let s: f64 = (0..m_a)
                .map(|p| beta_sum[(p, q)] * eta[(p, q2)] * varrho[(p, q2)])
                .sum();
            sys[(q, q2)] -= t * rho_d * s;
        }
    }
    let v = solve_dense(sys, alloc::vec![t; k_u]).ok()?;
    if v.iter().any(|x| !(*x > 0.0 && x.is_finite())) {
        return None;
    }
    let mut out = eta.clone();
    for p in 0..m_a {
        for q in 0..k_u {
            out[(p, q)] *= v[q];
        }
    }
    Some(out)
}

fn libm_sqrt(x: f64) -> f64 {
    num_traits::Float::sqrt(x)
}

/// Checks the per-AP constraint and non-negativity on a returned allocation.
pub fn check_power(eta: &RealMatrix, varrho: &RealMatrix, tol: f64) -> Result<()> {
    if eta.as_slice().iter().any(|e| !(*e >= 0.0)) {
        return Err(Error::InvariantViolation("negative power coefficient".into()));
    }
    for (ap, load) in ap_loads(eta, varrho).into_iter().enumerate() {
        if load > 1.0 + tol {
            return Err(Error::PowerConstraintViolated { ap, load });
        }
    }
    Ok(())
}

pub(crate) fn check_shapes(varrho: &RealMatrix, beta_sum: &RealMatrix) -> Result<()> {
    if varrho.shape() != beta_sum.shape() {
        return Err(Error::DimensionMismatch {
            what: "varrho/beta_sum",
            expected: varrho.rows() * varrho.cols(),
            found: beta_sum.rows() * beta_sum.cols(),
        });
    }
    if varrho
        .as_slice()
        .iter()
        .chain(beta_sum.as_slice())
        .any(|v| !(*v >= 0.0 && v.is_finite()))
    {
        return Err(Error::Domain("link statistics must be finite and non-negative".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_allocation() {
        let v = RealMatrix::from_vec(2, 2, alloc::vec![0.2, 0.6, 1.0, 0.25]).unwrap();
        let eta = uniform_eta_for(&v).unwrap();
        assert!((eta[(0, 0)] - 1.25).abs() < 1e-15 && (eta[(0, 1)] - 1.25).abs() < 1e-15);
        assert!((eta[(1, 0)] - 0.8).abs() < 1e-15 && (eta[(1, 1)] - 0.8).abs() < 1e-15);
        for l in ap_loads(&eta, &v) {
            assert!((l - 1.0).abs() < 1e-12);
        }
        let single = uniform_eta_for(&RealMatrix::filled(1, 1, 4.0)).unwrap();
        assert_eq!(single[(0, 0)], 0.25);
        let dead = RealMatrix::from_vec(2, 1, alloc::vec![0.0, 1.0]).unwrap();
        assert_eq!(uniform_eta_for(&dead), Err(Error::InfeasibleAp { ap: 0 }));
    }

    #[test]
    fn equalize_hits_common_target() {
        let v = RealMatrix::from_vec(2, 2, alloc::vec![0.4, 0.7, 0.9, 0.2]).unwrap();
        let b = RealMatrix::from_vec(2, 2, alloc::vec![0.6, 1.0, 1.1, 0.5]).unwrap();
        let eta = uniform_eta_for(&v).unwrap();
        let rho = 10.0;
        let t = min_sinr(&eta, &v, &b, rho);
        let e = equalize(&eta, &v, &b, rho, t).unwrap();
        for s in sinr_vector(&e, &v, &b, rho) {
            assert!((s - t).abs() < 1e-10);
        }
        check_power(&e, &v, 1e-12).unwrap();
    }
}
