//! Joint pilot-fraction and power optimization for superimposed pilots, and
//! max-min power control for embedded pilots.

use alloc::vec;
use alloc::vec::Vec;

use super::bisection::bisect_max_min;
use super::sca::sca_pilot_data;
use super::{PowerSolution, SolveStatus};
use crate::channel_model::LargeScaleState;
use crate::config::SystemConfig;
use crate::conic::ConicBackend;
use crate::error::{Error, Result};
use crate::estimation::{gamma_ep, guard_budget_for, mu_of_varrho, sp_coefficients, varrho_of_mu, UserSnrs};

/// Pilot fraction used when only power is optimized.
pub const DEFAULT_PILOT_FRACTION: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct JointReport {
    /// The reported allocation: link qualities come from actual pilot
    /// fractions.
    pub solution: PowerSolution,
    /// Power control alone at the default pilot fraction.
    pub pct_only: PowerSolution,
    /// Objective of the relaxation with free link qualities.
    pub relaxed_t: f64,
    /// Objective after mapping link qualities back to pilot fractions.
    pub reconciled_t: f64,
    /// Relative misfit of every user's pilot-fraction reconciliation.
    pub mu_residuals: Vec<f64>,
}

/// Max-min power control with every user at the default pilot fraction.
pub fn pct_only_sp(ls: &LargeScaleState, cfg: &SystemConfig, backend: &dyn ConicBackend) -> Result<PowerSolution> {
    let coeff = sp_coefficients(ls, cfg)?;
    let mu = vec![DEFAULT_PILOT_FRACTION; ls.num_users];
    let varrho = varrho_of_mu(&coeff, &mu)?;
    let out = bisect_max_min(
        &varrho,
        &coeff.beta_sum,
        cfg.rho_d(),
        cfg.solver.eps_bisection,
        None,
        backend,
    )?;
    Ok(out.into_solution(varrho, Some(mu)))
}

/// Alternates SCA over link qualities (power fixed) with bisection over
/// power (link qualities fixed).
///
/// The relaxed problem treats every link quality as free, while a physical
/// pilot fraction is a single number per user. After the loop each user's
/// fraction is fitted to its column of link qualities, power is re-optimized
/// for the fitted fractions, and the better of that and the pure power-control
/// solution is reported.
pub fn alternate_maxmin_sp(
    ls: &LargeScaleState,
    cfg: &SystemConfig,
    backend: &dyn ConicBackend,
) -> Result<JointReport> {
    let sp = &cfg.solver;
    let rho = cfg.rho_d();
    let coeff = sp_coefficients(ls, cfg)?;
    let pct_only = pct_only_sp(ls, cfg, backend)?;

    let mut eta = pct_only.eta.clone();
    let mut varrho = pct_only.varrho.clone();
    let mut theta = pct_only.t;
    let mut trace = vec![theta];
    let mut bis_iters = pct_only.bisection_iterations;
    let mut sca_iters = 0;
    let mut failures = pct_only.backend_failures;
    let mut status = SolveStatus::IterationCap;

    for _ in 0..sp.max_iterations {
        let sca = sca_pilot_data(
            &eta,
            &varrho,
            &coeff,
            rho,
            sp.mu_margin,
            sp.eps_sca,
            sp.max_iterations,
            backend,
        )?;
        sca_iters += sca.iterations;
        failures += sca.backend_failures;
        let bis = bisect_max_min(
            &sca.varrho,
            &coeff.beta_sum,
            rho,
            sp.eps_bisection,
            Some(&sca.eta),
            backend,
        )?;
        bis_iters += bis.iterations;
        failures += bis.backend_failures;
        let next = bis.t.max(theta);
        if bis.t >= theta {
            eta = bis.eta;
            varrho = sca.varrho;
        }
        let delta = next - theta;
        theta = next;
        trace.push(theta);
        if delta < sp.eps_alternating {
            status = SolveStatus::Converged;
            break;
        }
    }
    let relaxed_t = theta;

    let lo = sp.mu_margin;
    let hi = 1.0 - sp.mu_margin;
    let mut mu = Vec::with_capacity(ls.num_users);
    let mut residuals = Vec::with_capacity(ls.num_users);
    for q in 0..ls.num_users {
        let fit = mu_of_varrho(&coeff, q, &varrho.column(q))?;
        mu.push(fit.mu.clamp(lo, hi));
        residuals.push(fit.residual);
    }
    let rec_varrho = varrho_of_mu(&coeff, &mu)?;
    let rec = bisect_max_min(&rec_varrho, &coeff.beta_sum, rho, sp.eps_bisection, None, backend)?;
    bis_iters += rec.iterations;
    failures += rec.backend_failures;
    let reconciled_t = rec.t;

    let mut solution = if rec.t >= pct_only.t {
        rec.into_solution(rec_varrho, Some(mu))
    } else {
        pct_only.clone()
    };
    solution.trace = trace;
    solution.status = status;
    solution.bisection_iterations = bis_iters;
    solution.sca_iterations = sca_iters;
    solution.backend_failures = failures;

    Ok(JointReport {
        solution,
        pct_only,
        relaxed_t,
        reconciled_t,
        mu_residuals: residuals,
    })
}

/// Max-min power control for embedded pilots.
///
/// Returns an `Infeasible` solution when the users' guard regions do not fit
/// in one frame.
pub fn maxmin_ep(ls: &LargeScaleState, cfg: &SystemConfig, backend: &dyn ConicBackend) -> Result<PowerSolution> {
    match guard_budget_for(cfg) {
        Ok(g) if ls.num_users <= g.k_u_max => {}
        Ok(_) | Err(Error::EpInfeasible { .. }) => return Ok(PowerSolution::infeasible(ls.num_aps, ls.num_users)),
        Err(e) => return Err(e),
    }
    let stats = gamma_ep(ls, cfg, &UserSnrs::ep_default(cfg))?;
    let out = bisect_max_min(
        &stats.varrho,
        &stats.beta_sum,
        cfg.rho_d(),
        cfg.solver.eps_bisection,
        None,
        backend,
    )?;
    Ok(out.into_solution(stats.varrho, None))
}
