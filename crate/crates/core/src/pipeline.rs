//! One drop, one allocation scheme, per-user spectral efficiency.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::channel_model::{generate_drop, LargeScaleState};
use crate::config::SystemConfig;
use crate::conic::ConicBackend;
use crate::error::Result;
use crate::estimation::{gamma_ep, guard_budget_for, sp_coefficients, UserSnrs};
use crate::linalg::RealMatrix;
use crate::power_control::{
    alternate_maxmin_sp, maxmin_ep, pct_only_sp, uniform_eta, PowerSolution, SolveStatus, DEFAULT_PILOT_FRACTION,
};
use crate::spectral_efficiency::{se_from_sinr, sinr_all, SinrInputs};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AllocationScheme {
    /// Superimposed pilots, joint pilot fraction and power optimization.
    SpJoint,
    /// Superimposed pilots at the default pilot fraction, max-min power.
    SpPctOnly,
    /// Embedded pilots, max-min power.
    Ep,
    /// Superimposed pilots at the default pilot fraction, uniform power.
    UniformSp,
    /// Embedded pilots, uniform power.
    UniformEp,
}

impl AllocationScheme {
    pub const ALL: [AllocationScheme; 5] = [
        AllocationScheme::SpJoint,
        AllocationScheme::SpPctOnly,
        AllocationScheme::Ep,
        AllocationScheme::UniformSp,
        AllocationScheme::UniformEp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AllocationScheme::SpJoint => "sp_joint",
            AllocationScheme::SpPctOnly => "sp_pct_only",
            AllocationScheme::Ep => "ep",
            AllocationScheme::UniformSp => "uniform_sp",
            AllocationScheme::UniformEp => "uniform_ep",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|a| a.name() == s)
    }

    pub fn uses_embedded_pilots(self) -> bool {
        matches!(self, AllocationScheme::Ep | AllocationScheme::UniformEp)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DropEvaluation {
    pub seed: u64,
    pub scheme: AllocationScheme,
    pub se: Vec<f64>,
    pub sinr: Vec<f64>,
    pub min_se: f64,
    pub status: SolveStatus,
    pub bisection_iterations: usize,
    pub sca_iterations: usize,
    pub backend_failures: usize,
    pub mu: Option<Vec<f64>>,
    /// Max-min SE of the relaxed joint problem, for the joint scheme.
    pub relaxed_min_se: Option<f64>,
}

/// Draws the drop for `seed` and evaluates one scheme on it.
pub fn evaluate_drop(
    cfg: &SystemConfig,
    seed: u64,
    scheme: AllocationScheme,
    backend: &dyn ConicBackend,
) -> Result<DropEvaluation> {
    let drop = generate_drop(cfg, seed)?;
    evaluate_large_scale(&drop.large_scale, cfg, seed, scheme, backend)
}

/// Evaluates one scheme on given large-scale statistics.
pub fn evaluate_large_scale(
    ls: &LargeScaleState,
    cfg: &SystemConfig,
    seed: u64,
    scheme: AllocationScheme,
    backend: &dyn ConicBackend,
) -> Result<DropEvaluation> {
    let mut relaxed = None;
    let sol = match scheme {
        AllocationScheme::SpJoint => {
            let rep = alternate_maxmin_sp(ls, cfg, backend)?;
            relaxed = Some(se_from_sinr(rep.relaxed_t, cfg.omega_dl()));
            rep.solution
        }
        AllocationScheme::SpPctOnly => pct_only_sp(ls, cfg, backend)?,
        AllocationScheme::Ep => maxmin_ep(ls, cfg, backend)?,
        AllocationScheme::UniformSp => {
            let mu = vec![DEFAULT_PILOT_FRACTION; ls.num_users];
            let stats = sp_coefficients(ls, cfg)?.stats(ls, &mu)?;
            uniform_solution(uniform_eta(&stats)?, stats.varrho, Some(mu))
        }
        AllocationScheme::UniformEp => {
            let fits = guard_budget_for(cfg)
                .map(|g| ls.num_users <= g.k_u_max)
                .unwrap_or(false);
            if fits {
                let stats = gamma_ep(ls, cfg, &UserSnrs::ep_default(cfg))?;
                uniform_solution(uniform_eta(&stats)?, stats.varrho, None)
            } else {
                PowerSolution::infeasible(ls.num_aps, ls.num_users)
            }
        }
    };

    let omega = cfg.omega_dl();
    let (sinr, se) = if sol.status == SolveStatus::Infeasible {
        (vec![0.0; ls.num_users], vec![0.0; ls.num_users])
    } else {
        let beta_sum = ls.beta_sum_matrix();
        let inputs = SinrInputs {
            eta: &sol.eta,
            varrho: &sol.varrho,
            beta_sum: &beta_sum,
            rho_d: cfg.rho_d(),
            omega_dl: omega,
        };
        let sinr = sinr_all(&inputs)?;
        let se = sinr.iter().map(|s| se_from_sinr(*s, omega)).collect();
        (sinr, se)
    };
    let min_se = se.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(DropEvaluation {
        seed,
        scheme,
        se,
        sinr,
        min_se,
        status: sol.status,
        bisection_iterations: sol.bisection_iterations,
        sca_iterations: sol.sca_iterations,
        backend_failures: sol.backend_failures,
        mu: sol.mu,
        relaxed_min_se: relaxed,
    })
}

fn uniform_solution(eta: RealMatrix, varrho: RealMatrix, mu: Option<Vec<f64>>) -> PowerSolution {
    PowerSolution {
        eta,
        mu,
        varrho,
        t: 0.0,
        trace: Vec::new(),
        status: SolveStatus::Converged,
        bisection_iterations: 0,
        sca_iterations: 0,
        backend_failures: 0,
    }
}
