use alloc::vec::Vec;

use num_traits::Float;

use super::feasibility::{socp_feasible, SocpFeasibilityProblem, SocpSize};
use super::{check_shapes, equalize, min_sinr, uniform_eta_for, PowerSolution, SolveStatus};
use crate::conic::ConicBackend;
use crate::error::{Error, Result};
use crate::linalg::RealMatrix;
use crate::spectral_efficiency::{ap_loads, POWER_SLACK};

#[derive(Debug, Clone, PartialEq)]
pub struct BisectionOutcome {
    pub eta: RealMatrix,
    /// Exact minimum SINR of `eta`.
    pub t: f64,
    pub initial_bracket: (f64, f64),
    pub final_bracket: (f64, f64),
    /// `(t_min, t_max)` after every iteration.
    pub brackets: Vec<(f64, f64)>,
    pub iterations: usize,
    pub backend_failures: usize,
    pub size: SocpSize,
}

impl BisectionOutcome {
    pub fn into_solution(self, varrho: RealMatrix, mu: Option<Vec<f64>>) -> PowerSolution {
        PowerSolution {
            eta: self.eta,
            mu,
            varrho,
            t: self.t,
            trace: alloc::vec![self.t],
            status: SolveStatus::Converged,
            bisection_iterations: self.iterations,
            sca_iterations: 0,
            backend_failures: self.backend_failures,
        }
    }
}

/// A value no allocation can reach: for every user,
/// `SINR_q < min(rho (sum_p sqrt(varrho_pq))^2, sum_p varrho_pq / beta_pq)`.
///
/// The first bound uses `eta_pq varrho_pq <= 1`; the second is Cauchy-Schwarz
/// on the numerator against the interference term.
pub fn bisection_upper_bound(varrho: &RealMatrix, beta_sum: &RealMatrix, rho_d: f64) -> f64 {
    let (m_a, k_u) = varrho.shape();
    (0..k_u)
        .map(|q| {
            let amp: f64 = (0..m_a).map(|p| Float::sqrt(varrho[(p, q)])).sum();
            let cs: f64 = (0..m_a)
                .filter(|&p| beta_sum[(p, q)] > 0.0)
                .map(|p| varrho[(p, q)] / beta_sum[(p, q)])
                .sum();
            (rho_d * amp * amp).min(cs)
        })
        .fold(f64::INFINITY, f64::min)
}

/// Halvings needed to shrink a bracket of `width` below `eps`.
pub fn bisection_steps(width: f64, eps: f64) -> usize {
    if width > eps {
        Float::ceil(Float::log2(width / eps)) as usize
    } else {
        0
    }
}

/// Max-min SINR power control by bisection on the common target.
///
/// The lower end starts at the minimum SINR of `warm` (uniform power when
/// `None`), which is a feasible point; the upper end is
/// [`bisection_upper_bound`]. The loop stops once the bracket is narrower
/// than `eps`, so it runs `ceil(log2(width / eps))` times. The last feasible
/// certificate is then equalized so that all users sit at the same SINR,
/// when that keeps every AP within budget.
pub fn bisect_max_min(
    varrho: &RealMatrix,
    beta_sum: &RealMatrix,
    rho_d: f64,
    eps: f64,
    warm: Option<&RealMatrix>,
    backend: &dyn ConicBackend,
) -> Result<BisectionOutcome> {
    check_shapes(varrho, beta_sum)?;
    if !(eps > 0.0) {
        return Err(Error::config("eps_bisection", "must be positive"));
    }
    let mut cert = match warm {
        Some(eta) => {
            if eta.shape() != varrho.shape() {
                return Err(Error::DimensionMismatch {
                    what: "warm start",
                    expected: varrho.rows() * varrho.cols(),
                    found: eta.rows() * eta.cols(),
                });
            }
            let mut e = eta.clone();
            super::project_power(&mut e, varrho);
            e
        }
        None => uniform_eta_for(varrho)?,
    };
    let mut cert_t = min_sinr(&cert, varrho, beta_sum, rho_d);
    let mut lo = cert_t;
    let mut hi = bisection_upper_bound(varrho, beta_sum, rho_d).max(lo);
    let initial = (lo, hi);
    let mut brackets = Vec::new();
    let mut failures = 0;
    let mut size = SocpSize::default();
    for _ in 0..bisection_steps(hi - lo, eps) {
        let t = 0.5 * (lo + hi);
        let out = socp_feasible(
            &SocpFeasibilityProblem {
                varrho,
                beta_sum,
                rho_d,
                t,
            },
            backend,
        )?;
        size = out.size;
        failures += out.backend_failure as usize;
        match out.eta {
            Some(eta) if out.feasible => {
                lo = t;
                if out.min_sinr > cert_t {
                    cert = eta;
                    cert_t = out.min_sinr;
                }
            }
            _ => hi = t,
        }
        brackets.push((lo, hi));
    }

    if let Some(eq) = equalize(&cert, varrho, beta_sum, rho_d, cert_t) {
        let within = ap_loads(&eq, varrho).iter().all(|l| *l <= 1.0 + POWER_SLACK);
        let t_eq = min_sinr(&eq, varrho, beta_sum, rho_d);
        if within && t_eq >= cert_t * (1.0 - 1e-9) {
            cert = eq;
            cert_t = t_eq;
        }
    }

    Ok(BisectionOutcome {
        eta: cert,
        t: cert_t,
        initial_bracket: initial,
        final_bracket: (lo, hi),
        iterations: brackets.len(),
        brackets,
        backend_failures: failures,
        size,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conic::DenseIpm;
    use crate::power_control::sinr_vector;
    use alloc::vec;

    #[test]
    fn brackets_shrink_and_count_matches() {
        let v = RealMatrix::from_vec(2, 2, vec![0.8, 0.1, 0.15, 0.7]).unwrap();
        let b = RealMatrix::from_vec(2, 2, vec![1.0, 0.2, 0.25, 0.9]).unwrap();
        let eps = 1e-4;
        let out = bisect_max_min(&v, &b, 20.0, eps, None, &DenseIpm::default()).unwrap();
        let (l0, h0) = out.initial_bracket;
        let expected = Float::ceil(Float::log2((h0 - l0) / eps)) as usize;
        assert_eq!(out.iterations, expected);
        assert!(out.final_bracket.1 - out.final_bracket.0 <= eps);
        // Grid search puts the optimum near 0.7106.
        assert!((out.t - 0.7106).abs() < 2e-3, "{}", out.t);
        let mut prev = out.initial_bracket;
        for &(l, h) in &out.brackets {
            assert!(l >= prev.0 && h <= prev.1 && l <= h);
            prev = (l, h);
        }
        assert!(out.t >= out.final_bracket.0 * (1.0 - 1e-6));
        assert!(out.t <= out.final_bracket.1 + 1e-9);
        let s = sinr_vector(&out.eta, &v, &b, 20.0);
        let spread = s.iter().cloned().fold(0.0, f64::max) - s.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(spread < 1e-6 * out.t, "{s:?}");
        let uni = uniform_eta_for(&v).unwrap();
        assert!(out.t >= min_sinr(&uni, &v, &b, 20.0));
    }

    #[test]
    fn single_link_reaches_bound() {
        let v = RealMatrix::filled(1, 1, 0.5);
        let b = RealMatrix::filled(1, 1, 1.0);
        // One user at full power is optimal: SINR = rho varrho / (rho beta + 1).
        let rho = 8.0;
        let exact = rho * 0.5 / (rho * 1.0 + 1.0);
        let out = bisect_max_min(&v, &b, rho, 1e-6, None, &DenseIpm::default()).unwrap();
        assert!((out.t - exact).abs() < 1e-9);
        assert!(out.brackets.iter().all(|&(l, _)| l == out.initial_bracket.0));
        assert!(bisection_upper_bound(&v, &b, rho) > exact);
    }
}
