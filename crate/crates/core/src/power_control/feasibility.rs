//! Max-min power control at a fixed SINR target as a second-order cone
//! program.
//!
//! With `u_pq = sqrt(eta_pq varrho_pq)` the SINR constraint of user `q` reads
//! `sqrt(rho) sum_p sqrt(varrho_pq) u_pq >= sqrt(t) ||(sqrt(rho beta_pq) ||u_p||)_p, 1||`,
//! and the AP constraint is `||u_p|| <= 1`. An auxiliary `theta_p >= ||u_p||`
//! carries the AP norm into the user cones. Minimizing `sum_p theta_p` pins
//! every `theta_p` to `||u_p||`, so the relaxation is exact, and the solution
//! is a minimum-power certificate.

use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;
use serde::{Deserialize, Serialize};

use super::{check_shapes, min_sinr, project_power, uniform_eta_for, REPLAY_TOLERANCE};
use crate::conic::{Cone, ConeProgram, ConicBackend, ConicStatus};
use crate::error::{Error, Result};
use crate::linalg::RealMatrix;
use crate::spectral_efficiency::ap_loads;

/// Problem dimensions, for complexity accounting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SocpSize {
    pub variables: usize,
    pub linear_rows: usize,
    pub soc_constraints: usize,
    pub soc_rows: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct SocpFeasibilityProblem<'a> {
    pub varrho: &'a RealMatrix,
    pub beta_sum: &'a RealMatrix,
    pub rho_d: f64,
    pub t: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityOutcome {
    pub feasible: bool,
    /// Replayed certificate when `feasible`.
    pub eta: Option<RealMatrix>,
    /// Exact minimum SINR of the certificate.
    pub min_sinr: f64,
    pub status: ConicStatus,
    /// True when the backend neither solved nor certified infeasibility.
    pub backend_failure: bool,
    pub size: SocpSize,
}

impl<'a> SocpFeasibilityProblem<'a> {
    fn u_index(&self, p: usize, q: usize) -> usize {
        p * self.varrho.cols() + q
    }

    fn theta_index(&self, p: usize) -> usize {
        self.varrho.rows() * self.varrho.cols() + p
    }

    pub fn validate(&self) -> Result<()> {
        check_shapes(self.varrho, self.beta_sum)?;
        if !(self.rho_d > 0.0 && self.rho_d.is_finite()) {
            return Err(Error::Domain("rho_d must be positive".into()));
        }
        if !(self.t >= 0.0 && self.t.is_finite()) {
            return Err(Error::Domain("SINR target must be finite and non-negative".into()));
        }
        Ok(())
    }

    /// Builds the cone program. Each user cone is scaled by its largest
    /// coefficient, which leaves the feasible set unchanged.
    pub fn program(&self) -> ConeProgram {
        let (m_a, k_u) = self.varrho.shape();
        let n = m_a * k_u + m_a;
        let mut prog = ConeProgram::new(n);
        for p in 0..m_a {
            prog.c[self.theta_index(p)] = 1.0;
        }

        // u >= 0, theta >= 0, theta <= 1.
        let mut rows = Vec::with_capacity(m_a * k_u + 2 * m_a);
        let mut rhs = Vec::with_capacity(rows.capacity());
        for j in 0..m_a * k_u {
            rows.push(vec![(j, -1.0)]);
            rhs.push(0.0);
        }
        for p in 0..m_a {
            rows.push(vec![(self.theta_index(p), -1.0)]);
            rhs.push(0.0);
            rows.push(vec![(self.theta_index(p), 1.0)]);
            rhs.push(1.0);
        }
        prog.push_block(Cone::Nonnegative(rows.len()), &rows, &rhs);

        let sqrt_t = Float::sqrt(self.t);
        for q in 0..k_u {
            let a: Vec<f64> = (0..m_a)
                .map(|p| Float::sqrt(self.rho_d * self.varrho[(p, q)]))
                .collect();
            let b: Vec<f64> = (0..m_a)
                .map(|p| sqrt_t * Float::sqrt(self.rho_d * self.beta_sum[(p, q)]))
                .collect();
            let scale = a.iter().chain(&b).fold(sqrt_t, |m, v| m.max(*v));
            let w = if scale > 0.0 { 1.0 / scale } else { 1.0 };
            let mut rows = Vec::with_capacity(m_a + 2);
            rows.push((0..m_a).map(|p| (self.u_index(p, q), -w * a[p])).collect::<Vec<_>>());
            for p in 0..m_a {
                rows.push(vec![(self.theta_index(p), -w * b[p])]);
            }
            rows.push(Vec::new());
            let mut rhs = vec![0.0; m_a + 2];
            rhs[m_a + 1] = w * sqrt_t;
            prog.push_block(Cone::SecondOrder(m_a + 2), &rows, &rhs);
        }

        for p in 0..m_a {
            let mut rows = Vec::with_capacity(k_u + 1);
            rows.push(vec![(self.theta_index(p), -1.0)]);
            for q in 0..k_u {
                rows.push(vec![(self.u_index(p, q), -1.0)]);
            }
            prog.push_block(Cone::SecondOrder(k_u + 1), &rows, &vec![0.0; k_u + 1]);
        }
        prog
    }

    pub fn size(&self) -> SocpSize {
        let (m_a, k_u) = self.varrho.shape();
        SocpSize {
            variables: m_a * k_u + m_a,
            linear_rows: m_a * k_u + 2 * m_a,
            soc_constraints: k_u + m_a,
            soc_rows: k_u * (m_a + 2) + m_a * (k_u + 1),
        }
    }

    /// Power coefficients from a primal point, rescaled so that the busiest
    /// AP runs at full load. A common factor `c >= 1` on every coefficient
    /// raises every SINR, so the rescaling only adds margin to the
    /// minimum-power solution.
    pub fn recover_eta(&self, x: &[f64]) -> RealMatrix {
        let (m_a, k_u) = self.varrho.shape();
        let mut eta = RealMatrix::from_fn(m_a, k_u, |p, q| {
            let v = self.varrho[(p, q)];
            let u = x[self.u_index(p, q)].max(0.0);
            if v > 0.0 {
                u * u / v
            } else {
                0.0
            }
        });
        let peak = ap_loads(&eta, self.varrho).into_iter().fold(0.0, f64::max);
        if peak > 0.0 {
            eta.as_mut_slice().iter_mut().for_each(|e| *e /= peak);
        }
        project_power(&mut eta, self.varrho);
        eta
    }
}

/// Decides whether every user can reach SINR `t`.
///
/// The answer is only "feasible" when the recovered allocation, replayed
/// through the closed-form SINR, reaches `t` to a relative `1e-6`.
pub fn socp_feasible(problem: &SocpFeasibilityProblem<'_>, backend: &dyn ConicBackend) -> Result<FeasibilityOutcome> {
    problem.validate()?;
    let size = problem.size();
    if problem.t == 0.0 {
        let eta = uniform_eta_for(problem.varrho)?;
        let s = min_sinr(&eta, problem.varrho, problem.beta_sum, problem.rho_d);
        return Ok(FeasibilityOutcome {
            feasible: true,
            eta: Some(eta),
            min_sinr: s,
            status: ConicStatus::Solved,
            backend_failure: false,
            size,
        });
    }
    let sol = backend.solve(&problem.program())?;
    let mut out = FeasibilityOutcome {
        feasible: false,
        eta: None,
        min_sinr: 0.0,
        status: sol.status,
        backend_failure: false,
        size,
    };
    match sol.status {
        ConicStatus::PrimalInfeasible => {}
        s if s.is_solved() || s == ConicStatus::MaxIterations => {
            let eta = problem.recover_eta(&sol.x);
            let m = min_sinr(&eta, problem.varrho, problem.beta_sum, problem.rho_d);
            if m >= problem.t * (1.0 - REPLAY_TOLERANCE) {
                out.feasible = true;
                out.min_sinr = m;
                out.eta = Some(eta);
            } else if !s.is_solved() {
                out.backend_failure = true;
            }
        }
        _ => out.backend_failure = true,
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conic::DenseIpm;
    use crate::power_control::sinr_vector;

    fn toy() -> (RealMatrix, RealMatrix) {
        let v = RealMatrix::from_vec(2, 2, vec![0.8, 0.1, 0.15, 0.7]).unwrap();
        let b = RealMatrix::from_vec(2, 2, vec![1.0, 0.2, 0.25, 0.9]).unwrap();
        (v, b)
    }

    #[test]
    fn certificate_replays_and_respects_power() {
        let (v, b) = toy();
        // The max-min optimum of this toy is about 0.71 (grid search).
        let prob = SocpFeasibilityProblem {
            varrho: &v,
            beta_sum: &b,
            rho_d: 20.0,
            t: 0.5,
        };
        let out = socp_feasible(&prob, &DenseIpm::default()).unwrap();
        assert!(out.feasible, "{out:?}");
        let eta = out.eta.unwrap();
        for s in sinr_vector(&eta, &v, &b, 20.0) {
            assert!(s >= 0.5 * (1.0 - 1e-6));
        }
        crate::power_control::check_power(&eta, &v, 1e-9).unwrap();
    }

    #[test]
    fn unreachable_target_is_infeasible() {
        let (v, b) = toy();
        let prob = SocpFeasibilityProblem {
            varrho: &v,
            beta_sum: &b,
            rho_d: 20.0,
            t: 0.75,
        };
        let out = socp_feasible(&prob, &DenseIpm::default()).unwrap();
        assert!(!out.feasible);
        assert!(out.eta.is_none());
    }

    #[test]
    fn tiny_target_is_feasible() {
        let (v, b) = toy();
        let prob = SocpFeasibilityProblem {
            varrho: &v,
            beta_sum: &b,
            rho_d: 20.0,
            t: 1e-9,
        };
        let out = socp_feasible(&prob, &DenseIpm::default()).unwrap();
        assert!(out.feasible);
        let uni = uniform_eta_for(&v).unwrap();
        assert!(min_sinr(&uni, &v, &b, 20.0) >= 1e-9);
    }

    #[test]
    fn program_shape() {
        let (v, b) = toy();
        let prob = SocpFeasibilityProblem {
            varrho: &v,
            beta_sum: &b,
            rho_d: 1.0,
            t: 0.5,
        };
        let prog = prob.program();
        prog.validate().unwrap();
        let size = prob.size();
        assert_eq!(prog.num_vars, size.variables);
        assert_eq!(prog.num_rows(), size.linear_rows + size.soc_rows);
        assert_eq!(prog.cones.len(), 1 + size.soc_constraints);
    }
}
