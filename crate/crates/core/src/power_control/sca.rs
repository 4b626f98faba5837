//! Successive convex approximation of the pilot/data split at fixed power
//! coefficients.
//!
//! User `q` reaches SINR `t` exactly when `1 / (x_q t) >= rho I_q + 1`, with
//! `x_q >= 1 / (rho (sum_p sqrt(eta_pq) varrho_pq)^2)` and
//! `I_q = sum_p beta_pq sum_q' eta_pq' varrho_pq'`. The left side is convex in
//! `(x, t)`, so its first-order expansion at the current point is a global
//! under-estimator and every surrogate solution is feasible for the exact
//! problem. Each link quality `varrho_pq` is a free variable inside the range
//! reachable by pilot fractions in `[margin, 1 - margin]`.
//!
//! Variables are normalized by the expansion point (`x / x0`, `t / t0`, and
//! `varrho / varrho_max`) so that every coefficient is of order one.

use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;

use super::{check_shapes, min_sinr, project_power, SolveStatus};
use crate::conic::{Cone, ConeProgram, ConicBackend};
use crate::error::{Error, Result};
use crate::estimation::SpCoefficients;
use crate::linalg::RealMatrix;

/// First-order expansion of `1 / (x t)` at `(x0, t0)`.
pub fn taylor_surrogate(x: f64, t: f64, x0: f64, t0: f64) -> f64 {
    3.0 / (x0 * t0) - x / (x0 * x0 * t0) - t / (x0 * t0 * t0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScaOutcome {
    pub varrho: RealMatrix,
    pub eta: RealMatrix,
    /// Exact minimum SINR at the returned point.
    pub t: f64,
    /// Exact minimum SINR after each accepted iterate, starting point first.
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub status: SolveStatus,
    pub backend_failures: usize,
}

struct Layout {
    m_a: usize,
    k_u: usize,
}

impl Layout {
    fn w(&self, p: usize, q: usize) -> usize {
        p * self.k_u + q
    }
    fn x(&self, q: usize) -> usize {
        self.m_a * self.k_u + q
    }
    fn y(&self, q: usize) -> usize {
        self.m_a * self.k_u + self.k_u + q
    }
    fn t(&self) -> usize {
        self.m_a * self.k_u + 2 * self.k_u
    }
    fn len(&self) -> usize {
        self.t() + 1
    }
}

struct Surrogate<'a> {
    eta: &'a RealMatrix,
    beta_sum: &'a RealMatrix,
    vmax: &'a RealMatrix,
    w_lo: &'a RealMatrix,
    w_hi: &'a RealMatrix,
    rho_d: f64,
}

impl Surrogate<'_> {
    fn program(&self, varrho0: &RealMatrix, t0: f64) -> Option<ConeProgram> {
        let (m_a, k_u) = self.eta.shape();
        let lay = Layout { m_a, k_u };
        let mut prog = ConeProgram::new(lay.len());
        prog.c[lay.t()] = -1.0;

        let s0: Vec<f64> = (0..k_u)
            .map(|q| (0..m_a).map(|p| Float::sqrt(self.eta[(p, q)]) * varrho0[(p, q)]).sum())
            .collect();
        if s0.iter().any(|s| !(*s > 0.0)) {
            return None;
        }

        let mut rows = Vec::new();
        let mut rhs = Vec::new();
        for p in 0..m_a {
            rows.push(
                (0..k_u)
                    .map(|q| (lay.w(p, q), self.eta[(p, q)] * self.vmax[(p, q)]))
                    .collect::<Vec<_>>(),
            );
            rhs.push(1.0);
            for q in 0..k_u {
                rows.push(vec![(lay.w(p, q), -1.0)]);
                rhs.push(-self.w_lo[(p, q)]);
                rows.push(vec![(lay.w(p, q), 1.0)]);
                rhs.push(self.w_hi[(p, q)]);
            }
        }
        for q in 0..k_u {
            // X0 t0 = t0 / (rho s0^2); the interference term carries rho.
            let xt = t0 / (self.rho_d * s0[q] * s0[q]);
            let mut row = vec![(lay.x(q), 1.0), (lay.t(), 1.0)];
            for p in 0..m_a {
                for q2 in 0..k_u {
                    let coef = xt * self.rho_d * self.beta_sum[(p, q)] * self.eta[(p, q2)] * self.vmax[(p, q2)];
                    row.push((lay.w(p, q2), coef));
                }
            }
            rows.push(row);
            rhs.push(3.0 - xt);
        }
        prog.push_block(Cone::Nonnegative(rows.len()), &rows, &rhs);

        for q in 0..k_u {
            // y^2 <= X  as  ||(2y, X - 1)|| <= X + 1.
            prog.push_block(
                Cone::SecondOrder(3),
                &[vec![(lay.x(q), -1.0)], vec![(lay.y(q), -2.0)], vec![(lay.x(q), -1.0)]],
                &[1.0, 0.0, -1.0],
            );
            // S y >= 1  as  ||(2, S - y)|| <= S + y.
            let s_terms: Vec<(usize, f64)> = (0..m_a)
                .map(|p| (lay.w(p, q), -Float::sqrt(self.eta[(p, q)]) * self.vmax[(p, q)] / s0[q]))
                .collect();
            let mut head = s_terms.clone();
            head.push((lay.y(q), -1.0));
            let mut tail = s_terms;
            tail.push((lay.y(q), 1.0));
            prog.push_block(Cone::SecondOrder(3), &[head, Vec::new(), tail], &[0.0, 2.0, 0.0]);
        }
        Some(prog)
    }
}

/// Improves the minimum SINR over link qualities at fixed `eta`.
///
/// Starts from `varrho0` (which must be reachable and power-feasible with
/// `eta`). An iterate is accepted only when the exact minimum SINR does not
/// drop, so the trace is non-decreasing. Stops when the gain falls below
/// `eps` or after `max_iterations` surrogate solves.
#[allow(clippy::too_many_arguments)]
pub fn sca_pilot_data(
    eta: &RealMatrix,
    varrho0: &RealMatrix,
    coeff: &SpCoefficients,
    rho_d: f64,
    mu_margin: f64,
    eps: f64,
    max_iterations: usize,
    backend: &dyn ConicBackend,
) -> Result<ScaOutcome> {
    check_shapes(varrho0, &coeff.beta_sum)?;
    if eta.shape() != varrho0.shape() {
        return Err(Error::DimensionMismatch {
            what: "sca eta",
            expected: varrho0.rows() * varrho0.cols(),
            found: eta.rows() * eta.cols(),
        });
    }
    if !(mu_margin > 0.0 && mu_margin < 0.5) {
        return Err(Error::config("mu_margin", "must lie in (0, 0.5)"));
    }
    let (m_a, k_u) = eta.shape();
    let vmax = RealMatrix::from_fn(m_a, k_u, |p, q| coeff.varrho_link(p, q, 1.0 - mu_margin));
    let ratio = |p: usize, q: usize, mu: f64| {
        let m = vmax[(p, q)];
        if m > 0.0 {
            (coeff.varrho_link(p, q, mu) / m).min(1.0)
        } else {
            0.0
        }
    };
    let w_lo = RealMatrix::from_fn(m_a, k_u, |p, q| ratio(p, q, mu_margin));
    let w_hi = RealMatrix::from_fn(m_a, k_u, |p, q| if vmax[(p, q)] > 0.0 { 1.0 } else { 0.0 });
    let sur = Surrogate {
        eta,
        beta_sum: &coeff.beta_sum,
        vmax: &vmax,
        w_lo: &w_lo,
        w_hi: &w_hi,
        rho_d,
    };

    let mut varrho = varrho0.clone();
    let mut cur_eta = eta.clone();
    let mut t = min_sinr(&cur_eta, &varrho, &coeff.beta_sum, rho_d);
    let mut trace = vec![t];
    let mut iterations = 0;
    let mut failures = 0;
    let mut status = SolveStatus::IterationCap;

    while iterations < max_iterations {
        let Some(prog) = sur.program(&varrho, t) else {
            status = SolveStatus::Converged;
            break;
        };
        iterations += 1;
        let sol = backend.solve(&prog)?;
        if !sol.status.is_solved() {
            failures += 1;
            status = SolveStatus::Converged;
            break;
        }
        let lay = Layout { m_a, k_u };
        let next = RealMatrix::from_fn(m_a, k_u, |p, q| {
            let w = sol.x[lay.w(p, q)].clamp(w_lo[(p, q)], w_hi[(p, q)]);
            w * vmax[(p, q)]
        });
        let mut next_eta = eta.clone();
        project_power(&mut next_eta, &next);
        let t_next = min_sinr(&next_eta, &next, &coeff.beta_sum, rho_d);
        if !(t_next >= t) {
            status = SolveStatus::Converged;
            break;
        }
        let gain = t_next - t;
        varrho = next;
        cur_eta = next_eta;
        t = t_next;
        trace.push(t);
        if gain < eps {
            status = SolveStatus::Converged;
            break;
        }
    }

    Ok(ScaOutcome {
        varrho,
        eta: cur_eta,
        t,
        trace,
        iterations,
        status,
        backend_failures: failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn surrogate_is_tangent_under_estimator() {
        let f = |x: f64, t: f64| 1.0 / (x * t);
        let (x0, t0) = (0.7, 2.5);
        assert!((taylor_surrogate(x0, t0, x0, t0) - f(x0, t0)).abs() < 1e-14);
        let h = 1e-6;
        let dx = (taylor_surrogate(x0 + h, t0, x0, t0) - taylor_surrogate(x0 - h, t0, x0, t0)) / (2.0 * h);
        let ex = (f(x0 + h, t0) - f(x0 - h, t0)) / (2.0 * h);
        assert!((dx - ex).abs() < 1e-6);
        for &(x, t) in &[(0.1, 0.3), (2.0, 5.0), (0.7, 9.0), (3.0, 0.2)] {
            assert!(taylor_surrogate(x, t, x0, t0) <= f(x, t) + 1e-12);
        }
    }
}
