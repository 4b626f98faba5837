//! MMSE channel-estimate variances for embedded pilots (EP) and
//! superimposed pilots (SP), the EP guard budget, and the pilot-fraction
//! parameterization of SP quality.
//!
//! SNRs are normalized by the noise power. Under SP a user with pilot
//! fraction `mu` spends `mu * P_max` on pilots and the rest on data, and the
//! per-path variance becomes `mu a / (mu b + c)`. The cross-user pilot and
//! data terms combine into `c`, so the link quality `varrho_pq` depends on
//! `mu_q` alone.

use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::channel_model::LargeScaleState;
use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::linalg::RealMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Ep,
    Sp,
}

/// Per-user normalized pilot SNR, data SNR and uplink power coefficient.
#[derive(Debug, Clone, PartialEq)]
pub struct UserSnrs {
    pub pilot: Vec<f64>,
    pub data: Vec<f64>,
    pub eta: Vec<f64>,
}

impl UserSnrs {
    /// EP default: the pilot impulse and the data symbols both carry `P_max`.
    pub fn ep_default(cfg: &SystemConfig) -> Self {
        let k = cfg.num_users;
        UserSnrs {
            pilot: alloc::vec![cfg.ep_pilot_power_w() / cfg.noise_power_w; k],
            data: alloc::vec![cfg.p_max_w / cfg.noise_power_w; k],
            eta: cfg.uplink_power(),
        }
    }

    /// SP split of `P_max` with pilot fractions `mu`.
    pub fn sp_split(cfg: &SystemConfig, mu: &[f64]) -> Self {
        let snr = cfg.p_max_w / cfg.noise_power_w;
        UserSnrs {
            pilot: mu.iter().map(|m| m * snr).collect(),
            data: mu.iter().map(|m| (1.0 - m) * snr).collect(),
            eta: cfg.uplink_power(),
        }
    }

    fn check(&self, users: usize) -> Result<()> {
        for (what, len) in [
            ("pilot SNRs", self.pilot.len()),
            ("data SNRs", self.data.len()),
            ("uplink power", self.eta.len()),
        ] {
            if len != users {
                return Err(Error::DimensionMismatch {
                    what,
                    expected: users,
                    found: len,
                });
            }
        }
        if self
            .pilot
            .iter()
            .chain(&self.data)
            .any(|v| !(*v >= 0.0 && v.is_finite()))
        {
            return Err(Error::Domain("SNRs must be finite and non-negative".into()));
        }
        if self.eta.iter().any(|e| !(*e > 0.0 && *e <= 1.0)) {
            return Err(Error::Domain("uplink power coefficients must lie in (0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationStats {
    pub scheme: Scheme,
    pub num_aps: usize,
    pub num_users: usize,
    pub num_paths: usize,
    /// `gamma_pq,i`, flattened as `[p][q][i]`.
    pub gamma: Vec<f64>,
    /// `varrho_pq = sum_i gamma_pq,i`.
    pub varrho: RealMatrix,
    /// `beta_pq = sum_i beta_pq,i`.
    pub beta_sum: RealMatrix,
}

impl EstimationStats {
    pub fn from_gamma(scheme: Scheme, ls: &LargeScaleState, gamma: Vec<f64>) -> Self {
        let l = ls.num_paths;
        let varrho = RealMatrix::from_fn(ls.num_aps, ls.num_users, |p, q| {
            let s = ls.index(p, q, 0);
            gamma[s..s + l].iter().sum()
        });
        EstimationStats {
            scheme,
            num_aps: ls.num_aps,
            num_users: ls.num_users,
            num_paths: l,
            gamma,
            varrho,
            beta_sum: ls.beta_sum_matrix(),
        }
    }

    pub fn gamma(&self, p: usize, q: usize, i: usize) -> f64 {
        self.gamma[(p * self.num_users + q) * self.num_paths + i]
    }

    /// Checks `0 <= gamma <= beta` entrywise, with relative slack `tol`.
    pub fn check_bounds(&self, ls: &LargeScaleState, tol: f64) -> Result<()> {
        for (j, (&g, &b)) in self.gamma.iter().zip(&ls.beta).enumerate() {
            if !(g >= 0.0 && g <= b * (1.0 + tol)) {
                return Err(Error::InvariantViolation(format!(
                    "estimate variance {g:e} outside [0, {b:e}] at flat index {j}"
                )));
            }
        }
        Ok(())
    }
}

/// Embedded-pilot MMSE variances.
///
/// The interference bracket scales with `eta_q / N` and subtracts the part of
/// user `q`'s own data that falls inside its guard region. A non-positive
/// denominator is reported rather than clamped.
pub fn gamma_ep(ls: &LargeScaleState, cfg: &SystemConfig, snr: &UserSnrs) -> Result<EstimationStats> {
    let k_u = ls.num_users;
    snr.check(k_u)?;
    let n = cfg.num_doppler_bins as f64;
    let guard = (4 * cfg.k_max + 4 * cfg.k_hat + 1) as f64;
    let mut gamma = Vec::with_capacity(ls.beta.len());
    for p in 0..ls.num_aps {
        let data_load: f64 = (0..k_u).map(|q2| snr.data[q2] * snr.eta[q2] * ls.beta_sum(p, q2)).sum();
        for q in 0..k_u {
            let eta = snr.eta[q];
            let bracket = (eta / n) * (data_load / eta - snr.data[q] * (guard / n) * ls.beta_sum(p, q));
            for &b in ls.link_betas(p, q) {
                let num = snr.pilot[q] * eta * b * b;
                let den = snr.pilot[q] * eta * b + bracket + 1.0;
                if !(den > 0.0) {
                    return Err(Error::InvariantViolation(format!(
                        "EP variance denominator {den:e} is not positive at AP {p}, user {q}"
                    )));
                }
                gamma.push(num / den);
            }
        }
    }
    Ok(EstimationStats::from_gamma(Scheme::Ep, ls, gamma))
}

/// Superimposed-pilot MMSE variances.
pub fn gamma_sp(ls: &LargeScaleState, snr: &UserSnrs) -> Result<EstimationStats> {
    let k_u = ls.num_users;
    snr.check(k_u)?;
    let mut gamma = Vec::with_capacity(ls.beta.len());
    for p in 0..ls.num_aps {
        let pilot_load: f64 = (0..k_u)
            .map(|q2| snr.pilot[q2] * snr.eta[q2] * ls.beta_sum(p, q2))
            .sum();
        let data_load: f64 = (0..k_u).map(|q2| snr.data[q2] * snr.eta[q2] * ls.beta_sum(p, q2)).sum();
        for q in 0..k_u {
            let eta = snr.eta[q];
            let other_pilots = pilot_load - snr.pilot[q] * eta * ls.beta_sum(p, q);
            for &b in ls.link_betas(p, q) {
                let num = snr.pilot[q] * eta * b * b;
                let den = snr.pilot[q] * eta * b + other_pilots + data_load + 1.0;
                if !(den > 0.0) {
                    return Err(Error::InvariantViolation(format!(
                        "SP variance denominator {den:e} is not positive at AP {p}, user {q}"
                    )));
                }
                gamma.push(num / den);
            }
        }
    }
    Ok(EstimationStats::from_gamma(Scheme::Sp, ls, gamma))
}

/// Coefficients of `gamma_pq,i(mu_q) = mu_q a_pq,i / (mu_q b_pq,i + c_p)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpCoefficients {
    pub num_aps: usize,
    pub num_users: usize,
    pub num_paths: usize,
    /// `P_max eta_q beta_pq,i^2`.
    pub a: Vec<f64>,
    /// `P_max eta_q (beta_pq,i - beta_pq)`, never positive.
    pub b: Vec<f64>,
    /// `P_max sum_q eta_q beta_pq + sigma^2`.
    pub c: Vec<f64>,
    pub varrho_max: RealMatrix,
    pub beta_sum: RealMatrix,
}

pub fn sp_coefficients(ls: &LargeScaleState, cfg: &SystemConfig) -> Result<SpCoefficients> {
    let eta = cfg.uplink_power();
    if eta.len() != ls.num_users {
        return Err(Error::DimensionMismatch {
            what: "uplink power",
            expected: ls.num_users,
            found: eta.len(),
        });
    }
    let pm = cfg.p_max_w;
    let beta_sum = ls.beta_sum_matrix();
    let c: Vec<f64> = (0..ls.num_aps)
        .map(|p| pm * (0..ls.num_users).map(|q| eta[q] * beta_sum[(p, q)]).sum::<f64>() + cfg.noise_power_w)
        .collect();
    let mut a = Vec::with_capacity(ls.beta.len());
    let mut b = Vec::with_capacity(ls.beta.len());
    for p in 0..ls.num_aps {
        for q in 0..ls.num_users {
            for &bi in ls.link_betas(p, q) {
                a.push(pm * eta[q] * bi * bi);
                // Exactly zero for a single path.
                b.push(pm * eta[q] * (bi - beta_sum[(p, q)]).min(0.0));
            }
        }
    }
    let mut coeff = SpCoefficients {
        num_aps: ls.num_aps,
        num_users: ls.num_users,
        num_paths: ls.num_paths,
        a,
        b,
        c,
        varrho_max: RealMatrix::zeros(ls.num_aps, ls.num_users),
        beta_sum,
    };
    coeff.varrho_max = RealMatrix::from_fn(ls.num_aps, ls.num_users, |p, q| coeff.varrho_link(p, q, 1.0));
    Ok(coeff)
}

impl SpCoefficients {
    fn link(&self, p: usize, q: usize) -> core::ops::Range<usize> {
        let s = (p * self.num_users + q) * self.num_paths;
        s..s + self.num_paths
    }

    /// `varrho_pq(mu)` for any `mu` in `[0, 1]`.
    pub fn varrho_link(&self, p: usize, q: usize, mu: f64) -> f64 {
        let c = self.c[p];
        self.link(p, q).map(|j| mu * self.a[j] / (mu * self.b[j] + c)).sum()
    }

    /// `d varrho_pq / d mu = sum_i a c / (mu b + c)^2`.
    pub fn dvarrho_link(&self, p: usize, q: usize, mu: f64) -> f64 {
        let c = self.c[p];
        self.link(p, q)
            .map(|j| {
                let d = mu * self.b[j] + c;
                self.a[j] * c / (d * d)
            })
            .sum()
    }

    /// Per-path variances at pilot fractions `mu`.
    pub fn stats(&self, ls: &LargeScaleState, mu: &[f64]) -> Result<EstimationStats> {
        check_mu(mu, self.num_users)?;
        let mut gamma = Vec::with_capacity(self.a.len());
        for p in 0..self.num_aps {
            for q in 0..self.num_users {
                for j in self.link(p, q) {
                    gamma.push(mu[q] * self.a[j] / (mu[q] * self.b[j] + self.c[p]));
                }
            }
        }
        Ok(EstimationStats::from_gamma(Scheme::Sp, ls, gamma))
    }
}

fn check_mu(mu: &[f64], users: usize) -> Result<()> {
    if mu.len() != users {
        return Err(Error::DimensionMismatch {
            what: "pilot fractions",
            expected: users,
            found: mu.len(),
        });
    }
    if let Some(m) = mu.iter().find(|m| !(**m > 0.0 && **m < 1.0)) {
        return Err(Error::Domain(format!("pilot fraction {m} outside (0, 1)")));
    }
    Ok(())
}

/// `varrho_pq(mu_q)` for all links.
pub fn varrho_of_mu(coeff: &SpCoefficients, mu: &[f64]) -> Result<RealMatrix> {
    check_mu(mu, coeff.num_users)?;
    Ok(RealMatrix::from_fn(coeff.num_aps, coeff.num_users, |p, q| {
        coeff.varrho_link(p, q, mu[q])
    }))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MuFit {
    pub mu: f64,
    /// `sum_p (varrho_pq(mu) - target_p)^2 / sum_p target_p^2`.
    pub residual: f64,
}

/// Least-squares pilot fraction reproducing a target column
/// `{varrho_pq}_p` for user `q`, by golden-section search on `(0, 1)`.
pub fn mu_of_varrho(coeff: &SpCoefficients, q: usize, targets: &[f64]) -> Result<MuFit> {
    if q >= coeff.num_users {
        return Err(Error::Domain(format!("user {q} out of range")));
    }
    if targets.len() != coeff.num_aps {
        return Err(Error::DimensionMismatch {
            what: "mu_of_varrho targets",
            expected: coeff.num_aps,
            found: targets.len(),
        });
    }
    let norm: f64 = targets.iter().map(|t| t * t).sum();
    if !(norm > 0.0 && norm.is_finite()) || targets.iter().any(|t| *t < 0.0) {
        return Err(Error::Domain("targets must be non-negative and not all zero".into()));
    }
    let cost = |mu: f64| -> f64 {
        targets
            .iter()
            .enumerate()
            .map(|(p, t)| {
                let d = coeff.varrho_link(p, q, mu) - t;
                d * d
            })
            .sum::<f64>()
            / norm
    };
    let inv_phi = 0.618_033_988_749_894_9;
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let (mut f1, mut f2) = (cost(x1), cost(x2));
    while hi - lo > 1e-12 {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = cost(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = cost(x2);
        }
    }
    let mu = 0.5 * (lo + hi);
    Ok(MuFit { mu, residual: cost(mu) })
}

/// EP overhead per user and the number of users that fit in one frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GuardBudget {
    pub n_guard: usize,
    pub k_u_max: usize,
}

pub fn guard_budget(ell_max: usize, k_max: usize, k_hat: usize, m: usize, n: usize) -> Result<GuardBudget> {
    let n_guard = (2 * ell_max + 1) * (4 * k_max + 4 * k_hat + 1);
    if n_guard > m * n {
        return Err(Error::EpInfeasible { users: 1, max_users: 0 });
    }
    Ok(GuardBudget {
        n_guard,
        k_u_max: m * n / n_guard,
    })
}

pub fn guard_budget_for(cfg: &SystemConfig) -> Result<GuardBudget> {
    guard_budget(
        cfg.ell_max(),
        cfg.k_max,
        cfg.k_hat,
        cfg.num_subcarriers,
        cfg.num_doppler_bins,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel_model::generate_drop;

    fn scalar_state(beta: f64) -> LargeScaleState {
        LargeScaleState::from_betas(1, 1, 1, alloc::vec![beta]).unwrap()
    }

    fn snrs(pilot: f64, data: f64, k: usize) -> UserSnrs {
        UserSnrs {
            pilot: alloc::vec![pilot; k],
            data: alloc::vec![data; k],
            eta: alloc::vec![1.0; k],
        }
    }

    #[test]
    fn ep_limits() {
        let cfg = SystemConfig::default();
        let drop = generate_drop(&cfg, 4).unwrap();
        let ls = &drop.large_scale;
        let zero = gamma_ep(ls, &cfg, &snrs(0.0, 1e13, cfg.num_users)).unwrap();
        assert!(zero.gamma.iter().all(|g| *g == 0.0));

        // Very strong pilots on unit-scale gains with light data load.
        let big = LargeScaleState::from_betas(2, 2, 2, alloc::vec![0.3, 0.7, 1.2, 0.4, 0.9, 0.1, 0.5, 0.5]).unwrap();
        let st = gamma_ep(&big, &cfg, &snrs(1e12, 1.0, 2)).unwrap();
        for (g, b) in st.gamma.iter().zip(&big.beta) {
            assert!((g / b - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn ep_single_link_large_n() {
        let cfg = SystemConfig {
            num_doppler_bins: 1 << 40,
            ..SystemConfig::default()
        };
        let (rho, beta) = (3.7, 0.8);
        let st = gamma_ep(&scalar_state(beta), &cfg, &snrs(rho, 5.0, 1)).unwrap();
        let want = rho * beta * beta / (rho * beta + 1.0);
        assert!((st.gamma[0] - want).abs() < 1e-11);
    }

    #[test]
    fn sp_scalar_formula() {
        let (rp, rd, beta) = (2.0, 3.0, 0.6);
        let st = gamma_sp(&scalar_state(beta), &snrs(rp, rd, 1)).unwrap();
        let want = rp * beta * beta / (rp * beta + rd * beta + 1.0);
        assert!((st.gamma[0] - want).abs() < 1e-15);
        let z = gamma_sp(&scalar_state(0.0), &snrs(rp, rd, 1)).unwrap();
        assert_eq!(z.gamma[0], 0.0);
    }

    #[test]
    fn sp_below_ep_for_single_user_large_n() {
        let cfg = SystemConfig {
            num_doppler_bins: 10_000,
            ..SystemConfig::default()
        };
        let ls = scalar_state(1.0);
        let s = snrs(2.0, 2.0, 1);
        let ep = gamma_ep(&ls, &cfg, &s).unwrap();
        let sp = gamma_sp(&ls, &s).unwrap();
        assert!(sp.gamma[0] <= ep.gamma[0]);
    }

    #[test]
    fn mu_form_matches_direct_sp() {
        let cfg = SystemConfig::default();
        let drop = generate_drop(&cfg, 9).unwrap();
        let ls = &drop.large_scale;
        let coeff = sp_coefficients(ls, &cfg).unwrap();
        assert!(coeff.b.iter().all(|b| *b <= 0.0));
        let mu: Vec<f64> = (0..cfg.num_users).map(|q| 0.1 + 0.1 * q as f64).collect();
        let direct = gamma_sp(ls, &UserSnrs::sp_split(&cfg, &mu)).unwrap();
        let viamu = coeff.stats(ls, &mu).unwrap();
        for (a, b) in direct.gamma.iter().zip(&viamu.gamma) {
            assert!((a - b).abs() <= 1e-12 * a.abs());
        }
    }

    #[test]
    fn single_path_has_zero_b() {
        let mut cfg = SystemConfig::default();
        cfg.num_paths = 1;
        cfg.power_delay_profile.truncate(1);
        let drop = generate_drop(&cfg, 2).unwrap();
        let coeff = sp_coefficients(&drop.large_scale, &cfg).unwrap();
        assert!(coeff.b.iter().all(|b| *b == 0.0));
    }

    #[test]
    fn varrho_endpoints_and_domain() {
        let cfg = SystemConfig::default();
        let drop = generate_drop(&cfg, 13).unwrap();
        let coeff = sp_coefficients(&drop.large_scale, &cfg).unwrap();
        assert_eq!(coeff.varrho_link(0, 0, 0.0), 0.0);
        let near_one = varrho_of_mu(&coeff, &alloc::vec![1.0 - 1e-12; cfg.num_users]).unwrap();
        assert!(
            near_one.max_abs_diff(&coeff.varrho_max)
                <= 1e-9 * coeff.varrho_max.as_slice().iter().fold(0.0, |m, v| v.max(m))
        );
        assert!(varrho_of_mu(&coeff, &alloc::vec![1.0; cfg.num_users]).is_err());
        assert!(varrho_of_mu(&coeff, &alloc::vec![0.0; cfg.num_users]).is_err());
    }

    #[test]
    fn mu_round_trip_and_endpoint() {
        let cfg = SystemConfig::default();
        let drop = generate_drop(&cfg, 17).unwrap();
        let coeff = sp_coefficients(&drop.large_scale, &cfg).unwrap();
        for &mu_star in &[0.05, 0.37, 0.5, 0.91] {
            let t: Vec<f64> = (0..cfg.num_aps).map(|p| coeff.varrho_link(p, 2, mu_star)).collect();
            let fit = mu_of_varrho(&coeff, 2, &t).unwrap();
            assert!((fit.mu - mu_star).abs() < 1e-6, "{mu_star} {}", fit.mu);
            assert!(fit.residual < 1e-10);
        }
        let t = coeff.varrho_max.column(1);
        assert!(mu_of_varrho(&coeff, 1, &t).unwrap().mu > 1.0 - 1e-6);
        assert!(mu_of_varrho(&coeff, 1, &alloc::vec![0.0; cfg.num_aps]).is_err());
    }

    #[test]
    fn mu_inverse_single_link() {
        let mut cfg = SystemConfig::default();
        cfg.num_aps = 1;
        cfg.num_users = 3;
        cfg.num_paths = 1;
        cfg.power_delay_profile.truncate(1);
        let drop = generate_drop(&cfg, 5).unwrap();
        let coeff = sp_coefficients(&drop.large_scale, &cfg).unwrap();
        let target = 0.4 * coeff.varrho_max[(0, 0)];
        // t = mu a / (mu b + c)  =>  mu = t c / (a - t b)
        let closed = target * coeff.c[0] / (coeff.a[0] - target * coeff.b[0]);
        let fit = mu_of_varrho(&coeff, 0, &[target]).unwrap();
        assert!((fit.mu - closed).abs() < 1e-8);
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let cfg = SystemConfig::default();
        let drop = generate_drop(&cfg, 23).unwrap();
        let coeff = sp_coefficients(&drop.large_scale, &cfg).unwrap();
        for k in 0..100 {
            let (p, q) = (k % cfg.num_aps, k % cfg.num_users);
            let mu = 0.01 + 0.98 * (k as f64 + 0.5) / 100.0;
            let h = 1e-6;
            let fd = (coeff.varrho_link(p, q, mu + h) - coeff.varrho_link(p, q, mu - h)) / (2.0 * h);
            let an = coeff.dvarrho_link(p, q, mu);
            assert!((fd / an - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn guard_budget_values() {
        assert_eq!(
            guard_budget(0, 0, 0, 4, 4).unwrap(),
            GuardBudget {
                n_guard: 1,
                k_u_max: 16
            }
        );
        let g = guard_budget(1, 9, 0, 32, 64).unwrap();
        assert_eq!(g.n_guard, 111);
        // Brute-force count of the guard rectangle.
        let mut count = 0;
        for dl in -1i32..=1 {
            for dk in -18i32..=18 {
                let _ = (dl, dk);
                count += 1;
            }
        }
        assert_eq!(count, g.n_guard);
        assert_eq!(g.k_u_max, 18);
        assert!(guard_budget(1, 9, 0, 4, 4).is_err());
    }
}
