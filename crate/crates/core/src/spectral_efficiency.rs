//! Closed-form downlink SINR and SE under conjugate precoding, plus a Monte
//! Carlo oracle that rebuilds the same quantity from dense effective-channel
//! matrices.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
use num_traits::Float;

use crate::channel_model::LargeScaleState;
use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::estimation::EstimationStats;
use crate::linalg::{ComplexMatrix, RealMatrix};
use crate::otfs::{link_taps, tap_operator};
use crate::rng::{self, Stream};

/// Slack allowed on the per-AP power constraint.
pub const POWER_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy)]
pub struct SinrInputs<'a> {
    pub eta: &'a RealMatrix,
    pub varrho: &'a RealMatrix,
    pub beta_sum: &'a RealMatrix,
    pub rho_d: f64,
    pub omega_dl: f64,
}

impl<'a> SinrInputs<'a> {
    pub fn new(eta: &'a RealMatrix, stats: &'a EstimationStats, rho_d: f64, omega_dl: f64) -> Self {
        SinrInputs {
            eta,
            varrho: &stats.varrho,
            beta_sum: &stats.beta_sum,
            rho_d,
            omega_dl,
        }
    }

    pub fn num_users(&self) -> usize {
        self.eta.cols()
    }

    /// Rejects negative coefficients and overloaded APs.
    pub fn validate(&self) -> Result<()> {
        if self.eta.shape() != self.varrho.shape() || self.eta.shape() != self.beta_sum.shape() {
            return Err(Error::DimensionMismatch {
                what: "SinrInputs matrices",
                expected: self.varrho.rows() * self.varrho.cols(),
                found: self.eta.rows() * self.eta.cols(),
            });
        }
        if !(self.omega_dl > 0.0 && self.omega_dl < 1.0) {
            return Err(Error::Domain(format!(
                "pre-log factor {} outside (0, 1)",
                self.omega_dl
            )));
        }
        if self.eta.as_slice().iter().any(|e| !(*e >= 0.0)) {
            return Err(Error::Domain("power-control coefficients must be non-negative".into()));
        }
        for (ap, load) in ap_loads(self.eta, self.varrho).into_iter().enumerate() {
            if load > 1.0 + POWER_SLACK {
                return Err(Error::PowerConstraintViolated { ap, load });
            }
        }
        Ok(())
    }
}

/// `sum_q eta_pq varrho_pq` for every AP.
pub fn ap_loads(eta: &RealMatrix, varrho: &RealMatrix) -> Vec<f64> {
    (0..eta.rows())
        .map(|p| eta.row(p).iter().zip(varrho.row(p)).map(|(e, v)| e * v).sum())
        .collect()
}

/// Closed-form SINR without input validation; used inside solver loops.
pub fn sinr_unchecked(eta: &RealMatrix, varrho: &RealMatrix, beta_sum: &RealMatrix, rho_d: f64, q: usize) -> f64 {
    let m_a = eta.rows();
    let mut signal = 0.0;
    let mut interference = 0.0;
    for p in 0..m_a {
        signal += Float::sqrt(eta[(p, q)]) * varrho[(p, q)];
        let load: f64 = eta.row(p).iter().zip(varrho.row(p)).map(|(e, v)| e * v).sum();
        interference += beta_sum[(p, q)] * load;
    }
    rho_d * signal * signal / (rho_d * interference + 1.0)
}

/// `rho (sum_p sqrt(eta_pq) varrho_pq)^2 / (rho sum_p beta_pq sum_q' eta_pq' varrho_pq' + 1)`.
pub fn sinr_dl(inp: &SinrInputs<'_>, q: usize) -> Result<f64> {
    inp.validate()?;
    if q >= inp.num_users() {
        return Err(Error::Domain(format!("user {q} out of range")));
    }
    Ok(sinr_unchecked(inp.eta, inp.varrho, inp.beta_sum, inp.rho_d, q))
}

pub fn sinr_all(inp: &SinrInputs<'_>) -> Result<Vec<f64>> {
    inp.validate()?;
    Ok((0..inp.num_users())
        .map(|q| sinr_unchecked(inp.eta, inp.varrho, inp.beta_sum, inp.rho_d, q))
        .collect())
}

pub fn se_from_sinr(sinr: f64, omega_dl: f64) -> f64 {
    omega_dl * Float::log2(1.0 + sinr)
}

pub fn se_dl(inp: &SinrInputs<'_>, q: usize) -> Result<f64> {
    Ok(se_from_sinr(sinr_dl(inp, q)?, inp.omega_dl))
}

pub fn se_all(inp: &SinrInputs<'_>) -> Result<Vec<f64>> {
    Ok(sinr_all(inp)?
        .into_iter()
        .map(|s| se_from_sinr(s, inp.omega_dl))
        .collect())
}

/// The same SINR written path by path, with the interference of other users
/// expressed relative to `eta_pq`. Links with `eta_pq = 0` contribute only
/// through the other users' terms.
pub fn sinr_per_path(ls: &LargeScaleState, stats: &EstimationStats, eta: &RealMatrix, rho_d: f64, q: usize) -> f64 {
    let (m_a, k_u, l) = (ls.num_aps, ls.num_users, ls.num_paths);
    let mut num = 0.0;
    let mut den = 0.0;
    for p in 0..m_a {
        let e = eta[(p, q)];
        let own: f64 = (0..l).map(|j| stats.gamma(p, q, j)).sum();
        for i in 0..l {
            num += Float::sqrt(e) * stats.gamma(p, q, i);
        }
        let beta: f64 = (0..l).map(|i| ls.beta(p, q, i)).sum();
        let mut others = 0.0;
        for q2 in (0..k_u).filter(|&q2| q2 != q) {
            for j in 0..l {
                others += eta[(p, q2)] * stats.gamma(p, q2, j);
            }
        }
        den += if e > 0.0 {
            e * beta * (own + others / e)
        } else {
            beta * others
        };
    }
    rho_d * num * num / (rho_d * den + 1.0)
}

/// Result of the Monte Carlo SINR check.
#[derive(Debug, Clone, PartialEq)]
pub struct McSinrEstimate {
    pub sinr: Vec<f64>,
    pub std_err: Vec<f64>,
    /// Analytic `|DS|^2`.
    pub desired: Vec<f64>,
    /// Sample `E|BU|^2`, averaged over grid entries.
    pub beamforming_uncertainty: Vec<f64>,
    /// Sample self-interference from other grid entries of the same user.
    pub self_interference: Vec<f64>,
    /// Sample interference from other users' streams.
    pub multiuser_interference: Vec<f64>,
    pub draws: usize,
    /// Set when some user's relative standard error exceeds
    /// [`MC_PRECISION_TARGET`].
    pub imprecise: bool,
}

pub const MC_PRECISION_TARGET: f64 = 0.05;

/// Monte Carlo estimate of the downlink SINR from exact effective channels.
///
/// Each draw splits `h = h_hat + e` with `h_hat ~ CN(0, gamma)` and
/// independent `e ~ CN(0, beta - gamma)`, forms
/// `C_qq' = sum_p sqrt(eta_pq') H_pq H_hat_pq'^H` and accumulates the
/// uncertainty and interference energy seen by user `q`, averaged over the
/// `MN` grid entries. The desired-signal amplitude uses its analytic mean.
pub fn mc_sinr_oracle(
    ls: &LargeScaleState,
    stats: &EstimationStats,
    eta: &RealMatrix,
    cfg: &SystemConfig,
    n_draws: usize,
    seed: u64,
) -> Result<McSinrEstimate> {
    let (m, n) = (cfg.num_subcarriers, cfg.num_doppler_bins);
    let size = m * n;
    if size > cfg.oracle_cap {
        return Err(Error::OracleTooLarge {
            size,
            cap: cfg.oracle_cap,
        });
    }
    if n_draws < 2 {
        return Err(Error::Domain("at least two draws are needed".into()));
    }
    let (m_a, k_u, l) = (ls.num_aps, ls.num_users, ls.num_paths);
    let rho = cfg.rho_d();
    let sqrt_rho = Float::sqrt(rho);

    // Per-path operators T_pq,i and their products G = T_pq,i T_pq',j^H.
    let mut ops = Vec::with_capacity(m_a * k_u * l);
    for p in 0..m_a {
        for q in 0..k_u {
            for tap in link_taps(ls, p, q) {
                ops.push(tap_operator(&tap, m, n, cfg.oracle_cap)?);
            }
        }
    }
    let kl = k_u * l;
    let mut grams = Vec::with_capacity(m_a * kl * kl);
    for p in 0..m_a {
        for a in 0..kl {
            for b in 0..kl {
                grams.push(ops[p * kl + a].mul_adjoint(&ops[p * kl + b]));
            }
        }
    }
    let gram = |p: usize, q: usize, i: usize, q2: usize, j: usize| &grams[(p * kl + q * l + i) * kl + q2 * l + j];

    let desired_amp: Vec<f64> = (0..k_u)
        .map(|q| {
            sqrt_rho
                * (0..m_a)
                    .map(|p| Float::sqrt(eta[(p, q)]) * stats.varrho[(p, q)])
                    .sum::<f64>()
        })
        .collect();

    let mut rng = rng::stream(seed, Stream::Gains);
    let mut sum_x = vec![0.0; k_u];
    let mut sum_x2 = vec![0.0; k_u];
    let mut sum_bu = vec![0.0; k_u];
    let mut sum_si = vec![0.0; k_u];
    let mut sum_mui = vec![0.0; k_u];
    let mut h = vec![Complex64::new(0.0, 0.0); ls.beta.len()];
    let mut h_hat = h.clone();
    let mut c = ComplexMatrix::zeros(size, size);
    let inv_size = 1.0 / size as f64;

    for _ in 0..n_draws {
        for (idx, (&b, &g)) in ls.beta.iter().zip(&stats.gamma).enumerate() {
            let est = rng::complex_gaussian(&mut rng, g);
            let err = rng::complex_gaussian(&mut rng, (b - g).max(0.0));
            h_hat[idx] = est;
            h[idx] = est + err;
        }
        for q in 0..k_u {
            let (mut bu, mut si, mut mui) = (0.0, 0.0, 0.0);
            for q2 in 0..k_u {
                c.fill_zero();
                for p in 0..m_a {
                    let w = sqrt_rho * Float::sqrt(eta[(p, q2)]);
                    if w == 0.0 {
                        continue;
                    }
                    for i in 0..l {
                        let hi = h[ls.index(p, q, i)];
                        for j in 0..l {
                            let coef = hi * h_hat[ls.index(p, q2, j)].conj() * w;
                            c.add_scaled(coef, gram(p, q, i, q2, j));
                        }
                    }
                }
                if q2 == q {
                    for r in 0..size {
                        for r2 in 0..size {
                            let v = c[(r, r2)];
                            if r == r2 {
                                bu += (v - desired_amp[q]).norm_sqr();
                            } else {
                                si += v.norm_sqr();
                            }
                        }
                    }
                } else {
                    mui += c.as_slice().iter().map(|v| v.norm_sqr()).sum::<f64>();
                }
            }
            let (bu, si, mui) = (bu * inv_size, si * inv_size, mui * inv_size);
            let x = bu + si + mui;
            sum_x[q] += x;
            sum_x2[q] += x * x;
            sum_bu[q] += bu;
            sum_si[q] += si;
            sum_mui[q] += mui;
        }
    }

    let nd = n_draws as f64;
    let mut out = McSinrEstimate {
        sinr: vec![0.0; k_u],
        std_err: vec![0.0; k_u],
        desired: desired_amp.iter().map(|a| a * a).collect(),
        beamforming_uncertainty: sum_bu.iter().map(|v| v / nd).collect(),
        self_interference: sum_si.iter().map(|v| v / nd).collect(),
        multiuser_interference: sum_mui.iter().map(|v| v / nd).collect(),
        draws: n_draws,
        imprecise: false,
    };
    for q in 0..k_u {
        let mean = sum_x[q] / nd;
        let var = ((sum_x2[q] / nd - mean * mean) * nd / (nd - 1.0)).max(0.0);
        let den = mean + 1.0;
        let ds = out.desired[q];
        out.sinr[q] = ds / den;
        // Delta method on ds / (mean + 1).
        out.std_err[q] = ds / (den * den) * Float::sqrt(var / nd);
        if out.sinr[q] > 0.0 && out.std_err[q] / out.sinr[q] > MC_PRECISION_TARGET {
            out.imprecise = true;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimation::{gamma_sp, UserSnrs};

    fn m1(v: f64) -> RealMatrix {
        RealMatrix::filled(1, 1, v)
    }

    #[test]
    fn zero_power_gives_zero_sinr_and_se() {
        let eta = RealMatrix::zeros(2, 2);
        let v = RealMatrix::filled(2, 2, 0.3);
        let b = RealMatrix::filled(2, 2, 0.5);
        let inp = SinrInputs {
            eta: &eta,
            varrho: &v,
            beta_sum: &b,
            rho_d: 10.0,
            omega_dl: 0.5,
        };
        assert_eq!(sinr_all(&inp).unwrap(), vec![0.0, 0.0]);
        assert_eq!(se_dl(&inp, 1).unwrap(), 0.0);
        assert_eq!(se_from_sinr(1.0, 0.5), 0.5);
    }

    #[test]
    fn scalar_reduction() {
        let (rho, e, g, b) = (20.0, 0.8, 0.4, 0.7);
        let (eta, v, bs) = (m1(e), m1(g), m1(b));
        let inp = SinrInputs {
            eta: &eta,
            varrho: &v,
            beta_sum: &bs,
            rho_d: rho,
            omega_dl: 0.5,
        };
        let want = rho * e * g * g / (rho * e * b * g + 1.0);
        assert!((sinr_dl(&inp, 0).unwrap() - want).abs() < 1e-14);
    }

    #[test]
    fn overloaded_ap_is_rejected() {
        let (eta, v, bs) = (m1(2.0), m1(0.6), m1(1.0));
        let inp = SinrInputs {
            eta: &eta,
            varrho: &v,
            beta_sum: &bs,
            rho_d: 1.0,
            omega_dl: 0.5,
        };
        assert!(matches!(
            sinr_dl(&inp, 0),
            Err(Error::PowerConstraintViolated { ap: 0, .. })
        ));
    }

    #[test]
    fn homogeneity_under_gain_rescaling() {
        // varrho, beta -> alpha *, eta -> eta / alpha keeps loads, and
        // rho -> rho / alpha then leaves the SINR unchanged.
        let eta = RealMatrix::from_vec(2, 2, vec![0.5, 0.3, 0.2, 0.9]).unwrap();
        let v = RealMatrix::from_vec(2, 2, vec![0.4, 0.7, 0.9, 0.2]).unwrap();
        let b = RealMatrix::from_vec(2, 2, vec![0.6, 1.0, 1.1, 0.5]).unwrap();
        let alpha = 7.5;
        let base = SinrInputs {
            eta: &eta,
            varrho: &v,
            beta_sum: &b,
            rho_d: 3.0,
            omega_dl: 0.5,
        };
        let eta2 = eta.map(|x| x / alpha);
        let v2 = v.map(|x| x * alpha);
        let b2 = b.map(|x| x * alpha);
        let scaled = SinrInputs {
            eta: &eta2,
            varrho: &v2,
            beta_sum: &b2,
            rho_d: 3.0 / alpha,
            omega_dl: 0.5,
        };
        for q in 0..2 {
            let (a, c) = (sinr_dl(&base, q).unwrap(), sinr_dl(&scaled, q).unwrap());
            assert!((a / c - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn eta_scaling_splits_numerator_and_interference() {
        let eta = RealMatrix::from_vec(2, 2, vec![0.5, 0.3, 0.2, 0.9]).unwrap();
        let v = RealMatrix::from_vec(2, 2, vec![0.4, 0.7, 0.9, 0.2]).unwrap();
        let b = RealMatrix::from_vec(2, 2, vec![0.6, 1.0, 1.1, 0.5]).unwrap();
        let rho = 4.0;
        let alpha = 0.37;
        let eta_a = eta.map(|x| x * alpha);
        for q in 0..2 {
            let s1 = sinr_unchecked(&eta, &v, &b, rho, q);
            let s2 = sinr_unchecked(&eta_a, &v, &b, rho, q);
            // s = rho S / (rho I + 1) and s_alpha = alpha rho S / (alpha rho I + 1).
            let num: f64 = (0..2).map(|p| eta[(p, q)].sqrt() * v[(p, q)]).sum();
            let s_num = rho * num * num;
            let i1 = s_num / s1 - 1.0;
            assert!((s2 - alpha * s_num / (alpha * i1 + 1.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn se_increases_with_own_varrho() {
        let eta = RealMatrix::from_vec(2, 2, vec![0.5, 0.3, 0.2, 0.9]).unwrap();
        let v = RealMatrix::from_vec(2, 2, vec![0.4, 0.7, 0.9, 0.2]).unwrap();
        let b = RealMatrix::from_vec(2, 2, vec![0.6, 1.0, 1.1, 0.5]).unwrap();
        for (p, q) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
            let mut v2 = v.clone();
            v2[(p, q)] += 1e-6;
            let s1 = sinr_unchecked(&eta, &v, &b, 5.0, q);
            let s2 = sinr_unchecked(&eta, &v2, &b, 5.0, q);
            assert!(s2 > s1);
        }
    }

    #[test]
    fn per_path_form_agrees() {
        let cfg = SystemConfig::default();
        let drop = crate::channel_model::generate_drop(&cfg, 3).unwrap();
        let ls = &drop.large_scale;
        let stats = gamma_sp(ls, &UserSnrs::sp_split(&cfg, &vec![0.5; cfg.num_users])).unwrap();
        let eta = crate::power_control::uniform_eta(&stats).unwrap();
        let inp = SinrInputs::new(&eta, &stats, cfg.rho_d(), cfg.omega_dl());
        for q in 0..cfg.num_users {
            let a = sinr_dl(&inp, q).unwrap();
            let b = sinr_per_path(ls, &stats, &eta, cfg.rho_d(), q);
            assert!((a / b - 1.0).abs() < 1e-12);
        }
    }

    fn tiny_cfg() -> SystemConfig {
        SystemConfig {
            num_subcarriers: 2,
            num_doppler_bins: 2,
            num_aps: 1,
            num_users: 1,
            num_paths: 1,
            k_max: 0,
            rho_d: Some(5.0),
            power_delay_profile: vec![crate::config::PdpTap {
                delay_ns: 0.0,
                power_db: 0.0,
            }],
            ..SystemConfig::default()
        }
    }

    #[test]
    fn oracle_matches_single_link() {
        let cfg = tiny_cfg();
        let ls = LargeScaleState::from_betas(1, 1, 1, vec![1.0]).unwrap();
        let stats = EstimationStats::from_gamma(crate::estimation::Scheme::Sp, &ls, vec![0.6]);
        let eta = m1(1.0 / 0.6);
        let mc = mc_sinr_oracle(&ls, &stats, &eta, &cfg, 10_000, 1).unwrap();
        let cf = sinr_unchecked(&eta, &stats.varrho, &stats.beta_sum, 5.0, 0);
        assert!((mc.sinr[0] / cf - 1.0).abs() < 0.05, "{} {}", mc.sinr[0], cf);
    }

    #[test]
    fn oracle_zero_power() {
        let cfg = tiny_cfg();
        let ls = LargeScaleState::from_betas(1, 1, 1, vec![1.0]).unwrap();
        let stats = EstimationStats::from_gamma(crate::estimation::Scheme::Sp, &ls, vec![0.6]);
        let mc = mc_sinr_oracle(&ls, &stats, &m1(0.0), &cfg, 100, 1).unwrap();
        assert_eq!(mc.sinr[0], 0.0);
        assert_eq!(mc.beamforming_uncertainty[0], 0.0);
        assert_eq!(mc.self_interference[0], 0.0);
        assert_eq!(mc.multiuser_interference[0], 0.0);
    }
}
