//! System, channel and solver parameters.
//!
//! [`SystemConfig::default`] is the desk-scale setup (30 APs, 8 users on a
//! 1 km square at 4 GHz, 15 kHz subcarrier spacing, EVA multipath with a
//! maximum Doppler index of 9). Every field deserializes with a default so a
//! JSON document only needs to list what it changes; unknown keys are
//! rejected.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Boltzmann constant (J/K).
pub const BOLTZMANN: f64 = 1.380_649e-23;
/// Reference noise temperature (K).
pub const NOISE_TEMPERATURE_K: f64 = 290.0;

/// 3GPP extended vehicular A profile: (delay in ns, relative power in dB).
pub const EVA_PROFILE: [(f64, f64); 9] = [
    (0.0, 0.0),
    (30.0, -1.5),
    (150.0, -1.4),
    (310.0, -3.6),
    (370.0, -0.6),
    (710.0, -9.1),
    (1090.0, -7.0),
    (1730.0, -12.0),
    (2510.0, -16.9),
];

/// Thermal noise power `k_B * T_0 * bandwidth * F` in watts.
pub fn thermal_noise_w(bandwidth_hz: f64, noise_figure_db: f64) -> f64 {
    BOLTZMANN * NOISE_TEMPERATURE_K * bandwidth_hz * db_to_linear(noise_figure_db)
}

pub fn db_to_linear(db: f64) -> f64 {
    Float::powf(10.0, db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * Float::log10(x)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShadowingModel {
    Correlated,
    Uncorrelated,
}

/// Three-slope path loss with a COST231-Hata reference loss.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathLossParams {
    pub d0_km: f64,
    pub d1_km: f64,
    /// Frequency plugged into the Hata reference loss (MHz).
    pub hata_freq_mhz: f64,
    pub ap_height_m: f64,
    pub user_height_m: f64,
}

impl Default for PathLossParams {
    fn default() -> Self {
        PathLossParams {
            d0_km: 0.01,
            d1_km: 0.05,
            hata_freq_mhz: 1900.0,
            ap_height_m: 15.0,
            user_height_m: 1.65,
        }
    }
}

impl PathLossParams {
    /// COST231-Hata constant `L` in dB.
    pub fn reference_loss_db(&self) -> f64 {
        let lf = Float::log10(self.hata_freq_mhz);
        46.3 + 33.9 * lf - 13.82 * Float::log10(self.ap_height_m) - (1.1 * lf - 0.7) * self.user_height_m
            + (1.56 * lf - 0.8)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShadowingParams {
    pub model: ShadowingModel,
    pub sigma_db: f64,
    /// Weight of the AP-side field in `z = sqrt(delta) a + sqrt(1 - delta) b`.
    pub delta: f64,
    pub decorrelation_km: f64,
}

impl Default for ShadowingParams {
    fn default() -> Self {
        ShadowingParams {
            model: ShadowingModel::Correlated,
            sigma_db: 8.0,
            delta: 0.5,
            decorrelation_km: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PdpTap {
    pub delay_ns: f64,
    pub power_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverParams {
    pub eps_bisection: f64,
    pub eps_sca: f64,
    pub eps_alternating: f64,
    pub max_iterations: usize,
    /// Pilot fractions are confined to `[mu_margin, 1 - mu_margin]`.
    pub mu_margin: f64,
}

impl Default for SolverParams {
    fn default() -> Self {
        SolverParams {
            eps_bisection: 1e-3,
            eps_sca: 1e-4,
            eps_alternating: 1e-3,
            max_iterations: 30,
            mu_margin: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemConfig {
    /// M: subcarriers, i.e. delay bins of the DD grid.
    pub num_subcarriers: usize,
    /// N: Doppler bins per half-frame.
    pub num_doppler_bins: usize,
    /// N_T; must equal `2 * num_doppler_bins` when given.
    pub total_symbols: Option<usize>,
    pub subcarrier_spacing_hz: f64,
    pub carrier_hz: f64,
    pub num_aps: usize,
    pub num_users: usize,
    pub num_paths: usize,
    pub k_max: usize,
    /// Extra Doppler guard against fractional-Doppler spread (EP only).
    pub k_hat: usize,
    pub tau_max_s: f64,
    pub area_side_km: f64,
    pub wrap_around: bool,
    pub noise_power_w: f64,
    pub ap_power_w: f64,
    /// Normalized downlink SNR; `ap_power_w / noise_power_w` when absent.
    pub rho_d: Option<f64>,
    pub p_max_w: f64,
    /// Per-symbol pilot power for EP estimation; `p_max_w` when absent.
    pub ep_pilot_power_w: Option<f64>,
    /// Uplink power coefficients; all ones when absent.
    pub uplink_power: Option<Vec<f64>>,
    pub path_loss: PathLossParams,
    pub shadowing: ShadowingParams,
    pub power_delay_profile: Vec<PdpTap>,
    pub solver: SolverParams,
    /// Largest `M * N` for which dense effective-channel matrices are built.
    pub oracle_cap: usize,
}

impl Default for SystemConfig {
    fn default() -> Self {
        SystemConfig {
            num_subcarriers: 32,
            num_doppler_bins: 64,
            total_symbols: None,
            subcarrier_spacing_hz: 15e3,
            carrier_hz: 4e9,
            num_aps: 30,
            num_users: 8,
            num_paths: 9,
            k_max: 9,
            k_hat: 0,
            tau_max_s: 2.5e-6,
            area_side_km: 1.0,
            wrap_around: true,
            // -108 dBm
            noise_power_w: db_to_linear(-108.0) * 1e-3,
            ap_power_w: 1.0,
            rho_d: None,
            p_max_w: 1.0,
            ep_pilot_power_w: None,
            uplink_power: None,
            path_loss: PathLossParams::default(),
            shadowing: ShadowingParams::default(),
            power_delay_profile: EVA_PROFILE
                .iter()
                .map(|&(delay_ns, power_db)| PdpTap { delay_ns, power_db })
                .collect(),
            solver: SolverParams::default(),
            oracle_cap: 256,
        }
    }
}

impl SystemConfig {
    pub fn total_symbols(&self) -> usize {
        self.total_symbols.unwrap_or(2 * self.num_doppler_bins)
    }

    /// Downlink pre-log factor `1 - N_ul / N_T`.
    pub fn omega_dl(&self) -> f64 {
        1.0 - self.num_doppler_bins as f64 / self.total_symbols() as f64
    }

    pub fn rho_d(&self) -> f64 {
        self.rho_d.unwrap_or(self.ap_power_w / self.noise_power_w)
    }

    pub fn ep_pilot_power_w(&self) -> f64 {
        self.ep_pilot_power_w.unwrap_or(self.p_max_w)
    }

    pub fn uplink_power(&self) -> Vec<f64> {
        match &self.uplink_power {
            Some(v) => v.clone(),
            None => vec![1.0; self.num_users],
        }
    }

    /// Largest delay index `round(tau_max * M * delta_f)`.
    pub fn ell_max(&self) -> usize {
        Float::round(self.tau_max_s * self.num_subcarriers as f64 * self.subcarrier_spacing_hz) as usize
    }

    /// Largest admissible `k_hat`, or `None` when even `k_hat = 0` does not fit.
    pub fn k_hat_max(&self) -> Option<usize> {
        let used = 4 * self.k_max + 1;
        if used > self.num_doppler_bins {
            None
        } else {
            Some((self.num_doppler_bins - used) / 4)
        }
    }

    /// Power-delay-profile weights normalized to unit sum.
    pub fn pdp_weights(&self) -> Vec<f64> {
        let raw: Vec<f64> = self
            .power_delay_profile
            .iter()
            .map(|t| db_to_linear(t.power_db))
            .collect();
        let total: f64 = raw.iter().sum();
        raw.into_iter().map(|w| w / total).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.num_subcarriers;
        let n = self.num_doppler_bins;
        if m == 0 || n == 0 {
            return Err(Error::config("num_subcarriers/num_doppler_bins", "must be positive"));
        }
        if self.total_symbols() != 2 * n {
            return Err(Error::config(
                "total_symbols",
                format!("must equal 2 * num_doppler_bins = {}", 2 * n),
            ));
        }
        if self.num_aps == 0 || self.num_users == 0 {
            return Err(Error::config("num_aps/num_users", "must be positive"));
        }
        if self.num_paths == 0 || self.num_paths != self.power_delay_profile.len() {
            return Err(Error::config(
                "num_paths",
                format!(
                    "{} paths but the power-delay profile has {} taps",
                    self.num_paths,
                    self.power_delay_profile.len()
                ),
            ));
        }
        if self.k_max + 1 > n {
            return Err(Error::config("k_max", "must be at most num_doppler_bins - 1"));
        }
        match self.k_hat_max() {
            None => return Err(Error::config("k_max", "4 * k_max + 1 exceeds num_doppler_bins")),
            Some(max) if self.k_hat > max => return Err(Error::config("k_hat", format!("must be at most {max}"))),
            _ => {}
        }
        if !(self.tau_max_s >= 0.0) || self.ell_max() + 1 > m {
            return Err(Error::config(
                "tau_max_s",
                "delay spread must map into [0, num_subcarriers - 1]",
            ));
        }
        let positive = [
            ("subcarrier_spacing_hz", self.subcarrier_spacing_hz),
            ("carrier_hz", self.carrier_hz),
            ("area_side_km", self.area_side_km),
            ("noise_power_w", self.noise_power_w),
            ("ap_power_w", self.ap_power_w),
            ("rho_d", self.rho_d()),
            ("p_max_w", self.p_max_w),
            ("ep_pilot_power_w", self.ep_pilot_power_w()),
            ("path_loss.d0_km", self.path_loss.d0_km),
            ("shadowing.decorrelation_km", self.shadowing.decorrelation_km),
            ("solver.eps_bisection", self.solver.eps_bisection),
            ("solver.eps_sca", self.solver.eps_sca),
            ("solver.eps_alternating", self.solver.eps_alternating),
            ("solver.mu_margin", self.solver.mu_margin),
        ];
        for (field, value) in positive {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::config(field, format!("must be positive, got {value}")));
            }
        }
        if self.path_loss.d1_km < self.path_loss.d0_km {
            return Err(Error::config("path_loss.d1_km", "must not be below d0_km"));
        }
        if !(0.0..=1.0).contains(&self.shadowing.delta) {
            return Err(Error::config("shadowing.delta", "must lie in [0, 1]"));
        }
        if !(self.shadowing.sigma_db >= 0.0) {
            return Err(Error::config("shadowing.sigma_db", "must be non-negative"));
        }
        if self.solver.max_iterations == 0 {
            return Err(Error::config("solver.max_iterations", "must be positive"));
        }
        if self.solver.mu_margin >= 0.5 {
            return Err(Error::config("solver.mu_margin", "must be below 0.5"));
        }
        let eta = self.uplink_power();
        if eta.len() != self.num_users {
            return Err(Error::config(
                "uplink_power",
                format!("expected {} entries, got {}", self.num_users, eta.len()),
            ));
        }
        if eta.iter().any(|&e| !(e > 0.0 && e <= 1.0)) {
            return Err(Error::config("uplink_power", "entries must lie in (0, 1]"));
        }
        if self.power_delay_profile.iter().any(|t| !(t.delay_ns >= 0.0)) {
            return Err(Error::config("power_delay_profile", "delays must be non-negative"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let cfg = SystemConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.total_symbols(), 128);
        assert_eq!(cfg.omega_dl(), 0.5);
        assert_eq!(cfg.ell_max(), 1);
        assert_eq!(cfg.k_hat_max(), Some(6));
    }

    #[test]
    fn noise_power_matches_thermal_formula_for_32_subcarriers() {
        // k_B T_0 (M delta_f) F with M = 32, F = 9 dB is about -108 dBm.
        let n = thermal_noise_w(32.0 * 15e3, 9.0);
        let dbm = linear_to_db(n * 1e3);
        assert!((dbm - (-108.0)).abs() < 0.5, "{dbm}");
    }

    #[test]
    fn hata_reference_loss_at_1900_mhz() {
        let l = PathLossParams::default().reference_loss_db();
        assert!((l - 140.7).abs() < 0.1, "{l}");
    }

    #[test]
    fn pdp_weights_sum_to_one() {
        let w = SystemConfig::default().pdp_weights();
        assert_eq!(w.len(), 9);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_values() {
        let mut cfg = SystemConfig::default();
        cfg.total_symbols = Some(100);
        assert!(cfg.validate().is_err());

        let mut cfg = SystemConfig::default();
        cfg.k_hat = 7;
        assert!(cfg.validate().is_err());

        let mut cfg = SystemConfig::default();
        cfg.num_paths = 8;
        assert!(cfg.validate().is_err());

        let mut cfg = SystemConfig::default();
        cfg.uplink_power = Some(vec![1.0; 7]);
        assert!(cfg.validate().is_err());

        let mut cfg = SystemConfig::default();
        cfg.uplink_power = Some(vec![0.0; 8]);
        assert!(cfg.validate().is_err());

        let mut cfg = SystemConfig::default();
        cfg.noise_power_w = -1.0;
        assert!(cfg.validate().is_err());
    }
}
