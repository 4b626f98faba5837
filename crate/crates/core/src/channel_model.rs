//! Random drops: AP/user placement on a wrapped square, three-slope path
//! loss, two-component correlated shadowing and the delay-Doppler taps of
//! every AP-user link.
//!
//! Distances are in kilometres throughout. Shadowing is drawn once per link
//! and shared by all of its paths; the per-path split of the large-scale gain
//! follows the normalized power-delay profile.

use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;
use rand::RngExt;
use serde::{Deserialize, Serialize};

use crate::config::{db_to_linear, PathLossParams, ShadowingModel, SystemConfig};
use crate::error::{Error, Result};
use crate::linalg::{Cholesky, RealMatrix};
use crate::rng::{self, DropRng, Stream};

/// Diagonal loading applied before factoring a shadowing covariance.
pub const SHADOWING_JITTER: f64 = 1e-12;

pub type Position = [f64; 2];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Topology {
    pub ap_positions: Vec<Position>,
    pub user_positions: Vec<Position>,
    pub side_km: f64,
    pub wrap: bool,
}

impl Topology {
    pub fn distance(&self, a: Position, b: Position) -> f64 {
        wrapped_distance(a, b, self.side_km, self.wrap)
    }

    pub fn ap_user_distance(&self, p: usize, q: usize) -> f64 {
        self.distance(self.ap_positions[p], self.user_positions[q])
    }

    /// Shifts every node by `offset` modulo the square side.
    pub fn translated(&self, offset: Position) -> Topology {
        let side = self.side_km;
        let wrap = |x: f64| {
            let r = x % side;
            if r < 0.0 {
                r + side
            } else {
                r
            }
        };
        let shift = |v: &Position| [wrap(v[0] + offset[0]), wrap(v[1] + offset[1])];
        Topology {
            ap_positions: self.ap_positions.iter().map(shift).collect(),
            user_positions: self.user_positions.iter().map(shift).collect(),
            side_km: self.side_km,
            wrap: self.wrap,
        }
    }
}

/// Euclidean distance, or the shortest of the nine torus images when `wrap`.
pub fn wrapped_distance(a: Position, b: Position, side: f64, wrap: bool) -> f64 {
    let mut dx = Float::abs(a[0] - b[0]);
    let mut dy = Float::abs(a[1] - b[1]);
    if wrap {
        dx = dx.min(side - dx);
        dy = dy.min(side - dy);
    }
    Float::sqrt(dx * dx + dy * dy)
}

pub fn generate_topology(cfg: &SystemConfig, seed: u64) -> Topology {
    let mut rng = rng::stream(seed, Stream::Topology);
    let side = cfg.area_side_km;
    let mut draw = |count: usize| -> Vec<Position> {
        (0..count)
            .map(|_| [rng.random::<f64>() * side, rng.random::<f64>() * side])
            .collect()
    };
    let ap_positions = draw(cfg.num_aps);
    let user_positions = draw(cfg.num_users);
    Topology {
        ap_positions,
        user_positions,
        side_km: side,
        wrap: cfg.wrap_around,
    }
}

/// Three-slope large-scale gain in dB (negative) at distance `d_km`.
pub fn path_loss_db(d_km: f64, params: &PathLossParams) -> f64 {
    let l = params.reference_loss_db();
    let (d0, d1) = (params.d0_km, params.d1_km);
    if d_km > d1 {
        -l - 35.0 * Float::log10(d_km)
    } else if d_km > d0 {
        -l - 15.0 * Float::log10(d1) - 20.0 * Float::log10(d_km)
    } else {
        -l - 15.0 * Float::log10(d1) - 20.0 * Float::log10(d0)
    }
}

/// Exponential correlation `2^(-d / d_decorr)` between nodes.
pub fn shadowing_covariance(positions: &[Position], side: f64, wrap: bool, decorrelation_km: f64) -> RealMatrix {
    let n = positions.len();
    RealMatrix::from_fn(n, n, |i, j| {
        let d = wrapped_distance(positions[i], positions[j], side, wrap);
        Float::powf(2.0, -d / decorrelation_km)
    })
}

/// One zero-mean, unit-variance Gaussian field sampled at `positions`.
pub fn sample_field(
    positions: &[Position],
    side: f64,
    wrap: bool,
    decorrelation_km: f64,
    rng: &mut DropRng,
) -> Result<Vec<f64>> {
    let cov = shadowing_covariance(positions, side, wrap, decorrelation_km);
    let chol = Cholesky::factor(&cov, SHADOWING_JITTER)?;
    let white: Vec<f64> = (0..positions.len()).map(|_| rng::standard_normal(rng)).collect();
    Ok(chol.mul_lower(&white))
}

/// AP-side and user-side fields `(a, b)` used by the correlated model.
pub fn shadowing_fields(topo: &Topology, cfg: &SystemConfig, rng: &mut DropRng) -> Result<(Vec<f64>, Vec<f64>)> {
    let d = cfg.shadowing.decorrelation_km;
    let a = sample_field(&topo.ap_positions, topo.side_km, topo.wrap, d, rng)?;
    let b = sample_field(&topo.user_positions, topo.side_km, topo.wrap, d, rng)?;
    Ok((a, b))
}

/// Shadowing in dB for every link, `M_a x K_u`.
///
/// Correlated model: `sigma * (sqrt(delta) a_p + sqrt(1 - delta) b_q)` on
/// links longer than `d1`, independent `sigma * N(0, 1)` on shorter ones.
pub fn correlated_shadowing(topo: &Topology, cfg: &SystemConfig, seed: u64) -> Result<RealMatrix> {
    let mut rng = rng::stream(seed, Stream::Shadowing);
    let (m_a, k_u) = (topo.ap_positions.len(), topo.user_positions.len());
    let sigma = cfg.shadowing.sigma_db;
    let mut out = RealMatrix::zeros(m_a, k_u);
    match cfg.shadowing.model {
        ShadowingModel::Uncorrelated => {
            for v in out.as_mut_slice() {
                *v = sigma * rng::standard_normal(&mut rng);
            }
        }
        ShadowingModel::Correlated => {
            let (a, b) = shadowing_fields(topo, cfg, &mut rng)?;
            let delta = cfg.shadowing.delta;
            let (wa, wb) = (Float::sqrt(delta), Float::sqrt(1.0 - delta));
            for p in 0..m_a {
                for q in 0..k_u {
                    let z = if topo.ap_user_distance(p, q) > cfg.path_loss.d1_km {
                        wa * a[p] + wb * b[q]
                    } else {
                        rng::standard_normal(&mut rng)
                    };
                    out[(p, q)] = sigma * z;
                }
            }
        }
    }
    Ok(out)
}

/// Per-path large-scale gains and delay-Doppler tap positions, stored
/// flattened as `[p][q][i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LargeScaleState {
    pub num_aps: usize,
    pub num_users: usize,
    pub num_paths: usize,
    pub ell_max: usize,
    pub k_max: usize,
    pub beta: Vec<f64>,
    pub delay_idx: Vec<usize>,
    pub doppler_idx: Vec<i32>,
    pub doppler_frac: Vec<f64>,
}

impl LargeScaleState {
    #[inline]
    pub fn index(&self, p: usize, q: usize, i: usize) -> usize {
        (p * self.num_users + q) * self.num_paths + i
    }

    #[inline]
    pub fn beta(&self, p: usize, q: usize, i: usize) -> f64 {
        self.beta[self.index(p, q, i)]
    }

    pub fn link_betas(&self, p: usize, q: usize) -> &[f64] {
        let s = self.index(p, q, 0);
        &self.beta[s..s + self.num_paths]
    }

    pub fn beta_sum(&self, p: usize, q: usize) -> f64 {
        self.link_betas(p, q).iter().sum()
    }

    /// `beta_pq = sum_i beta_pq,i` as an `M_a x K_u` matrix.
    pub fn beta_sum_matrix(&self) -> RealMatrix {
        RealMatrix::from_fn(self.num_aps, self.num_users, |p, q| self.beta_sum(p, q))
    }

    /// Builds a state from explicit gains with all taps at the origin, which
    /// is all the closed-form expressions need.
    pub fn from_betas(num_aps: usize, num_users: usize, num_paths: usize, beta: Vec<f64>) -> Result<Self> {
        let n = num_aps * num_users * num_paths;
        if beta.len() != n {
            return Err(Error::DimensionMismatch {
                what: "LargeScaleState::from_betas",
                expected: n,
                found: beta.len(),
            });
        }
        Ok(LargeScaleState {
            num_aps,
            num_users,
            num_paths,
            ell_max: 0,
            k_max: 0,
            beta,
            delay_idx: vec![0; n],
            doppler_idx: vec![0; n],
            doppler_frac: vec![0.0; n],
        })
    }

    pub fn check_invariants(&self) -> Result<()> {
        let n = self.num_aps * self.num_users * self.num_paths;
        for (what, len) in [
            ("beta", self.beta.len()),
            ("delay_idx", self.delay_idx.len()),
            ("doppler_idx", self.doppler_idx.len()),
            ("doppler_frac", self.doppler_frac.len()),
        ] {
            if len != n {
                return Err(Error::DimensionMismatch {
                    what,
                    expected: n,
                    found: len,
                });
            }
        }
        if let Some(b) = self.beta.iter().find(|b| !(**b > 0.0 && b.is_finite())) {
            return Err(Error::InvariantViolation(alloc::format!(
                "large-scale gain {b} is not positive"
            )));
        }
        if self.delay_idx.iter().any(|&l| l > self.ell_max) {
            return Err(Error::InvariantViolation("delay index above ell_max".into()));
        }
        if self.doppler_idx.iter().any(|&k| k.unsigned_abs() as usize > self.k_max) {
            return Err(Error::InvariantViolation("Doppler index above k_max".into()));
        }
        if self.doppler_frac.iter().any(|&f| !(f > -0.5 && f <= 0.5)) {
            return Err(Error::InvariantViolation(
                "fractional Doppler outside (-1/2, 1/2]".into(),
            ));
        }
        Ok(())
    }
}

/// Splits a real Doppler index into `(k, kappa)` with `kappa` in `(-1/2, 1/2]`.
pub fn split_doppler(nu: f64) -> (i32, f64) {
    let k = Float::ceil(nu - 0.5);
    (k as i32, nu - k)
}

/// Grid delay index of each power-delay-profile tap, clipped to `ell_max`.
pub fn tap_delay_indices(cfg: &SystemConfig) -> Vec<usize> {
    let scale = cfg.num_subcarriers as f64 * cfg.subcarrier_spacing_hz;
    let cap = cfg.ell_max().min(cfg.num_subcarriers - 1);
    cfg.power_delay_profile
        .iter()
        .map(|t| (Float::round(t.delay_ns * 1e-9 * scale) as usize).min(cap))
        .collect()
}

pub fn generate_large_scale(
    topo: &Topology,
    shadow_db: &RealMatrix,
    cfg: &SystemConfig,
    seed: u64,
) -> Result<LargeScaleState> {
    let (m_a, k_u, l) = (topo.ap_positions.len(), topo.user_positions.len(), cfg.num_paths);
    if l != cfg.power_delay_profile.len() {
        return Err(Error::config(
            "num_paths",
            "does not match the power-delay profile length",
        ));
    }
    if shadow_db.shape() != (m_a, k_u) {
        return Err(Error::DimensionMismatch {
            what: "shadowing matrix",
            expected: m_a * k_u,
            found: shadow_db.rows() * shadow_db.cols(),
        });
    }
    let weights = cfg.pdp_weights();
    let delays = tap_delay_indices(cfg);
    let mut rng = rng::stream(seed, Stream::LargeScale);
    let n = m_a * k_u * l;
    let mut beta = Vec::with_capacity(n);
    let mut delay_idx = Vec::with_capacity(n);
    let mut doppler_idx = Vec::with_capacity(n);
    let mut doppler_frac = Vec::with_capacity(n);
    let k_max = cfg.k_max as f64;
    for p in 0..m_a {
        for q in 0..k_u {
            let d = topo.ap_user_distance(p, q);
            let link = db_to_linear(path_loss_db(d, &cfg.path_loss) + shadow_db[(p, q)]);
            for i in 0..l {
                beta.push(link * weights[i]);
                delay_idx.push(delays[i]);
                let (k, kappa) = split_doppler(k_max * Float::cos(rng::uniform_angle(&mut rng)));
                doppler_idx.push(k);
                doppler_frac.push(kappa);
            }
        }
    }
    let state = LargeScaleState {
        num_aps: m_a,
        num_users: k_u,
        num_paths: l,
        ell_max: cfg.ell_max(),
        k_max: cfg.k_max,
        beta,
        delay_idx,
        doppler_idx,
        doppler_frac,
    };
    state.check_invariants()?;
    Ok(state)
}

/// Everything random about one network drop except small-scale fading.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Drop {
    pub seed: u64,
    pub topology: Topology,
    pub shadowing_db: RealMatrixData,
    pub large_scale: LargeScaleState,
}

/// Serializable row-major copy of a real matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealMatrixData {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl From<&RealMatrix> for RealMatrixData {
    fn from(m: &RealMatrix) -> Self {
        RealMatrixData {
            rows: m.rows(),
            cols: m.cols(),
            data: m.as_slice().to_vec(),
        }
    }
}

pub fn generate_drop(cfg: &SystemConfig, seed: u64) -> Result<Drop> {
    cfg.validate()?;
    let topology = generate_topology(cfg, seed);
    let shadow = correlated_shadowing(&topology, cfg, seed)?;
    let large_scale = generate_large_scale(&topology, &shadow, cfg, seed)?;
    Ok(Drop {
        seed,
        topology,
        shadowing_db: (&shadow).into(),
        large_scale,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_cfg(m_a: usize, k_u: usize) -> SystemConfig {
        SystemConfig {
            num_aps: m_a,
            num_users: k_u,
            ..SystemConfig::default()
        }
    }

    #[test]
    fn topology_is_deterministic_and_inside_square() {
        let cfg = small_cfg(1, 1);
        let a = generate_topology(&cfg, 5);
        assert_eq!(a, generate_topology(&cfg, 5));
        assert_ne!(a, generate_topology(&cfg, 6));
        for p in a.ap_positions.iter().chain(&a.user_positions) {
            assert!((0.0..=1.0).contains(&p[0]) && (0.0..=1.0).contains(&p[1]));
        }
    }

    #[test]
    fn mean_position_tends_to_centre() {
        let cfg = small_cfg(100, 20);
        let (mut sx, mut sy, mut n) = (0.0, 0.0, 0.0);
        for seed in 0..10_000u64 {
            let t = generate_topology(&cfg, seed);
            for p in t.ap_positions.iter().chain(&t.user_positions) {
                sx += p[0];
                sy += p[1];
                n += 1.0;
            }
        }
        assert!((sx / n - 0.5).abs() < 0.05 && (sy / n - 0.5).abs() < 0.05);
    }

    #[test]
    fn wrapped_distance_takes_shortest_image() {
        let d = wrapped_distance([0.05, 0.5], [0.95, 0.5], 1.0, true);
        assert!((d - 0.1).abs() < 1e-12);
        let d = wrapped_distance([0.05, 0.05], [0.95, 0.95], 1.0, true);
        assert!((d - 0.02f64.sqrt()).abs() < 1e-12);
        let d = wrapped_distance([0.05, 0.5], [0.95, 0.5], 1.0, false);
        assert!((d - 0.9).abs() < 1e-12);
    }

    #[test]
    fn translation_preserves_wrapped_distances() {
        let cfg = small_cfg(12, 5);
        let t = generate_topology(&cfg, 3);
        let s = t.translated([0.37, 0.81]);
        for p in 0..12 {
            for q in 0..5 {
                assert!((t.ap_user_distance(p, q) - s.ap_user_distance(p, q)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn path_loss_segments() {
        let pl = PathLossParams::default();
        let f = |d| path_loss_db(d, &pl);
        let eps = 1e-9;
        assert!((f(pl.d1_km - eps) - f(pl.d1_km + eps)).abs() < 1e-6);
        assert!((f(pl.d0_km - eps) - f(pl.d0_km + eps)).abs() < 1e-6);
        assert!((f(10.0 * pl.d1_km) - f(pl.d1_km) + 35.0).abs() < 1e-9);
        assert!((f(4.0 * pl.d0_km) - f(2.0 * pl.d0_km) + 20.0 * 2f64.log10()).abs() < 1e-9);
        assert_eq!(f(pl.d0_km / 2.0), f(pl.d0_km / 4.0));
    }

    #[test]
    fn colocated_aps_share_field_value() {
        let cfg = small_cfg(3, 2);
        let mut t = generate_topology(&cfg, 1);
        t.ap_positions[1] = t.ap_positions[0];
        let mut r = rng::stream(9, Stream::Shadowing);
        let (a, _) = shadowing_fields(&t, &cfg, &mut r).unwrap();
        assert!((a[0] - a[1]).abs() < 1e-5, "{} {}", a[0], a[1]);
    }

    #[test]
    fn field_covariance_vanishes_with_decorrelation_distance() {
        let mut cfg = small_cfg(4, 1);
        cfg.shadowing.decorrelation_km = 1e-6;
        let t = generate_topology(&cfg, 2);
        let mut r = rng::stream(4, Stream::Shadowing);
        let draws = 10_000;
        let mut cov = [[0.0; 4]; 4];
        for _ in 0..draws {
            let (a, _) = shadowing_fields(&t, &cfg, &mut r).unwrap();
            for i in 0..4 {
                for j in 0..4 {
                    cov[i][j] += a[i] * a[j] / draws as f64;
                }
            }
        }
        for i in 0..4 {
            for j in 0..4 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((cov[i][j] - want).abs() < 0.05, "{i} {j} {}", cov[i][j]);
            }
        }
    }

    #[test]
    fn shadowing_variance_is_sigma_squared() {
        for model in [ShadowingModel::Correlated, ShadowingModel::Uncorrelated] {
            let mut cfg = small_cfg(4, 3);
            cfg.shadowing.model = model;
            let t = generate_topology(&cfg, 8);
            let mut acc = 0.0;
            let mut n = 0.0;
            for seed in 0..10_000u64 {
                let s = correlated_shadowing(&t, &cfg, seed).unwrap();
                acc += s[(0, 0)] * s[(0, 0)];
                n += 1.0;
            }
            let rel = acc / n / (cfg.shadowing.sigma_db * cfg.shadowing.sigma_db);
            assert!((rel - 1.0).abs() < 0.05, "{model:?} {rel}");
        }
    }

    #[test]
    fn large_scale_structure() {
        let cfg = SystemConfig::default();
        let drop = generate_drop(&cfg, 21).unwrap();
        let ls = &drop.large_scale;
        assert_eq!(drop, generate_drop(&cfg, 21).unwrap());
        for p in 0..cfg.num_aps {
            for q in 0..cfg.num_users {
                let d = drop.topology.ap_user_distance(p, q);
                let sh = drop.shadowing_db.data[p * cfg.num_users + q];
                let want = db_to_linear(path_loss_db(d, &cfg.path_loss) + sh);
                assert!((ls.beta_sum(p, q) / want - 1.0).abs() < 1e-12);
                assert_eq!(ls.delay_idx[ls.index(p, q, 0)], 0);
                for i in 0..cfg.num_paths {
                    assert!(ls.doppler_idx[ls.index(p, q, i)].abs() <= 9);
                }
            }
        }
    }

    #[test]
    fn doppler_split_ranges() {
        assert_eq!(split_doppler(0.5), (0, 0.5));
        assert_eq!(split_doppler(-0.5), (-1, 0.5));
        let (k, f) = split_doppler(-8.7);
        assert_eq!(k, -9);
        assert!((f - 0.3).abs() < 1e-12);
    }
}
