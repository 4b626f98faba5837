//! Discrete OTFS transforms and dense effective delay-Doppler channels.
//!
//! A DD grid holds `x[k, l]` with delay `l` in `0..M` and Doppler `k` in
//! `0..N`, stored in vectorized order `r = k * M + l`. The TF grid holds
//! `X[n, m]` with time slot `n` and subcarrier `m`, stored as `n * M + m`.
//!
//! The dense matrices here are meant for small grids. They back the Monte
//! Carlo check of the closed-form SINR and are never built on the closed-form
//! path.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::channel_model::LargeScaleState;
use crate::error::{Error, Result};
use crate::linalg::ComplexMatrix;
use crate::rng::{self, Stream};

pub type EffectiveChannel = ComplexMatrix;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

#[derive(Debug, Clone, PartialEq)]
pub struct DdGrid {
    m: usize,
    n: usize,
    data: Vec<Complex64>,
}

impl DdGrid {
    pub fn zeros(m: usize, n: usize) -> Self {
        DdGrid {
            m,
            n,
            data: vec![ZERO; m * n],
        }
    }

    /// Wraps a vectorized grid (`r = k * M + l`).
    pub fn from_vector(m: usize, n: usize, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != m * n {
            return Err(Error::DimensionMismatch {
                what: "DdGrid::from_vector",
                expected: m * n,
                found: data.len(),
            });
        }
        Ok(DdGrid { m, n, data })
    }

    pub fn delay_bins(&self) -> usize {
        self.m
    }

    pub fn doppler_bins(&self) -> usize {
        self.n
    }

    /// Symbol at delay `l`, Doppler `k`.
    pub fn get(&self, l: usize, k: usize) -> Complex64 {
        self.data[k * self.m + l]
    }

    pub fn set(&mut self, l: usize, k: usize, v: Complex64) {
        self.data[k * self.m + l] = v;
    }

    pub fn as_vector(&self) -> &[Complex64] {
        &self.data
    }

    pub fn frobenius_norm(&self) -> f64 {
        norm(&self.data)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TfGrid {
    m: usize,
    n: usize,
    data: Vec<Complex64>,
}

impl TfGrid {
    pub fn zeros(m: usize, n: usize) -> Self {
        TfGrid {
            m,
            n,
            data: vec![ZERO; m * n],
        }
    }

    /// Sample at time slot `n` and subcarrier `m`.
    pub fn get(&self, n: usize, m: usize) -> Complex64 {
        self.data[n * self.m + m]
    }

    pub fn set(&mut self, n: usize, m: usize, v: Complex64) {
        self.data[n * self.m + m] = v;
    }

    pub fn subcarriers(&self) -> usize {
        self.m
    }

    pub fn time_slots(&self) -> usize {
        self.n
    }

    pub fn frobenius_norm(&self) -> f64 {
        norm(&self.data)
    }
}

fn norm(v: &[Complex64]) -> f64 {
    Float::sqrt(v.iter().map(|z| z.norm_sqr()).sum::<f64>())
}

/// `exp(j 2 pi num / den)` for integer phases.
fn twiddle(num: usize, den: usize) -> Complex64 {
    Complex64::cis(2.0 * PI * ((num % den) as f64) / den as f64)
}

/// Separable symplectic transform. `sign = +1` is the ISFFT direction.
fn symplectic(src: &[Complex64], m: usize, n: usize, sign: f64) -> Vec<Complex64> {
    let scale = 1.0 / Float::sqrt((m * n) as f64);
    // Along delay/subcarrier with exponent -sign * m l / M.
    let mut stage = vec![ZERO; m * n];
    for row in 0..n {
        for out in 0..m {
            let mut acc = ZERO;
            for inp in 0..m {
                let w = twiddle(out * inp, m);
                let w = if sign > 0.0 { w.conj() } else { w };
                acc += src[row * m + inp] * w;
            }
            stage[row * m + out] = acc;
        }
    }
    // Along Doppler/time with exponent +sign * n k / N.
    let mut dst = vec![ZERO; m * n];
    for col in 0..m {
        for out in 0..n {
            let mut acc = ZERO;
            for inp in 0..n {
                let w = twiddle(out * inp, n);
                let w = if sign > 0.0 { w } else { w.conj() };
                acc += stage[inp * m + col] * w;
            }
            dst[out * m + col] = acc * scale;
        }
    }
    dst
}

/// `X[n, m] = (1/sqrt(MN)) sum_k sum_l x[k, l] exp(j 2 pi (n k / N - m l / M))`.
pub fn isfft(x: &DdGrid) -> TfGrid {
    TfGrid {
        m: x.m,
        n: x.n,
        data: symplectic(&x.data, x.m, x.n, 1.0),
    }
}

/// Inverse of [`isfft`].
pub fn sfft(y: &TfGrid) -> DdGrid {
    DdGrid {
        m: y.m,
        n: y.n,
        data: symplectic(&y.data, y.m, y.n, -1.0),
    }
}

/// Delay-Doppler position of one propagation path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathTap {
    pub delay: usize,
    pub doppler: i32,
    pub frac: f64,
}

impl PathTap {
    pub fn doppler_total(&self) -> f64 {
        self.doppler as f64 + self.frac
    }
}

pub fn link_taps(ls: &LargeScaleState, p: usize, q: usize) -> Vec<PathTap> {
    (0..ls.num_paths)
        .map(|i| {
            let r = ls.index(p, q, i);
            PathTap {
                delay: ls.delay_idx[r],
                doppler: ls.doppler_idx[r],
                frac: ls.doppler_frac[r],
            }
        })
        .collect()
}

fn check_cap(m: usize, n: usize, cap: usize) -> Result<usize> {
    let size = m * n;
    if size > cap {
        return Err(Error::OracleTooLarge { size, cap });
    }
    Ok(size)
}

/// Applies `F_N kron I_M` (`inverse = false`) or its adjoint to `v`.
fn apply_fn_kron(v: &[Complex64], m: usize, n: usize, inverse: bool) -> Vec<Complex64> {
    let s = 1.0 / Float::sqrt(n as f64);
    let mut out = vec![ZERO; m * n];
    for a in 0..n {
        for a2 in 0..n {
            let w = twiddle(a * a2, n);
            let w = if inverse { w } else { w.conj() } * s;
            for b in 0..m {
                out[a * m + b] += w * v[a2 * m + b];
            }
        }
    }
    out
}

/// Unit-modulus diagonal of `Delta^(k + kappa)`.
fn delta_diag(nu: f64, size: usize) -> impl Iterator<Item = Complex64> {
    (0..size).map(move |i| Complex64::cis(2.0 * PI * nu * i as f64 / size as f64))
}

/// `T = (F_N kron I_M) Pi^l Delta^(k + kappa) (F_N^H kron I_M)` built column
/// by column without forming the Kronecker factors.
pub fn tap_operator(tap: &PathTap, m: usize, n: usize, cap: usize) -> Result<ComplexMatrix> {
    let size = check_cap(m, n, cap)?;
    let diag: Vec<Complex64> = delta_diag(tap.doppler_total(), size).collect();
    let shift = tap.delay % size;
    let mut out = ComplexMatrix::zeros(size, size);
    let mut e = vec![ZERO; size];
    for c in 0..size {
        e.iter_mut().for_each(|v| *v = ZERO);
        e[c] = Complex64::new(1.0, 0.0);
        let v = apply_fn_kron(&e, m, n, true);
        let mut w = vec![ZERO; size];
        for (i, wi) in w.iter_mut().enumerate() {
            // (Pi^l y)[i] = y[i - l] with Pi the cyclic down-shift.
            let src = (i + size - shift) % size;
            *wi = diag[src] * v[src];
        }
        let col = apply_fn_kron(&w, m, n, false);
        for (r, val) in col.into_iter().enumerate() {
            out[(r, c)] = val;
        }
    }
    Ok(out)
}

/// `H = sum_i h_i T_i` for one link.
pub fn build_effective_channel(
    taps: &[PathTap],
    gains: &[Complex64],
    m: usize,
    n: usize,
    cap: usize,
) -> Result<EffectiveChannel> {
    if taps.len() != gains.len() {
        return Err(Error::DimensionMismatch {
            what: "build_effective_channel gains",
            expected: taps.len(),
            found: gains.len(),
        });
    }
    let size = check_cap(m, n, cap)?;
    let mut h = ComplexMatrix::zeros(size, size);
    for (tap, &g) in taps.iter().zip(gains) {
        h.add_scaled(g, &tap_operator(tap, m, n, cap)?);
    }
    Ok(h)
}

/// Small-scale gains `h_pq,i ~ CN(0, beta_pq,i)`, flattened like the
/// large-scale state.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub gains: Vec<Complex64>,
}

impl ChannelRealization {
    pub fn draw(ls: &LargeScaleState, seed: u64) -> Self {
        let mut rng = rng::stream(seed, Stream::Gains);
        ChannelRealization {
            gains: ls.beta.iter().map(|&b| rng::complex_gaussian(&mut rng, b)).collect(),
        }
    }

    pub fn link_gains<'a>(&'a self, ls: &LargeScaleState, p: usize, q: usize) -> &'a [Complex64] {
        let s = ls.index(p, q, 0);
        &self.gains[s..s + ls.num_paths]
    }

    pub fn effective_channel(
        &self,
        ls: &LargeScaleState,
        p: usize,
        q: usize,
        m: usize,
        n: usize,
        cap: usize,
    ) -> Result<EffectiveChannel> {
        build_effective_channel(&link_taps(ls, p, q), self.link_gains(ls, p, q), m, n, cap)
    }
}

/// Circularly-symmetric noise vector with per-entry variance `variance`.
pub fn draw_noise(len: usize, variance: f64, seed: u64) -> Vec<Complex64> {
    let mut rng = rng::stream(seed, Stream::Noise);
    (0..len).map(|_| rng::complex_gaussian(&mut rng, variance)).collect()
}

/// Received DD vector at one AP:
/// `y_p = sum_q sqrt(rho_q eta_q) H_pq x_q + w_p`.
pub fn uplink_io(
    symbols: &[Vec<Complex64>],
    channels: &[EffectiveChannel],
    rho_dt: &[f64],
    eta: &[f64],
    noise: &[Complex64],
) -> Result<Vec<Complex64>> {
    let users = symbols.len();
    for (what, len) in [
        ("uplink_io channels", channels.len()),
        ("uplink_io rho_dt", rho_dt.len()),
        ("uplink_io eta", eta.len()),
    ] {
        if len != users {
            return Err(Error::DimensionMismatch {
                what,
                expected: users,
                found: len,
            });
        }
    }
    let mut y = noise.to_vec();
    for q in 0..users {
        let h = &channels[q];
        if symbols[q].len() != y.len() || h.cols() != y.len() || h.rows() != y.len() {
            return Err(Error::DimensionMismatch {
                what: "uplink_io vector length",
                expected: y.len(),
                found: symbols[q].len(),
            });
        }
        let amp = Float::sqrt(rho_dt[q] * eta[q]);
        for (yi, hx) in y.iter_mut().zip(h.mul_vec(&symbols[q])) {
            *yi += hx * amp;
        }
    }
    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::complex_gaussian;

    fn random_grid(m: usize, n: usize, seed: u64) -> DdGrid {
        let mut r = rng::stream(seed, Stream::Noise);
        let data = (0..m * n).map(|_| complex_gaussian(&mut r, 1.0)).collect();
        DdGrid::from_vector(m, n, data).unwrap()
    }

    fn naive_isfft(x: &DdGrid) -> TfGrid {
        let (m, n) = (x.m, x.n);
        let mut out = TfGrid::zeros(m, n);
        let s = 1.0 / ((m * n) as f64).sqrt();
        for nn in 0..n {
            for mm in 0..m {
                let mut acc = ZERO;
                for k in 0..n {
                    for l in 0..m {
                        let ph = 2.0 * PI * (nn as f64 * k as f64 / n as f64 - mm as f64 * l as f64 / m as f64);
                        acc += x.get(l, k) * Complex64::cis(ph);
                    }
                }
                out.set(nn, mm, acc * s);
            }
        }
        out
    }

    #[test]
    fn isfft_of_zero_and_impulse() {
        let z = isfft(&DdGrid::zeros(4, 3));
        assert_eq!(z.frobenius_norm(), 0.0);
        let mut x = DdGrid::zeros(4, 3);
        x.set(0, 0, Complex64::new(1.0, 0.0));
        let y = isfft(&x);
        let v = 1.0 / 12f64.sqrt();
        for n in 0..3 {
            for m in 0..4 {
                assert!((y.get(n, m) - Complex64::new(v, 0.0)).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn isfft_matches_double_sum() {
        for (m, n) in [(4, 4), (3, 5), (8, 2)] {
            let x = random_grid(m, n, (m * 10 + n) as u64);
            let fast = isfft(&x);
            let slow = naive_isfft(&x);
            for (a, b) in fast.data.iter().zip(&slow.data) {
                assert!((a - b).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn sfft_inverts_and_preserves_norm() {
        let x = random_grid(8, 8, 3);
        let y = isfft(&x);
        assert!((y.frobenius_norm() - x.frobenius_norm()).abs() < 1e-12);
        let back = sfft(&y);
        let err: Vec<Complex64> = back.data.iter().zip(&x.data).map(|(a, b)| a - b).collect();
        assert!(norm(&err) / x.frobenius_norm() < 1e-12);
    }

    #[test]
    fn sfft_of_all_ones() {
        let mut y = TfGrid::zeros(2, 2);
        y.data.iter_mut().for_each(|v| *v = Complex64::new(1.0, 0.0));
        let x = sfft(&y);
        assert!((x.get(0, 0) - Complex64::new(2.0, 0.0)).norm() < 1e-12);
        for (l, k) in [(1, 0), (0, 1), (1, 1)] {
            assert!(x.get(l, k).norm() < 1e-12);
        }
    }

    #[test]
    fn zero_tap_is_scaled_identity() {
        let tap = PathTap {
            delay: 0,
            doppler: 0,
            frac: 0.0,
        };
        let h = Complex64::new(0.3, -1.1);
        let hm = build_effective_channel(&[tap], &[h], 4, 4, 256).unwrap();
        let want = ComplexMatrix::identity(16).scale(h);
        assert!(hm.max_abs_diff(&want) < 1e-12);
    }

    #[test]
    fn oracle_cap_is_enforced() {
        let tap = PathTap {
            delay: 0,
            doppler: 0,
            frac: 0.0,
        };
        assert!(matches!(
            tap_operator(&tap, 32, 16, 256),
            Err(Error::OracleTooLarge { size: 512, cap: 256 })
        ));
    }

    #[test]
    fn uplink_io_scalar_channel() {
        let h = Complex64::new(0.5, 0.2);
        let tap = PathTap {
            delay: 0,
            doppler: 0,
            frac: 0.0,
        };
        let hm = build_effective_channel(&[tap], &[h], 2, 2, 256).unwrap();
        let x: Vec<Complex64> = (0..4).map(|i| Complex64::new(i as f64, 1.0)).collect();
        let w = draw_noise(4, 1.0, 1);
        let y = uplink_io(core::slice::from_ref(&x), &[hm], &[4.0], &[0.25], &w).unwrap();
        for i in 0..4 {
            assert!((y[i] - (x[i] * h + w[i])).norm() < 1e-12);
        }
        let zero = uplink_io(
            &[vec![ZERO; 4]],
            &[ComplexMatrix::zeros(4, 4)],
            &[1.0],
            &[1.0],
            &[ZERO; 4],
        )
        .unwrap();
        assert!(zero.iter().all(|v| *v == ZERO));
    }
}
