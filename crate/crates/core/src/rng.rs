//! Seed derivation and random draws.
//!
//! Every random quantity of a drop comes from its own ChaCha8 stream keyed
//! by `(seed, stream tag)`, so results do not depend on call order or on how
//! drops are distributed over workers.

use core::f64::consts::PI;

use num_complex::Complex64;
use num_traits::Float;
use rand::{Rng, RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub type DropRng = ChaCha8Rng;

/// Independent stream identifiers within one drop.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Topology = 1,
    Shadowing = 2,
    LargeScale = 3,
    Gains = 4,
    Noise = 5,
}

/// SplitMix64 finalizer.
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Seed for item `index` under `master`, e.g. the per-drop seed of a run.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    splitmix64(splitmix64(master) ^ splitmix64(index.wrapping_add(0x5851_F42D_4C95_7F2D)))
}

pub fn stream(seed: u64, which: Stream) -> DropRng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, which as u64))
}

pub fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

/// Circularly-symmetric complex Gaussian with total variance `variance`.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let s = Float::sqrt(variance * 0.5);
    Complex64::new(s * standard_normal(rng), s * standard_normal(rng))
}

/// Uniform angle on `[0, 2 pi)`.
pub fn uniform_angle<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.random::<f64>() * 2.0 * PI
}
