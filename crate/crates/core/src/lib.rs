//! Downlink cell-free massive MIMO with OTFS modulation.
//!
//! The crate is `no_std` (it needs `alloc`) and covers the numerical side of
//! the simulator:
//!
//! - [`channel_model`]: random drops, three-slope path loss, correlated
//!   shadowing and the delay-Doppler tap structure of every AP-user link.
//! - [`otfs`]: ISFFT/SFFT and the exact effective delay-Doppler channel
//!   matrices, used as a brute-force oracle.
//! - [`estimation`]: MMSE estimate variances for embedded-pilot (EP) and
//!   superimposed-pilot (SP) channel estimation and the pilot-fraction
//!   parameterization used by the optimizer.
//! - [`spectral_efficiency`]: closed-form downlink SINR/SE and the Monte Carlo
//!   SINR oracle that checks it.
//! - [`conic`]: the cone-program exchange format, the [`conic::ConicBackend`]
//!   trait and a dense interior-point backend.
//! - [`power_control`]: uniform allocation, bisection max-min power control,
//!   SCA pilot/data allocation and the alternating joint optimization.
//! - [`pipeline`]: one random drop evaluated end to end for a given scheme.
//!
//! IO, the experiment runner and the CLI live in the companion `cellfree-otfs-sim`
//! crate.

#![no_std]
#![deny(unsafe_code)]
// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]
#![cfg_attr(test, allow(clippy::field_reassign_with_default))]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod channel_model;
pub mod config;
pub mod conic;
pub mod error;
pub mod estimation;
pub mod linalg;
pub mod otfs;
pub mod pipeline;
pub mod power_control;
pub mod rng;
pub mod spectral_efficiency;

pub use config::SystemConfig;
pub use error::{Error, Result};
