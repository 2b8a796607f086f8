//! BB84 key distribution with a controllable dephasing channel.
//!
//! The crate models the full stack of the scheme: the polarization ⊗
//! spatial-mode state algebra ([`qmath`]), the tunable dephasing channel
//! and its analytic QBER ([`channel`]), the entangling-probe eavesdropper
//! with Helstrom discrimination and Rényi leakage curves ([`attack`]), a
//! seeded Monte Carlo protocol engine ([`protocol`]), and the detector
//! time-tag pipeline that builds keys from coincidence windows
//! ([`timetag`]).
//!
//! The analytic layer is generic over the floating-point scalar (see
//! [`scalar::Real`]); the aliases below fix `f64` for everyday use.

// Index loops over fixed 2×2 matrices read better than iterator chains.
#![allow(clippy::needless_range_loop)]

pub mod attack;
pub mod channel;
pub mod protocol;
pub mod qmath;
pub mod scalar;
pub mod timetag;

pub use scalar::Real;

/// `f64` complex amplitude.
pub type Amplitude64 = num_complex::Complex<f64>;
/// `f64` Gaussian spatial mode.
pub type GaussianMode64 = qmath::GaussianMode<f64>;
/// `f64` density matrix.
pub type DensityMatrix64 = qmath::DensityMatrix2<f64>;
/// `f64` channel displacement pair.
pub type ChannelSetting64 = channel::ChannelSetting<f64>;
/// `f64` probe strength.
pub type ProbeStrength64 = attack::ProbeStrength<f64>;
