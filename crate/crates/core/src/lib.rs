//! Integrated 5G positioning: line-of-sight fixes, single-bounce multipath
//! fixes and strapdown inertial dead reckoning, fused by an error-state
//! unscented Kalman filter.
//!
//! The crate is organised bottom-up:
//!
//! * [`scene`] - base stations, vertical reflector walls, trajectories and the
//!   mirror-image reflection geometry.
//! * [`synth`] - forward model producing channel observations and IMU/odometer
//!   streams, plus noise and outage injection.
//! * [`ins`] - strapdown mechanization.
//! * [`identify`] - measurement admission gates (NLoS exclusion, single-bounce
//!   check, motion constraint).
//! * [`fixes`] - LoS and multipath position solvers.
//! * [`fusion`] - the unscented Kalman filter.
//! * [`engine`] - the per-epoch estimation pipeline and its fix-source registry.
//! * [`eval`] - metrics, sweeps and CSV reports.
//! * [`experiment`] - named run modes selected from a [`config::RunConfig`].

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod engine;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod fixes;
pub mod fusion;
pub mod identify;
pub mod ins;
pub mod rng;
pub mod scene;
pub mod synth;

pub use error::{Error, Result};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Standard gravity magnitude, m/s^2.
pub const GRAVITY: f64 = 9.80665;
