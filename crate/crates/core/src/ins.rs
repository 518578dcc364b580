//! Strapdown mechanization on a flat, non-rotating ENU frame.

use nalgebra::{UnitQuaternion, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::rng::{self, Domain};
use crate::scene::{Pose, Trajectory};
use crate::synth::{synth_imu, ImuErrorModel, ImuErrors, ImuSample};
use crate::{Error, Result, GRAVITY};

/// Largest step the first-order integrator is trusted with, s.
pub const MAX_STEP: f64 = 0.1;

/// Navigation solution carried by the mechanization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NavState {
    pub p: Vector3<f64>,
    pub v: Vector3<f64>,
    /// Body to navigation rotation.
    pub q_bn: UnitQuaternion<f64>,
    /// Gyro bias estimate, rad/s.
    pub b_g: Vector3<f64>,
    /// Accelerometer bias estimate, m/s^2.
    pub b_a: Vector3<f64>,
}

impl NavState {
    /// Bias-free state matching a ground-truth pose.
    pub fn from_pose(pose: &Pose) -> Self {
        Self { p: pose.p, v: pose.v, q_bn: pose.q_bn(), b_g: Vector3::zeros(), b_a: Vector3::zeros() }
    }

    /// (roll, pitch, yaw), radians.
    pub fn euler(&self) -> Vector3<f64> {
        let (r, p, y) = self.q_bn.euler_angles();
        Vector3::new(r, p, y)
    }

    fn is_finite(&self) -> bool {
        self.p
            .iter()
            .chain(self.v.iter())
            .chain(self.b_g.iter())
            .chain(self.b_a.iter())
            .chain(self.q_bn.coords.iter())
            .all(|c| c.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PositionIntegration {
    /// p += v_old * dt
    Euler,
    /// p += (v_old + v_new) / 2 * dt
    #[default]
    Trapezoidal,
}

fn gravity() -> Vector3<f64> {
    Vector3::new(0.0, 0.0, -GRAVITY)
}

/// One mechanization step with trapezoidal position integration.
pub fn mechanize_step(s: &NavState, imu: &ImuSample, dt: f64) -> Result<NavState> {
    mechanize_step_with(s, imu, dt, PositionIntegration::Trapezoidal)
}

/// One mechanization step.
///
/// Attitude advances by the exponential map of the bias-corrected rate; the
/// specific force is rotated with the mid-interval attitude.
pub fn mechanize_step_with(
    s: &NavState,
    imu: &ImuSample,
    dt: f64,
    integration: PositionIntegration,
) -> Result<NavState> {
    if !(dt > 0.0 && dt <= MAX_STEP) {
        return Err(Error::numeric(format!("mechanization step {dt} s outside (0, {MAX_STEP}]")));
    }
    let finite_imu = imu.gyro.iter().chain(imu.accel.iter()).all(|c| c.is_finite());
    if !finite_imu || !s.is_finite() {
        return Err(Error::numeric(format!("non-finite mechanization input at t={}", imu.t)));
    }
    Ok(step_unchecked(s, imu, dt, integration))
}

#[inline]
pub(crate) fn step_unchecked(s: &NavState, imu: &ImuSample, dt: f64, integration: PositionIntegration) -> NavState {
    let w = imu.gyro - s.b_g;
    let f = imu.accel - s.b_a;
    let q_mid = s.q_bn * UnitQuaternion::from_scaled_axis(w * (0.5 * dt));
    let mut q_new = s.q_bn * UnitQuaternion::from_scaled_axis(w * dt);
    q_new.renormalize();
    let v_new = s.v + (q_mid * f + gravity()) * dt;
    let p_new = match integration {
        PositionIntegration::Euler => s.p + s.v * dt,
        PositionIntegration::Trapezoidal => s.p + (s.v + v_new) * (0.5 * dt),
    };
    NavState { p: p_new, v: v_new, q_bn: q_new, b_g: s.b_g, b_a: s.b_a }
}

/// Mechanize a whole stream. Sample `k` is integrated over
/// `[t_k, t_{k+1}]`; the last sample uses the previous interval.
/// Returns the state after every sample.
pub fn mechanize(initial: &NavState, imu: &[ImuSample]) -> Result<Vec<NavState>> {
    let mut out = Vec::with_capacity(imu.len());
    let mut s = *initial;
    for (k, sample) in imu.iter().enumerate() {
        let dt = sample_dt(imu, k)?;
        s = mechanize_step(&s, sample, dt)?;
        out.push(s);
    }
    Ok(out)
}

fn sample_dt(imu: &[ImuSample], k: usize) -> Result<f64> {
    match (imu.get(k + 1), k.checked_sub(1).and_then(|j| imu.get(j))) {
        (Some(next), _) => Ok(next.t - imu[k].t),
        (None, Some(prev)) => Ok(imu[k].t - prev.t),
        (None, None) => Err(Error::numeric("cannot infer the step of a single IMU sample")),
    }
}

/// Position error of pure dead reckoning against truth, from a perfect
/// initial state, at every `every`-th trajectory sample.
pub fn drift_profile(
    trajectory: &Trajectory,
    errors: &ImuErrors,
    rate_hz: f64,
    seed: u64,
    every: usize,
) -> Result<Vec<(f64, f64)>> {
    let imu = synth_imu(trajectory, errors, rate_hz, &mut rng::stream(seed, Domain::Imu, 0))?;
    let poses = trajectory.poses();
    let states = mechanize(&NavState::from_pose(&poses[0]), &imu)?;
    let every = every.max(1);
    let mut out = vec![(poses[0].t, 0.0)];
    out.extend(
        states
            .iter()
            .zip(&poses[1..])
            .enumerate()
            .filter(|(k, _)| (k + 1) % every == 0)
            .map(|(_, (s, truth))| (truth.t, (s.p - truth.p).norm())),
    );
    Ok(out)
}

/// Median drift over an ensemble of IMUs whose biases are drawn from
/// `model`; seed `i` draws run `i`'s biases and noise.
pub fn drift_ensemble_median(
    trajectory: &Trajectory,
    model: &ImuErrorModel,
    rate_hz: f64,
    seeds: &[u64],
    every: usize,
) -> Result<Vec<(f64, f64)>> {
    model.validate()?;
    if seeds.is_empty() {
        return Err(Error::config("drift ensemble needs at least one seed"));
    }
    let curves: Vec<Vec<(f64, f64)>> = seeds
        .par_iter()
        .map(|&seed| {
            let errors = model.sample(&mut rng::stream(seed, Domain::Imu, u64::MAX));
            drift_profile(trajectory, &errors, rate_hz, seed, every)
        })
        .collect::<Result<_>>()?;
    let n = curves[0].len();
    Ok((0..n)
        .map(|i| {
            let mut vals: Vec<f64> = curves.iter().map(|c| c[i].1).collect();
            (curves[0][i].0, crate::eval::median(&mut vals))
        })
        .collect())
}
