use nalgebra::{UnitQuaternion, Vector3};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::scene::Trajectory;
use crate::{Error, Result, GRAVITY};

/// One inertial sample. Holds the body rate and specific force over the
/// interval `[t, t + dt)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImuSample {
    pub t: f64,
    /// Body angular rate, rad/s.
    pub gyro: Vector3<f64>,
    /// Body specific force, m/s^2.
    pub accel: Vector3<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdoSample {
    pub t: f64,
    pub speed: f64,
}

/// Statistical IMU error budget: constant biases drawn once per run plus
/// white noise on every sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImuErrorModel {
    pub gyro_bias_std_radps: f64,
    pub accel_bias_std_mps2: f64,
    pub gyro_noise_std_radps: f64,
    pub accel_noise_std_mps2: f64,
}

impl Default for ImuErrorModel {
    /// Consumer-grade MEMS, so outage drift shows within tens of seconds.
    fn default() -> Self {
        Self {
            gyro_bias_std_radps: 0.01f64.to_radians(),
            accel_bias_std_mps2: 0.02,
            gyro_noise_std_radps: 0.02f64.to_radians(),
            accel_noise_std_mps2: 0.02,
        }
    }
}

impl ImuErrorModel {
    pub fn zero() -> Self {
        Self {
            gyro_bias_std_radps: 0.0,
            accel_bias_std_mps2: 0.0,
            gyro_noise_std_radps: 0.0,
            accel_noise_std_mps2: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all =
            [self.gyro_bias_std_radps, self.accel_bias_std_mps2, self.gyro_noise_std_radps, self.accel_noise_std_mps2];
        if all.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::config("IMU error standard deviations must be finite and >= 0"));
        }
        Ok(())
    }

    /// Draw the run's constant biases.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> ImuErrors {
        let mut draw = |s: f64| Vector3::from_fn(|_, _| s * rng.sample::<f64, _>(StandardNormal));
        let gyro_bias = draw(self.gyro_bias_std_radps);
        let accel_bias = draw(self.accel_bias_std_mps2);
        ImuErrors {
            gyro_bias,
            accel_bias,
            gyro_noise_std: self.gyro_noise_std_radps,
            accel_noise_std: self.accel_noise_std_mps2,
        }
    }
}

/// Concrete errors of one simulated IMU.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImuErrors {
    pub gyro_bias: Vector3<f64>,
    pub accel_bias: Vector3<f64>,
    pub gyro_noise_std: f64,
    pub accel_noise_std: f64,
}

impl ImuErrors {
    pub fn none() -> Self {
        Self { gyro_bias: Vector3::zeros(), accel_bias: Vector3::zeros(), gyro_noise_std: 0.0, accel_noise_std: 0.0 }
    }
}

/// Synthesize the IMU stream that, mechanized from the first pose, steps
/// through every trajectory sample.
///
/// Sample `k` covers `[t_k, t_{k+1}]`: the body rate is the rotation between
/// consecutive attitudes divided by `dt`, and the specific force is the
/// velocity increment minus gravity, rotated into the body at the interval
/// midpoint. Both are central differences about the interval midpoint.
pub fn synth_imu<R: Rng + ?Sized>(
    trajectory: &Trajectory,
    errors: &ImuErrors,
    rate_hz: f64,
    rng: &mut R,
) -> Result<Vec<ImuSample>> {
    let poses = trajectory.poses();
    if poses.len() < 3 {
        return Err(Error::config("IMU synthesis needs at least 3 trajectory samples"));
    }
    check_rate(trajectory, rate_hz)?;
    let g = Vector3::new(0.0, 0.0, -GRAVITY);
    let mut out = Vec::with_capacity(poses.len() - 1);
    for w in poses.windows(2) {
        let dt = w[1].t - w[0].t;
        let q0 = w[0].q_bn();
        let q1 = w[1].q_bn();
        let rate = (q0.inverse() * q1).scaled_axis() / dt;
        let q_mid = q0 * UnitQuaternion::from_scaled_axis(rate * (0.5 * dt));
        let accel_nav = (w[1].v - w[0].v) / dt;
        let force = q_mid.inverse_transform_vector(&(accel_nav - g));
        let mut noise = |s: f64| Vector3::from_fn(|_, _| s * rng.sample::<f64, _>(StandardNormal));
        let gyro = rate + errors.gyro_bias + noise(errors.gyro_noise_std);
        let accel = force + errors.accel_bias + noise(errors.accel_noise_std);
        out.push(ImuSample { t: w[0].t, gyro, accel });
    }
    Ok(out)
}

fn check_rate(trajectory: &Trajectory, rate_hz: f64) -> Result<()> {
    if !(rate_hz > 0.0) {
        return Err(Error::config("IMU rate must be positive"));
    }
    let dt = trajectory.sample_interval();
    if (dt * rate_hz - 1.0).abs() > 1e-6 {
        return Err(Error::config(format!("trajectory sampled every {dt} s does not match the {rate_hz} Hz IMU rate")));
    }
    Ok(())
}

/// Odometer speed |v| plus white noise, at `rate_hz`.
pub fn synth_odo<R: Rng + ?Sized>(
    trajectory: &Trajectory,
    rate_hz: f64,
    noise_std: f64,
    rng: &mut R,
) -> Result<Vec<OdoSample>> {
    if trajectory.len() < 3 {
        return Err(Error::config("odometer synthesis needs at least 3 trajectory samples"));
    }
    if !(rate_hz > 0.0) || !(noise_std >= 0.0) {
        return Err(Error::config("odometer rate must be positive and noise >= 0"));
    }
    let t0 = trajectory.start_time();
    let n = ((trajectory.end_time() - t0) * rate_hz).floor() as usize + 1;
    Ok((0..n)
        .map(|k| {
            let t = t0 + k as f64 / rate_hz;
            let pose = trajectory.nearest(t);
            let e: f64 = rng.sample(StandardNormal);
            OdoSample { t: pose.t, speed: (pose.v.norm() + noise_std * e).max(0.0) }
        })
        .collect())
}
