//! Error-state unscented Kalman filter around the strapdown mechanization.
//!
//! The error state is `[dp, dv, dtheta, db_g, db_a]` (15), with the attitude
//! error applied on the body side: `q_true = q_nominal * exp(dtheta)`.
//! Every sigma point is mechanized through the IMU batch with its own
//! biases; position fixes update the filter through `h(x) = p`.

mod sigma;

pub use sigma::{ensure_psd, min_eigenvalue, sigma_points, sqrt_psd, SigmaPoints, UtParams, PSD_TOLERANCE};

use nalgebra::{Matrix3, SMatrix, SVector, UnitQuaternion, Vector3};

use crate::fixes::Fix;
use crate::ins::{step_unchecked, NavState, PositionIntegration, MAX_STEP};
use crate::synth::{ImuErrorModel, ImuSample};
use crate::{Error, Result};

pub const STATE_DIM: usize = 15;
pub type StateVec = SVector<f64, STATE_DIM>;
pub type StateCov = SMatrix<f64, STATE_DIM, STATE_DIM>;

pub const IDX_P: usize = 0;
pub const IDX_V: usize = 3;
pub const IDX_THETA: usize = 6;
pub const IDX_BG: usize = 9;
pub const IDX_BA: usize = 12;

/// chi-square(3) 0.999 quantile.
pub const NIS_GATE_3DOF: f64 = 16.266_236_196_238_13;

#[derive(Debug, Clone, PartialEq)]
pub struct UkfParams {
    pub ut: UtParams,
    /// Continuous-time process noise density, per second.
    pub q: StateCov,
    /// Used when a LoS fix carries no covariance of its own, m^2.
    pub r_los: Matrix3<f64>,
    /// Used when a multipath fix carries no covariance of its own, m^2.
    pub r_sbr: Matrix3<f64>,
    /// Innovations with NIS above this are not applied.
    pub nis_gate: f64,
}

impl UkfParams {
    /// Process noise matched to white IMU noise sampled every `imu_dt`.
    pub fn for_imu(model: &ImuErrorModel, imu_dt: f64) -> Self {
        let mut q = StateCov::zeros();
        let qv = model.accel_noise_std_mps2.powi(2) * imu_dt;
        let qt = model.gyro_noise_std_radps.powi(2) * imu_dt;
        for i in 0..3 {
            q[(IDX_V + i, IDX_V + i)] = qv;
            q[(IDX_THETA + i, IDX_THETA + i)] = qt;
        }
        Self {
            ut: UtParams::default(),
            q,
            r_los: Matrix3::identity(),
            r_sbr: Matrix3::identity(),
            nis_gate: NIS_GATE_3DOF,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.ut.alpha > 0.0 && self.ut.alpha <= 1.0) {
            return Err(Error::config("UKF alpha must lie in (0, 1]"));
        }
        if !(self.nis_gate > 0.0) {
            return Err(Error::config("NIS gate must be > 0"));
        }
        ensure_psd(&self.q, 0.0).map_err(|_| Error::config("process noise must be PSD"))?;
        for r in [&self.r_los, &self.r_sbr] {
            ensure_psd(r, 0.0).map_err(|_| Error::config("measurement noise must be PSD"))?;
        }
        Ok(())
    }

    /// Discrete process noise over `dt`, including the position/velocity
    /// coupling of integrated velocity noise.
    pub fn discrete_q(&self, dt: f64) -> StateCov {
        let mut qd = self.q * dt;
        for i in 0..3 {
            let qv = self.q[(IDX_V + i, IDX_V + i)];
            qd[(IDX_P + i, IDX_P + i)] += qv * dt.powi(3) / 3.0;
            qd[(IDX_P + i, IDX_V + i)] += qv * dt * dt / 2.0;
            qd[(IDX_V + i, IDX_P + i)] += qv * dt * dt / 2.0;
        }
        qd
    }
}

/// Nominal navigation state plus error covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterState {
    pub nav: NavState,
    pub p: StateCov,
    pub t: f64,
}

impl FilterState {
    pub fn new(nav: NavState, p: StateCov, t: f64) -> Result<Self> {
        let p = ensure_psd(&p, 1e-9)?;
        Ok(Self { nav, p, t })
    }

    /// `[p, v, attitude error (zero after every reset), b_g, b_a]`.
    pub fn x(&self) -> StateVec {
        let mut x = StateVec::zeros();
        x.fixed_rows_mut::<3>(IDX_P).copy_from(&self.nav.p);
        x.fixed_rows_mut::<3>(IDX_V).copy_from(&self.nav.v);
        x.fixed_rows_mut::<3>(IDX_BG).copy_from(&self.nav.b_g);
        x.fixed_rows_mut::<3>(IDX_BA).copy_from(&self.nav.b_a);
        x
    }

    pub fn position_cov(&self) -> Matrix3<f64> {
        self.p.fixed_view::<3, 3>(IDX_P, IDX_P).into_owned()
    }
}

/// Nominal state perturbed by an error vector.
pub fn inject(nav: &NavState, dx: &StateVec) -> NavState {
    let th: Vector3<f64> = dx.fixed_rows::<3>(IDX_THETA).into_owned();
    NavState {
        p: nav.p + dx.fixed_rows::<3>(IDX_P),
        v: nav.v + dx.fixed_rows::<3>(IDX_V),
        q_bn: nav.q_bn * UnitQuaternion::from_scaled_axis(th),
        b_g: nav.b_g + dx.fixed_rows::<3>(IDX_BG),
        b_a: nav.b_a + dx.fixed_rows::<3>(IDX_BA),
    }
}

/// Error vector taking `from` to `to`, i.e. `inject(from, diff) = to`.
pub fn difference(from: &NavState, to: &NavState) -> StateVec {
    let mut d = StateVec::zeros();
    d.fixed_rows_mut::<3>(IDX_P).copy_from(&(to.p - from.p));
    d.fixed_rows_mut::<3>(IDX_V).copy_from(&(to.v - from.v));
    d.fixed_rows_mut::<3>(IDX_THETA).copy_from(&(from.q_bn.inverse() * to.q_bn).scaled_axis());
    d.fixed_rows_mut::<3>(IDX_BG).copy_from(&(to.b_g - from.b_g));
    d.fixed_rows_mut::<3>(IDX_BA).copy_from(&(to.b_a - from.b_a));
    d
}

/// Propagate through an IMU batch sampled every `dt`.
pub fn predict(fs: &FilterState, imu: &[ImuSample], dt: f64, params: &UkfParams) -> Result<FilterState> {
    if !(dt > 0.0 && dt <= MAX_STEP) {
        return Err(Error::numeric(format!("prediction step {dt} s outside (0, {MAX_STEP}]")));
    }
    if imu.is_empty() {
        return Ok(fs.clone());
    }
    if imu.iter().any(|s| !s.gyro.iter().chain(s.accel.iter()).all(|c| c.is_finite())) {
        return Err(Error::numeric(format!("non-finite IMU sample near t={}", fs.t)));
    }
    let sp = sigma_points(&StateVec::zeros(), &fs.p, &params.ut)?;
    let propagated: Vec<NavState> = sp
        .points
        .iter()
        .map(|dx| {
            imu.iter()
                .fold(inject(&fs.nav, dx), |s, sample| step_unchecked(&s, sample, dt, PositionIntegration::Trapezoidal))
        })
        .collect();
    let reference = propagated[0];
    let deltas: Vec<StateVec> = propagated.iter().map(|s| difference(&reference, s)).collect();
    let mean = deltas.iter().zip(&sp.wm).fold(StateVec::zeros(), |a, (d, w)| a + d * *w);
    let mut p = deltas.iter().zip(&sp.wc).fold(StateCov::zeros(), |a, (d, w)| {
        let e = d - mean;
        a + e * e.transpose() * *w
    });
    let span = dt * imu.len() as f64;
    p += params.discrete_q(span);
    let nav = inject(&reference, &mean);
    Ok(FilterState { nav, p: ensure_psd(&p, PSD_TOLERANCE)?, t: fs.t + span })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum UpdateOutcome {
    Applied { nis: f64 },
    Gated { nis: f64 },
}

impl UpdateOutcome {
    pub fn nis(&self) -> f64 {
        match *self {
            UpdateOutcome::Applied { nis } | UpdateOutcome::Gated { nis } => nis,
        }
    }

    pub fn applied(&self) -> bool {
        matches!(self, UpdateOutcome::Applied { .. })
    }
}

/// Unscented update with a position fix.
pub fn update_position(
    fs: &FilterState,
    fix: &Fix,
    r: &Matrix3<f64>,
    params: &UkfParams,
) -> Result<(FilterState, UpdateOutcome)> {
    if !fix.p.iter().all(|c| c.is_finite()) {
        return Err(Error::numeric("non-finite fix"));
    }
    let sp = sigma_points(&StateVec::zeros(), &fs.p, &params.ut)?;
    let z: Vec<Vector3<f64>> = sp.points.iter().map(|dx| fs.nav.p + dx.fixed_rows::<3>(IDX_P)).collect();
    let z_mean = z.iter().zip(&sp.wm).fold(Vector3::zeros(), |a, (zi, w)| a + zi * *w);
    let x_mean = sp.mean();
    let mut s = *r;
    let mut pxz = SMatrix::<f64, STATE_DIM, 3>::zeros();
    for ((x, zi), w) in sp.points.iter().zip(&z).zip(&sp.wc) {
        let dz = zi - z_mean;
        s += dz * dz.transpose() * *w;
        pxz += (x - x_mean) * dz.transpose() * *w;
    }
    let s = (s + s.transpose()) * 0.5;
    let s_inv = s.cholesky().ok_or_else(|| Error::numeric("innovation covariance is not positive definite"))?.inverse();
    let nu = fix.p - z_mean;
    let nis = nu.dot(&(s_inv * nu));
    if !(nis <= params.nis_gate) {
        return Ok((fs.clone(), UpdateOutcome::Gated { nis }));
    }
    let k = pxz * s_inv;
    let dx = x_mean + k * nu;
    let p = fs.p - k * s * k.transpose();
    Ok((
        FilterState { nav: inject(&fs.nav, &dx), p: ensure_psd(&p, PSD_TOLERANCE)?, t: fs.t },
        UpdateOutcome::Applied { nis },
    ))
}

/// Error of the filter against a true navigation state (true biases in
/// `truth.b_g`, `truth.b_a`).
pub fn estimation_error(fs: &FilterState, truth: &NavState) -> StateVec {
    difference(&fs.nav, truth)
}

/// Normalized estimation error squared.
pub fn nees(fs: &FilterState, truth: &NavState) -> Result<f64> {
    let e = estimation_error(fs, truth);
    let chol = fs.p.cholesky().ok_or_else(|| Error::numeric("covariance is not positive definite"))?;
    Ok(e.dot(&chol.solve(&e)))
}
