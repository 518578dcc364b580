//! Per-epoch estimation pipeline: IMU prediction, fix generation by the
//! configured sources, motion gating and filter updates.

mod sources;

pub use sources::{consensus, EpochContext, FixSource, LosSource, Registry, SbrJointSource, SbrSingleSource};

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::fixes::{Fix, FixKind, FixNoise};
use crate::fusion::{
    predict, update_position, FilterState, StateCov, StateVec, UkfParams, UtParams, IDX_BA, IDX_BG, IDX_P, IDX_THETA,
    IDX_V,
};
use crate::identify::{motion_gate_with_margin, GateConfig, GateLog};
use crate::scene::{BaseStation, Pose};
use crate::synth::{ImuErrorModel, ImuSample, NoiseCfg, ObsEpoch, OdoSample, PathLossModel};
use crate::{Error, Result};

/// Initial 1-sigma uncertainties of the filter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitSigma {
    pub position_m: f64,
    pub velocity_mps: f64,
    pub attitude_deg: f64,
}

impl Default for InitSigma {
    fn default() -> Self {
        Self { position_m: 1.0, velocity_mps: 0.1, attitude_deg: 1.0 }
    }
}

impl InitSigma {
    /// Diagonal initial covariance; bias blocks come from the IMU model.
    pub fn covariance(&self, imu: &ImuErrorModel) -> StateCov {
        let mut d = StateVec::zeros();
        let floor = 1e-12;
        d.fixed_rows_mut::<3>(IDX_P).fill(self.position_m.powi(2).max(floor));
        d.fixed_rows_mut::<3>(IDX_V).fill(self.velocity_mps.powi(2).max(floor));
        d.fixed_rows_mut::<3>(IDX_THETA).fill(self.attitude_deg.to_radians().powi(2).max(floor));
        d.fixed_rows_mut::<3>(IDX_BG).fill(imu.gyro_bias_std_radps.powi(2).max(floor));
        d.fixed_rows_mut::<3>(IDX_BA).fill(imu.accel_bias_std_mps2.powi(2).max(floor));
        StateCov::from_diagonal(&d)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EngineConfig {
    pub gates: GateConfig,
    /// Fix sources by registry name, in update priority order.
    pub sources: Vec<String>,
    pub ukf_alpha: f64,
    pub ukf_beta: f64,
    pub ukf_kappa: f64,
    pub init: InitSigma,
    /// Take measurement noise from each fix's propagated covariance; when
    /// false, `r_los_m2` / `r_sbr_m2` are used.
    pub fix_covariance: bool,
    pub r_los_m2: f64,
    pub r_sbr_m2: f64,
    /// Added to every measurement covariance diagonal, m^2.
    pub r_floor_m2: f64,
    /// Motion-gate margin grows by this many combined prior and fix
    /// position sigmas.
    pub motion_sigma_factor: f64,
    pub known_height_m: f64,
    pub single_path_eps: f64,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            gates: GateConfig::default(),
            sources: vec!["los".into(), "sbr-joint".into()],
            ukf_alpha: 0.5,
            ukf_beta: 2.0,
            ukf_kappa: 0.0,
            init: InitSigma::default(),
            fix_covariance: true,
            r_los_m2: 1.0,
            r_sbr_m2: 1.0,
            r_floor_m2: 1e-4,
            motion_sigma_factor: 3.0,
            known_height_m: 1.5,
            single_path_eps: 1e-3,
        }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<()> {
        self.gates.validate()?;
        let nonneg = [self.r_los_m2, self.r_sbr_m2, self.r_floor_m2, self.motion_sigma_factor, self.single_path_eps];
        if nonneg.iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::config("estimator noise and gate factors must be >= 0"));
        }
        if !self.known_height_m.is_finite() {
            return Err(Error::config("known height must be finite"));
        }
        for s in &self.sources {
            Registry::builtin().create(s)?;
        }
        Ok(())
    }

    /// Same configuration with multipath sources removed.
    pub fn without_sbr(&self) -> Self {
        Self { sources: self.sources.iter().filter(|s| !s.starts_with("sbr")).cloned().collect(), ..self.clone() }
    }
}

/// One epoch of estimator output.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub t: f64,
    pub p: Vector3<f64>,
    pub v: Vector3<f64>,
    /// (roll, pitch, yaw), rad.
    pub euler: Vector3<f64>,
    pub sigma_p: Vector3<f64>,
    pub los_updates: u32,
    pub sbr_updates: u32,
}

#[derive(Debug, Clone)]
pub struct RunTrace {
    pub records: Vec<EpochRecord>,
    pub gates: GateLog,
    /// NIS of every attempted update.
    pub nis: Vec<f64>,
    pub final_state: FilterState,
}

/// Streams consumed by one run.
pub struct RunInputs<'a> {
    pub imu: &'a [ImuSample],
    pub imu_dt: f64,
    pub odo: &'a [OdoSample],
    pub epochs: &'a [ObsEpoch],
    pub initial: FilterState,
}

/// The estimation pipeline with its fix sources instantiated.
pub struct Estimator {
    cfg: EngineConfig,
    sources: Vec<Box<dyn FixSource>>,
    params: UkfParams,
    stations: Vec<BaseStation>,
    plm: PathLossModel,
    noise: FixNoise,
}

impl Estimator {
    pub fn new(
        cfg: &EngineConfig,
        registry: &Registry,
        stations: &[BaseStation],
        plm: &PathLossModel,
        imu_model: &ImuErrorModel,
        imu_dt: f64,
        declared: &NoiseCfg,
    ) -> Result<Self> {
        cfg.validate()?;
        let sources = cfg.sources.iter().map(|s| registry.create(s)).collect::<Result<Vec<_>>>()?;
        let mut params = UkfParams::for_imu(imu_model, imu_dt);
        params.ut = UtParams { alpha: cfg.ukf_alpha, beta: cfg.ukf_beta, kappa: cfg.ukf_kappa };
        params.r_los = Matrix3::identity() * cfg.r_los_m2;
        params.r_sbr = Matrix3::identity() * cfg.r_sbr_m2;
        params.validate()?;
        Ok(Self {
            cfg: cfg.clone(),
            sources,
            params,
            stations: stations.to_vec(),
            plm: *plm,
            noise: FixNoise { var_range: declared.var_range, var_angle: declared.var_angle_rad2() },
        })
    }

    pub fn params(&self) -> &UkfParams {
        &self.params
    }

    /// Filter state at the first pose, perturbed by `dx`.
    pub fn initial_state(&self, pose: &Pose, imu_model: &ImuErrorModel, dx: &StateVec) -> Result<FilterState> {
        let nav = crate::fusion::inject(&crate::ins::NavState::from_pose(pose), dx);
        FilterState::new(nav, self.cfg.init.covariance(imu_model), pose.t)
    }

    fn measurement_noise(&self, fix: &Fix) -> Matrix3<f64> {
        let base = if self.cfg.fix_covariance {
            fix.cov
        } else {
            match fix.source {
                FixKind::Los => self.params.r_los,
                FixKind::Sbr => self.params.r_sbr,
            }
        };
        base + Matrix3::identity() * self.cfg.r_floor_m2
    }

    pub fn run(&self, inputs: RunInputs<'_>) -> Result<RunTrace> {
        self.run_with(inputs, |_, _| {})
    }

    /// Run, calling `observe` with the posterior after every epoch.
    pub fn run_with<F: FnMut(&FilterState, &EpochRecord)>(
        &self,
        inputs: RunInputs<'_>,
        mut observe: F,
    ) -> Result<RunTrace> {
        let mut fs = inputs.initial;
        let mut gates = GateLog::default();
        let mut nis = Vec::new();
        let mut records = Vec::with_capacity(inputs.epochs.len());
        let mut imu_idx = inputs.imu.partition_point(|s| s.t < fs.t - 1e-9);
        let mut prev: Option<(f64, Vector3<f64>, f64)> = None;

        for epoch in inputs.epochs {
            if epoch.t < fs.t - 1e-9 {
                continue;
            }
            let end = imu_idx + inputs.imu[imu_idx..].partition_point(|s| s.t < epoch.t - 1e-9);
            fs = predict(&fs, &inputs.imu[imu_idx..end], inputs.imu_dt, &self.params)?;
            fs.t = epoch.t;
            imu_idx = end;

            let ctx = EpochContext {
                epoch,
                stations: &self.stations,
                plm: &self.plm,
                gates: &self.cfg.gates,
                noise: self.noise,
                predicted: fs.nav.p,
                predicted_sigma: fs.position_cov().trace().sqrt(),
                known_height: self.cfg.known_height_m,
                eps_cond: self.cfg.single_path_eps,
            };
            let mut fixes: Vec<Fix> = Vec::new();
            for source in &self.sources {
                fixes.extend(source.fixes(&ctx, &mut gates));
            }
            // LoS first on ties, stable otherwise
            fixes.sort_by_key(|f| f.source != FixKind::Los);

            let odo = prev.map(|(t0, _, _)| odometer_distance(inputs.odo, t0, epoch.t));
            let (mut n_los, mut n_sbr) = (0, 0);
            for fix in &fixes {
                if let (Some((t0, p0, sigma0)), Some(dist)) = (prev, odo) {
                    let spread = (sigma0 * sigma0 + fix.cov.trace().max(0.0)).sqrt();
                    let margin = self.cfg.gates.motion_margin_m + self.cfg.motion_sigma_factor * spread;
                    let ok = motion_gate_with_margin(&fix.p, &p0, dist, epoch.t - t0, margin);
                    GateLog::count(ok, &mut gates.motion_admitted, &mut gates.motion_rejected);
                    if !ok {
                        continue;
                    }
                }
                let (next, outcome) = update_position(&fs, fix, &self.measurement_noise(fix), &self.params)?;
                nis.push(outcome.nis());
                GateLog::count(outcome.applied(), &mut gates.nis_admitted, &mut gates.nis_rejected);
                if outcome.applied() {
                    match fix.source {
                        FixKind::Los => n_los += 1,
                        FixKind::Sbr => n_sbr += 1,
                    }
                }
                fs = next;
            }

            let cov = fs.position_cov();
            let rec = EpochRecord {
                t: epoch.t,
                p: fs.nav.p,
                v: fs.nav.v,
                euler: fs.nav.euler(),
                sigma_p: cov.diagonal().map(|v| v.max(0.0).sqrt()),
                los_updates: n_los,
                sbr_updates: n_sbr,
            };
            observe(&fs, &rec);
            records.push(rec);
            prev = Some((epoch.t, fs.nav.p, cov.trace().sqrt()));
        }
        Ok(RunTrace { records, gates, nis, final_state: fs })
    }
}

/// Distance covered between `t0` and `t1` by the mean odometer speed of
/// the samples in that interval; infinite (gate open) without samples.
pub fn odometer_distance(odo: &[OdoSample], t0: f64, t1: f64) -> f64 {
    let lo = odo.partition_point(|s| s.t < t0 - 1e-9);
    let hi = odo.partition_point(|s| s.t <= t1 + 1e-9);
    let window = &odo[lo..hi];
    if window.is_empty() {
        return f64::INFINITY;
    }
    let mean = window.iter().map(|s| s.speed).sum::<f64>() / window.len() as f64;
    mean * (t1 - t0)
}
