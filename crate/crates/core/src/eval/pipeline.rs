//! End-to-end runs: synthesis shared across arms, per-seed realizations,
//! and one estimator run per arm.

use nalgebra::Vector3;
use rand::Rng;
use rand_distr::StandardNormal;

use super::Estimate;
use crate::config::World;
use crate::engine::{EngineConfig, EpochRecord, Estimator, Registry, RunInputs, RunTrace};
use crate::fusion::{sqrt_psd, FilterState, StateVec, IDX_BA, IDX_BG};
use crate::ins::NavState;
use crate::rng::{self, Domain};
use crate::synth::{
    apply_noise_epochs, apply_outages_epochs, synth_imu, synth_odo, synthesize_epochs, ImuErrors, ImuSample, NoiseCfg,
    ObsEpoch, OdoSample, OutageWindow,
};
use crate::Result;

/// Noise-free observation epochs of a world. Independent of the seed.
pub fn clean_epochs(world: &World) -> Result<Vec<ObsEpoch>> {
    synthesize_epochs(&world.scenario, &world.path_loss, &world.synthesis, world.rates.epoch_stride()?)
}

/// Everything random about one run except the observation noise.
#[derive(Debug, Clone)]
pub struct Realization {
    pub seed: u64,
    pub imu_errors: ImuErrors,
    pub imu: Vec<ImuSample>,
    pub odo: Vec<OdoSample>,
    /// Standard normal draws for the initial estimation error.
    pub init_draws: StateVec,
}

pub fn realize(world: &World, seed: u64) -> Result<Realization> {
    let traj = &world.scenario.trajectory;
    let imu_errors = world.imu_error.sample(&mut rng::stream(seed, Domain::Imu, u64::MAX));
    let imu = synth_imu(traj, &imu_errors, world.rates.imu_hz, &mut rng::stream(seed, Domain::Imu, 0))?;
    let odo =
        synth_odo(traj, world.rates.odo_hz, world.odometer.noise_std_mps, &mut rng::stream(seed, Domain::Odometer, 0))?;
    Ok(Realization { seed, imu_errors, imu, odo, init_draws: init_draws(seed) })
}

fn init_draws(seed: u64) -> StateVec {
    let mut r = rng::stream(seed, Domain::InitialError, 0);
    StateVec::from_fn(|_, _| r.sample(StandardNormal))
}

impl Realization {
    /// Recorded inertial streams with unknown sensor errors.
    pub fn recorded(seed: u64, imu: Vec<ImuSample>, odo: Vec<OdoSample>) -> Self {
        Self { seed, imu_errors: ImuErrors::none(), imu, odo, init_draws: init_draws(seed) }
    }

    /// True navigation state (with the true biases) at trajectory sample `k`.
    pub fn truth_nav(&self, world: &World, k: usize) -> NavState {
        NavState {
            b_g: self.imu_errors.gyro_bias,
            b_a: self.imu_errors.accel_bias,
            ..NavState::from_pose(&world.scenario.trajectory.poses()[k])
        }
    }
}

/// One arm of an experiment.
#[derive(Debug, Clone)]
pub struct Arm<'a> {
    pub engine: &'a EngineConfig,
    /// Observation noise; its seed is replaced by the realization's.
    pub noise: NoiseCfg,
    pub outages: &'a [OutageWindow],
    /// Filter start time, s; the initial state is drawn around the truth there.
    pub t_start: f64,
    /// Last epoch time processed, s.
    pub t_end: f64,
}

#[derive(Debug, Clone)]
pub struct ArmRun {
    pub trace: RunTrace,
    pub estimates: Vec<Estimate>,
}

/// Noisy, outage-filtered epochs in `[t_start, t_end]`.
pub fn observed_epochs(
    clean: &[ObsEpoch],
    noise: &NoiseCfg,
    outages: &[OutageWindow],
    t_start: f64,
    t_end: f64,
) -> Result<Vec<ObsEpoch>> {
    let lo = clean.partition_point(|e| e.t < t_start - 1e-9);
    let hi = clean.partition_point(|e| e.t <= t_end + 1e-9).max(lo);
    let mut epochs = apply_noise_epochs(&clean[lo..hi], noise)?;
    apply_outages_epochs(&mut epochs, outages);
    Ok(epochs)
}

pub fn build_estimator(world: &World, engine: &EngineConfig, noise: &NoiseCfg) -> Result<Estimator> {
    Estimator::new(
        engine,
        &Registry::builtin(),
        &world.scenario.base_stations,
        &world.path_loss,
        &world.imu_error,
        world.rates.imu_dt(),
        noise,
    )
}

/// Initial filter state at `t_start`: truth plus a draw from the initial
/// covariance in position, velocity and attitude; bias estimates start at
/// zero.
pub fn initial_state(
    world: &World,
    estimator: &Estimator,
    engine: &EngineConfig,
    real: &Realization,
    t_start: f64,
) -> Result<FilterState> {
    let p0 = engine.init.covariance(&world.imu_error);
    let mut dx = sqrt_psd(&p0)? * real.init_draws;
    dx.fixed_rows_mut::<3>(IDX_BG).fill(0.0);
    dx.fixed_rows_mut::<3>(IDX_BA).fill(0.0);
    estimator.initial_state(world.scenario.trajectory.nearest(t_start), &world.imu_error, &dx)
}

pub fn run_arm(world: &World, clean: &[ObsEpoch], real: &Realization, arm: &Arm<'_>) -> Result<ArmRun> {
    run_arm_with(world, clean, real, arm, |_, _| {})
}

pub fn run_arm_with<F>(
    world: &World,
    clean: &[ObsEpoch],
    real: &Realization,
    arm: &Arm<'_>,
    observe: F,
) -> Result<ArmRun>
where
    F: FnMut(&FilterState, &EpochRecord),
{
    let noise = NoiseCfg { seed: real.seed, ..arm.noise };
    let epochs = observed_epochs(clean, &noise, arm.outages, arm.t_start, arm.t_end)?;
    run_epochs(world, arm.engine, &noise, real, arm.t_start, &epochs, observe)
}

/// Run the estimator on already observed epochs.
pub fn run_epochs<F>(
    world: &World,
    engine: &EngineConfig,
    declared: &NoiseCfg,
    real: &Realization,
    t_start: f64,
    epochs: &[ObsEpoch],
    observe: F,
) -> Result<ArmRun>
where
    F: FnMut(&FilterState, &EpochRecord),
{
    let estimator = build_estimator(world, engine, declared)?;
    let initial = initial_state(world, &estimator, engine, real, t_start)?;
    let trace = estimator.run_with(
        RunInputs { imu: &real.imu, imu_dt: world.rates.imu_dt(), odo: &real.odo, epochs, initial },
        observe,
    )?;
    let estimates = trace.records.iter().map(|r| Estimate { t: r.t, p: r.p }).collect();
    Ok(ArmRun { trace, estimates })
}

/// 3D error magnitude per estimate.
pub fn error_norms(errors: &[(f64, Vector3<f64>)]) -> Vec<f64> {
    errors.iter().map(|(_, e)| e.norm()).collect()
}
