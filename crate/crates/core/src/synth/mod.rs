//! Forward model: channel observables for LoS and reflected paths, IMU and
//! odometer streams, Gaussian measurement noise and scheduled LoS outages.

mod imu;
pub mod log;

pub use imu::{synth_imu, synth_odo, ImuErrorModel, ImuErrors, ImuSample, OdoSample};

use nalgebra::Vector3;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::rng::{self, Domain};
use crate::scene::{
    azimuth_elevation, double_bounce_path, los_visible, polyline_clear, specular_path, wrap_angle, BaseStation, BsId,
    MultiBouncePath, Pose, SbrPath, Scenario,
};
use crate::{Error, Result, SPEED_OF_LIGHT};

/// Log-distance path loss with a fixed loss per reflection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathLossModel {
    /// Loss at the 1 m reference distance, dB.
    pub pl0_db: f64,
    /// Path-loss exponent.
    pub exponent: f64,
    pub tx_power_dbm: f64,
    /// Loss per bounce assumed by the estimator, dB.
    pub reflection_loss_db: f64,
}

/// Reference distance of the path-loss model, m.
pub const PL_REFERENCE_M: f64 = 1.0;

/// Default carrier, Hz.
pub const CARRIER_HZ: f64 = 28e9;

impl Default for PathLossModel {
    fn default() -> Self {
        Self {
            pl0_db: free_space_loss_db(CARRIER_HZ, PL_REFERENCE_M),
            exponent: 2.0,
            tx_power_dbm: 30.0,
            reflection_loss_db: 6.0,
        }
    }
}

/// Friis free-space loss at distance `d` for carrier `f`.
pub fn free_space_loss_db(f_hz: f64, d_m: f64) -> f64 {
    20.0 * (4.0 * PI * d_m * f_hz / SPEED_OF_LIGHT).log10()
}

impl PathLossModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.exponent > 0.0) {
            return Err(Error::config("path-loss exponent must be > 0"));
        }
        if !self.pl0_db.is_finite() || !self.tx_power_dbm.is_finite() || !(self.reflection_loss_db >= 0.0) {
            return Err(Error::config("path-loss parameters must be finite, reflection loss >= 0"));
        }
        Ok(())
    }

    /// Received power over an unobstructed distance.
    pub fn rss_at(&self, d: f64) -> f64 {
        self.tx_power_dbm - self.pl0_db - 10.0 * self.exponent * (d / PL_REFERENCE_M).log10()
    }

    /// Distance implied by a received power, assuming free propagation.
    pub fn distance_from_rss(&self, rss_dbm: f64) -> f64 {
        PL_REFERENCE_M * 10f64.powf((self.tx_power_dbm - self.pl0_db - rss_dbm) / (10.0 * self.exponent))
    }
}

/// LoS channel parameters for one BS at one epoch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LosObs {
    pub bs_id: BsId,
    pub t: f64,
    /// Two-way time, s.
    pub rtt: f64,
    pub aod_az: f64,
    pub aod_el: f64,
    pub aoa_az: f64,
    pub aoa_el: f64,
    pub rss: f64,
    /// Simulator ground truth: 0 for a genuine LoS record, otherwise the
    /// bounce count of the reflection a receiver mistook for LoS.
    pub truth_bounces: u8,
}

/// Reflected-path channel parameters for one BS path at one epoch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SbrObs {
    pub bs_id: BsId,
    pub t: f64,
    /// One-way time of arrival, s.
    pub toa: f64,
    pub aod_az: f64,
    pub aod_el: f64,
    pub aoa_az: f64,
    pub aoa_el: f64,
    pub rss: f64,
    /// Simulator ground truth; never read by estimators.
    pub truth_bounces: u8,
}

/// Common access to the fields gates and noise injection need.
pub trait ChannelObs {
    fn bs_id(&self) -> BsId;
    fn t(&self) -> f64;
    /// Distance implied by the timing measurement, m.
    fn timing_range(&self) -> f64;
    fn rss(&self) -> f64;
    /// Shift the timing so the implied range moves by `dr` metres.
    fn perturb_range(&mut self, dr: f64);
    /// (aod_az, aod_el, aoa_az, aoa_el), mutable.
    fn angles_mut(&mut self) -> [&mut f64; 4];
}

impl ChannelObs for LosObs {
    fn bs_id(&self) -> BsId {
        self.bs_id
    }
    fn t(&self) -> f64 {
        self.t
    }
    fn timing_range(&self) -> f64 {
        0.5 * SPEED_OF_LIGHT * self.rtt
    }
    fn rss(&self) -> f64 {
        self.rss
    }
    fn perturb_range(&mut self, dr: f64) {
        self.rtt += 2.0 * dr / SPEED_OF_LIGHT;
    }
    fn angles_mut(&mut self) -> [&mut f64; 4] {
        [&mut self.aod_az, &mut self.aod_el, &mut self.aoa_az, &mut self.aoa_el]
    }
}

impl ChannelObs for SbrObs {
    fn bs_id(&self) -> BsId {
        self.bs_id
    }
    fn t(&self) -> f64 {
        self.t
    }
    fn timing_range(&self) -> f64 {
        SPEED_OF_LIGHT * self.toa
    }
    fn rss(&self) -> f64 {
        self.rss
    }
    fn perturb_range(&mut self, dr: f64) {
        self.toa += dr / SPEED_OF_LIGHT;
    }
    fn angles_mut(&mut self) -> [&mut f64; 4] {
        [&mut self.aod_az, &mut self.aod_el, &mut self.aoa_az, &mut self.aoa_el]
    }
}

impl SbrObs {
    pub fn departure(&self) -> Vector3<f64> {
        crate::scene::direction(self.aod_az, self.aod_el)
    }

    pub fn arrival(&self) -> Vector3<f64> {
        crate::scene::direction(self.aoa_az, self.aoa_el)
    }

    pub fn path_length(&self) -> f64 {
        self.timing_range()
    }
}

/// Measurement noise levels; variances as in the experiment tables.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseCfg {
    /// Variance of the implied one-way range, m^2.
    #[serde(rename = "var_range_m2")]
    pub var_range: f64,
    /// Variance of every angle, deg^2.
    #[serde(rename = "var_angle_deg2")]
    pub var_angle: f64,
    #[serde(default)]
    pub seed: u64,
}

impl Default for NoiseCfg {
    fn default() -> Self {
        Self { var_range: 0.5, var_angle: 0.01, seed: 0 }
    }
}

impl NoiseCfg {
    pub fn validate(&self) -> Result<()> {
        if !(self.var_range >= 0.0 && self.var_angle >= 0.0) {
            return Err(Error::config("noise variances must be >= 0"));
        }
        Ok(())
    }

    /// Angle variance in rad^2.
    pub fn var_angle_rad2(&self) -> f64 {
        self.var_angle * (PI / 180.0).powi(2)
    }
}

/// Closed interval during which LoS observations are suppressed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutageWindow {
    #[serde(rename = "t_start_s")]
    pub t_start: f64,
    #[serde(rename = "t_end_s")]
    pub t_end: f64,
}

impl OutageWindow {
    pub fn new(t_start: f64, t_end: f64) -> Result<Self> {
        let w = Self { t_start, t_end };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_end > self.t_start) {
            return Err(Error::config(format!(
                "outage window [{}, {}] must have t_end > t_start",
                self.t_start, self.t_end
            )));
        }
        Ok(())
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.t_start && t <= self.t_end
    }

    pub fn duration(&self) -> f64 {
        self.t_end - self.t_start
    }
}

pub fn in_outage(t: f64, windows: &[OutageWindow]) -> bool {
    windows.iter().any(|w| w.contains(t))
}

/// Noise-free LoS observables.
pub fn synth_los(bs: &BaseStation, pose: &Pose, plm: &PathLossModel) -> Result<LosObs> {
    let delta = pose.p - bs.p;
    let d = delta.norm();
    if !(d > 0.0) {
        return Err(Error::geometry(format!("UE coincides with {}", bs.id)));
    }
    let (aod_az, aod_el) = azimuth_elevation(&delta);
    Ok(LosObs {
        bs_id: bs.id,
        t: pose.t,
        rtt: 2.0 * d / SPEED_OF_LIGHT,
        aod_az,
        aod_el,
        aoa_az: wrap_angle(aod_az + PI),
        aoa_el: -aod_el,
        rss: plm.rss_at(d),
        truth_bounces: 0,
    })
}

/// Noise-free single-bounce observables.
pub fn synth_sbr(path: &SbrPath, pose: &Pose, plm: &PathLossModel) -> SbrObs {
    synth_reflected(&MultiBouncePath::from(path), pose.t, plm)
}

/// Noise-free observables of a reflected path with any bounce count.
pub fn synth_reflected(path: &MultiBouncePath, t: f64, plm: &PathLossModel) -> SbrObs {
    let (aod_az, aod_el) = azimuth_elevation(&path.u_d);
    let (aoa_az, aoa_el) = azimuth_elevation(&path.u_a);
    SbrObs {
        bs_id: path.bs_id,
        t,
        toa: path.length / SPEED_OF_LIGHT,
        aod_az,
        aod_el,
        aoa_az,
        aoa_el,
        rss: plm.rss_at(path.length) - path.reflection_loss_db,
        truth_bounces: path.bounce_count() as u8,
    }
}

/// Adds zero-mean Gaussian noise to the timing and to every angle.
///
/// Five standard normals are always drawn, in a fixed order, whatever the
/// variances are; so runs that differ only in noise level see scaled copies
/// of the same perturbation.
pub fn apply_noise<O: ChannelObs + Clone, R: Rng + ?Sized>(obs: &O, cfg: &NoiseCfg, rng: &mut R) -> Result<O> {
    cfg.validate()?;
    let draws: [f64; 5] = std::array::from_fn(|_| rng.sample(StandardNormal));
    let mut out = obs.clone();
    if cfg.var_range > 0.0 {
        out.perturb_range(cfg.var_range.sqrt() * draws[0]);
    }
    if cfg.var_angle > 0.0 {
        let sigma = cfg.var_angle_rad2().sqrt();
        for (i, a) in out.angles_mut().into_iter().enumerate() {
            let noisy = *a + sigma * draws[i + 1];
            // even slots are azimuths, odd slots elevations
            *a = if i % 2 == 0 { wrap_angle(noisy) } else { noisy.clamp(-0.5 * PI, 0.5 * PI) };
        }
    }
    Ok(out)
}

/// Knobs of the observation generator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthOptions {
    /// Paths longer than this are not observed, m.
    pub max_range_m: f64,
    /// Also emit two-bounce paths (hidden ground truth: 2 bounces).
    pub double_bounce: bool,
    /// When LoS is geometrically blocked, report the strongest reflection as a
    /// LoS record, as a receiver that cannot tell them apart would.
    pub nlos_masquerade: bool,
}

impl Default for SynthOptions {
    fn default() -> Self {
        Self { max_range_m: 600.0, double_bounce: true, nlos_masquerade: true }
    }
}

/// All observations sharing one 5G epoch.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ObsEpoch {
    pub index: u64,
    pub t: f64,
    pub los: Vec<LosObs>,
    pub sbr: Vec<SbrObs>,
}

/// Noise-free observations at one pose.
pub fn observe(
    scenario: &Scenario,
    pose: &Pose,
    plm: &PathLossModel,
    opts: &SynthOptions,
) -> Result<(Vec<LosObs>, Vec<SbrObs>)> {
    let ue = pose.p;
    let walls = &scenario.walls;
    let mut los = Vec::new();
    let mut sbr = Vec::new();
    for bs in &scenario.base_stations {
        let mut reflected: Vec<MultiBouncePath> = Vec::new();
        for wall in walls {
            if let Some(path) = specular_path(bs, &ue, wall) {
                if path.length <= opts.max_range_m && polyline_clear(&[bs.p, path.q, ue], walls, &[wall.id]) {
                    reflected.push(MultiBouncePath::from(&path));
                }
            }
        }
        if opts.double_bounce {
            for w1 in walls {
                for w2 in walls {
                    if w1.id == w2.id {
                        continue;
                    }
                    if let Some(path) = double_bounce_path(bs, &ue, w1, w2) {
                        if path.length <= opts.max_range_m
                            && polyline_clear(&path.polyline(&bs.p, &ue), walls, &path.walls)
                        {
                            reflected.push(path);
                        }
                    }
                }
            }
        }

        let d = (ue - bs.p).norm();
        if d <= opts.max_range_m && los_visible(bs, &ue, walls) {
            los.push(synth_los(bs, pose, plm)?);
        } else if opts.nlos_masquerade {
            // strongest reflection = shortest after losses
            let best = reflected.iter().max_by(|a, b| {
                let ra = plm.rss_at(a.length) - a.reflection_loss_db;
                let rb = plm.rss_at(b.length) - b.reflection_loss_db;
                ra.total_cmp(&rb)
            });
            if let Some(path) = best {
                let o = synth_reflected(path, pose.t, plm);
                los.push(LosObs {
                    bs_id: o.bs_id,
                    t: o.t,
                    rtt: 2.0 * o.toa,
                    aod_az: o.aod_az,
                    aod_el: o.aod_el,
                    aoa_az: o.aoa_az,
                    aoa_el: o.aoa_el,
                    rss: o.rss,
                    truth_bounces: o.truth_bounces,
                });
            }
        }
        sbr.extend(reflected.iter().map(|p| synth_reflected(p, pose.t, plm)));
    }
    Ok((los, sbr))
}

/// Noise-free observation epochs over the whole trajectory.
///
/// `stride` is the number of trajectory samples per epoch.
pub fn synthesize_epochs(
    scenario: &Scenario,
    plm: &PathLossModel,
    opts: &SynthOptions,
    stride: usize,
) -> Result<Vec<ObsEpoch>> {
    if stride == 0 {
        return Err(Error::config("epoch stride must be >= 1"));
    }
    scenario
        .trajectory
        .poses()
        .iter()
        .step_by(stride)
        .enumerate()
        .map(|(k, pose)| {
            let (los, sbr) = observe(scenario, pose, plm, opts)?;
            Ok(ObsEpoch { index: k as u64, t: pose.t, los, sbr })
        })
        .collect()
}

/// Noisy copy of the epochs. Each epoch draws from its own stream, LoS
/// records first, then reflected records, in stored order.
pub fn apply_noise_epochs(epochs: &[ObsEpoch], cfg: &NoiseCfg) -> Result<Vec<ObsEpoch>> {
    cfg.validate()?;
    epochs
        .iter()
        .map(|e| {
            let mut rng = rng::stream(cfg.seed, Domain::ObservationNoise, e.index);
            Ok(ObsEpoch {
                index: e.index,
                t: e.t,
                los: e.los.iter().map(|o| apply_noise(o, cfg, &mut rng)).collect::<Result<_>>()?,
                sbr: e.sbr.iter().map(|o| apply_noise(o, cfg, &mut rng)).collect::<Result<_>>()?,
            })
        })
        .collect()
}

/// Removes every LoS record whose time falls inside a window. Reflected
/// records always pass.
pub fn apply_outages(t: f64, obs: &mut Vec<LosObs>, windows: &[OutageWindow]) {
    obs.retain(|o| !(in_outage(o.t, windows) || in_outage(t, windows)));
}

/// [`apply_outages`] over a whole run.
pub fn apply_outages_epochs(epochs: &mut [ObsEpoch], windows: &[OutageWindow]) {
    for e in epochs {
        apply_outages(e.t, &mut e.los, windows);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{SbrPath, Wall};
    use approx::assert_relative_eq;
    use nalgebra::Vector2;

    fn pose_at(p: Vector3<f64>) -> Pose {
        Pose { t: 0.0, p, v: Vector3::zeros(), att: Vector3::zeros() }
    }

    #[test]
    fn los_reference_values() {
        let bs = BaseStation::new(1, Vector3::new(0.0, 0.0, 10.0));
        let obs = synth_los(&bs, &pose_at(Vector3::new(30.0, 40.0, 0.0)), &PathLossModel::default()).unwrap();
        let d = 2600f64.sqrt();
        assert_relative_eq!(obs.rtt, 2.0 * d / SPEED_OF_LIGHT, max_relative = 1e-15);
        assert_relative_eq!(obs.rtt, 3.4016e-7, max_relative = 1e-4);
        assert_relative_eq!(obs.aod_az, 40f64.atan2(30.0), epsilon = 1e-15);
        assert_relative_eq!(obs.aod_az, 0.9273, epsilon = 1e-4);
        assert_relative_eq!(obs.aod_el, (-10.0 / d).asin(), epsilon = 1e-15);
        assert_relative_eq!(obs.aod_el, -0.1974, epsilon = 1e-4);
    }

    #[test]
    fn los_axis_aligned_and_antipodal() {
        let bs = BaseStation::new(1, Vector3::new(0.0, 0.0, 10.0));
        let plm = PathLossModel::default();
        let obs = synth_los(&bs, &pose_at(Vector3::new(10.0, 0.0, 10.0)), &plm).unwrap();
        assert_eq!(obs.aod_az, 0.0);
        assert_eq!(obs.aod_el, 0.0);
        for p in [Vector3::new(-3.0, 4.0, 1.0), Vector3::new(5.0, -7.0, 30.0), Vector3::new(-1.0, -1.0, 0.0)] {
            let o = synth_los(&bs, &pose_at(p), &plm).unwrap();
            assert_relative_eq!(wrap_angle(o.aoa_az - o.aod_az - PI), 0.0, epsilon = 1e-12);
            assert_eq!(o.aoa_el, -o.aod_el);
        }
    }

    #[test]
    fn los_rejects_zero_distance() {
        let bs = BaseStation::new(1, Vector3::new(1.0, 2.0, 3.0));
        assert!(synth_los(&bs, &pose_at(bs.p), &PathLossModel::default()).is_err());
    }

    fn reference_path() -> (BaseStation, SbrPath) {
        let w = Wall::new(1, Vector2::new(50.0, 0.0), Vector2::new(50.0, 100.0), 0.0, 20.0, 6.0).unwrap();
        let bs = BaseStation::new(1, Vector3::new(0.0, 0.0, 10.0));
        let path = specular_path(&bs, &Vector3::new(20.0, 30.0, 0.0), &w).unwrap();
        (bs, path)
    }

    #[test]
    fn sbr_reference_values() {
        let (bs, path) = reference_path();
        let ue = Vector3::new(20.0, 30.0, 0.0);
        let plm = PathLossModel::default();
        let obs = synth_sbr(&path, &pose_at(ue), &plm);
        assert_relative_eq!(obs.toa, 7400f64.sqrt() / SPEED_OF_LIGHT, max_relative = 1e-12);
        assert_relative_eq!(obs.toa, 2.8694e-7, max_relative = 1e-4);
        assert!(obs.toa * SPEED_OF_LIGHT > (bs.p - ue).norm());
        assert_relative_eq!(plm.rss_at(path.length) - obs.rss, 6.0, epsilon = 1e-12);
        assert_eq!(obs.truth_bounces, 1);
    }

    #[test]
    fn zero_noise_is_bitwise_identity() {
        let (_, path) = reference_path();
        let obs = synth_sbr(&path, &pose_at(Vector3::new(20.0, 30.0, 0.0)), &PathLossModel::default());
        let cfg = NoiseCfg { var_range: 0.0, var_angle: 0.0, seed: 3 };
        let mut rng = rng::stream(3, Domain::ObservationNoise, 0);
        let out = apply_noise(&obs, &cfg, &mut rng).unwrap();
        assert_eq!(out, obs);
    }

    #[test]
    fn negative_variance_rejected() {
        let (_, path) = reference_path();
        let obs = synth_sbr(&path, &pose_at(Vector3::new(20.0, 30.0, 0.0)), &PathLossModel::default());
        let cfg = NoiseCfg { var_range: -1.0, var_angle: 0.0, seed: 0 };
        assert!(apply_noise(&obs, &cfg, &mut rng::stream(0, Domain::ObservationNoise, 0)).is_err());
    }

    #[test]
    fn range_variance_matches_config() {
        let bs = BaseStation::new(1, Vector3::new(0.0, 0.0, 10.0));
        let obs = synth_los(&bs, &pose_at(Vector3::new(30.0, 40.0, 0.0)), &PathLossModel::default()).unwrap();
        let cfg = NoiseCfg { var_range: 1.0, var_angle: 0.0, seed: 11 };
        let mut rng = rng::stream(11, Domain::ObservationNoise, 0);
        let n = 100_000;
        let errs: Vec<f64> =
            (0..n).map(|_| apply_noise(&obs, &cfg, &mut rng).unwrap().timing_range() - obs.timing_range()).collect();
        let mean = errs.iter().sum::<f64>() / n as f64;
        let var = errs.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!((0.97..=1.03).contains(&var), "sample variance {var}");
        // zero-mean within 3 sigma of the mean estimator
        assert!(mean.abs() < 3.0 / (n as f64).sqrt());
    }

    #[test]
    fn noise_streams_are_seeded() {
        let (_, path) = reference_path();
        let obs = synth_sbr(&path, &pose_at(Vector3::new(20.0, 30.0, 0.0)), &PathLossModel::default());
        let cfg = NoiseCfg::default();
        let a = apply_noise(&obs, &cfg, &mut rng::stream(1, Domain::ObservationNoise, 0)).unwrap();
        let b = apply_noise(&obs, &cfg, &mut rng::stream(1, Domain::ObservationNoise, 0)).unwrap();
        let c = apply_noise(&obs, &cfg, &mut rng::stream(2, Domain::ObservationNoise, 0)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    fn los_at(t: f64) -> LosObs {
        LosObs {
            bs_id: BsId(1),
            t,
            rtt: 1e-7,
            aod_az: 0.0,
            aod_el: 0.0,
            aoa_az: PI,
            aoa_el: 0.0,
            rss: -60.0,
            truth_bounces: 0,
        }
    }

    #[test]
    fn outages_remove_los_in_closed_window() {
        let w = [OutageWindow::new(20.0, 40.0).unwrap()];
        for (t, kept) in [(10.0, true), (30.0, false), (20.0, false), (40.0, false), (40.1, true)] {
            let mut v = vec![los_at(t)];
            apply_outages(t, &mut v, &w);
            assert_eq!(v.len() == 1, kept, "t = {t}");
        }
        assert!(OutageWindow::new(5.0, 5.0).is_err());
    }

    #[test]
    fn outages_keep_reflections() {
        let (_, path) = reference_path();
        let mut epochs = vec![ObsEpoch {
            index: 0,
            t: 30.0,
            los: vec![los_at(30.0)],
            sbr: vec![synth_sbr(
                &path,
                &Pose { t: 30.0, ..pose_at(Vector3::new(20.0, 30.0, 0.0)) },
                &PathLossModel::default(),
            )],
        }];
        apply_outages_epochs(&mut epochs, &[OutageWindow::new(20.0, 40.0).unwrap()]);
        assert!(epochs[0].los.is_empty());
        assert_eq!(epochs[0].sbr.len(), 1);
    }

    #[test]
    fn free_space_reference_loss() {
        // 20 log10(4 pi f / c) at 28 GHz, 1 m
        let expected = 20.0 * (4.0 * PI * 28e9 / 299_792_458.0f64).log10();
        assert_relative_eq!(PathLossModel::default().pl0_db, expected, epsilon = 1e-12);
        let plm = PathLossModel::default();
        assert_relative_eq!(plm.distance_from_rss(plm.rss_at(123.4)), 123.4, max_relative = 1e-12);
    }
}
