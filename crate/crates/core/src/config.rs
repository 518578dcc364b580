//! Scenario and run configuration files (JSON).
//!
//! Scenario file:
//!
//! ```json
//! {
//!   "base_stations": [{"id": 1, "p_enu_m": [0, 0, 25]}],
//!   "walls": [{"id": 1, "a_enu_m": [50, 0], "b_enu_m": [50, 100], "z0_m": 0, "height_m": 20}],
//!   "trajectory": {"generator": "straight", "start_m": [0, 0, 1.5], "heading_deg": 0,
//!                  "speed_mps": 8, "duration_s": 60},
//!   "rates": {"imu_hz": 100, "obs_hz": 10, "odo_hz": 10},
//!   "noise": {"var_range_m2": 0.5, "var_angle_deg2": 0.01},
//!   "outages": [{"t_start_s": 20, "t_end_s": 40}]
//! }
//! ```
//!
//! `trajectory` is either a generator (`"generator": "rounded_rectangle" |
//! "straight" | "stationary"`) or `{"samples": [{"t_s", "p_enu_m",
//! "v_enu_mps", "att_rpy_rad"}]}` sampled at the IMU rate. Optional
//! sections: `path_loss`, `imu_error`, `odometer`, `synthesis`.
//!
//! Run file: `scenario` (path, relative to the run file), `mode`, `seed`,
//! `with_sbr`, `output_dir`, `estimator`, and one section per mode that
//! needs parameters (`outage_sweep`, `noise_sweep`, `drift_profile`,
//! `single`).

use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

use crate::engine::EngineConfig;
use crate::scene::{BaseStation, Pose, Scenario, Trajectory, TrajectorySpec, Wall};
use crate::synth::{ImuErrorModel, NoiseCfg, OutageWindow, PathLossModel, SynthOptions};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaseStationEntry {
    pub id: u32,
    pub p_enu_m: [f64; 3],
}

fn default_reflection_loss() -> f64 {
    PathLossModel::default().reflection_loss_db
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WallEntry {
    pub id: u32,
    pub a_enu_m: [f64; 2],
    pub b_enu_m: [f64; 2],
    #[serde(default)]
    pub z0_m: f64,
    pub height_m: f64,
    #[serde(default = "default_reflection_loss")]
    pub reflection_loss_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoseEntry {
    pub t_s: f64,
    pub p_enu_m: [f64; 3],
    pub v_enu_mps: [f64; 3],
    pub att_rpy_rad: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TrajectoryEntry {
    Samples { samples: Vec<PoseEntry> },
    Generator(TrajectorySpec),
}

impl TrajectoryEntry {
    fn from_value(v: serde_json::Value) -> Result<Self> {
        if v.get("samples").is_some() {
            #[derive(Deserialize)]
            #[serde(deny_unknown_fields)]
            struct S {
                samples: Vec<PoseEntry>,
            }
            let s: S = serde_json::from_value(v).map_err(|e| Error::config(format!("trajectory samples: {e}")))?;
            Ok(TrajectoryEntry::Samples { samples: s.samples })
        } else {
            let g = serde_json::from_value(v).map_err(|e| Error::config(format!("trajectory generator: {e}")))?;
            Ok(TrajectoryEntry::Generator(g))
        }
    }

    pub fn build(&self, rate_hz: f64) -> Result<Trajectory> {
        match self {
            TrajectoryEntry::Generator(g) => g.generate(rate_hz),
            TrajectoryEntry::Samples { samples } => Trajectory::new(
                samples
                    .iter()
                    .map(|s| Pose {
                        t: s.t_s,
                        p: Vector3::from(s.p_enu_m),
                        v: Vector3::from(s.v_enu_mps),
                        att: Vector3::from(s.att_rpy_rad),
                    })
                    .collect(),
            ),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Rates {
    pub imu_hz: f64,
    pub obs_hz: f64,
    pub odo_hz: f64,
}

impl Default for Rates {
    fn default() -> Self {
        Self { imu_hz: 100.0, obs_hz: 10.0, odo_hz: 10.0 }
    }
}

impl Rates {
    /// IMU samples per observation epoch.
    pub fn epoch_stride(&self) -> Result<usize> {
        if !(self.imu_hz > 0.0 && self.obs_hz > 0.0 && self.odo_hz > 0.0) {
            return Err(Error::config("rates must be positive"));
        }
        let stride = self.imu_hz / self.obs_hz;
        if (stride - stride.round()).abs() > 1e-9 || stride < 1.0 {
            return Err(Error::config("IMU rate must be an integer multiple of the observation rate"));
        }
        if self.imu_hz > 1000.0 || 1.0 / self.imu_hz > crate::ins::MAX_STEP {
            return Err(Error::config("IMU rate must lie in [10, 1000] Hz"));
        }
        Ok(stride.round() as usize)
    }

    pub fn imu_dt(&self) -> f64 {
        1.0 / self.imu_hz
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OdometerCfg {
    pub noise_std_mps: f64,
}

impl Default for OdometerCfg {
    fn default() -> Self {
        Self { noise_std_mps: 0.05 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default)]
    pub name: String,
    pub base_stations: Vec<BaseStationEntry>,
    #[serde(default)]
    pub walls: Vec<WallEntry>,
    pub trajectory: serde_json::Value,
    #[serde(default)]
    pub rates: Rates,
    #[serde(default)]
    pub path_loss: PathLossModel,
    #[serde(default)]
    pub imu_error: ImuErrorModel,
    #[serde(default)]
    pub odometer: OdometerCfg,
    #[serde(default)]
    pub noise: NoiseCfg,
    #[serde(default)]
    pub outages: Vec<OutageWindow>,
    #[serde(default)]
    pub synthesis: SynthOptions,
}

/// A validated scenario with its models.
#[derive(Debug, Clone)]
pub struct World {
    pub name: String,
    pub scenario: Scenario,
    pub rates: Rates,
    pub path_loss: PathLossModel,
    pub imu_error: ImuErrorModel,
    pub odometer: OdometerCfg,
    pub noise: NoiseCfg,
    pub outages: Vec<OutageWindow>,
    pub synthesis: SynthOptions,
}

impl ScenarioFile {
    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::config(format!("scenario: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn build(&self) -> Result<World> {
        self.rates.epoch_stride()?;
        self.path_loss.validate()?;
        self.imu_error.validate()?;
        self.noise.validate()?;
        if !(self.odometer.noise_std_mps >= 0.0) {
            return Err(Error::config("odometer noise must be >= 0"));
        }
        for w in &self.outages {
            w.validate()?;
        }
        if !(self.synthesis.max_range_m > 0.0) {
            return Err(Error::config("synthesis max_range_m must be > 0"));
        }
        let trajectory = TrajectoryEntry::from_value(self.trajectory.clone())?.build(self.rates.imu_hz)?;
        if trajectory.len() < 3 {
            return Err(Error::config("trajectory needs at least 3 samples"));
        }
        let stations = self.base_stations.iter().map(|b| BaseStation::new(b.id, Vector3::from(b.p_enu_m))).collect();
        let walls = self
            .walls
            .iter()
            .map(|w| {
                Wall::new(
                    w.id,
                    Vector2::from(w.a_enu_m),
                    Vector2::from(w.b_enu_m),
                    w.z0_m,
                    w.height_m,
                    w.reflection_loss_db,
                )
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(World {
            name: self.name.clone(),
            scenario: Scenario::new(stations, walls, trajectory)?,
            rates: self.rates,
            path_loss: self.path_loss,
            imu_error: self.imu_error,
            odometer: self.odometer,
            noise: self.noise,
            outages: self.outages.clone(),
            synthesis: self.synthesis,
        })
    }
}

/// Which measurement a noise sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseDomain {
    Range,
    Angle,
}

impl NoiseDomain {
    pub fn as_str(self) -> &'static str {
        match self {
            NoiseDomain::Range => "range",
            NoiseDomain::Angle => "angle",
        }
    }
}

/// One artificial outage of a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutageSpec {
    pub id: u32,
    pub start_s: f64,
    pub duration_s: f64,
}

impl OutageSpec {
    pub fn window(&self) -> Result<OutageWindow> {
        OutageWindow::new(self.start_s, self.start_s + self.duration_s)
    }
}

fn one() -> u32 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutageSweepCfg {
    pub outages: Vec<OutageSpec>,
    #[serde(default = "one")]
    pub seeds: u32,
    /// Filter runs start this long before each outage, s.
    #[serde(default = "default_lead_in")]
    pub lead_in_s: f64,
}

fn default_lead_in() -> f64 {
    60.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSweepCfg {
    pub domain: NoiseDomain,
    /// m^2 for range, deg^2 for angle.
    pub variances: Vec<f64>,
    #[serde(default = "one")]
    pub seeds: u32,
}

fn default_every() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriftProfileCfg {
    #[serde(default = "one")]
    pub seeds: u32,
    /// Reporting interval, s.
    #[serde(default = "default_every")]
    pub every_s: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SingleCfg {
    /// Line-delimited JSON measurement log replacing synthesis (relative to
    /// the run file).
    #[serde(default)]
    pub measurement_log: Option<PathBuf>,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: PathBuf,
    pub mode: String,
    #[serde(default = "yes")]
    pub with_sbr: bool,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub estimator: EngineConfig,
    #[serde(default)]
    pub outage_sweep: Option<OutageSweepCfg>,
    #[serde(default)]
    pub noise_sweep: Option<NoiseSweepCfg>,
    #[serde(default)]
    pub drift_profile: Option<DriftProfileCfg>,
    #[serde(default)]
    pub single: Option<SingleCfg>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::config(format!("run config: {e}")))
    }

    /// Load and resolve relative paths against the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.scenario = base.join(&cfg.scenario);
        if let Some(single) = cfg.single.as_mut() {
            if let Some(log) = single.measurement_log.as_mut() {
                *log = base.join(&*log);
            }
        }
        if let Some(out) = cfg.output_dir.as_mut() {
            if out.is_relative() {
                *out = base.join(&*out);
            }
        }
        Ok(cfg)
    }

    /// Seeds of an ensemble of `n` runs.
    pub fn seeds(&self, n: u32) -> Vec<u64> {
        (0..n as u64).map(|i| self.seed.wrapping_add(i)).collect()
    }

    /// Estimator configuration honouring `with_sbr`.
    pub fn engine(&self) -> EngineConfig {
        if self.with_sbr {
            self.estimator.clone()
        } else {
            self.estimator.without_sbr()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "base_stations": [{"id": 1, "p_enu_m": [0, 0, 25]}, {"id": 2, "p_enu_m": [200, 0, 25]}],
        "walls": [{"id": 7, "a_enu_m": [0, 30], "b_enu_m": [200, 30], "height_m": 20}],
        "trajectory": {"generator": "straight", "start_m": [10, 0, 1.5], "heading_deg": 0, "speed_mps": 8, "duration_s": 10}
    }"#;

    #[test]
    fn minimal_scenario_builds_with_defaults() {
        let w = ScenarioFile::parse(MINIMAL).unwrap().build().unwrap();
        assert_eq!(w.scenario.base_stations.len(), 2);
        assert_eq!(w.scenario.walls[0].reflection_loss_db, 6.0);
        assert_eq!(w.scenario.trajectory.len(), 1001);
        assert_eq!(w.rates.epoch_stride().unwrap(), 10);
        assert_eq!(w.noise, NoiseCfg::default());
    }

    #[test]
    fn samples_trajectory() {
        let text = MINIMAL.replace(
            r#"{"generator": "straight", "start_m": [10, 0, 1.5], "heading_deg": 0, "speed_mps": 8, "duration_s": 10}"#,
            r#"{"samples": [
                {"t_s": 0.0, "p_enu_m": [0, 5, 1], "v_enu_mps": [0, 0, 0], "att_rpy_rad": [0, 0, 0]},
                {"t_s": 0.01, "p_enu_m": [0, 5, 1], "v_enu_mps": [0, 0, 0], "att_rpy_rad": [0, 0, 0]},
                {"t_s": 0.02, "p_enu_m": [0, 5, 1], "v_enu_mps": [0, 0, 0], "att_rpy_rad": [0, 0, 0]}]}"#,
        );
        let w = ScenarioFile::parse(&text).unwrap().build().unwrap();
        assert_eq!(w.scenario.trajectory.len(), 3);
    }

    #[test]
    fn error_classes() {
        assert_eq!(ScenarioFile::parse("{").unwrap_err().kind(), "config");
        let unknown = MINIMAL.replace("\"walls\"", "\"wallz\"");
        assert_eq!(ScenarioFile::parse(&unknown).unwrap_err().kind(), "config");
        let flat = MINIMAL.replace("\"height_m\": 20", "\"height_m\": 0");
        assert_eq!(ScenarioFile::parse(&flat).unwrap().build().unwrap_err().kind(), "geometry");
        let dup = MINIMAL.replace("\"id\": 2", "\"id\": 1");
        assert_eq!(ScenarioFile::parse(&dup).unwrap().build().unwrap_err().kind(), "geometry");
        let rates = MINIMAL.replacen('{', r#"{"rates": {"imu_hz": 100, "obs_hz": 30, "odo_hz": 10},"#, 1);
        assert_eq!(ScenarioFile::parse(&rates).unwrap().build().unwrap_err().kind(), "config");
    }

    #[test]
    fn run_config_resolves_paths() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.json");
        std::fs::write(&path, r#"{"scenario": "s.json", "mode": "single", "seed": 4, "output_dir": "out"}"#).unwrap();
        let cfg = RunConfig::load(&path).unwrap();
        assert_eq!(cfg.scenario, dir.path().join("s.json"));
        assert_eq!(cfg.output_dir.as_deref(), Some(dir.path().join("out").as_path()));
        assert!(cfg.with_sbr);
        assert_eq!(cfg.seeds(3), vec![4, 5, 6]);
    }
}
