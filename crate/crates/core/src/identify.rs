//! Measurement admission gates: LoS/NLoS exclusion by timing/power
//! consistency, the single-bounce check and the motion constraint.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::synth::{ChannelObs, PathLossModel, SbrObs};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GateConfig {
    /// Largest |timing range - power range| still admitted as LoS, m.
    pub range_consistency_threshold_m: f64,
    /// Largest departure/arrival vertical-component mismatch, rad.
    pub elevation_consistency_eps_rad: f64,
    /// Largest per-path fix residual, m.
    pub residual_threshold_m: f64,
    /// Slack on top of the odometer distance, m.
    pub motion_margin_m: f64,
}

impl Default for GateConfig {
    fn default() -> Self {
        Self {
            range_consistency_threshold_m: 10.0,
            elevation_consistency_eps_rad: 0.5f64.to_radians(),
            residual_threshold_m: 3.0,
            motion_margin_m: 2.0,
        }
    }
}

impl GateConfig {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.range_consistency_threshold_m,
            self.elevation_consistency_eps_rad,
            self.residual_threshold_m,
            self.motion_margin_m,
        ];
        // infinity is a legitimate "gate disabled" setting
        if all.iter().any(|v| v.is_nan() || *v < 0.0) {
            return Err(Error::config("gate thresholds must be >= 0"));
        }
        Ok(())
    }
}

/// Admit as LoS iff the timing range and the free-space range implied by
/// the received power agree within the threshold.
pub fn classify_los<O: ChannelObs>(obs: &O, plm: &PathLossModel, cfg: &GateConfig) -> bool {
    range_inconsistency(obs, plm) <= cfg.range_consistency_threshold_m
}

/// |timing range - power range|, m.
pub fn range_inconsistency<O: ChannelObs>(obs: &O, plm: &PathLossModel) -> f64 {
    (obs.timing_range() - plm.distance_from_rss(obs.rss())).abs()
}

/// Off a vertical wall the vertical component of the propagation direction
/// survives the bounce: sin(aod_el) = -sin(aoa_el). Returns the mismatch.
pub fn elevation_mismatch(obs: &SbrObs) -> f64 {
    (obs.aod_el.sin() + obs.aoa_el.sin()).abs()
}

/// Admit as single-bounce iff the elevation identity holds within
/// `eps` and the path agrees with the fix to within the residual threshold.
pub fn oori_check(obs: &SbrObs, fix_residual: f64, cfg: &GateConfig) -> bool {
    elevation_mismatch(obs) <= cfg.elevation_consistency_eps_rad && fix_residual <= cfg.residual_threshold_m
}

/// Admit a candidate position iff it is reachable from the previous
/// estimate given the odometer distance.
pub fn motion_gate(candidate: &Vector3<f64>, prior: &Vector3<f64>, odo_dist: f64, dt: f64, cfg: &GateConfig) -> bool {
    motion_gate_with_margin(candidate, prior, odo_dist, dt, cfg.motion_margin_m)
}

pub fn motion_gate_with_margin(
    candidate: &Vector3<f64>,
    prior: &Vector3<f64>,
    odo_dist: f64,
    dt: f64,
    margin: f64,
) -> bool {
    dt > 0.0 && (candidate - prior).norm() <= odo_dist + margin
}

/// Admitted/rejected counts per gate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct GateLog {
    pub los_admitted: u64,
    pub los_rejected: u64,
    pub oori_admitted: u64,
    pub oori_rejected: u64,
    pub motion_admitted: u64,
    pub motion_rejected: u64,
    pub nis_admitted: u64,
    pub nis_rejected: u64,
}

impl GateLog {
    pub fn merge(&mut self, o: &GateLog) {
        self.los_admitted += o.los_admitted;
        self.los_rejected += o.los_rejected;
        self.oori_admitted += o.oori_admitted;
        self.oori_rejected += o.oori_rejected;
        self.motion_admitted += o.motion_admitted;
        self.motion_rejected += o.motion_rejected;
        self.nis_admitted += o.nis_admitted;
        self.nis_rejected += o.nis_rejected;
    }

    pub(crate) fn count(admitted: bool, yes: &mut u64, no: &mut u64) {
        if admitted {
            *yes += 1;
        } else {
            *no += 1;
        }
    }
}
