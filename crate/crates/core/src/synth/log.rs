//! Line-delimited JSON measurement log.
//!
//! One record per line, tagged by `"type"`. Keys carry their units:
//!
//! ```text
//! {"type":"imu","t_s":0.0,"gyro_radps":[0,0,0],"accel_mps2":[0,0,9.80665]}
//! {"type":"odo","t_s":0.0,"speed_mps":7.5}
//! {"type":"los","t_s":0.1,"bs_id":3,"rtt_s":6.7e-7,"aod_az_rad":..,"aod_el_rad":..,"aoa_az_rad":..,"aoa_el_rad":..,"rss_dbm":-92.1,"truth_bounces":0}
//! {"type":"sbr","t_s":0.1,"bs_id":3,"toa_s":4.1e-7,"aod_az_rad":..,...,"rss_dbm":-101.0,"truth_bounces":1}
//! ```
//!
//! `truth_bounces` is optional on ingest (simulator ground truth; unknown
//! for recorded data and then reported as 255).

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use std::io::{BufRead, Write};

use super::{ImuSample, LosObs, ObsEpoch, OdoSample, SbrObs};
use crate::scene::BsId;
use crate::{Error, Result};

/// Ground truth marker for records whose bounce count is not known.
pub const UNKNOWN_BOUNCES: u8 = u8::MAX;

fn unknown_bounces() -> u8 {
    UNKNOWN_BOUNCES
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Record {
    Imu {
        t_s: f64,
        gyro_radps: [f64; 3],
        accel_mps2: [f64; 3],
    },
    Odo {
        t_s: f64,
        speed_mps: f64,
    },
    Los {
        t_s: f64,
        bs_id: u32,
        rtt_s: f64,
        aod_az_rad: f64,
        aod_el_rad: f64,
        aoa_az_rad: f64,
        aoa_el_rad: f64,
        rss_dbm: f64,
        #[serde(default = "unknown_bounces")]
        truth_bounces: u8,
    },
    Sbr {
        t_s: f64,
        bs_id: u32,
        toa_s: f64,
        aod_az_rad: f64,
        aod_el_rad: f64,
        aoa_az_rad: f64,
        aoa_el_rad: f64,
        rss_dbm: f64,
        #[serde(default = "unknown_bounces")]
        truth_bounces: u8,
    },
}

/// Everything an estimator consumes.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MeasurementLog {
    pub imu: Vec<ImuSample>,
    pub odo: Vec<OdoSample>,
    pub epochs: Vec<ObsEpoch>,
}

impl MeasurementLog {
    pub fn records(&self) -> Vec<Record> {
        let mut out = Vec::with_capacity(self.imu.len() + self.odo.len() + self.epochs.len() * 8);
        out.extend(self.imu.iter().map(|s| Record::Imu {
            t_s: s.t,
            gyro_radps: s.gyro.into(),
            accel_mps2: s.accel.into(),
        }));
        out.extend(self.odo.iter().map(|s| Record::Odo { t_s: s.t, speed_mps: s.speed }));
        for e in &self.epochs {
            out.extend(e.los.iter().map(|o| Record::Los {
                t_s: o.t,
                bs_id: o.bs_id.0,
                rtt_s: o.rtt,
                aod_az_rad: o.aod_az,
                aod_el_rad: o.aod_el,
                aoa_az_rad: o.aoa_az,
                aoa_el_rad: o.aoa_el,
                rss_dbm: o.rss,
                truth_bounces: o.truth_bounces,
            }));
            out.extend(e.sbr.iter().map(|o| Record::Sbr {
                t_s: o.t,
                bs_id: o.bs_id.0,
                toa_s: o.toa,
                aod_az_rad: o.aod_az,
                aod_el_rad: o.aod_el,
                aoa_az_rad: o.aoa_az,
                aoa_el_rad: o.aoa_el,
                rss_dbm: o.rss,
                truth_bounces: o.truth_bounces,
            }));
        }
        out
    }

    pub fn write_ndjson<W: Write>(&self, mut w: W) -> Result<()> {
        for r in self.records() {
            serde_json::to_writer(&mut w, &r)?;
            w.write_all(b"\n").map_err(|e| Error::io("<measurement log>", e))?;
        }
        Ok(())
    }

    /// Parse a log. Channel records are grouped into epochs at `obs_hz`.
    pub fn read_ndjson<R: BufRead>(r: R, obs_hz: f64) -> Result<Self> {
        if !(obs_hz > 0.0) {
            return Err(Error::config("observation rate must be positive"));
        }
        let mut log = MeasurementLog::default();
        let mut los: Vec<LosObs> = Vec::new();
        let mut sbr: Vec<SbrObs> = Vec::new();
        for (n, line) in r.lines().enumerate() {
            let line = line.map_err(|e| Error::io("<measurement log>", e))?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: Record = serde_json::from_str(&line)
                .map_err(|e| Error::config(format!("measurement log line {}: {e}", n + 1)))?;
            match rec {
                Record::Imu { t_s, gyro_radps, accel_mps2 } => log.imu.push(ImuSample {
                    t: t_s,
                    gyro: Vector3::from(gyro_radps),
                    accel: Vector3::from(accel_mps2),
                }),
                Record::Odo { t_s, speed_mps } => log.odo.push(OdoSample { t: t_s, speed: speed_mps }),
                Record::Los {
                    t_s,
                    bs_id,
                    rtt_s,
                    aod_az_rad,
                    aod_el_rad,
                    aoa_az_rad,
                    aoa_el_rad,
                    rss_dbm,
                    truth_bounces,
                } => los.push(LosObs {
                    bs_id: BsId(bs_id),
                    t: t_s,
                    rtt: rtt_s,
                    aod_az: aod_az_rad,
                    aod_el: aod_el_rad,
                    aoa_az: aoa_az_rad,
                    aoa_el: aoa_el_rad,
                    rss: rss_dbm,
                    truth_bounces,
                }),
                Record::Sbr {
                    t_s,
                    bs_id,
                    toa_s,
                    aod_az_rad,
                    aod_el_rad,
                    aoa_az_rad,
                    aoa_el_rad,
                    rss_dbm,
                    truth_bounces,
                } => sbr.push(SbrObs {
                    bs_id: BsId(bs_id),
                    t: t_s,
                    toa: toa_s,
                    aod_az: aod_az_rad,
                    aod_el: aod_el_rad,
                    aoa_az: aoa_az_rad,
                    aoa_el: aoa_el_rad,
                    rss: rss_dbm,
                    truth_bounces,
                }),
            }
        }
        log.imu.sort_by(|a, b| a.t.total_cmp(&b.t));
        log.odo.sort_by(|a, b| a.t.total_cmp(&b.t));
        log.epochs = group_epochs(los, sbr, obs_hz);
        Ok(log)
    }
}

fn group_epochs(los: Vec<LosObs>, sbr: Vec<SbrObs>, obs_hz: f64) -> Vec<ObsEpoch> {
    use std::collections::BTreeMap;
    let key = |t: f64| (t * obs_hz).round() as u64;
    let mut map: BTreeMap<u64, ObsEpoch> = BTreeMap::new();
    for o in los {
        let k = key(o.t);
        map.entry(k).or_insert_with(|| ObsEpoch { index: k, t: o.t, ..Default::default() }).los.push(o);
    }
    for o in sbr {
        let k = key(o.t);
        map.entry(k).or_insert_with(|| ObsEpoch { index: k, t: o.t, ..Default::default() }).sbr.push(o);
    }
    map.into_values().collect()
}
