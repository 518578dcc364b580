use nalgebra::{UnitQuaternion, Vector2, Vector3};
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};

use super::wrap_angle;
use crate::{Error, Result};

/// Ground-truth vehicle state at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub t: f64,
    pub p: Vector3<f64>,
    pub v: Vector3<f64>,
    /// (roll, pitch, yaw), radians; yaw CCW from East about Up.
    pub att: Vector3<f64>,
}

impl Pose {
    /// Body-to-navigation rotation.
    pub fn q_bn(&self) -> UnitQuaternion<f64> {
        UnitQuaternion::from_euler_angles(self.att.x, self.att.y, self.att.z)
    }
}

/// Time-ordered sequence of poses, sampled at a uniform rate.
#[derive(Debug, Clone)]
pub struct Trajectory {
    poses: Vec<Pose>,
}

impl Trajectory {
    pub fn new(poses: Vec<Pose>) -> Result<Self> {
        if poses.is_empty() {
            return Err(Error::geometry("trajectory is empty"));
        }
        if poses.windows(2).any(|w| !(w[1].t > w[0].t)) {
            return Err(Error::geometry("trajectory times must be strictly increasing"));
        }
        for p in &poses {
            let finite = p.t.is_finite() && p.p.iter().chain(p.v.iter()).chain(p.att.iter()).all(|c| c.is_finite());
            if !finite {
                return Err(Error::geometry(format!("non-finite pose at t={}", p.t)));
            }
            if p.att.x.abs() > FRAC_PI_2 || p.att.y.abs() > FRAC_PI_2 {
                return Err(Error::geometry(format!("roll/pitch beyond pi/2 at t={}", p.t)));
            }
        }
        Ok(Self { poses })
    }

    pub fn poses(&self) -> &[Pose] {
        &self.poses
    }

    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }

    pub fn start_time(&self) -> f64 {
        self.poses[0].t
    }

    pub fn end_time(&self) -> f64 {
        self.poses[self.poses.len() - 1].t
    }

    /// Mean sample interval.
    pub fn sample_interval(&self) -> f64 {
        if self.poses.len() < 2 {
            return 0.0;
        }
        (self.end_time() - self.start_time()) / (self.poses.len() - 1) as f64
    }

    /// Index of the pose nearest to `t`.
    pub fn nearest_index(&self, t: f64) -> usize {
        let i = self.poses.partition_point(|p| p.t < t);
        if i == 0 {
            return 0;
        }
        if i >= self.poses.len() {
            return self.poses.len() - 1;
        }
        if (self.poses[i].t - t).abs() < (t - self.poses[i - 1].t).abs() {
            i
        } else {
            i - 1
        }
    }

    pub fn nearest(&self, t: f64) -> &Pose {
        &self.poses[self.nearest_index(t)]
    }

    fn range(&self, t0: f64, t1: f64) -> &[Pose] {
        let lo = self.poses.partition_point(|p| p.t < t0);
        let hi = self.poses.partition_point(|p| p.t <= t1);
        &self.poses[lo..hi.max(lo)]
    }

    /// Distance travelled along the sampled path within `[t0, t1]`.
    pub fn arc_length(&self, t0: f64, t1: f64) -> f64 {
        self.range(t0, t1).windows(2).map(|w| (w[1].p - w[0].p).norm()).sum()
    }

    /// Cumulative absolute heading change within `[t0, t1]`, radians.
    pub fn heading_change(&self, t0: f64, t1: f64) -> f64 {
        self.range(t0, t1).windows(2).map(|w| wrap_angle(w[1].att.z - w[0].att.z).abs()).sum()
    }

    /// Poses with `t` in `[t0, t1]`.
    pub fn window(&self, t0: f64, t1: f64) -> &[Pose] {
        self.range(t0, t1)
    }
}

/// Parametric trajectory generators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "generator", rename_all = "snake_case", deny_unknown_fields)]
pub enum TrajectorySpec {
    /// Closed loop around a rounded rectangle, driven counter-clockwise with
    /// a sinusoidal speed profile between `speed_min_mps` and `speed_max_mps`.
    RoundedRectangle {
        center_m: [f64; 2],
        length_m: f64,
        width_m: f64,
        corner_radius_m: f64,
        height_m: f64,
        speed_min_mps: f64,
        speed_max_mps: f64,
        speed_period_s: f64,
        duration_s: f64,
        #[serde(default)]
        start_offset_m: f64,
    },
    /// Straight level drive at constant speed.
    Straight { start_m: [f64; 3], heading_deg: f64, speed_mps: f64, duration_s: f64 },
    Stationary {
        p_m: [f64; 3],
        #[serde(default)]
        yaw_deg: f64,
        duration_s: f64,
    },
}

impl TrajectorySpec {
    pub fn duration(&self) -> f64 {
        match *self {
            TrajectorySpec::RoundedRectangle { duration_s, .. }
            | TrajectorySpec::Straight { duration_s, .. }
            | TrajectorySpec::Stationary { duration_s, .. } => duration_s,
        }
    }

    /// Sample the generator at `rate_hz`, starting at t = 0.
    pub fn generate(&self, rate_hz: f64) -> Result<Trajectory> {
        if !(rate_hz > 0.0) {
            return Err(Error::config("trajectory rate must be positive"));
        }
        let duration = self.duration();
        if !(duration > 0.0) {
            return Err(Error::config("trajectory duration must be positive"));
        }
        let n = (duration * rate_hz).round() as usize + 1;
        let times = (0..n).map(|k| k as f64 / rate_hz);
        let poses = match self {
            TrajectorySpec::RoundedRectangle {
                center_m,
                length_m,
                width_m,
                corner_radius_m,
                height_m,
                speed_min_mps,
                speed_max_mps,
                speed_period_s,
                start_offset_m,
                ..
            } => {
                let loop_ = RoundedRectangle::new(
                    Vector2::new(center_m[0], center_m[1]),
                    *length_m,
                    *width_m,
                    *corner_radius_m,
                )?;
                if !(*speed_min_mps > 0.0 && speed_max_mps >= speed_min_mps && *speed_period_s > 0.0) {
                    return Err(Error::config("speed profile needs 0 < min <= max and a positive period"));
                }
                let mean = 0.5 * (speed_min_mps + speed_max_mps);
                let amp = 0.5 * (speed_max_mps - speed_min_mps);
                let w = 2.0 * PI / speed_period_s;
                times
                    .map(|t| {
                        let s = start_offset_m + mean * t + amp / w * (1.0 - (w * t).cos());
                        let speed = mean + amp * (w * t).sin();
                        let (xy, heading) = loop_.at(s);
                        Pose {
                            t,
                            p: Vector3::new(xy.x, xy.y, *height_m),
                            v: Vector3::new(heading.cos(), heading.sin(), 0.0) * speed,
                            att: Vector3::new(0.0, 0.0, wrap_angle(heading)),
                        }
                    })
                    .collect()
            }
            TrajectorySpec::Straight { start_m, heading_deg, speed_mps, .. } => {
                let h = heading_deg.to_radians();
                let dir = Vector3::new(h.cos(), h.sin(), 0.0);
                let p0 = Vector3::from(*start_m);
                times
                    .map(|t| Pose {
                        t,
                        p: p0 + dir * (speed_mps * t),
                        v: dir * *speed_mps,
                        att: Vector3::new(0.0, 0.0, wrap_angle(h)),
                    })
                    .collect()
            }
            TrajectorySpec::Stationary { p_m, yaw_deg, .. } => times
                .map(|t| Pose {
                    t,
                    p: Vector3::from(*p_m),
                    v: Vector3::zeros(),
                    att: Vector3::new(0.0, 0.0, wrap_angle(yaw_deg.to_radians())),
                })
                .collect(),
        };
        Trajectory::new(poses)
    }
}

/// Arc-length parametrised rounded rectangle, traversed counter-clockwise
/// starting at the west end of the south straight.
struct RoundedRectangle {
    segments: Vec<Segment>,
    perimeter: f64,
}

enum Segment {
    Line { start: Vector2<f64>, heading: f64, len: f64 },
    Arc { center: Vector2<f64>, radius: f64, heading0: f64 },
}

impl RoundedRectangle {
    fn new(center: Vector2<f64>, length: f64, width: f64, r: f64) -> Result<Self> {
        if !(r > 0.0 && length > 2.0 * r && width > 2.0 * r) {
            return Err(Error::config("rounded rectangle needs length, width > 2 * corner radius > 0"));
        }
        let lx = length - 2.0 * r;
        let ly = width - 2.0 * r;
        let (hx, hy) = (0.5 * length, 0.5 * width);
        let c = center;
        let segments = vec![
            Segment::Line { start: c + Vector2::new(-0.5 * lx, -hy), heading: 0.0, len: lx },
            Segment::Arc { center: c + Vector2::new(0.5 * lx, -0.5 * ly), radius: r, heading0: 0.0 },
            Segment::Line { start: c + Vector2::new(hx, -0.5 * ly), heading: FRAC_PI_2, len: ly },
            Segment::Arc { center: c + Vector2::new(0.5 * lx, 0.5 * ly), radius: r, heading0: FRAC_PI_2 },
            Segment::Line { start: c + Vector2::new(0.5 * lx, hy), heading: PI, len: lx },
            Segment::Arc { center: c + Vector2::new(-0.5 * lx, 0.5 * ly), radius: r, heading0: PI },
            Segment::Line { start: c + Vector2::new(-hx, 0.5 * ly), heading: 1.5 * PI, len: ly },
            Segment::Arc { center: c + Vector2::new(-0.5 * lx, -0.5 * ly), radius: r, heading0: 1.5 * PI },
        ];
        let perimeter = 2.0 * lx + 2.0 * ly + 2.0 * PI * r;
        Ok(Self { segments, perimeter })
    }

    fn seg_len(seg: &Segment) -> f64 {
        match seg {
            Segment::Line { len, .. } => *len,
            Segment::Arc { radius, .. } => FRAC_PI_2 * radius,
        }
    }

    /// Position and (unwrapped within the lap) heading at arc length `s`.
    fn at(&self, s: f64) -> (Vector2<f64>, f64) {
        let mut s = s.rem_euclid(self.perimeter);
        for seg in &self.segments {
            let len = Self::seg_len(seg);
            if s <= len {
                return match *seg {
                    Segment::Line { start, heading, .. } => {
                        (start + Vector2::new(heading.cos(), heading.sin()) * s, heading)
                    }
                    Segment::Arc { center, radius, heading0 } => {
                        let heading = heading0 + s / radius;
                        // CCW turn: centre is on the left, radius vector points right of heading
                        let radial = Vector2::new(heading.sin(), -heading.cos());
                        (center + radial * radius, heading)
                    }
                };
            }
            s -= len;
        }
        // s == perimeter up to rounding
        self.at(0.0)
    }
}
