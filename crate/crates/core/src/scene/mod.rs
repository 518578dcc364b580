//! Geometric world model: base stations, finite vertical reflector walls and
//! the mirror-image construction of reflected paths.
//!
//! Frame conventions: East-North-Up, metres. Azimuth is measured
//! counter-clockwise from East, elevation above the horizontal plane.

mod trajectory;

pub use trajectory::{Pose, Trajectory, TrajectorySpec};

use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::{Error, Result};

/// Relative tolerance applied when testing whether a point lies on a wall
/// rectangle. Keeps reflection points computed in floating point on the wall.
const EDGE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BsId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct WallId(pub u32);

impl std::fmt::Display for BsId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "bs{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaseStation {
    pub id: BsId,
    pub p: Vector3<f64>,
}

impl BaseStation {
    pub fn new(id: u32, p: Vector3<f64>) -> Self {
        Self { id: BsId(id), p }
    }
}

/// A finite vertical rectangle standing on the horizontal segment `a -> b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Wall {
    pub id: WallId,
    pub a: Vector2<f64>,
    pub b: Vector2<f64>,
    /// Base height, m.
    pub z0: f64,
    /// Height above `z0`, m.
    pub height: f64,
    /// Power lost on each reflection off this wall, dB.
    pub reflection_loss_db: f64,
    normal: Vector3<f64>,
}

impl Wall {
    pub fn new(
        id: u32,
        a: Vector2<f64>,
        b: Vector2<f64>,
        z0: f64,
        height: f64,
        reflection_loss_db: f64,
    ) -> Result<Self> {
        let d = b - a;
        let len = d.norm();
        if !(len > 0.0) || !len.is_finite() {
            return Err(Error::geometry(format!("wall {id}: zero-length or non-finite base segment")));
        }
        if !(height > 0.0) || !z0.is_finite() || !height.is_finite() {
            return Err(Error::geometry(format!("wall {id}: height must be positive and finite")));
        }
        if !(reflection_loss_db >= 0.0) {
            return Err(Error::geometry(format!("wall {id}: reflection loss must be >= 0 dB")));
        }
        // left-hand perpendicular of (b - a)
        let normal = Vector3::new(-d.y / len, d.x / len, 0.0);
        Ok(Self { id: WallId(id), a, b, z0, height, reflection_loss_db, normal })
    }

    /// Horizontal unit normal.
    pub fn normal(&self) -> Vector3<f64> {
        self.normal
    }

    pub fn length(&self) -> f64 {
        (self.b - self.a).norm()
    }

    fn anchor(&self) -> Vector3<f64> {
        Vector3::new(self.a.x, self.a.y, self.z0)
    }

    /// Signed distance from the wall plane, positive on the normal side.
    pub fn signed_distance(&self, p: &Vector3<f64>) -> f64 {
        (p - self.anchor()).dot(&self.normal)
    }

    /// Whether a point already on the plane lies inside the rectangle
    /// (edges included).
    pub fn contains(&self, x: &Vector3<f64>) -> bool {
        let d = self.b - self.a;
        let tau = (Vector2::new(x.x, x.y) - self.a).dot(&d) / d.norm_squared();
        let ztol = EDGE_TOL * self.height.max(1.0);
        (-EDGE_TOL..=1.0 + EDGE_TOL).contains(&tau) && (self.z0 - ztol..=self.z0 + self.height + ztol).contains(&x.z)
    }

    /// Point where the closed segment `[p0, p1]` crosses the rectangle, if any.
    pub fn segment_hit(&self, p0: &Vector3<f64>, p1: &Vector3<f64>) -> Option<Vector3<f64>> {
        let s0 = self.signed_distance(p0);
        let s1 = self.signed_distance(p1);
        if (s0 > 0.0 && s1 > 0.0) || (s0 < 0.0 && s1 < 0.0) {
            return None;
        }
        if s0 == s1 {
            // segment lies in the plane; only endpoint contact is resolved
            return [p0, p1].into_iter().find(|p| self.contains(p)).copied();
        }
        let lambda = s0 / (s0 - s1);
        let x = p0 + (p1 - p0) * lambda;
        self.contains(&x).then_some(x)
    }
}

/// Unit direction from azimuth (CCW from East) and elevation.
pub fn direction(az: f64, el: f64) -> Vector3<f64> {
    let (se, ce) = el.sin_cos();
    let (sa, ca) = az.sin_cos();
    Vector3::new(ce * ca, ce * sa, se)
}

/// Azimuth in (-pi, pi] and elevation in [-pi/2, pi/2] of a non-zero vector.
pub fn azimuth_elevation(u: &Vector3<f64>) -> (f64, f64) {
    let n = u.norm();
    let az = u.y.atan2(u.x);
    let el = (u.z / n).clamp(-1.0, 1.0).asin();
    (az, el)
}

/// Wrap an angle into (-pi, pi].
pub fn wrap_angle(a: f64) -> f64 {
    let mut w = a.rem_euclid(2.0 * PI);
    if w > PI {
        w -= 2.0 * PI;
    }
    w
}

/// Reflection of `p` across the infinite vertical plane containing `wall`.
pub fn mirror_point(p: &Vector3<f64>, wall: &Wall) -> Vector3<f64> {
    let n = wall.normal();
    p - n * (2.0 * wall.signed_distance(p))
}

/// A single-bounce specular path from a base station to the UE.
#[derive(Debug, Clone, PartialEq)]
pub struct SbrPath {
    pub bs_id: BsId,
    pub wall_id: WallId,
    /// Reflection point on the wall.
    pub q: Vector3<f64>,
    /// BS -> q leg length, m.
    pub d1: f64,
    /// q -> UE leg length, m.
    pub d2: f64,
    /// Total length, m.
    pub length: f64,
    /// Unit departure direction at the BS.
    pub u_d: Vector3<f64>,
    /// Unit arrival direction at the UE, pointing from the UE toward `q`.
    pub u_a: Vector3<f64>,
    pub reflection_loss_db: f64,
}

/// Specular reflection of the BS signal off `wall` toward `ue`.
///
/// Returns `None` when the BS and UE are not on the same side of the wall
/// plane or the mirror segment misses the finite rectangle.
pub fn specular_path(bs: &BaseStation, ue: &Vector3<f64>, wall: &Wall) -> Option<SbrPath> {
    let s_bs = wall.signed_distance(&bs.p);
    let s_ue = wall.signed_distance(ue);
    if !(s_bs * s_ue > 0.0) {
        return None;
    }
    let image = mirror_point(&bs.p, wall);
    // image and ue lie strictly on opposite sides
    let lambda = -s_bs / (-s_bs - s_ue);
    let q = image + (ue - image) * lambda;
    if !wall.contains(&q) {
        return None;
    }
    let leg1 = q - bs.p;
    let leg2 = q - ue;
    let d1 = leg1.norm();
    let d2 = leg2.norm();
    if d1 == 0.0 || d2 == 0.0 {
        return None;
    }
    Some(SbrPath {
        bs_id: bs.id,
        wall_id: wall.id,
        q,
        d1,
        d2,
        length: d1 + d2,
        u_d: leg1 / d1,
        u_a: leg2 / d2,
        reflection_loss_db: wall.reflection_loss_db,
    })
}

/// True iff the segment between the BS and the UE crosses no wall.
/// Touching a wall at an endpoint counts as blocked.
pub fn los_visible(bs: &BaseStation, ue: &Vector3<f64>, walls: &[Wall]) -> bool {
    walls.iter().all(|w| w.segment_hit(&bs.p, ue).is_none())
}

/// True iff no wall outside `exclude` blocks any leg of the polyline.
pub fn polyline_clear(points: &[Vector3<f64>], walls: &[Wall], exclude: &[WallId]) -> bool {
    points
        .windows(2)
        .all(|leg| walls.iter().filter(|w| !exclude.contains(&w.id)).all(|w| w.segment_hit(&leg[0], &leg[1]).is_none()))
}

/// A reflected path with any number of bounces.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiBouncePath {
    pub bs_id: BsId,
    pub walls: Vec<WallId>,
    /// Bounce points in propagation order.
    pub bounces: Vec<Vector3<f64>>,
    pub length: f64,
    pub u_d: Vector3<f64>,
    pub u_a: Vector3<f64>,
    pub reflection_loss_db: f64,
}

impl MultiBouncePath {
    pub fn bounce_count(&self) -> usize {
        self.bounces.len()
    }

    /// Polyline BS -> bounces -> UE.
    pub fn polyline(&self, bs: &Vector3<f64>, ue: &Vector3<f64>) -> Vec<Vector3<f64>> {
        let mut pts = Vec::with_capacity(self.bounces.len() + 2);
        pts.push(*bs);
        pts.extend_from_slice(&self.bounces);
        pts.push(*ue);
        pts
    }
}

impl From<&SbrPath> for MultiBouncePath {
    fn from(p: &SbrPath) -> Self {
        Self {
            bs_id: p.bs_id,
            walls: vec![p.wall_id],
            bounces: vec![p.q],
            length: p.length,
            u_d: p.u_d,
            u_a: p.u_a,
            reflection_loss_db: p.reflection_loss_db,
        }
    }
}

/// Two-bounce path BS -> `first` -> `second` -> UE by double mirroring.
pub fn double_bounce_path(bs: &BaseStation, ue: &Vector3<f64>, first: &Wall, second: &Wall) -> Option<MultiBouncePath> {
    if first.id == second.id {
        return None;
    }
    let image1 = mirror_point(&bs.p, first);
    let image2 = mirror_point(&image1, second);
    // image2 -> ue must cross the second wall, image1 -> q2 the first one
    if !(wall_separates(second, &image2, ue)) {
        return None;
    }
    let q2 = second.segment_hit(&image2, ue)?;
    if !(wall_separates(first, &image1, &q2)) {
        return None;
    }
    let q1 = first.segment_hit(&image1, &q2)?;
    let legs = [q1 - bs.p, q2 - q1, q2 - ue];
    let lens = legs.map(|l| l.norm());
    if lens.contains(&0.0) {
        return None;
    }
    Some(MultiBouncePath {
        bs_id: bs.id,
        walls: vec![first.id, second.id],
        bounces: vec![q1, q2],
        length: lens.iter().sum(),
        u_d: legs[0] / lens[0],
        u_a: legs[2] / lens[2],
        reflection_loss_db: first.reflection_loss_db + second.reflection_loss_db,
    })
}

fn wall_separates(wall: &Wall, p: &Vector3<f64>, q: &Vector3<f64>) -> bool {
    wall.signed_distance(p) * wall.signed_distance(q) < 0.0
}

/// The world being simulated.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub base_stations: Vec<BaseStation>,
    pub walls: Vec<Wall>,
    pub trajectory: Trajectory,
}

impl Scenario {
    pub fn new(base_stations: Vec<BaseStation>, walls: Vec<Wall>, trajectory: Trajectory) -> Result<Self> {
        let mut ids: Vec<_> = base_stations.iter().map(|b| b.id).collect();
        ids.sort();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::geometry("duplicate base station id"));
        }
        if base_stations.iter().any(|b| !b.p.iter().all(|c| c.is_finite())) {
            return Err(Error::geometry("non-finite base station position"));
        }
        let mut wids: Vec<_> = walls.iter().map(|w| w.id).collect();
        wids.sort();
        if wids.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::geometry("duplicate wall id"));
        }
        Ok(Self { base_stations, walls, trajectory })
    }

    pub fn base_station(&self, id: BsId) -> Option<&BaseStation> {
        self.base_stations.iter().find(|b| b.id == id)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn wall_x50(y0: f64, y1: f64, z0: f64, h: f64) -> Wall {
        Wall::new(1, Vector2::new(50.0, y0), Vector2::new(50.0, y1), z0, h, 6.0).unwrap()
    }

    #[test]
    fn normal_is_left_perpendicular() {
        let w = wall_x50(0.0, 100.0, 0.0, 20.0);
        assert_relative_eq!(w.normal(), Vector3::new(-1.0, 0.0, 0.0));
    }

    #[test]
    fn degenerate_walls_rejected() {
        assert!(Wall::new(1, Vector2::new(1.0, 1.0), Vector2::new(1.0, 1.0), 0.0, 5.0, 6.0).is_err());
        assert!(Wall::new(1, Vector2::new(0.0, 0.0), Vector2::new(1.0, 1.0), 0.0, 0.0, 6.0).is_err());
    }

    #[test]
    fn mirror_examples() {
        let w = wall_x50(0.0, 100.0, 0.0, 20.0);
        assert_relative_eq!(mirror_point(&Vector3::new(0.0, 0.0, 10.0), &w), Vector3::new(100.0, 0.0, 10.0));
        let on = Vector3::new(50.0, 7.0, 3.0);
        assert_eq!(mirror_point(&on, &w), on);
    }

    #[test]
    fn specular_path_reference_geometry() {
        let w = wall_x50(0.0, 100.0, 0.0, 20.0);
        let bs = BaseStation::new(1, Vector3::new(0.0, 0.0, 10.0));
        let ue = Vector3::new(20.0, 30.0, 0.0);
        let path = specular_path(&bs, &ue, &w).expect("path exists");
        // mirror image (100,0,10); segment to ue crosses x=50 at fraction 50/80
        let t = 50.0 / 80.0;
        let q = Vector3::new(100.0 - 80.0 * t, 30.0 * t, 10.0 - 10.0 * t);
        assert_relative_eq!(path.q, q, epsilon = 1e-12);
        assert_relative_eq!(path.q, Vector3::new(50.0, 18.75, 3.75), epsilon = 1e-12);
        assert_relative_eq!(path.length, 7400f64.sqrt(), epsilon = 1e-9);
        assert_relative_eq!(path.d1, 2890.625f64.sqrt(), epsilon = 1e-9);
        assert_relative_eq!(path.d2, (900.0 + 126.5625 + 14.0625f64).sqrt(), epsilon = 1e-9);
        assert_relative_eq!(path.length, 86.023, epsilon = 1e-3);
        assert_relative_eq!(path.d1, 53.764, epsilon = 1e-3);
        assert_relative_eq!(path.d2, 32.259, epsilon = 1e-3);
    }

    #[test]
    fn specular_path_out_of_extent() {
        let w = wall_x50(0.0, 10.0, 0.0, 20.0);
        let bs = BaseStation::new(1, Vector3::new(0.0, 0.0, 10.0));
        assert!(specular_path(&bs, &Vector3::new(20.0, 30.0, 0.0), &w).is_none());
    }

    #[test]
    fn reflection_is_two_sided() {
        // normal faces +x, away from both endpoints
        let w = Wall::new(1, Vector2::new(50.0, 100.0), Vector2::new(50.0, -100.0), 0.0, 20.0, 6.0).unwrap();
        assert!(w.normal().x > 0.0);
        let bs = BaseStation::new(1, Vector3::new(0.0, 0.0, 10.0));
        let ue = Vector3::new(10.0, 0.0, 0.0);
        let path = specular_path(&bs, &ue, &w).expect("crosses the rectangle");
        // segment (100,0,10)->(10,0,0) crosses x=50 at fraction 50/90
        assert_relative_eq!(path.q, Vector3::new(50.0, 0.0, 10.0 - 10.0 * 50.0 / 90.0), epsilon = 1e-12);
    }

    #[test]
    fn opposite_sides_have_no_reflection() {
        let w = wall_x50(-100.0, 100.0, 0.0, 20.0);
        let bs = BaseStation::new(1, Vector3::new(0.0, 0.0, 10.0));
        assert!(specular_path(&bs, &Vector3::new(80.0, 0.0, 0.0), &w).is_none());
    }

    #[test]
    fn los_examples() {
        let bs = BaseStation::new(1, Vector3::new(0.0, 0.0, 10.0));
        let ue = Vector3::new(100.0, 0.0, 0.0);
        assert!(los_visible(&bs, &ue, &[]));
        assert!(!los_visible(&bs, &ue, &[wall_x50(-10.0, 10.0, 0.0, 20.0)]));
        assert!(los_visible(&bs, &ue, &[wall_x50(5.0, 10.0, 0.0, 20.0)]));
    }

    #[test]
    fn endpoint_touching_blocks() {
        let bs = BaseStation::new(1, Vector3::new(0.0, 0.0, 10.0));
        let ue = Vector3::new(50.0, 0.0, 5.0);
        assert!(!los_visible(&bs, &ue, &[wall_x50(-10.0, 10.0, 0.0, 20.0)]));
    }

    #[test]
    fn double_bounce_between_parallel_walls() {
        let w1 = wall_x50(-100.0, 100.0, 0.0, 20.0);
        let w2 = Wall::new(2, Vector2::new(-50.0, -100.0), Vector2::new(-50.0, 100.0), 0.0, 20.0, 6.0).unwrap();
        let bs = BaseStation::new(1, Vector3::new(0.0, 0.0, 10.0));
        let ue = Vector3::new(10.0, 20.0, 0.0);
        let path = double_bounce_path(&bs, &ue, &w1, &w2).expect("two-bounce path");
        // double image (-200,0,10)
        let image2 = Vector3::new(-200.0, 0.0, 10.0);
        assert_relative_eq!(path.length, (image2 - ue).norm(), epsilon = 1e-9);
        assert!(path.length > (bs.p - ue).norm());
        assert_eq!(path.bounce_count(), 2);
        assert_relative_eq!(path.bounces[1].x, -50.0, epsilon = 1e-12);
        assert_relative_eq!(path.bounces[0].x, 50.0, epsilon = 1e-12);

        let short = Wall::new(3, Vector2::new(-50.0, 50.0), Vector2::new(-50.0, 60.0), 0.0, 20.0, 6.0).unwrap();
        assert!(double_bounce_path(&bs, &ue, &w1, &short).is_none());
    }

    #[test]
    fn angles_round_trip() {
        let u = direction(0.9273, -0.1974);
        let (az, el) = azimuth_elevation(&u);
        assert_relative_eq!(az, 0.9273, epsilon = 1e-14);
        assert_relative_eq!(el, -0.1974, epsilon = 1e-14);
        assert_relative_eq!(wrap_angle(3.0 * PI), PI, epsilon = 1e-12);
        assert_relative_eq!(wrap_angle(-PI), PI, epsilon = 1e-12);
    }
}
