//! Position solvers: LoS fix from range and departure angles, and the joint
//! multipath fix from two or more single-bounce paths.
//!
//! Under the single-bounce hypothesis a path with departure direction `u_d`,
//! arrival direction `u_a` (UE toward the reflector) and length `L` places
//! the UE on the segment
//!
//! ```text
//! p(d1) = bs + d1 u_d - (L - d1) u_a,   0 <= d1 <= L
//! ```
//!
//! so each path contributes `p - d1 (u_d + u_a) = bs - L u_a`. With K paths
//! that is 3K equations in the 3 + K unknowns `(p, d1_1..d1_K)`.

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scene::{direction, BaseStation};
use crate::synth::{LosObs, SbrObs};
use crate::SPEED_OF_LIGHT;

/// Condition number above which the multipath system is treated as rank
/// deficient.
pub const MAX_CONDITION: f64 = 1e8;

/// Smallest mean crossing angle of the multipath solution lines, deg.
/// Lines off parallel walls leave position along the walls unobservable.
pub const MIN_CROSSING_DEG: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FixKind {
    Los,
    Sbr,
}

impl FixKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FixKind::Los => "los",
            FixKind::Sbr => "sbr",
        }
    }
}

/// A position fix handed to the filter.
#[derive(Debug, Clone, PartialEq)]
pub struct Fix {
    pub t: f64,
    pub p: Vector3<f64>,
    /// m^2, symmetric PSD.
    pub cov: Matrix3<f64>,
    /// RMS equation misfit, m.
    pub residual: f64,
    pub source: FixKind,
    pub n_paths: usize,
}

/// Measurement variances the solvers propagate into fix covariances.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FixNoise {
    /// One-way range variance, m^2.
    pub var_range: f64,
    /// Per-angle variance, rad^2.
    pub var_angle: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error("non-positive range {0} m")]
    NonPositiveRange(f64),
    #[error("need at least {need} paths, got {got}")]
    TooFewPaths { need: usize, got: usize },
    #[error("rank deficient geometry (condition {0:.3e})")]
    RankDeficient(f64),
    #[error("path {index}: reflector distance {d1} m outside [0, {length}]")]
    OutOfRange { index: usize, d1: f64, length: f64 },
    #[error("degenerate vertical geometry")]
    Degenerate,
    #[error("solution lines nearly parallel (spread {0:.3e})")]
    Collinear(f64),
}

pub type SolveResult<T> = std::result::Result<T, SolveError>;

/// LoS fix: `p = bs + (c rtt / 2) u(aod)`, with the covariance of the
/// polar-to-Cartesian map to first order.
pub fn los_fix(bs: &BaseStation, obs: &LosObs, noise: &FixNoise) -> SolveResult<Fix> {
    let d = 0.5 * SPEED_OF_LIGHT * obs.rtt;
    if !(d > 0.0) {
        return Err(SolveError::NonPositiveRange(d));
    }
    let (az, el) = (obs.aod_az, obs.aod_el);
    let u = direction(az, el);
    let (sa, ca) = az.sin_cos();
    let (se, ce) = el.sin_cos();
    let du_daz = Vector3::new(-ce * sa, ce * ca, 0.0);
    let du_del = Vector3::new(-se * ca, -se * sa, ce);
    let cov = u * u.transpose() * noise.var_range
        + (du_daz * du_daz.transpose() + du_del * du_del.transpose()) * (d * d * noise.var_angle);
    Ok(Fix { t: obs.t, p: bs.p + u * d, cov: symmetrize(&cov), residual: 0.0, source: FixKind::Los, n_paths: 1 })
}

/// One reflected path reduced to what the multipath solver needs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathMeasurement {
    pub t: f64,
    pub bs: Vector3<f64>,
    /// Total path length, m.
    pub length: f64,
    /// Unit departure direction at the BS.
    pub u_d: Vector3<f64>,
    /// Unit arrival direction, from the UE toward the last reflector.
    pub u_a: Vector3<f64>,
}

impl PathMeasurement {
    pub fn new(bs: &BaseStation, obs: &SbrObs) -> Self {
        Self { t: obs.t, bs: bs.p, length: obs.path_length(), u_d: obs.departure(), u_a: obs.arrival() }
    }

    /// Direction of the solution segment, `u_d + u_a`.
    pub fn slope(&self) -> Vector3<f64> {
        self.u_d + self.u_a
    }

    /// Solution-segment origin, `bs - L u_a`.
    pub fn origin(&self) -> Vector3<f64> {
        self.bs - self.u_a * self.length
    }

    /// Distance from `p` to this path's single-bounce solution segment.
    pub fn residual_at(&self, p: &Vector3<f64>) -> f64 {
        let s = self.slope();
        let r = p - self.origin();
        let ss = s.norm_squared();
        let d1 = if ss > 0.0 { (r.dot(&s) / ss).clamp(0.0, self.length) } else { 0.0 };
        (r - s * d1).norm()
    }

    /// Position-space covariance of this path's equation error at `d1`.
    fn equation_cov(&self, d1: f64, noise: &FixNoise) -> Matrix3<f64> {
        let i = Matrix3::identity();
        let aa = self.u_a * self.u_a.transpose();
        let dd = self.u_d * self.u_d.transpose();
        let d2 = (self.length - d1).max(0.0);
        aa * noise.var_range + (i - aa) * (d2 * d2 * noise.var_angle) + (i - dd) * (d1 * d1 * noise.var_angle)
    }
}

/// Full least-squares solution of the multipath system.
#[derive(Debug, Clone, PartialEq)]
pub struct SbrSolution {
    pub p: Vector3<f64>,
    /// Reflector distance per path, m.
    pub d1: Vec<f64>,
    /// RMS equation misfit, m.
    pub residual: f64,
    pub condition: f64,
    /// Distance of each path's solution segment from `p`, m.
    pub path_residuals: Vec<f64>,
    /// Equation misfit of each path normalized by its error covariance
    /// (3 degrees of freedom); 0 where that covariance is singular.
    pub path_nis: Vec<f64>,
    pub cov: Matrix3<f64>,
}

fn system(paths: &[PathMeasurement]) -> (DMatrix<f64>, DVector<f64>) {
    let k = paths.len();
    let mut a = DMatrix::zeros(3 * k, 3 + k);
    let mut b = DVector::zeros(3 * k);
    for (i, m) in paths.iter().enumerate() {
        let s = m.slope();
        let r = m.origin();
        for row in 0..3 {
            a[(3 * i + row, row)] = 1.0;
            a[(3 * i + row, 3 + i)] = -s[row];
            b[3 * i + row] = r[row];
        }
    }
    (a, b)
}

/// RMS misfit of the stacked equations at `(p, d1)`.
pub fn equation_residual(paths: &[PathMeasurement], p: &Vector3<f64>, d1: &[f64]) -> f64 {
    let (a, b) = system(paths);
    let mut x = DVector::zeros(3 + paths.len());
    x.rows_mut(0, 3).copy_from(p);
    for (i, d) in d1.iter().enumerate() {
        x[3 + i] = *d;
    }
    rms(&(a * x - b))
}

fn rms(v: &DVector<f64>) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        (v.norm_squared() / v.len() as f64).sqrt()
    }
}

/// Least-squares multipath solve through the SVD.
pub fn sbr_solve(paths: &[PathMeasurement], noise: &FixNoise) -> SolveResult<SbrSolution> {
    solve(paths, noise, None)
}

/// Multipath solve with each path's equations weighted by the inverse of
/// their error covariance, evaluated at the unweighted solution. Falls
/// back to the unweighted solution when a covariance is singular.
pub fn sbr_solve_weighted(paths: &[PathMeasurement], noise: &FixNoise) -> SolveResult<SbrSolution> {
    let first = solve(paths, noise, None)?;
    let whiteners: Option<Vec<Matrix3<f64>>> = paths
        .iter()
        .zip(&first.d1)
        .map(|(m, &d1)| m.equation_cov(d1, noise).cholesky().and_then(|c| c.l().try_inverse()))
        .collect();
    match whiteners {
        Some(w) => solve(paths, noise, Some(&w)),
        None => Ok(first),
    }
}

fn solve(paths: &[PathMeasurement], noise: &FixNoise, whiteners: Option<&[Matrix3<f64>]>) -> SolveResult<SbrSolution> {
    if paths.len() < 2 {
        return Err(SolveError::TooFewPaths { need: 2, got: paths.len() });
    }
    if let Some(m) = paths.iter().find(|m| !(m.length > 0.0)) {
        return Err(SolveError::NonPositiveRange(m.length));
    }
    let (a, b) = system(paths);
    let svd = a.clone().svd(false, false);
    let sv = &svd.singular_values;
    let (smax, smin) = (sv.max(), sv.min());
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if !(condition <= MAX_CONDITION) {
        return Err(SolveError::RankDeficient(condition));
    }
    let spread = line_spread(paths);
    if spread < (0.5 * MIN_CROSSING_DEG.to_radians()).sin().powi(2) {
        return Err(SolveError::Collinear(spread));
    }
    // g maps the right-hand side to the unknowns
    let g = match whiteners {
        None => a.clone().svd(true, true).pseudo_inverse(0.0),
        Some(w) => {
            let mut wm = DMatrix::zeros(3 * paths.len(), 3 * paths.len());
            for (i, wi) in w.iter().enumerate() {
                wm.view_mut((3 * i, 3 * i), (3, 3)).copy_from(wi);
            }
            (&wm * &a).svd(true, true).pseudo_inverse(0.0).map(|p| p * wm)
        }
    }
    .map_err(|_| SolveError::RankDeficient(condition))?;
    let x = &g * &b;
    let p = Vector3::new(x[0], x[1], x[2]);
    let d1: Vec<f64> = x.iter().skip(3).copied().collect();
    for (index, (d, m)) in d1.iter().zip(paths).enumerate() {
        if !(*d >= 0.0 && *d <= m.length) {
            return Err(SolveError::OutOfRange { index, d1: *d, length: m.length });
        }
    }
    let residual = rms(&(&a * &x - &b));
    let path_residuals = paths.iter().map(|m| m.residual_at(&p)).collect();
    let path_nis = paths
        .iter()
        .zip(&d1)
        .map(|(m, &d)| {
            let e = p - m.slope() * d - m.origin();
            m.equation_cov(d, noise).try_inverse().map_or(0.0, |inv| (e.transpose() * inv * e)[0].max(0.0))
        })
        .collect();

    // x = G b, and each path's equation error is independent
    let g_p = g.rows(0, 3);
    let mut cov = Matrix3::zeros();
    for (i, m) in paths.iter().enumerate() {
        let gi = g_p.columns(3 * i, 3).into_owned();
        let gi = Matrix3::from_iterator(gi.iter().copied());
        cov += gi * m.equation_cov(d1[i], noise) * gi.transpose();
    }
    Ok(SbrSolution { p, d1, residual, condition, path_residuals, path_nis, cov: symmetrize(&cov) })
}

/// Smallest eigenvalue of the mean projector orthogonal to the solution
/// lines: sin^2(phi / 2) for two lines crossing at phi, 0 when parallel.
pub fn line_spread(paths: &[PathMeasurement]) -> f64 {
    let mut m = Matrix3::zeros();
    for p in paths {
        let s = p.slope();
        let n = s.norm();
        m += if n > 0.0 {
            let u = s / n;
            Matrix3::identity() - u * u.transpose()
        } else {
            Matrix3::identity()
        };
    }
    (m / paths.len() as f64).symmetric_eigenvalues().min()
}

/// Joint multipath fix from K >= 2 paths of one epoch.
pub fn sbr_fix(paths: &[PathMeasurement], noise: &FixNoise) -> SolveResult<Fix> {
    let sol = sbr_solve(paths, noise)?;
    Ok(Fix {
        t: paths[0].t,
        p: sol.p,
        cov: sol.cov,
        residual: sol.residual,
        source: FixKind::Sbr,
        n_paths: paths.len(),
    })
}

/// Single-path fix with the UE height known: the vertical equation fixes
/// `d1`. Off vertical walls `u_d,z + u_a,z = 0`, so this usually declines.
pub fn sbr_fix_single(path: &PathMeasurement, known_height: f64, eps_cond: f64, noise: &FixNoise) -> SolveResult<Fix> {
    let s = path.slope();
    if !(s.z.abs() > eps_cond) {
        return Err(SolveError::Degenerate);
    }
    let r = path.origin();
    let d1 = (known_height - r.z) / s.z;
    if !(d1 >= 0.0 && d1 <= path.length) {
        return Err(SolveError::OutOfRange { index: 0, d1, length: path.length });
    }
    let mut cov = path.equation_cov(d1, noise);
    // height is given, not estimated
    for i in 0..3 {
        cov[(2, i)] = 0.0;
        cov[(i, 2)] = 0.0;
    }
    Ok(Fix { t: path.t, p: r + s * d1, cov, residual: 0.0, source: FixKind::Sbr, n_paths: 1 })
}

/// Velocity by differencing two consecutive fixes.
pub fn los_velocity(prev: &Fix, cur: &Fix) -> Option<Vector3<f64>> {
    let dt = cur.t - prev.t;
    (dt > 0.0).then(|| (cur.p - prev.p) / dt)
}

fn symmetrize(m: &Matrix3<f64>) -> Matrix3<f64> {
    (m + m.transpose()) * 0.5
}
