use nalgebra::Vector3;

use crate::scene::Trajectory;
use crate::{Error, Result};

/// Time-alignment tolerance between estimate and truth samples, s.
pub const ALIGN_TOL: f64 = 1e-3;

/// One estimated position at time `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub t: f64,
    pub p: Vector3<f64>,
}

/// Per-sample error of an estimate against the nearest truth sample.
pub fn errors(est: &[Estimate], truth: &Trajectory) -> Result<Vec<(f64, Vector3<f64>)>> {
    est.iter()
        .map(|e| {
            let pose = truth.nearest(e.t);
            if (pose.t - e.t).abs() > ALIGN_TOL {
                return Err(Error::config(format!("no truth sample within {ALIGN_TOL} s of t={}", e.t)));
            }
            Ok((e.t, e.p - pose.p))
        })
        .collect()
}

/// Root mean square 3D error.
pub fn rmse_3d(est: &[Estimate], truth: &Trajectory) -> Result<f64> {
    let e = errors(est, truth)?;
    Ok(rms(e.iter().map(|(_, d)| d.norm())))
}

/// RMS of a sequence of magnitudes; 0 for an empty one.
pub fn rms(values: impl IntoIterator<Item = f64>) -> f64 {
    let (sum, n) = values.into_iter().fold((0.0, 0usize), |(s, n), v| (s + v * v, n + 1));
    if n == 0 {
        0.0
    } else {
        (sum / n as f64).sqrt()
    }
}

/// Largest 3D error inside `[t0, t1]` as a percentage of the truth arc
/// length over the same window.
pub fn max_error_pct(est: &[Estimate], truth: &Trajectory, t0: f64, t1: f64) -> Result<f64> {
    let dist = truth.arc_length(t0, t1);
    if !(dist > 0.0) {
        return Err(Error::config(format!("no distance travelled in [{t0}, {t1}]")));
    }
    let inside: Vec<Estimate> = est.iter().filter(|e| e.t >= t0 && e.t <= t1).copied().collect();
    let max = errors(&inside, truth)?.iter().map(|(_, d)| d.norm()).fold(0.0, f64::max);
    Ok(100.0 * max / dist)
}

/// Empirical CDF: one `(error, P[E <= error])` point per distinct value.
pub fn error_cdf(values: &[f64]) -> Vec<(f64, f64)> {
    let mut v: Vec<f64> = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (i, x) in v.iter().enumerate() {
        let p = (i + 1) as f64 / n;
        match out.last_mut() {
            Some(last) if last.0 == *x => last.1 = p,
            _ => out.push((*x, p)),
        }
    }
    out
}

/// Median (mean of the two middle values for even counts). Reorders
/// `values`; NaN for an empty slice.
pub fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}
