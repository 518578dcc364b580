//! Run reports and their CSV renderings.

use nalgebra::Vector3;
use std::fmt::Write;

use super::{error_cdf, errors, max_error_pct, rms, Estimate};
use crate::engine::EpochRecord;
use crate::identify::GateLog;
use crate::scene::Trajectory;
use crate::Result;

/// A named text file produced by an experiment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutputFile {
    pub name: String,
    pub contents: String,
}

impl OutputFile {
    pub fn new(name: impl Into<String>, contents: String) -> Self {
        Self { name: name.into(), contents }
    }
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub run: String,
    pub seed: u64,
    pub with_sbr: bool,
    /// Per-epoch error (estimate − truth) inside the evaluation window.
    pub errors: Vec<(f64, Vector3<f64>)>,
    pub rmse_3d: f64,
    /// None when the window has no traveled distance.
    pub max_error_pct: Option<f64>,
    pub cdf: Vec<(f64, f64)>,
    pub gates: GateLog,
}

impl RunReport {
    /// Report over `[t0, t1]`, or the whole run when `window` is None.
    pub fn new(
        run: impl Into<String>,
        seed: u64,
        with_sbr: bool,
        est: &[Estimate],
        truth: &Trajectory,
        window: Option<(f64, f64)>,
        gates: GateLog,
    ) -> Result<Self> {
        let (t0, t1) = window.unwrap_or_else(|| (est.first().map_or(0.0, |e| e.t), est.last().map_or(0.0, |e| e.t)));
        let inside: Vec<Estimate> = est.iter().copied().filter(|e| e.t >= t0 - 1e-9 && e.t <= t1 + 1e-9).collect();
        let errors = errors(&inside, truth)?;
        let norms: Vec<f64> = errors.iter().map(|(_, e)| e.norm()).collect();
        Ok(Self {
            run: run.into(),
            seed,
            with_sbr,
            rmse_3d: rms(norms.iter().copied()),
            max_error_pct: max_error_pct(&inside, truth, t0, t1).ok(),
            cdf: error_cdf(&norms),
            errors,
            gates,
        })
    }

    pub fn error_norms(&self) -> Vec<f64> {
        self.errors.iter().map(|(_, e)| e.norm()).collect()
    }

    pub fn median_error(&self) -> f64 {
        super::median(&mut self.error_norms())
    }

    pub fn terminal_error(&self) -> f64 {
        self.errors.last().map_or(f64::NAN, |(_, e)| e.norm())
    }
}

/// Fixed-precision float for CSV cells.
pub fn f(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.6}")
    } else {
        String::new()
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(f).unwrap_or_default()
}

pub fn errors_csv(r: &RunReport) -> String {
    let mut s = String::from("t_s,ex_m,ey_m,ez_m,e3d_m\n");
    for (t, e) in &r.errors {
        let _ = writeln!(s, "{},{},{},{},{}", f(*t), f(e.x), f(e.y), f(e.z), f(e.norm()));
    }
    s
}

pub fn cdf_csv(cdf: &[(f64, f64)]) -> String {
    let mut s = String::from("error_m,probability\n");
    for (x, p) in cdf {
        let _ = writeln!(s, "{},{}", f(*x), f(*p));
    }
    s
}

pub fn states_csv(records: &[EpochRecord]) -> String {
    let mut s = String::from(
        "t_s,px_m,py_m,pz_m,vx_mps,vy_mps,vz_mps,roll_rad,pitch_rad,yaw_rad,sigma_px_m,sigma_py_m,sigma_pz_m,los_updates,sbr_updates\n",
    );
    for r in records {
        let cells: Vec<String> = [r.t, r.p.x, r.p.y, r.p.z, r.v.x, r.v.y, r.v.z, r.euler.x, r.euler.y, r.euler.z]
            .into_iter()
            .chain(r.sigma_p.iter().copied())
            .map(f)
            .collect();
        let _ = writeln!(s, "{},{},{}", cells.join(","), r.los_updates, r.sbr_updates);
    }
    s
}

pub const GATE_HEADER: &str =
    "los_admitted,los_rejected,oori_admitted,oori_rejected,motion_admitted,motion_rejected,nis_admitted,nis_rejected";

pub fn gate_cells(g: &GateLog) -> String {
    format!(
        "{},{},{},{},{},{},{},{}",
        g.los_admitted,
        g.los_rejected,
        g.oori_admitted,
        g.oori_rejected,
        g.motion_admitted,
        g.motion_rejected,
        g.nis_admitted,
        g.nis_rejected
    )
}

/// One row per report: error statistics and gate counts.
pub fn runs_csv(reports: &[RunReport]) -> String {
    let mut s =
        format!("run,seed,with_sbr,epochs,rmse_3d_m,max_error_pct,median_error_m,terminal_error_m,{GATE_HEADER}\n");
    for r in reports {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{}",
            r.run,
            r.seed,
            r.with_sbr,
            r.errors.len(),
            f(r.rmse_3d),
            opt(r.max_error_pct),
            f(r.median_error()),
            f(r.terminal_error()),
            gate_cells(&r.gates)
        );
    }
    s
}
