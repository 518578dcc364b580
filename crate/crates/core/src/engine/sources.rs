//! Fix sources: each turns one epoch's admitted observations into position
//! fixes. Sources are registered by name and picked at run time.

use nalgebra::Vector3;
use std::collections::BTreeMap;

use crate::fixes::{los_fix, sbr_fix_single, sbr_solve_weighted, Fix, FixKind, FixNoise, PathMeasurement, SbrSolution};
use crate::fusion::NIS_GATE_3DOF;
use crate::identify::{classify_los, elevation_mismatch, oori_check, GateConfig, GateLog};
use crate::scene::{BaseStation, BsId};
use crate::synth::{ObsEpoch, PathLossModel, SbrObs};
use crate::{Error, Result};

/// Everything a source may look at for one epoch.
pub struct EpochContext<'a> {
    pub epoch: &'a ObsEpoch,
    pub stations: &'a [BaseStation],
    pub plm: &'a PathLossModel,
    pub gates: &'a GateConfig,
    pub noise: FixNoise,
    /// Filter prediction for this epoch.
    pub predicted: Vector3<f64>,
    /// Root of the trace of the predicted position covariance, m.
    pub predicted_sigma: f64,
    /// UE antenna height for single-path fixes, m.
    pub known_height: f64,
    /// Smallest |u_d,z + u_a,z| a single-path fix accepts.
    pub eps_cond: f64,
}

impl EpochContext<'_> {
    pub fn station(&self, id: BsId) -> Option<&BaseStation> {
        self.stations.iter().find(|b| b.id == id)
    }
}

pub trait FixSource: Send + Sync {
    fn name(&self) -> &'static str;
    fn fixes(&self, ctx: &EpochContext<'_>, log: &mut GateLog) -> Vec<Fix>;
}

type Factory = fn() -> Box<dyn FixSource>;

/// Name -> constructor table of the available sources.
pub struct Registry {
    factories: BTreeMap<&'static str, Factory>,
}

impl Registry {
    pub fn empty() -> Self {
        Self { factories: BTreeMap::new() }
    }

    pub fn builtin() -> Self {
        let mut r = Self::empty();
        r.register("los", || Box::new(LosSource));
        r.register("sbr-joint", || Box::new(SbrJointSource));
        r.register("sbr-single", || Box::new(SbrSingleSource));
        r
    }

    pub fn register(&mut self, name: &'static str, factory: Factory) {
        self.factories.insert(name, factory);
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.factories.keys().copied().collect()
    }

    pub fn create(&self, name: &str) -> Result<Box<dyn FixSource>> {
        self.factories
            .get(name)
            .map(|f| f())
            .ok_or_else(|| Error::config(format!("unknown fix source '{name}' (known: {})", self.names().join(", "))))
    }
}

/// Range-and-departure fixes from records passing the LoS consistency gate.
pub struct LosSource;

impl FixSource for LosSource {
    fn name(&self) -> &'static str {
        "los"
    }

    fn fixes(&self, ctx: &EpochContext<'_>, log: &mut GateLog) -> Vec<Fix> {
        let mut out = Vec::new();
        for obs in &ctx.epoch.los {
            let Some(bs) = ctx.station(obs.bs_id) else { continue };
            let admitted = classify_los(obs, ctx.plm, ctx.gates);
            GateLog::count(admitted, &mut log.los_admitted, &mut log.los_rejected);
            if admitted {
                if let Ok(fix) = los_fix(bs, obs, &ctx.noise) {
                    out.push(fix);
                }
            }
        }
        out
    }
}

/// One joint multipath fix per epoch from the largest mutually consistent
/// set of single-bounce candidates.
pub struct SbrJointSource;

impl FixSource for SbrJointSource {
    fn name(&self) -> &'static str {
        "sbr-joint"
    }

    fn fixes(&self, ctx: &EpochContext<'_>, log: &mut GateLog) -> Vec<Fix> {
        let cands = elevation_candidates(ctx, log);
        let obs: Vec<&SbrObs> = cands.iter().map(|c| c.1).collect();
        let paths: Vec<PathMeasurement> = cands.iter().map(|c| c.0).collect();
        match consensus(&paths, &obs, ctx) {
            Some((sol, inliers)) => {
                let admitted = inliers.len();
                log.oori_admitted += admitted as u64;
                log.oori_rejected += (paths.len() - admitted) as u64;
                vec![Fix {
                    t: ctx.epoch.t,
                    p: sol.p,
                    cov: sol.cov,
                    residual: sol.residual,
                    source: FixKind::Sbr,
                    n_paths: admitted,
                }]
            }
            None => {
                log.oori_rejected += paths.len() as u64;
                Vec::new()
            }
        }
    }
}

/// Single-path fixes with known UE height. Declines off vertical walls.
pub struct SbrSingleSource;

impl FixSource for SbrSingleSource {
    fn name(&self) -> &'static str {
        "sbr-single"
    }

    fn fixes(&self, ctx: &EpochContext<'_>, log: &mut GateLog) -> Vec<Fix> {
        elevation_candidates(ctx, log)
            .iter()
            .filter_map(|(m, _)| sbr_fix_single(m, ctx.known_height, ctx.eps_cond, &ctx.noise).ok())
            .collect()
    }
}

fn elevation_candidates<'a>(ctx: &EpochContext<'a>, log: &mut GateLog) -> Vec<(PathMeasurement, &'a SbrObs)> {
    let mut out = Vec::new();
    for obs in &ctx.epoch.sbr {
        let Some(bs) = ctx.station(obs.bs_id) else { continue };
        if elevation_mismatch(obs) <= ctx.gates.elevation_consistency_eps_rad {
            out.push((PathMeasurement::new(bs, obs), obs));
        } else {
            log.oori_rejected += 1;
        }
    }
    out
}

/// Pick the inlier set, then solve and drop the worst member failing the
/// single-bounce check until all members pass. Returns the solution and
/// the indices of the admitted paths.
///
/// Besides the single-bounce check, each member's misfit must be
/// consistent with its own error covariance. A pair is additionally
/// checked against the prediction, with the threshold widened by the
/// prediction's uncertainty.
pub fn consensus(
    paths: &[PathMeasurement],
    obs: &[&SbrObs],
    ctx: &EpochContext<'_>,
) -> Option<(SbrSolution, Vec<usize>)> {
    let thr = ctx.gates.residual_threshold_m;
    let prior_thr = thr + 3.0 * ctx.predicted_sigma;
    let mut inliers = select_inliers(paths, ctx, thr, prior_thr)?;
    loop {
        let subset: Vec<PathMeasurement> = inliers.iter().map(|&i| paths[i]).collect();
        let sol = sbr_solve_weighted(&subset, &ctx.noise).ok()?;
        let worst = inliers
            .iter()
            .enumerate()
            .filter(|&(j, &i)| {
                let prior_ok = subset.len() > 2 || paths[i].residual_at(&ctx.predicted) <= prior_thr;
                let consistent = sol.path_nis[j] <= NIS_GATE_3DOF;
                !(prior_ok && consistent && oori_check(obs[i], sol.path_residuals[j], ctx.gates))
            })
            .max_by(|a, b| sol.path_nis[a.0].total_cmp(&sol.path_nis[b.0]))
            .map(|(j, _)| j);
        match worst {
            None => return Some((sol, inliers)),
            Some(_) if inliers.len() <= 2 => return None,
            Some(j) => {
                inliers.remove(j);
            }
        }
    }
}

/// Candidate indices consistent with one hypothesis position. The
/// prediction is tried first; pairwise solutions are the fallback.
fn select_inliers(paths: &[PathMeasurement], ctx: &EpochContext<'_>, thr: f64, prior_thr: f64) -> Option<Vec<usize>> {
    if paths.len() < 2 {
        return None;
    }
    let near = |p: &Vector3<f64>, tol: f64| -> Vec<usize> {
        (0..paths.len()).filter(|&k| paths[k].residual_at(p) <= tol).collect()
    };
    if prior_thr <= 2.0 * thr {
        let set = near(&ctx.predicted, prior_thr);
        if set.len() >= 2 {
            return Some(set);
        }
    }
    let mut best: Option<(usize, f64, Vec<usize>)> = None;
    for i in 0..paths.len() {
        for j in i + 1..paths.len() {
            let Ok(sol) = sbr_solve_weighted(&[paths[i], paths[j]], &ctx.noise) else { continue };
            if (sol.p - ctx.predicted).norm() > prior_thr + ctx.gates.motion_margin_m {
                continue;
            }
            let set = near(&sol.p, thr);
            if !(set.contains(&i) && set.contains(&j)) {
                continue;
            }
            let spread: f64 = set.iter().map(|&k| paths[k].residual_at(&sol.p)).sum();
            let better = match &best {
                None => true,
                Some((n, s, _)) => set.len() > *n || (set.len() == *n && spread < *s),
            };
            if better {
                best = Some((set.len(), spread, set));
            }
        }
    }
    best.map(|b| b.2)
}
