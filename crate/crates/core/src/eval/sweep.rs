//! Outage and noise sweeps over seed ensembles.

use rayon::prelude::*;
use std::fmt::Write;

use super::median;
use super::pipeline::{realize, run_arm, Arm, Realization};
use super::report::{f, RunReport};
use crate::config::{NoiseDomain, OutageSpec, World};
use crate::engine::EngineConfig;
use crate::synth::{NoiseCfg, ObsEpoch, OutageWindow};
use crate::Result;

/// Realizations for every seed, in seed order.
pub fn realize_all(world: &World, seeds: &[u64]) -> Result<Vec<Realization>> {
    seeds.par_iter().map(|&s| realize(world, s)).collect()
}

/// Geometry of an outage window along the truth trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutageGeometry {
    pub id: u32,
    pub duration_s: f64,
    pub distance_m: f64,
    pub avg_speed_mps: f64,
    pub heading_change_deg: f64,
}

pub fn outage_geometry(world: &World, o: &OutageSpec) -> OutageGeometry {
    let traj = &world.scenario.trajectory;
    let (t0, t1) = (o.start_s, o.start_s + o.duration_s);
    let distance_m = traj.arc_length(t0, t1);
    OutageGeometry {
        id: o.id,
        duration_s: o.duration_s,
        distance_m,
        avg_speed_mps: distance_m / o.duration_s,
        heading_change_deg: traj.heading_change(t0, t1).to_degrees(),
    }
}

/// One arm of an outage sweep: a report per (outage, seed). Each run starts
/// `lead_in` seconds before its outage, ends at the outage end and is
/// evaluated inside the outage window. Ordered by outage then seed.
pub fn run_outage_sweep(
    world: &World,
    clean: &[ObsEpoch],
    realizations: &[Realization],
    engine: &EngineConfig,
    outages: &[OutageSpec],
    lead_in: f64,
    with_sbr: bool,
) -> Result<Vec<RunReport>> {
    let engine = if with_sbr { engine.clone() } else { engine.without_sbr() };
    let t0 = world.scenario.trajectory.start_time();
    let windows = outages.iter().map(|o| o.window()).collect::<Result<Vec<OutageWindow>>>()?;
    let jobs: Vec<(usize, usize)> =
        (0..outages.len()).flat_map(|i| (0..realizations.len()).map(move |k| (i, k))).collect();
    jobs.par_iter()
        .map(|&(i, k)| {
            let w = windows[i];
            let real = &realizations[k];
            let arm = Arm {
                engine: &engine,
                noise: world.noise,
                outages: std::slice::from_ref(&w),
                t_start: (w.t_start - lead_in).max(t0),
                t_end: w.t_end,
            };
            let run = run_arm(world, clean, real, &arm)?;
            RunReport::new(
                format!("outage{}_{}_seed{}", outages[i].id, arm_name(with_sbr), real.seed),
                real.seed,
                with_sbr,
                &run.estimates,
                &world.scenario.trajectory,
                Some((w.t_start, w.t_end)),
                run.trace.gates,
            )
        })
        .collect()
}

pub fn arm_name(with_sbr: bool) -> &'static str {
    if with_sbr {
        "with_sbr"
    } else {
        "without_sbr"
    }
}

/// Per-outage row of the summary table: medians over seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct OutageRow {
    pub geometry: OutageGeometry,
    pub rms_without: f64,
    pub pct_without: f64,
    pub rms_with: f64,
    pub pct_with: f64,
}

/// Pair the two arms (same ordering as [`run_outage_sweep`]) into rows.
pub fn outage_table(
    world: &World,
    outages: &[OutageSpec],
    without: &[RunReport],
    with: &[RunReport],
) -> Vec<OutageRow> {
    let n = without.len() / outages.len().max(1);
    outages
        .iter()
        .enumerate()
        .map(|(i, o)| {
            let slice = |r: &[RunReport]| r[i * n..(i + 1) * n].to_vec();
            let (a, b) = (slice(without), slice(with));
            let med = |rs: &[RunReport], g: fn(&RunReport) -> f64| median(&mut rs.iter().map(g).collect::<Vec<_>>());
            OutageRow {
                geometry: outage_geometry(world, o),
                rms_without: med(&a, |r| r.rmse_3d),
                pct_without: med(&a, |r| r.max_error_pct.unwrap_or(f64::NAN)),
                rms_with: med(&b, |r| r.rmse_3d),
                pct_with: med(&b, |r| r.max_error_pct.unwrap_or(f64::NAN)),
            }
        })
        .collect()
}

pub fn outage_summary_csv(rows: &[OutageRow]) -> String {
    let mut s = String::from(
        "outage_id,duration_s,distance_m,avg_speed_mps,heading_change_deg,rms_without_m,pct_without,rms_with_m,pct_with\n",
    );
    for r in rows {
        let g = &r.geometry;
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{}",
            g.id,
            f(g.duration_s),
            f(g.distance_m),
            f(g.avg_speed_mps),
            f(g.heading_change_deg),
            f(r.rms_without),
            f(r.pct_without),
            f(r.rms_with),
            f(r.pct_with)
        );
    }
    s
}

/// Observation noise with one domain's variance replaced.
pub fn noise_with(base: &NoiseCfg, domain: NoiseDomain, variance: f64) -> NoiseCfg {
    match domain {
        NoiseDomain::Range => NoiseCfg { var_range: variance, ..*base },
        NoiseDomain::Angle => NoiseCfg { var_angle: variance, ..*base },
    }
}

/// One arm of a noise sweep over the whole trajectory: reports ordered by
/// variance then seed. Observation noise uses common random numbers
/// across variances and arms.
pub fn run_noise_sweep(
    world: &World,
    clean: &[ObsEpoch],
    realizations: &[Realization],
    engine: &EngineConfig,
    domain: NoiseDomain,
    variances: &[f64],
    with_sbr: bool,
) -> Result<Vec<RunReport>> {
    let engine = if with_sbr { engine.clone() } else { engine.without_sbr() };
    let jobs: Vec<(usize, usize)> =
        (0..variances.len()).flat_map(|i| (0..realizations.len()).map(move |k| (i, k))).collect();
    let t_end = world.scenario.trajectory.end_time();
    jobs.par_iter()
        .map(|&(i, k)| {
            let real = &realizations[k];
            let noise = noise_with(&world.noise, domain, variances[i]);
            noise.validate()?;
            let arm = Arm {
                engine: &engine,
                noise,
                outages: &world.outages,
                t_start: world.scenario.trajectory.start_time(),
                t_end,
            };
            let run = run_arm(world, clean, real, &arm)?;
            RunReport::new(
                format!("{}{}_{}_seed{}", domain.as_str(), variances[i], arm_name(with_sbr), real.seed),
                real.seed,
                with_sbr,
                &run.estimates,
                &world.scenario.trajectory,
                None,
                run.trace.gates,
            )
        })
        .collect()
}

/// Per-variance medians of the per-run median errors, and pooled CDFs.
pub fn noise_summary_csv(domain: NoiseDomain, variances: &[f64], without: &[RunReport], with: &[RunReport]) -> String {
    let n = without.len() / variances.len().max(1);
    let unit = match domain {
        NoiseDomain::Range => "m2",
        NoiseDomain::Angle => "deg2",
    };
    let mut s = format!("domain,variance_{unit},median_without_m,median_with_m,rmse_without_m,rmse_with_m\n");
    for (i, v) in variances.iter().enumerate() {
        let med = |rs: &[RunReport], g: fn(&RunReport) -> f64| {
            median(&mut rs[i * n..(i + 1) * n].iter().map(g).collect::<Vec<_>>())
        };
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            domain.as_str(),
            v,
            f(med(without, RunReport::median_error)),
            f(med(with, RunReport::median_error)),
            f(med(without, |r| r.rmse_3d)),
            f(med(with, |r| r.rmse_3d))
        );
    }
    s
}

/// Errors of all runs of one variance, pooled.
pub fn pooled_errors(reports: &[RunReport], variance_index: usize, n_seeds: usize) -> Vec<f64> {
    reports[variance_index * n_seeds..(variance_index + 1) * n_seeds].iter().flat_map(|r| r.error_norms()).collect()
}
