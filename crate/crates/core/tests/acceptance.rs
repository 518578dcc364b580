//! Acceptance suite. Runs without the libtest harness and prints one
//! PASS/FAIL line per criterion; exits non-zero if any criterion fails.
//!
//! ```text
//! cargo test -p sbrnav --test acceptance            # all
//! cargo test -p sbrnav --test acceptance -- 3 6     # a subset
//! ```

use std::path::PathBuf;
use std::time::Instant;

use nalgebra::{Matrix3, Vector2, Vector3};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use sbrnav::config::{RunConfig, ScenarioFile, World};
use sbrnav::engine::EngineConfig;
use sbrnav::eval::pipeline::build_estimator;
use sbrnav::eval::sweep::{realize_all, run_noise_sweep, run_outage_sweep};
use sbrnav::eval::{clean_epochs, median, realize, run_arm_with, Arm, RunReport};
use sbrnav::experiment;
use sbrnav::fixes::{los_fix, sbr_fix, sbr_solve_weighted, Fix, FixKind, FixNoise, PathMeasurement};
use sbrnav::fusion::{min_eigenvalue, nees, update_position, UpdateOutcome, STATE_DIM};
use sbrnav::identify::{oori_check, GateConfig};
use sbrnav::ins::{drift_ensemble_median, mechanize, NavState};
use sbrnav::rng::{self, Domain};
use sbrnav::scene::{double_bounce_path, mirror_point, specular_path, BaseStation, Pose, Wall};
use sbrnav::synth::{
    apply_noise, synth_imu, synth_los, synth_reflected, synth_sbr, ImuErrors, NoiseCfg, PathLossModel, SbrObs,
};

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self { pass, detail: detail.into() }
    }
}

type Check = fn() -> Outcome;

fn main() {
    let checks: [(u8, &str, f64, Check); 8] = [
        (1, "geometry oracle", 5.0, geometry_oracle),
        (2, "solver exactness", 10.0, solver_exactness),
        (3, "single-bounce identification", 60.0, oori_accuracy),
        (4, "outage trends", 300.0, outage_trends),
        (5, "noise-sweep trends", 300.0, noise_trends),
        (6, "filter health", 300.0, filter_health),
        (7, "INS round trip and drift", 60.0, ins_round_trip),
        (8, "determinism", 300.0, determinism),
    ];
    let only: Vec<u8> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (id, name, budget_s, check) in checks {
        if !only.is_empty() && !only.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let out = check();
        let secs = start.elapsed().as_secs_f64();
        let pass = out.pass && secs < budget_s;
        if !pass {
            failed += 1;
        }
        println!(
            "criterion {id} {name}: {} ({secs:.1} s of {budget_s:.0} s) {}",
            if pass { "PASS" } else { "FAIL" },
            out.detail
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}

fn scenarios_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn load_run(name: &str) -> (RunConfig, World) {
    let cfg = RunConfig::load(&scenarios_dir().join(name)).expect("run config");
    let world = ScenarioFile::load(&cfg.scenario).expect("scenario").build().expect("world");
    (cfg, world)
}

fn geometry_rng(index: u64) -> ChaCha8Rng {
    rng::stream(20_240_101, Domain::Geometry, index)
}

fn uniform(r: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    r.random_range(lo..hi)
}

fn random_point(r: &mut ChaCha8Rng, reach: f64, z: (f64, f64)) -> Vector3<f64> {
    Vector3::new(uniform(r, -reach, reach), uniform(r, -reach, reach), uniform(r, z.0, z.1))
}

fn random_wall(r: &mut ChaCha8Rng, id: u32) -> Wall {
    let c = Vector2::new(uniform(r, -100.0, 100.0), uniform(r, -100.0, 100.0));
    let th = uniform(r, 0.0, std::f64::consts::TAU);
    let half = uniform(r, 20.0, 150.0);
    let d = Vector2::new(th.cos(), th.sin()) * half;
    Wall::new(id, c - d, c + d, uniform(r, -1.0, 1.0), uniform(r, 10.0, 40.0), 6.0).unwrap()
}

/// Long wall at `standoff` from `ue` whose normal, at azimuth `normal_az`,
/// points toward the UE.
fn facing_wall(id: u32, ue: &Vector3<f64>, normal_az: f64, standoff: f64, half: f64) -> Wall {
    let n = Vector2::new(normal_az.cos(), normal_az.sin());
    let foot = Vector2::new(ue.x, ue.y) - n * standoff;
    let d = Vector2::new(n.y, -n.x) * half;
    Wall::new(id, foot - d, foot + d, 0.0, 40.0, 6.0).unwrap()
}

/// Base station on the normal side of `wall`.
fn station_facing(r: &mut ChaCha8Rng, id: u32, wall: &Wall) -> BaseStation {
    let n = wall.normal();
    let t = Vector3::new(n.y, -n.x, 0.0);
    let mid = Vector3::new(0.5 * (wall.a.x + wall.b.x), 0.5 * (wall.a.y + wall.b.y), 0.0);
    let p = mid + n * uniform(r, 10.0, 150.0) + t * uniform(r, -100.0, 100.0);
    BaseStation::new(id, Vector3::new(p.x, p.y, uniform(r, 10.0, 30.0)))
}

fn pose_at(p: Vector3<f64>) -> Pose {
    Pose { t: 0.0, p, v: Vector3::zeros(), att: Vector3::zeros() }
}

/// Two reflected paths to `ue` off walls whose normals are 30 to 150 deg
/// apart, from independently placed stations.
fn crossing_pair(r: &mut ChaCha8Rng, ue: &Vector3<f64>) -> Option<[(BaseStation, sbrnav::scene::SbrPath); 2]> {
    let az1 = uniform(r, 0.0, std::f64::consts::TAU);
    let az2 = az1 + uniform(r, 30f64.to_radians(), 150f64.to_radians());
    let w1 = facing_wall(1, ue, az1, uniform(r, 10.0, 80.0), 250.0);
    let w2 = facing_wall(2, ue, az2, uniform(r, 10.0, 80.0), 250.0);
    let b1 = station_facing(r, 1, &w1);
    let b2 = station_facing(r, 2, &w2);
    let p1 = specular_path(&b1, ue, &w1)?;
    let p2 = specular_path(&b2, ue, &w2)?;
    Some([(b1, p1), (b2, p2)])
}

fn geometry_oracle() -> Outcome {
    let mut worst = [0.0f64; 6];
    let (mut found, mut off_wall) = (0, 0);
    let mut attempts = 0u64;
    while found < 1000 && attempts < 200_000 {
        let mut r = geometry_rng(attempts);
        attempts += 1;
        let wall = random_wall(&mut r, 1);
        let p = random_point(&mut r, 300.0, (-5.0, 60.0));
        let m = mirror_point(&p, &wall);
        worst[0] = worst[0].max((mirror_point(&m, &wall) - p).norm() / p.norm().max(1.0));
        worst[1] = worst[1].max((m.z - p.z).abs());

        let bs = BaseStation::new(1, random_point(&mut r, 200.0, (5.0, 40.0)));
        let ue = random_point(&mut r, 200.0, (0.0, 3.0));
        let Some(path) = specular_path(&bs, &ue, &wall) else { continue };
        found += 1;
        let n = wall.normal();
        let image = mirror_point(&bs.p, &wall);
        let law = (ue - path.q) / path.d2 - (path.u_d - n * (2.0 * path.u_d.dot(&n)));
        worst[2] = worst[2].max(law.norm());
        worst[3] = worst[3].max((path.length - (image - ue).norm()).abs() / path.length);
        worst[4] = worst[4].max((path.length - path.d1 - path.d2).abs() / path.length);
        worst[5] = worst[5]
            .max((path.u_d.norm() - 1.0).abs())
            .max((path.u_a.norm() - 1.0).abs())
            .max(wall.signed_distance(&path.q).abs());
        if !wall.contains(&path.q) {
            off_wall += 1;
        }
    }
    let limits = [1e-9, 1e-12, 1e-9, 1e-9, 1e-9, 1e-9];
    let pass = found == 1000 && off_wall == 0 && worst.iter().zip(limits).all(|(w, l)| *w <= l);
    Outcome::new(
        pass,
        format!(
            "{found} scenes; involution {:.1e}, z shift {:.1e}, specular law {:.1e}, L vs mirror {:.1e}, L vs legs {:.1e}, unit/plane {:.1e}, outside rectangle {off_wall}",
            worst[0], worst[1], worst[2], worst[3], worst[4], worst[5]
        ),
    )
}

fn solver_exactness() -> Outcome {
    let plm = PathLossModel::default();
    let exact = FixNoise::default();
    let (mut los_worst, mut sbr_worst) = (0.0f64, 0.0f64);
    let (mut los_n, mut sbr_n, mut degenerate_n, mut wrong_fixes) = (0, 0, 0, 0);
    for i in 0..1000u64 {
        let mut r = geometry_rng(1_000_000 + i);
        let bs = BaseStation::new(1, random_point(&mut r, 300.0, (5.0, 40.0)));
        let ue = random_point(&mut r, 300.0, (0.0, 3.0));
        if let Ok(obs) = synth_los(&bs, &pose_at(ue), &plm) {
            let fix = los_fix(&bs, &obs, &exact).unwrap();
            los_worst = los_worst.max((fix.p - ue).norm());
            los_n += 1;
        }

        let pair = loop {
            if let Some(p) = crossing_pair(&mut r, &ue) {
                break p;
            }
        };
        let paths: Vec<PathMeasurement> =
            pair.iter().map(|(b, p)| PathMeasurement::new(b, &synth_sbr(p, &pose_at(ue), &plm))).collect();
        match sbr_fix(&paths, &exact) {
            Ok(fix) => {
                sbr_worst = sbr_worst.max((fix.p - ue).norm());
                sbr_n += 1;
            }
            Err(_) => sbr_worst = f64::INFINITY,
        }

        if let Some(paths) = same_wall_pair(&mut r, &ue) {
            degenerate_n += 1;
            if sbr_fix(&paths, &exact).is_ok() {
                wrong_fixes += 1;
            }
        }
    }
    let pass = los_n == 1000
        && sbr_n == 1000
        && los_worst <= 1e-9
        && sbr_worst <= 1e-6
        && degenerate_n >= 1000
        && wrong_fixes == 0;
    Outcome::new(
        pass,
        format!(
            "LoS {los_n} fixes, worst {los_worst:.1e} m; two-path {sbr_n} fixes, worst {sbr_worst:.1e} m; same-wall {degenerate_n} cases, {wrong_fixes} fixes"
        ),
    )
}

/// Two paths off one wall from two stations on its normal side.
fn same_wall_pair(r: &mut ChaCha8Rng, ue: &Vector3<f64>) -> Option<Vec<PathMeasurement>> {
    let plm = PathLossModel::default();
    for _ in 0..100 {
        let wall = facing_wall(7, ue, uniform(r, 0.0, std::f64::consts::TAU), uniform(r, 10.0, 80.0), 250.0);
        let b1 = station_facing(r, 1, &wall);
        let b2 = station_facing(r, 2, &wall);
        if let (Some(p1), Some(p2)) = (specular_path(&b1, ue, &wall), specular_path(&b2, ue, &wall)) {
            return Some(vec![
                PathMeasurement::new(&b1, &synth_sbr(&p1, &pose_at(*ue), &plm)),
                PathMeasurement::new(&b2, &synth_sbr(&p2, &pose_at(*ue), &plm)),
            ]);
        }
    }
    None
}

fn oori_accuracy() -> Outcome {
    let plm = PathLossModel::default();
    let noise = NoiseCfg::default();
    let fix_noise = FixNoise { var_range: noise.var_range, var_angle: noise.var_angle_rad2() };
    let gates = GateConfig::default();
    let (mut single_ok, mut double_ok) = (0, 0);
    for i in 0..2000u64 {
        let mut r = geometry_rng(2_000_000 + i);
        let ue = random_point(&mut r, 200.0, (1.0, 2.0));
        let noisy = |obs: &SbrObs, r: &mut ChaCha8Rng| apply_noise(obs, &noise, r).unwrap();

        // candidate fix from two other single-bounce paths
        let reference = loop {
            let Some(pair) = crossing_pair(&mut r, &ue) else { continue };
            let paths: Vec<PathMeasurement> = pair
                .iter()
                .map(|(b, p)| PathMeasurement::new(b, &noisy(&synth_sbr(p, &pose_at(ue), &plm), &mut r)))
                .collect();
            if let Ok(sol) = sbr_solve_weighted(&paths, &fix_noise) {
                break sol;
            }
        };

        let (bs, obs) = if i < 1000 {
            loop {
                let wall = facing_wall(
                    3,
                    &ue,
                    uniform(&mut r, 0.0, std::f64::consts::TAU),
                    uniform(&mut r, 10.0, 80.0),
                    250.0,
                );
                let bs = station_facing(&mut r, 3, &wall);
                if let Some(p) = specular_path(&bs, &ue, &wall) {
                    break (bs, synth_sbr(&p, &pose_at(ue), &plm));
                }
            }
        } else {
            loop {
                let w1 = facing_wall(
                    3,
                    &ue,
                    uniform(&mut r, 0.0, std::f64::consts::TAU),
                    uniform(&mut r, 10.0, 80.0),
                    250.0,
                );
                let w2 = facing_wall(
                    4,
                    &ue,
                    uniform(&mut r, 0.0, std::f64::consts::TAU),
                    uniform(&mut r, 10.0, 80.0),
                    250.0,
                );
                let bs = station_facing(&mut r, 3, &w1);
                if let Some(p) = double_bounce_path(&bs, &ue, &w1, &w2) {
                    break (bs, synth_reflected(&p, 0.0, &plm));
                }
            }
        };
        let obs = noisy(&obs, &mut r);
        let residual = PathMeasurement::new(&bs, &obs).residual_at(&reference.p);
        let admitted = oori_check(&obs, residual, &gates);
        match (obs.truth_bounces, admitted) {
            (1, true) => single_ok += 1,
            (2, false) => double_ok += 1,
            _ => {}
        }
    }
    let accuracy = (single_ok + double_ok) as f64 / 2000.0;
    Outcome::new(
        accuracy >= 0.99,
        format!(
            "accuracy {:.2}% (single admitted {single_ok}/1000, double rejected {double_ok}/1000)",
            100.0 * accuracy
        ),
    )
}

fn frac(hits: usize, total: usize) -> f64 {
    hits as f64 / total.max(1) as f64
}

fn outage_trends() -> Outcome {
    let (cfg, world) = load_run("desk_outages.json");
    let sweep = cfg.outage_sweep.as_ref().unwrap();
    let clean = clean_epochs(&world).unwrap();
    let reals = realize_all(&world, &cfg.seeds(sweep.seeds)).unwrap();
    let without =
        run_outage_sweep(&world, &clean, &reals, &cfg.estimator, &sweep.outages, sweep.lead_in_s, false).unwrap();
    let with = run_outage_sweep(&world, &clean, &reals, &cfg.estimator, &sweep.outages, sweep.lead_in_s, true).unwrap();
    let n = reals.len();
    let rmse = |rs: &[RunReport], outage: usize, seed: usize| rs[outage * n + seed].rmse_3d;

    let mut worst_order = 1.0f64;
    for i in 0..sweep.outages.len() {
        let ok = (0..n).filter(|&k| rmse(&with, i, k) < rmse(&without, i, k)).count();
        worst_order = worst_order.min(frac(ok, n));
    }
    let idx =
        |d: f64| -> Vec<usize> { (0..sweep.outages.len()).filter(|&i| sweep.outages[i].duration_s == d).collect() };
    let (short, long) = (idx(20.0), idx(400.0));
    let mut growth = (0, 0);
    for &l in &long {
        for &s in &short {
            for k in 0..n {
                growth.1 += 1;
                if rmse(&without, l, k) > rmse(&without, s, k) {
                    growth.0 += 1;
                }
            }
        }
    }
    let sub_meter = with.iter().filter(|r| r.rmse_3d < 1.0).count();
    let worst_with = with.iter().map(|r| r.rmse_3d).fold(0.0, f64::max);
    let loop_m = world.scenario.trajectory.arc_length(0.0, world.scenario.trajectory.end_time());
    let pass = worst_order >= 0.95
        && !long.is_empty()
        && !short.is_empty()
        && frac(growth.0, growth.1) >= 0.95
        && frac(sub_meter, with.len()) >= 0.95;
    Outcome::new(
        pass,
        format!(
            "{} outages x {n} seeds, {} BSs, {} walls, {loop_m:.0} m driven; with<without worst outage {:.0}%; 400 s > 20 s without SBR {:.0}%; with-SBR sub-meter {:.0}% (max {worst_with:.3} m)",
            sweep.outages.len(),
            world.scenario.base_stations.len(),
            world.scenario.walls.len(),
            100.0 * worst_order,
            100.0 * frac(growth.0, growth.1),
            100.0 * frac(sub_meter, with.len())
        ),
    )
}

fn noise_trends() -> Outcome {
    let mut details = Vec::new();
    let mut pass = true;
    for name in ["desk_noise_range.json", "desk_noise_angle.json"] {
        let (cfg, world) = load_run(name);
        let sweep = cfg.noise_sweep.as_ref().unwrap();
        let clean = clean_epochs(&world).unwrap();
        let reals = realize_all(&world, &cfg.seeds(sweep.seeds)).unwrap();
        let n = reals.len();
        let nv = sweep.variances.len();
        let arms = [false, true].map(|sbr| {
            run_noise_sweep(&world, &clean, &reals, &cfg.estimator, sweep.domain, &sweep.variances, sbr).unwrap()
        });
        let med = |arm: usize, v: usize, k: usize| arms[arm][v * n + k].median_error();
        let mut monotone = 0;
        for arm in 0..2 {
            for k in 0..n {
                if (1..nv).all(|v| med(arm, v - 1, k) <= med(arm, v, k)) {
                    monotone += 1;
                }
            }
        }
        let mut ordered = 0;
        for v in 0..nv {
            for k in 0..n {
                if med(1, v, k) <= med(0, v, k) {
                    ordered += 1;
                }
            }
        }
        let ensemble: Vec<[f64; 2]> = (0..nv)
            .map(|v| [0, 1].map(|arm| median(&mut (0..n).map(|k| med(arm, v, k)).collect::<Vec<_>>())))
            .collect();
        let ensemble_ok = ensemble.windows(2).all(|w| w[0][0] <= w[1][0] && w[0][1] <= w[1][1])
            && ensemble.iter().all(|m| m[1] <= m[0]);
        let ok = frac(monotone, 2 * n) >= 0.95 && frac(ordered, nv * n) >= 0.95 && ensemble_ok;
        pass &= ok;
        details.push(format!(
            "{}: monotone {:.0}%, with<=without {:.0}%, medians {}",
            sweep.domain.as_str(),
            100.0 * frac(monotone, 2 * n),
            100.0 * frac(ordered, nv * n),
            ensemble.iter().map(|m| format!("{:.3}/{:.3}", m[0], m[1])).collect::<Vec<_>>().join(" ")
        ));
    }
    Outcome::new(pass, details.join("; "))
}

fn filter_health() -> Outcome {
    let (_, world) = load_run("desk_single.json");
    let clean = clean_epochs(&world).unwrap();
    let engine = EngineConfig::default();
    let runs = 200u64;
    let estimator = build_estimator(&world, &engine, &world.noise).unwrap();
    let mut sums: Vec<f64> = Vec::new();
    let mut min_ev = f64::INFINITY;
    let (mut spoofs, mut spoofs_gated) = (0usize, 0usize);
    for seed in 0..runs {
        let real = realize(&world, seed).unwrap();
        let arm = Arm { engine: &engine, noise: world.noise, outages: &[], t_start: 0.0, t_end: 60.0 };
        let mut spoof_rng = rng::stream(seed, Domain::Geometry, 6);
        let mut k = 0;
        run_arm_with(&world, &clean, &real, &arm, |fs, rec| {
            let pose = world.scenario.trajectory.nearest(rec.t);
            let truth = NavState {
                b_g: real.imu_errors.gyro_bias,
                b_a: real.imu_errors.accel_bias,
                ..NavState::from_pose(pose)
            };
            let v = nees(fs, &truth).unwrap_or(f64::INFINITY);
            if sums.len() <= k {
                sums.push(0.0);
            }
            sums[k] += v;
            min_ev = min_ev.min(min_eigenvalue(&fs.p));
            if k % 50 == 25 {
                let az = spoof_rng.random_range(0.0..std::f64::consts::TAU);
                let fix = Fix {
                    t: rec.t,
                    p: pose.p + Vector3::new(az.cos(), az.sin(), 0.0) * 100.0,
                    cov: Matrix3::identity() * 0.5,
                    residual: 0.0,
                    source: FixKind::Sbr,
                    n_paths: 2,
                };
                let (_, outcome) = update_position(fs, &fix, &fix.cov, estimator.params()).unwrap();
                spoofs += 1;
                if matches!(outcome, UpdateOutcome::Gated { .. }) {
                    spoofs_gated += 1;
                }
            }
            k += 1;
        })
        .unwrap();
    }
    let anees: Vec<f64> = sums.iter().map(|s| s / runs as f64).collect();
    let dof = (STATE_DIM as u64 * runs) as f64;
    let chi = ChiSquared::new(dof).unwrap();
    let (lo, hi) = (chi.inverse_cdf(0.025) / runs as f64, chi.inverse_cdf(0.975) / runs as f64);
    let mean = anees.iter().sum::<f64>() / anees.len() as f64;
    let inside = anees.iter().filter(|a| **a >= lo && **a <= hi).count();
    let pass = mean >= lo
        && mean <= hi
        && frac(inside, anees.len()) >= 0.90
        && min_ev > 0.0
        && spoofs > 0
        && spoofs_gated == spoofs;
    Outcome::new(
        pass,
        format!(
            "{runs} runs x 60 s; ANEES mean {mean:.2} in [{lo:.2}, {hi:.2}], {:.1}% of epochs in band; min eigenvalue {min_ev:.1e}; spoofs gated {spoofs_gated}/{spoofs}",
            100.0 * frac(inside, anees.len())
        ),
    )
}

fn ins_round_trip() -> Outcome {
    let (_, world) = load_run("desk_single.json");
    let traj = &world.scenario.trajectory;
    let imu = synth_imu(traj, &ImuErrors::none(), world.rates.imu_hz, &mut rng::stream(0, Domain::Imu, 0)).unwrap();
    let poses = traj.poses();
    let states = mechanize(&NavState::from_pose(&poses[0]), &imu).unwrap();
    let round_trip = states
        .iter()
        .zip(&poses[1..])
        .take_while(|(_, p)| p.t <= 60.0 + 1e-9)
        .map(|(s, p)| (s.p - p.p).norm())
        .fold(0.0, f64::max);

    let seeds: Vec<u64> = (0..50).collect();
    let every = world.rates.imu_hz.round() as usize;
    let curve = drift_ensemble_median(traj, &world.imu_error, world.rates.imu_hz, &seeds, every).unwrap();
    let curve: Vec<(f64, f64)> = curve.into_iter().take_while(|(t, _)| *t <= 60.0 + 1e-9).collect();
    let monotone = curve.windows(2).all(|w| w[1].1 >= w[0].1);
    let last = curve.last().copied().unwrap_or_default();
    Outcome::new(
        round_trip < 0.01 && monotone && last.1 > 0.0,
        format!(
            "noiseless 60 s error {round_trip:.2e} m; median drift over {} seeds monotone: {monotone}, {:.2} m at {:.0} s",
            seeds.len(),
            last.1,
            last.0
        ),
    )
}

fn determinism() -> Outcome {
    let mut checks = Vec::new();
    for (name, trim) in [("desk_outages.json", true), ("desk_noise_range.json", false)] {
        let mut cfg = RunConfig::load(&scenarios_dir().join(name)).unwrap();
        if let Some(s) = cfg.outage_sweep.as_mut() {
            s.seeds = 3;
            if trim {
                s.outages.truncate(3);
            }
        }
        if let Some(s) = cfg.noise_sweep.as_mut() {
            s.seeds = 3;
        }
        let runs: Vec<_> = [1usize, 4]
            .iter()
            .map(|&threads| {
                let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
                pool.install(|| experiment::run(&cfg)).unwrap()
            })
            .collect();
        let same = runs[0] == runs[1];
        checks.push((cfg.mode.clone(), runs[0].len(), same));
    }
    let pass = checks.iter().all(|c| c.2);
    Outcome::new(
        pass,
        checks
            .iter()
            .map(|(m, files, same)| format!("{m}: {files} files identical on 1 and 4 threads: {same}"))
            .collect::<Vec<_>>()
            .join("; "),
    )
}
