//! Observation coverage of a scenario: LoS visibility and multipath fix
//! availability along the trajectory.
//!
//! ```text
//! cargo run --release --example coverage -- scenarios/desk_loop.json
//! ```

use sbrnav::config::ScenarioFile;
use sbrnav::eval::clean_epochs;
use sbrnav::eval::median;
use sbrnav::fixes::{sbr_solve_weighted, FixNoise, PathMeasurement};

fn main() -> sbrnav::Result<()> {
    let path = std::env::args().nth(1).expect("usage: coverage <scenario.json>");
    let world = ScenarioFile::load(path.as_ref())?.build()?;
    let epochs = clean_epochs(&world)?;
    let noise = FixNoise { var_range: 0.5, var_angle: 0.01f64.to_radians().to_radians() };

    let (mut los_any, mut los_none, mut fix_ok, mut masq) = (0usize, 0usize, 0usize, 0usize);
    let (mut gap, mut worst_gap, mut worst_at) = (0.0f64, 0.0f64, 0.0f64);
    let mut cond_hist = [0usize; 4];
    let mut sigmas = Vec::new();
    let dt = 1.0 / world.rates.obs_hz;
    for e in &epochs {
        let true_los = e.los.iter().filter(|o| o.truth_bounces == 0).count();
        masq += e.los.len() - true_los;
        if true_los > 0 {
            los_any += 1;
        } else {
            los_none += 1;
        }
        let single: Vec<PathMeasurement> = e
            .sbr
            .iter()
            .filter(|o| o.truth_bounces == 1)
            .filter_map(|o| world.scenario.base_station(o.bs_id).map(|bs| PathMeasurement::new(bs, o)))
            .collect();
        match sbr_solve_weighted(&single, &noise) {
            Ok(sol) => {
                fix_ok += 1;
                gap = 0.0;
                sigmas.push(sol.cov.trace().sqrt());
                let bucket = match sol.condition {
                    c if c < 10.0 => 0,
                    c if c < 100.0 => 1,
                    c if c < 1000.0 => 2,
                    _ => 3,
                };
                cond_hist[bucket] += 1;
            }
            Err(_) => {
                gap += dt;
                if gap > worst_gap {
                    worst_gap = gap;
                    worst_at = e.t;
                }
            }
        }
    }
    let n = epochs.len() as f64;
    println!("epochs {}", epochs.len());
    println!("true LoS available {:.1}%  (none {:.1}%)", 100.0 * los_any as f64 / n, 100.0 * los_none as f64 / n);
    println!("masquerading NLoS records {masq}");
    println!("joint multipath fix available {:.1}%", 100.0 * fix_ok as f64 / n);
    println!("median multipath fix sigma {:.2} m at default noise", median(&mut sigmas));
    println!("condition <10 / <100 / <1000 / more: {cond_hist:?}");
    println!("longest gap without a multipath fix {worst_gap:.1} s ending at t = {worst_at:.1} s");
    println!(
        "loop length {:.0} m",
        world
            .scenario
            .trajectory
            .arc_length(world.scenario.trajectory.start_time(), world.scenario.trajectory.end_time())
    );
    Ok(())
}
