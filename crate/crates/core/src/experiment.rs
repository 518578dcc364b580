//! Run modes. Each mode is a named [`Experiment`] that validates its
//! section of the run configuration and produces its report files in
//! memory; nothing touches the disk until the whole run succeeded.

use std::collections::BTreeMap;
use std::fmt::Write;
use std::io::BufReader;

use crate::config::{RunConfig, ScenarioFile, World};
use crate::eval::error_cdf;
use crate::eval::pipeline::{clean_epochs, realize, run_arm_with, run_epochs, Arm, Realization};
use crate::eval::report::{cdf_csv, errors_csv, f, runs_csv, states_csv, OutputFile, RunReport};
use crate::eval::sweep::{
    arm_name, noise_summary_csv, outage_summary_csv, outage_table, pooled_errors, realize_all, run_noise_sweep,
    run_outage_sweep,
};
use crate::ins::drift_ensemble_median;
use crate::synth::log::MeasurementLog;
use crate::{Error, Result};

pub trait Experiment: Send + Sync {
    fn name(&self) -> &'static str;
    /// Check the mode-specific configuration before any work is done.
    fn validate(&self, run: &RunConfig) -> Result<()>;
    fn execute(&self, run: &RunConfig, world: &World) -> Result<Vec<OutputFile>>;
}

type Factory = fn() -> Box<dyn Experiment>;

pub struct ExperimentRegistry {
    factories: BTreeMap<&'static str, Factory>,
}

impl ExperimentRegistry {
    pub fn builtin() -> Self {
        let mut factories: BTreeMap<&'static str, Factory> = BTreeMap::new();
        factories.insert("single", || Box::new(Single));
        factories.insert("outage-sweep", || Box::new(OutageSweep));
        factories.insert("noise-sweep", || Box::new(NoiseSweep));
        factories.insert("drift-profile", || Box::new(DriftProfile));
        Self { factories }
    }

    pub fn register(&mut self, name: &'static str, factory: Factory) {
        self.factories.insert(name, factory);
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.factories.keys().copied().collect()
    }

    pub fn create(&self, name: &str) -> Result<Box<dyn Experiment>> {
        self.factories
            .get(name)
            .map(|f| f())
            .ok_or_else(|| Error::config(format!("unknown mode '{name}' (known: {})", self.names().join(", "))))
    }
}

/// Validate, load the scenario and run the configured mode. The returned
/// files include `manifest.json`.
pub fn run(cfg: &RunConfig) -> Result<Vec<OutputFile>> {
    let exp = ExperimentRegistry::builtin().create(&cfg.mode)?;
    cfg.estimator.validate()?;
    exp.validate(cfg)?;
    let scenario = ScenarioFile::load(&cfg.scenario)?;
    let world = scenario.build()?;
    let mut files = exp.execute(cfg, &world)?;
    files.push(manifest(cfg, &scenario, &files)?);
    Ok(files)
}

fn manifest(cfg: &RunConfig, scenario: &ScenarioFile, files: &[OutputFile]) -> Result<OutputFile> {
    let names: Vec<&str> = files.iter().map(|f| f.name.as_str()).collect();
    let value = serde_json::json!({
        "package": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "mode": cfg.mode,
        "seed": cfg.seed,
        "config": cfg,
        "scenario": scenario,
        "files": names,
    });
    let text = serde_json::to_string_pretty(&value).map_err(Error::Json)?;
    Ok(OutputFile::new("manifest.json", text + "\n"))
}

fn reject_sections(run: &RunConfig, allowed: &str) -> Result<()> {
    let present = [
        ("outage_sweep", run.outage_sweep.is_some()),
        ("noise_sweep", run.noise_sweep.is_some()),
        ("drift_profile", run.drift_profile.is_some()),
        ("single", run.single.is_some()),
    ];
    for (name, is) in present {
        if is && name != allowed {
            return Err(Error::config(format!("section '{name}' does not apply to mode '{}'", run.mode)));
        }
    }
    Ok(())
}

fn seed_count(n: u32) -> Result<()> {
    if n == 0 {
        return Err(Error::config("seeds must be >= 1"));
    }
    Ok(())
}

/// One run over the whole trajectory.
pub struct Single;

impl Experiment for Single {
    fn name(&self) -> &'static str {
        "single"
    }

    fn validate(&self, run: &RunConfig) -> Result<()> {
        reject_sections(run, "single")
    }

    fn execute(&self, run: &RunConfig, world: &World) -> Result<Vec<OutputFile>> {
        let engine = run.engine();
        let log = run.single.as_ref().and_then(|s| s.measurement_log.as_ref());
        let mut records = Vec::new();
        let collect = |_: &_, r: &crate::engine::EpochRecord| records.push(r.clone());
        let arm_run = match log {
            Some(path) => {
                let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
                let log = MeasurementLog::read_ndjson(BufReader::new(file), world.rates.obs_hz)?;
                let real = Realization::recorded(run.seed, log.imu, log.odo);
                let declared = crate::synth::NoiseCfg { seed: run.seed, ..world.noise };
                run_epochs(
                    world,
                    &engine,
                    &declared,
                    &real,
                    world.scenario.trajectory.start_time(),
                    &log.epochs,
                    collect,
                )?
            }
            None => {
                let clean = clean_epochs(world)?;
                let real = realize(world, run.seed)?;
                let arm = Arm {
                    engine: &engine,
                    noise: world.noise,
                    outages: &world.outages,
                    t_start: world.scenario.trajectory.start_time(),
                    t_end: world.scenario.trajectory.end_time(),
                };
                run_arm_with(world, &clean, &real, &arm, collect)?
            }
        };
        let report = RunReport::new(
            "single",
            run.seed,
            run.with_sbr,
            &arm_run.estimates,
            &world.scenario.trajectory,
            None,
            arm_run.trace.gates,
        )?;
        Ok(vec![
            OutputFile::new("summary.csv", runs_csv(std::slice::from_ref(&report))),
            OutputFile::new("errors_single.csv", errors_csv(&report)),
            OutputFile::new("cdf_single.csv", cdf_csv(&report.cdf)),
            OutputFile::new("states_single.csv", states_csv(&records)),
        ])
    }
}

/// Artificial LoS outages, each run with and without multipath updates.
pub struct OutageSweep;

impl Experiment for OutageSweep {
    fn name(&self) -> &'static str {
        "outage-sweep"
    }

    fn validate(&self, run: &RunConfig) -> Result<()> {
        reject_sections(run, "outage_sweep")?;
        let cfg = run
            .outage_sweep
            .as_ref()
            .ok_or_else(|| Error::config("mode 'outage-sweep' needs an 'outage_sweep' section"))?;
        seed_count(cfg.seeds)?;
        if !(cfg.lead_in_s >= 0.0) {
            return Err(Error::config("outage_sweep.lead_in_s must be >= 0"));
        }
        if cfg.outages.is_empty() {
            return Err(Error::config("outage_sweep.outages is empty"));
        }
        for o in &cfg.outages {
            o.window()?;
        }
        let mut ids: Vec<u32> = cfg.outages.iter().map(|o| o.id).collect();
        ids.sort_unstable();
        ids.dedup();
        if ids.len() != cfg.outages.len() {
            return Err(Error::config("outage ids must be unique"));
        }
        Ok(())
    }

    fn execute(&self, run: &RunConfig, world: &World) -> Result<Vec<OutputFile>> {
        let cfg = run.outage_sweep.as_ref().expect("validated");
        let end = world.scenario.trajectory.end_time();
        if let Some(o) = cfg
            .outages
            .iter()
            .find(|o| o.start_s + o.duration_s > end + 1e-9 || o.start_s < world.scenario.trajectory.start_time())
        {
            return Err(Error::config(format!("outage {} lies outside the trajectory", o.id)));
        }
        let clean = clean_epochs(world)?;
        let reals = realize_all(world, &run.seeds(cfg.seeds))?;
        let without = run_outage_sweep(world, &clean, &reals, &run.estimator, &cfg.outages, cfg.lead_in_s, false)?;
        let with = run_outage_sweep(world, &clean, &reals, &run.estimator, &cfg.outages, cfg.lead_in_s, true)?;
        let rows = outage_table(world, &cfg.outages, &without, &with);

        let mut files = vec![
            OutputFile::new("summary.csv", outage_summary_csv(&rows)),
            OutputFile::new("outage_runs.csv", runs_csv(&[without.as_slice(), with.as_slice()].concat())),
        ];
        let n = reals.len();
        for (i, o) in cfg.outages.iter().enumerate() {
            for (reports, sbr) in [(&without, false), (&with, true)] {
                let r = &reports[i * n];
                let run_id = format!("outage{}_{}", o.id, arm_name(sbr));
                files.push(OutputFile::new(format!("errors_{run_id}.csv"), errors_csv(r)));
                files.push(OutputFile::new(format!("cdf_{run_id}.csv"), cdf_csv(&r.cdf)));
            }
        }
        Ok(files)
    }
}

/// Observation-noise levels in one domain, both arms, pooled CDFs.
pub struct NoiseSweep;

impl Experiment for NoiseSweep {
    fn name(&self) -> &'static str {
        "noise-sweep"
    }

    fn validate(&self, run: &RunConfig) -> Result<()> {
        reject_sections(run, "noise_sweep")?;
        let cfg = run
            .noise_sweep
            .as_ref()
            .ok_or_else(|| Error::config("mode 'noise-sweep' needs a 'noise_sweep' section"))?;
        seed_count(cfg.seeds)?;
        if cfg.variances.is_empty() || cfg.variances.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::config("noise_sweep.variances must be a non-empty list of finite values >= 0"));
        }
        Ok(())
    }

    fn execute(&self, run: &RunConfig, world: &World) -> Result<Vec<OutputFile>> {
        let cfg = run.noise_sweep.as_ref().expect("validated");
        let clean = clean_epochs(world)?;
        let reals = realize_all(world, &run.seeds(cfg.seeds))?;
        let without = run_noise_sweep(world, &clean, &reals, &run.estimator, cfg.domain, &cfg.variances, false)?;
        let with = run_noise_sweep(world, &clean, &reals, &run.estimator, cfg.domain, &cfg.variances, true)?;

        let mut files = vec![
            OutputFile::new("summary.csv", noise_summary_csv(cfg.domain, &cfg.variances, &without, &with)),
            OutputFile::new("noise_runs.csv", runs_csv(&[without.as_slice(), with.as_slice()].concat())),
        ];
        let n = reals.len();
        for (i, v) in cfg.variances.iter().enumerate() {
            for (reports, sbr) in [(&without, false), (&with, true)] {
                let run_id = format!("{}{}_{}", cfg.domain.as_str(), v, arm_name(sbr));
                let cdf = error_cdf(&pooled_errors(reports, i, n));
                files.push(OutputFile::new(format!("errors_{run_id}.csv"), errors_csv(&reports[i * n])));
                files.push(OutputFile::new(format!("cdf_{run_id}.csv"), cdf_csv(&cdf)));
            }
        }
        Ok(files)
    }
}

/// Unaided inertial drift along the truth trajectory, ensemble median.
pub struct DriftProfile;

impl Experiment for DriftProfile {
    fn name(&self) -> &'static str {
        "drift-profile"
    }

    fn validate(&self, run: &RunConfig) -> Result<()> {
        reject_sections(run, "drift_profile")?;
        let cfg = run.drift_profile.clone().unwrap_or(crate::config::DriftProfileCfg { seeds: 1, every_s: 1.0 });
        seed_count(cfg.seeds)?;
        if !(cfg.every_s > 0.0) {
            return Err(Error::config("drift_profile.every_s must be > 0"));
        }
        Ok(())
    }

    fn execute(&self, run: &RunConfig, world: &World) -> Result<Vec<OutputFile>> {
        let cfg = run.drift_profile.clone().unwrap_or(crate::config::DriftProfileCfg { seeds: 1, every_s: 1.0 });
        let every = (cfg.every_s * world.rates.imu_hz).round().max(1.0) as usize;
        let curve = drift_ensemble_median(
            &world.scenario.trajectory,
            &world.imu_error,
            world.rates.imu_hz,
            &run.seeds(cfg.seeds),
            every,
        )?;
        let mut profile = String::from("t_s,median_error_m\n");
        for (t, e) in &curve {
            let _ = writeln!(profile, "{},{}", f(*t), f(*e));
        }
        let (t_end, e_end) = curve.last().copied().unwrap_or((0.0, 0.0));
        let summary = format!("seeds,duration_s,final_median_error_m\n{},{},{}\n", cfg.seeds, f(t_end), f(e_end));
        Ok(vec![OutputFile::new("summary.csv", summary), OutputFile::new("drift_profile.csv", profile)])
    }
}
