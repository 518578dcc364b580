//! `sbrnav` command line: run one configured experiment and write its
//! report files.
//!
//! Exit codes: 0 success, 2 invalid configuration or unreadable input,
//! 3 scenario geometry error, 4 numeric failure. Failures print one JSON
//! object on stderr: `{"error": "<kind>", "message": "...", "exit_code": n}`.

use clap::Parser;
use std::path::{Path, PathBuf};

use sbrnav::config::RunConfig;
use sbrnav::eval::OutputFile;
use sbrnav::experiment;

#[derive(Debug, Clone, Parser)]
#[command(name = "sbrnav", version, about = "Run a 5G + multipath + INS positioning experiment")]
pub struct Cli {
    /// Run configuration (JSON).
    #[arg(short, long)]
    pub config: PathBuf,
    /// Output directory; overrides the config's `output_dir`.
    #[arg(short, long, env = "SBRNAV_OUTPUT_DIR")]
    pub output_dir: Option<PathBuf>,
    /// Seed; overrides the config's `seed`.
    #[arg(short, long)]
    pub seed: Option<u64>,
}

#[derive(Debug)]
pub struct CliError(pub sbrnav::Error);

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self.0.kind() {
            "geometry" => 3,
            "numeric" => 4,
            _ => 2,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::json!({
            "error": self.0.kind(),
            "message": self.0.to_string(),
            "exit_code": self.exit_code(),
        })
        .to_string()
    }
}

impl From<sbrnav::Error> for CliError {
    fn from(e: sbrnav::Error) -> Self {
        Self(e)
    }
}

/// Run the experiment and write its files. Returns the output directory.
pub fn run(cli: &Cli) -> Result<PathBuf, CliError> {
    let mut cfg = RunConfig::load(&cli.config)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(dir) = &cli.output_dir {
        cfg.output_dir = Some(dir.clone());
    }
    let out = cfg.output_dir.clone().ok_or_else(|| {
        sbrnav::Error::Config("no output directory (config 'output_dir', --output-dir or SBRNAV_OUTPUT_DIR)".into())
    })?;
    let files = experiment::run(&cfg)?;
    write_all(&out, &files)?;
    Ok(out)
}

/// Files are written only once the whole run has succeeded.
pub fn write_all(dir: &Path, files: &[OutputFile]) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| sbrnav::Error::io(dir, e))?;
    for f in files {
        let path = dir.join(&f.name);
        std::fs::write(&path, &f.contents).map_err(|e| sbrnav::Error::io(&path, e))?;
    }
    Ok(())
}
