//! Running a config end to end and recording what was written.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use rayon::prelude::*;

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::error::{CliError, CliResult};
use crate::experiments::{run_experiment, ExperimentOutput};

pub const TOOL_VERSION: &str = concat!("strip-lab ", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub config_hash: String,
    pub tool_version: String,
    pub wall_clock_seconds: f64,
    pub started_unix: u64,
    pub out_dir: PathBuf,
    /// Files per experiment, relative to `out_dir`.
    pub files: Vec<(String, Vec<String>)>,
    pub failed_criteria: Vec<u32>,
}

impl RunManifest {
    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "config_hash = {}", self.config_hash);
        let _ = writeln!(s, "tool_version = {}", self.tool_version);
        let _ = writeln!(s, "started_unix = {}", self.started_unix);
        let _ = writeln!(s, "wall_clock_seconds = {:.3}", self.wall_clock_seconds);
        let names: Vec<&str> = self.files.iter().map(|(n, _)| n.as_str()).collect();
        let _ = writeln!(s, "experiments = {}", names.join(", "));
        for (name, files) in &self.files {
            let _ = writeln!(s, "files.{name} = {}", files.join(", "));
        }
        let status = if self.failed_criteria.is_empty() { "ok" } else { "acceptance-failed" };
        let _ = writeln!(s, "status = {status}");
        if !self.failed_criteria.is_empty() {
            let ids: Vec<String> = self.failed_criteria.iter().map(u32::to_string).collect();
            let _ = writeln!(s, "failed_criteria = {}", ids.join(", "));
        }
        s
    }
}

fn write(path: &Path, contents: &str) -> CliResult<()> {
    std::fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

/// Runs every experiment in `cfg` and writes outputs plus `manifest.txt`.
///
/// Batch experiments run in parallel, each in its own subdirectory. A
/// failing acceptance criterion still writes everything, then returns
/// `CliError::Acceptance`.
pub fn run(mut cfg: ExperimentConfig, opts: &RunOptions) -> CliResult<RunManifest> {
    if let Some(seed) = opts.seed {
        cfg.numerics.seed = seed;
    }
    cfg.validate()?;
    let start = Instant::now();
    let started_unix = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let out_dir = cfg.output_dir(opts.out.as_deref());
    let kinds = cfg.experiment.kind.kinds();
    let results: Vec<(ExperimentKind, CliResult<ExperimentOutput>)> = kinds
        .par_iter()
        .map(|&k| (k, run_experiment(&cfg, k)))
        .collect();

    let mut files = Vec::new();
    let mut failed = Vec::new();
    for (kind, result) in results {
        let output = result?;
        let name = match (&cfg.experiment.name, kinds.len()) {
            (Some(n), 1) => n.clone(),
            (Some(n), _) => format!("{n}-{}", kind.name()),
            (None, _) => kind.name().to_string(),
        };
        let dir = out_dir.join(&name);
        std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
        let mut written = Vec::new();
        for a in &output.artifacts {
            write(&dir.join(&a.name), &a.contents)?;
            written.push(format!("{name}/{}", a.name));
        }
        failed.extend(output.failed);
        files.push((name, written));
    }
    let manifest = RunManifest {
        config_hash: cfg.hash(),
        tool_version: TOOL_VERSION.into(),
        wall_clock_seconds: start.elapsed().as_secs_f64(),
        started_unix,
        out_dir: out_dir.clone(),
        files,
        failed_criteria: failed,
    };
    write(&out_dir.join("manifest.txt"), &manifest.render())?;
    if !manifest.failed_criteria.is_empty() {
        let ids: Vec<String> = manifest.failed_criteria.iter().map(u32::to_string).collect();
        return Err(CliError::Acceptance(format!("criteria {} failed", ids.join(", "))));
    }
    Ok(manifest)
}
