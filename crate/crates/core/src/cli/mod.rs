//! Scenario-driven runner behind the `freqlab` binary.

mod scenario;
mod sweep;
mod tasks;

pub use scenario::{
    AlphaName, AlphaPolicy, BoundSpec, C0Name, C0Spec, RadiusGrid, Scenario, SolutionSpec,
    Spacing, TaskSpec, Variant,
};
pub use sweep::{sweep, sweep_dir, sweep_file, Axis, SweepManifest, SweepPoint, SUMMARY_FILE};

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::Error;
use crate::quad::DEFAULT_LEVELS;

/// Environment variable supplying the default output directory.
pub const OUT_DIR_ENV: &str = "FREQLAB_OUT_DIR";

pub const MANIFEST_FILE: &str = "manifest.json";

const FALLBACK_OUT_DIR: &str = "freqlab-out";

/// Process exit codes.
pub mod exit {
    pub const PASS: i32 = 0;
    pub const FAIL: i32 = 1;
    pub const USAGE: i32 = 2;
    pub const INTERNAL: i32 = 3;
}

/// Failure of a whole run, split by whether the input or the computation is
/// at fault.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(Error),
    #[error("{0}")]
    Internal(Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => exit::USAGE,
            CliError::Internal(_) => exit::INTERNAL,
        }
    }

    pub fn error(&self) -> &Error {
        match self {
            CliError::Usage(e) | CliError::Internal(e) => e,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub levels: Option<u32>,
    /// Base directory; the run writes into `<out_dir>/<scenario name>`.
    pub out_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    /// Record wall-clock time in the manifest (makes it non-reproducible).
    pub timing: bool,
}

impl RunOptions {
    fn levels(&self, s: &Scenario) -> u32 {
        self.levels.or(s.levels).unwrap_or(DEFAULT_LEVELS)
    }

    fn base_dir(&self, s: &Scenario) -> PathBuf {
        self.out_dir
            .clone()
            .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
            .or_else(|| s.output.clone())
            .unwrap_or_else(|| PathBuf::from(FALLBACK_OUT_DIR))
    }

    pub fn run_dir(&self, s: &Scenario) -> PathBuf {
        self.base_dir(s).join(&s.name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Pass,
    Fail,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorInfo {
    pub code: String,
    pub message: String,
}

impl From<&Error> for ErrorInfo {
    fn from(e: &Error) -> Self {
        ErrorInfo {
            code: e.code().into(),
            message: e.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskEntry {
    pub index: usize,
    pub kind: String,
    pub label: String,
    pub verdict: Verdict,
    /// Paths relative to the run directory.
    pub outputs: Vec<String>,
    pub summary: Vec<Metric>,
    pub error: Option<ErrorInfo>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metric {
    pub name: String,
    pub value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub scenario: String,
    /// SHA-256 of the resolved scenario in canonical JSON form.
    pub scenario_sha256: String,
    pub tool_version: String,
    pub seed: u64,
    pub levels: u32,
    pub tasks: Vec<TaskEntry>,
    pub verdict: Verdict,
    pub wall_clock_ms: Option<f64>,
}

impl RunManifest {
    pub fn exit_code(&self) -> i32 {
        match self.verdict {
            Verdict::Pass => exit::PASS,
            Verdict::Fail => exit::FAIL,
            Verdict::Error => exit::INTERNAL,
        }
    }
}

pub(crate) fn scenario_hash(s: &Scenario) -> String {
    let canonical = serde_json::to_vec(s).expect("scenario serializes");
    Sha256::digest(&canonical).iter().map(|b| format!("{b:02x}")).collect()
}

fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::Internal(Error::Io(format!("{}: {e}", path.display()))))
}

/// Parse and validate without computing anything.
pub fn validate_file(path: &Path) -> Result<Scenario, CliError> {
    let s = Scenario::load(path).map_err(CliError::Usage)?;
    s.validate().map_err(CliError::Usage)?;
    Ok(s)
}

pub fn run_file(path: &Path, opts: &RunOptions) -> Result<RunManifest, CliError> {
    let s = validate_file(path)?;
    let dir = opts.run_dir(&s);
    run_in(&s, &dir, opts)
}

/// Validate `s`, execute its tasks in order and write artifacts plus
/// `manifest.json` into `dir`.
pub fn run_in(s: &Scenario, dir: &Path, opts: &RunOptions) -> Result<RunManifest, CliError> {
    let mut s = s.clone();
    if let Some(seed) = opts.seed {
        s.seed = seed;
    }
    s.validate().map_err(CliError::Usage)?;
    let levels = opts.levels(&s);
    if !(1..=9).contains(&levels) {
        return Err(CliError::Usage(Error::config("levels", format!("must lie in 1..=9, got {levels}"))));
    }
    let start = Instant::now();
    fs::create_dir_all(dir)
        .map_err(|e| CliError::Internal(Error::Io(format!("{}: {e}", dir.display()))))?;
    log::info!("{}: {} task(s), levels {levels}", s.name, s.tasks.len());

    let ctx = if s.tasks.is_empty() {
        None
    } else {
        Some(tasks::build_context(&s, levels))
    };
    let mut entries = Vec::with_capacity(s.tasks.len());
    for (i, task) in s.tasks.iter().enumerate() {
        let index = i + 1;
        let label = task.label();
        let stem = format!("{index:02}-{label}");
        let result = match ctx.as_ref().expect("context built when tasks exist") {
            Ok(c) => tasks::execute(c, task),
            Err(e) => Err(e.clone()),
        };
        let entry = match result {
            Ok(out) => {
                let mut outputs = Vec::new();
                for (ext, text) in &out.files {
                    let name = format!("{stem}.{ext}");
                    write(&dir.join(&name), text)?;
                    outputs.push(name);
                }
                TaskEntry {
                    index,
                    kind: task.kind().into(),
                    label,
                    verdict: if out.passed { Verdict::Pass } else { Verdict::Fail },
                    outputs,
                    summary: out
                        .summary
                        .into_iter()
                        .map(|(name, v)| Metric {
                            name,
                            value: v.is_finite().then_some(v),
                        })
                        .collect(),
                    error: None,
                }
            }
            Err(e) => {
                log::warn!("{}: task {index} ({label}) failed: {e}", s.name);
                TaskEntry {
                    index,
                    kind: task.kind().into(),
                    label,
                    verdict: Verdict::Error,
                    outputs: Vec::new(),
                    summary: Vec::new(),
                    error: Some((&e).into()),
                }
            }
        };
        log::info!("{}: task {index} {} -> {:?}", s.name, entry.label, entry.verdict);
        entries.push(entry);
    }
    let verdict = if entries.iter().any(|e| e.verdict == Verdict::Error) {
        Verdict::Error
    } else if entries.iter().any(|e| e.verdict == Verdict::Fail) {
        Verdict::Fail
    } else {
        Verdict::Pass
    };
    let manifest = RunManifest {
        scenario: s.name.clone(),
        scenario_sha256: scenario_hash(&s),
        tool_version: env!("CARGO_PKG_VERSION").into(),
        seed: s.seed,
        levels,
        tasks: entries,
        verdict,
        wall_clock_ms: opts.timing.then(|| start.elapsed().as_secs_f64() * 1e3),
    };
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    text.push('\n');
    write(&dir.join(MANIFEST_FILE), &text)?;
    Ok(manifest)
}
