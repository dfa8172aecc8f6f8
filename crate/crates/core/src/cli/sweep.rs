//! Cartesian parameter sweeps over a scenario.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{run_in, scenario_hash, CliError, RunManifest, RunOptions, Scenario, Verdict, MANIFEST_FILE};
use crate::error::Error;

pub const SUMMARY_FILE: &str = "summary.csv";

/// `path=v1,v2,...` where `path` is a dotted key into the scenario, with
/// numeric segments indexing arrays (`tasks.0.r1`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub name: String,
    pub values: Vec<String>,
}

impl FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        let (name, vals) = s
            .split_once('=')
            .ok_or_else(|| Error::config("axis", format!("expected name=v1,v2,..., got `{s}`")))?;
        let name = name.trim();
        let values: Vec<String> = vals.split(',').map(|v| v.trim().to_string()).collect();
        if name.is_empty() || values.iter().any(|v| v.is_empty()) {
            return Err(Error::config("axis", format!("empty name or value in `{s}`")));
        }
        Ok(Axis {
            name: name.into(),
            values,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub index: usize,
    pub values: Vec<String>,
    pub dir: String,
    pub verdict: Verdict,
    pub error: Option<super::ErrorInfo>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepManifest {
    pub scenario: String,
    pub scenario_sha256: String,
    pub tool_version: String,
    pub axes: Vec<Axis>,
    pub points: Vec<SweepPoint>,
    pub summary: String,
    pub verdict: Verdict,
}

impl SweepManifest {
    pub fn exit_code(&self) -> i32 {
        match self.verdict {
            Verdict::Pass => super::exit::PASS,
            Verdict::Fail => super::exit::FAIL,
            Verdict::Error => super::exit::INTERNAL,
        }
    }
}

fn literal(raw: &str, existing: Option<&toml::Value>) -> toml::Value {
    use toml::Value;
    match existing {
        Some(Value::Float(_)) => raw.parse::<f64>().map(Value::Float).unwrap_or_else(|_| Value::String(raw.into())),
        Some(Value::String(_)) => Value::String(raw.into()),
        _ => {
            if let Ok(i) = raw.parse::<i64>() {
                Value::Integer(i)
            } else if let Ok(f) = raw.parse::<f64>() {
                Value::Float(f)
            } else if let Ok(b) = raw.parse::<bool>() {
                Value::Boolean(b)
            } else {
                Value::String(raw.into())
            }
        }
    }
}

fn set_path(doc: &mut toml::Value, path: &str, raw: &str) -> Result<(), Error> {
    let bad = || Error::config("axis", format!("`{path}` does not name a scenario parameter"));
    let segments: Vec<&str> = path.split('.').collect();
    let (last, parents) = segments.split_last().ok_or_else(bad)?;
    let mut node = doc;
    for seg in parents {
        node = match node {
            toml::Value::Table(t) => t.get_mut(*seg).ok_or_else(bad)?,
            toml::Value::Array(a) => a.get_mut(seg.parse::<usize>().map_err(|_| bad())?).ok_or_else(bad)?,
            _ => return Err(bad()),
        };
    }
    match node {
        toml::Value::Table(t) => {
            let v = literal(raw, t.get(*last));
            t.insert((*last).to_string(), v);
        }
        toml::Value::Array(a) => {
            let i = last.parse::<usize>().map_err(|_| bad())?;
            let v = literal(raw, a.get(i));
            *a.get_mut(i).ok_or_else(bad)? = v;
        }
        _ => return Err(bad()),
    }
    Ok(())
}

fn points(axes: &[Axis]) -> Vec<Vec<String>> {
    let mut out = vec![Vec::new()];
    for axis in axes {
        out = out
            .into_iter()
            .flat_map(|p| {
                axis.values.iter().map(move |v| {
                    let mut q = p.clone();
                    q.push(v.clone());
                    q
                })
            })
            .collect();
    }
    out
}

fn num(v: Option<f64>) -> String {
    v.map_or_else(|| "nan".into(), |v| format!("{v:.16e}"))
}

pub fn sweep_file(path: &Path, axes: &[Axis], opts: &RunOptions, parallel: usize) -> Result<SweepManifest, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Usage(Error::Io(format!("{}: {e}", path.display()))))?;
    sweep(&text, axes, opts, parallel)
}

/// One sub-run per point of the cartesian product, written to
/// `<sweep dir>/point-NNN`, plus `summary.csv` with one row per point.
pub fn sweep(text: &str, axes: &[Axis], opts: &RunOptions, parallel: usize) -> Result<SweepManifest, CliError> {
    let base: toml::Value = toml::from_str(text).map_err(|e| CliError::Usage(Error::Parse(e.to_string())))?;
    let root = Scenario::from_toml(text).map_err(CliError::Usage)?;
    root.validate().map_err(CliError::Usage)?;
    if axes.is_empty() {
        return Err(CliError::Usage(Error::config("axis", "at least one axis is required")));
    }
    // Every point is built and validated before anything runs.
    let grid = points(axes);
    let scenarios = grid
        .iter()
        .map(|vals| {
            let mut doc = base.clone();
            for (axis, v) in axes.iter().zip(vals) {
                set_path(&mut doc, &axis.name, v)?;
            }
            let s: Scenario = doc.try_into().map_err(|e: toml::de::Error| Error::Parse(e.to_string()))?;
            s.validate()?;
            Ok(s)
        })
        .collect::<Result<Vec<_>, Error>>()
        .map_err(CliError::Usage)?;

    let dir = sweep_dir(opts, &root);
    let run_point = |(i, s): (usize, &Scenario)| -> (usize, Result<RunManifest, CliError>) {
        (i, run_in(s, &dir.join(format!("point-{i:03}")), opts))
    };
    let results: Vec<(usize, Result<RunManifest, CliError>)> = if parallel > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(parallel)
            .build()
            .map_err(|e| CliError::Internal(Error::Io(e.to_string())))?;
        pool.install(|| scenarios.par_iter().enumerate().map(run_point).collect())
    } else {
        scenarios.iter().enumerate().map(run_point).collect()
    };

    let mut columns: Vec<String> = Vec::new();
    if let Some(m) = results.iter().find_map(|(_, r)| r.as_ref().ok()) {
        for t in &m.tasks {
            for metric in &t.summary {
                columns.push(format!("{}.{}", t.label, metric.name));
            }
        }
    }
    let mut csv = String::from("point");
    for a in axes {
        let _ = write!(csv, ",{}", a.name);
    }
    csv.push_str(",verdict");
    for c in &columns {
        let _ = write!(csv, ",{c}");
    }
    csv.push('\n');

    let mut pts = Vec::with_capacity(results.len());
    for ((i, res), vals) in results.iter().zip(&grid) {
        let (verdict, metrics, error) = match res {
            Ok(m) => {
                let metrics: Vec<(String, Option<f64>)> = m
                    .tasks
                    .iter()
                    .flat_map(|t| t.summary.iter().map(move |x| (format!("{}.{}", t.label, x.name), x.value)))
                    .collect();
                (m.verdict, metrics, None)
            }
            Err(e) => (Verdict::Error, Vec::new(), Some(e.error().into())),
        };
        let _ = write!(csv, "{i}");
        for v in vals {
            let _ = write!(csv, ",{v}");
        }
        let _ = write!(csv, ",{}", verdict_name(verdict));
        for c in &columns {
            let v = metrics.iter().find(|(n, _)| n == c).and_then(|(_, v)| *v);
            let _ = write!(csv, ",{}", num(v));
        }
        csv.push('\n');
        pts.push(SweepPoint {
            index: *i,
            values: vals.clone(),
            dir: format!("point-{i:03}"),
            verdict,
            error,
        });
    }
    fs::create_dir_all(&dir).map_err(|e| CliError::Internal(e.into()))?;
    fs::write(dir.join(SUMMARY_FILE), &csv).map_err(|e| CliError::Internal(e.into()))?;
    let verdict = if pts.iter().any(|p| p.verdict == Verdict::Error) {
        Verdict::Error
    } else if pts.iter().any(|p| p.verdict == Verdict::Fail) {
        Verdict::Fail
    } else {
        Verdict::Pass
    };
    let manifest = SweepManifest {
        scenario: root.name.clone(),
        scenario_sha256: scenario_hash(&root),
        tool_version: env!("CARGO_PKG_VERSION").into(),
        axes: axes.to_vec(),
        points: pts,
        summary: SUMMARY_FILE.into(),
        verdict,
    };
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    text.push('\n');
    fs::write(dir.join(MANIFEST_FILE), text).map_err(|e| CliError::Internal(e.into()))?;
    Ok(manifest)
}

/// `<out_dir>/<name>-sweep`, kept apart from plain runs of the same scenario.
pub fn sweep_dir(opts: &RunOptions, s: &Scenario) -> std::path::PathBuf {
    let run = opts.run_dir(s);
    run.with_file_name(format!("{}-sweep", s.name))
}

fn verdict_name(v: Verdict) -> &'static str {
    match v {
        Verdict::Pass => "pass",
        Verdict::Fail => "fail",
        Verdict::Error => "error",
    }
}
