//! Runs an experiment into a cached, content-addressed directory.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::{ExperimentConfig, CODE_VERSION};
use crate::error::{io_err, LabError, Result};
use crate::executor::PoolExecutor;
use crate::experiments::{execute, Check};
use crate::plot::plot_script;

pub const RECORD_FILE: &str = "record.json";
pub const CONFIG_FILE: &str = "config.txt";
pub const PLOT_FILE: &str = "plot.py";

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub workers: usize,
    pub use_cache: bool,
    pub out_dir: PathBuf,
}

/// What a run produced. Serialised as `record.json` in the run directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config_hash: String,
    pub code_version: String,
    pub kind: String,
    pub seed: u64,
    pub started_at_unix_ms: u64,
    pub finished_at_unix_ms: u64,
    /// Files in the run directory, in write order.
    pub outputs: Vec<String>,
    pub summary: BTreeMap<String, Value>,
    pub checks: Vec<Check>,
    /// All embedded checks passed.
    pub passed: bool,
    pub config: BTreeMap<String, String>,
    #[serde(skip)]
    pub cache_hit: bool,
    #[serde(skip)]
    pub run_dir: PathBuf,
}

impl RunRecord {
    pub fn summary_f64(&self, key: &str) -> Option<f64> {
        self.summary.get(key).and_then(Value::as_f64)
    }
}

fn now_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis() as u64).unwrap_or(0)
}

/// Directory of the run for `cfg` under `out_dir`: `<kind>-<first 12 hex digits of the hash>`.
pub fn run_dir(cfg: &ExperimentConfig, out_dir: &Path) -> PathBuf {
    out_dir.join(format!("{}-{}", cfg.kind, &cfg.hash()[..12]))
}

fn load_cached(dir: &Path, hash: &str) -> Option<RunRecord> {
    let text = fs::read_to_string(dir.join(RECORD_FILE)).ok()?;
    let mut rec: RunRecord = serde_json::from_str(&text).ok()?;
    if rec.config_hash != hash || rec.code_version != CODE_VERSION {
        return None;
    }
    rec.cache_hit = true;
    rec.run_dir = dir.to_path_buf();
    Some(rec)
}

/// Runs `cfg`, or returns the cached record of an identical earlier run.
///
/// Outputs are staged in a `.partial` sibling directory that is renamed into place on
/// success and removed on failure, so a run directory is always complete.
pub fn run(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<RunRecord> {
    let hash = cfg.hash();
    let dir = run_dir(cfg, &opts.out_dir);
    if opts.use_cache {
        if let Some(rec) = load_cached(&dir, &hash) {
            return Ok(rec);
        }
    }
    fs::create_dir_all(&opts.out_dir).map_err(io_err(&opts.out_dir))?;
    let name = dir.file_name().expect("run directory has a name").to_string_lossy().into_owned();
    let staging = opts.out_dir.join(format!(".{name}.partial"));
    if staging.exists() {
        fs::remove_dir_all(&staging).map_err(io_err(&staging))?;
    }
    fs::create_dir_all(&staging).map_err(io_err(&staging))?;
    match produce(cfg, opts, &hash, &staging) {
        Ok(mut rec) => {
            if dir.exists() {
                fs::remove_dir_all(&dir).map_err(io_err(&dir))?;
            }
            fs::rename(&staging, &dir).map_err(io_err(&dir))?;
            rec.run_dir = dir;
            Ok(rec)
        }
        Err(e) => {
            let _ = fs::remove_dir_all(&staging);
            Err(e)
        }
    }
}

fn produce(cfg: &ExperimentConfig, opts: &RunOptions, hash: &str, dir: &Path) -> Result<RunRecord> {
    let started = now_ms();
    let exec = PoolExecutor::new(opts.workers)?;
    let outcome = execute(cfg, &exec).map_err(|source| LabError::Experiment { kind: cfg.kind, source })?;
    let mut outputs = Vec::new();
    for t in &outcome.tables {
        t.write(dir)?;
        outputs.push(t.file.clone());
    }
    let script = dir.join(PLOT_FILE);
    fs::write(&script, plot_script(&outcome.tables)).map_err(io_err(&script))?;
    outputs.push(PLOT_FILE.into());
    let conf = dir.join(CONFIG_FILE);
    fs::write(&conf, cfg.canonical()).map_err(io_err(&conf))?;
    outputs.push(CONFIG_FILE.into());
    outputs.push(RECORD_FILE.into());
    let rec = RunRecord {
        config_hash: hash.into(),
        code_version: CODE_VERSION.into(),
        kind: cfg.kind.name().into(),
        seed: cfg.seed,
        started_at_unix_ms: started,
        finished_at_unix_ms: now_ms(),
        outputs,
        passed: outcome.checks.iter().all(|c| c.passed),
        summary: outcome.summary,
        checks: outcome.checks,
        config: cfg.resolved(),
        cache_hit: false,
        run_dir: PathBuf::new(),
    };
    let path = dir.join(RECORD_FILE);
    fs::write(&path, serde_json::to_string_pretty(&rec)?).map_err(io_err(&path))?;
    Ok(rec)
}
