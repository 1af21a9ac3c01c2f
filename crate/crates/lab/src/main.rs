use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use limitlab::config::{documented_keys, parse_config_with_seed, ExperimentConfig, ExperimentKind};
use limitlab::{run, LabError, RunOptions, RunRecord};

/// Environment variable naming the default output directory.
const OUT_ENV: &str = "LIMITLAB_OUT";
const DEFAULT_OUT: &str = "limitlab-out";
/// Seed of `selftest` when `--seed` is not given.
const SELFTEST_SEED: u64 = 1;

#[derive(Parser)]
#[command(name = "limitlab", version, about = "Batch runner for limit-theorem experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Override the seed of the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: available parallelism). Outputs do not depend on it.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Recompute even when a cached run with the same configuration exists.
    #[arg(long, global = true)]
    no_cache: bool,
    /// Output directory (default: config `output`, then $LIMITLAB_OUT, then ./limitlab-out).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a configuration file.
    Run { config: PathBuf },
    /// Run the metric self-test suites with default sizes.
    Selftest,
    /// List experiment kinds with their keys and defaults.
    ListExperiments,
}

fn out_dir(cli: &Cli, cfg: &ExperimentConfig) -> PathBuf {
    cli.out
        .clone()
        .or_else(|| cfg.output.clone())
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
}

/// Prints to stdout, ignoring a closed pipe.
macro_rules! say {
    ($($arg:tt)*) => {{
        let _ = writeln!(std::io::stdout().lock(), $($arg)*);
    }};
}

fn report(rec: &RunRecord) {
    let origin = if rec.cache_hit { " (cached)" } else { "" };
    say!("{} {}{origin}", rec.kind, rec.run_dir.display());
    for (k, v) in &rec.summary {
        say!("  {k} = {v}");
    }
    for c in &rec.checks {
        say!("  [{}] {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
}

fn execute(cli: &Cli, cfg: ExperimentConfig) -> Result<bool, LabError> {
    let opts = RunOptions {
        workers: cli.workers.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get())),
        use_cache: !cli.no_cache,
        out_dir: out_dir(cli, &cfg),
    };
    let rec = run(&cfg, &opts)?;
    report(&rec);
    Ok(rec.passed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::ListExperiments => {
            for kind in ExperimentKind::ALL {
                say!("{kind}: {}", kind.description());
                for (key, default) in documented_keys(kind) {
                    match default {
                        Some(d) => say!("    {key} = {d}"),
                        None => say!("    {key}"),
                    }
                }
            }
            Ok(true)
        }
        Command::Selftest => {
            let cfg = ExperimentConfig::defaults(ExperimentKind::MetricSelftest, cli.seed.unwrap_or(SELFTEST_SEED));
            execute(&cli, cfg)
        }
        Command::Run { config } => match fs::read_to_string(config) {
            Err(e) => Err(LabError::Io { path: config.clone(), source: e }),
            Ok(text) => match parse_config_with_seed(&text, cli.seed) {
                Ok(cfg) => execute(&cli, cfg),
                Err(e) => Err(e.into()),
            },
        },
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
