use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use limitlab::config::{parse_config, parse_config_with_seed, ExperimentConfig, ExperimentKind, ObservableKind};
use limitlab::measure_io::{parse_measure, read_measure, write_measure};
use limitlab::runner::{run_dir, PLOT_FILE};
use limitlab::{run, LabError, RunOptions};
use limitlab_core::metrics::FiniteMeasure;

fn opts(out: &Path, workers: usize, use_cache: bool) -> RunOptions {
    RunOptions { workers, use_cache, out_dir: out.to_path_buf() }
}

/// Every CSV of a run directory, by file name.
fn csvs(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    for e in fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.extension().is_some_and(|x| x == "csv") {
            out.insert(p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap());
        }
    }
    out
}

fn small(kind: &str, extra: &str) -> ExperimentConfig {
    parse_config(&format!("[experiment]\nkind = {kind}\nseed = 11\n{extra}")).unwrap()
}

fn small_configs() -> Vec<ExperimentConfig> {
    vec![
        small("clt-rate", "[grid]\nn_grid = 2^4..2^6\n[ensemble]\nensemble = 200\ngaussian_m = 2000\ncovariance_samples = 2000\n"),
        small("coboundary", "[grid]\nn_grid = 2^4..2^6\n[ensemble]\nensemble = 200\ncovariance_samples = 2000\n"),
        small("decorrelation", "[grid]\nn_max = 4\n[ensemble]\nsamples = 5000\n"),
        small("clt-covariance", "[grid]\nn = 64\n[ensemble]\nsamples = 200\ncovariance_samples = 2000\n"),
        small(
            "averaging-rate",
            "[grid]\nepsilon_grid = 2^-4..2^-6\n[ensemble]\nensemble = 100\ngaussian_m = 2000\nsigma_n = 32\nsigma_samples = 200\n",
        ),
        small("lp-scaling", "[grid]\nepsilon_grid = 2^-4..2^-6\n[ensemble]\nensemble = 40\np_list = 1 2\n"),
        small("approximant-gap", "[grid]\nepsilon_grid = 2^-4..2^-6\n[ensemble]\nensemble = 100\n"),
        small("gronwall", "[grid]\nepsilon_grid = 2^-4..2^-6\n[ensemble]\nensemble = 40\n"),
        small("sigma-consistency", "[grid]\nsigma_n_grid = 8 16 32\n[ensemble]\nsamples = 200\n"),
        small("special-flow", "[grid]\nepsilon_grid = 2^-4..2^-6\n[ensemble]\nensemble = 20\n"),
    ]
}

#[test]
fn minimal_clt_rate_config_gets_documented_defaults() {
    let cfg = parse_config("[experiment]\nkind = clt-rate\nseed = 5\n").unwrap();
    assert_eq!(cfg.kind, ExperimentKind::CltRate);
    assert_eq!(cfg.seed, 5);
    assert_eq!(cfg.grid.n_grid, (4..=10).map(|k| 1usize << k).collect::<Vec<_>>());
    assert_eq!(cfg.ensemble.ensemble, 2000);
    assert_eq!(cfg.ensemble.gaussian_m, 200_000);
    assert_eq!(cfg.observable.kind, ObservableKind::DefaultPair);
    assert_eq!(cfg, ExperimentConfig::defaults(ExperimentKind::CltRate, 5));
}

#[test]
fn misspelled_key_names_the_nearest_valid_key() {
    let err = parse_config("[experiment]\nkind = lp-scaling\nseed = 1\n[grid]\nepsilon_gird = 2^-4..2^-6\n").unwrap_err();
    let text = err.to_string();
    assert!(text.contains("epsilon_gird") && text.contains("epsilon_grid"), "{text}");
}

#[test]
fn missing_seed_is_an_error() {
    let err = parse_config("[experiment]\nkind = gronwall\n").unwrap_err();
    assert!(err.0.iter().any(|i| i.message == "seed is required"), "{err}");
    // The command-line seed fills the gap and overrides a seed in the file.
    assert_eq!(parse_config_with_seed("[experiment]\nkind = gronwall\n", Some(9)).unwrap().seed, 9);
    assert_eq!(parse_config_with_seed("[experiment]\nkind = gronwall\nseed = 1\n", Some(9)).unwrap().seed, 9);
}

#[test]
fn malformed_grid_is_an_error() {
    let err = parse_config("[experiment]\nkind = gronwall\nseed = 1\n[grid]\nepsilon_grid = 2^-4..2^x\n").unwrap_err();
    assert!(err.to_string().contains("epsilon_grid"), "{err}");
    let err = parse_config("[experiment]\nkind = clt-rate\nseed = 1\n[grid]\nn_grid = 64 32 16\n").unwrap_err();
    assert!(err.to_string().contains("n_grid"), "{err}");
}

#[test]
fn every_error_is_reported() {
    let text = "[experiment]\nkind = clt-rate\n[grid]\nn_gird = 2^4..2^6\n[ensemble]\nensemble = 0\nfoo = 1\n";
    let err = parse_config(text).unwrap_err();
    assert!(err.0.len() >= 4, "{err}");
    let text = err.to_string();
    for needle in ["seed is required", "n_gird", "ensemble.ensemble", "foo"] {
        assert!(text.contains(needle), "missing `{needle}` in\n{text}");
    }
}

#[test]
fn outputs_do_not_depend_on_worker_count() {
    for cfg in small_configs() {
        let mut reference = None;
        for workers in [1, 2, 8] {
            let tmp = tempfile::tempdir().unwrap();
            let rec = run(&cfg, &opts(tmp.path(), workers, false)).unwrap();
            let files = csvs(&rec.run_dir);
            assert!(!files.is_empty());
            match &reference {
                None => reference = Some(files),
                Some(r) => assert_eq!(r, &files, "{} differs with {workers} workers", cfg.kind),
            }
        }
    }
}

#[test]
fn every_csv_has_its_documented_header() {
    let expected: &[(&str, &str)] = &[
        ("clt-rate/rates.csv", "n,pi_hat,pi_floor_flag,ensemble,gaussian_m,seed"),
        ("clt-rate/summary.csv", "slope,stderr,r2"),
        ("coboundary/coboundary.csv", "n,n_variance,pi_hat,ensemble,seed"),
        ("decorrelation/profile.csv", "lag,cov_norm,standard_error"),
        ("decorrelation/fit.csv", "delta,poly_degree,r2"),
        ("clt-covariance/covariance.csv", "entry,empirical,empirical_se,series,series_se"),
        ("averaging-rate/rates.csv", "epsilon,pi_hat,gaussian_m,seed"),
        ("lp-scaling/scaling.csv", "epsilon,ensemble,p,lp_value"),
        ("lp-scaling/summary.csv", "p,slope,stderr,r2"),
        ("approximant-gap/gap.csv", "epsilon,ensemble,p,lp_value"),
        ("gronwall/gronwall.csv", "epsilon,trajectories,passed,min_forward_slack,min_reverse_slack"),
        ("sigma-consistency/sigma.csv", "n,entry,sigma_f,sigma_f_se,direct,direct_se"),
        ("sigma-consistency/comparison.csv", "n,gap,worst_ratio,within_three_se"),
        ("special-flow/gap.csv", "epsilon,ensemble,p,lp_value"),
    ];
    let tmp = tempfile::tempdir().unwrap();
    let mut seen = BTreeMap::new();
    for cfg in small_configs() {
        let rec = run(&cfg, &opts(tmp.path(), 1, true)).unwrap();
        for (file, bytes) in csvs(&rec.run_dir) {
            let text = String::from_utf8(bytes).unwrap();
            seen.insert(format!("{}/{file}", cfg.kind), text.lines().next().unwrap().to_string());
        }
    }
    for (file, header) in expected {
        assert_eq!(seen.get(*file).map(String::as_str), Some(*header), "{file}");
    }
}

#[test]
fn second_identical_run_is_a_cache_hit() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small("gronwall", "[grid]\nepsilon_grid = 2^-4..2^-6\n[ensemble]\nensemble = 20\n");
    let first = run(&cfg, &opts(tmp.path(), 1, true)).unwrap();
    assert!(!first.cache_hit);
    let record = fs::read(first.run_dir.join("record.json")).unwrap();
    let second = run(&cfg, &opts(tmp.path(), 1, true)).unwrap();
    assert!(second.cache_hit);
    assert_eq!(second.started_at_unix_ms, first.started_at_unix_ms);
    assert_eq!(second.finished_at_unix_ms, first.finished_at_unix_ms);
    assert_eq!(fs::read(first.run_dir.join("record.json")).unwrap(), record);
    // A different seed is a different run.
    let other = run(&cfg.clone().with_seed(12), &opts(tmp.path(), 1, true)).unwrap();
    assert!(!other.cache_hit);
    assert_ne!(other.run_dir, first.run_dir);
    // Disabling the cache recomputes into the same directory.
    std::thread::sleep(std::time::Duration::from_millis(5));
    let fresh = run(&cfg, &opts(tmp.path(), 1, false)).unwrap();
    assert!(!fresh.cache_hit);
    assert!(fresh.started_at_unix_ms > first.started_at_unix_ms);
    assert_eq!(fresh.run_dir, first.run_dir);
    assert_eq!(csvs(&fresh.run_dir), csvs(&first.run_dir));
}

#[test]
fn failed_run_leaves_no_partial_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    // The last ε makes the integration grid too fine, so the experiment errors.
    let cfg = small("gronwall", "[grid]\nepsilon_grid = 2^-4 2^-5 2^-30\n[ensemble]\nensemble = 4\n");
    let err = run(&cfg, &opts(tmp.path(), 1, true)).unwrap_err();
    assert!(matches!(err, LabError::Experiment { kind: ExperimentKind::Gronwall, .. }), "{err}");
    assert!(err.to_string().contains("gronwall"));
    assert!(!run_dir(&cfg, tmp.path()).exists());
    assert_eq!(fs::read_dir(tmp.path()).unwrap().count(), 0);
}

#[test]
fn metric_selftest_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let rec = run(&ExperimentConfig::defaults(ExperimentKind::MetricSelftest, 1), &opts(tmp.path(), 2, true)).unwrap();
    assert_eq!(rec.checks.len(), 3);
    assert!(rec.passed, "{:?}", rec.checks);
}

#[test]
fn cli_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_limitlab");
    let tmp = tempfile::tempdir().unwrap();
    let status = |args: &[&str]| Command::new(bin).args(args).env("LIMITLAB_OUT", tmp.path()).output().unwrap();

    let out = status(&["selftest"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(fs::read_dir(tmp.path()).unwrap().count() == 1, "LIMITLAB_OUT is the default output directory");

    let bad = tmp.path().join("bad.ini");
    fs::write(&bad, "[experiment]\nkind = gronwall\n").unwrap();
    let out = status(&["run", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("seed is required"));

    let good = tmp.path().join("good.ini");
    fs::write(&good, "[experiment]\nkind = gronwall\n[grid]\nepsilon_grid = 2^-4..2^-6\n[ensemble]\nensemble = 8\n").unwrap();
    let explicit = tmp.path().join("explicit");
    let out = status(&["run", good.to_str().unwrap(), "--seed", "4", "--workers", "2", "--out", explicit.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(fs::read_dir(&explicit).unwrap().count(), 1);

    let out = status(&["list-experiments"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    for kind in ExperimentKind::ALL {
        assert!(text.contains(kind.name()));
    }
}

#[test]
fn plot_script_is_valid_python() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small("lp-scaling", "[grid]\nepsilon_grid = 2^-4..2^-6\n[ensemble]\nensemble = 10\np_list = 1 2\n");
    let rec = run(&cfg, &opts(tmp.path(), 1, true)).unwrap();
    let script: PathBuf = rec.run_dir.join(PLOT_FILE);
    let text = fs::read_to_string(&script).unwrap();
    assert!(text.contains("\"scaling.csv\""));
    match Command::new("python3").arg("-m").arg("py_compile").arg(&script).output() {
        Ok(out) => assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr)),
        Err(_) => eprintln!("python3 not available; syntax check skipped"),
    }
}

#[test]
fn measure_files_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let m = FiniteMeasure::new(2, vec![0.1, -0.2, 0.3, 0.4, 1.0 / 3.0, 0.0], vec![0.5, 0.25, 0.25]).unwrap();
    let path = tmp.path().join("m.csv");
    write_measure(&m, &path).unwrap();
    assert_eq!(fs::read_to_string(&path).unwrap().lines().next(), Some("x_1,x_2,weight"));
    let back = read_measure(&path).unwrap();
    assert_eq!(back.atoms(), m.atoms());
    assert_eq!(back.weights(), m.weights());
}

#[test]
fn measure_weights_are_renormalised_or_rejected() {
    let origin = Path::new("inline.csv");
    let m = parse_measure("x_1,weight\n0.0,0.5\n1.0,0.5000000000001\n", origin).unwrap();
    assert!((m.weights().iter().sum::<f64>() - 1.0).abs() < 1e-15);
    assert!(parse_measure("x_1,weight\n0.0,0.5\n1.0,0.6\n", origin).is_err());
    assert!(parse_measure("x_1,weight\n0.0,-0.5\n1.0,1.5\n", origin).is_err());
    assert!(parse_measure("y,weight\n0.0,1\n", origin).is_err());
}
