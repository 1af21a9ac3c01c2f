//! Flat INI-style experiment configuration.
//!
//! ```text
//! [experiment]
//! kind = clt-rate
//! seed = 7
//!
//! [grid]
//! n_grid = 2^4..2^10
//! ```
//!
//! Every key has a documented default for the experiment kinds that use it, except
//! `kind` and `seed`, which are mandatory. Parsing reports every problem in the file,
//! not just the first.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use limitlab_core::driver::ToralAutomorphism;
use sha2::{Digest, Sha256};

/// Version string mixed into every cache key.
pub const CODE_VERSION: &str = concat!("limitlab-", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ExperimentKind {
    MetricSelftest,
    CltRate,
    Coboundary,
    Decorrelation,
    CltCovariance,
    AveragingRate,
    LpScaling,
    ApproximantGap,
    Gronwall,
    SigmaConsistency,
    SpecialFlow,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 11] = [
        Self::MetricSelftest,
        Self::CltRate,
        Self::Coboundary,
        Self::Decorrelation,
        Self::CltCovariance,
        Self::AveragingRate,
        Self::LpScaling,
        Self::ApproximantGap,
        Self::Gronwall,
        Self::SigmaConsistency,
        Self::SpecialFlow,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::MetricSelftest => "metric-selftest",
            Self::CltRate => "clt-rate",
            Self::Coboundary => "coboundary",
            Self::Decorrelation => "decorrelation",
            Self::CltCovariance => "clt-covariance",
            Self::AveragingRate => "averaging-rate",
            Self::LpScaling => "lp-scaling",
            Self::ApproximantGap => "approximant-gap",
            Self::Gronwall => "gronwall",
            Self::SigmaConsistency => "sigma-consistency",
            Self::SpecialFlow => "special-flow",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            Self::MetricSelftest => "Prokhorov oracle equivalence, BL sandwich and Ky Fan coupling suites",
            Self::CltRate => "Prokhorov distance of S_n/√n from N(0, D(f)) across n, with log-log fit",
            Self::Coboundary => "n·Var and Prokhorov collapse for a coboundary observable",
            Self::Decorrelation => "lagged covariance norms and geometric-decay fit",
            Self::CltCovariance => "empirical Cov(S_n/√n) against the lag-series estimate of D(f)",
            Self::AveragingRate => "Prokhorov distance of e_s/√ε from N(0, Σ_F²) across ε",
            Self::LpScaling => "L^p norm of sup_t |e_t| across ε (raw and |ln ε|-normalized fits)",
            Self::ApproximantGap => "L^p gap between e_t/√ε and its linearisation y_t across ε",
            Self::Gronwall => "pathwise Gronwall bounds on every trajectory",
            Self::SigmaConsistency => "lag-series Σ_F² against the direct covariance of y_1 at several N",
            Self::SpecialFlow => "suspension-flow reduction gap across ε",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.iter().copied().find(|k| k.name() == s)
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy)]
enum Ty {
    Kind,
    Seed,
    Path,
    Choice(&'static [&'static str]),
    Count,
    Real,
    CountGrid,
    EpsGrid,
    Reals,
    Ints,
}

struct Key {
    section: &'static str,
    name: &'static str,
    ty: Ty,
}

const MAPS: &[&str] = &["cat", "iid", "toral"];
const OBSERVABLES: &[&str] = &[
    "default-pair",
    "sin-first",
    "cos-first",
    "cusp",
    "tent",
    "zero",
    "iid-gaussian",
    "iid-rademacher",
    "iid-exponential",
    "iid-bernoulli",
];
const PARTNERS: &[&str] = &["same", "default-pair", "sin-first", "cos-first", "cusp", "tent", "zero"];
const SYSTEMS: &[&str] = &["default", "coupled", "zero"];

const KEYS: &[Key] = &[
    Key { section: "experiment", name: "kind", ty: Ty::Kind },
    Key { section: "experiment", name: "seed", ty: Ty::Seed },
    Key { section: "experiment", name: "output", ty: Ty::Path },
    Key { section: "driver", name: "map", ty: Ty::Choice(MAPS) },
    Key { section: "driver", name: "matrix", ty: Ty::Ints },
    Key { section: "driver", name: "roof_amplitude", ty: Ty::Real },
    Key { section: "observable", name: "kind", ty: Ty::Choice(OBSERVABLES) },
    Key { section: "observable", name: "partner", ty: Ty::Choice(PARTNERS) },
    Key { section: "observable", name: "eta", ty: Ty::Real },
    Key { section: "observable", name: "bernoulli_p", ty: Ty::Real },
    Key { section: "system", name: "kind", ty: Ty::Choice(SYSTEMS) },
    Key { section: "system", name: "x0", ty: Ty::Reals },
    Key { section: "system", name: "t0", ty: Ty::Real },
    Key { section: "system", name: "s", ty: Ty::Real },
    Key { section: "system", name: "substeps", ty: Ty::Count },
    Key { section: "system", name: "quadrature", ty: Ty::Count },
    Key { section: "system", name: "s_nodes", ty: Ty::Count },
    Key { section: "grid", name: "n_grid", ty: Ty::CountGrid },
    Key { section: "grid", name: "epsilon_grid", ty: Ty::EpsGrid },
    Key { section: "grid", name: "sigma_n_grid", ty: Ty::CountGrid },
    Key { section: "grid", name: "n", ty: Ty::Count },
    Key { section: "grid", name: "n_max", ty: Ty::Count },
    Key { section: "ensemble", name: "ensemble", ty: Ty::Count },
    Key { section: "ensemble", name: "gaussian_m", ty: Ty::Count },
    Key { section: "ensemble", name: "samples", ty: Ty::Count },
    Key { section: "ensemble", name: "covariance_samples", ty: Ty::Count },
    Key { section: "ensemble", name: "lag_cap", ty: Ty::Count },
    Key { section: "ensemble", name: "p_list", ty: Ty::Reals },
    Key { section: "ensemble", name: "sigma_n", ty: Ty::Count },
    Key { section: "ensemble", name: "sigma_samples", ty: Ty::Count },
    Key { section: "ensemble", name: "prokhorov_tol", ty: Ty::Real },
    Key { section: "ensemble", name: "oracle_pairs", ty: Ty::Count },
    Key { section: "ensemble", name: "sandwich_pairs", ty: Ty::Count },
    Key { section: "ensemble", name: "coupling_pairs", ty: Ty::Count },
    Key { section: "ensemble", name: "couplings", ty: Ty::Count },
    Key { section: "ensemble", name: "max_atoms", ty: Ty::Count },
];

const SECTIONS: &[&str] = &["experiment", "driver", "observable", "system", "grid", "ensemble"];

/// Keys used by `kind` (as `section.key`) with their defaults. `None` means the key is
/// optional with no value, or (for `kind`/`seed`) mandatory.
fn schema(kind: ExperimentKind) -> Vec<(&'static str, Option<&'static str>)> {
    use ExperimentKind::*;
    let mut v: Vec<(&'static str, Option<&'static str>)> =
        vec![("experiment.kind", None), ("experiment.seed", None), ("experiment.output", None)];
    let driver = [("driver.map", Some("cat")), ("driver.matrix", None)];
    let system = |v: &mut Vec<_>, kind_default: &'static str| {
        v.extend([
            ("system.kind", Some(kind_default)),
            ("system.x0", Some("1.0 -0.5")),
            ("system.t0", Some("1")),
            ("system.substeps", Some("4")),
            ("system.quadrature", Some("64")),
        ]);
    };
    match kind {
        MetricSelftest => v.extend([
            ("ensemble.oracle_pairs", Some("500")),
            ("ensemble.sandwich_pairs", Some("1000")),
            ("ensemble.coupling_pairs", Some("200")),
            ("ensemble.couplings", Some("20")),
            ("ensemble.max_atoms", Some("6")),
        ]),
        CltRate => {
            v.extend(driver);
            v.extend([
                ("observable.kind", Some("default-pair")),
                ("observable.eta", Some("0.5")),
                ("observable.bernoulli_p", Some("0.02")),
                ("grid.n_grid", Some("2^4..2^10")),
                ("ensemble.ensemble", Some("2000")),
                ("ensemble.gaussian_m", Some("200000")),
                ("ensemble.covariance_samples", Some("100000")),
                ("ensemble.lag_cap", Some("40")),
                ("ensemble.prokhorov_tol", Some("1e-4")),
            ]);
        }
        Coboundary => {
            v.extend(driver);
            v.extend([
                ("observable.kind", Some("sin-first")),
                ("grid.n_grid", Some("2^4..2^10")),
                ("ensemble.ensemble", Some("2000")),
                ("ensemble.covariance_samples", Some("1000000")),
                ("ensemble.lag_cap", Some("40")),
            ]);
        }
        Decorrelation => {
            v.extend(driver);
            v.extend([
                ("observable.kind", Some("cusp")),
                ("observable.partner", Some("same")),
                ("observable.eta", Some("0.5")),
                ("grid.n_max", Some("12")),
                ("ensemble.samples", Some("1000000")),
            ]);
        }
        CltCovariance => {
            v.extend(driver);
            v.extend([
                ("observable.kind", Some("default-pair")),
                ("observable.eta", Some("0.5")),
                ("grid.n", Some("16384")),
                ("ensemble.samples", Some("20000")),
                ("ensemble.covariance_samples", Some("1000000")),
                ("ensemble.lag_cap", Some("40")),
            ]);
        }
        AveragingRate => {
            v.extend(driver);
            system(&mut v, "default");
            v.extend([
                ("system.s", Some("1")),
                ("grid.epsilon_grid", Some("2^-4..2^-9")),
                ("ensemble.ensemble", Some("2000")),
                ("ensemble.gaussian_m", Some("200000")),
                ("ensemble.sigma_n", Some("256")),
                ("ensemble.sigma_samples", Some("2000")),
                ("ensemble.lag_cap", Some("40")),
                ("ensemble.prokhorov_tol", Some("1e-4")),
            ]);
        }
        LpScaling => {
            v.extend(driver);
            system(&mut v, "default");
            v.extend([
                ("grid.epsilon_grid", Some("2^-4..2^-9")),
                ("ensemble.ensemble", Some("1000")),
                ("ensemble.p_list", Some("2")),
            ]);
        }
        ApproximantGap => {
            v.extend(driver);
            system(&mut v, "default");
            v.extend([
                ("grid.epsilon_grid", Some("2^-4..2^-9")),
                ("ensemble.ensemble", Some("1000")),
                ("ensemble.p_list", Some("2 4")),
            ]);
        }
        Gronwall => {
            v.extend(driver);
            system(&mut v, "default");
            v.extend([("grid.epsilon_grid", Some("2^-4..2^-8")), ("ensemble.ensemble", Some("2000"))]);
        }
        SigmaConsistency => {
            v.extend(driver);
            v.extend([
                ("system.kind", Some("default")),
                ("system.x0", Some("1.0 -0.5")),
                ("system.quadrature", Some("64")),
                ("grid.sigma_n_grid", Some("32 64 256")),
                ("ensemble.samples", Some("5000")),
                ("ensemble.lag_cap", Some("40")),
            ]);
        }
        SpecialFlow => {
            v.extend(driver);
            v.extend([
                ("driver.roof_amplitude", Some("0.3")),
                ("system.x0", Some("1.0 -0.5")),
                ("system.t0", Some("1")),
                ("system.substeps", Some("4")),
                ("system.quadrature", Some("64")),
                ("system.s_nodes", Some("16")),
                ("grid.epsilon_grid", Some("2^-4..2^-8")),
                ("ensemble.ensemble", Some("200")),
            ]);
        }
    }
    v
}

/// One problem found while parsing a configuration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigIssue {
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

/// Every problem found in a configuration file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigErrors(pub Vec<ConfigIssue>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} configuration error(s):", self.0.len())?;
        for issue in &self.0 {
            writeln!(f, "  {issue}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigErrors {}

#[derive(Debug, Clone, PartialEq)]
enum Value {
    Text(String),
    Int(u64),
    Real(f64),
    Counts(Vec<usize>),
    Reals(Vec<f64>),
    Ints(Vec<i64>),
}

fn render_list<T: fmt::Display>(xs: &[T]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

impl Value {
    /// Canonical text: numbers in shortest round-trip form, lists comma-separated.
    fn canonical(&self) -> String {
        match self {
            Value::Text(s) => s.clone(),
            Value::Int(v) => v.to_string(),
            Value::Real(v) => v.to_string(),
            Value::Counts(v) => render_list(v),
            Value::Reals(v) => render_list(v),
            Value::Ints(v) => render_list(v),
        }
    }
}

fn power_of_two(tok: &str) -> Option<f64> {
    let e = tok.strip_prefix("2^")?.parse::<i32>().ok()?;
    Some(2f64.powi(e))
}

fn parse_real(tok: &str) -> Result<f64, String> {
    if let Some(v) = power_of_two(tok) {
        return Ok(v);
    }
    tok.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| format!("`{tok}` is not a number"))
}

fn tokens(raw: &str) -> Vec<&str> {
    raw.split(|c: char| c == ',' || c.is_whitespace()).filter(|t| !t.is_empty()).collect()
}

/// Numbers, `2^k` powers, or `2^a..2^b` ranges of consecutive powers of two.
fn parse_grid(raw: &str) -> Result<Vec<f64>, String> {
    let mut out = Vec::new();
    for tok in tokens(raw) {
        if let Some((a, b)) = tok.split_once("..") {
            let exp = |s: &str| s.strip_prefix("2^").and_then(|e| e.parse::<i32>().ok());
            let (Some(a), Some(b)) = (exp(a), exp(b)) else {
                return Err(format!("range `{tok}` must have the form 2^a..2^b"));
            };
            let step = if b >= a { 1 } else { -1 };
            let mut e = a;
            loop {
                out.push(2f64.powi(e));
                if e == b {
                    break;
                }
                e += step;
            }
        } else {
            out.push(parse_real(tok)?);
        }
    }
    if out.is_empty() {
        return Err("grid is empty".into());
    }
    Ok(out)
}

fn parse_value(ty: Ty, raw: &str) -> Result<Value, String> {
    match ty {
        Ty::Kind => ExperimentKind::parse(raw).map(|k| Value::Text(k.name().into())).ok_or_else(|| {
            let names: Vec<&str> = ExperimentKind::ALL.iter().map(|k| k.name()).collect();
            format!("unknown experiment kind `{raw}` (expected one of: {})", names.join(", "))
        }),
        Ty::Seed => raw.parse::<u64>().map(Value::Int).map_err(|_| format!("seed `{raw}` is not a non-negative integer")),
        Ty::Path => Ok(Value::Text(raw.into())),
        Ty::Choice(options) => {
            if options.contains(&raw) {
                Ok(Value::Text(raw.into()))
            } else {
                Err(format!("`{raw}` is not one of: {}", options.join(", ")))
            }
        }
        Ty::Count => match power_of_two(raw) {
            Some(v) if v >= 1.0 && v.fract() == 0.0 => Ok(Value::Int(v as u64)),
            _ => match raw.parse::<u64>() {
                Ok(v) if v > 0 => Ok(Value::Int(v)),
                _ => Err(format!("`{raw}` is not a positive integer")),
            },
        },
        Ty::Real => match parse_real(raw)? {
            v if v > 0.0 => Ok(Value::Real(v)),
            v => Err(format!("`{v}` must be positive")),
        },
        Ty::CountGrid => {
            let g = parse_grid(raw)?;
            if g.iter().any(|v| *v < 1.0 || v.fract() != 0.0 || *v > u32::MAX as f64) {
                return Err("grid entries must be positive integers".into());
            }
            if g.windows(2).any(|w| w[1] <= w[0]) {
                return Err("grid must be strictly increasing".into());
            }
            Ok(Value::Counts(g.iter().map(|v| *v as usize).collect()))
        }
        Ty::EpsGrid => {
            let g = parse_grid(raw)?;
            if g.iter().any(|v| *v <= 0.0) {
                return Err("grid entries must be positive".into());
            }
            if g.windows(2).any(|w| w[1] >= w[0]) {
                return Err("grid must be strictly decreasing".into());
            }
            if g.len() < 3 {
                return Err("grid needs at least 3 entries".into());
            }
            Ok(Value::Reals(g))
        }
        Ty::Reals => {
            let v = tokens(raw).into_iter().map(parse_real).collect::<Result<Vec<_>, _>>()?;
            if v.is_empty() {
                return Err("list is empty".into());
            }
            Ok(Value::Reals(v))
        }
        Ty::Ints => tokens(raw)
            .into_iter()
            .map(|t| t.parse::<i64>().map_err(|_| format!("`{t}` is not an integer")))
            .collect::<Result<Vec<_>, _>>()
            .map(Value::Ints),
    }
}

fn key_spec(full: &str) -> Option<&'static Key> {
    KEYS.iter().find(|k| format!("{}.{}", k.section, k.name) == full)
}

fn nearest<'a>(word: &str, candidates: impl Iterator<Item = &'a str>) -> Option<&'a str> {
    candidates
        .map(|c| (strsim::levenshtein(word, c), c))
        .filter(|(d, c)| *d <= 3.max(c.len() / 3))
        .min_by_key(|(d, _)| *d)
        .map(|(_, c)| c)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MapKind {
    Cat,
    Iid,
    Toral,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DriverSpec {
    pub map: MapKind,
    /// Row-major integer matrix for `map = toral`.
    pub matrix: Option<Vec<i64>>,
    pub roof_amplitude: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ObservableKind {
    DefaultPair,
    SinFirst,
    CosFirst,
    Cusp,
    Tent,
    Zero,
    IidGaussian,
    IidRademacher,
    IidExponential,
    IidBernoulli,
}

impl ObservableKind {
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "default-pair" => Self::DefaultPair,
            "sin-first" => Self::SinFirst,
            "cos-first" => Self::CosFirst,
            "cusp" => Self::Cusp,
            "tent" => Self::Tent,
            "zero" => Self::Zero,
            "iid-gaussian" => Self::IidGaussian,
            "iid-rademacher" => Self::IidRademacher,
            "iid-exponential" => Self::IidExponential,
            "iid-bernoulli" => Self::IidBernoulli,
            _ => return None,
        })
    }

    pub fn is_iid_summand(self) -> bool {
        matches!(self, Self::IidGaussian | Self::IidRademacher | Self::IidExponential | Self::IidBernoulli)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObservableSpec {
    pub kind: ObservableKind,
    /// Second observable of a decorrelation profile; `None` means the same as `kind`.
    pub partner: Option<ObservableKind>,
    pub eta: f64,
    pub bernoulli_p: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SystemKind {
    Default,
    Coupled,
    Zero,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemSpec {
    pub kind: SystemKind,
    pub x0: Vec<f64>,
    pub t0: f64,
    pub s: f64,
    pub substeps: usize,
    pub quadrature: usize,
    pub s_nodes: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub n_grid: Vec<usize>,
    pub epsilon_grid: Vec<f64>,
    pub sigma_n_grid: Vec<usize>,
    pub n: usize,
    pub n_max: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleSpec {
    pub ensemble: usize,
    pub gaussian_m: usize,
    pub samples: usize,
    pub covariance_samples: usize,
    pub lag_cap: usize,
    pub p_list: Vec<f64>,
    pub sigma_n: usize,
    pub sigma_samples: usize,
    pub prokhorov_tol: f64,
    pub oracle_pairs: usize,
    pub sandwich_pairs: usize,
    pub coupling_pairs: usize,
    pub couplings: usize,
    pub max_atoms: usize,
}

/// A validated experiment description with every default filled in.
///
/// Fields not used by `kind` hold neutral placeholders and do not enter the cache key.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub seed: u64,
    /// Output directory requested by the file (overridden by `--out`).
    pub output: Option<PathBuf>,
    pub driver: DriverSpec,
    pub observable: ObservableSpec,
    pub system: SystemSpec,
    pub grid: GridSpec,
    pub ensemble: EnsembleSpec,
    resolved: BTreeMap<String, Value>,
}

impl ExperimentConfig {
    /// Default configuration of `kind` with the given seed.
    pub fn defaults(kind: ExperimentKind, seed: u64) -> Self {
        parse_config(&format!("[experiment]\nkind = {kind}\nseed = {seed}\n")).expect("defaults are valid")
    }

    /// Replaces the seed (the `--seed` override).
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.resolved.insert("experiment.seed".into(), Value::Int(seed));
        self
    }

    /// Every key the experiment uses, in `section.key = value` form, sorted, followed by
    /// the code version. The output directory is not part of it.
    pub fn canonical(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.resolved {
            if k != "experiment.output" {
                out.push_str(&format!("{k}={}\n", v.canonical()));
            }
        }
        out.push_str(&format!("code_version={CODE_VERSION}\n"));
        out
    }

    /// SHA-256 of [`canonical`](Self::canonical), hex-encoded.
    pub fn hash(&self) -> String {
        Sha256::digest(self.canonical().as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Resolved keys and canonical values (for records and diagnostics).
    pub fn resolved(&self) -> BTreeMap<String, String> {
        self.resolved.iter().map(|(k, v)| (k.clone(), v.canonical())).collect()
    }
}

/// Parses and validates a configuration, reporting every problem found.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigErrors> {
    parse_config_with_seed(text, None)
}

/// [`parse_config`] with the seed replaced by `seed` when given (the `--seed` flag). The
/// file may then omit its own seed.
pub fn parse_config_with_seed(text: &str, seed: Option<u64>) -> Result<ExperimentConfig, ConfigErrors> {
    let mut issues = Vec::new();
    let mut raw: BTreeMap<String, (String, usize)> = BTreeMap::new();
    let mut section: Option<String> = None;
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        let mut line = line.trim();
        if let Some(pos) = line.find(" #").or_else(|| line.find("\t#")) {
            line = line[..pos].trim_end();
        }
        if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let Some(name) = rest.strip_suffix(']') else {
                issues.push(ConfigIssue { line: Some(lineno), message: format!("malformed section header `{line}`") });
                continue;
            };
            let name = name.trim();
            if !SECTIONS.contains(&name) {
                let hint = nearest(name, SECTIONS.iter().copied()).map(|s| format!("; did you mean `[{s}]`?")).unwrap_or_default();
                issues.push(ConfigIssue { line: Some(lineno), message: format!("unknown section `[{name}]`{hint}") });
            }
            section = Some(name.to_string());
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            issues.push(ConfigIssue { line: Some(lineno), message: format!("expected `key = value`, found `{line}`") });
            continue;
        };
        let (key, value) = (key.trim(), value.trim());
        let Some(sec) = section.clone() else {
            issues.push(ConfigIssue { line: Some(lineno), message: format!("key `{key}` appears before any [section] header") });
            continue;
        };
        if !SECTIONS.contains(&sec.as_str()) {
            continue;
        }
        let full = format!("{sec}.{key}");
        if key_spec(&full).is_none() {
            let in_section = KEYS.iter().filter(|k| k.section == sec).map(|k| k.name);
            let suggestion = nearest(key, in_section).map(|s| (s, sec.as_str())).or_else(|| {
                let s = nearest(key, KEYS.iter().map(|k| k.name))?;
                KEYS.iter().find(|k| k.name == s).map(|k| (s, k.section))
            });
            let message = match suggestion {
                Some((s, owner)) => format!("unknown key `{key}` in [{sec}]; did you mean `{s}` (in [{owner}])?"),
                None => format!("unknown key `{key}` in [{sec}]"),
            };
            issues.push(ConfigIssue { line: Some(lineno), message });
            continue;
        }
        if raw.insert(full.clone(), (value.to_string(), lineno)).is_some() {
            issues.push(ConfigIssue { line: Some(lineno), message: format!("duplicate key `{key}` in [{sec}]") });
        }
    }

    if let Some(seed) = seed {
        let line = raw.get("experiment.seed").map_or(0, |v| v.1);
        raw.insert("experiment.seed".into(), (seed.to_string(), line));
    }
    if !raw.contains_key("experiment.seed") {
        issues.push(ConfigIssue { line: None, message: "seed is required".into() });
    }
    let kind = match raw.get("experiment.kind") {
        None => {
            issues.push(ConfigIssue { line: None, message: "experiment kind is required ([experiment] kind = ...)".into() });
            None
        }
        Some((v, line)) => match ExperimentKind::parse(v) {
            Some(k) => Some(k),
            None => {
                let names = ExperimentKind::ALL.iter().map(|k| k.name());
                let hint = nearest(v, names).map(|s| format!("; did you mean `{s}`?")).unwrap_or_default();
                issues.push(ConfigIssue { line: Some(*line), message: format!("unknown experiment kind `{v}`{hint}") });
                None
            }
        },
    };
    let Some(kind) = kind else {
        return Err(ConfigErrors(issues));
    };

    let used = schema(kind);
    for (full, (_, line)) in &raw {
        if !used.iter().any(|(k, _)| k == full) {
            issues.push(ConfigIssue { line: Some(*line), message: format!("key `{full}` is not used by experiment kind `{kind}`") });
        }
    }
    let mut resolved = BTreeMap::new();
    for (full, default) in &used {
        let def = key_spec(full).expect("schema keys are declared");
        let (text, line) = match raw.get(*full) {
            Some((v, l)) => (v.clone(), Some(*l)),
            None => match default {
                Some(d) => (d.to_string(), None),
                None => continue,
            },
        };
        match parse_value(def.ty, &text) {
            Ok(v) => {
                resolved.insert(full.to_string(), v);
            }
            Err(e) => issues.push(ConfigIssue { line, message: format!("`{full}`: {e}") }),
        }
    }
    cross_check(kind, &resolved, &raw, &mut issues);
    if !issues.is_empty() {
        return Err(ConfigErrors(issues));
    }
    Ok(build(kind, resolved))
}

fn text<'a>(r: &'a BTreeMap<String, Value>, k: &str) -> Option<&'a str> {
    match r.get(k) {
        Some(Value::Text(s)) => Some(s),
        _ => None,
    }
}

fn int(r: &BTreeMap<String, Value>, k: &str, fallback: u64) -> u64 {
    match r.get(k) {
        Some(Value::Int(v)) => *v,
        _ => fallback,
    }
}

fn real(r: &BTreeMap<String, Value>, k: &str, fallback: f64) -> f64 {
    match r.get(k) {
        Some(Value::Real(v)) => *v,
        _ => fallback,
    }
}

fn reals(r: &BTreeMap<String, Value>, k: &str) -> Vec<f64> {
    match r.get(k) {
        Some(Value::Reals(v)) => v.clone(),
        _ => Vec::new(),
    }
}

fn counts(r: &BTreeMap<String, Value>, k: &str) -> Vec<usize> {
    match r.get(k) {
        Some(Value::Counts(v)) => v.clone(),
        _ => Vec::new(),
    }
}

fn cross_check(kind: ExperimentKind, r: &BTreeMap<String, Value>, raw: &BTreeMap<String, (String, usize)>, issues: &mut Vec<ConfigIssue>) {
    let line = |k: &str| raw.get(k).map(|(_, l)| *l);
    let map = text(r, "driver.map");
    let matrix = match r.get("driver.matrix") {
        Some(Value::Ints(m)) => Some(m.clone()),
        _ => None,
    };
    match (map, &matrix) {
        (Some("toral"), None) => issues.push(ConfigIssue { line: line("driver.map"), message: "`driver.map = toral` needs `driver.matrix`".into() }),
        (Some("toral"), Some(m)) => {
            let d = (m.len() as f64).sqrt().round() as usize;
            if d * d != m.len() {
                issues.push(ConfigIssue { line: line("driver.matrix"), message: format!("`driver.matrix` has {} entries, not a square count", m.len()) });
            } else if let Err(e) = ToralAutomorphism::new(d, m.clone()) {
                issues.push(ConfigIssue { line: line("driver.matrix"), message: format!("`driver.matrix`: {e}") });
            } else if !matches!(kind, ExperimentKind::CltRate | ExperimentKind::Coboundary | ExperimentKind::Decorrelation | ExperimentKind::CltCovariance)
                && d != 2
            {
                issues.push(ConfigIssue { line: line("driver.matrix"), message: format!("experiment `{kind}` needs a 2×2 matrix") });
            }
        }
        (Some(_), Some(_)) => issues.push(ConfigIssue { line: line("driver.matrix"), message: "`driver.matrix` only applies to `driver.map = toral`".into() }),
        _ => {}
    }
    let averaging = matches!(
        kind,
        ExperimentKind::AveragingRate
            | ExperimentKind::LpScaling
            | ExperimentKind::ApproximantGap
            | ExperimentKind::Gronwall
            | ExperimentKind::SigmaConsistency
            | ExperimentKind::SpecialFlow
    );
    if (averaging || kind == ExperimentKind::Coboundary) && map == Some("iid") {
        issues.push(ConfigIssue { line: line("driver.map"), message: format!("experiment `{kind}` needs a toral driver (`cat` or `toral`)") });
    }
    if let Some(obs) = text(r, "observable.kind").and_then(ObservableKind::parse) {
        if obs.is_iid_summand() && map != Some("iid") {
            issues.push(ConfigIssue { line: line("observable.kind"), message: "i.i.d. summand observables need `driver.map = iid`".into() });
        }
        if kind == ExperimentKind::Coboundary && obs.is_iid_summand() {
            issues.push(ConfigIssue { line: line("observable.kind"), message: "the coboundary experiment needs a torus observable".into() });
        }
        if let Some(m) = &matrix {
            let d = (m.len() as f64).sqrt().round() as usize;
            if d != 2 && matches!(obs, ObservableKind::DefaultPair) {
                issues.push(ConfigIssue { line: line("observable.kind"), message: "`default-pair` is defined on the 2-torus".into() });
            }
        }
    }
    if r.contains_key("system.x0") && reals(r, "system.x0").len() != 2 {
        issues.push(ConfigIssue { line: line("system.x0"), message: "`system.x0` needs 2 entries".into() });
    }
    if reals(r, "ensemble.p_list").iter().any(|p| *p < 1.0) {
        issues.push(ConfigIssue { line: line("ensemble.p_list"), message: "every p must be at least 1".into() });
    }
    if int(r, "system.quadrature", 64) < 4 {
        issues.push(ConfigIssue { line: line("system.quadrature"), message: "`system.quadrature` must be at least 4".into() });
    }
    if r.contains_key("grid.n_grid") && counts(r, "grid.n_grid").len() < 3 {
        issues.push(ConfigIssue { line: line("grid.n_grid"), message: "`grid.n_grid` needs at least 3 entries".into() });
    }
    if counts(r, "grid.sigma_n_grid").iter().any(|n| *n < 8) {
        issues.push(ConfigIssue { line: line("grid.sigma_n_grid"), message: "every N in `grid.sigma_n_grid` must be at least 8".into() });
    }
    let t0 = real(r, "system.t0", 1.0);
    if reals(r, "grid.epsilon_grid").first().is_some_and(|e| *e >= t0) {
        issues.push(ConfigIssue { line: line("grid.epsilon_grid"), message: "every ε must be smaller than `system.t0`".into() });
    }
    if kind == ExperimentKind::ApproximantGap && int(r, "ensemble.ensemble", 100) < 100 {
        issues.push(ConfigIssue { line: line("ensemble.ensemble"), message: "the approximant gap needs an ensemble of at least 100".into() });
    }
    if kind == ExperimentKind::CltRate && map == Some("iid") {
        if let Some(obs) = text(r, "observable.kind").and_then(ObservableKind::parse) {
            if !obs.is_iid_summand() {
                issues.push(ConfigIssue { line: line("observable.kind"), message: "`clt-rate` with the i.i.d. driver needs an `iid-*` summand".into() });
            }
        }
    }
    if real(r, "observable.bernoulli_p", 0.5) >= 1.0 {
        issues.push(ConfigIssue { line: line("observable.bernoulli_p"), message: "`observable.bernoulli_p` must lie in (0, 1)".into() });
    }
    if real(r, "observable.eta", 0.5) > 1.0 {
        issues.push(ConfigIssue { line: line("observable.eta"), message: "`observable.eta` must lie in (0, 1]".into() });
    }
}

fn build(kind: ExperimentKind, r: BTreeMap<String, Value>) -> ExperimentConfig {
    let map = match text(&r, "driver.map") {
        Some("iid") => MapKind::Iid,
        Some("toral") => MapKind::Toral,
        _ => MapKind::Cat,
    };
    let matrix = match r.get("driver.matrix") {
        Some(Value::Ints(m)) => Some(m.clone()),
        _ => None,
    };
    let system_kind = match text(&r, "system.kind") {
        Some("coupled") => SystemKind::Coupled,
        Some("zero") => SystemKind::Zero,
        _ => SystemKind::Default,
    };
    let usize_of = |k: &str, f: u64| int(&r, k, f) as usize;
    let mut x0 = reals(&r, "system.x0");
    if x0.is_empty() {
        x0 = vec![1.0, -0.5];
    }
    ExperimentConfig {
        kind,
        seed: int(&r, "experiment.seed", 0),
        output: text(&r, "experiment.output").map(PathBuf::from),
        driver: DriverSpec { map, matrix, roof_amplitude: real(&r, "driver.roof_amplitude", 0.3) },
        observable: ObservableSpec {
            kind: text(&r, "observable.kind").and_then(ObservableKind::parse).unwrap_or(ObservableKind::DefaultPair),
            partner: text(&r, "observable.partner").and_then(ObservableKind::parse),
            eta: real(&r, "observable.eta", 0.5),
            bernoulli_p: real(&r, "observable.bernoulli_p", 0.02),
        },
        system: SystemSpec {
            kind: system_kind,
            x0,
            t0: real(&r, "system.t0", 1.0),
            s: real(&r, "system.s", 1.0),
            substeps: usize_of("system.substeps", 4),
            quadrature: usize_of("system.quadrature", 64),
            s_nodes: usize_of("system.s_nodes", 16),
        },
        grid: GridSpec {
            n_grid: counts(&r, "grid.n_grid"),
            epsilon_grid: reals(&r, "grid.epsilon_grid"),
            sigma_n_grid: counts(&r, "grid.sigma_n_grid"),
            n: usize_of("grid.n", 16384),
            n_max: usize_of("grid.n_max", 12),
        },
        ensemble: EnsembleSpec {
            ensemble: usize_of("ensemble.ensemble", 1000),
            gaussian_m: usize_of("ensemble.gaussian_m", 200_000),
            samples: usize_of("ensemble.samples", 1000),
            covariance_samples: usize_of("ensemble.covariance_samples", 100_000),
            lag_cap: usize_of("ensemble.lag_cap", 40),
            p_list: {
                let p = reals(&r, "ensemble.p_list");
                if p.is_empty() {
                    vec![2.0]
                } else {
                    p
                }
            },
            sigma_n: usize_of("ensemble.sigma_n", 256),
            sigma_samples: usize_of("ensemble.sigma_samples", 2000),
            prokhorov_tol: real(&r, "ensemble.prokhorov_tol", 1e-4),
            oracle_pairs: usize_of("ensemble.oracle_pairs", 500),
            sandwich_pairs: usize_of("ensemble.sandwich_pairs", 1000),
            coupling_pairs: usize_of("ensemble.coupling_pairs", 200),
            couplings: usize_of("ensemble.couplings", 20),
            max_atoms: usize_of("ensemble.max_atoms", 6),
        },
        resolved: r,
    }
}

/// Human-readable list of every key with its section, for `list-experiments`.
pub fn documented_keys(kind: ExperimentKind) -> Vec<(String, Option<String>)> {
    schema(kind).into_iter().map(|(k, d)| (k.to_string(), d.map(str::to_string))).collect()
}
