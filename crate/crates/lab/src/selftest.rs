//! Randomised suites for the metric layer: flow solver against the subset oracle, the
//! BL/Prokhorov sandwich and the Ky Fan coupling bound.

use limitlab_core::metrics::{
    bounded_lipschitz, coupling_kyfan_upper, ky_fan, prokhorov, prokhorov_oracle, CoupledSample, FiniteMeasure,
};
use limitlab_core::rng::{domain, stream};
use limitlab_core::Executor;
use rand::seq::SliceRandom;
use rand::Rng;

/// Bisection tolerance used by every suite.
pub const METRIC_TOL: f64 = 1e-10;
pub const ORACLE_GAP: f64 = 1e-8;
pub const INEQUALITY_SLACK: f64 = 1e-6;

/// Outcome of one suite: `worst` is the largest violation (or gap) seen, `failures` the
/// number of cases beyond the allowed slack.
#[derive(Debug, Clone, PartialEq)]
pub struct SuiteResult {
    pub name: &'static str,
    pub cases: usize,
    pub failures: usize,
    pub worst: f64,
}

impl SuiteResult {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }

    fn from_cases(name: &'static str, cases: Vec<(bool, f64)>) -> Self {
        Self {
            name,
            cases: cases.len(),
            failures: cases.iter().filter(|c| !c.0).count(),
            worst: cases.iter().map(|c| c.1).fold(0.0, f64::max),
        }
    }
}

/// Random measure on `R^dim` with 1..=`max_atoms` atoms; half the draws use a coarse
/// lattice so that ties and exact breakpoints occur.
pub fn random_measure<R: Rng>(rng: &mut R, dim: usize, max_atoms: usize) -> FiniteMeasure {
    let n = rng.random_range(1..=max_atoms);
    let lattice = rng.random_bool(0.5);
    let atoms: Vec<f64> = (0..n * dim)
        .map(|_| if lattice { rng.random_range(-6i32..=6) as f64 * 0.1 } else { rng.random_range(-0.8..0.8) })
        .collect();
    let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    FiniteMeasure::new(dim, atoms, raw.iter().map(|w| w / total).collect()).expect("valid random measure")
}

/// Pair `index` of suite `suite`: dimension uniform in {1, 2, 3}.
pub fn random_pair(seed: u64, suite: u64, index: usize, max_atoms: usize) -> (FiniteMeasure, FiniteMeasure) {
    let mut rng = stream(seed, domain::TEST_MEASURES, (suite << 32) | index as u64);
    let dim = rng.random_range(1..=3);
    (random_measure(&mut rng, dim, max_atoms), random_measure(&mut rng, dim, max_atoms))
}

/// Mixture of the product coupling and a north-west-corner coupling along random atom
/// orders. Always a valid coupling of `p` and `q`.
pub fn random_coupling<R: Rng>(p: &FiniteMeasure, q: &FiniteMeasure, rng: &mut R) -> CoupledSample {
    let d = p.dim();
    let lambda: f64 = rng.random_range(0.0..1.0);
    let (mut xs, mut ys, mut ws) = (Vec::new(), Vec::new(), Vec::new());
    for i in 0..p.len() {
        for j in 0..q.len() {
            xs.extend_from_slice(p.atom(i));
            ys.extend_from_slice(q.atom(j));
            ws.push(lambda * p.weights()[i] * q.weights()[j]);
        }
    }
    let mut pi: Vec<usize> = (0..p.len()).collect();
    let mut qi: Vec<usize> = (0..q.len()).collect();
    pi.shuffle(rng);
    qi.shuffle(rng);
    let mut lp: Vec<f64> = pi.iter().map(|&i| p.weights()[i]).collect();
    let mut lq: Vec<f64> = qi.iter().map(|&j| q.weights()[j]).collect();
    let (mut a, mut b) = (0, 0);
    while a < lp.len() && b < lq.len() {
        let w = lp[a].min(lq[b]);
        xs.extend_from_slice(p.atom(pi[a]));
        ys.extend_from_slice(q.atom(qi[b]));
        ws.push((1.0 - lambda) * w);
        lp[a] -= w;
        lq[b] -= w;
        if lp[a] <= lq[b] {
            a += 1;
        } else {
            b += 1;
        }
    }
    let total: f64 = ws.iter().sum();
    CoupledSample::weighted(d, xs, ys, ws.iter().map(|w| w / total).collect()).expect("valid coupling")
}

/// `prokhorov` against the exhaustive subset oracle.
pub fn oracle_equivalence<E: Executor>(pairs: usize, max_atoms: usize, seed: u64, exec: &E) -> SuiteResult {
    let cases = exec.map_indexed(pairs, |k| {
        let (p, q) = random_pair(seed, 1, k, max_atoms);
        match (prokhorov(&p, &q, METRIC_TOL), prokhorov_oracle(&p, &q)) {
            (Ok(a), Ok(b)) => ((a - b).abs() <= ORACLE_GAP, (a - b).abs()),
            _ => (false, f64::INFINITY),
        }
    });
    SuiteResult::from_cases("oracle-equivalence", cases)
}

/// `BL/3 ≤ Π ≤ √(1.5·BL)` on random pairs, plus equality in the right bound for
/// `(δ_0, δ_1)`.
pub fn sandwich<E: Executor>(pairs: usize, max_atoms: usize, seed: u64, exec: &E) -> SuiteResult {
    let mut cases = exec.map_indexed(pairs, |k| {
        let (p, q) = random_pair(seed, 2, k, max_atoms);
        match (prokhorov(&p, &q, METRIC_TOL), bounded_lipschitz(&p, &q)) {
            (Ok(pi), Ok(bl)) => {
                let v = (bl / 3.0 - pi).max(pi - (1.5 * bl).sqrt()).max(0.0);
                (v <= INEQUALITY_SLACK, v)
            }
            _ => (false, f64::INFINITY),
        }
    });
    let (d0, d1) = (FiniteMeasure::dirac(&[0.0]), FiniteMeasure::dirac(&[1.0]));
    cases.push(match (prokhorov(&d0, &d1, METRIC_TOL), bounded_lipschitz(&d0, &d1)) {
        (Ok(pi), Ok(bl)) => {
            let gap = (pi - 1.0).abs().max((bl - 2.0 / 3.0).abs()).max((pi - (1.5 * bl).sqrt()).abs());
            (gap <= INEQUALITY_SLACK, gap)
        }
        _ => (false, f64::INFINITY),
    });
    SuiteResult::from_cases("bl-sandwich", cases)
}

/// `ky_fan(coupling) ≥ Π` for random couplings, and the optimised coupling attains `Π`.
pub fn coupling_bound<E: Executor>(pairs: usize, couplings: usize, max_atoms: usize, seed: u64, exec: &E) -> SuiteResult {
    let cases = exec.map_indexed(pairs, |k| {
        let (p, q) = random_pair(seed, 3, k, max_atoms);
        let Ok(pi) = prokhorov(&p, &q, METRIC_TOL) else {
            return (false, f64::INFINITY);
        };
        let mut rng = stream(seed, domain::TEST_MEASURES, (4u64 << 32) | k as u64);
        let mut worst = 0.0f64;
        for _ in 0..couplings {
            worst = worst.max(pi - ky_fan(&random_coupling(&p, &q, &mut rng)));
        }
        match coupling_kyfan_upper(&p, &q, METRIC_TOL) {
            Ok(best) => {
                let v = worst.max((best - pi).abs()).max(0.0);
                (v <= INEQUALITY_SLACK, v)
            }
            Err(_) => (false, f64::INFINITY),
        }
    });
    SuiteResult::from_cases("coupling-bound", cases)
}
