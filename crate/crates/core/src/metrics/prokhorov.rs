use alloc::vec;
use alloc::vec::Vec;

use super::maxflow::FlowNetwork;
use super::measure::{CoupledSample, FiniteMeasure};
use super::sup_distance;
use crate::error::{invalid, Error, Result};

/// Largest support (per measure) the subset-enumeration oracle accepts.
pub const ORACLE_SUPPORT_CAP: usize = 12;

/// Instances with at most this many atom pairs are solved exactly over the sorted
/// pairwise distances; larger ones by bisection.
const EXACT_PAIR_LIMIT: usize = 1_000_000;
const FEASIBILITY_SLACK: f64 = 1e-12;
const FIRST_PROBE: f64 = 1.0 / 128.0;

fn check_pair(p: &FiniteMeasure, q: &FiniteMeasure) -> Result<()> {
    if p.dim() != q.dim() {
        return Err(Error::Dimension { expected: p.dim(), got: q.dim() });
    }
    Ok(())
}

/// Prokhorov distance under the sup-norm.
///
/// By Strassen's theorem `π(P, Q) ≤ ε` iff the bipartite transport network joining atoms
/// at distance `≤ ε` carries flow `≥ 1 − ε`. Small instances are solved exactly; large
/// ones to within `tol` by bisection on `ε`.
pub fn prokhorov(p: &FiniteMeasure, q: &FiniteMeasure, tol: f64) -> Result<f64> {
    Ok(solve(p, q, tol, false)?.value)
}

/// Coupling of `p` and `q` whose Ky Fan distance is at most `π(p, q)` (up to `tol`).
#[derive(Debug, Clone)]
pub struct StrassenCoupling {
    pub prokhorov: f64,
    pub coupling: CoupledSample,
}

pub fn strassen_coupling(p: &FiniteMeasure, q: &FiniteMeasure, tol: f64) -> Result<StrassenCoupling> {
    let sol = solve(p, q, tol, true)?;
    let d = p.dim();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut ws = Vec::new();
    let mut left_p = p.weights().to_vec();
    let mut left_q = q.weights().to_vec();
    for &(i, j, f) in &sol.flows {
        xs.extend_from_slice(p.atom(i));
        ys.extend_from_slice(q.atom(j));
        ws.push(f);
        left_p[i] -= f;
        left_q[j] -= f;
    }
    // Remaining mass (at most π) is paired greedily in index order.
    let (mut i, mut j) = (0, 0);
    while i < left_p.len() && j < left_q.len() {
        let w = left_p[i].min(left_q[j]);
        if w > 0.0 {
            xs.extend_from_slice(p.atom(i));
            ys.extend_from_slice(q.atom(j));
            ws.push(w);
            left_p[i] -= w;
            left_q[j] -= w;
        }
        if left_p[i] <= left_q[j] {
            i += 1;
        } else {
            j += 1;
        }
    }
    let total: f64 = ws.iter().sum();
    for w in ws.iter_mut() {
        *w /= total;
    }
    let coupling = CoupledSample::weighted(d, xs, ys, ws)?;
    Ok(StrassenCoupling { prokhorov: sol.value, coupling })
}

/// Ky Fan distance of the Strassen coupling: an upper bound for the minimal Ky Fan
/// distance over couplings, which equals the Prokhorov distance.
pub fn coupling_kyfan_upper(p: &FiniteMeasure, q: &FiniteMeasure, tol: f64) -> Result<f64> {
    Ok(super::ky_fan(&strassen_coupling(p, q, tol)?.coupling))
}

struct Solution {
    value: f64,
    flows: Vec<(usize, usize, f64)>,
}

struct Probe {
    flow: f64,
    flows: Vec<(usize, usize, f64)>,
}

fn probe(p: &FiniteMeasure, q: &FiniteMeasure, pairs: &[(u32, u32)], keep: bool) -> Probe {
    let (n, m) = (p.len(), q.len());
    let s = 0u32;
    let t = (n + m + 1) as u32;
    let mut edges = Vec::with_capacity(n + m + pairs.len());
    for (i, &w) in p.weights().iter().enumerate() {
        edges.push((s, i as u32 + 1, w));
    }
    for (j, &w) in q.weights().iter().enumerate() {
        edges.push(((n + 1 + j) as u32, t, w));
    }
    for &(i, j) in pairs {
        let c = p.weights()[i as usize].min(q.weights()[j as usize]);
        edges.push((i + 1, (n + 1) as u32 + j, c));
    }
    let mut g = FlowNetwork::new(n + m + 2, &edges);
    let flow = g.max_flow(s as usize, t as usize);
    let flows = if keep {
        pairs
            .iter()
            .enumerate()
            .filter_map(|(k, &(i, j))| {
                let f = g.edge_flow(n + m + k);
                (f > 0.0).then_some((i as usize, j as usize, f))
            })
            .collect()
    } else {
        Vec::new()
    };
    Probe { flow, flows }
}

fn feasible(eps: f64, flow: f64) -> bool {
    flow >= 1.0 - eps - FEASIBILITY_SLACK
}

fn solve(p: &FiniteMeasure, q: &FiniteMeasure, tol: f64, keep: bool) -> Result<Solution> {
    check_pair(p, q)?;
    if !(tol > 0.0) {
        return Err(invalid("prokhorov tolerance must be positive"));
    }
    if p.len().saturating_mul(q.len()) <= EXACT_PAIR_LIMIT {
        Ok(solve_exact(p, q, keep))
    } else {
        Ok(solve_bisection(p, q, tol, keep))
    }
}

fn solve_exact(p: &FiniteMeasure, q: &FiniteMeasure, keep: bool) -> Solution {
    let mut all: Vec<(f64, u32, u32)> = Vec::with_capacity(p.len() * q.len());
    for i in 0..p.len() {
        for j in 0..q.len() {
            all.push((sup_distance(p.atom(i), q.atom(j)), i as u32, j as u32));
        }
    }
    all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut breaks: Vec<f64> = all.iter().map(|e| e.0).filter(|&d| d < 1.0).collect();
    breaks.dedup();
    breaks.push(1.0);
    let graph_at = |b: f64| -> Vec<(u32, u32)> {
        let k = all.partition_point(|e| e.0 <= b);
        all[..k].iter().map(|e| (e.1, e.2)).collect()
    };
    let run = |b: f64, keep: bool| probe(p, q, &graph_at(b), keep);

    // First feasible breakpoint; the last one (ε = 1) always is.
    let (mut lo, mut hi) = (0usize, breaks.len() - 1);
    while lo < hi {
        let mid = (lo + hi) / 2;
        if feasible(breaks[mid], run(breaks[mid], false).flow) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    let k = lo;
    if k > 0 {
        // On [b_{k-1}, b_k) the graph is frozen at b_{k-1}.
        let prev = run(breaks[k - 1], keep);
        let cand = breaks[k - 1].max(1.0 - prev.flow);
        if cand < breaks[k] {
            return Solution { value: cand, flows: prev.flows };
        }
    }
    Solution { value: breaks[k], flows: run(breaks[k], keep).flows }
}

fn solve_bisection(p: &FiniteMeasure, q: &FiniteMeasure, tol: f64, keep: bool) -> Solution {
    let grid = Grid::new(q);
    let run = |eps: f64, keep: bool| probe(p, q, &grid.pairs_within(p, eps), keep);
    let at_zero = run(0.0, keep);
    if feasible(0.0, at_zero.flow) {
        return Solution { value: 0.0, flows: at_zero.flows };
    }
    let mut lo = (0.0, at_zero);
    let mut hi: Option<(f64, Probe)> = None;
    let mut eps = FIRST_PROBE;
    while eps < 1.0 {
        let r = run(eps, keep);
        if feasible(eps, r.flow) {
            hi = Some((eps, r));
            break;
        }
        lo = (eps, r);
        eps *= 2.0;
    }
    let mut hi = hi.unwrap_or_else(|| (1.0, run(1.0, keep)));
    while hi.0 - lo.0 > tol {
        let mid = 0.5 * (lo.0 + hi.0);
        let r = run(mid, keep);
        if feasible(mid, r.flow) {
            hi = (mid, r);
        } else {
            lo = (mid, r);
        }
    }
    let cand = 1.0 - lo.1.flow;
    if cand < hi.0 {
        Solution { value: cand.max(lo.0), flows: lo.1.flows }
    } else {
        Solution { value: hi.0, flows: hi.1.flows }
    }
}

/// Uniform cell index over the atoms of one measure, for radius queries.
struct Grid<'a> {
    measure: &'a FiniteMeasure,
}

impl<'a> Grid<'a> {
    fn new(measure: &'a FiniteMeasure) -> Self {
        Self { measure }
    }

    /// All `(i, j)` with `|p_i − q_j|_∞ ≤ eps`, in lexicographic order.
    fn pairs_within(&self, p: &FiniteMeasure, eps: f64) -> Vec<(u32, u32)> {
        let q = self.measure;
        let d = q.dim();
        let cell = eps.max(1e-9);
        let key = |x: &[f64], out: &mut [i64]| {
            for (o, v) in out.iter_mut().zip(x) {
                *o = libm::floor(v / cell) as i64;
            }
        };
        let mut keys = vec![0i64; q.len() * d];
        for j in 0..q.len() {
            key(q.atom(j), &mut keys[j * d..(j + 1) * d]);
        }
        let mut order: Vec<u32> = (0..q.len() as u32).collect();
        let kslice = |j: u32| &keys[j as usize * d..(j as usize + 1) * d];
        order.sort_by(|&a, &b| kslice(a).cmp(kslice(b)).then(a.cmp(&b)));

        let mut out = Vec::new();
        let mut base = vec![0i64; d];
        let mut probe_key = vec![0i64; d];
        let mut hits: Vec<u32> = Vec::new();
        let neighbours = 3usize.pow(d as u32);
        for i in 0..p.len() {
            let x = p.atom(i);
            key(x, &mut base);
            hits.clear();
            for code in 0..neighbours {
                let mut c = code;
                for k in 0..d {
                    probe_key[k] = base[k].saturating_add((c % 3) as i64 - 1);
                    c /= 3;
                }
                let from = order.partition_point(|&j| kslice(j) < &probe_key[..]);
                let to = order.partition_point(|&j| kslice(j) <= &probe_key[..]);
                for &j in &order[from..to] {
                    if sup_distance(x, q.atom(j as usize)) <= eps {
                        hits.push(j);
                    }
                }
            }
            hits.sort_unstable();
            hits.dedup();
            out.extend(hits.iter().map(|&j| (i as u32, j)));
        }
        out
    }
}

/// `inf{ε > 0 : P(B) ≤ Q(B^ε) + ε for all B}` by enumerating every subset of `supp P`,
/// with closed neighbourhoods `B^ε = {y : dist(y, B) ≤ ε}`.
pub fn prokhorov_one_sided_oracle(p: &FiniteMeasure, q: &FiniteMeasure) -> Result<f64> {
    check_pair(p, q)?;
    if p.len() > ORACLE_SUPPORT_CAP || q.len() > ORACLE_SUPPORT_CAP {
        return Err(Error::SupportTooLarge { got: p.len().max(q.len()), cap: ORACLE_SUPPORT_CAP });
    }
    let (n, m) = (p.len(), q.len());
    let mut breaks = vec![0.0];
    for i in 0..n {
        for j in 0..m {
            let dist = sup_distance(p.atom(i), q.atom(j));
            if dist < 1.0 {
                breaks.push(dist);
            }
        }
    }
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    breaks.push(1.0);
    for k in 0..breaks.len() {
        let b = breaks[k];
        let reach: Vec<u32> = (0..n)
            .map(|i| {
                (0..m)
                    .filter(|&j| sup_distance(p.atom(i), q.atom(j)) <= b)
                    .fold(0u32, |acc, j| acc | (1 << j))
            })
            .collect();
        let mut worst = f64::NEG_INFINITY;
        for mask in 1u32..(1 << n) {
            let mut mass = 0.0;
            let mut nb = 0u32;
            for i in 0..n {
                if mask & (1 << i) != 0 {
                    mass += p.weights()[i];
                    nb |= reach[i];
                }
            }
            let covered: f64 = (0..m).filter(|&j| nb & (1 << j) != 0).map(|j| q.weights()[j]).sum();
            worst = worst.max(mass - covered);
        }
        let cand = b.max(worst);
        if k + 1 == breaks.len() || cand < breaks[k + 1] {
            return Ok(cand.min(1.0));
        }
    }
    Ok(1.0)
}

/// Two-sided Prokhorov distance by brute-force subset enumeration.
pub fn prokhorov_oracle(p: &FiniteMeasure, q: &FiniteMeasure) -> Result<f64> {
    Ok(prokhorov_one_sided_oracle(p, q)?.max(prokhorov_one_sided_oracle(q, p)?))
}
