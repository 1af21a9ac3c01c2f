use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::lp::maximize;
use super::measure::{lex_cmp, FiniteMeasure};
use super::sup_distance;
use crate::error::{Error, Result};

/// Largest combined support accepted by [`bounded_lipschitz`].
pub const BL_SUPPORT_CAP: usize = 500;

const DENSE_PAIR_LIMIT: usize = 2000;
const SEED_NEIGHBOURS: usize = 8;
const VIOLATION_TOL: f64 = 1e-12;

/// Bounded-Lipschitz distance `sup{∫φ d(P − Q) : ‖φ‖_∞ + Lip(φ) ≤ 1}`.
///
/// Only the values of `φ` on the union of supports matter. Writing `a` for the sup
/// bound and `1 − a` for the Lipschitz bound, and `ψ = φ + a`, the problem is the LP
/// `max Σ μ_k ψ_k` over `ψ ≥ 0, a ≥ 0` with `ψ_k ≤ 2a`, `a ≤ 1` and
/// `ψ_k − ψ_l + d_kl a ≤ d_kl`. Pairwise constraints are added lazily for large supports.
pub fn bounded_lipschitz(p: &FiniteMeasure, q: &FiniteMeasure) -> Result<f64> {
    solve(p, q, None)
}

fn solve(p: &FiniteMeasure, q: &FiniteMeasure, force_dense: Option<bool>) -> Result<f64> {
    if p.dim() != q.dim() {
        return Err(Error::Dimension { expected: p.dim(), got: q.dim() });
    }
    // Union of supports, sorted, with signed mass.
    let mut union: Vec<(&[f64], f64)> = Vec::with_capacity(p.len() + q.len());
    let (mut i, mut j) = (0, 0);
    while i < p.len() || j < q.len() {
        let ord = match (i < p.len(), j < q.len()) {
            (true, true) => lex_cmp(p.atom(i), q.atom(j)),
            (true, false) => core::cmp::Ordering::Less,
            _ => core::cmp::Ordering::Greater,
        };
        match ord {
            core::cmp::Ordering::Less => {
                union.push((p.atom(i), p.weights()[i]));
                i += 1;
            }
            core::cmp::Ordering::Greater => {
                union.push((q.atom(j), -q.weights()[j]));
                j += 1;
            }
            core::cmp::Ordering::Equal => {
                union.push((p.atom(i), p.weights()[i] - q.weights()[j]));
                i += 1;
                j += 1;
            }
        }
    }
    let k = union.len();
    if k > BL_SUPPORT_CAP {
        return Err(Error::SupportTooLarge { got: k, cap: BL_SUPPORT_CAP });
    }
    let mut mu: Vec<f64> = union.iter().map(|u| u.1).collect();
    if mu.iter().all(|m| *m == 0.0) {
        return Ok(0.0);
    }
    // Same LP for (P, Q) and (Q, P).
    if mu.iter().find(|m| **m != 0.0).is_some_and(|m| *m < 0.0) {
        mu.iter_mut().for_each(|m| *m = -*m);
    }
    let dist = |a: usize, b: usize| sup_distance(union[a].0, union[b].0);

    let mut active: Vec<(usize, usize)> = Vec::new();
    if force_dense.unwrap_or(k * (k - 1) <= DENSE_PAIR_LIMIT) {
        for a in 0..k {
            for b in 0..k {
                if a != b {
                    active.push((a, b));
                }
            }
        }
    } else {
        for a in 0..k {
            let mut near: Vec<(f64, usize)> = (0..k).filter(|&b| b != a).map(|b| (dist(a, b), b)).collect();
            near.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
            for &(_, b) in near.iter().take(SEED_NEIGHBOURS) {
                active.push((a, b));
                active.push((b, a));
            }
        }
        active.sort_unstable();
        active.dedup();
    }

    let nvar = k + 1;
    let mut c = mu.clone();
    c.push(0.0);
    loop {
        let mut rows = Vec::with_capacity(k + 1 + active.len());
        let mut rhs = Vec::with_capacity(rows.capacity());
        for a in 0..k {
            let mut r = vec![0.0; nvar];
            r[a] = 1.0;
            r[k] = -2.0;
            rows.push(r);
            rhs.push(0.0);
        }
        let mut r = vec![0.0; nvar];
        r[k] = 1.0;
        rows.push(r);
        rhs.push(1.0);
        for &(a, b) in &active {
            let dab = dist(a, b);
            let mut r = vec![0.0; nvar];
            r[a] = 1.0;
            r[b] = -1.0;
            r[k] = dab;
            rows.push(r);
            rhs.push(dab);
        }
        let sol = maximize(&c, &rows, &rhs)?;
        let amp = sol.x[k];
        let mut violated: Vec<(f64, usize, usize)> = Vec::new();
        for a in 0..k {
            for b in 0..k {
                if a == b {
                    continue;
                }
                let excess = sol.x[a] - sol.x[b] - (1.0 - amp) * dist(a, b);
                if excess > VIOLATION_TOL {
                    violated.push((excess, a, b));
                }
            }
        }
        if violated.is_empty() {
            if !(sol.value.is_finite() && sol.value >= -VIOLATION_TOL) {
                return Err(Error::Lp(format!("bounded-Lipschitz LP returned {}", sol.value)));
            }
            return Ok(sol.value.max(0.0));
        }
        violated.sort_by(|x, y| y.0.total_cmp(&x.0).then((x.1, x.2).cmp(&(y.1, y.2))));
        for &(_, a, b) in violated.iter().take(4 * k) {
            active.push((a, b));
        }
        active.sort_unstable();
        active.dedup();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_diracs() {
        let v = bounded_lipschitz(&FiniteMeasure::dirac(&[0.0]), &FiniteMeasure::dirac(&[1.0])).unwrap();
        assert!((v - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn two_dirac_closed_form() {
        // max over a of min(2a, (1 − a)d) = 2d / (2 + d).
        for d in [0.01, 0.3, 1.0, 2.0, 10.0] {
            let v = bounded_lipschitz(&FiniteMeasure::dirac(&[0.0, 0.0]), &FiniteMeasure::dirac(&[d, -0.5 * d]))
                .unwrap();
            assert!((v - 2.0 * d / (2.0 + d)).abs() < 1e-12, "d={d}: {v}");
        }
    }

    #[test]
    fn equal_measures() {
        let p = FiniteMeasure::new(1, vec![0.0, 1.0, 3.0], vec![0.2, 0.3, 0.5]).unwrap();
        assert_eq!(bounded_lipschitz(&p, &p).unwrap(), 0.0);
    }

    #[test]
    fn constraint_generation_matches_dense() {
        let pts: Vec<f64> = (0..120).map(|i| libm::sin(i as f64 * 0.77) * 2.0).collect();
        let p = FiniteMeasure::empirical(2, &pts[..60]).unwrap();
        let q = FiniteMeasure::empirical(2, &pts[60..]).unwrap();
        let lazy = solve(&p, &q, Some(false)).unwrap();
        let dense = solve(&p, &q, Some(true)).unwrap();
        assert!(lazy > 0.0);
        assert!((lazy - dense).abs() < 1e-10, "{lazy} vs {dense}");
        assert_eq!(lazy, solve(&q, &p, Some(false)).unwrap());
    }
}
