//! Dense dictionary simplex with Bland's rule for `max cᵀx, Ax ≤ b, x ≥ 0` with
//! `b ≥ 0` (the origin is feasible, so no first phase is needed).

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

const PIVOT_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub value: f64,
    pub x: Vec<f64>,
}

/// `rows[i]` holds the coefficients of constraint `i`; `b[i] ≥ 0`.
pub fn maximize(c: &[f64], rows: &[Vec<f64>], b: &[f64]) -> Result<LpSolution> {
    let n = c.len();
    let m = rows.len();
    if b.len() != m || rows.iter().any(|r| r.len() != n) {
        return Err(Error::Lp("constraint shape".into()));
    }
    if b.iter().any(|v| !(*v >= 0.0)) {
        return Err(Error::Lp("negative right-hand side".into()));
    }
    // Dictionary x_B(i) = rhs[i] − Σ_j a[i][j] x_N(j); z = z0 + Σ_j obj[j] x_N(j).
    // Labels 0..n are the original variables, n..n+m the slacks.
    let mut a: Vec<Vec<f64>> = rows.to_vec();
    let mut rhs = b.to_vec();
    let mut obj = c.to_vec();
    let mut z0 = 0.0;
    let mut nonbasic: Vec<usize> = (0..n).collect();
    let mut basic: Vec<usize> = (n..n + m).collect();
    let max_iter = 50 * (n + m) + 1000;
    for _ in 0..max_iter {
        let entering = (0..n)
            .filter(|&j| obj[j] > PIVOT_EPS)
            .min_by_key(|&j| nonbasic[j]);
        let Some(s) = entering else {
            let mut x = vec![0.0; n];
            for (i, &lab) in basic.iter().enumerate() {
                if lab < n {
                    x[lab] = rhs[i];
                }
            }
            return Ok(LpSolution { value: z0, x });
        };
        let mut leave: Option<(usize, f64)> = None;
        for i in 0..m {
            if a[i][s] > PIVOT_EPS {
                let ratio = rhs[i] / a[i][s];
                leave = match leave {
                    None => Some((i, ratio)),
                    Some((r, best)) => {
                        let tie = (ratio - best).abs() <= 1e-12 * best.abs().max(1.0);
                        if ratio < best && !tie || tie && basic[i] < basic[r] {
                            Some((i, ratio))
                        } else {
                            Some((r, best))
                        }
                    }
                };
            }
        }
        let Some((r, _)) = leave else {
            return Err(Error::Lp("objective unbounded".into()));
        };
        let piv = a[r][s];
        let row_r: Vec<f64> = a[r]
            .iter()
            .enumerate()
            .map(|(j, v)| if j == s { 1.0 / piv } else { v / piv })
            .collect();
        let rhs_r = (rhs[r] / piv).max(0.0);
        for i in 0..m {
            if i == r {
                continue;
            }
            let f = a[i][s];
            if f == 0.0 {
                continue;
            }
            for j in 0..n {
                a[i][j] = if j == s { -f / piv } else { a[i][j] - f * row_r[j] };
            }
            rhs[i] = (rhs[i] - f * rhs_r).max(0.0);
        }
        let cs = obj[s];
        for j in 0..n {
            obj[j] = if j == s { -cs / piv } else { obj[j] - cs * row_r[j] };
        }
        z0 += cs * rhs_r;
        a[r] = row_r;
        rhs[r] = rhs_r;
        core::mem::swap(&mut nonbasic[s], &mut basic[r]);
    }
    Err(Error::Lp("iteration limit".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn textbook_problem() {
        // max 5x + 4y + 3z; 2x+3y+z ≤ 5, 4x+y+2z ≤ 11, 3x+4y+2z ≤ 8 → 13 at (2,0,1).
        let rows = vec![vec![2.0, 3.0, 1.0], vec![4.0, 1.0, 2.0], vec![3.0, 4.0, 2.0]];
        let s = maximize(&[5.0, 4.0, 3.0], &rows, &[5.0, 11.0, 8.0]).unwrap();
        assert!((s.value - 13.0).abs() < 1e-12);
        assert!((s.x[0] - 2.0).abs() < 1e-12 && s.x[1].abs() < 1e-12 && (s.x[2] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn unbounded_detected() {
        let rows = vec![vec![1.0, -1.0]];
        assert!(matches!(maximize(&[1.0, 1.0], &rows, &[1.0]), Err(Error::Lp(_))));
    }

    #[test]
    fn degenerate_cycling_example() {
        // Beale's example cycles under the largest-coefficient rule; Bland terminates.
        let rows = vec![
            vec![0.25, -8.0, -1.0, 9.0],
            vec![0.5, -12.0, -0.5, 3.0],
            vec![0.0, 0.0, 1.0, 0.0],
        ];
        let s = maximize(&[0.75, -20.0, 0.5, -6.0], &rows, &[0.0, 0.0, 1.0]).unwrap();
        assert!((s.value - 1.25).abs() < 1e-12, "{}", s.value);
    }
}
