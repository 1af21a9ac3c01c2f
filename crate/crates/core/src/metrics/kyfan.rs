use alloc::vec::Vec;

use super::measure::CoupledSample;

/// `inf{ε > 0 : P(|X − Y|_∞ > ε) < ε}` for the coupling carried by `s`.
pub fn ky_fan(s: &CoupledSample) -> f64 {
    ky_fan_weighted(&s.distances(), s.weights())
}

/// Ky Fan value for distances `d_i` carrying probabilities `w_i`.
///
/// The exceedance `P(d > ε)` is constant on `[u_j, u_{j+1})` between consecutive
/// distinct distances, so the infimum is `max(u_j, P(d > u_j))` on the first interval
/// where that is below `u_{j+1}`.
pub fn ky_fan_weighted(distances: &[f64], weights: &[f64]) -> f64 {
    let mut pairs: Vec<(f64, f64)> = distances.iter().copied().zip(weights.iter().copied()).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    // tail[k] = mass of pairs[k..]
    let mut tail = alloc::vec![0.0; pairs.len() + 1];
    for k in (0..pairs.len()).rev() {
        tail[k] = tail[k + 1] + pairs[k].1;
    }
    let mut u = 0.0;
    let mut k = 0;
    loop {
        while k < pairs.len() && pairs[k].0 <= u {
            k += 1;
        }
        let exceed = tail[k];
        let next = if k < pairs.len() { pairs[k].0 } else { f64::INFINITY };
        let cand = u.max(exceed);
        if cand < next {
            return cand.min(1.0);
        }
        u = next;
    }
}
