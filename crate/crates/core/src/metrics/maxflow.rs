//! Dinic max-flow on a compressed adjacency layout with `f64` capacities.

use alloc::vec;
use alloc::vec::Vec;

const RESIDUAL_EPS: f64 = 1e-15;

pub(crate) struct FlowNetwork {
    n: usize,
    start: Vec<u32>,
    arcs: Vec<u32>,
    to: Vec<u32>,
    cap: Vec<f64>,
}

impl FlowNetwork {
    /// Edge `e` becomes arc `2e` (forward) and `2e + 1` (reverse).
    pub(crate) fn new(n: usize, edges: &[(u32, u32, f64)]) -> Self {
        let mut degree = vec![0u32; n + 1];
        for &(u, v, _) in edges {
            degree[u as usize + 1] += 1;
            degree[v as usize + 1] += 1;
        }
        for i in 0..n {
            degree[i + 1] += degree[i];
        }
        let start = degree;
        let mut fill = start.clone();
        let mut arcs = vec![0u32; 2 * edges.len()];
        let mut to = vec![0u32; 2 * edges.len()];
        let mut cap = vec![0.0; 2 * edges.len()];
        for (e, &(u, v, c)) in edges.iter().enumerate() {
            let (f, r) = (2 * e, 2 * e + 1);
            to[f] = v;
            to[r] = u;
            cap[f] = c;
            arcs[fill[u as usize] as usize] = f as u32;
            fill[u as usize] += 1;
            arcs[fill[v as usize] as usize] = r as u32;
            fill[v as usize] += 1;
        }
        Self { n, start, arcs, to, cap }
    }

    /// Flow currently carried by edge `e`.
    pub(crate) fn edge_flow(&self, e: usize) -> f64 {
        self.cap[2 * e + 1]
    }

    pub(crate) fn max_flow(&mut self, s: usize, t: usize) -> f64 {
        let mut total = 0.0;
        let mut level = vec![u32::MAX; self.n];
        let mut queue = Vec::with_capacity(self.n);
        let mut iter = vec![0u32; self.n];
        let mut path: Vec<u32> = Vec::new();
        loop {
            level.fill(u32::MAX);
            level[s] = 0;
            queue.clear();
            queue.push(s as u32);
            let mut head = 0;
            while head < queue.len() {
                let u = queue[head] as usize;
                head += 1;
                for k in self.start[u]..self.start[u + 1] {
                    let a = self.arcs[k as usize] as usize;
                    let v = self.to[a] as usize;
                    if self.cap[a] > RESIDUAL_EPS && level[v] == u32::MAX {
                        level[v] = level[u] + 1;
                        queue.push(v as u32);
                    }
                }
            }
            if level[t] == u32::MAX {
                return total;
            }
            iter.copy_from_slice(&self.start[..self.n]);
            path.clear();
            let mut u = s;
            loop {
                if u == t {
                    let push = path.iter().fold(f64::INFINITY, |m, &a| m.min(self.cap[a as usize]));
                    let mut retreat = path.len();
                    for (i, &a) in path.iter().enumerate() {
                        let a = a as usize;
                        self.cap[a] -= push;
                        self.cap[a ^ 1] += push;
                        if self.cap[a] <= RESIDUAL_EPS && retreat == path.len() {
                            retreat = i;
                        }
                    }
                    total += push;
                    path.truncate(retreat);
                    u = path.last().map_or(s, |&a| self.to[a as usize] as usize);
                    continue;
                }
                let end = self.start[u + 1];
                while iter[u] < end {
                    let a = self.arcs[iter[u] as usize] as usize;
                    let v = self.to[a] as usize;
                    if self.cap[a] > RESIDUAL_EPS && level[v] == level[u] + 1 {
                        break;
                    }
                    iter[u] += 1;
                }
                if iter[u] == end {
                    if u == s {
                        break;
                    }
                    level[u] = u32::MAX;
                    let a = path.pop().unwrap() as usize;
                    u = self.to[a ^ 1] as usize;
                    iter[u] += 1;
                } else {
                    let a = self.arcs[iter[u] as usize];
                    path.push(a);
                    u = self.to[a as usize] as usize;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classic_network() {
        // CLRS figure: max flow 23.
        let edges = [
            (0, 1, 16.0),
            (0, 2, 13.0),
            (2, 1, 4.0),
            (1, 3, 12.0),
            (3, 2, 9.0),
            (2, 4, 14.0),
            (4, 3, 7.0),
            (3, 5, 20.0),
            (4, 5, 4.0),
        ];
        let mut g = FlowNetwork::new(6, &edges);
        assert_eq!(g.max_flow(0, 5), 23.0);
        let out: f64 = (0..2).map(|e| g.edge_flow(e)).sum();
        assert_eq!(out, 23.0);
    }

    #[test]
    fn disconnected_sink() {
        let mut g = FlowNetwork::new(3, &[(0, 1, 1.0)]);
        assert_eq!(g.max_flow(0, 2), 0.0);
    }

    #[test]
    fn requires_rerouting_through_reverse_arc() {
        // Greedy 0-1-2-3 blocks; optimum 2 needs the reverse of 1→2.
        let edges = [(0, 1, 1.0), (0, 2, 1.0), (1, 2, 1.0), (1, 3, 1.0), (2, 3, 1.0)];
        let mut g = FlowNetwork::new(4, &edges);
        assert_eq!(g.max_flow(0, 3), 2.0);
    }
}
