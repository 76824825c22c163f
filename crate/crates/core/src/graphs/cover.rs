use serde::{Deserialize, Serialize};

use super::RegularGraph;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn other(self) -> Side {
        match self {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
        }
    }
}

/// Bipartite double cover `L ∪ R` of a regular graph with a fixed edge
/// labeling.
///
/// Every source edge `{u, v}` yields the cover edges `(u_L, v_R)` and
/// `(v_L, u_R)`. Cover edges are labeled `0..N*d` in lexicographic order of
/// `(left vertex, right vertex)`; label `e` is column `e` of the Tanner
/// matrix. `gamma(side, v)` lists the labels at `v` in increasing order.
#[derive(Debug, Clone, PartialEq)]
pub struct DoubleCover {
    n: usize,
    degree: usize,
    endpoints: Vec<(usize, usize)>,
    gamma_left: Vec<usize>,
    gamma_right: Vec<usize>,
    /// Position of each edge inside `gamma(Left, ·)` and `gamma(Right, ·)`.
    slot: Vec<(usize, usize)>,
    certified_lambda: Option<f64>,
}

impl DoubleCover {
    pub fn new(g: &RegularGraph) -> Self {
        let n = g.num_vertices();
        let d = g.degree();
        let mut endpoints = Vec::with_capacity(n * d);
        for u in 0..n {
            for &v in g.neighbors(u) {
                endpoints.push((u, v));
            }
        }
        let gamma_left: Vec<usize> = (0..n * d).collect();
        let mut gamma_right = vec![usize::MAX; n * d];
        let mut fill = vec![0usize; n];
        let mut slot = Vec::with_capacity(n * d);
        for (e, &(u, v)) in endpoints.iter().enumerate() {
            let pos = fill[v];
            gamma_right[v * d + pos] = e;
            fill[v] += 1;
            slot.push((e - u * d, pos));
        }
        Self {
            n,
            degree: d,
            endpoints,
            gamma_left,
            gamma_right,
            slot,
            certified_lambda: g.certified_lambda(),
        }
    }

    /// Vertices per side.
    pub fn num_vertices(&self) -> usize {
        self.n
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn num_edges(&self) -> usize {
        self.endpoints.len()
    }

    /// Certified bound of the source graph, if it had one.
    pub fn certified_lambda(&self) -> Option<f64> {
        self.certified_lambda
    }

    /// `(left vertex, right vertex)` of edge `e`.
    pub fn endpoints(&self, e: usize) -> (usize, usize) {
        self.endpoints[e]
    }

    pub fn endpoint(&self, e: usize, side: Side) -> usize {
        match side {
            Side::Left => self.endpoints[e].0,
            Side::Right => self.endpoints[e].1,
        }
    }

    /// Index of edge `e` within `gamma(side, endpoint)`.
    pub fn slot(&self, e: usize, side: Side) -> usize {
        match side {
            Side::Left => self.slot[e].0,
            Side::Right => self.slot[e].1,
        }
    }

    pub fn gamma(&self, side: Side, v: usize) -> &[usize] {
        let d = self.degree;
        match side {
            Side::Left => &self.gamma_left[v * d..(v + 1) * d],
            Side::Right => &self.gamma_right[v * d..(v + 1) * d],
        }
    }

    /// Right neighbors of left vertex `u` (equivalently left neighbors of
    /// right vertex `u`), i.e. the source graph's neighbors.
    pub fn neighbors_of_left(&self, u: usize) -> impl Iterator<Item = usize> + '_ {
        self.gamma(Side::Left, u)
            .iter()
            .map(|&e| self.endpoints[e].1)
    }

    /// Forgets the bipartition: every source edge appears twice.
    pub fn source_edge_multiset(&self) -> Vec<(usize, usize)> {
        let mut out: Vec<_> = self
            .endpoints
            .iter()
            .map(|&(u, v)| (u.min(v), u.max(v)))
            .collect();
        out.sort_unstable();
        out
    }
}
