use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{GraphError, RegularGraph};

const MAX_RESTARTS: usize = 50;

/// Random simple `d`-regular graph on `n` vertices, deterministic in `seed`.
///
/// Uses the pairing (configuration) model. Loops and repeated edges in the
/// pairing are removed by degree-preserving double-edge switches against a
/// random partner edge; if the repair budget runs out the pairing is redrawn.
/// When `d > (n - 1) / 2` the complement degree is sampled instead.
pub fn random_regular(n: usize, d: usize, seed: u64) -> Result<RegularGraph, GraphError> {
    if (n * d) % 2 == 1 {
        return Err(GraphError::OddDegreeSum { n, d });
    }
    if d == 0 || d >= n {
        return Err(GraphError::BadDegree { n, d });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let complement_degree = n - 1 - d;
    if complement_degree < d {
        let sparse = if complement_degree == 0 {
            Vec::new()
        } else {
            sample_edges(n, complement_degree, &mut rng)?
        };
        let mut present = vec![vec![false; n]; n];
        for &(u, v) in &sparse {
            present[u][v] = true;
            present[v][u] = true;
        }
        let edges: Vec<_> = (0..n)
            .flat_map(|u| (u + 1..n).map(move |v| (u, v)))
            .filter(|&(u, v)| !present[u][v])
            .collect();
        return RegularGraph::from_edges(n, d, &edges);
    }
    let edges = sample_edges(n, d, &mut rng)?;
    RegularGraph::from_edges(n, d, &edges)
}

fn key(u: usize, v: usize) -> (u32, u32) {
    (u.min(v) as u32, u.max(v) as u32)
}

fn sample_edges(
    n: usize,
    d: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<(usize, usize)>, GraphError> {
    let mut points: Vec<usize> = (0..n).flat_map(|v| std::iter::repeat_n(v, d)).collect();
    for _ in 0..MAX_RESTARTS {
        points.shuffle(rng);
        let mut edges: Vec<(usize, usize)> = points.chunks_exact(2).map(|p| (p[0], p[1])).collect();
        if repair(&mut edges, rng) {
            return Ok(edges);
        }
    }
    Err(GraphError::GenerationFailed {
        attempts: MAX_RESTARTS,
    })
}

/// Removes loops and multi-edges by switches; returns false if the switch
/// budget is exhausted.
fn repair(edges: &mut [(usize, usize)], rng: &mut ChaCha8Rng) -> bool {
    let m = edges.len();
    let mut count: HashMap<(u32, u32), u32> = HashMap::with_capacity(m);
    for &(u, v) in edges.iter() {
        *count.entry(key(u, v)).or_insert(0) += 1;
    }
    let mut budget = 200 * m + 1000;
    for i in 0..m {
        loop {
            let (a, b) = edges[i];
            if a != b && count[&key(a, b)] == 1 {
                break;
            }
            if budget == 0 || m < 2 {
                return false;
            }
            budget -= 1;
            let j = rng.random_range(0..m);
            if j == i {
                continue;
            }
            let (mut c, mut e) = edges[j];
            if rng.random_bool(0.5) {
                std::mem::swap(&mut c, &mut e);
            }
            // (a,b),(c,e) -> (a,c),(b,e)
            if a == c || b == e || key(a, c) == key(b, e) {
                continue;
            }
            if count.get(&key(a, c)).is_some_and(|&k| k > 0)
                || count.get(&key(b, e)).is_some_and(|&k| k > 0)
            {
                continue;
            }
            for old in [key(a, b), key(c, e)] {
                let k = count.get_mut(&old).expect("edge present");
                *k -= 1;
            }
            *count.entry(key(a, c)).or_insert(0) += 1;
            *count.entry(key(b, e)).or_insert(0) += 1;
            edges[i] = (a, c);
            edges[j] = (b, e);
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn k4_is_the_only_cubic_graph_on_four_vertices() {
        for seed in 0..5 {
            assert_eq!(
                random_regular(4, 3, seed).unwrap(),
                RegularGraph::complete(4).unwrap()
            );
        }
    }

    #[test]
    fn odd_degree_sum_rejected() {
        assert_eq!(
            random_regular(3, 1, 0),
            Err(GraphError::OddDegreeSum { n: 3, d: 1 })
        );
    }

    #[test]
    fn deterministic_for_seed() {
        let a = random_regular(50, 10, 7).unwrap();
        let b = random_regular(50, 10, 7).unwrap();
        let c = random_regular(50, 10, 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.num_edges(), 250);
    }

    #[test]
    fn dense_parameters_use_complement() {
        let g = random_regular(10, 8, 3).unwrap();
        assert_eq!(g.degree(), 8);
        assert_eq!(g.edges().count(), 40);
    }

    #[test]
    fn moderately_dense_sparse_side() {
        let g = random_regular(200, 60, 1).unwrap();
        assert!(g.is_connected());
    }
}
