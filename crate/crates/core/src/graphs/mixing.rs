use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::DoubleCover;

/// Number of cover edges from left set `s` to right set `t`.
pub fn edges_between(h: &DoubleCover, s: &[usize], t: &[usize]) -> usize {
    let mut in_t = vec![false; h.num_vertices()];
    for &v in t {
        in_t[v] = true;
    }
    s.iter()
        .map(|&u| h.neighbors_of_left(u).filter(|&v| in_t[v]).count())
        .sum()
}

/// `| |E(S,T)| - d|S||T|/N |` divided by `λ sqrt(|S||T|)`; zero when either
/// set is empty. The bipartite mixing bound holds for `(S, T)` iff this is at
/// most one.
pub fn mixing_discrepancy(h: &DoubleCover, lambda: f64, s: &[usize], t: &[usize]) -> f64 {
    if s.is_empty() || t.is_empty() {
        return 0.0;
    }
    let (a, b) = (s.len() as f64, t.len() as f64);
    let expected = h.degree() as f64 * a * b / h.num_vertices() as f64;
    let dev = (edges_between(h, s, t) as f64 - expected).abs();
    let bound = lambda * (a * b).sqrt();
    if bound == 0.0 {
        if dev <= 1e-9 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        dev / bound
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixingReport {
    pub trials: usize,
    pub lambda: f64,
    pub max_ratio: f64,
    pub violations: usize,
    pub passed: bool,
}

/// Tests the bipartite mixing bound on `trials` random `(S, T)` pairs.
///
/// Trial `i` draws from its own ChaCha stream `i` under `seed`, so the report
/// does not depend on scheduling. Even trials use independent Bernoulli
/// subsets of random density; odd trials take `T` to be the neighborhood of a
/// small random `S`, which pushes `|E(S,T)|` to its maximum.
pub fn mixing_check(h: &DoubleCover, lambda: f64, trials: usize, seed: u64) -> MixingReport {
    let n = h.num_vertices();
    let ratios: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(trial as u64);
            let (s, t) = if trial % 2 == 0 {
                let ps: f64 = rng.random();
                let pt: f64 = rng.random();
                (
                    bernoulli_subset(n, ps, &mut rng),
                    bernoulli_subset(n, pt, &mut rng),
                )
            } else {
                let ps = rng.random::<f64>() * 0.2;
                let s = bernoulli_subset(n, ps, &mut rng);
                let mut in_t = vec![false; n];
                for &u in &s {
                    for v in h.neighbors_of_left(u) {
                        in_t[v] = true;
                    }
                }
                let t = (0..n).filter(|&v| in_t[v]).collect();
                (s, t)
            };
            mixing_discrepancy(h, lambda, &s, &t)
        })
        .collect();
    let violations = ratios.iter().filter(|&&r| r > 1.0 + 1e-12).count();
    MixingReport {
        trials,
        lambda,
        max_ratio: ratios.iter().copied().fold(0.0, f64::max),
        violations,
        passed: violations == 0,
    }
}

fn bernoulli_subset(n: usize, p: f64, rng: &mut ChaCha8Rng) -> Vec<usize> {
    (0..n)
        .filter(|_| rng.random_bool(p.clamp(0.0, 1.0)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphs::RegularGraph;

    #[test]
    fn basic_counts() {
        let h = DoubleCover::new(&RegularGraph::complete(2).unwrap());
        assert_eq!(edges_between(&h, &[], &[0, 1]), 0);
        assert_eq!(edges_between(&h, &[0], &[1]), 1);
        assert_eq!(edges_between(&h, &[0, 1], &[0, 1]), 2);
    }

    #[test]
    fn empty_set_passes() {
        let h = DoubleCover::new(&RegularGraph::complete(5).unwrap());
        assert_eq!(mixing_discrepancy(&h, 1.0, &[], &[0, 1, 2]), 0.0);
    }

    #[test]
    fn too_small_lambda_is_reported() {
        let h = DoubleCover::new(&RegularGraph::cycle(8).unwrap());
        let r = mixing_check(&h, 0.5, 200, 3);
        assert!(!r.passed);
        assert!(r.violations > 0);
    }
}
