use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{GraphError, RegularGraph};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralOptions {
    pub tol: f64,
    pub max_iters: usize,
    /// Seed for the start vector.
    pub seed: u64,
}

impl Default for SpectralOptions {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_iters: 200_000,
            seed: 0x5eed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralEstimate {
    /// Estimate of the largest eigenvalue magnitude orthogonal to the
    /// all-ones vector.
    pub lambda_hat: f64,
    /// `lambda_hat + tol`.
    pub certified_bound: f64,
    pub tol: f64,
    pub iterations: usize,
}

/// Largest adjacency-eigenvalue magnitude on the complement of the all-ones
/// vector, by power iteration.
///
/// The iterate is re-projected onto `1^⊥` after every product. The estimate
/// `‖A v‖` for unit `v` is nondecreasing and bounded by the target, and it
/// converges even when `+λ` and `-λ` are both eigenvalues. Iteration stops
/// once successive estimates move by less than `tol/10` and the
/// geometric-tail extrapolation of the remaining error is also below `tol/10`.
pub fn second_eigenvalue(
    g: &RegularGraph,
    opts: &SpectralOptions,
) -> Result<SpectralEstimate, GraphError> {
    if opts.tol.is_nan() || opts.tol <= 0.0 {
        return Err(GraphError::BadTolerance(opts.tol));
    }
    if !g.is_connected() {
        return Err(GraphError::Disconnected);
    }
    let n = g.num_vertices();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    project_out_ones(&mut v);
    if normalize(&mut v) == 0.0 {
        // n = 1 cannot happen for a valid graph; any nonzero start works.
        v[0] = 1.0;
        v[n - 1] -= 1.0;
        normalize(&mut v);
    }

    let target = opts.tol / 10.0;
    let mut w = vec![0.0; n];
    let mut prev = f64::NAN;
    let mut prev_delta = f64::NAN;
    let mut mu = 0.0;
    for it in 1..=opts.max_iters {
        for (u, out) in w.iter_mut().enumerate() {
            *out = g.neighbors(u).iter().map(|&x| v[x]).sum();
        }
        project_out_ones(&mut w);
        mu = normalize(&mut w);
        std::mem::swap(&mut v, &mut w);
        if mu == 0.0 {
            return Ok(estimate(0.0, opts.tol, it));
        }
        let delta = (mu - prev).abs();
        if delta.is_finite() && delta < target {
            let ratio = delta / prev_delta;
            let tail = if delta == 0.0 {
                0.0
            } else if ratio.is_finite() && ratio < 1.0 {
                delta * ratio / (1.0 - ratio)
            } else {
                f64::INFINITY
            };
            if tail < target {
                return Ok(estimate(mu, opts.tol, it));
            }
        }
        prev_delta = delta;
        prev = mu;
    }
    Err(GraphError::NoConvergence {
        iterations: opts.max_iters,
        last_estimate: mu,
    })
}

fn estimate(lambda_hat: f64, tol: f64, iterations: usize) -> SpectralEstimate {
    SpectralEstimate {
        lambda_hat,
        certified_bound: lambda_hat + tol,
        tol,
        iterations,
    }
}

fn project_out_ones(v: &mut [f64]) {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    for x in v.iter_mut() {
        *x -= mean;
    }
}

fn normalize(v: &mut [f64]) -> f64 {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        for x in v.iter_mut() {
            *x /= norm;
        }
    }
    norm
}
