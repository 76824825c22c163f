use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::rnsp::{min_tau, null_space_value, RnspError, RnspOptions};
use super::{inner_order, InnerCode, InnerCodeError};
use crate::matrix::DenseMatrix;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SearchError {
    #[error("floor(delta0*d) = 0 for delta0 = {delta0}, d = {d}")]
    ZeroOrder { delta0: f64, d: usize },
    #[error("row cap {row_cap} must be between 1 and d = {d}")]
    BadRowCap { row_cap: usize, d: usize },
    #[error("weight cap must be positive")]
    ZeroWeightCap,
    #[error(transparent)]
    InnerCode(#[from] InnerCodeError),
    #[error(transparent)]
    Rnsp(#[from] RnspError),
    #[error("no certified inner code after {tried} candidates; best kernel value {best_near_miss} (needs <= 1)")]
    Exhausted { tried: usize, best_near_miss: f64 },
}

/// Parameters for [`search_inner_code`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InnerSearch {
    pub d: usize,
    pub delta0: f64,
    pub rho0: f64,
    pub weight_cap: usize,
    pub row_cap: usize,
    /// Random candidates per row count.
    pub attempts: usize,
    pub seed: u64,
}

impl InnerSearch {
    /// `ceil(100 log2(1/δ₀))`.
    pub fn default_weight_cap(delta0: f64) -> usize {
        (100.0 * (1.0 / delta0).log2()).ceil().max(1.0) as usize
    }

    /// `ceil(100 δ₀ log2(1/δ₀) d)`, clamped to `d`.
    pub fn default_row_cap(delta0: f64, d: usize) -> usize {
        let cap = (100.0 * delta0 * (1.0 / delta0).log2() * d as f64).ceil();
        (cap.max(1.0) as usize).min(d)
    }

    /// Ones per column for a `k`-row candidate: the cap, but never more than
    /// half the rows (an all-ones column carries no information).
    pub fn column_weight_for(&self, k: usize) -> usize {
        self.weight_cap.min(k.div_ceil(2)).max(1)
    }
}

/// Random search for an inner code, smallest row count first.
///
/// For each `k` in `1..=row_cap`, draws `attempts` matrices with a fixed
/// number of ones per column at uniformly random rows. Candidates whose
/// kernel already violates the null space inequality are discarded; the first
/// survivor is certified at the smallest `τ₀` found by [`min_tau`]. When
/// `row_cap = d` and nothing random certifies, the identity is returned.
pub fn search_inner_code(
    params: &InnerSearch,
    opts: &RnspOptions,
) -> Result<InnerCode, SearchError> {
    let d = params.d;
    let order = inner_order(params.delta0, d);
    if order == 0 {
        return Err(SearchError::ZeroOrder {
            delta0: params.delta0,
            d,
        });
    }
    if params.row_cap == 0 || params.row_cap > d {
        return Err(SearchError::BadRowCap {
            row_cap: params.row_cap,
            d,
        });
    }
    if params.weight_cap == 0 {
        return Err(SearchError::ZeroWeightCap);
    }
    if !(params.rho0 > 0.0 && params.rho0 < 1.0 / 3.0) {
        return Err(InnerCodeError::BadRho0(params.rho0).into());
    }

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut tried = 0;
    let mut best = f64::INFINITY;
    for k in 1..=params.row_cap {
        let w = params.column_weight_for(k);
        for _ in 0..params.attempts {
            let mut rows = vec![vec![false; d]; k];
            #[allow(clippy::needless_range_loop)]
            for j in 0..d {
                for i in sample(&mut rng, k, w) {
                    rows[i][j] = true;
                }
            }
            tried += 1;
            let dense = to_dense(&rows);
            let kernel = null_space_value(&dense, order, params.rho0, opts)?;
            best = best.min(kernel);
            if kernel > 1.0 + opts.lp_tol {
                continue;
            }
            let found = min_tau(&dense, order, params.rho0, opts)?;
            if let Some(cert) = found.certificate {
                return Ok(InnerCode::from_certificate(
                    rows,
                    params.delta0,
                    params.rho0,
                    cert,
                ));
            }
        }
    }
    if params.row_cap == d {
        return Ok(InnerCode::identity(d, params.delta0, params.rho0, opts)?);
    }
    Err(SearchError::Exhausted {
        tried,
        best_near_miss: best,
    })
}

fn to_dense(rows: &[Vec<bool>]) -> DenseMatrix {
    let d = rows[0].len();
    let mut m = DenseMatrix::zeros(rows.len(), d);
    for (i, r) in rows.iter().enumerate() {
        for (j, &b) in r.iter().enumerate() {
            if b {
                m.set(i, j, 1.0);
            }
        }
    }
    m
}
