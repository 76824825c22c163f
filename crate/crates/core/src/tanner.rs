//! Tanner measurement matrices: one `C₀` block per vertex of the double
//! cover, applied to that vertex's incident edge coordinates.

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graphs::{DoubleCover, Side};
use crate::inner_code::InnerCode;
use crate::matrix::{self, BinaryCsr, DenseMatrix, MatrixError};

#[derive(Debug, Error)]
pub enum TannerError {
    #[error("inner code has d = {inner} columns but the graph is {graph}-regular")]
    DegreeMismatch { inner: usize, graph: usize },
    #[error("input has length {got}, expected {expected}")]
    Dimension { expected: usize, got: usize },
    #[error(transparent)]
    Matrix(#[from] MatrixError),
}

/// Parameters behind an assembled matrix; also the JSON sidecar written next
/// to exported Matrix Market files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct TannerProvenance {
    pub N: usize,
    pub d: usize,
    pub lambda_certified: Option<f64>,
    pub k: usize,
    pub delta0: f64,
    pub rho0: f64,
    pub tau0: f64,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructureReport {
    pub rows: usize,
    pub cols: usize,
    pub nnz: usize,
    pub max_col_weight: usize,
    /// `rows / cols = 2k / d`.
    pub rows_per_n_ratio: f64,
}

/// The `2kN × dN` binary matrix whose product with `x` stacks
/// `C₀ x_{Γ(v)}` over all left vertices (ascending), then all right vertices.
#[derive(Debug, Clone)]
pub struct TannerMatrix {
    csr: BinaryCsr,
    /// `Γ(v)` for every left vertex, then every right vertex.
    gamma: Vec<usize>,
    /// Column positions of the ones in each inner row.
    inner_rows: Vec<Vec<usize>>,
    n: usize,
    d: usize,
    inner: InnerCode,
    provenance: TannerProvenance,
}

impl TannerMatrix {
    pub fn assemble(h: &DoubleCover, c0: &InnerCode) -> Result<Self, TannerError> {
        let (n, d, k) = (h.num_vertices(), h.degree(), c0.k());
        if c0.d() != d {
            return Err(TannerError::DegreeMismatch {
                inner: c0.d(),
                graph: d,
            });
        }
        let pattern: Vec<Vec<usize>> = (0..k)
            .map(|j| (0..d).filter(|&i| c0.get(j, i)).collect())
            .collect();
        let mut lists = Vec::with_capacity(2 * k * n);
        let mut all_gamma = Vec::with_capacity(2 * n * d);
        for side in [Side::Left, Side::Right] {
            for v in 0..n {
                let gamma = h.gamma(side, v);
                all_gamma.extend_from_slice(gamma);
                for row in &pattern {
                    lists.push(row.iter().map(|&i| gamma[i]).collect());
                }
            }
        }
        let csr = BinaryCsr::from_row_lists(n * d, lists)?;
        Ok(Self {
            csr,
            gamma: all_gamma,
            inner_rows: pattern,
            n,
            d,
            inner: c0.clone(),
            provenance: TannerProvenance {
                N: n,
                d,
                lambda_certified: h.certified_lambda(),
                k,
                delta0: c0.delta0(),
                rho0: c0.rho0(),
                tau0: c0.tau0(),
                seed: None,
            },
        })
    }

    /// Records the generator seed in the provenance sidecar.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.provenance.seed = Some(seed);
        self
    }

    pub fn rows(&self) -> usize {
        self.csr.rows()
    }

    pub fn cols(&self) -> usize {
        self.csr.cols()
    }

    pub fn k(&self) -> usize {
        self.inner.k()
    }

    pub fn num_vertices(&self) -> usize {
        self.n
    }

    pub fn degree(&self) -> usize {
        self.d
    }

    pub fn inner(&self) -> &InnerCode {
        &self.inner
    }

    pub fn provenance(&self) -> &TannerProvenance {
        &self.provenance
    }

    pub fn pattern(&self) -> &BinaryCsr {
        &self.csr
    }

    /// Rows belonging to vertex `v` on `side`.
    pub fn block_rows(&self, side: Side, v: usize) -> std::ops::Range<usize> {
        let b = match side {
            Side::Left => v,
            Side::Right => self.n + v,
        };
        b * self.k()..(b + 1) * self.k()
    }

    fn check_len(&self, x: &[f64]) -> Result<(), TannerError> {
        if x.len() != self.cols() {
            return Err(TannerError::Dimension {
                expected: self.cols(),
                got: x.len(),
            });
        }
        Ok(())
    }

    /// `y` for the vertex blocks starting at `first_block`: gathers
    /// `x_{Γ(v)}` once per vertex and applies `C₀` to it.
    fn blocks_into(&self, x: &[f64], first_block: usize, out: &mut [f64]) {
        let (d, k) = (self.d, self.inner_rows.len());
        if k == 0 {
            return;
        }
        let mut local = vec![0.0; d];
        for (b, block) in out.chunks_mut(k).enumerate() {
            let v = first_block + b;
            for (l, &e) in local.iter_mut().zip(&self.gamma[v * d..(v + 1) * d]) {
                *l = x[e];
            }
            for (yj, row) in block.iter_mut().zip(&self.inner_rows) {
                let mut acc = 0.0;
                for &i in row {
                    acc += local[i];
                }
                *yj = acc;
            }
        }
    }

    /// Block product; cost proportional to `nnz`.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>, TannerError> {
        let mut y = vec![0.0; self.rows()];
        self.apply_into(x, &mut y)?;
        Ok(y)
    }

    pub fn apply_into(&self, x: &[f64], y: &mut [f64]) -> Result<(), TannerError> {
        self.check_len(x)?;
        if y.len() != self.rows() {
            return Err(TannerError::Dimension {
                expected: self.rows(),
                got: y.len(),
            });
        }
        self.blocks_into(x, 0, y);
        Ok(())
    }

    /// Same result as [`apply`](Self::apply), bit for bit, with vertex blocks
    /// split across the rayon pool.
    pub fn par_apply(&self, x: &[f64]) -> Result<Vec<f64>, TannerError> {
        self.check_len(x)?;
        let mut y = vec![0.0; self.rows()];
        let chunk = self.k().max(1) * 64;
        y.par_chunks_mut(chunk)
            .enumerate()
            .for_each(|(c, out)| self.blocks_into(x, c * 64, out));
        Ok(y)
    }

    pub fn structure_report(&self) -> StructureReport {
        StructureReport {
            rows: self.rows(),
            cols: self.cols(),
            nnz: self.csr.nnz(),
            max_col_weight: self.csr.column_weights().into_iter().max().unwrap_or(0),
            rows_per_n_ratio: self.rows() as f64 / self.cols() as f64,
        }
    }

    pub fn to_dense(&self) -> DenseMatrix {
        self.csr.to_dense()
    }

    pub fn to_matrix_market(&self) -> String {
        self.to_matrix_market_with(&[])
    }

    /// Matrix Market text with extra `%` comment lines after the parameters.
    pub fn to_matrix_market_with(&self, extra: &[String]) -> String {
        let p = &self.provenance;
        let mut comments = vec![format!(
            "Tanner measurement matrix N={} d={} k={} delta0={} rho0={} tau0={}",
            p.N, p.d, p.k, p.delta0, p.rho0, p.tau0
        )];
        comments.extend_from_slice(extra);
        matrix::write_matrix_market(&self.csr, &comments)
    }

    pub fn export_matrix_market(&self, path: &Path) -> Result<(), TannerError> {
        fs::write(path, self.to_matrix_market()).map_err(MatrixError::from)?;
        Ok(())
    }
}

/// Reads a binary coordinate Matrix Market file back into pattern form.
pub fn import_matrix_market(path: &Path) -> Result<BinaryCsr, TannerError> {
    Ok(matrix::read_matrix_market(path)?.to_binary()?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphs::RegularGraph;
    use crate::inner_code::RnspOptions;

    fn ones_code(d: usize) -> InnerCode {
        InnerCode::from_certificate(
            vec![vec![true; d]],
            1.0 / d as f64,
            0.25,
            crate::inner_code::verify_rnsp(
                &DenseMatrix::from_rows(&[vec![1.0; d]]).unwrap(),
                1,
                0.99,
                1.0,
                &RnspOptions::default(),
            )
            .map(|v| match v {
                crate::inner_code::RnspVerdict::Certified(c) => c,
                crate::inner_code::RnspVerdict::Refuted(r) => panic!("{r:?}"),
            })
            .unwrap(),
        )
    }

    #[test]
    fn single_edge_with_scalar_code() {
        let h = DoubleCover::new(&RegularGraph::complete(2).unwrap());
        let c0 = ones_code(1);
        let a = TannerMatrix::assemble(&h, &c0).unwrap();
        assert_eq!((a.rows(), a.cols()), (4, 2));
        assert_eq!(a.pattern().column_weights(), vec![2, 2]);
        // Left 0 holds edge 0, left 1 edge 1; right 1 holds edge 0, right 0 edge 1.
        assert_eq!(a.apply(&[3.0, 5.0]).unwrap(), vec![3.0, 5.0, 5.0, 3.0]);
    }

    #[test]
    fn degree_mismatch() {
        let h = DoubleCover::new(&RegularGraph::complete(4).unwrap());
        let c0 = InnerCode::identity(2, 0.5, 0.2, &RnspOptions::default()).unwrap();
        assert!(matches!(
            TannerMatrix::assemble(&h, &c0),
            Err(TannerError::DegreeMismatch { inner: 2, graph: 3 })
        ));
    }

    #[test]
    fn identity_code_stacks_each_edge_twice() {
        let h = DoubleCover::new(&RegularGraph::complete(4).unwrap());
        let c0 = InnerCode::identity(3, 0.34, 0.2, &RnspOptions::default()).unwrap();
        let a = TannerMatrix::assemble(&h, &c0).unwrap();
        let rep = a.structure_report();
        assert_eq!(rep.max_col_weight, 2);
        assert_eq!(rep.rows, 2 * 3 * 4);
        let x: Vec<f64> = (0..12).map(|i| i as f64).collect();
        let mut y = a.apply(&x).unwrap();
        assert_eq!(y, a.pattern().mul_vec(&x).unwrap());
        y.sort_by(f64::total_cmp);
        let mut twice: Vec<f64> = x.iter().chain(&x).copied().collect();
        twice.sort_by(f64::total_cmp);
        assert_eq!(y, twice);
    }

    #[test]
    fn dimension_errors() {
        let h = DoubleCover::new(&RegularGraph::complete(2).unwrap());
        let a = TannerMatrix::assemble(&h, &ones_code(1)).unwrap();
        assert!(a.apply(&[1.0]).is_err());
        assert!(a.par_apply(&[1.0, 2.0, 3.0]).is_err());
        let mut short = vec![0.0; 3];
        assert!(a.apply_into(&[1.0, 2.0], &mut short).is_err());
    }
}
