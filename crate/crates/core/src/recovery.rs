//! Basis pursuit with an ℓ1 noise budget and the ℓ1/ℓ1 recovery guarantee.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lp::{LpError, LpSolution, SimplexOptions, StandardLp};
use crate::matrix::DenseMatrix;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RecoveryError {
    #[error("measurement vector has length {got}, matrix has {expected} rows")]
    Dimension { expected: usize, got: usize },
    #[error("noise budget eta = {0} must be a finite nonnegative number")]
    BadEta(f64),
    #[error("sparsity s = {s} exceeds signal length {n}")]
    BadSparsity { s: usize, n: usize },
    #[error("recovery constants need 0 < rho < 1 and tau > 0 (got rho = {rho}, tau = {tau})")]
    BadConstants { rho: f64, tau: f64 },
    #[error("basis pursuit reported an unbounded objective")]
    Unbounded,
    #[error(transparent)]
    Lp(#[from] LpError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Norm {
    L1,
    L2,
}

fn norm(v: impl Iterator<Item = f64>, p: Norm) -> f64 {
    match p {
        Norm::L1 => v.map(f64::abs).sum(),
        Norm::L2 => v.map(|a| a * a).sum::<f64>().sqrt(),
    }
}

pub fn l1_norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v.abs()).sum()
}

/// Indices of the `s` largest-magnitude entries; among equal magnitudes the
/// lower index wins.
pub fn top_s(x: &[f64], s: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| match x[b].abs().total_cmp(&x[a].abs()) {
        Ordering::Equal => a.cmp(&b),
        o => o,
    });
    idx.truncate(s);
    idx
}

/// `ℓp` norm of `x` after removing its `s` largest-magnitude entries: the
/// best `s`-term approximation error.
pub fn sigma_s(x: &[f64], s: usize, p: Norm) -> f64 {
    let mut keep = vec![true; x.len()];
    for i in top_s(x, s) {
        keep[i] = false;
    }
    norm(x.iter().zip(&keep).filter(|(_, &k)| k).map(|(&v, _)| v), p)
}

/// `A`, `y`, `η` and the sparsity level the guarantee is measured against.
#[derive(Debug, Clone)]
pub struct SparseRecoveryInstance {
    pub a: DenseMatrix,
    pub y: Vec<f64>,
    pub eta: f64,
    pub s: usize,
}

impl SparseRecoveryInstance {
    pub fn new(a: DenseMatrix, y: Vec<f64>, eta: f64, s: usize) -> Result<Self, RecoveryError> {
        if y.len() != a.rows() {
            return Err(RecoveryError::Dimension {
                expected: a.rows(),
                got: y.len(),
            });
        }
        if !(eta.is_finite() && eta >= 0.0) {
            return Err(RecoveryError::BadEta(eta));
        }
        if s > a.cols() {
            return Err(RecoveryError::BadSparsity { s, n: a.cols() });
        }
        Ok(Self { a, y, eta, s })
    }

    pub fn solve(&self, lp_tol: f64) -> Result<RecoveryResult, RecoveryError> {
        l1_minimize(&self.a, &self.y, self.eta, lp_tol)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryResult {
    pub z: Vec<f64>,
    /// `‖z‖₁`.
    pub objective: f64,
    /// `‖y − Az‖₁`.
    pub residual: f64,
    /// `C₁σ_s(x)₁ + C₂η − ‖z − x‖₁`, once a ground truth has been compared.
    pub guarantee_slack: Option<f64>,
}

impl RecoveryResult {
    pub fn record_guarantee(&mut self, report: &GuaranteeReport) {
        self.guarantee_slack = Some(report.rhs - report.lhs);
    }
}

/// `min ‖z‖₁  s.t.  ‖y − Az‖₁ ≤ η`, as the linear program
///
/// ```text
/// min Σ(z⁺ + z⁻)  s.t.  A(z⁺ − z⁻) + r⁺ − r⁻ = y,  Σ(r⁺ + r⁻) + w = η
/// ```
///
/// with all variables nonnegative. The starting basis puts `r^{sign(yᵢ)}` in
/// row `i` and `w` in the budget row, so phase 1 only has work to do when
/// `‖y‖₁ > η`.
pub fn l1_minimize(
    a: &DenseMatrix,
    y: &[f64],
    eta: f64,
    lp_tol: f64,
) -> Result<RecoveryResult, RecoveryError> {
    let (m, n) = (a.rows(), a.cols());
    if y.len() != m {
        return Err(RecoveryError::Dimension {
            expected: m,
            got: y.len(),
        });
    }
    if !(eta.is_finite() && eta >= 0.0) {
        return Err(RecoveryError::BadEta(eta));
    }
    // Columns: z⁺ [0,n), z⁻ [n,2n), r⁺ [2n,2n+m), r⁻ [2n+m,2n+2m), w.
    let (rp, rm, w) = (2 * n, 2 * n + m, 2 * n + 2 * m);
    let mut lp = StandardLp::new(w + 1);
    for c in &mut lp.cost[..2 * n] {
        *c = 1.0;
    }
    let mut hint = Vec::with_capacity(m + 1);
    for (i, &yi) in y.iter().enumerate() {
        let mut row = vec![0.0; w + 1];
        for (j, &v) in a.row(i).iter().enumerate() {
            row[j] = v;
            row[n + j] = -v;
        }
        row[rp + i] = 1.0;
        row[rm + i] = -1.0;
        lp.add_row(row, yi);
        hint.push(Some(if yi >= 0.0 { rp + i } else { rm + i }));
    }
    let mut budget = vec![0.0; w + 1];
    for v in &mut budget[rp..] {
        *v = 1.0;
    }
    lp.add_row(budget, eta);
    hint.push(Some(w));

    let x = match lp.solve(Some(&hint), &SimplexOptions::with_tol(lp_tol))? {
        LpSolution::Optimal { x, .. } => x,
        LpSolution::Unbounded { .. } => return Err(RecoveryError::Unbounded),
    };
    let z: Vec<f64> = (0..n).map(|j| x[j] - x[n + j]).collect();
    let az = a.mul_vec(&z).map_err(|_| RecoveryError::Dimension {
        expected: n,
        got: z.len(),
    })?;
    let residual = y.iter().zip(&az).map(|(p, q)| (p - q).abs()).sum();
    Ok(RecoveryResult {
        objective: l1_norm(&z),
        z,
        residual,
        guarantee_slack: None,
    })
}

/// `C₁ = 2(1+ρ)/(1−ρ)` and `C₂ = 4τ/(1−ρ)`.
pub fn recovery_constants(rho: f64, tau: f64) -> Result<(f64, f64), RecoveryError> {
    if !(rho > 0.0 && rho < 1.0 && tau > 0.0 && tau.is_finite()) {
        return Err(RecoveryError::BadConstants { rho, tau });
    }
    Ok((2.0 * (1.0 + rho) / (1.0 - rho), 4.0 * tau / (1.0 - rho)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct GuaranteeReport {
    pub C1: f64,
    pub C2: f64,
    /// `‖z − x‖₁`.
    pub lhs: f64,
    /// `C₁σ_s(x)₁ + C₂η`.
    pub rhs: f64,
    pub sigma_s: f64,
    pub pass: bool,
}

/// Checks `‖z − x‖₁ ≤ C₁σ_s(x)₁ + C₂η + tol`.
pub fn guarantee_check(
    z: &[f64],
    x_true: &[f64],
    s: usize,
    eta: f64,
    rho: f64,
    tau: f64,
    tol: f64,
) -> Result<GuaranteeReport, RecoveryError> {
    if z.len() != x_true.len() {
        return Err(RecoveryError::Dimension {
            expected: x_true.len(),
            got: z.len(),
        });
    }
    let (c1, c2) = recovery_constants(rho, tau)?;
    let lhs = z.iter().zip(x_true).map(|(a, b)| (a - b).abs()).sum();
    let sig = sigma_s(x_true, s, Norm::L1);
    let rhs = c1 * sig + c2 * eta;
    Ok(GuaranteeReport {
        C1: c1,
        C2: c2,
        lhs,
        rhs,
        sigma_s: sig,
        pass: lhs <= rhs + tol,
    })
}

/// Instance file: a Matrix Market path plus the measurements.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceFile {
    pub matrix_path: String,
    pub y: Vec<f64>,
    pub eta: f64,
    pub s: usize,
}
