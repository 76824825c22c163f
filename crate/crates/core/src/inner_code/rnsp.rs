//! Exact verification of the robust null space property (RNSP).
//!
//! `M` has the RNSP of order `s` with constants `(ρ, τ)` when every `x` and
//! every support `S` with `|S| <= s` satisfy
//! `‖x_S‖₁ <= ρ ‖x_{S̄}‖₁ + τ ‖M x‖₁`.
//!
//! Both sides are positively homogeneous, so it suffices to check, for each
//! support `|S| = s` and sign pattern `σ`, that
//!
//! ```text
//! maximize  σ·x_S   subject to   ρ ‖x_{S̄}‖₁ + τ ‖M x‖₁ <= 1
//! ```
//!
//! has optimum at most 1. Smaller supports follow because shrinking `S` can
//! only lower the left side and raise the right. Patterns `σ` and `-σ` give
//! the same optimum, so the sign of the first coordinate is pinned.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lp::{LpError, LpSolution, SimplexOptions, StandardLp};
use crate::matrix::DenseMatrix;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RnspError {
    #[error("order {s} must satisfy 1 <= s <= {n}")]
    BadOrder { s: usize, n: usize },
    #[error("rho = {0} must lie in (0, 1)")]
    BadRho(f64),
    #[error("tau = {0} must be positive")]
    BadTau(f64),
    #[error("enumeration needs {needed} LPs, over the budget of {budget}")]
    BudgetExceeded { needed: u128, budget: u128 },
    #[error("LP failure on support {support:?}: {source}")]
    Lp {
        support: Vec<usize>,
        source: LpError,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RnspOptions {
    pub lp_tol: f64,
    /// Cap on `C(n, s) * 2^s`.
    pub budget: u128,
}

impl Default for RnspOptions {
    fn default() -> Self {
        Self {
            lp_tol: 1e-8,
            budget: 1_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportValue {
    pub support: Vec<usize>,
    /// Largest LP optimum over the sign patterns of this support.
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnumerationMethod {
    pub supports: usize,
    pub sign_patterns_per_support: usize,
    pub lp_tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RnspCertificate {
    pub order: usize,
    pub rho: f64,
    pub tau: f64,
    /// Lexicographic by support.
    pub per_support_values: Vec<SupportValue>,
    pub max_value: f64,
    pub method: EnumerationMethod,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RnspRefutation {
    pub support: Vec<usize>,
    pub signs: Vec<i8>,
    /// Violating vector (an unbounded ray, normalized to `‖x_S‖₁ = 1`, when
    /// `unbounded`).
    pub witness: Vec<f64>,
    /// LP optimum; infinite when unbounded.
    pub objective: f64,
    pub unbounded: bool,
    /// `‖x_S‖₁ - ρ‖x_{S̄}‖₁ - τ‖Mx‖₁` evaluated on `witness`.
    pub violation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum RnspVerdict {
    Certified(RnspCertificate),
    Refuted(RnspRefutation),
}

impl RnspVerdict {
    pub fn is_certified(&self) -> bool {
        matches!(self, RnspVerdict::Certified(_))
    }

    pub fn certificate(&self) -> Option<&RnspCertificate> {
        match self {
            RnspVerdict::Certified(c) => Some(c),
            RnspVerdict::Refuted(_) => None,
        }
    }

    pub fn refutation(&self) -> Option<&RnspRefutation> {
        match self {
            RnspVerdict::Refuted(r) => Some(r),
            RnspVerdict::Certified(_) => None,
        }
    }
}

/// `‖x_S‖₁ - ρ‖x_{S̄}‖₁ - τ‖Mx‖₁`; positive means `x` violates the inequality.
pub fn rnsp_violation(m: &DenseMatrix, support: &[usize], rho: f64, tau: f64, x: &[f64]) -> f64 {
    let mut inside = 0.0;
    let mut outside = 0.0;
    for (j, v) in x.iter().enumerate() {
        if support.contains(&j) {
            inside += v.abs();
        } else {
            outside += v.abs();
        }
    }
    let mx: f64 = m
        .mul_vec(x)
        .expect("witness length matches matrix")
        .iter()
        .map(|v| v.abs())
        .sum();
    inside - rho * outside - tau * mx
}

/// Lexicographic `k`-subsets of `0..n`.
pub fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if k > n {
        return out;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        out.push(idx.clone());
        let mut i = k;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if idx[i] != i + n - k {
                break;
            }
            if i == 0 {
                return out;
            }
        }
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

pub(crate) fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// Penalty on `‖Mx‖₁` in the support LP.
#[derive(Debug, Clone, Copy)]
enum Penalty {
    Finite(f64),
    /// `M x = 0` enforced exactly (the `τ → ∞` limit).
    Kernel,
}

enum SupportOutcome {
    Value(f64),
    Violated(RnspRefutation),
}

fn sign_patterns(s: usize) -> Vec<Vec<i8>> {
    if s == 0 {
        return vec![Vec::new()];
    }
    (0..1usize << (s - 1))
        .map(|mask| {
            let mut signs = vec![1i8; s];
            for (i, sg) in signs.iter_mut().enumerate().skip(1) {
                if mask >> (i - 1) & 1 == 1 {
                    *sg = -1;
                }
            }
            signs
        })
        .collect()
}

fn solve_support(
    m: &DenseMatrix,
    support: &[usize],
    signs: &[i8],
    rho: f64,
    penalty: Penalty,
    lp_tol: f64,
    threshold: f64,
) -> Result<SupportOutcome, LpError> {
    let (rows, n) = (m.rows(), m.cols());
    let p = |j: usize| j;
    let q = |j: usize| n + j;
    let with_r = matches!(penalty, Penalty::Finite(_));
    let rp = |i: usize| 2 * n + i;
    let rm = |i: usize| 2 * n + rows + i;
    let num_vars = if with_r {
        2 * n + 2 * rows + 1
    } else {
        2 * n + 1
    };
    let slack = num_vars - 1;

    let mut lp = StandardLp::new(num_vars);
    for (&j, &sg) in support.iter().zip(signs) {
        lp.cost[p(j)] = -(sg as f64);
        lp.cost[q(j)] = sg as f64;
    }
    let mut hint = Vec::with_capacity(rows + 1);
    for i in 0..rows {
        let mut row = vec![0.0; num_vars];
        for (j, &a) in m.row(i).iter().enumerate() {
            row[p(j)] = a;
            row[q(j)] = -a;
        }
        if with_r {
            row[rp(i)] = -1.0;
            row[rm(i)] = 1.0;
            hint.push(Some(rm(i)));
        } else {
            hint.push(None);
        }
        lp.add_row(row, 0.0);
    }
    let mut budget = vec![0.0; num_vars];
    for j in (0..n).filter(|j| !support.contains(j)) {
        budget[p(j)] = rho;
        budget[q(j)] = rho;
    }
    let tau = match penalty {
        Penalty::Finite(tau) => {
            for i in 0..rows {
                budget[rp(i)] = tau;
                budget[rm(i)] = tau;
            }
            tau
        }
        Penalty::Kernel => 0.0,
    };
    budget[slack] = 1.0;
    lp.add_row(budget, 1.0);
    hint.push(Some(slack));

    let solution = lp.solve(Some(&hint), &SimplexOptions::with_tol(lp_tol))?;
    let extract = |v: &[f64]| -> Vec<f64> { (0..n).map(|j| v[p(j)] - v[q(j)]).collect() };
    // The Kernel variant has no τ term; Mx = 0 on its witnesses anyway.
    let replay_tau = if with_r { tau } else { 0.0 };
    match solution {
        LpSolution::Optimal { x, objective } => {
            let value = -objective;
            if value > threshold {
                let witness = extract(&x);
                let violation = rnsp_violation(m, support, rho, replay_tau, &witness);
                Ok(SupportOutcome::Violated(RnspRefutation {
                    support: support.to_vec(),
                    signs: signs.to_vec(),
                    witness,
                    objective: value,
                    unbounded: false,
                    violation,
                }))
            } else {
                Ok(SupportOutcome::Value(value))
            }
        }
        LpSolution::Unbounded { ray, .. } => {
            let mut witness = extract(&ray);
            let mass: f64 = support.iter().map(|&j| witness[j].abs()).sum();
            if mass > 0.0 {
                for v in &mut witness {
                    *v /= mass;
                }
            }
            let violation = rnsp_violation(m, support, rho, replay_tau, &witness);
            Ok(SupportOutcome::Violated(RnspRefutation {
                support: support.to_vec(),
                signs: signs.to_vec(),
                witness,
                objective: f64::INFINITY,
                unbounded: true,
                violation,
            }))
        }
    }
}

/// Value over all sign patterns of one support, or the first violation.
fn evaluate_support(
    m: &DenseMatrix,
    support: &[usize],
    patterns: &[Vec<i8>],
    rho: f64,
    penalty: Penalty,
    lp_tol: f64,
) -> Result<SupportOutcome, RnspError> {
    let mut best = 0.0f64;
    for signs in patterns {
        match solve_support(m, support, signs, rho, penalty, lp_tol, 1.0 + lp_tol).map_err(
            |source| RnspError::Lp {
                support: support.to_vec(),
                source,
            },
        )? {
            SupportOutcome::Value(v) => best = best.max(v),
            violated @ SupportOutcome::Violated(_) => return Ok(violated),
        }
    }
    Ok(SupportOutcome::Value(best))
}

fn check_inputs(m: &DenseMatrix, s: usize, rho: f64, opts: &RnspOptions) -> Result<(), RnspError> {
    let n = m.cols();
    if s == 0 || s > n {
        return Err(RnspError::BadOrder { s, n });
    }
    if !(rho > 0.0 && rho < 1.0) {
        return Err(RnspError::BadRho(rho));
    }
    let needed = binomial(n, s).saturating_mul(1u128 << s.min(100));
    if needed > opts.budget {
        return Err(RnspError::BudgetExceeded {
            needed,
            budget: opts.budget,
        });
    }
    Ok(())
}

enum Scan {
    Values(Vec<f64>),
    Violated(RnspRefutation),
}

/// Evaluates every support; on violation returns the lexicographically first
/// violated support regardless of worker scheduling.
fn scan(
    m: &DenseMatrix,
    s: usize,
    rho: f64,
    penalty: Penalty,
    lp_tol: f64,
) -> Result<(Vec<Vec<usize>>, Scan), RnspError> {
    let supports = combinations(m.cols(), s);
    let patterns = sign_patterns(s);
    let eval = |sup: &Vec<usize>| evaluate_support(m, sup, &patterns, rho, penalty, lp_tol);

    let first_pass: Result<Vec<f64>, Option<RnspError>> = supports
        .par_iter()
        .map(|sup| match eval(sup) {
            Ok(SupportOutcome::Value(v)) => Ok(v),
            Ok(SupportOutcome::Violated(_)) => Err(None),
            Err(e) => Err(Some(e)),
        })
        .collect();
    match first_pass {
        Ok(values) => Ok((supports, Scan::Values(values))),
        Err(_) => {
            let first = supports
                .par_iter()
                .map(eval)
                .find_map_first(|r| match r {
                    Ok(SupportOutcome::Value(_)) => None,
                    other => Some(other),
                })
                .expect("a failing support was observed");
            match first? {
                SupportOutcome::Violated(r) => Ok((supports, Scan::Violated(r))),
                SupportOutcome::Value(_) => unreachable!("filtered above"),
            }
        }
    }
}

/// Decides the RNSP of order `s` with constants `(rho, tau)`.
///
/// Returns a certificate holding every support's LP optimum, or the first
/// `(S, σ)` whose optimum exceeds `1 + lp_tol` (or is unbounded) together with
/// a witness vector.
pub fn verify_rnsp(
    m: &DenseMatrix,
    s: usize,
    rho: f64,
    tau: f64,
    opts: &RnspOptions,
) -> Result<RnspVerdict, RnspError> {
    check_inputs(m, s, rho, opts)?;
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(RnspError::BadTau(tau));
    }
    let (supports, result) = scan(m, s, rho, Penalty::Finite(tau), opts.lp_tol)?;
    Ok(match result {
        Scan::Violated(r) => RnspVerdict::Refuted(r),
        Scan::Values(values) => {
            let max_value = values.iter().copied().fold(0.0, f64::max);
            let method = EnumerationMethod {
                supports: supports.len(),
                sign_patterns_per_support: sign_patterns(s).len(),
                lp_tol: opts.lp_tol,
            };
            RnspVerdict::Certified(RnspCertificate {
                order: s,
                rho,
                tau,
                per_support_values: supports
                    .into_iter()
                    .zip(values)
                    .map(|(support, value)| SupportValue { support, value })
                    .collect(),
                max_value,
                method,
            })
        }
    })
}

/// The `τ → ∞` limit: largest `‖x_S‖₁` over kernel vectors with
/// `ρ‖x_{S̄}‖₁ <= 1`, maximized over supports of size `s`. A finite `τ`
/// exists only if this is at most one (up to `lp_tol`).
pub fn null_space_value(
    m: &DenseMatrix,
    s: usize,
    rho: f64,
    opts: &RnspOptions,
) -> Result<f64, RnspError> {
    check_inputs(m, s, rho, opts)?;
    // Evaluate without early exit so the value is exact even above 1.
    let supports = combinations(m.cols(), s);
    let patterns = sign_patterns(s);
    let values: Result<Vec<f64>, RnspError> = supports
        .par_iter()
        .map(|sup| {
            let mut best = 0.0f64;
            for signs in &patterns {
                let out = solve_support(
                    m,
                    sup,
                    signs,
                    rho,
                    Penalty::Kernel,
                    opts.lp_tol,
                    f64::INFINITY,
                )
                .map_err(|source| RnspError::Lp {
                    support: sup.clone(),
                    source,
                })?;
                match out {
                    SupportOutcome::Value(v) => best = best.max(v),
                    SupportOutcome::Violated(_) => return Ok(f64::INFINITY),
                }
            }
            Ok(best)
        })
        .collect();
    Ok(values?.into_iter().fold(0.0, f64::max))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinTau {
    /// Smallest certified `τ` found, within a factor 1.01 of the infimum;
    /// infinite when no `τ` works.
    pub tau: f64,
    pub certificate: Option<RnspCertificate>,
}

const TAU_CEILING: f64 = 1e12;
const TAU_FLOOR: f64 = 1e-12;

/// Geometric bisection for the smallest `τ` certifying order `s` at `rho`.
pub fn min_tau(
    m: &DenseMatrix,
    s: usize,
    rho: f64,
    opts: &RnspOptions,
) -> Result<MinTau, RnspError> {
    let infinite = MinTau {
        tau: f64::INFINITY,
        certificate: None,
    };
    if null_space_value(m, s, rho, opts)? > 1.0 + opts.lp_tol {
        return Ok(infinite);
    }
    let check = |tau: f64| -> Result<Option<RnspCertificate>, RnspError> {
        Ok(match verify_rnsp(m, s, rho, tau, opts)? {
            RnspVerdict::Certified(c) => Some(c),
            RnspVerdict::Refuted(_) => None,
        })
    };

    let (mut lo, mut hi, mut cert);
    match check(1.0)? {
        Some(c) => {
            hi = 1.0;
            cert = c;
            lo = 0.5;
            loop {
                if lo < TAU_FLOOR {
                    return Ok(MinTau {
                        tau: hi,
                        certificate: Some(cert),
                    });
                }
                match check(lo)? {
                    Some(c) => {
                        hi = lo;
                        cert = c;
                        lo /= 2.0;
                    }
                    None => break,
                }
            }
        }
        None => {
            lo = 1.0;
            hi = 2.0;
            loop {
                if hi > TAU_CEILING {
                    return Ok(infinite);
                }
                if let Some(c) = check(hi)? {
                    cert = c;
                    break;
                }
                lo = hi;
                hi *= 2.0;
            }
        }
    }
    while hi / lo > 1.01 {
        let mid = (lo * hi).sqrt();
        match check(mid)? {
            Some(c) => {
                hi = mid;
                cert = c;
            }
            None => lo = mid,
        }
    }
    Ok(MinTau {
        tau: hi,
        certificate: Some(cert),
    })
}
