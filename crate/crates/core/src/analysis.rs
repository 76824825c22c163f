//! Executable versions of the structural steps behind the Tanner RNSP
//! guarantee: support peeling, the contraction of the peeling vertex sets,
//! the per-vertex summation argument, constant lifting and direct
//! certification of small assembled matrices.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graphs::{DoubleCover, Side};
use crate::inner_code::rnsp::EnumerationMethod;
use crate::inner_code::InnerCode;
use crate::inner_code::{
    inner_order, verify_rnsp, RnspCertificate, RnspError, RnspOptions, RnspVerdict,
};
use crate::recovery::l1_norm;
use crate::tanner::TannerMatrix;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("edge label {0} is out of range")]
    EdgeOutOfRange(usize),
    #[error("edge label {0} appears twice in the support")]
    DuplicateEdge(usize),
    #[error("floor(delta0*d) = 0; peeling needs delta0*d >= 1")]
    ZeroThreshold,
    #[error("peeling stalled at step {step} with {remaining} edges left")]
    Stalled { step: usize, remaining: usize },
    #[error("rho0 = {0} must lie in (0, 1/3) for the lifted rho to stay below 1")]
    BadRho0(f64),
    #[error("tau0 = {0} must be positive")]
    BadTau0(f64),
    #[error("support has a vertex above delta0*d on both sides (left {left}, right {right})")]
    NoAdmissibleSide { left: usize, right: usize },
    #[error("vector has length {got}, expected {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("inner code has d = {inner}, graph degree is {graph}")]
    DegreeMismatch { inner: usize, graph: usize },
    #[error("contraction hypotheses fail: {}", .0.join("; "))]
    Hypotheses(Vec<String>),
    #[error(transparent)]
    Rnsp(#[from] RnspError),
}

/// One step of the peeling: `T_i` leaves the support, `S_i` remains, and
/// `V_i` is the set of `side_i` vertices still touched by `S_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeelingStep {
    pub i: usize,
    pub side: Side,
    pub t: Vec<usize>,
    pub s: Vec<usize>,
    pub v: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Peeling {
    pub support: Vec<usize>,
    pub delta0: f64,
    /// `floor(δ₀d)`: a vertex is peeled when its degree is at most this.
    pub threshold: usize,
    pub steps: Vec<PeelingStep>,
}

/// Row of the exported trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub i: usize,
    pub side: Side,
    #[serde(rename = "T_size")]
    pub t_size: usize,
    #[serde(rename = "V_size")]
    pub v_size: usize,
}

impl Peeling {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn trace(&self) -> Vec<TraceRow> {
        self.steps
            .iter()
            .map(|st| TraceRow {
                i: st.i,
                side: st.side,
                t_size: st.t.len(),
                v_size: st.v.len(),
            })
            .collect()
    }

    pub fn trace_json(&self) -> String {
        serde_json::to_string(&self.trace()).expect("trace rows serialize")
    }
}

fn side_of_step(i: usize) -> Side {
    if i % 2 == 1 {
        Side::Left
    } else {
        Side::Right
    }
}

/// Alternating left/right peeling of an edge support.
///
/// At odd steps, edges whose left endpoint has at most `δ₀d` support edges
/// form `T_i`; the rest carry over to `S_i`. Even steps do the same on the
/// right. Stops once `S_i` is empty, and reports a stall if two consecutive
/// steps remove nothing.
pub fn decompose_support(
    h: &DoubleCover,
    support: &[usize],
    delta0: f64,
) -> Result<Peeling, AnalysisError> {
    let ne = h.num_edges();
    let mut seen = vec![false; ne];
    for &e in support {
        if e >= ne {
            return Err(AnalysisError::EdgeOutOfRange(e));
        }
        if seen[e] {
            return Err(AnalysisError::DuplicateEdge(e));
        }
        seen[e] = true;
    }
    let threshold = inner_order(delta0, h.degree());
    if threshold == 0 {
        return Err(AnalysisError::ZeroThreshold);
    }

    let n = h.num_vertices();
    let mut current: Vec<usize> = support.to_vec();
    current.sort_unstable();
    let mut steps = Vec::new();
    let mut idle = 0;
    let mut deg = vec![0usize; n];
    let mut i = 0;
    while !current.is_empty() {
        i += 1;
        if i > ne + 2 {
            return Err(AnalysisError::Stalled {
                step: i,
                remaining: current.len(),
            });
        }
        let side = side_of_step(i);
        deg.iter_mut().for_each(|x| *x = 0);
        for &e in &current {
            deg[h.endpoint(e, side)] += 1;
        }
        let (t, s): (Vec<usize>, Vec<usize>) = current
            .iter()
            .partition(|&&e| deg[h.endpoint(e, side)] <= threshold);
        let mut v: Vec<usize> = s.iter().map(|&e| h.endpoint(e, side)).collect();
        v.sort_unstable();
        v.dedup();
        if t.is_empty() {
            idle += 1;
            if idle >= 2 {
                return Err(AnalysisError::Stalled {
                    step: i,
                    remaining: s.len(),
                });
            }
        } else {
            idle = 0;
        }
        current = s.clone();
        steps.push(PeelingStep { i, side, t, s, v });
    }
    Ok(Peeling {
        support: support.to_vec(),
        delta0,
        threshold,
        steps,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractionPair {
    pub i: usize,
    pub v_i: usize,
    pub v_next: usize,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractionReport {
    /// `δN/δ₀`.
    pub vertex_bound: f64,
    /// `(λ/2)/(δ₀d − δd/δ₀ − λ/2)`.
    pub predicted_ratio: f64,
    pub pairs: Vec<ContractionPair>,
    pub max_v: usize,
    pub worst_ratio: f64,
    pub vertex_bound_holds: bool,
    /// Every pair satisfies `|V_{i+1}| < |V_i|/3` and the predicted ratio.
    pub contraction_holds: bool,
    pub pass: bool,
}

/// Checks `|V_i| < δN/δ₀` for every step and `|V_{i+1}| < |V_i|/3` (and the
/// sharper `λ`-dependent ratio) for every consecutive pair with `S_i ≠ ∅`.
///
/// Refuses to run unless `δ₀ = 2√δ`, `d > 16/δ`, `λ < 3√d` and
/// `|S| ≤ δNd`.
pub fn contraction_check(
    peeling: &Peeling,
    lambda: f64,
    d: usize,
    n: usize,
    delta: f64,
    delta0: f64,
) -> Result<ContractionReport, AnalysisError> {
    let df = d as f64;
    let mut failed = Vec::new();
    if !(delta > 0.0 && delta < 1.0) {
        failed.push(format!("delta = {delta} is not in (0, 1)"));
    }
    if (delta0 - 2.0 * delta.sqrt()).abs() > 1e-9 {
        failed.push(format!("delta0 = {delta0} differs from 2*sqrt(delta)"));
    }
    if df <= 16.0 / delta {
        failed.push(format!("d = {d} is not above 16/delta = {}", 16.0 / delta));
    }
    if !(lambda >= 0.0 && lambda < 3.0 * df.sqrt()) {
        failed.push(format!(
            "lambda = {lambda} is not below 3*sqrt(d) = {}",
            3.0 * df.sqrt()
        ));
    }
    if peeling.support.len() as f64 > delta * (n * d) as f64 + 1e-9 {
        failed.push(format!(
            "|S| = {} exceeds delta*N*d = {}",
            peeling.support.len(),
            delta * (n * d) as f64
        ));
    }
    if !failed.is_empty() {
        return Err(AnalysisError::Hypotheses(failed));
    }

    let vertex_bound = delta * n as f64 / delta0;
    let predicted_ratio = (lambda / 2.0) / (delta0 * df - delta * df / delta0 - lambda / 2.0);
    let sizes: Vec<usize> = peeling.steps.iter().map(|s| s.v.len()).collect();
    let mut pairs = Vec::new();
    for w in 0..sizes.len() {
        if peeling.steps[w].s.is_empty() {
            break;
        }
        let next = sizes.get(w + 1).copied().unwrap_or(0);
        pairs.push(ContractionPair {
            i: peeling.steps[w].i,
            v_i: sizes[w],
            v_next: next,
            ratio: next as f64 / sizes[w] as f64,
        });
    }
    let max_v = sizes.iter().copied().max().unwrap_or(0);
    let worst_ratio = pairs.iter().map(|p| p.ratio).fold(0.0, f64::max);
    let vertex_bound_holds = sizes.iter().all(|&v| (v as f64) < vertex_bound);
    let contraction_holds = pairs.iter().all(|p| {
        p.v_next == 0
            || (3 * p.v_next < p.v_i && (p.v_next as f64) < predicted_ratio * p.v_i as f64)
    });
    Ok(ContractionReport {
        vertex_bound,
        predicted_ratio,
        pairs,
        max_v,
        worst_ratio,
        vertex_bound_holds,
        contraction_holds,
        pass: vertex_bound_holds && contraction_holds,
    })
}

/// `ρ = 2ρ₀/(1−ρ₀)`, `τ = τ₀/(1−ρ₀)`.
pub fn lift_constants(rho0: f64, tau0: f64) -> Result<(f64, f64), AnalysisError> {
    if !(rho0 > 0.0 && rho0 < 1.0 / 3.0) {
        return Err(AnalysisError::BadRho0(rho0));
    }
    if !(tau0 > 0.0 && tau0.is_finite()) {
        return Err(AnalysisError::BadTau0(tau0));
    }
    Ok((2.0 * rho0 / (1.0 - rho0), tau0 / (1.0 - rho0)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockInequalityReport {
    /// Side on which every vertex has at most `δ₀d` support edges.
    pub side: Side,
    /// Smallest per-vertex slack of
    /// `ρ₀‖x_{Γ(v)∖Γ(v,S)}‖₁ + τ₀‖C₀x_{Γ(v)}‖₁ − ‖x_{Γ(v,S)}‖₁`.
    pub per_vertex_min_slack: f64,
    /// Slack of the summed inequality `‖x_S‖₁ ≤ ρ₀‖x_{S̄}‖₁ + τ₀Σ_v‖C₀x_{Γ(v)}‖₁`.
    pub summed_slack: f64,
    /// Slack of `‖x_S‖₁ ≤ ρ₀/(1+ρ₀)‖x‖₁ + τ₀/(1+ρ₀)Σ_v‖C₀x_{Γ(v)}‖₁`.
    pub rearranged_slack: f64,
    /// Same with the full `‖Ax‖₁` on the right.
    pub full_slack: f64,
}

impl BlockInequalityReport {
    pub fn min_slack(&self) -> f64 {
        self.per_vertex_min_slack
            .min(self.summed_slack)
            .min(self.rearranged_slack)
            .min(self.full_slack)
    }
}

/// Evaluates the summation argument for an edge support that is sparse at
/// every vertex of one side. Left is preferred when both sides qualify.
pub fn per_block_inequality_check(
    h: &DoubleCover,
    c0: &InnerCode,
    x: &[f64],
    support: &[usize],
) -> Result<BlockInequalityReport, AnalysisError> {
    let (n, d) = (h.num_vertices(), h.degree());
    if c0.d() != d {
        return Err(AnalysisError::DegreeMismatch {
            inner: c0.d(),
            graph: d,
        });
    }
    if x.len() != h.num_edges() {
        return Err(AnalysisError::Dimension {
            expected: h.num_edges(),
            got: x.len(),
        });
    }
    let mut in_s = vec![false; x.len()];
    for &e in support {
        if e >= x.len() {
            return Err(AnalysisError::EdgeOutOfRange(e));
        }
        in_s[e] = true;
    }
    let threshold = inner_order(c0.delta0(), d);
    let max_deg = |side: Side| {
        (0..n)
            .map(|v| h.gamma(side, v).iter().filter(|&&e| in_s[e]).count())
            .max()
            .unwrap_or(0)
    };
    let (left, right) = (max_deg(Side::Left), max_deg(Side::Right));
    let side = if left <= threshold {
        Side::Left
    } else if right <= threshold {
        Side::Right
    } else {
        return Err(AnalysisError::NoAdmissibleSide { left, right });
    };

    let (rho0, tau0) = (c0.rho0(), c0.tau0());
    let block_norm = |s: Side, v: usize| {
        let local: Vec<f64> = h.gamma(s, v).iter().map(|&e| x[e]).collect();
        l1_norm(&c0.apply(&local))
    };
    let mut per_vertex_min = f64::INFINITY;
    let mut side_sum = 0.0;
    for v in 0..n {
        let (mut on, mut off) = (0.0, 0.0);
        for &e in h.gamma(side, v) {
            if in_s[e] {
                on += x[e].abs();
            } else {
                off += x[e].abs();
            }
        }
        let b = block_norm(side, v);
        side_sum += b;
        per_vertex_min = per_vertex_min.min(rho0 * off + tau0 * b - on);
    }
    let other_sum: f64 = (0..n).map(|v| block_norm(side.other(), v)).sum();
    let xs: f64 = support.iter().map(|&e| x[e].abs()).sum();
    let total = l1_norm(x);
    let rearranged_rhs = |ax: f64| rho0 / (1.0 + rho0) * total + tau0 / (1.0 + rho0) * ax;
    Ok(BlockInequalityReport {
        side,
        per_vertex_min_slack: if n == 0 { 0.0 } else { per_vertex_min },
        summed_slack: rho0 * (total - xs) + tau0 * side_sum - xs,
        rearranged_slack: rearranged_rhs(side_sum) - xs,
        full_slack: rearranged_rhs(side_sum + other_sum) - xs,
    })
}

/// Why a direct certificate at the lifted constants is expected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Expectation {
    /// `s ≤ floor(δ₀d)`: every support of size `s` is already sparse at every
    /// vertex, so one application of the summation argument suffices.
    SingleSlice,
    /// The full expander hypotheses hold and `s ≤ δNd` with `δ = δ₀²/4`.
    Expander,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TannerRnspReport {
    pub order: usize,
    pub rho: f64,
    pub tau: f64,
    pub lifted_rho: f64,
    pub lifted_tau: f64,
    pub verdict: RnspVerdict,
    pub expectation: Option<Expectation>,
    /// Set when the requested constants are at least the lifted ones, a
    /// certificate was expected, and the enumeration refuted it anyway.
    pub contradiction: bool,
}

/// Direct RNSP check of an assembled matrix by exhaustive LP enumeration, with
/// a consistency check against what the inner code's certificate predicts.
pub fn certify_tanner_rnsp(
    a: &TannerMatrix,
    s: usize,
    rho: f64,
    tau: f64,
    opts: &RnspOptions,
) -> Result<TannerRnspReport, AnalysisError> {
    let inner = a.inner();
    let (lifted_rho, lifted_tau) = lift_constants(inner.rho0(), inner.tau0())?;
    let verdict = if s == 0 {
        RnspVerdict::Certified(RnspCertificate {
            order: 0,
            rho,
            tau,
            per_support_values: Vec::new(),
            max_value: 0.0,
            method: EnumerationMethod {
                supports: 0,
                sign_patterns_per_support: 0,
                lp_tol: opts.lp_tol,
            },
        })
    } else {
        verify_rnsp(&a.to_dense(), s, rho, tau, opts)?
    };
    let expectation = expectation(a, s);
    let covers = rho >= lifted_rho - 1e-12 && tau >= lifted_tau - 1e-12;
    let contradiction = covers && expectation.is_some() && !verdict.is_certified();
    Ok(TannerRnspReport {
        order: s,
        rho,
        tau,
        lifted_rho,
        lifted_tau,
        verdict,
        expectation,
        contradiction,
    })
}

fn expectation(a: &TannerMatrix, s: usize) -> Option<Expectation> {
    let inner = a.inner();
    if s <= inner.order() {
        return Some(Expectation::SingleSlice);
    }
    let d = a.degree() as f64;
    let delta = inner.delta0() * inner.delta0() / 4.0;
    let lambda = a.provenance().lambda_certified?;
    let ok = d > 16.0 / delta
        && lambda < 3.0 * d.sqrt()
        && s as f64 <= delta * (a.num_vertices() * a.degree()) as f64;
    ok.then_some(Expectation::Expander)
}

/// Row counts under both readings of the `δ`/`δ₀` relation, logs base 2.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct RowAccounting {
    pub delta: f64,
    pub delta0: f64,
    /// `2kN` for the assembled matrix.
    pub actual_rows: usize,
    /// `200 N δ₀ d log(1/δ₀)`, the bound from `k ≤ 100 δ₀ d log(1/δ₀)`.
    pub bound_rows: f64,
    /// `100 √δ log(1/δ) N d`, which matches `bound_rows` when `δ ≈ δ₀²`.
    pub approx_rows_delta_sq: f64,
    /// `bound_rows` rewritten with `δ₀ = 2√δ`: `400 √δ log(1/(2√δ)) N d`.
    pub approx_rows_delta_quarter: f64,
}

pub fn row_accounting(delta: f64, n: usize, d: usize, k: usize) -> RowAccounting {
    let delta0 = 2.0 * delta.sqrt();
    let nd = (n * d) as f64;
    RowAccounting {
        delta,
        delta0,
        actual_rows: 2 * k * n,
        bound_rows: 200.0 * n as f64 * delta0 * d as f64 * (1.0 / delta0).log2(),
        approx_rows_delta_sq: 100.0 * delta.sqrt() * (1.0 / delta).log2() * nd,
        approx_rows_delta_quarter: 400.0 * delta.sqrt() * (1.0 / delta0).log2() * nd,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphs::RegularGraph;

    fn k4() -> DoubleCover {
        DoubleCover::new(&RegularGraph::complete(4).unwrap())
    }

    #[test]
    fn empty_and_single_step() {
        let h = k4();
        let p = decompose_support(&h, &[], 0.34).unwrap();
        assert!(p.is_empty());
        // One edge per left vertex at most: peeled in one step.
        let s: Vec<usize> = (0..4).map(|u| h.gamma(Side::Left, u)[0]).collect();
        let p = decompose_support(&h, &s, 0.34).unwrap();
        assert_eq!(p.len(), 1);
        let mut t = p.steps[0].t.clone();
        t.sort_unstable();
        let mut s_sorted = s.clone();
        s_sorted.sort_unstable();
        assert_eq!(t, s_sorted);
        assert!(p.steps[0].v.is_empty());
    }

    #[test]
    fn two_step_peeling() {
        let h = k4();
        // All three edges of left vertex 0: degree 3 > 1 on the left, but each
        // right endpoint sees one of them.
        let s = h.gamma(Side::Left, 0).to_vec();
        let p = decompose_support(&h, &s, 0.34).unwrap();
        assert_eq!(p.len(), 2);
        assert!(p.steps[0].t.is_empty());
        assert_eq!(p.steps[0].v, vec![0]);
        assert_eq!(p.steps[1].t.len(), 3);
        assert_eq!(
            p.trace_json(),
            r#"[{"i":1,"side":"Left","T_size":0,"V_size":1},{"i":2,"side":"Right","T_size":3,"V_size":0}]"#
        );
    }

    #[test]
    fn full_support_stalls() {
        let h = k4();
        let all: Vec<usize> = (0..h.num_edges()).collect();
        assert!(matches!(
            decompose_support(&h, &all, 0.34),
            Err(AnalysisError::Stalled { .. })
        ));
    }

    #[test]
    fn support_validation() {
        let h = k4();
        assert!(matches!(
            decompose_support(&h, &[12], 0.5),
            Err(AnalysisError::EdgeOutOfRange(12))
        ));
        assert!(matches!(
            decompose_support(&h, &[1, 1], 0.5),
            Err(AnalysisError::DuplicateEdge(1))
        ));
        assert!(matches!(
            decompose_support(&h, &[1], 0.2),
            Err(AnalysisError::ZeroThreshold)
        ));
    }

    #[test]
    fn lifting() {
        let (r, t) = lift_constants(0.25, 1.0).unwrap();
        assert!((r - 2.0 / 3.0).abs() < 1e-15 && (t - 4.0 / 3.0).abs() < 1e-15);
        let (r, t) = lift_constants(1e-12, 1.0).unwrap();
        assert!(r < 1e-11 && (t - 1.0).abs() < 1e-11);
        assert!(lift_constants(1.0 / 3.0, 1.0).is_err());
        assert!(lift_constants(0.2, 0.0).is_err());
    }

    #[test]
    fn contraction_refuses_without_hypotheses() {
        let h = k4();
        let p = decompose_support(&h, &[], 0.4).unwrap();
        match contraction_check(&p, 1.0, 3, 4, 0.04, 0.4) {
            Err(AnalysisError::Hypotheses(f)) => assert_eq!(f.len(), 1),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn contraction_vacuous_cases() {
        let p = Peeling {
            support: Vec::new(),
            delta0: 0.4,
            threshold: 200,
            steps: Vec::new(),
        };
        let r = contraction_check(&p, 40.0, 500, 2000, 0.04, 0.4).unwrap();
        assert!(r.pass && r.pairs.is_empty());
        let single = Peeling {
            steps: vec![PeelingStep {
                i: 1,
                side: Side::Left,
                t: vec![0, 1],
                s: Vec::new(),
                v: Vec::new(),
            }],
            support: vec![0, 1],
            ..p
        };
        let r = contraction_check(&single, 40.0, 500, 2000, 0.04, 0.4).unwrap();
        assert!(r.pass && r.pairs.is_empty());
        assert!((r.vertex_bound - 200.0).abs() < 1e-9);
    }

    #[test]
    fn block_check_on_identity_code() {
        let h = k4();
        let c0 = InnerCode::identity(3, 0.34, 0.2, &RnspOptions::default()).unwrap();
        let x: Vec<f64> = (0..12).map(|i| (i as f64 - 5.5) / 3.0).collect();
        let s: Vec<usize> = (0..4).map(|u| h.gamma(Side::Left, u)[1]).collect();
        let r = per_block_inequality_check(&h, &c0, &x, &s).unwrap();
        assert_eq!(r.side, Side::Left);
        assert!(r.min_slack() >= -1e-9, "{r:?}");
        let zero = per_block_inequality_check(&h, &c0, &[0.0; 12], &s).unwrap();
        assert!(zero.min_slack() >= 0.0);
        let all: Vec<usize> = (0..12).collect();
        assert!(matches!(
            per_block_inequality_check(&h, &c0, &x, &all),
            Err(AnalysisError::NoAdmissibleSide { left: 3, right: 3 })
        ));
    }

    #[test]
    fn identity_tanner_certifies_at_lifted_constants() {
        let h = k4();
        let c0 = InnerCode::identity(3, 0.34, 0.2, &RnspOptions::default()).unwrap();
        let a = TannerMatrix::assemble(&h, &c0).unwrap();
        let (r, t) = lift_constants(0.2, 1.0).unwrap();
        let rep = certify_tanner_rnsp(&a, 1, r, t, &RnspOptions::default()).unwrap();
        assert!(rep.verdict.is_certified());
        assert_eq!(rep.expectation, Some(Expectation::SingleSlice));
        assert!(!rep.contradiction);
        let zero = certify_tanner_rnsp(&a, 0, r, t, &RnspOptions::default()).unwrap();
        assert!(zero.verdict.is_certified());
    }

    #[test]
    fn row_accounting_conventions() {
        let r = row_accounting(0.04, 2000, 500, 10);
        assert_eq!(r.actual_rows, 40_000);
        assert!((r.delta0 - 0.4).abs() < 1e-12);
        assert!((r.bound_rows - 200.0 * 2000.0 * 0.4 * 500.0 * 2.5f64.log2()).abs() < 1e-6);
        assert!(r.approx_rows_delta_quarter > r.approx_rows_delta_sq);
    }
}
