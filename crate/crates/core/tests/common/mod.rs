//! Independent reference implementations used as test oracles.

#![allow(dead_code)]

use expander_sketch::matrix::DenseMatrix;
use expander_sketch::{DoubleCover, InnerCode, RegularGraph, Side};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;

/// Largest eigenvalue magnitude of the adjacency matrix after removing one
/// copy of the trivial eigenvalue `d`, from a dense symmetric eigensolve.
pub fn dense_lambda(g: &RegularGraph) -> f64 {
    let n = g.num_vertices();
    let mut a = DMatrix::<f64>::zeros(n, n);
    for u in 0..n {
        for &v in g.neighbors(u) {
            a[(u, v)] += 1.0;
        }
    }
    let mut ev: Vec<f64> = SymmetricEigen::new(a).eigenvalues.iter().copied().collect();
    ev.sort_by(|x, y| x.total_cmp(y));
    ev.pop();
    ev.iter().map(|x| x.abs()).fold(0.0, f64::max)
}

/// Second largest adjacency eigenvalue (signed).
pub fn dense_second_largest(g: &RegularGraph) -> f64 {
    let n = g.num_vertices();
    let mut a = DMatrix::<f64>::zeros(n, n);
    for u in 0..n {
        for &v in g.neighbors(u) {
            a[(u, v)] += 1.0;
        }
    }
    let mut ev: Vec<f64> = SymmetricEigen::new(a).eigenvalues.iter().copied().collect();
    ev.sort_by(|x, y| y.total_cmp(x));
    ev[1]
}

/// All `k`-subsets of `0..n`, by recursion.
pub fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn go(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            go(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(0, n, k, &mut Vec::new(), &mut out);
    out
}

fn to_na(m: &DenseMatrix) -> DMatrix<f64> {
    DMatrix::from_fn(m.rows(), m.cols(), |r, c| m.get(r, c))
}

/// Unit null vector of a matrix with exactly one-dimensional kernel.
fn null_vector(rows: &[DVector<f64>], n: usize) -> Option<DVector<f64>> {
    let mut m = DMatrix::<f64>::zeros(n, n);
    for (i, r) in rows.iter().enumerate() {
        m.set_row(i, &r.transpose());
    }
    let svd = m.svd(false, true);
    let vt = svd.v_t?;
    let sv = &svd.singular_values;
    let scale = sv.max().max(1.0);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| sv[a].total_cmp(&sv[b]));
    if sv[order[1]] < 1e-9 * scale || sv[order[0]] > 1e-9 * scale {
        return None;
    }
    Some(vt.row(order[0]).transpose())
}

fn rank(m: &DMatrix<f64>) -> usize {
    if m.ncols() == 0 {
        return 0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let scale = sv.max().max(1.0);
    sv.iter().filter(|&&x| x > 1e-9 * scale).count()
}

/// `max ‖x_S‖₁` over `ρ‖x_{S̄}‖₁ + τ‖Mx‖₁ ≤ 1`, by enumerating the vertices
/// of that polytope: each vertex spans the common kernel of `n − 1`
/// independent linear forms drawn from `{ρ eⱼ : j ∉ S} ∪ {τ mᵢ}`.
/// `tau = None` means the kernel-only variant (`Mx = 0` enforced exactly).
pub fn rnsp_vertex_value(m: &DenseMatrix, support: &[usize], rho: f64, tau: Option<f64>) -> f64 {
    let n = m.cols();
    let a = to_na(m);
    let cols: Vec<usize> = support.to_vec();
    let a_s = a.select_columns(&cols);
    if rank(&a_s) < support.len() {
        return f64::INFINITY;
    }
    let mut forms: Vec<(DVector<f64>, f64)> = Vec::new();
    for j in (0..n).filter(|j| !support.contains(j)) {
        let mut e = DVector::zeros(n);
        e[j] = 1.0;
        forms.push((e, rho));
    }
    let rows: Vec<DVector<f64>> = (0..m.rows()).map(|i| a.row(i).transpose()).collect();
    let mut fixed: Vec<DVector<f64>> = Vec::new();
    match tau {
        Some(t) => forms.extend(rows.iter().map(|r| (r.clone(), t))),
        None => {
            // Keep only an independent subset of the kernel equations.
            for r in &rows {
                let mut trial = fixed.clone();
                trial.push(r.clone());
                let mat =
                    DMatrix::from_rows(&trial.iter().map(|v| v.transpose()).collect::<Vec<_>>());
                if rank(&mat) == trial.len() {
                    fixed = trial;
                }
            }
        }
    }
    let need = (n - 1).saturating_sub(fixed.len());
    if need > forms.len() {
        return 0.0;
    }
    let mut best = 0.0f64;
    for pick in subsets(forms.len(), need) {
        let mut rows: Vec<DVector<f64>> = fixed.clone();
        rows.extend(pick.iter().map(|&i| forms[i].0.clone()));
        let Some(x) = null_vector(&rows, n) else {
            continue;
        };
        let gauge: f64 = forms.iter().map(|(f, w)| w * f.dot(&x).abs()).sum();
        let xs: f64 = support.iter().map(|&j| x[j].abs()).sum();
        if gauge <= 1e-12 {
            if xs > 1e-9 {
                return f64::INFINITY;
            }
            continue;
        }
        best = best.max(xs / gauge);
    }
    best
}

/// Oracle decision for the RNSP of order `s` (supports of size exactly `s`).
pub fn rnsp_oracle_max(m: &DenseMatrix, s: usize, rho: f64, tau: f64) -> f64 {
    subsets(m.cols(), s)
        .iter()
        .map(|sup| rnsp_vertex_value(m, sup, rho, Some(tau)))
        .fold(0.0, f64::max)
}

/// `‖x_S‖₁ − ρ‖x_{S̄}‖₁ − τ‖Mx‖₁` computed from scratch.
pub fn violation(m: &DenseMatrix, support: &[usize], rho: f64, tau: f64, x: &[f64]) -> f64 {
    let a = to_na(m);
    let xv = DVector::from_column_slice(x);
    let mx = (&a * &xv).iter().map(|v| v.abs()).sum::<f64>();
    let (mut on, mut off) = (0.0, 0.0);
    for (j, v) in x.iter().enumerate() {
        if support.contains(&j) {
            on += v.abs();
        } else {
            off += v.abs();
        }
    }
    on - rho * off - tau * mx
}

/// Random search for a violating vector: Gaussian vectors, near-kernel
/// vectors, and sparse vectors concentrated on the support.
pub fn random_refuter<R: Rng>(
    m: &DenseMatrix,
    s: usize,
    rho: f64,
    tau: f64,
    trials: usize,
    rng: &mut R,
) -> Option<(Vec<usize>, Vec<f64>, f64)> {
    let n = m.cols();
    // Pad to square so the SVD returns a full basis, kernel included.
    let mut a = DMatrix::<f64>::zeros(n.max(m.rows()), n);
    a.view_mut((0, 0), (m.rows(), n)).copy_from(&to_na(m));
    let svd = a.svd(false, true);
    let vt = svd.v_t.expect("requested");
    for t in 0..trials {
        let mut x: Vec<f64> = match t % 3 {
            0 => (0..n).map(|_| rng.random_range(-1.0..1.0)).collect(),
            1 => {
                // Mix of the right singular vectors with the smallest weights.
                let mut v = vec![0.0; n];
                for r in 0..vt.nrows() {
                    let sv = svd.singular_values[r];
                    let c = rng.random_range(-1.0..1.0) / (1.0 + 10.0 * sv);
                    for j in 0..n {
                        v[j] += c * vt[(r, j)];
                    }
                }
                for vj in v.iter_mut() {
                    *vj += 0.01 * rng.random_range(-1.0..1.0);
                }
                v
            }
            _ => {
                let mut v = vec![0.0; n];
                for _ in 0..s {
                    v[rng.random_range(0..n)] = rng.random_range(-1.0..1.0);
                }
                v
            }
        };
        if x.iter().all(|v| *v == 0.0) {
            x[0] = 1.0;
        }
        let sup = top_indices(&x, s);
        let viol = violation(m, &sup, rho, tau, &x);
        if viol > 1e-9 {
            return Some((sup, x, viol));
        }
    }
    None
}

fn top_indices(x: &[f64], s: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[b].abs().total_cmp(&x[a].abs()).then(a.cmp(&b)));
    let mut out = idx[..s].to_vec();
    out.sort_unstable();
    out
}

/// `min ‖z‖₁ s.t. ‖Az − y‖₁ ≤ η` by enumerating every basis of the standard
/// form LP and keeping the best feasible basic solution.
pub fn l1_brute_force(a: &DenseMatrix, y: &[f64], eta: f64) -> f64 {
    let (m, n) = (a.rows(), a.cols());
    let nv = 2 * n + 2 * m + 1;
    let mut big = DMatrix::<f64>::zeros(m + 1, nv);
    for i in 0..m {
        for j in 0..n {
            big[(i, j)] = a.get(i, j);
            big[(i, n + j)] = -a.get(i, j);
        }
        big[(i, 2 * n + i)] = 1.0;
        big[(i, 2 * n + m + i)] = -1.0;
        big[(m, 2 * n + i)] = 1.0;
        big[(m, 2 * n + m + i)] = 1.0;
    }
    big[(m, nv - 1)] = 1.0;
    let mut rhs = DVector::from_column_slice(y).push(0.0);
    rhs[m] = eta;
    let mut best = f64::INFINITY;
    for basis in subsets(nv, m + 1) {
        let b = big.select_columns(&basis);
        let Some(lu) = b.clone().lu().try_inverse() else {
            continue;
        };
        if lu.iter().any(|v| !v.is_finite()) || rank(&b) < m + 1 {
            continue;
        }
        let xb = &lu * &rhs;
        if xb.iter().any(|v| *v < -1e-9) {
            continue;
        }
        let obj: f64 = basis
            .iter()
            .zip(xb.iter())
            .filter(|(c, _)| **c < 2 * n)
            .map(|(_, v)| *v)
            .sum();
        best = best.min(obj);
    }
    best
}

/// Dense Tanner matrix built directly from its definition: row `(v, j)` on a
/// side has a one at every edge `Γ(v)[i]` with `C₀[j][i] = 1`; left blocks
/// first, each block `k` rows in inner-row order.
pub fn tanner_reference(h: &DoubleCover, c0: &InnerCode) -> Vec<Vec<u8>> {
    let (n, k) = (h.num_vertices(), c0.k());
    let mut out = vec![vec![0u8; h.num_edges()]; 2 * k * n];
    for (b, side) in [Side::Left, Side::Right].into_iter().enumerate() {
        for v in 0..n {
            let g = h.gamma(side, v);
            for j in 0..k {
                for (i, &e) in g.iter().enumerate() {
                    if c0.get(j, i) {
                        out[b * k * n + v * k + j][e] = 1;
                    }
                }
            }
        }
    }
    out
}

pub fn random_gaussian_matrix<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> DenseMatrix {
    let r: Vec<Vec<f64>> = (0..rows)
        .map(|_| {
            (0..cols)
                .map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal))
                .collect()
        })
        .collect();
    DenseMatrix::from_rows(&r).unwrap()
}

pub fn random_binary_matrix<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> DenseMatrix {
    let r: Vec<Vec<f64>> = (0..rows)
        .map(|_| {
            (0..cols)
                .map(|_| if rng.random_bool(0.5) { 1.0 } else { 0.0 })
                .collect()
        })
        .collect();
    DenseMatrix::from_rows(&r).unwrap()
}
