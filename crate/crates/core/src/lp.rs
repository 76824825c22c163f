//! Dense two-phase primal simplex for small standard-form linear programs.
//!
//! Problems are `minimize c·x  subject to  A x = b,  x >= 0`. Every LP in this
//! crate (RNSP support checks, basis pursuit) is at most a few hundred rows, so
//! a dense tableau is the simplest thing that is fast enough.
//!
//! Pivoting uses Dantzig's rule and falls back to Bland's rule after a run of
//! degenerate pivots, which rules out cycling.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("constraint matrix has {rows} rows but right-hand side has {rhs} entries")]
    RhsMismatch { rows: usize, rhs: usize },
    #[error("row {row} has {len} coefficients, expected {expected}")]
    RowLength {
        row: usize,
        len: usize,
        expected: usize,
    },
    #[error("linear program is infeasible (phase-1 optimum {residual:e})")]
    Infeasible { residual: f64 },
    #[error("simplex stalled after {0} iterations")]
    IterationLimit(usize),
}

#[derive(Debug, Clone, Copy)]
pub struct SimplexOptions {
    /// Feasibility and optimality tolerance.
    pub tol: f64,
    /// Smallest magnitude accepted as a pivot element.
    pub pivot_tol: f64,
    /// Iteration cap as a multiple of the number of variables.
    pub iteration_factor: usize,
    /// Consecutive degenerate pivots before switching to Bland's rule.
    pub degeneracy_threshold: usize,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            pivot_tol: 1e-10,
            iteration_factor: 50,
            degeneracy_threshold: 20,
        }
    }
}

impl SimplexOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            tol,
            ..Self::default()
        }
    }
}

/// `minimize cost·x  s.t.  rows·x = rhs, x >= 0`, rows stored densely.
#[derive(Debug, Clone)]
pub struct StandardLp {
    pub cost: Vec<f64>,
    pub rows: Vec<Vec<f64>>,
    pub rhs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpSolution {
    Optimal {
        x: Vec<f64>,
        objective: f64,
    },
    /// Objective decreases without bound along `ray` starting from `point`.
    Unbounded {
        point: Vec<f64>,
        ray: Vec<f64>,
    },
}

impl StandardLp {
    pub fn new(num_vars: usize) -> Self {
        Self {
            cost: vec![0.0; num_vars],
            rows: Vec::new(),
            rhs: Vec::new(),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.cost.len()
    }

    pub fn add_row(&mut self, coeffs: Vec<f64>, rhs: f64) -> usize {
        self.rows.push(coeffs);
        self.rhs.push(rhs);
        self.rows.len() - 1
    }

    fn validate(&self) -> Result<(), LpError> {
        if self.rows.len() != self.rhs.len() {
            return Err(LpError::RhsMismatch {
                rows: self.rows.len(),
                rhs: self.rhs.len(),
            });
        }
        let n = self.num_vars();
        for (row, coeffs) in self.rows.iter().enumerate() {
            if coeffs.len() != n {
                return Err(LpError::RowLength {
                    row,
                    len: coeffs.len(),
                    expected: n,
                });
            }
        }
        Ok(())
    }

    /// Solves the program. `basis_hint[i]`, when present, names a column to
    /// make basic in row `i` before phase 1; rows whose hinted basic value is
    /// negative (or that have no usable hint) get an artificial variable.
    pub fn solve(
        &self,
        basis_hint: Option<&[Option<usize>]>,
        opts: &SimplexOptions,
    ) -> Result<LpSolution, LpError> {
        self.validate()?;
        let mut tableau = Tableau::build(self, basis_hint, opts);
        tableau.phase_one(opts)?;
        tableau.phase_two(&self.cost, opts)
    }
}

struct Tableau {
    m: usize,
    /// Structural variables.
    n: usize,
    /// Total columns including artificials (rhs stored separately).
    width: usize,
    a: Vec<f64>,
    /// Right-hand side the ratio test works with (perturbed while a phase
    /// runs).
    b: Vec<f64>,
    /// Unperturbed right-hand side, carried through the same pivots.
    b_true: Vec<f64>,
    basis: Vec<usize>,
    is_basic: Vec<bool>,
    iterations: usize,
    max_iterations: usize,
}

/// Iterations between full reduced-cost recomputations.
const REFRESH_INTERVAL: usize = 50;
/// Right-hand sides below this are rounding noise from pivots on zero rows;
/// snapping them keeps degenerate ties exact.
const SNAP: f64 = 1e-11;
/// Relative size of the right-hand-side perturbation that breaks degenerate
/// ties during a phase.
const PERTURB: f64 = 1e-7;

/// Deterministic value in `[0.5, 1)` for row `i` (splitmix64).
fn jitter(i: usize) -> f64 {
    let mut z = (i as u64).wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^= z >> 31;
    0.5 + 0.5 * (z >> 11) as f64 / (1u64 << 53) as f64
}

enum Pivot {
    Optimal,
    Unbounded(usize),
    Step,
}

impl Tableau {
    fn build(lp: &StandardLp, hint: Option<&[Option<usize>]>, opts: &SimplexOptions) -> Self {
        let m = lp.rows.len();
        let n = lp.num_vars();
        // Worst case every row needs an artificial; unused columns stay zero.
        let width = n + m;
        let mut a = vec![0.0; m * width];
        for (i, row) in lp.rows.iter().enumerate() {
            a[i * width..i * width + n].copy_from_slice(row);
        }
        let mut t = Tableau {
            m,
            n,
            width,
            a,
            b: lp.rhs.clone(),
            b_true: lp.rhs.clone(),
            basis: vec![usize::MAX; m],
            is_basic: vec![false; width],
            iterations: 0,
            max_iterations: opts.iteration_factor.max(1) * (n + m).max(1),
        };

        if let Some(hint) = hint {
            for (row, col) in hint.iter().enumerate().take(m) {
                if let Some(col) = *col {
                    if col < n && !t.is_basic[col] && t.a[row * width + col].abs() > opts.pivot_tol
                    {
                        t.pivot(row, col);
                    }
                }
            }
        }

        for row in 0..m {
            if t.basis[row] != usize::MAX && t.b[row] >= -opts.tol {
                if t.b[row] < 0.0 {
                    t.b[row] = 0.0;
                }
                continue;
            }
            if t.b[row] < 0.0 {
                t.b[row] = -t.b[row];
                for v in &mut t.a[row * width..(row + 1) * width] {
                    *v = -*v;
                }
            }
            let art = n + row;
            t.a[row * width + art] = 1.0;
            if t.basis[row] != usize::MAX {
                t.is_basic[t.basis[row]] = false;
            }
            t.basis[row] = art;
            t.is_basic[art] = true;
        }
        t.b_true = t.b.clone();
        t
    }

    #[inline]
    fn at(&self, row: usize, col: usize) -> f64 {
        self.a[row * self.width + col]
    }

    fn is_artificial(&self, col: usize) -> bool {
        col >= self.n
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let w = self.width;
        let p = self.a[row * w + col];
        {
            let r = &mut self.a[row * w..(row + 1) * w];
            for v in r.iter_mut() {
                *v /= p;
            }
            r[col] = 1.0;
        }
        self.b[row] /= p;
        self.b_true[row] /= p;
        let (pivot_row, pivot_b, pivot_bt) = (
            self.a[row * w..(row + 1) * w].to_vec(),
            self.b[row],
            self.b_true[row],
        );
        for i in 0..self.m {
            if i == row {
                continue;
            }
            let f = self.a[i * w + col];
            if f == 0.0 {
                continue;
            }
            let r = &mut self.a[i * w..(i + 1) * w];
            for (v, pv) in r.iter_mut().zip(&pivot_row) {
                *v -= f * pv;
            }
            r[col] = 0.0;
            self.b[i] -= f * pivot_b;
            self.b_true[i] -= f * pivot_bt;
            if self.b[i].abs() < SNAP {
                self.b[i] = 0.0;
            }
            if self.b_true[i].abs() < SNAP {
                self.b_true[i] = 0.0;
            }
        }
        if self.basis[row] != usize::MAX {
            self.is_basic[self.basis[row]] = false;
        }
        self.basis[row] = col;
        self.is_basic[col] = true;
    }

    /// Reduced costs for `cost` (indexed over all columns) at the current basis.
    fn reduced_costs(&self, cost: &[f64]) -> Vec<f64> {
        let mut d = cost.to_vec();
        for (row, &bv) in self.basis.iter().enumerate() {
            let cb = cost[bv];
            if cb == 0.0 {
                continue;
            }
            let r = &self.a[row * self.width..(row + 1) * self.width];
            for (dj, aj) in d.iter_mut().zip(r) {
                *dj -= cb * aj;
            }
        }
        d
    }

    fn update_costs(&self, d: &mut [f64], row: usize, col: usize) {
        let f = d[col];
        if f == 0.0 {
            return;
        }
        let r = &self.a[row * self.width..(row + 1) * self.width];
        for (dj, aj) in d.iter_mut().zip(r) {
            *dj -= f * aj;
        }
        d[col] = 0.0;
    }

    /// One simplex iteration against reduced costs `d`; `allow` filters
    /// candidate entering columns.
    fn step(
        &mut self,
        d: &mut [f64],
        allow: impl Fn(usize) -> bool,
        bland: bool,
        opts: &SimplexOptions,
    ) -> (Pivot, bool) {
        let mut entering = None;
        let mut best = -opts.tol;
        for (j, &dj) in d.iter().enumerate() {
            if dj < best && allow(j) && !self.is_basic[j] {
                entering = Some(j);
                if bland {
                    break;
                }
                best = dj;
            }
        }
        let Some(col) = entering else {
            return (Pivot::Optimal, false);
        };

        let mut leave: Option<usize> = None;
        let mut best_ratio = f64::INFINITY;
        for i in 0..self.m {
            let aij = self.at(i, col);
            if aij > opts.pivot_tol {
                let ratio = self.b[i].max(0.0) / aij;
                let better = match leave {
                    None => true,
                    Some(l) => {
                        ratio < best_ratio - 1e-12
                            || (ratio <= best_ratio + 1e-12 && self.basis[i] < self.basis[l])
                    }
                };
                if better {
                    best_ratio = ratio.min(best_ratio);
                    leave = Some(i);
                }
            }
        }
        let Some(row) = leave else {
            return (Pivot::Unbounded(col), false);
        };
        let degenerate = best_ratio <= opts.tol;
        self.pivot(row, col);
        self.update_costs(d, row, col);
        self.iterations += 1;
        (Pivot::Step, degenerate)
    }

    fn run(
        &mut self,
        cost: &[f64],
        allow: impl Fn(usize) -> bool + Copy,
        opts: &SimplexOptions,
    ) -> Result<Option<usize>, LpError> {
        let mut d = self.reduced_costs(cost);
        let mut degenerate_run = 0usize;
        let mut since_refresh = 0usize;
        loop {
            if self.iterations >= self.max_iterations {
                return Err(LpError::IterationLimit(self.iterations));
            }
            let bland = degenerate_run >= opts.degeneracy_threshold;
            // Incremental reduced-cost updates drift; Bland's rule only
            // prevents cycling if the signs it reads are exact.
            if since_refresh >= REFRESH_INTERVAL || degenerate_run == opts.degeneracy_threshold {
                d = self.reduced_costs(cost);
                since_refresh = 0;
            }
            since_refresh += 1;
            match self.step(&mut d, allow, bland, opts) {
                (Pivot::Optimal, _) => {
                    // Confirm optimality against freshly computed costs.
                    let fresh = self.reduced_costs(cost);
                    let improvable = fresh
                        .iter()
                        .enumerate()
                        .any(|(j, &dj)| dj < -opts.tol && allow(j) && !self.is_basic[j]);
                    if !improvable {
                        return Ok(None);
                    }
                    d = fresh;
                    since_refresh = 0;
                }
                (Pivot::Unbounded(col), _) => return Ok(Some(col)),
                (Pivot::Step, true) => degenerate_run += 1,
                (Pivot::Step, false) => degenerate_run = 0,
            }
        }
    }

    /// Runs the primal simplex on a perturbed right-hand side, then restores
    /// the true one, repairs any small infeasibility with dual simplex pivots
    /// and finishes unperturbed. Perturbation makes degenerate vertices
    /// nondegenerate, which Bland's rule alone handles far too slowly.
    fn optimize(
        &mut self,
        cost: &[f64],
        allow: impl Fn(usize) -> bool + Copy,
        opts: &SimplexOptions,
    ) -> Result<Option<usize>, LpError> {
        for i in 0..self.m {
            let base = self.b_true[i].max(0.0);
            self.b[i] = base + PERTURB * (1.0 + base) * jitter(i);
        }
        let first = self.run(cost, allow, opts);
        self.b.copy_from_slice(&self.b_true);
        if let Some(col) = first? {
            for v in &mut self.b {
                *v = v.max(0.0);
            }
            return Ok(Some(col));
        }
        self.dual_repair(cost, allow, opts)?;
        self.run(cost, allow, opts)
    }

    /// Dual simplex pivots until the basis is primal feasible again. The
    /// reduced costs stay (nearly) nonnegative throughout.
    fn dual_repair(
        &mut self,
        cost: &[f64],
        allow: impl Fn(usize) -> bool + Copy,
        opts: &SimplexOptions,
    ) -> Result<(), LpError> {
        loop {
            let Some(row) = (0..self.m)
                .filter(|&i| self.b[i] < -opts.tol)
                .min_by(|&x, &y| self.b[x].total_cmp(&self.b[y]))
            else {
                for i in 0..self.m {
                    self.b[i] = self.b[i].max(0.0);
                    self.b_true[i] = self.b[i];
                }
                return Ok(());
            };
            if self.iterations >= self.max_iterations {
                return Err(LpError::IterationLimit(self.iterations));
            }
            let d = self.reduced_costs(cost);
            let mut entering = None;
            let mut best = f64::INFINITY;
            #[allow(clippy::needless_range_loop)]
            for j in 0..self.width {
                let arj = self.at(row, j);
                if arj < -opts.pivot_tol && allow(j) && !self.is_basic[j] {
                    let ratio = d[j].max(0.0) / -arj;
                    if ratio < best {
                        best = ratio;
                        entering = Some(j);
                    }
                }
            }
            let Some(col) = entering else {
                return Err(LpError::Infeasible {
                    residual: -self.b[row],
                });
            };
            self.pivot(row, col);
            self.iterations += 1;
        }
    }

    fn phase_one(&mut self, opts: &SimplexOptions) -> Result<(), LpError> {
        if !self.basis.iter().any(|&c| self.is_artificial(c)) {
            return Ok(());
        }
        let mut cost = vec![0.0; self.width];
        for c in cost.iter_mut().skip(self.n) {
            *c = 1.0;
        }
        // Phase 1 is bounded below by zero, so no unbounded exit.
        self.optimize(&cost, |_| true, opts)?;

        let scale = 1.0 + self.b.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        let residual: f64 = self
            .basis
            .iter()
            .zip(&self.b)
            .filter(|(&c, _)| c >= self.n)
            .map(|(_, &v)| v)
            .sum();
        if residual > opts.tol * scale {
            return Err(LpError::Infeasible { residual });
        }

        // Drive zero-level artificials out of the basis where possible; rows
        // with no structural entry are redundant and keep their artificial.
        for row in 0..self.m {
            if !self.is_artificial(self.basis[row]) {
                continue;
            }
            self.b[row] = 0.0;
            self.b_true[row] = 0.0;
            let col = (0..self.n)
                .filter(|&j| !self.is_basic[j])
                .max_by(|&x, &y| self.at(row, x).abs().total_cmp(&self.at(row, y).abs()));
            if let Some(col) = col {
                if self.at(row, col).abs() > opts.pivot_tol {
                    self.pivot(row, col);
                }
            }
        }
        Ok(())
    }

    fn phase_two(&mut self, cost: &[f64], opts: &SimplexOptions) -> Result<LpSolution, LpError> {
        let mut full = vec![0.0; self.width];
        full[..self.n].copy_from_slice(cost);
        let n = self.n;
        let unbounded = self.optimize(&full, |j| j < n, opts)?;
        let point = self.primal();
        match unbounded {
            None => {
                let objective = cost.iter().zip(&point).map(|(c, x)| c * x).sum();
                Ok(LpSolution::Optimal {
                    x: point,
                    objective,
                })
            }
            Some(col) => {
                let mut ray = vec![0.0; self.n];
                ray[col] = 1.0;
                for (row, &bv) in self.basis.iter().enumerate() {
                    if bv < self.n {
                        ray[bv] = -self.at(row, col);
                    }
                }
                Ok(LpSolution::Unbounded { point, ray })
            }
        }
    }

    fn primal(&self) -> Vec<f64> {
        let mut x = vec![0.0; self.n];
        for (row, &bv) in self.basis.iter().enumerate() {
            if bv < self.n {
                x[bv] = self.b[row].max(0.0);
            }
        }
        x
    }
}
