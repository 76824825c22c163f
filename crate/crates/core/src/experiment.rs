//! End-to-end recovery experiments driven by a JSON config.
//!
//! The deterministic report and the wall-clock timings are kept in separate
//! files so that two runs with the same config can be compared byte for byte.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::analysis::{
    certify_tanner_rnsp, lift_constants, row_accounting, AnalysisError, RowAccounting,
};
use crate::graphs::{random_regular, DoubleCover, GraphError, RegularGraph, SpectralOptions};
use crate::inner_code::{
    inner_order, search_inner_code, InnerCode, InnerCodeError, InnerSearch, RnspError, RnspOptions,
    SearchError,
};
use crate::recovery::{guarantee_check, l1_minimize, l1_norm, recovery_constants, RecoveryError};
use crate::tanner::{StructureReport, TannerError, TannerMatrix};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("config JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    InnerCode(#[from] InnerCodeError),
    #[error(transparent)]
    Search(#[from] SearchError),
    #[error(transparent)]
    Tanner(#[from] TannerError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error(transparent)]
    Recovery(#[from] RecoveryError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SparsityModel {
    /// Uniform support, standard normal values. Trial `t` uses sparsity
    /// `1 + t mod s`, so every level up to `s` is exercised.
    Exact,
    /// `|x_i| = i^{-1.5}` with random signs and a random permutation.
    PowerLaw,
}

fn default_rho0() -> f64 {
    0.3
}

fn default_attempts() -> usize {
    200
}

fn default_budget() -> u128 {
    RnspOptions::default().budget
}

fn default_true() -> bool {
    true
}

fn default_lp_tol() -> f64 {
    1e-8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(non_snake_case)]
pub struct ExperimentConfig {
    pub N: usize,
    pub d: usize,
    pub delta: f64,
    pub seed: u64,
    pub trials: usize,
    pub eta_list: Vec<f64>,
    pub sparsity_model: SparsityModel,
    #[serde(default = "default_lp_tol")]
    pub lp_tol: f64,
    #[serde(default)]
    pub output_dir: Option<String>,
    /// Multiply each `eta_list` entry by `‖x‖₁` (otherwise absolute).
    #[serde(default = "default_true")]
    pub eta_relative: bool,
    #[serde(default = "default_rho0")]
    pub rho0: f64,
    /// Sparsity level; defaults to `floor(δ₀d)`.
    #[serde(default)]
    pub s: Option<usize>,
    #[serde(default = "default_attempts")]
    pub inner_attempts: usize,
    /// Certify the assembled matrix directly at the lifted constants.
    #[serde(default = "default_true")]
    pub certify: bool,
    #[serde(default = "default_budget")]
    pub budget: u128,
    #[serde(default)]
    pub graph_path: Option<String>,
    #[serde(default)]
    pub inner_code_path: Option<String>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, ExperimentError> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ExperimentError> {
        Self::from_json(&read(path)?)
    }

    pub fn delta0(&self) -> f64 {
        2.0 * self.delta.sqrt()
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |m: String| Err(ExperimentError::Config(m));
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return bad(format!("delta = {} must lie in (0, 1)", self.delta));
        }
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.d == 0 || self.d >= self.N {
            return bad(format!(
                "need 1 <= d < N (got N = {}, d = {})",
                self.N, self.d
            ));
        }
        if self.N * self.d % 2 == 1 {
            return bad(format!("N*d = {} must be even", self.N * self.d));
        }
        if self.eta_list.is_empty() || self.eta_list.iter().any(|e| !(e.is_finite() && *e >= 0.0)) {
            return bad("eta_list must be a nonempty list of nonnegative numbers".into());
        }
        if !(self.lp_tol > 0.0 && self.lp_tol < 1e-2) {
            return bad(format!("lp_tol = {} must lie in (0, 0.01)", self.lp_tol));
        }
        if inner_order(self.delta0(), self.d) == 0 {
            return bad(format!(
                "floor(2*sqrt(delta)*d) = 0 for delta = {}, d = {}",
                self.delta, self.d
            ));
        }
        if self.s == Some(0) {
            return bad("s must be positive".into());
        }
        Ok(())
    }

    fn rnsp_options(&self) -> RnspOptions {
        RnspOptions {
            lp_tol: self.lp_tol,
            budget: self.budget,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub input_hash: String,
    pub graph_hash: String,
    pub inner_code_hash: String,
    pub matrix_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct PipelineSummary {
    pub N: usize,
    pub d: usize,
    pub delta: f64,
    pub delta0: f64,
    pub lambda_certified: Option<f64>,
    pub k: usize,
    pub inner_column_weight: usize,
    pub rho0: f64,
    pub tau0: f64,
    pub rho: f64,
    pub tau: f64,
    pub C1: f64,
    pub C2: f64,
    pub order: usize,
    pub certified: bool,
    pub certification_note: String,
    pub structure: StructureReport,
    pub rows: RowAccounting,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub trial: usize,
    pub sparsity: usize,
    pub eta: f64,
    pub err_l1: f64,
    pub err_inf: f64,
    pub sigma_s: f64,
    pub bound: f64,
    pub residual: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub rows: usize,
    pub passed: usize,
    pub pass_rate: f64,
    /// Rows with `σ_s(x) = 0` and `η = 0`, where recovery must be exact.
    pub exact_rows: usize,
    pub exact_recoveries: usize,
    pub max_err_inf_exact: f64,
    pub min_slack: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub provenance: Provenance,
    pub pipeline: PipelineSummary,
    pub rows: Vec<TrialRow>,
    pub summary: Summary,
}

impl ExperimentReport {
    /// True when the pipeline was certified and some guarantee check failed;
    /// the CLI exits nonzero exactly in this case.
    pub fn certified_failure(&self) -> bool {
        self.pipeline.certified && self.summary.passed < self.summary.rows
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub setup_seconds: f64,
    pub certify_seconds: f64,
    pub median_apply_seconds: f64,
    pub median_solve_seconds: f64,
    pub total_seconds: f64,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub report: ExperimentReport,
    pub timings: Timings,
}

const EXACT_TOL: f64 = 1e-6;
const GUARANTEE_TOL: f64 = 1e-6;

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

fn read(path: &Path) -> Result<String, ExperimentError> {
    fs::read_to_string(path).map_err(|source| ExperimentError::Read {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes via a temporary file in the target directory and renames it into
/// place, so readers never see a partial file.
pub fn atomic_write(path: &Path, contents: &[u8]) -> Result<(), ExperimentError> {
    let werr = |source: std::io::Error| ExperimentError::Write {
        path: path.to_path_buf(),
        source,
    };
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&dir).map_err(werr)?;
    let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(werr)?;
    tmp.write_all(contents).map_err(werr)?;
    tmp.persist(path).map_err(|e| werr(e.error))?;
    Ok(())
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

fn draw_signal(model: SparsityModel, n: usize, sparsity: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut x = vec![0.0; n];
    match model {
        SparsityModel::Exact => {
            for i in sample(rng, n, sparsity.min(n)) {
                x[i] = rng.sample(StandardNormal);
            }
        }
        SparsityModel::PowerLaw => {
            let mut perm: Vec<usize> = (0..n).collect();
            perm.shuffle(rng);
            for (rank, &i) in perm.iter().enumerate() {
                let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                x[i] = sign * ((rank + 1) as f64).powf(-1.5);
            }
        }
    }
    x
}

/// `η·U·u/‖u‖₁` with `u` standard normal and `U` uniform on `[0, 1]`.
fn draw_noise(m: usize, eta: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let u: Vec<f64> = (0..m).map(|_| rng.sample(StandardNormal)).collect();
    let norm = l1_norm(&u);
    let scale: f64 = rng.random();
    if norm == 0.0 || eta == 0.0 {
        return vec![0.0; m];
    }
    u.into_iter().map(|v| eta * scale * v / norm).collect()
}

struct Pipeline {
    graph_text: String,
    inner: InnerCode,
    matrix: TannerMatrix,
}

fn build_pipeline(cfg: &ExperimentConfig, opts: &RnspOptions) -> Result<Pipeline, ExperimentError> {
    let mut graph = match &cfg.graph_path {
        Some(p) => RegularGraph::parse(&read(Path::new(p))?)?,
        None => random_regular(cfg.N, cfg.d, cfg.seed)?,
    };
    if graph.num_vertices() != cfg.N || graph.degree() != cfg.d {
        return Err(ExperimentError::Config(format!(
            "graph file is ({}, {}) but config asks for N = {}, d = {}",
            graph.num_vertices(),
            graph.degree(),
            cfg.N,
            cfg.d
        )));
    }
    if graph.certified_lambda().is_none() {
        let spectral = SpectralOptions {
            seed: cfg.seed,
            ..SpectralOptions::default()
        };
        match graph.certify(&spectral) {
            Ok(_) | Err(GraphError::NotExpanding { .. }) => {}
            Err(e) => return Err(e.into()),
        }
    }
    let inner = match &cfg.inner_code_path {
        Some(p) => InnerCode::parse(&read(Path::new(p))?, opts)?,
        None => {
            let delta0 = cfg.delta0();
            let params = InnerSearch {
                d: cfg.d,
                delta0,
                rho0: cfg.rho0,
                weight_cap: InnerSearch::default_weight_cap(delta0),
                row_cap: InnerSearch::default_row_cap(delta0, cfg.d),
                attempts: cfg.inner_attempts,
                seed: cfg.seed.wrapping_add(1),
            };
            search_inner_code(&params, opts)?
        }
    };
    let h = DoubleCover::new(&graph);
    let matrix = TannerMatrix::assemble(&h, &inner)?.with_seed(cfg.seed);
    Ok(Pipeline {
        graph_text: graph.to_text(),
        inner,
        matrix,
    })
}

/// Builds (or loads) the pipeline, optionally certifies it, and runs every
/// trial at every noise level.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome, ExperimentError> {
    cfg.validate()?;
    let start = Instant::now();
    let opts = cfg.rnsp_options();
    let Pipeline {
        graph_text,
        inner,
        matrix,
    } = build_pipeline(cfg, &opts)?;
    let order = cfg.s.unwrap_or_else(|| inner_order(cfg.delta0(), cfg.d));
    let (rho, tau) = lift_constants(inner.rho0(), inner.tau0())?;
    let (c1, c2) = recovery_constants(rho, tau)?;
    let setup_seconds = start.elapsed().as_secs_f64();

    let certify_start = Instant::now();
    let (certified, certification_note) = if !cfg.certify {
        (false, "direct certification disabled".to_string())
    } else {
        match certify_tanner_rnsp(&matrix, order, rho, tau, &opts) {
            Ok(rep) if rep.verdict.is_certified() => (
                true,
                format!("certified at order {order} with lifted constants"),
            ),
            Ok(rep) => {
                let r = rep.verdict.refutation().expect("refuted verdict");
                (
                    false,
                    format!(
                        "refuted on support {:?} (violation {:e})",
                        r.support, r.violation
                    ),
                )
            }
            Err(AnalysisError::Rnsp(e @ RnspError::BudgetExceeded { .. })) => {
                (false, e.to_string())
            }
            Err(e) => return Err(e.into()),
        }
    };
    let certify_seconds = certify_start.elapsed().as_secs_f64();

    let dense = matrix.to_dense();
    let n = matrix.cols();
    let results: Result<Vec<(Vec<TrialRow>, f64, f64)>, ExperimentError> = (0..cfg.trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x7472_6961_6c73);
            rng.set_stream(trial as u64);
            let sparsity = match cfg.sparsity_model {
                SparsityModel::Exact => 1 + trial % order,
                SparsityModel::PowerLaw => order,
            };
            let x = draw_signal(cfg.sparsity_model, n, sparsity, &mut rng);
            let mut rows = Vec::with_capacity(cfg.eta_list.len());
            let (mut apply_t, mut solve_t) = (0.0, 0.0);
            for &level in &cfg.eta_list {
                let eta = if cfg.eta_relative {
                    level * l1_norm(&x)
                } else {
                    level
                };
                let e = draw_noise(matrix.rows(), eta, &mut rng);
                let t0 = Instant::now();
                let mut y = matrix.apply(&x)?;
                apply_t += t0.elapsed().as_secs_f64();
                for (yi, ei) in y.iter_mut().zip(&e) {
                    *yi += ei;
                }
                let t1 = Instant::now();
                let result = l1_minimize(&dense, &y, eta, cfg.lp_tol)?;
                solve_t += t1.elapsed().as_secs_f64();
                let g = guarantee_check(&result.z, &x, order, eta, rho, tau, GUARANTEE_TOL)?;
                let err_inf = result
                    .z
                    .iter()
                    .zip(&x)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max);
                rows.push(TrialRow {
                    trial,
                    sparsity,
                    eta,
                    err_l1: g.lhs,
                    err_inf,
                    sigma_s: g.sigma_s,
                    bound: g.rhs,
                    residual: result.residual,
                    pass: g.pass,
                });
            }
            let k = cfg.eta_list.len() as f64;
            Ok((rows, apply_t / k, solve_t / k))
        })
        .collect();
    let results = results?;
    let apply_times = results.iter().map(|r| r.1).collect();
    let solve_times = results.iter().map(|r| r.2).collect();
    let rows: Vec<TrialRow> = results.into_iter().flat_map(|r| r.0).collect();

    let passed = rows.iter().filter(|r| r.pass).count();
    let exact: Vec<&TrialRow> = rows
        .iter()
        .filter(|r| r.sigma_s == 0.0 && r.eta == 0.0)
        .collect();
    let summary = Summary {
        rows: rows.len(),
        passed,
        pass_rate: passed as f64 / rows.len() as f64,
        exact_rows: exact.len(),
        exact_recoveries: exact.iter().filter(|r| r.err_inf <= EXACT_TOL).count(),
        max_err_inf_exact: exact.iter().map(|r| r.err_inf).fold(0.0, f64::max),
        min_slack: rows
            .iter()
            .map(|r| r.bound - r.err_l1)
            .fold(f64::INFINITY, f64::min),
    };

    let input = serde_json::to_vec(cfg)?;
    let report = ExperimentReport {
        config: cfg.clone(),
        provenance: Provenance {
            input_hash: sha256_hex(&input),
            graph_hash: sha256_hex(graph_text.as_bytes()),
            inner_code_hash: sha256_hex(inner.to_text().as_bytes()),
            matrix_hash: sha256_hex(matrix.to_matrix_market().as_bytes()),
        },
        pipeline: PipelineSummary {
            N: cfg.N,
            d: cfg.d,
            delta: cfg.delta,
            delta0: cfg.delta0(),
            lambda_certified: matrix.provenance().lambda_certified,
            k: inner.k(),
            inner_column_weight: inner.column_weight(),
            rho0: inner.rho0(),
            tau0: inner.tau0(),
            rho,
            tau,
            C1: c1,
            C2: c2,
            order,
            certified,
            certification_note,
            structure: matrix.structure_report(),
            rows: row_accounting(cfg.delta, cfg.N, cfg.d, inner.k()),
        },
        rows,
        summary,
    };
    Ok(ExperimentOutcome {
        report,
        timings: Timings {
            setup_seconds,
            certify_seconds,
            median_apply_seconds: median(apply_times),
            median_solve_seconds: median(solve_times),
            total_seconds: start.elapsed().as_secs_f64(),
        },
    })
}

/// Writes `report.json` and `timings.json` into `dir`.
pub fn write_outputs(
    outcome: &ExperimentOutcome,
    dir: &Path,
) -> Result<(PathBuf, PathBuf), ExperimentError> {
    let report = dir.join("report.json");
    let timings = dir.join("timings.json");
    atomic_write(&report, outcome.report.to_json().as_bytes())?;
    atomic_write(
        &timings,
        serde_json::to_string_pretty(&outcome.timings)?.as_bytes(),
    )?;
    Ok((report, timings))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config() -> ExperimentConfig {
        ExperimentConfig::from_json(
            r#"{"N": 6, "d": 4, "delta": 0.0625, "seed": 5, "trials": 4,
                "eta_list": [0.0, 0.1], "sparsity_model": "exact", "lp_tol": 1e-8,
                "s": 1, "certify": false}"#,
        )
        .unwrap()
    }

    #[test]
    fn config_validation() {
        let mut c = config();
        assert_eq!(c.rho0, 0.3);
        assert!(c.eta_relative);
        c.N = 5;
        c.d = 3;
        assert!(matches!(c.validate(), Err(ExperimentError::Config(m)) if m.contains("even")));
        let mut c = config();
        c.delta = 1.0;
        assert!(c.validate().is_err());
        let mut c = config();
        c.trials = 0;
        assert!(c.validate().is_err());
        assert!(ExperimentConfig::from_json(r#"{"N": 6}"#).is_err());
        assert!(ExperimentConfig::from_json(
            r#"{"N": 6, "d": 4, "delta": 0.0625, "seed": 5, "trials": 4, "eta_list": [0.0],
                "sparsity_model": "exact", "bogus": 1}"#
        )
        .is_err());
    }

    #[test]
    fn signals_follow_the_model() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = draw_signal(SparsityModel::Exact, 20, 3, &mut rng);
        assert_eq!(x.iter().filter(|v| **v != 0.0).count(), 3);
        let x = draw_signal(SparsityModel::PowerLaw, 20, 3, &mut rng);
        let mut mags: Vec<f64> = x.iter().map(|v| v.abs()).collect();
        mags.sort_by(|a, b| b.total_cmp(a));
        assert_eq!(mags[0], 1.0);
        assert!((mags[3] - 4f64.powf(-1.5)).abs() < 1e-15);
        let e = draw_noise(50, 2.0, &mut rng);
        assert!(l1_norm(&e) <= 2.0 + 1e-12);
    }

    #[test]
    fn small_run_is_deterministic() {
        let c = config();
        let a = run_experiment(&c).unwrap();
        let b = run_experiment(&c).unwrap();
        assert_eq!(a.report.to_json(), b.report.to_json());
        assert_eq!(a.report.rows.len(), 8);
        assert!(!a.report.pipeline.certified);
        assert!(!a.report.certified_failure());
        for r in &a.report.rows {
            assert!(r.residual <= r.eta + 1e-8);
        }
    }

    #[test]
    fn outputs_are_written() {
        let dir = tempfile::tempdir().unwrap();
        let out = run_experiment(&config()).unwrap();
        let (r, t) = write_outputs(&out, dir.path()).unwrap();
        let back: ExperimentReport = serde_json::from_str(&fs::read_to_string(r).unwrap()).unwrap();
        assert_eq!(back, out.report);
        assert!(fs::read_to_string(t)
            .unwrap()
            .contains("median_solve_seconds"));
    }
}
