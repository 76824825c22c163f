use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::json;

use expander_sketch::experiment::{
    atomic_write, run_experiment, sha256_hex, write_outputs, ExperimentConfig, ExperimentError,
};
use expander_sketch::graphs::{random_regular, GraphError, SpectralOptions};
use expander_sketch::inner_code::{search_inner_code, InnerSearch, RnspOptions};
use expander_sketch::matrix::read_matrix_market;
use expander_sketch::recovery::{guarantee_check, l1_minimize};
use expander_sketch::{DoubleCover, InnerCode, RegularGraph, TannerMatrix};

/// Build sparse binary sketching matrices from expander graphs and recover
/// sparse signals from their measurements.
#[derive(Parser)]
#[command(name = "expander-sketch", version)]
struct Cli {
    /// Seed for every random choice (overrides the experiment config's seed).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// LP feasibility and optimality tolerance.
    #[arg(long = "lp-tol", global = true)]
    lp_tol: Option<f64>,
    /// Maximum number of LPs one RNSP verification may solve.
    #[arg(long, global = true)]
    budget: Option<u128>,
    /// Print a JSON summary on stdout instead of text.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random d-regular graph and certify its second eigenvalue.
    GenGraph {
        #[arg(short = 'n', long = "n")]
        n: usize,
        #[arg(short = 'd', long)]
        d: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Search for a small inner matrix with the robust null space property.
    FindInnerCode {
        #[arg(short = 'd', long)]
        d: usize,
        #[arg(long)]
        delta0: f64,
        #[arg(long, default_value_t = 0.3)]
        rho0: f64,
        /// Random candidates tried per row count.
        #[arg(long, default_value_t = 200)]
        attempts: usize,
        #[arg(long)]
        weight_cap: Option<usize>,
        #[arg(long)]
        row_cap: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Assemble the measurement matrix from a graph and an inner code.
    Build {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        inner_code: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve basis pursuit for measurements y with noise budget eta.
    Recover {
        #[arg(long)]
        matrix: PathBuf,
        /// JSON array, or an object with `y` and optionally `x_true`, `s`,
        /// `rho`, `tau` for a guarantee check.
        #[arg(long)]
        y: PathBuf,
        #[arg(long)]
        eta: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a recovery experiment from a JSON config.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config's output_dir.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

/// Bad arguments or inputs; exits with status 2.
#[derive(Debug)]
struct Invalid(String);

impl fmt::Display for Invalid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Invalid {}

fn invalid(msg: impl Into<String>) -> anyhow::Error {
    Invalid(msg.into()).into()
}

fn is_validation(err: &anyhow::Error) -> bool {
    err.chain().any(|e| {
        e.is::<Invalid>()
            || matches!(
                e.downcast_ref::<GraphError>(),
                Some(GraphError::OddDegreeSum { .. } | GraphError::BadDegree { .. })
            )
            || matches!(
                e.downcast_ref::<ExperimentError>(),
                Some(ExperimentError::Config(_) | ExperimentError::Json(_))
            )
    })
}

fn configure_threads() {
    if let Some(n) = std::env::var("EXPANDER_SKETCH_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n > 0)
    {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
}

fn rnsp_options(cli: &Cli) -> RnspOptions {
    let d = RnspOptions::default();
    RnspOptions {
        lp_tol: cli.lp_tol.unwrap_or(d.lp_tol),
        budget: cli.budget.unwrap_or(d.budget),
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn write(path: &Path, contents: &str) -> Result<()> {
    atomic_write(path, contents.as_bytes())?;
    Ok(())
}

fn sidecar(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn emit(cli: &Cli, value: serde_json::Value, text: String) {
    if cli.json {
        println!("{value}");
    } else {
        println!("{text}");
    }
}

#[derive(Serialize, Deserialize)]
#[allow(non_snake_case)]
struct GraphRecord {
    N: usize,
    d: usize,
    seed: u64,
    lambda_hat: f64,
    certified_bound: f64,
    tol: f64,
    iterations: usize,
    certified: bool,
    input_hash: String,
    graph_hash: String,
}

fn gen_graph(cli: &Cli, n: usize, d: usize, out: &Path) -> Result<()> {
    if n * d % 2 == 1 {
        return Err(invalid(format!(
            "N*d = {} is odd; a d-regular graph needs an even degree sum (N*d even)",
            n * d
        )));
    }
    if d == 0 || d >= n {
        return Err(invalid(format!("need 1 <= d < N (got N = {n}, d = {d})")));
    }
    let seed = cli.seed.unwrap_or(0);
    let input_hash = sha256_hex(format!("gen-graph N={n} d={d} seed={seed}").as_bytes());
    let graph = random_regular(n, d, seed)?;
    let opts = SpectralOptions {
        seed,
        ..SpectralOptions::default()
    };
    let est = expander_sketch::graphs::second_eigenvalue(&graph, &opts)?;
    let certified = est.certified_bound < d as f64;
    let body = graph.to_text();
    let text = format!(
        "# expander-sketch gen-graph N={n} d={d} seed={seed}\n# input_hash {input_hash}\n{body}"
    );
    let record = GraphRecord {
        N: n,
        d,
        seed,
        lambda_hat: est.lambda_hat,
        certified_bound: est.certified_bound,
        tol: est.tol,
        iterations: est.iterations,
        certified,
        input_hash,
        graph_hash: sha256_hex(text.as_bytes()),
    };
    write(out, &text)?;
    write(
        &sidecar(out, ".cert.json"),
        &serde_json::to_string_pretty(&record)?,
    )?;
    emit(
        cli,
        serde_json::to_value(&record)?,
        format!(
            "wrote {} ({n} vertices, degree {d}); lambda <= {:.6}{}",
            out.display(),
            record.certified_bound,
            if certified {
                ""
            } else {
                " (not below d: no expansion certificate)"
            }
        ),
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn find_inner_code(
    cli: &Cli,
    d: usize,
    delta0: f64,
    rho0: f64,
    attempts: usize,
    weight_cap: Option<usize>,
    row_cap: Option<usize>,
    out: &Path,
) -> Result<()> {
    if !(delta0 > 0.0 && delta0 <= 1.0) {
        return Err(invalid(format!("delta0 = {delta0} must lie in (0, 1]")));
    }
    let params = InnerSearch {
        d,
        delta0,
        rho0,
        weight_cap: weight_cap.unwrap_or_else(|| InnerSearch::default_weight_cap(delta0)),
        row_cap: row_cap.unwrap_or_else(|| InnerSearch::default_row_cap(delta0, d)),
        attempts,
        seed: cli.seed.unwrap_or(0),
    };
    let input_hash = sha256_hex(&serde_json::to_vec(&params)?);
    let code = search_inner_code(&params, &rnsp_options(cli))?;
    let text = format!(
        "# expander-sketch find-inner-code\n# input_hash {input_hash}\n{}",
        code.to_text()
    );
    let record = json!({
        "params": params,
        "k": code.k(),
        "column_weight": code.column_weight(),
        "tau0": code.tau0(),
        "certificate": code.certificate(),
        "input_hash": input_hash,
    });
    write(out, &text)?;
    write(
        &sidecar(out, ".cert.json"),
        &serde_json::to_string_pretty(&record)?,
    )?;
    emit(
        cli,
        json!({"k": code.k(), "d": d, "order": code.order(), "rho0": rho0, "tau0": code.tau0()}),
        format!(
            "wrote {}: {}x{d} inner code, order {}, rho0 = {rho0}, tau0 = {:.6}",
            out.display(),
            code.k(),
            code.order(),
            code.tau0()
        ),
    );
    Ok(())
}

fn load_graph(path: &Path) -> Result<(RegularGraph, String)> {
    let text = read(path)?;
    let mut graph = RegularGraph::parse(&text).with_context(|| format!("in {}", path.display()))?;
    let cert = sidecar(path, ".cert.json");
    if cert.exists() {
        let record: GraphRecord = serde_json::from_str(&read(&cert)?)
            .with_context(|| format!("in {}", cert.display()))?;
        if record.certified {
            graph = graph.with_certified_lambda(record.certified_bound)?;
        }
    }
    Ok((graph, text))
}

fn build(cli: &Cli, graph_path: &Path, inner_path: &Path, out: &Path) -> Result<()> {
    let (graph, graph_text) = load_graph(graph_path)?;
    let inner_text = read(inner_path)?;
    let inner = InnerCode::parse(&inner_text, &rnsp_options(cli))
        .with_context(|| format!("in {}", inner_path.display()))?;
    let h = DoubleCover::new(&graph);
    let a = TannerMatrix::assemble(&h, &inner)?;
    let input_hash = sha256_hex(format!("{graph_text}\n--\n{inner_text}").as_bytes());
    let mm = a.to_matrix_market_with(&[format!("input_hash {input_hash}")]);
    let report = a.structure_report();
    let sidecar_json = json!({
        "provenance": a.provenance(),
        "structure": report,
        "input_hash": input_hash,
        "graph_hash": sha256_hex(graph_text.as_bytes()),
        "inner_code_hash": sha256_hex(inner_text.as_bytes()),
    });
    write(out, &mm)?;
    write(
        &sidecar(out, ".json"),
        &serde_json::to_string_pretty(&sidecar_json)?,
    )?;
    emit(
        cli,
        serde_json::to_value(&report)?,
        format!(
            "wrote {}: {} x {} with {} nonzeros, max column weight {}",
            out.display(),
            report.rows,
            report.cols,
            report.nnz,
            report.max_col_weight
        ),
    );
    Ok(())
}

#[derive(Deserialize)]
#[serde(untagged)]
enum Measurements {
    Plain(Vec<f64>),
    Full {
        y: Vec<f64>,
        x_true: Option<Vec<f64>>,
        s: Option<usize>,
        rho: Option<f64>,
        tau: Option<f64>,
    },
}

#[derive(Serialize)]
#[allow(non_snake_case)]
struct RecoverOutput {
    z: Vec<f64>,
    objective: f64,
    residual: f64,
    guarantee_slack: Option<f64>,
    C1: Option<f64>,
    C2: Option<f64>,
    pass: Option<bool>,
    input_hash: String,
}

fn recover(cli: &Cli, matrix: &Path, y_path: &Path, eta: f64, out: &Path) -> Result<()> {
    if !(eta.is_finite() && eta >= 0.0) {
        return Err(invalid(format!("eta = {eta} must be a nonnegative number")));
    }
    let matrix_text = read(matrix)?;
    let a = read_matrix_market(matrix)
        .with_context(|| format!("in {}", matrix.display()))?
        .to_dense();
    let y_text = read(y_path)?;
    let meas: Measurements =
        serde_json::from_str(&y_text).with_context(|| format!("in {}", y_path.display()))?;
    let (y, truth) = match meas {
        Measurements::Plain(y) => (y, None),
        Measurements::Full {
            y,
            x_true,
            s,
            rho,
            tau,
        } => match (x_true, s, rho, tau) {
            (Some(x), Some(s), Some(rho), Some(tau)) => (y, Some((x, s, rho, tau))),
            (None, None, None, None) => (y, None),
            _ => {
                return Err(invalid(
                    "a guarantee check needs all of x_true, s, rho and tau",
                ))
            }
        },
    };
    if y.len() != a.rows() {
        return Err(invalid(format!(
            "y has {} entries but the matrix has {} rows",
            y.len(),
            a.rows()
        )));
    }
    let lp_tol = cli.lp_tol.unwrap_or(1e-8);
    let mut result = l1_minimize(&a, &y, eta, lp_tol)?;
    let (mut c1, mut c2, mut pass) = (None, None, None);
    if let Some((x, s, rho, tau)) = truth {
        let g = guarantee_check(&result.z, &x, s, eta, rho, tau, 1e-6)?;
        result.record_guarantee(&g);
        (c1, c2, pass) = (Some(g.C1), Some(g.C2), Some(g.pass));
    }
    let output = RecoverOutput {
        objective: result.objective,
        residual: result.residual,
        guarantee_slack: result.guarantee_slack,
        z: result.z,
        C1: c1,
        C2: c2,
        pass,
        input_hash: sha256_hex(format!("{matrix_text}\n--\n{y_text}\n--\neta={eta}").as_bytes()),
    };
    write(out, &serde_json::to_string_pretty(&output)?)?;
    emit(
        cli,
        json!({"objective": output.objective, "residual": output.residual, "pass": output.pass}),
        format!(
            "wrote {}: |z|_1 = {:.6e}, residual = {:.3e}{}",
            out.display(),
            output.objective,
            output.residual,
            match output.pass {
                Some(true) => ", guarantee holds",
                Some(false) => ", GUARANTEE FAILS",
                None => "",
            }
        ),
    );
    if output.pass == Some(false) {
        anyhow::bail!("recovery guarantee failed");
    }
    Ok(())
}

fn experiment(cli: &Cli, config: &Path, out_dir: Option<&Path>) -> Result<()> {
    let mut cfg = ExperimentConfig::load(config)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(tol) = cli.lp_tol {
        cfg.lp_tol = tol;
    }
    if let Some(budget) = cli.budget {
        cfg.budget = budget;
    }
    let dir = out_dir
        .map(Path::to_path_buf)
        .or_else(|| cfg.output_dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    let outcome = run_experiment(&cfg)?;
    let (report_path, _) = write_outputs(&outcome, &dir)?;
    let r = &outcome.report;
    emit(
        cli,
        json!({
            "report": report_path,
            "certified": r.pipeline.certified,
            "summary": r.summary,
        }),
        format!(
            "wrote {}: {}/{} guarantee checks passed ({}); exact recoveries {}/{}",
            report_path.display(),
            r.summary.passed,
            r.summary.rows,
            if r.pipeline.certified {
                "certified pipeline"
            } else {
                "uncertified pipeline"
            },
            r.summary.exact_recoveries,
            r.summary.exact_rows
        ),
    );
    if r.certified_failure() {
        anyhow::bail!("guarantee check failed on a certified pipeline");
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::GenGraph { n, d, out } => gen_graph(cli, *n, *d, out),
        Command::FindInnerCode {
            d,
            delta0,
            rho0,
            attempts,
            weight_cap,
            row_cap,
            out,
        } => find_inner_code(
            cli,
            *d,
            *delta0,
            *rho0,
            *attempts,
            *weight_cap,
            *row_cap,
            out,
        ),
        Command::Build {
            graph,
            inner_code,
            out,
        } => build(cli, graph, inner_code, out),
        Command::Recover {
            matrix,
            y,
            eta,
            out,
        } => recover(cli, matrix, y, *eta, out),
        Command::Experiment { config, out_dir } => experiment(cli, config, out_dir.as_deref()),
    }
}

fn main() -> ExitCode {
    configure_threads();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            if is_validation(&err) {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
