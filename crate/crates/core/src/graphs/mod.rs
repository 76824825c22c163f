//! Regular graphs, their spectral certification, double covers and the
//! bipartite mixing bound.

mod cover;
mod generate;
mod mixing;
mod spectrum;

pub use cover::{DoubleCover, Side};
pub use generate::random_regular;
pub use mixing::{edges_between, mixing_check, mixing_discrepancy, MixingReport};
pub use spectrum::{second_eigenvalue, SpectralEstimate, SpectralOptions};

use std::collections::VecDeque;
use std::fmt::Write as _;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("N*d = {n}*{d} is odd; a d-regular graph on N vertices needs N*d even")]
    OddDegreeSum { n: usize, d: usize },
    #[error("degree {d} must be positive and smaller than the vertex count {n}")]
    BadDegree { n: usize, d: usize },
    #[error("vertex {vertex} has degree {found}, expected {expected}")]
    NotRegular {
        vertex: usize,
        found: usize,
        expected: usize,
    },
    #[error("self-loop at vertex {0}")]
    SelfLoop(usize),
    #[error("duplicate edge {0}-{1}")]
    MultiEdge(usize, usize),
    #[error("vertex {vertex} out of range for {n} vertices")]
    VertexOutOfRange { vertex: usize, n: usize },
    #[error("graph is disconnected")]
    Disconnected,
    #[error("power iteration did not converge in {iterations} iterations (last estimate {last_estimate})")]
    NoConvergence {
        iterations: usize,
        last_estimate: f64,
    },
    #[error(
        "spectral bound {bound} is not below the degree {degree}; graph is bipartite or nearly so"
    )]
    NotExpanding { bound: f64, degree: usize },
    #[error("could not produce a simple graph after {attempts} attempts; parameters too dense")]
    GenerationFailed { attempts: usize },
    #[error("tolerance must be positive, got {0}")]
    BadTolerance(f64),
    #[error("graph file line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// Simple undirected `d`-regular graph on `n` vertices with sorted adjacency
/// lists, plus an optional certified bound on the second eigenvalue.
#[derive(Debug, Clone, PartialEq)]
pub struct RegularGraph {
    n: usize,
    degree: usize,
    adjacency: Vec<Vec<usize>>,
    certified_lambda: Option<f64>,
}

impl RegularGraph {
    /// Validates an undirected edge list (any orientation) as a simple
    /// `d`-regular graph.
    pub fn from_edges(
        n: usize,
        degree: usize,
        edges: &[(usize, usize)],
    ) -> Result<Self, GraphError> {
        if degree == 0 || degree >= n {
            return Err(GraphError::BadDegree { n, d: degree });
        }
        if (n * degree) % 2 == 1 {
            return Err(GraphError::OddDegreeSum { n, d: degree });
        }
        let mut adjacency = vec![Vec::with_capacity(degree); n];
        for &(u, v) in edges {
            for w in [u, v] {
                if w >= n {
                    return Err(GraphError::VertexOutOfRange { vertex: w, n });
                }
            }
            if u == v {
                return Err(GraphError::SelfLoop(u));
            }
            adjacency[u].push(v);
            adjacency[v].push(u);
        }
        for (u, list) in adjacency.iter_mut().enumerate() {
            list.sort_unstable();
            if let Some(w) = list.windows(2).find(|w| w[0] == w[1]) {
                return Err(GraphError::MultiEdge(u.min(w[0]), u.max(w[0])));
            }
            if list.len() != degree {
                return Err(GraphError::NotRegular {
                    vertex: u,
                    found: list.len(),
                    expected: degree,
                });
            }
        }
        Ok(Self {
            n,
            degree,
            adjacency,
            certified_lambda: None,
        })
    }

    pub fn complete(n: usize) -> Result<Self, GraphError> {
        let edges: Vec<_> = (0..n)
            .flat_map(|u| (u + 1..n).map(move |v| (u, v)))
            .collect();
        Self::from_edges(n, n.saturating_sub(1), &edges)
    }

    pub fn cycle(n: usize) -> Result<Self, GraphError> {
        let edges: Vec<_> = (0..n).map(|u| (u, (u + 1) % n)).collect();
        Self::from_edges(n, 2, &edges)
    }

    pub fn num_vertices(&self) -> usize {
        self.n
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adjacency[v]
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.adjacency[u].binary_search(&v).is_ok()
    }

    /// Edges as `(u, v)` with `u < v`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adjacency
            .iter()
            .enumerate()
            .flat_map(|(u, list)| list.iter().filter(move |&&v| u < v).map(move |&v| (u, v)))
    }

    pub fn num_edges(&self) -> usize {
        self.n * self.degree / 2
    }

    pub fn certified_lambda(&self) -> Option<f64> {
        self.certified_lambda
    }

    pub fn is_connected(&self) -> bool {
        if self.n == 0 {
            return true;
        }
        let mut seen = vec![false; self.n];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        let mut count = 1;
        while let Some(u) = queue.pop_front() {
            for &v in &self.adjacency[u] {
                if !seen[v] {
                    seen[v] = true;
                    count += 1;
                    queue.push_back(v);
                }
            }
        }
        count == self.n
    }

    /// Runs [`second_eigenvalue`] and records `estimate + tol` as the
    /// certified bound. Fails without recording when the bound reaches `d`.
    pub fn certify(&mut self, opts: &SpectralOptions) -> Result<SpectralEstimate, GraphError> {
        let est = second_eigenvalue(self, opts)?;
        if est.certified_bound >= self.degree as f64 {
            return Err(GraphError::NotExpanding {
                bound: est.certified_bound,
                degree: self.degree,
            });
        }
        self.certified_lambda = Some(est.certified_bound);
        Ok(est)
    }

    /// Attaches a bound obtained elsewhere (for example from a certification
    /// record on disk). The bound must be below the degree.
    pub fn with_certified_lambda(mut self, lambda: f64) -> Result<Self, GraphError> {
        if !(lambda >= 0.0 && lambda < self.degree as f64) {
            return Err(GraphError::NotExpanding {
                bound: lambda,
                degree: self.degree,
            });
        }
        self.certified_lambda = Some(lambda);
        Ok(self)
    }

    /// Plain-text form: `N d` then one `u v` line per edge, `u < v`, 0-indexed.
    /// [`parse`](Self::parse) skips `#` comment lines.
    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(12 * self.num_edges() + 16);
        let _ = writeln!(out, "{} {}", self.n, self.degree);
        for (u, v) in self.edges() {
            let _ = writeln!(out, "{u} {v}");
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, GraphError> {
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'));
        let perr = |line: usize, msg: &str| GraphError::Parse {
            line: line + 1,
            msg: msg.to_string(),
        };
        let (hl, header) = lines.next().ok_or_else(|| perr(0, "empty graph file"))?;
        let pair = |line: usize, s: &str| -> Result<(usize, usize), GraphError> {
            let mut it = s.split_whitespace().map(str::parse::<usize>);
            match (it.next(), it.next(), it.next()) {
                (Some(Ok(a)), Some(Ok(b)), None) => Ok((a, b)),
                _ => Err(perr(line, "expected two non-negative integers")),
            }
        };
        let (n, d) = pair(hl, header)?;
        let mut edges = Vec::with_capacity(n * d / 2);
        for (line, l) in lines {
            let (u, v) = pair(line, l)?;
            if u >= v {
                return Err(perr(line, "edge endpoints must satisfy u < v"));
            }
            edges.push((u, v));
        }
        Self::from_edges(n, d, &edges)
    }
}
