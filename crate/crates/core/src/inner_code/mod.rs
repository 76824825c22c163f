//! Small binary inner matrices `C₀` with a certified robust null space
//! property.

pub mod rnsp;
mod search;

pub use rnsp::{
    min_tau, null_space_value, rnsp_violation, verify_rnsp, MinTau, RnspCertificate, RnspError,
    RnspOptions, RnspRefutation, RnspVerdict,
};
pub use search::{search_inner_code, InnerSearch, SearchError};

use std::fmt::Write as _;

use thiserror::Error;

use crate::matrix::DenseMatrix;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InnerCodeError {
    #[error("rho0 = {0} must lie in (0, 1/3)")]
    BadRho0(f64),
    #[error("delta0 = {delta0} with d = {d} gives order floor(delta0*d) = 0")]
    ZeroOrder { delta0: f64, d: usize },
    #[error("k = {k} rows exceeds d = {d} columns")]
    TooManyRows { k: usize, d: usize },
    #[error("matrix is not certified at order {order}, rho0 = {rho0}, tau0 = {tau0}")]
    NotCertified { order: usize, rho0: f64, tau0: f64 },
    #[error("inner code text line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Rnsp(#[from] RnspError),
}

/// `floor(delta0 * d)`, robust to representation error in `delta0`.
pub fn inner_order(delta0: f64, d: usize) -> usize {
    (delta0 * d as f64 + 1e-9).floor() as usize
}

/// A `k × d` binary matrix certified to have the RNSP of order
/// `floor(δ₀ d)` with constants `ρ₀ < 1/3` and `τ₀`.
#[derive(Debug, Clone, PartialEq)]
pub struct InnerCode {
    rows: Vec<Vec<bool>>,
    d: usize,
    delta0: f64,
    rho0: f64,
    tau0: f64,
    certificate: RnspCertificate,
}

impl InnerCode {
    /// Verifies `rows` at `(floor(δ₀d), ρ₀, τ₀)` and wraps it.
    pub fn certify(
        rows: Vec<Vec<bool>>,
        delta0: f64,
        rho0: f64,
        tau0: f64,
        opts: &RnspOptions,
    ) -> Result<Self, InnerCodeError> {
        let d = rows.first().map_or(0, Vec::len);
        let k = rows.len();
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != d) {
            return Err(InnerCodeError::Parse {
                line: i + 2,
                msg: format!("row has {} entries, expected {d}", r.len()),
            });
        }
        if k > d {
            return Err(InnerCodeError::TooManyRows { k, d });
        }
        if !(rho0 > 0.0 && rho0 < 1.0 / 3.0) {
            return Err(InnerCodeError::BadRho0(rho0));
        }
        let order = inner_order(delta0, d);
        if order == 0 {
            return Err(InnerCodeError::ZeroOrder { delta0, d });
        }
        let dense = to_dense(&rows, d);
        match verify_rnsp(&dense, order, rho0, tau0, opts)? {
            RnspVerdict::Certified(certificate) => Ok(Self {
                rows,
                d,
                delta0,
                rho0,
                tau0,
                certificate,
            }),
            RnspVerdict::Refuted(_) => Err(InnerCodeError::NotCertified { order, rho0, tau0 }),
        }
    }

    pub(crate) fn from_certificate(
        rows: Vec<Vec<bool>>,
        delta0: f64,
        rho0: f64,
        certificate: RnspCertificate,
    ) -> Self {
        let d = rows.first().map_or(0, Vec::len);
        Self {
            rows,
            d,
            delta0,
            rho0,
            tau0: certificate.tau,
            certificate,
        }
    }

    /// `d × d` identity, certified with `τ₀ = 1`.
    pub fn identity(
        d: usize,
        delta0: f64,
        rho0: f64,
        opts: &RnspOptions,
    ) -> Result<Self, InnerCodeError> {
        let rows = (0..d).map(|i| (0..d).map(|j| i == j).collect()).collect();
        Self::certify(rows, delta0, rho0, 1.0, opts)
    }

    pub fn k(&self) -> usize {
        self.rows.len()
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn delta0(&self) -> f64 {
        self.delta0
    }

    pub fn rho0(&self) -> f64 {
        self.rho0
    }

    pub fn tau0(&self) -> f64 {
        self.tau0
    }

    pub fn order(&self) -> usize {
        self.certificate.order
    }

    pub fn certificate(&self) -> &RnspCertificate {
        &self.certificate
    }

    pub fn rows(&self) -> &[Vec<bool>] {
        &self.rows
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.rows[row][col]
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().flatten().filter(|&&b| b).count()
    }

    pub fn column_weights(&self) -> Vec<usize> {
        (0..self.d)
            .map(|j| self.rows.iter().filter(|r| r[j]).count())
            .collect()
    }

    pub fn column_weight(&self) -> usize {
        self.column_weights().into_iter().max().unwrap_or(0)
    }

    pub fn to_dense(&self) -> DenseMatrix {
        to_dense(&self.rows, self.d)
    }

    /// `C₀ x` for `x` of length `d`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .map(|r| r.iter().zip(x).filter(|(b, _)| **b).map(|(_, v)| v).sum())
            .collect()
    }

    /// `k d delta0 rho0 tau0` followed by `k` rows of `0`/`1` characters.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{} {} {} {} {}",
            self.k(),
            self.d,
            self.delta0,
            self.rho0,
            self.tau0
        );
        for r in &self.rows {
            out.extend(r.iter().map(|&b| if b { '1' } else { '0' }));
            out.push('\n');
        }
        out
    }

    /// Parses [`InnerCode::to_text`] output (ignoring `#` comment lines) and
    /// re-verifies the certificate.
    pub fn parse(text: &str, opts: &RnspOptions) -> Result<Self, InnerCodeError> {
        let mut lines = text
            .lines()
            .filter(|l| !l.trim().is_empty() && !l.trim_start().starts_with('#'));
        let perr = |line: usize, msg: &str| InnerCodeError::Parse {
            line,
            msg: msg.to_string(),
        };
        let header: Vec<&str> = lines
            .next()
            .ok_or_else(|| perr(1, "empty inner code"))?
            .split_whitespace()
            .collect();
        if header.len() != 5 {
            return Err(perr(1, "header must be 'k d delta0 rho0 tau0'"));
        }
        let k: usize = header[0].parse().map_err(|_| perr(1, "bad k"))?;
        let d: usize = header[1].parse().map_err(|_| perr(1, "bad d"))?;
        let nums: Result<Vec<f64>, _> = header[2..].iter().map(|s| s.parse::<f64>()).collect();
        let nums = nums.map_err(|_| perr(1, "bad real parameter"))?;
        let mut rows = Vec::with_capacity(k);
        for (i, l) in lines.enumerate() {
            let row: Result<Vec<bool>, _> = l
                .trim()
                .chars()
                .map(|c| match c {
                    '0' => Ok(false),
                    '1' => Ok(true),
                    _ => Err(perr(i + 2, "rows may only contain 0 and 1")),
                })
                .collect();
            let row = row?;
            if row.len() != d {
                return Err(perr(i + 2, &format!("expected {d} columns")));
            }
            rows.push(row);
        }
        if rows.len() != k {
            return Err(perr(
                k + 2,
                &format!("expected {k} rows, found {}", rows.len()),
            ));
        }
        Self::certify(rows, nums[0], nums[1], nums[2], opts)
    }
}

fn to_dense(rows: &[Vec<bool>], d: usize) -> DenseMatrix {
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

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_round_trips_through_text() {
        let code = InnerCode::identity(4, 0.5, 0.25, &RnspOptions::default()).unwrap();
        assert_eq!(code.order(), 2);
        assert_eq!(code.column_weight(), 1);
        let text = code.to_text();
        assert!(text.starts_with("4 4 0.5 0.25 1\n1000\n"));
        assert_eq!(
            InnerCode::parse(&text, &RnspOptions::default()).unwrap(),
            code
        );
    }

    #[test]
    fn rejects_bad_parameters() {
        let o = RnspOptions::default();
        assert!(matches!(
            InnerCode::identity(4, 0.5, 1.0 / 3.0, &o),
            Err(InnerCodeError::BadRho0(_))
        ));
        assert!(matches!(
            InnerCode::identity(4, 0.1, 0.2, &o),
            Err(InnerCodeError::ZeroOrder { .. })
        ));
        let wide = vec![vec![true, false], vec![false, true], vec![true, true]];
        assert!(matches!(
            InnerCode::certify(wide, 0.5, 0.2, 1.0, &o),
            Err(InnerCodeError::TooManyRows { k: 3, d: 2 })
        ));
    }

    #[test]
    fn uncertifiable_matrix_is_rejected() {
        let rows = vec![vec![true, true, true, true]];
        assert!(matches!(
            InnerCode::certify(rows, 0.25, 0.3, 100.0, &RnspOptions::default()),
            Err(InnerCodeError::NotCertified { .. })
        ));
    }

    #[test]
    fn parse_errors() {
        let o = RnspOptions::default();
        assert!(InnerCode::parse("", &o).is_err());
        assert!(InnerCode::parse("1 2 0.5 0.2 1\n12\n", &o).is_err());
        assert!(InnerCode::parse("2 2 0.5 0.2 1\n10\n", &o).is_err());
    }

    #[test]
    fn order_rounding() {
        assert_eq!(inner_order(0.25, 8), 2);
        assert_eq!(inner_order(2.0 * (1.0f64 / 64.0).sqrt(), 8), 2);
        assert_eq!(inner_order(0.3, 10), 3);
    }
}
