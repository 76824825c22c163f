//! Matrix containers and Matrix Market coordinate-format I/O.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum MatrixError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("matrix market line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("matrix market file declares an empty matrix ({rows}x{cols}, {nnz} entries)")]
    Empty {
        rows: usize,
        cols: usize,
        nnz: usize,
    },
    #[error("entry ({row}, {col}) has non-binary value {value}")]
    NonBinary { row: usize, col: usize, value: f64 },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Row-major dense real matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, MatrixError> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(MatrixError::Dimension {
                    expected: cols,
                    got: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * c).collect(),
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Result<Vec<f64>, MatrixError> {
        if x.len() != self.cols {
            return Err(MatrixError::Dimension {
                expected: self.cols,
                got: x.len(),
            });
        }
        Ok((0..self.rows)
            .map(|r| self.row(r).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect())
    }
}

/// Binary matrix in compressed-row form: only column indices of the ones.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryCsr {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
}

impl BinaryCsr {
    /// Builds from per-row column lists; columns within a row are sorted and
    /// must be distinct and in range.
    pub fn from_row_lists(cols: usize, lists: Vec<Vec<usize>>) -> Result<Self, MatrixError> {
        let mut row_ptr = Vec::with_capacity(lists.len() + 1);
        let mut col_idx = Vec::with_capacity(lists.iter().map(Vec::len).sum());
        row_ptr.push(0);
        for (r, mut list) in lists.into_iter().enumerate() {
            list.sort_unstable();
            for w in list.windows(2) {
                if w[0] == w[1] {
                    return Err(MatrixError::Parse {
                        line: r,
                        msg: format!("duplicate entry in row {r}, column {}", w[0]),
                    });
                }
            }
            if let Some(&c) = list.last() {
                if c >= cols {
                    return Err(MatrixError::Dimension {
                        expected: cols,
                        got: c + 1,
                    });
                }
            }
            col_idx.extend(list);
            row_ptr.push(col_idx.len());
        }
        Ok(Self {
            rows: row_ptr.len() - 1,
            cols,
            row_ptr,
            col_idx,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    pub fn row(&self, r: usize) -> &[usize] {
        &self.col_idx[self.row_ptr[r]..self.row_ptr[r + 1]]
    }

    pub fn contains(&self, r: usize, c: usize) -> bool {
        self.row(r).binary_search(&c).is_ok()
    }

    pub fn column_weights(&self) -> Vec<usize> {
        let mut w = vec![0; self.cols];
        for &c in &self.col_idx {
            w[c] += 1;
        }
        w
    }

    /// `y[r]` = sum of `x` over the ones in row `r`.
    pub fn mul_vec(&self, x: &[f64]) -> Result<Vec<f64>, MatrixError> {
        if x.len() != self.cols {
            return Err(MatrixError::Dimension {
                expected: self.cols,
                got: x.len(),
            });
        }
        Ok((0..self.rows)
            .map(|r| self.row(r).iter().map(|&c| x[c]).sum())
            .collect())
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut m = DenseMatrix::zeros(self.rows, self.cols);
        for r in 0..self.rows {
            for &c in self.row(r) {
                m.set(r, c, 1.0);
            }
        }
        m
    }

    pub fn to_sparse(&self) -> SparseMatrix {
        let mut entries = Vec::with_capacity(self.nnz());
        for r in 0..self.rows {
            entries.extend(self.row(r).iter().map(|&c| (r, c, 1.0)));
        }
        SparseMatrix {
            rows: self.rows,
            cols: self.cols,
            entries,
        }
    }
}

/// Coordinate-list real matrix, 0-indexed.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    pub rows: usize,
    pub cols: usize,
    pub entries: Vec<(usize, usize, f64)>,
}

impl SparseMatrix {
    pub fn to_dense(&self) -> DenseMatrix {
        let mut m = DenseMatrix::zeros(self.rows, self.cols);
        for &(r, c, v) in &self.entries {
            m.set(r, c, m.get(r, c) + v);
        }
        m
    }

    /// Interprets the matrix as binary; zero entries are dropped.
    pub fn to_binary(&self) -> Result<BinaryCsr, MatrixError> {
        let mut lists = vec![Vec::new(); self.rows];
        for &(r, c, v) in &self.entries {
            if v == 1.0 {
                lists[r].push(c);
            } else if v != 0.0 {
                return Err(MatrixError::NonBinary {
                    row: r,
                    col: c,
                    value: v,
                });
            }
        }
        BinaryCsr::from_row_lists(self.cols, lists)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Field {
    Pattern,
    Integer,
    Real,
}

/// Serializes a binary matrix as `coordinate pattern general`, 1-indexed.
pub fn write_matrix_market(m: &BinaryCsr, comments: &[String]) -> String {
    let mut out = String::with_capacity(16 * m.nnz() + 128);
    out.push_str("%%MatrixMarket matrix coordinate pattern general\n");
    for c in comments {
        let _ = writeln!(out, "% {c}");
    }
    let _ = writeln!(out, "{} {} {}", m.rows(), m.cols(), m.nnz());
    for r in 0..m.rows() {
        for &c in m.row(r) {
            let _ = writeln!(out, "{} {}", r + 1, c + 1);
        }
    }
    out
}

/// Parses a `coordinate` Matrix Market document with `pattern`, `integer`
/// or `real` field and `general` symmetry.
pub fn parse_matrix_market(text: &str) -> Result<SparseMatrix, MatrixError> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or(MatrixError::Parse {
        line: 1,
        msg: "missing %%MatrixMarket header".into(),
    })?;
    let tokens: Vec<String> = header
        .split_whitespace()
        .map(str::to_ascii_lowercase)
        .collect();
    let perr = |line: usize, msg: &str| MatrixError::Parse {
        line,
        msg: msg.to_string(),
    };
    if tokens.len() != 5 || tokens[0] != "%%matrixmarket" || tokens[1] != "matrix" {
        return Err(perr(
            1,
            "header must be '%%MatrixMarket matrix <format> <field> <symmetry>'",
        ));
    }
    if tokens[2] != "coordinate" {
        return Err(perr(1, "only the coordinate format is supported"));
    }
    let field = match tokens[3].as_str() {
        "pattern" => Field::Pattern,
        "integer" => Field::Integer,
        "real" => Field::Real,
        other => return Err(perr(1, &format!("unsupported field '{other}'"))),
    };
    if tokens[4] != "general" {
        return Err(perr(1, "only general symmetry is supported"));
    }

    let mut size: Option<(usize, usize, usize)> = None;
    let mut entries = Vec::new();
    for (idx, raw) in lines {
        let lineno = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('%') {
            continue;
        }
        let parts: Vec<&str> = line.split_whitespace().collect();
        match size {
            None => {
                if parts.len() != 3 {
                    return Err(perr(lineno, "size line must be 'rows cols nnz'"));
                }
                let nums: Result<Vec<usize>, _> = parts.iter().map(|p| p.parse()).collect();
                let nums = nums.map_err(|_| perr(lineno, "non-integer size"))?;
                size = Some((nums[0], nums[1], nums[2]));
            }
            Some((rows, cols, _)) => {
                let want = if field == Field::Pattern { 2 } else { 3 };
                if parts.len() != want {
                    return Err(perr(lineno, &format!("expected {want} fields per entry")));
                }
                let r: usize = parts[0]
                    .parse()
                    .map_err(|_| perr(lineno, "bad row index"))?;
                let c: usize = parts[1]
                    .parse()
                    .map_err(|_| perr(lineno, "bad column index"))?;
                if r == 0 || c == 0 || r > rows || c > cols {
                    return Err(perr(
                        lineno,
                        &format!("entry ({r}, {c}) outside {rows}x{cols}"),
                    ));
                }
                let v = match field {
                    Field::Pattern => 1.0,
                    Field::Integer => parts[2]
                        .parse::<i64>()
                        .map_err(|_| perr(lineno, "bad integer value"))?
                        as f64,
                    Field::Real => parts[2]
                        .parse::<f64>()
                        .map_err(|_| perr(lineno, "bad real value"))?,
                };
                entries.push((r - 1, c - 1, v));
            }
        }
    }
    let (rows, cols, nnz) = size.ok_or_else(|| perr(0, "missing size line"))?;
    if rows == 0 || cols == 0 {
        return Err(MatrixError::Empty { rows, cols, nnz });
    }
    if entries.len() != nnz {
        return Err(MatrixError::Parse {
            line: 0,
            msg: format!("header declares {nnz} entries, found {}", entries.len()),
        });
    }
    Ok(SparseMatrix {
        rows,
        cols,
        entries,
    })
}

pub fn read_matrix_market(path: &Path) -> Result<SparseMatrix, MatrixError> {
    parse_matrix_market(&fs::read_to_string(path)?)
}
