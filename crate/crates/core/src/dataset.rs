//! Training corpora: synthetic generation and CSV exchange.
//!
//! The exchange format is plain CSV, one sample per row, no header.
//! Values are written with Rust's shortest round-trip formatting, so a
//! save followed by a load reproduces the dataset exactly.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// A collection of `p` training points in `R^n`.
///
/// Immutable after construction and safe to share read-only across
/// threads.
#[derive(Debug, Clone, PartialEq)]
pub struct DataSet {
    points: Vec<Vec<f64>>,
    n: usize,
    label: String,
}

impl DataSet {
    /// Validates and wraps a point collection: at least two points, all
    /// of the same dimension, no non-finite entries.
    pub fn new(points: Vec<Vec<f64>>, label: impl Into<String>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidArgument(format!(
                "dataset needs at least 2 points, got {}",
                points.len()
            )));
        }
        let n = points[0].len();
        if n == 0 {
            return Err(Error::InvalidArgument("points have dimension 0".into()));
        }
        for (i, p) in points.iter().enumerate() {
            if p.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: p.len(),
                });
            }
            if p.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "point {i} contains a non-finite entry"
                )));
            }
        }
        Ok(Self {
            points,
            n,
            label: label.into(),
        })
    }

    /// Ambient dimension.
    pub fn dim(&self) -> usize {
        self.n
    }

    /// Number of points.
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        false // construction requires at least two points
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i]
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn label(&self) -> &str {
        &self.label
    }
}

/// Generates one image per axis-aligned placement of a `square`×`square`
/// block of ones in a `side`×`side` zero grid, flattened row-major.
///
/// Produces `(side - square + 1)²` points of dimension `side²`. The
/// placements are enumerated row-major, so the output is deterministic.
pub fn generate_translated_squares(side: usize, square: usize) -> Result<DataSet> {
    if side == 0 || square == 0 {
        return Err(Error::InvalidArgument(
            "side and square must be positive".into(),
        ));
    }
    if square > side {
        return Err(Error::InvalidArgument(format!(
            "square size {square} exceeds grid side {side}"
        )));
    }
    let n = side * side;
    let span = side - square + 1;
    if span * span < 2 {
        return Err(Error::InvalidArgument(
            "square equal to side gives a single placement; need at least 2 points".into(),
        ));
    }
    let mut points = Vec::with_capacity(span * span);
    for r0 in 0..span {
        for c0 in 0..span {
            let mut img = vec![0.0; n];
            for dr in 0..square {
                let row = (r0 + dr) * side;
                for dc in 0..square {
                    img[row + c0 + dc] = 1.0;
                }
            }
            points.push(img);
        }
    }
    DataSet::new(points, format!("squares side={side} square={square}"))
}

/// Reads a dataset from `path`: one sample per row, comma-separated
/// numeric entries, constant row width. Errors name the offending line
/// (1-based).
pub fn load_dataset(path: impl AsRef<Path>) -> Result<DataSet> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let display = path.display().to_string();
    let parse_err = |line: usize, message: String| Error::Parse {
        path: display.clone(),
        line,
        message,
    };

    let mut points: Vec<Vec<f64>> = Vec::new();
    let mut width = 0usize;
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        if line.trim().is_empty() {
            // permit a trailing newline, reject interior blank rows
            if points.is_empty() {
                continue;
            }
            break;
        }
        let mut row = Vec::new();
        for field in line.split(',') {
            let value: f64 = field
                .trim()
                .parse()
                .map_err(|_| parse_err(lineno, format!("non-numeric field {field:?}")))?;
            if !value.is_finite() {
                return Err(parse_err(lineno, format!("non-finite value {field:?}")));
            }
            row.push(value);
        }
        if points.is_empty() {
            width = row.len();
        } else if row.len() != width {
            return Err(parse_err(
                lineno,
                format!("row has {} fields, expected {width}", row.len()),
            ));
        }
        points.push(row);
    }
    if points.len() < 2 {
        return Err(parse_err(
            points.len(),
            format!("dataset needs at least 2 rows, found {}", points.len()),
        ));
    }
    DataSet::new(points, display)
}

/// Writes the dataset as CSV. `load_dataset(save_dataset(d)) == d`.
pub fn save_dataset(data: &DataSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let io_err = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut out = BufWriter::new(File::create(path).map_err(io_err)?);
    for point in data.points() {
        let mut first = true;
        for x in point {
            if !first {
                out.write_all(b",").map_err(io_err)?;
            }
            write!(out, "{x}").map_err(io_err)?;
            first = false;
        }
        out.write_all(b"\n").map_err(io_err)?;
    }
    out.flush().map_err(io_err)
}
