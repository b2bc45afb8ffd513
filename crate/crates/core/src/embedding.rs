//! Rank-1 factor representation of a learned measurement matrix.
//!
//! An embedding holds `r` ordered factor slots plus one global trace
//! scale. The represented Gram matrix is
//!
//!   B = (scale / r) · Σ_t f_t f_tᵀ
//!
//! over the occupied slots, and the rows of the measurement matrix Φ
//! are √(scale/r) · f_tᵀ, so B = ΦᵀΦ. Empty slots come from zero solver
//! steps; they contribute nothing but still count toward `r`, which
//! keeps the averaging weight of every prefix of a run intact. Solver
//! and PCA factors are unit vectors; baseline constructors may store
//! rows of arbitrary norm.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{axpy, dot};
use crate::secant::{OperatorImage, SecantSet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "EmbeddingFile", into = "EmbeddingFile")]
pub struct LearnedEmbedding {
    n: usize,
    scale: f64,
    trace_budget: f64,
    factors: Vec<Option<Vec<f64>>>,
}

/// On-disk layout. `factors` and `zero_mask` are parallel arrays over
/// the `r` slots; empty slots store an empty row.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EmbeddingFile {
    n: usize,
    r: usize,
    scale: f64,
    trace_budget: f64,
    factors: Vec<Vec<f64>>,
    zero_mask: Vec<bool>,
}

impl From<LearnedEmbedding> for EmbeddingFile {
    fn from(e: LearnedEmbedding) -> Self {
        let r = e.factors.len();
        let zero_mask = e.factors.iter().map(|f| f.is_none()).collect();
        let factors = e
            .factors
            .into_iter()
            .map(Option::unwrap_or_default)
            .collect();
        EmbeddingFile {
            n: e.n,
            r,
            scale: e.scale,
            trace_budget: e.trace_budget,
            factors,
            zero_mask,
        }
    }
}

impl TryFrom<EmbeddingFile> for LearnedEmbedding {
    type Error = Error;

    fn try_from(f: EmbeddingFile) -> Result<Self> {
        if f.factors.len() != f.r || f.zero_mask.len() != f.r {
            return Err(Error::InvalidArgument(format!(
                "embedding file: r={} but {} factors and {} mask entries",
                f.r,
                f.factors.len(),
                f.zero_mask.len()
            )));
        }
        let factors = f
            .factors
            .into_iter()
            .zip(&f.zero_mask)
            .map(|(row, &zero)| {
                if zero != row.is_empty() {
                    return Err(Error::InvalidArgument(
                        "embedding file: zero_mask disagrees with factor rows".into(),
                    ));
                }
                Ok(if zero { None } else { Some(row) })
            })
            .collect::<Result<Vec<_>>>()?;
        let mut out = LearnedEmbedding::new(f.n, factors, f.scale)?;
        out.trace_budget = f.trace_budget;
        Ok(out)
    }
}

impl LearnedEmbedding {
    /// Wraps factor slots with a scale. Every occupied slot must have
    /// dimension `n`, finite entries and a nonzero row; the scale must
    /// be positive. The trace budget is set to the realized trace.
    pub fn new(n: usize, factors: Vec<Option<Vec<f64>>>, scale: f64) -> Result<Self> {
        if factors.is_empty() {
            return Err(Error::InvalidArgument("embedding needs at least one factor slot".into()));
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "embedding scale must be positive and finite, got {scale}"
            )));
        }
        for f in factors.iter().flatten() {
            if f.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: f.len(),
                });
            }
            if f.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite("embedding factor"));
            }
            if f.iter().all(|x| *x == 0.0) {
                return Err(Error::InvalidArgument(
                    "occupied factor slot holds an all-zero row; mark it empty instead".into(),
                ));
            }
        }
        let mut out = Self {
            n,
            scale,
            trace_budget: 0.0,
            factors,
        };
        out.trace_budget = out.trace();
        Ok(out)
    }

    /// The identity Gram matrix `B = I_n` as an embedding: `n` canonical
    /// factors with scale `n`.
    pub fn identity(n: usize) -> Self {
        let factors = (0..n)
            .map(|i| {
                let mut e = vec![0.0; n];
                e[i] = 1.0;
                Some(e)
            })
            .collect();
        Self::new(n, factors, n as f64).expect("identity embedding is valid")
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Number of factor slots `r` (occupied or not).
    pub fn slots(&self) -> usize {
        self.factors.len()
    }

    /// Number of occupied slots; an upper bound on `rank(B)`.
    pub fn rank_used(&self) -> usize {
        self.factors.iter().flatten().count()
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// The trace target met by the last rescale.
    pub fn trace_budget(&self) -> f64 {
        self.trace_budget
    }

    pub fn factor(&self, t: usize) -> Option<&[f64]> {
        self.factors[t].as_deref()
    }

    pub fn factors(&self) -> &[Option<Vec<f64>>] {
        &self.factors
    }

    /// `trace(B) = (scale / r) Σ ‖f_t‖²`.
    pub fn trace(&self) -> f64 {
        let sum: f64 = self.factors.iter().flatten().map(|f| dot(f, f)).sum();
        self.scale / self.slots() as f64 * sum
    }

    /// Replaces the global scale, leaving factor directions untouched.
    pub(crate) fn with_scale(&self, scale: f64) -> Result<Self> {
        let mut out = Self::new(self.n, self.factors.clone(), scale)?;
        out.trace_budget = out.trace();
        Ok(out)
    }

    /// The first `m` factor slots re-averaged over `m`, before any
    /// rescale. Used by the prefix sweep.
    pub(crate) fn prefix_unscaled(&self, m: usize) -> Result<Self> {
        if m == 0 || m > self.slots() {
            return Err(Error::InvalidArgument(format!(
                "prefix length {m} out of range 1..={}",
                self.slots()
            )));
        }
        Self::new(self.n, self.factors[..m].to_vec(), 1.0)
    }

    /// Rows of Φ for the occupied slots: √(scale/r) · f_t.
    pub fn phi_rows(&self) -> Vec<Vec<f64>> {
        let c = (self.scale / self.slots() as f64).sqrt();
        self.factors
            .iter()
            .flatten()
            .map(|f| f.iter().map(|x| c * x).collect())
            .collect()
    }

    /// `Φx`, one entry per occupied slot.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: x.len(),
            });
        }
        let c = (self.scale / self.slots() as f64).sqrt();
        Ok(self
            .factors
            .iter()
            .flatten()
            .map(|f| c * dot(f, x))
            .collect())
    }

    /// `A(B)` over a secant set, evaluated in factor form.
    pub fn operator_image(&self, secants: &SecantSet) -> Result<OperatorImage> {
        if secants.dim() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: secants.dim(),
            });
        }
        let c = self.scale / self.slots() as f64;
        let factors: Vec<(f64, &[f64])> = self
            .factors
            .iter()
            .flatten()
            .map(|f| (c, f.as_slice()))
            .collect();
        secants.apply_operator_factors(&factors)
    }

    /// Dense `B = ΦᵀΦ`, row-major. Intended for small `n`.
    pub fn gram_dense(&self) -> Vec<f64> {
        let n = self.n;
        let c = self.scale / self.slots() as f64;
        let mut out = vec![0.0; n * n];
        for f in self.factors.iter().flatten() {
            for (i, fi) in f.iter().enumerate() {
                if *fi != 0.0 {
                    axpy(&mut out[i * n..(i + 1) * n], c * fi, f);
                }
            }
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let json = self.to_json();
        fs::write(path, json).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.display().to_string(),
            line: e.line(),
            message: e.to_string(),
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("embedding serializes") + "\n"
    }
}
