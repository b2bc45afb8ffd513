//! Normalized secant sets and the secant quadratic-form operator.
//!
//! For a corpus the secants are the unit-normalized pairwise differences
//! v = (x_i − x_j)/‖x_i − x_j‖ with i < j, collected as the columns of an
//! n×M matrix V. The linear map
//!
//!   A(B) = diag(Vᵀ B V)
//!
//! sends a symmetric matrix to its quadratic forms along every secant;
//! its adjoint is A*(w) = V diag(w) Vᵀ. The stacked variant A₊ appends
//! −A, and its adjoint reduces to A*(w₁ − w₂). Everything here is
//! applied matrix-free; dense materialization is opt-in and capped.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::dataset::DataSet;
use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, norm2};

/// Columns per accumulation block in `recombine`. Partial sums are
/// combined in block order, so results do not depend on thread count.
const COL_BLOCK: usize = 256;

/// Default cap on the dimension for dense adjoint materialization.
pub const DENSE_CAP: usize = 1024;

/// How many secants to keep out of the `C(p, 2)` candidate pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SecantBudget {
    All,
    AtMost(usize),
}

/// Unit-norm secant directions of a dataset, stored column-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SecantSet {
    cols: Vec<f64>,
    pairs: Vec<(usize, usize)>,
    n: usize,
}

/// A vector in `R^M` holding one quadratic form per secant.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorImage {
    pub values: Vec<f64>,
}

impl OperatorImage {
    /// The constant target image `1_M`.
    pub fn ones(m: usize) -> Self {
        Self {
            values: vec![1.0; m],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `‖values − 1‖∞`
    pub fn max_deviation_from_one(&self) -> f64 {
        self.values
            .iter()
            .map(|a| (a - 1.0).abs())
            .fold(0.0, f64::max)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|a| a.abs()).fold(0.0, f64::max)
    }
}

/// Builds the normalized secant set of `data`.
///
/// All `C(p, 2)` pairs are enumerated in (i, j) lexicographic order;
/// pairs with `‖x_i − x_j‖ ≤ min_distance` are dropped. If more than the
/// budget survive, a uniform subsample of that size is drawn with the
/// seed and the chosen columns are re-ordered lexicographically.
pub fn build_secants(
    data: &DataSet,
    budget: SecantBudget,
    min_distance: f64,
    seed: u64,
) -> Result<SecantSet> {
    if min_distance < 0.0 || !min_distance.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "min_distance must be a nonnegative finite value, got {min_distance}"
        )));
    }
    if let SecantBudget::AtMost(0) = budget {
        return Err(Error::InvalidArgument(
            "secant budget must be positive".into(),
        ));
    }

    let p = data.len();
    let n = data.dim();
    let mut survivors: Vec<(usize, usize)> = Vec::new();
    for i in 0..p {
        for j in (i + 1)..p {
            let dist_sq: f64 = data
                .point(i)
                .iter()
                .zip(data.point(j))
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            if dist_sq.sqrt() > min_distance {
                survivors.push((i, j));
            }
        }
    }
    if survivors.is_empty() {
        return Err(Error::EmptySecantSet);
    }

    let pairs = match budget {
        SecantBudget::AtMost(k) if survivors.len() > k => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut chosen = rand::seq::index::sample(&mut rng, survivors.len(), k).into_vec();
            chosen.sort_unstable();
            chosen.into_iter().map(|idx| survivors[idx]).collect()
        }
        _ => survivors,
    };

    let mut cols = Vec::with_capacity(pairs.len() * n);
    for &(i, j) in &pairs {
        let start = cols.len();
        cols.extend(data.point(i).iter().zip(data.point(j)).map(|(a, b)| a - b));
        let col = &mut cols[start..];
        let norm = norm2(col);
        for x in col.iter_mut() {
            *x /= norm;
        }
    }

    Ok(SecantSet { cols, pairs, n })
}

impl SecantSet {
    /// Ambient dimension n.
    pub fn dim(&self) -> usize {
        self.n
    }

    /// Number of secants M.
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Source dataset index pair (i, j), i < j, of secant `l`.
    pub fn pair(&self, l: usize) -> (usize, usize) {
        self.pairs[l]
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn column(&self, l: usize) -> &[f64] {
        &self.cols[l * self.n..(l + 1) * self.n]
    }

    fn check_dim(&self, got: usize) -> Result<()> {
        if got != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got,
            });
        }
        Ok(())
    }

    /// `Vᵀx`: one inner product per secant column.
    pub fn projections(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n, "projections: dimension mismatch");
        #[cfg(feature = "parallel")]
        return self
            .cols
            .par_chunks_exact(self.n)
            .map(|col| dot(col, x))
            .collect();
        #[cfg(not(feature = "parallel"))]
        return self.projections_seq(x);
    }

    /// Sequential `Vᵀx`. The parallel path computes each entry with the
    /// same arithmetic, so the two agree bit for bit.
    pub fn projections_seq(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n, "projections: dimension mismatch");
        self.cols
            .chunks_exact(self.n)
            .map(|col| dot(col, x))
            .collect()
    }

    /// `Vw`: weighted sum of the secant columns, accumulated in fixed
    /// column blocks so the result matches `recombine_seq` bit for bit
    /// regardless of thread count.
    pub fn recombine(&self, w: &[f64]) -> Vec<f64> {
        assert_eq!(w.len(), self.len(), "recombine: weight length mismatch");
        #[cfg(feature = "parallel")]
        {
            let partials: Vec<Vec<f64>> = self
                .cols
                .par_chunks(self.n * COL_BLOCK)
                .zip(w.par_chunks(COL_BLOCK))
                .map(|(cols, ws)| block_recombine(self.n, cols, ws))
                .collect();
            return sum_in_order(self.n, &partials);
        }
        #[cfg(not(feature = "parallel"))]
        return self.recombine_seq(w);
    }

    /// Sequential `Vw` with the same blocked accumulation order.
    pub fn recombine_seq(&self, w: &[f64]) -> Vec<f64> {
        assert_eq!(w.len(), self.len(), "recombine: weight length mismatch");
        let partials: Vec<Vec<f64>> = self
            .cols
            .chunks(self.n * COL_BLOCK)
            .zip(w.chunks(COL_BLOCK))
            .map(|(cols, ws)| block_recombine(self.n, cols, ws))
            .collect();
        sum_in_order(self.n, &partials)
    }

    /// `A(B) = diag(VᵀBV)` for a dense row-major symmetric `B`.
    pub fn apply_operator_dense(&self, b: &[f64]) -> Result<OperatorImage> {
        if b.len() != self.n * self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n * self.n,
                got: b.len(),
            });
        }
        let n = self.n;
        let quad = |col: &[f64]| -> f64 {
            let mut acc = 0.0;
            for (i, vi) in col.iter().enumerate() {
                if *vi != 0.0 {
                    acc += vi * dot(&b[i * n..(i + 1) * n], col);
                }
            }
            acc
        };
        #[cfg(feature = "parallel")]
        let values = self.cols.par_chunks_exact(n).map(quad).collect();
        #[cfg(not(feature = "parallel"))]
        let values = self.cols.chunks_exact(n).map(quad).collect();
        Ok(OperatorImage { values })
    }

    /// `A(B)` for `B = Σ_t c_t u_t u_tᵀ` without materializing `B`:
    /// `Σ_t c_t (Vᵀu_t) ∘ (Vᵀu_t)`.
    pub fn apply_operator_factors(&self, factors: &[(f64, &[f64])]) -> Result<OperatorImage> {
        let mut values = vec![0.0; self.len()];
        for (coeff, u) in factors {
            self.check_dim(u.len())?;
            let proj = self.projections(u);
            for (out, p) in values.iter_mut().zip(&proj) {
                *out += coeff * p * p;
            }
        }
        Ok(OperatorImage { values })
    }

    /// The adjoint `A*(w) = V diag(w) Vᵀ` as a matrix-free action.
    pub fn apply_adjoint<'a>(&'a self, w: &[f64]) -> Result<AdjointAction<'a>> {
        if w.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                got: w.len(),
            });
        }
        Ok(AdjointAction {
            set: self,
            weights: w.to_vec(),
        })
    }

    /// The stacked adjoint `A₊*(w) = A*(w₁ − w₂)` for `w ∈ R^{2M}`.
    pub fn plus_adjoint<'a>(&'a self, w: &[f64]) -> Result<AdjointAction<'a>> {
        if w.len() != 2 * self.len() {
            return Err(Error::DimensionMismatch {
                expected: 2 * self.len(),
                got: w.len(),
            });
        }
        let (pos, neg) = w.split_at(self.len());
        let diff: Vec<f64> = pos.iter().zip(neg).map(|(a, b)| a - b).collect();
        Ok(AdjointAction {
            set: self,
            weights: diff,
        })
    }
}

fn block_recombine(n: usize, cols: &[f64], ws: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; n];
    for (col, &wl) in cols.chunks_exact(n).zip(ws) {
        if wl != 0.0 {
            axpy(&mut out, wl, col);
        }
    }
    out
}

fn sum_in_order(n: usize, partials: &[Vec<f64>]) -> Vec<f64> {
    let mut out = vec![0.0; n];
    for part in partials {
        axpy(&mut out, 1.0, part);
    }
    out
}

/// Matrix-free symmetric action `x ↦ V (w ∘ Vᵀx)`.
#[derive(Debug, Clone)]
pub struct AdjointAction<'a> {
    set: &'a SecantSet,
    weights: Vec<f64>,
}

impl AdjointAction<'_> {
    pub fn dim(&self) -> usize {
        self.set.dim()
    }

    /// Effective secant weights (already collapsed to length M).
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.set.check_dim(x.len())?;
        let mut proj = self.set.projections(x);
        for (p, w) in proj.iter_mut().zip(&self.weights) {
            *p *= w;
        }
        Ok(self.set.recombine(&proj))
    }

    /// Materializes `V diag(w) Vᵀ` row-major. Refused above `max_n` to
    /// bound memory; pass [`DENSE_CAP`] for the default limit.
    pub fn to_dense(&self, max_n: usize) -> Result<Vec<f64>> {
        let n = self.set.dim();
        if n > max_n {
            return Err(Error::InvalidArgument(format!(
                "dense materialization refused: n={n} exceeds cap {max_n}"
            )));
        }
        let mut out = vec![0.0; n * n];
        for (l, &w) in self.weights.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            let col = self.set.column(l);
            for (i, vi) in col.iter().enumerate() {
                let c = w * vi;
                if c != 0.0 {
                    axpy(&mut out[i * n..(i + 1) * n], c, col);
                }
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::generate_translated_squares;
    use crate::DataSet;
    use rand::Rng;

    fn two_point_set() -> SecantSet {
        let d = DataSet::new(vec![vec![1.0, 0.0], vec![0.0, 1.0]], "t").unwrap();
        build_secants(&d, SecantBudget::All, 1e-12, 0).unwrap()
    }

    fn random_set(n: usize, p: usize, seed: u64) -> SecantSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let points = (0..p)
            .map(|_| (0..n).map(|_| rng.random::<f64>() - 0.5).collect())
            .collect();
        let d = DataSet::new(points, "rand").unwrap();
        build_secants(&d, SecantBudget::All, 1e-12, 0).unwrap()
    }

    #[test]
    fn two_points_give_one_secant() {
        let s = two_point_set();
        assert_eq!(s.len(), 1);
        let inv_sqrt2 = 1.0 / 2.0_f64.sqrt();
        let col = s.column(0);
        assert!((col[0] - inv_sqrt2).abs() < 1e-15);
        assert!((col[1] + inv_sqrt2).abs() < 1e-15);
        assert_eq!(s.pair(0), (0, 1));
    }

    #[test]
    fn squares_full_secant_count() {
        let d = generate_translated_squares(16, 4).unwrap();
        let s = build_secants(&d, SecantBudget::All, 1e-12, 0).unwrap();
        assert_eq!(s.len(), 14196); // C(169, 2)
    }

    #[test]
    fn subsample_is_deterministic_and_ordered() {
        let d = generate_translated_squares(16, 4).unwrap();
        let a = build_secants(&d, SecantBudget::AtMost(2000), 1e-12, 7).unwrap();
        let b = build_secants(&d, SecantBudget::AtMost(2000), 1e-12, 7).unwrap();
        assert_eq!(a.len(), 2000);
        assert_eq!(a, b);
        assert!(a.pairs().windows(2).all(|w| w[0] < w[1]));
        let c = build_secants(&d, SecantBudget::AtMost(2000), 1e-12, 8).unwrap();
        assert_ne!(a.pairs(), c.pairs());
    }

    #[test]
    fn columns_are_unit_norm() {
        let d = generate_translated_squares(8, 3).unwrap();
        let s = build_secants(&d, SecantBudget::All, 1e-12, 0).unwrap();
        for l in 0..s.len() {
            assert!((norm2(s.column(l)) - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn duplicate_points_are_skipped() {
        let d = DataSet::new(
            vec![vec![1.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]],
            "dups",
        )
        .unwrap();
        let s = build_secants(&d, SecantBudget::All, 1e-12, 0).unwrap();
        assert_eq!(s.len(), 2); // (0,1) dropped
        assert_eq!(s.pairs(), &[(0, 2), (1, 2)]);

        let all_dup = DataSet::new(vec![vec![1.0, 0.0], vec![1.0, 0.0]], "dups").unwrap();
        assert!(matches!(
            build_secants(&all_dup, SecantBudget::All, 1e-12, 0).unwrap_err(),
            Error::EmptySecantSet
        ));
    }

    #[test]
    fn identity_maps_to_ones() {
        let d = generate_translated_squares(8, 2).unwrap();
        let s = build_secants(&d, SecantBudget::All, 1e-12, 0).unwrap();
        let n = s.dim();
        let mut eye = vec![0.0; n * n];
        for i in 0..n {
            eye[i * n + i] = 1.0;
        }
        let img = s.apply_operator_dense(&eye).unwrap();
        assert!(img.max_deviation_from_one() <= 1e-12);
    }

    #[test]
    fn diagonal_example() {
        let s = two_point_set();
        let img = s.apply_operator_dense(&[1.0, 0.0, 0.0, 0.0]).unwrap();
        assert!((img.values[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn factor_form_on_orthogonal_columns() {
        // secants e1 and e2 arise from points {0, e1, e1+e2} minus overlaps
        let d = DataSet::new(
            vec![vec![2.0, 0.0], vec![0.0, 0.0], vec![0.0, 2.0]],
            "t",
        )
        .unwrap();
        let s = build_secants(&d, SecantBudget::All, 1e-12, 0).unwrap();
        let v1: Vec<f64> = s.column(0).to_vec();
        let img = s.apply_operator_factors(&[(1.0, &v1)]).unwrap();
        assert!((img.values[0] - 1.0).abs() < 1e-12);
        // column 1 is (e1 - e2)/sqrt(2), column 2 is e2; check the one
        // orthogonal to v1 = e1 maps to 0
        let orthogonal: Vec<f64> = (0..s.len())
            .filter(|&l| dot(s.column(l), &v1).abs() < 1e-12)
            .collect::<Vec<_>>()
            .iter()
            .map(|&l| img.values[l])
            .collect();
        assert!(!orthogonal.is_empty());
        assert!(orthogonal.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn factor_and_dense_forms_agree() {
        let s = random_set(6, 5, 3);
        let n = s.dim();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let factors: Vec<(f64, Vec<f64>)> = (0..3)
            .map(|_| {
                let c: f64 = rng.random::<f64>();
                let u: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
                (c, u)
            })
            .collect();
        let mut dense = vec![0.0; n * n];
        for (c, u) in &factors {
            for i in 0..n {
                for j in 0..n {
                    dense[i * n + j] += c * u[i] * u[j];
                }
            }
        }
        let refs: Vec<(f64, &[f64])> = factors.iter().map(|(c, u)| (*c, u.as_slice())).collect();
        let a = s.apply_operator_factors(&refs).unwrap();
        let b = s.apply_operator_dense(&dense).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            assert!((x - y).abs() <= 1e-10 * (1.0 + x.abs()));
        }
    }

    #[test]
    fn operator_is_linear() {
        let s = random_set(5, 4, 9);
        let n = s.dim();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut rand_sym = || -> Vec<f64> {
            let mut b = vec![0.0; n * n];
            for i in 0..n {
                for j in i..n {
                    let v: f64 = rng.random::<f64>() - 0.5;
                    b[i * n + j] = v;
                    b[j * n + i] = v;
                }
            }
            b
        };
        let b1 = rand_sym();
        let b2 = rand_sym();
        let (alpha, beta) = (0.7, -1.3);
        let combo: Vec<f64> = b1
            .iter()
            .zip(&b2)
            .map(|(x, y)| alpha * x + beta * y)
            .collect();
        let lhs = s.apply_operator_dense(&combo).unwrap();
        let a1 = s.apply_operator_dense(&b1).unwrap();
        let a2 = s.apply_operator_dense(&b2).unwrap();
        for ((l, x), y) in lhs.values.iter().zip(&a1.values).zip(&a2.values) {
            assert!((l - (alpha * x + beta * y)).abs() < 1e-12);
        }
    }

    #[test]
    fn adjoint_of_zero_weights_is_zero() {
        let s = two_point_set();
        let action = s.apply_adjoint(&[0.0]).unwrap();
        let out = action.apply(&[0.3, -0.9]).unwrap();
        assert_eq!(out, vec![0.0, 0.0]);
    }

    #[test]
    fn adjoint_single_secant_is_projector() {
        let s = two_point_set();
        let v: Vec<f64> = s.column(0).to_vec();
        let action = s.apply_adjoint(&[1.0]).unwrap();
        let out = action.apply(&v).unwrap();
        for (o, vi) in out.iter().zip(&v) {
            assert!((o - vi).abs() < 1e-15);
        }
    }

    #[test]
    fn adjoint_identity_holds() {
        // <A(B), w> == <B, A*(w)> with both sides evaluated densely
        let s = random_set(8, 6, 5);
        let n = s.dim();
        let m = s.len();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..25 {
            let mut b = vec![0.0; n * n];
            for i in 0..n {
                for j in i..n {
                    let v: f64 = rng.random::<f64>() - 0.5;
                    b[i * n + j] = v;
                    b[j * n + i] = v;
                }
            }
            let w: Vec<f64> = (0..m).map(|_| rng.random::<f64>() - 0.5).collect();
            let lhs = dot(&s.apply_operator_dense(&b).unwrap().values, &w);
            let adj = s.apply_adjoint(&w).unwrap().to_dense(DENSE_CAP).unwrap();
            let rhs = dot(&b, &adj);
            assert!(
                (lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs()),
                "lhs={lhs} rhs={rhs}"
            );
        }
    }

    #[test]
    fn plus_adjoint_cancels_and_signs() {
        let s = two_point_set();
        let v: Vec<f64> = s.column(0).to_vec();

        // duplicated halves cancel
        let cancel = s.plus_adjoint(&[0.4, 0.4]).unwrap();
        assert_eq!(cancel.apply(&v).unwrap(), vec![0.0, 0.0]);

        // e_1 acts as +v vᵀ
        let pos = s.plus_adjoint(&[1.0, 0.0]).unwrap();
        let out = pos.apply(&v).unwrap();
        assert!((out[0] - v[0]).abs() < 1e-15 && (out[1] - v[1]).abs() < 1e-15);

        // e_{M+1} acts as −v vᵀ
        let neg = s.plus_adjoint(&[0.0, 1.0]).unwrap();
        let out = neg.apply(&v).unwrap();
        assert!((out[0] + v[0]).abs() < 1e-15 && (out[1] + v[1]).abs() < 1e-15);
    }

    #[test]
    fn dense_action_matches_matrix_free() {
        let s = random_set(7, 5, 13);
        let n = s.dim();
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let w: Vec<f64> = (0..s.len()).map(|_| rng.random::<f64>() - 0.5).collect();
        let action = s.apply_adjoint(&w).unwrap();
        let dense = action.to_dense(DENSE_CAP).unwrap();
        let x: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
        let free = action.apply(&x).unwrap();
        for i in 0..n {
            let di = dot(&dense[i * n..(i + 1) * n], &x);
            assert!((di - free[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn dense_cap_is_enforced() {
        let s = two_point_set();
        let action = s.apply_adjoint(&[1.0]).unwrap();
        assert!(action.to_dense(1).is_err());
    }

    #[test]
    fn sequential_kernels_match_dispatched() {
        let s = random_set(9, 7, 31);
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        let x: Vec<f64> = (0..s.dim()).map(|_| rng.random::<f64>() - 0.5).collect();
        let w: Vec<f64> = (0..s.len()).map(|_| rng.random::<f64>() - 0.5).collect();
        assert_eq!(s.projections(&x), s.projections_seq(&x));
        assert_eq!(s.recombine(&w), s.recombine_seq(&w));
    }

    #[test]
    fn length_mismatches_are_rejected() {
        let s = two_point_set();
        assert!(s.apply_adjoint(&[1.0, 2.0]).is_err());
        assert!(s.plus_adjoint(&[1.0]).is_err());
        assert!(s.apply_operator_dense(&[1.0]).is_err());
        assert!(s.apply_operator_factors(&[(1.0, &[1.0][..])]).is_err());
    }
}
