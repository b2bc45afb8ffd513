//! Empirical isometry evaluation, baselines and the generalization
//! check.
//!
//! The empirical restricted-isometry constant of a Gram matrix B over a
//! secant set is δ̂ = ‖A(B) − 1‖∞. Baselines are PCA (top eigenvectors
//! of the mean-centered covariance) and a raw Gaussian matrix, both
//! pushed through the same trace rescale as the learned embedding. The
//! generalization check perturbs normalized training points and tests
//! the observed squared distortion against the (δ + ε)/(1 − ε) bound.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::dataset::DataSet;
use crate::embedding::LearnedEmbedding;
use crate::error::{Error, Result};
use crate::linalg::{canonicalize_sign, dot, normalize};
use crate::secant::{OperatorImage, SecantSet};
use crate::seed;
use crate::solver::{rescale, TraceMode};

const TRIAL_STREAM: u64 = 4;
const GAUSSIAN_STREAM: u64 = 5;

/// Empirical isometry statistics of a matrix over a secant set.
#[derive(Debug, Clone, serde::Serialize)]
pub struct RicReport {
    /// `‖A(B) − 1‖∞`
    pub delta_hat: f64,
    pub residual_max: f64,
    pub residual_min: f64,
    pub residual_mean: f64,
    /// Occupied factor slots; absent for dense matrices.
    pub rank_used: Option<usize>,
    pub trace: f64,
}

fn report_from_image(image: &OperatorImage, rank_used: Option<usize>, trace: f64) -> RicReport {
    let mut max = f64::NEG_INFINITY;
    let mut min = f64::INFINITY;
    let mut sum = 0.0;
    for a in &image.values {
        let r = a - 1.0;
        max = max.max(r);
        min = min.min(r);
        sum += r;
    }
    RicReport {
        delta_hat: max.abs().max(min.abs()),
        residual_max: max,
        residual_min: min,
        residual_mean: sum / image.len() as f64,
        rank_used,
        trace,
    }
}

/// δ̂ of a learned embedding over `secants`.
pub fn empirical_ric(secants: &SecantSet, embedding: &LearnedEmbedding) -> Result<RicReport> {
    let image = embedding.operator_image(secants)?;
    Ok(report_from_image(
        &image,
        Some(embedding.rank_used()),
        embedding.trace(),
    ))
}

/// δ̂ of a dense row-major symmetric matrix over `secants`.
pub fn empirical_ric_matrix(secants: &SecantSet, b: &[f64]) -> Result<RicReport> {
    let image = secants.apply_operator_dense(b)?;
    let n = secants.dim();
    let trace = (0..n).map(|i| b[i * n + i]).sum();
    Ok(report_from_image(&image, None, trace))
}

/// Top-`rank` eigenvectors of the mean-centered sample covariance as
/// equally weighted factors, then rescaled like the solver output.
///
/// When the covariance rank falls short, the embedding carries fewer
/// factor slots than requested.
pub fn pca_baseline(
    data: &DataSet,
    secants: &SecantSet,
    rank: usize,
    mode: TraceMode,
) -> Result<LearnedEmbedding> {
    let n = data.dim();
    if rank == 0 || rank > n {
        return Err(Error::InvalidArgument(format!(
            "pca rank must be in 1..={n}, got {rank}"
        )));
    }
    let p = data.len();
    let mut mean = vec![0.0; n];
    for point in data.points() {
        for (m, x) in mean.iter_mut().zip(point) {
            *m += x;
        }
    }
    for m in mean.iter_mut() {
        *m /= p as f64;
    }
    let mut cov = DMatrix::<f64>::zeros(n, n);
    for point in data.points() {
        let centered: Vec<f64> = point.iter().zip(&mean).map(|(x, m)| x - m).collect();
        for (i, ci) in centered.iter().enumerate() {
            if *ci != 0.0 {
                for (j, cj) in centered.iter().enumerate() {
                    cov[(i, j)] += ci * cj;
                }
            }
        }
    }
    cov /= (p - 1) as f64;

    let eig = cov.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap()
            .then(a.cmp(&b))
    });
    let lead = eig.eigenvalues[order[0]];
    if lead <= 0.0 {
        return Err(Error::DegenerateEmbedding);
    }
    let threshold = lead * 1e-12;
    let factors: Vec<Option<Vec<f64>>> = order
        .iter()
        .take(rank)
        .filter(|&&i| eig.eigenvalues[i] > threshold)
        .map(|&i| {
            let mut v: Vec<f64> = eig.eigenvectors.column(i).iter().copied().collect();
            canonicalize_sign(&mut v);
            Some(v)
        })
        .collect();
    let unscaled = LearnedEmbedding::new(n, factors, 1.0)?;
    rescale(&unscaled, secants, mode)
}

/// A raw Gaussian matrix with `rank` rows of i.i.d. standard normal
/// entries, uniformly scaled to meet the trace mode. Rows are kept as
/// drawn, not orthonormalized.
pub fn gaussian_baseline(
    secants: &SecantSet,
    rank: usize,
    mode: TraceMode,
    seed: u64,
) -> Result<LearnedEmbedding> {
    if rank == 0 {
        return Err(Error::InvalidArgument("gaussian rank must be positive".into()));
    }
    let n = secants.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(seed, GAUSSIAN_STREAM, rank as u64));
    let factors: Vec<Option<Vec<f64>>> = (0..rank)
        .map(|_| Some((0..n).map(|_| rng.sample(StandardNormal)).collect()))
        .collect();
    let unscaled = LearnedEmbedding::new(n, factors, 1.0)?;
    rescale(&unscaled, secants, mode)
}

/// `(δ + ε) / (1 − ε)`: the isometry constant guaranteed on unit
/// vectors within ε of a training point.
pub fn generalization_bound(delta: f64, epsilon: f64) -> Result<f64> {
    if !(delta >= 0.0 && delta.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "delta must be nonnegative, got {delta}"
        )));
    }
    if !(0.0..1.0).contains(&epsilon) {
        return Err(Error::InvalidArgument(format!(
            "epsilon must lie in [0, 1), got {epsilon}"
        )));
    }
    Ok((delta + epsilon) / (1.0 - epsilon))
}

/// Outcome of the perturbed-point distortion check.
#[derive(Debug, Clone, serde::Serialize)]
pub struct GeneralizationReport {
    pub epsilon: f64,
    pub trials: usize,
    /// Training δ̂ of the embedding, used as δ in the bound.
    pub delta_hat: f64,
    /// `(δ̂ + ε) / (1 − ε)`: the linear-norm distortion bound.
    pub alpha_bar: f64,
    /// Squared-form bound `(1 + ᾱ)² − 1` on `‖Φz‖² − 1`.
    pub upper_bound: f64,
    /// Squared-form bound `1 − (1 − ᾱ)²` on `1 − ‖Φz‖²`, saturated at 1
    /// when ᾱ ≥ 1 (a lower bound below zero constrains nothing).
    pub lower_bound: f64,
    pub max_distortion: f64,
    pub max_distortion_upper: f64,
    pub max_distortion_lower: f64,
    pub pass: bool,
}

/// Draws `trials` unit vectors within ε of normalized training points
/// and checks every observed squared distortion `|‖Φz‖² − 1|` against
/// the bound derived from the training δ̂.
pub fn empirical_generalization(
    data: &DataSet,
    secants: &SecantSet,
    embedding: &LearnedEmbedding,
    epsilon: f64,
    trials: usize,
    seed_value: u64,
) -> Result<GeneralizationReport> {
    if !(0.0..1.0).contains(&epsilon) {
        return Err(Error::InvalidArgument(format!(
            "epsilon must lie in [0, 1), got {epsilon}"
        )));
    }
    if trials == 0 {
        return Err(Error::InvalidArgument("need at least one trial".into()));
    }
    if data.dim() != embedding.dim() {
        return Err(Error::DimensionMismatch {
            expected: embedding.dim(),
            got: data.dim(),
        });
    }
    let anchors: Vec<usize> = (0..data.len())
        .filter(|&i| data.point(i).iter().any(|x| *x != 0.0))
        .collect();
    if anchors.is_empty() {
        return Err(Error::InvalidArgument(
            "every training point is zero; nothing to normalize".into(),
        ));
    }

    let delta_hat = empirical_ric(secants, embedding)?.delta_hat;
    let alpha_bar = generalization_bound(delta_hat, epsilon)?;
    let upper_bound = (1.0 + alpha_bar) * (1.0 + alpha_bar) - 1.0;
    let lower_bound = if alpha_bar < 1.0 {
        1.0 - (1.0 - alpha_bar) * (1.0 - alpha_bar)
    } else {
        1.0
    };

    let n = data.dim();
    let run_trial = |t: usize| -> (f64, f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(seed_value, TRIAL_STREAM, t as u64));
        let anchor = anchors[rng.random_range(0..anchors.len())];
        let mut z: Vec<f64> = data.point(anchor).to_vec();
        normalize(&mut z);
        let mut dir: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        if normalize(&mut dir) > 0.0 {
            let radius = epsilon * rng.random::<f64>();
            for (zi, di) in z.iter_mut().zip(&dir) {
                *zi += radius * di;
            }
            normalize(&mut z);
        }
        let pz = embedding.apply(&z).expect("dimensions checked");
        let q = dot(&pz, &pz);
        (q - 1.0, 1.0 - q)
    };

    #[cfg(feature = "parallel")]
    let observed: Vec<(f64, f64)> = (0..trials).into_par_iter().map(run_trial).collect();
    #[cfg(not(feature = "parallel"))]
    let observed: Vec<(f64, f64)> = (0..trials).map(run_trial).collect();

    let mut max_upper = f64::NEG_INFINITY;
    let mut max_lower = f64::NEG_INFINITY;
    for (up, low) in &observed {
        max_upper = max_upper.max(*up);
        max_lower = max_lower.max(*low);
    }
    let pass = max_upper <= upper_bound + 1e-9 && max_lower <= lower_bound + 1e-9;
    Ok(GeneralizationReport {
        epsilon,
        trials,
        delta_hat,
        alpha_bar,
        upper_bound,
        lower_bound,
        max_distortion: max_upper.max(max_lower).max(0.0),
        max_distortion_upper: max_upper,
        max_distortion_lower: max_lower,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::generate_translated_squares;
    use crate::secant::{build_secants, SecantBudget};

    fn squares_set() -> (DataSet, SecantSet) {
        let d = generate_translated_squares(8, 3).unwrap();
        let s = build_secants(&d, SecantBudget::All, 1e-12, 0).unwrap();
        (d, s)
    }

    #[test]
    fn identity_has_zero_ric() {
        let (_, s) = squares_set();
        let report = empirical_ric(&s, &LearnedEmbedding::identity(s.dim())).unwrap();
        assert!(report.delta_hat <= 1e-12);
        assert_eq!(report.rank_used, Some(s.dim()));
    }

    #[test]
    fn zero_and_doubled_identity_have_unit_ric() {
        let (_, s) = squares_set();
        let n = s.dim();
        let zero = vec![0.0; n * n];
        let report = empirical_ric_matrix(&s, &zero).unwrap();
        assert!((report.delta_hat - 1.0).abs() < 1e-15);
        assert_eq!(report.rank_used, None);

        let mut two_eye = vec![0.0; n * n];
        for i in 0..n {
            two_eye[i * n + i] = 2.0;
        }
        let report = empirical_ric_matrix(&s, &two_eye).unwrap();
        assert!((report.delta_hat - 1.0).abs() < 1e-12);
        assert!((report.trace - 2.0 * n as f64).abs() < 1e-9);
    }

    #[test]
    fn residuals_are_scale_covariant() {
        let (_, s) = squares_set();
        let n = s.dim();
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let mut b = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let v: f64 = rng.random::<f64>() - 0.5;
                b[i * n + j] = v;
                b[j * n + i] = v;
            }
        }
        let base = s.apply_operator_dense(&b).unwrap();
        let c = 3.75;
        let scaled: Vec<f64> = b.iter().map(|x| c * x).collect();
        let scaled_img = s.apply_operator_dense(&scaled).unwrap();
        for (a, sa) in base.values.iter().zip(&scaled_img.values) {
            assert!((sa - c * a).abs() <= 1e-12 * (1.0 + a.abs() * c.abs()));
        }
    }

    #[test]
    fn delta_matches_brute_force() {
        let (_, s) = squares_set();
        let e = LearnedEmbedding::identity(s.dim());
        let report = empirical_ric(&s, &e).unwrap();
        // independent dense evaluation, one secant at a time
        let gram = e.gram_dense();
        let n = s.dim();
        let mut worst = 0.0_f64;
        for l in 0..s.len() {
            let v = s.column(l);
            let mut quad = 0.0;
            for i in 0..n {
                for j in 0..n {
                    quad += v[i] * gram[i * n + j] * v[j];
                }
            }
            worst = worst.max((quad - 1.0).abs());
        }
        assert!((report.delta_hat - worst).abs() <= 1e-12);
    }

    #[test]
    fn pca_recovers_single_direction() {
        let u = [0.6, -0.8];
        let points: Vec<Vec<f64>> = [1.0, 2.0, 3.5]
            .iter()
            .map(|t| u.iter().map(|x| t * x).collect())
            .collect();
        let d = DataSet::new(points, "line").unwrap();
        let s = build_secants(&d, SecantBudget::All, 1e-12, 0).unwrap();
        let e = pca_baseline(&d, &s, 1, TraceMode::Fixed(1.0)).unwrap();
        assert_eq!(e.rank_used(), 1);
        let f = e.factor(0).unwrap();
        assert!((dot(f, &u).abs() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn pca_isotropic_full_rank_is_near_identity() {
        let points = vec![
            vec![1.0, 0.0],
            vec![-1.0, 0.0],
            vec![0.0, 1.0],
            vec![0.0, -1.0],
        ];
        let d = DataSet::new(points, "cross").unwrap();
        let s = build_secants(&d, SecantBudget::All, 1e-12, 0).unwrap();
        let e = pca_baseline(&d, &s, 2, TraceMode::Auto).unwrap();
        let report = empirical_ric(&s, &e).unwrap();
        assert!(report.delta_hat < 1e-9, "delta={}", report.delta_hat);
    }

    #[test]
    fn pca_factors_are_orthonormal() {
        let (d, s) = squares_set();
        let e = pca_baseline(&d, &s, 10, TraceMode::Auto).unwrap();
        let factors: Vec<&[f64]> = (0..e.slots()).filter_map(|t| e.factor(t)).collect();
        assert_eq!(factors.len(), 10);
        for (i, a) in factors.iter().enumerate() {
            for (j, b) in factors.iter().enumerate() {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((dot(a, b) - expect).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn pca_full_rank_beats_single_direction() {
        let (d, s) = squares_set();
        // covariance of the squares corpus is rank deficient; take what
        // it has
        let full = pca_baseline(&d, &s, d.dim(), TraceMode::Auto).unwrap();
        let single = pca_baseline(&d, &s, 1, TraceMode::Auto).unwrap();
        let delta_full = empirical_ric(&s, &full).unwrap().delta_hat;
        let delta_single = empirical_ric(&s, &single).unwrap().delta_hat;
        assert!(delta_full <= delta_single + 1e-12);
        assert!(full.rank_used() < d.dim(), "translated squares span fewer directions");
    }

    #[test]
    fn gaussian_is_deterministic_and_trace_matched() {
        let (_, s) = squares_set();
        let a = gaussian_baseline(&s, 12, TraceMode::Fixed(4.0), 7).unwrap();
        let b = gaussian_baseline(&s, 12, TraceMode::Fixed(4.0), 7).unwrap();
        assert_eq!(a, b);
        assert!((a.trace() - 4.0).abs() <= 1e-9);
        let c = gaussian_baseline(&s, 12, TraceMode::Fixed(4.0), 8).unwrap();
        assert_ne!(a, c);
        // rows keep their raw relative norms
        let norms: Vec<f64> = a
            .phi_rows()
            .iter()
            .map(|r| dot(r, r).sqrt())
            .collect();
        assert!(norms.windows(2).any(|w| (w[0] - w[1]).abs() > 1e-6));
    }

    #[test]
    fn generalization_bound_values() {
        let v = generalization_bound(0.1, 0.05).unwrap();
        assert!((v - 3.0 / 19.0).abs() <= 1e-15);
        assert!((generalization_bound(0.37, 0.0).unwrap() - 0.37).abs() < 1e-15);
        let eps = 0.2;
        assert!((generalization_bound(0.0, eps).unwrap() - eps / (1.0 - eps)).abs() < 1e-15);
        assert!(generalization_bound(0.1, 1.0).is_err());
        assert!(generalization_bound(-0.1, 0.5).is_err());
    }

    #[test]
    fn generalization_bound_is_monotone() {
        let grid: Vec<f64> = (0..20).map(|i| i as f64 * 0.045).collect();
        for &eps in &grid {
            let mut prev = -1.0;
            for &delta in &grid {
                let v = generalization_bound(delta, eps.min(0.95)).unwrap();
                assert!(v >= prev);
                prev = v;
            }
        }
        for &delta in &grid {
            let mut prev = -1.0;
            for &eps in &grid {
                let v = generalization_bound(delta, eps.min(0.95)).unwrap();
                assert!(v >= prev);
                prev = v;
            }
        }
    }

    #[test]
    fn identity_embedding_passes_generalization() {
        let (d, s) = squares_set();
        let e = LearnedEmbedding::identity(d.dim());
        for eps in [0.0, 0.05, 0.3] {
            let report = empirical_generalization(&d, &s, &e, eps, 64, 11).unwrap();
            assert!(report.pass, "eps={eps}: {report:?}");
            assert!(report.max_distortion <= 1e-12);
        }
        assert!(empirical_generalization(&d, &s, &e, 1.0, 8, 1).is_err());
        assert!(empirical_generalization(&d, &s, &e, 0.1, 0, 1).is_err());
    }

    #[test]
    fn generalization_is_deterministic() {
        let (d, s) = squares_set();
        let e = pca_baseline(&d, &s, 8, TraceMode::Auto).unwrap();
        let a = empirical_generalization(&d, &s, &e, 0.05, 100, 11).unwrap();
        let b = empirical_generalization(&d, &s, &e, 0.05, 100, 11).unwrap();
        assert_eq!(a.max_distortion, b.max_distortion);
        assert_eq!(a.pass, b.pass);
    }
}
