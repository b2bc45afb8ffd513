//! Minimax learning loop: rank-1 primal steps against a multiplicative-
//! weights dual on the isometry constraints.
//!
//! The primal player holds a PSD matrix B of trace at most one and pays
//! the bilinear loss L(N, B) = ⟨N, A₊(B) − f⟩, where A₊ stacks the
//! secant operator with its negation and f stacks the target ±1. The
//! maximizing dual N lives on the 2M-simplex, so max_N L(N, B) equals
//! the worst isometry violation ‖A(B) − 1‖∞. Each round the primal best
//! response over the PSD trace ball is an extreme eigenpair of the
//! weighted secant operator A₊*(N): a rank-1 step u uᵀ when the minimum
//! eigenvalue is negative, or the zero matrix (loss 0) when A₊*(N) is
//! already PSD. The dual then exponentially reweights each constraint
//! by its realized loss. The average of the primal steps, rescaled onto
//! the trace budget, is the learned embedding; every prefix of the
//! factor sequence is itself a valid smaller embedding.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::embedding::LearnedEmbedding;
use crate::error::{Error, Result};
use crate::linalg::{canonicalize_sign, dot, norm2, normalize};
use crate::secant::{OperatorImage, SecantSet};
use crate::seed;

/// Primal steps whose minimum eigenvalue is above this threshold return
/// the zero matrix, which attains the best possible loss of 0 over the
/// PSD trace ball.
const ZERO_STEP_TOL: f64 = 1e-10;

const EIG_STREAM: u64 = 1;

/// A point on the 2M-simplex driving the multiplicative update.
#[derive(Debug, Clone, PartialEq)]
pub struct DualWeights {
    w: Vec<f64>,
}

impl DualWeights {
    /// Uniform weights `1/(2M)` over the stacked constraints.
    pub fn uniform(m: usize) -> Self {
        assert!(m > 0, "need at least one secant");
        Self {
            w: vec![0.5 / m as f64; 2 * m],
        }
    }

    /// Validates nonnegativity, an even length and a unit sum (within
    /// 1e-9).
    pub fn new(w: Vec<f64>) -> Result<Self> {
        if w.is_empty() || w.len() % 2 != 0 {
            return Err(Error::InvalidArgument(format!(
                "dual weights need a positive even length, got {}",
                w.len()
            )));
        }
        if w.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(Error::InvalidArgument(
                "dual weights must be finite and nonnegative".into(),
            ));
        }
        let sum: f64 = w.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "dual weights sum to {sum}, expected 1"
            )));
        }
        Ok(Self { w })
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.w
    }

    pub fn sum_error(&self) -> f64 {
        (self.w.iter().sum::<f64>() - 1.0).abs()
    }

    pub fn min(&self) -> f64 {
        self.w.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Trace handling for the final rescale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TraceMode {
    /// Pick the scale minimizing `‖s·A(B) − 1‖∞`.
    Auto,
    /// Scale so that `trace(B)` equals the given budget.
    Fixed(f64),
}

#[derive(Debug, Clone)]
pub struct GameConfig {
    /// Iteration count and rank budget r.
    pub rank: usize,
    pub trace_mode: TraceMode,
    /// Relative eigenpair residual tolerance.
    pub eig_tol: f64,
    /// Power-iteration budget per primal step.
    pub eig_max_iter: usize,
    pub seed: u64,
    /// Overrides the closed-form step size when set.
    pub eta_override: Option<f64>,
}

impl GameConfig {
    pub fn new(rank: usize) -> Self {
        Self {
            rank,
            trace_mode: TraceMode::Auto,
            eig_tol: 1e-9,
            eig_max_iter: 5000,
            seed: 0,
            eta_override: None,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.rank == 0 {
            return Err(Error::InvalidArgument("rank budget must be positive".into()));
        }
        if !(self.eig_tol > 0.0 && self.eig_tol.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "eig_tol must be positive, got {}",
                self.eig_tol
            )));
        }
        if self.eig_max_iter == 0 {
            return Err(Error::InvalidArgument("eig_max_iter must be positive".into()));
        }
        if let TraceMode::Fixed(b) = self.trace_mode {
            if !(b > 0.0 && b.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "fixed trace budget must be positive, got {b}"
                )));
            }
        }
        if let Some(eta) = self.eta_override {
            if !(eta > 0.0 && eta.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "eta override must be positive, got {eta}"
                )));
            }
        }
        Ok(())
    }
}

/// Closed-form constants attached to a solve.
#[derive(Debug, Clone, serde::Serialize)]
pub struct BoundReport {
    /// Multiplicative step size η.
    pub eta: f64,
    /// Worst-case per-round loss magnitude.
    pub loss_max: f64,
    /// Additive optimality gap after r rounds.
    pub gap: f64,
    /// Residual bound evaluated at `error_inf` and the realized
    /// `‖A(B)‖∞`.
    pub theorem_rhs: f64,
    /// Assumed model perturbation; zero unless supplied separately.
    pub error_inf: f64,
}

/// Per-iteration diagnostics recorded by [`solve`].
#[derive(Debug, Clone, serde::Serialize)]
pub struct IterationStat {
    pub step: usize,
    /// Minimum eigenvalue of the weighted secant operator (0 for a zero
    /// step).
    pub lambda_min: f64,
    /// Best-scale isometry residual of the running factor average.
    pub delta_running: f64,
    pub weight_sum_error: f64,
    pub weight_min: f64,
    pub eig_iterations: usize,
}

#[derive(Debug, Clone)]
pub struct SolveOutput {
    pub embedding: LearnedEmbedding,
    pub bounds: BoundReport,
    pub iterations: Vec<IterationStat>,
}

/// Result of one primal best response.
#[derive(Debug, Clone)]
pub struct PrimalStep {
    /// Unit direction of the rank-1 step, or `None` for the zero step.
    pub factor: Option<Vec<f64>>,
    pub lambda_min: f64,
    pub eig_iterations: usize,
}

/// An approximate extreme eigenpair.
#[derive(Debug, Clone)]
pub struct Eigenpair {
    pub value: f64,
    pub vector: Vec<f64>,
    pub iterations: usize,
}

/// Multiplicative step size `η = ln(1 + √(2 ln(2M) / r))`.
pub fn step_size(m: usize, r: usize) -> f64 {
    assert!(m >= 1 && r >= 1);
    (2.0 * ((2 * m) as f64).ln() / r as f64).sqrt().ln_1p()
}

/// Worst-case loss magnitude `1 + max_l max_i v_{l,i}²`; in (1, 2] for
/// unit columns.
pub fn loss_max(secants: &SecantSet) -> f64 {
    let mut max_sq = 0.0_f64;
    for l in 0..secants.len() {
        for x in secants.column(l) {
            max_sq = max_sq.max(x * x);
        }
    }
    1.0 + max_sq
}

/// Additive optimality gap `2(1+√2)√(ln(2M)/r)` of the r-round game.
pub fn approximation_gap(m: usize, r: usize) -> f64 {
    assert!(m >= 1 && r >= 1);
    2.0 * (1.0 + 2.0_f64.sqrt()) * (((2 * m) as f64).ln() / r as f64).sqrt()
}

/// Residual bound `e + (1+√2)(2a + e)√(ln(2M)/r)` for a model
/// perturbation `‖e‖∞ = error_inf` and realized image sup-norm `a`.
pub fn theorem_bound(error_inf: f64, operator_image_inf: f64, m: usize, r: usize) -> f64 {
    assert!(m >= 1 && r >= 1);
    assert!(error_inf >= 0.0 && operator_image_inf >= 0.0);
    let root = (((2 * m) as f64).ln() / r as f64).sqrt();
    error_inf + (1.0 + 2.0_f64.sqrt()) * (2.0 * operator_image_inf + error_inf) * root
}

/// Minimum eigenpair of a symmetric action with spectrum in [−1, 1].
///
/// Runs a plain Lanczos iteration (no restarts) from a seeded random
/// start with full reorthogonalization, checking the smallest Ritz pair
/// as the basis grows. Once the basis spans `min(n, max_iter)`
/// directions the Ritz pairs are exact up to rounding, so clustered
/// spectra cannot stall the iteration the way a single-vector power
/// method stalls. Convergence requires the true residual
/// `‖S u − λ u‖ ≤ tol · max(1, |λ|)`, which for a symmetric operator
/// also bounds the eigenvalue error by `tol`. `max_iter` counts
/// operator applications; confirming a candidate costs one extra
/// application beyond the budget. On failure the best iterate examined
/// is returned inside the error.
pub fn min_eigenpair<F>(
    apply: F,
    n: usize,
    tol: f64,
    max_iter: usize,
    seed: u64,
) -> Result<Eigenpair>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    assert!(n > 0 && max_iter > 0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut random_unit = |against: &[Vec<f64>]| -> Option<Vec<f64>> {
        for _ in 0..64 {
            let mut cand: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
            orthogonalize(&mut cand, against);
            if normalize(&mut cand) > 1e-6 {
                return Some(cand);
            }
        }
        None
    };

    let mut basis: Vec<Vec<f64>> = vec![random_unit(&[]).expect("fresh start vector")];
    let mut diag: Vec<f64> = Vec::new(); // tridiagonal main diagonal
    let mut offdiag: Vec<f64> = Vec::new(); // couplings, one per transition
    let mut best: Option<(f64, f64, Vec<f64>)> = None; // (residual, value, vector)
    let mut matvecs = 0usize;

    while matvecs < max_iter {
        let k = basis.len();
        let mut w = apply(&basis[k - 1]);
        debug_assert_eq!(w.len(), n);
        matvecs += 1;
        let alpha = dot(&w, &basis[k - 1]);
        diag.push(alpha);
        // full reorthogonalization, two passes
        orthogonalize(&mut w, &basis);
        orthogonalize(&mut w, &basis);
        let beta = norm2(&w);

        let exhausted = k == n || matvecs == max_iter;
        let check_now = exhausted || beta <= 1e-12 || k < 16 || k % 4 == 0;
        if check_now {
            let (theta, ritz) = smallest_ritz_pair(&diag, &offdiag, &basis);
            let su = apply(&ritz);
            matvecs += 1;
            let mut residual = 0.0;
            for (si, ui) in su.iter().zip(&ritz) {
                let d = si - theta * ui;
                residual += d * d;
            }
            let residual = residual.sqrt();
            if best.as_ref().map_or(true, |(r, _, _)| residual < *r) {
                best = Some((residual, theta, ritz.clone()));
            }
            if residual <= tol * 1.0_f64.max(theta.abs()) {
                let mut vector = ritz;
                canonicalize_sign(&mut vector);
                return Ok(Eigenpair {
                    value: theta,
                    vector,
                    iterations: matvecs,
                });
            }
        }
        if exhausted {
            break;
        }
        if beta <= 1e-12 {
            // invariant subspace; continue in a fresh direction with
            // zero coupling
            match random_unit(&basis) {
                Some(fresh) => {
                    offdiag.push(0.0);
                    basis.push(fresh);
                }
                None => break,
            }
        } else {
            for x in w.iter_mut() {
                *x /= beta;
            }
            offdiag.push(beta);
            basis.push(w);
        }
    }

    let (residual, best_value, mut best_vector) = best.expect("at least one Ritz check ran");
    canonicalize_sign(&mut best_vector);
    Err(Error::NoConvergence {
        iterations: matvecs,
        residual,
        best_value,
        best_vector,
    })
}

fn orthogonalize(w: &mut [f64], basis: &[Vec<f64>]) {
    for q in basis {
        let c = dot(w, q);
        if c != 0.0 {
            for (wi, qi) in w.iter_mut().zip(q) {
                *wi -= c * qi;
            }
        }
    }
}

/// Smallest eigenpair of the accumulated tridiagonal matrix, assembled
/// back into the ambient space.
fn smallest_ritz_pair(diag: &[f64], offdiag: &[f64], basis: &[Vec<f64>]) -> (f64, Vec<f64>) {
    let k = diag.len();
    debug_assert_eq!(basis.len(), k);
    let mut t = nalgebra::DMatrix::<f64>::zeros(k, k);
    for (i, a) in diag.iter().enumerate() {
        t[(i, i)] = *a;
    }
    for (i, b) in offdiag.iter().enumerate() {
        t[(i, i + 1)] = *b;
        t[(i + 1, i)] = *b;
    }
    let eig = t.symmetric_eigen();
    let mut arg = 0;
    for i in 1..k {
        if eig.eigenvalues[i] < eig.eigenvalues[arg] {
            arg = i;
        }
    }
    let coeffs = eig.eigenvectors.column(arg);
    let n = basis[0].len();
    let mut u = vec![0.0; n];
    for (q, c) in basis.iter().zip(coeffs.iter()) {
        if *c != 0.0 {
            for (ui, qi) in u.iter_mut().zip(q) {
                *ui += c * qi;
            }
        }
    }
    normalize(&mut u);
    (eig.eigenvalues[arg], u)
}

/// Primal best response over the PSD trace ball: the minimizing unit
/// eigenvector of `A₊*(N)` as a rank-1 factor when its eigenvalue is
/// negative, `None` otherwise.
pub fn primal_step(
    secants: &SecantSet,
    weights: &DualWeights,
    eig_tol: f64,
    eig_max_iter: usize,
    seed: u64,
) -> Result<PrimalStep> {
    if weights.len() != 2 * secants.len() {
        return Err(Error::DimensionMismatch {
            expected: 2 * secants.len(),
            got: weights.len(),
        });
    }
    let action = secants.plus_adjoint(weights.as_slice())?;
    let pair = min_eigenpair(
        |x| action.apply(x).expect("dimension fixed"),
        secants.dim(),
        eig_tol,
        eig_max_iter,
        seed,
    )?;
    if pair.value < -ZERO_STEP_TOL {
        Ok(PrimalStep {
            factor: Some(pair.vector),
            lambda_min: pair.value,
            eig_iterations: pair.iterations,
        })
    } else {
        Ok(PrimalStep {
            factor: None,
            lambda_min: pair.value.min(0.0),
            eig_iterations: pair.iterations,
        })
    }
}

/// Bilinear payoff `⟨N, A₊(B) − f⟩` given the image `a = A(B)` and the
/// target `y`. Its maximum over the simplex is `‖a − y‖∞`.
pub fn game_loss(
    weights: &DualWeights,
    image: &OperatorImage,
    target: &OperatorImage,
) -> Result<f64> {
    let m = image.len();
    if weights.len() != 2 * m {
        return Err(Error::DimensionMismatch {
            expected: 2 * m,
            got: weights.len(),
        });
    }
    if target.len() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            got: target.len(),
        });
    }
    let (pos, neg) = weights.as_slice().split_at(m);
    let mut acc = 0.0;
    for l in 0..m {
        let diff = image.values[l] - target.values[l];
        acc += pos[l] * diff - neg[l] * diff;
    }
    Ok(acc)
}

/// Multiplicative update `Q_j = N_j · exp(η ℓ_j / L_max)`, renormalized.
///
/// Computed in log space with max subtraction so large `η ℓ` products
/// cannot underflow the whole weight vector.
pub fn dual_update(
    weights: &DualWeights,
    losses: &[f64],
    eta: f64,
    loss_max: f64,
) -> Result<DualWeights> {
    if losses.len() != weights.len() {
        return Err(Error::DimensionMismatch {
            expected: weights.len(),
            got: losses.len(),
        });
    }
    if losses.iter().any(|l| !l.is_finite()) {
        return Err(Error::NonFinite("per-constraint losses"));
    }
    if !(loss_max > 0.0 && loss_max.is_finite()) || !(eta >= 0.0 && eta.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "dual update needs eta >= 0 and loss_max > 0, got eta={eta}, loss_max={loss_max}"
        )));
    }
    debug_assert!(
        losses.iter().all(|l| l.abs() <= loss_max * (1.0 + 1e-12)),
        "loss exceeds loss_max"
    );

    let logs: Vec<f64> = weights
        .as_slice()
        .iter()
        .zip(losses)
        .map(|(w, l)| w.ln() + eta * l / loss_max)
        .collect();
    let peak = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    debug_assert!(peak.is_finite(), "all weights vanished");
    let mut next: Vec<f64> = logs.iter().map(|g| (g - peak).exp()).collect();
    let sum: f64 = next.iter().sum();
    for w in next.iter_mut() {
        *w /= sum;
    }
    let out = DualWeights { w: next };
    debug_assert!(out.sum_error() <= 1e-9 && out.min() >= 0.0);
    Ok(out)
}

/// Best uniform scale for an image with nonnegative entries: the unique
/// minimizer of `‖s·a − 1‖∞` is `2 / (max + min)`. `None` when the
/// image is identically zero.
pub(crate) fn auto_scale(values: &[f64]) -> Option<f64> {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    if max + min > 0.0 {
        Some(2.0 / (max + min))
    } else {
        None
    }
}

fn auto_residual(values: &[f64]) -> f64 {
    match auto_scale(values) {
        Some(s) => values
            .iter()
            .map(|a| (s * a - 1.0).abs())
            .fold(0.0, f64::max),
        None => 1.0,
    }
}

/// Rescales an embedding onto the requested trace mode. Factor
/// directions are never touched, only the global scale.
pub fn rescale(
    embedding: &LearnedEmbedding,
    secants: &SecantSet,
    mode: TraceMode,
) -> Result<LearnedEmbedding> {
    if embedding.rank_used() == 0 {
        return Err(Error::DegenerateEmbedding);
    }
    match mode {
        TraceMode::Fixed(b) => {
            if !(b > 0.0 && b.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "fixed trace budget must be positive, got {b}"
                )));
            }
            let current = embedding.trace();
            embedding.with_scale(embedding.scale() * b / current)
        }
        TraceMode::Auto => {
            let image = embedding.operator_image(secants)?;
            let s = auto_scale(&image.values).ok_or(Error::DegenerateEmbedding)?;
            embedding.with_scale(embedding.scale() * s)
        }
    }
}

/// The first `m ≤ r` factor slots as a fresh embedding, averaged over
/// `m` and auto-rescaled. The original is untouched.
pub fn prefix_embedding(
    embedding: &LearnedEmbedding,
    secants: &SecantSet,
    m: usize,
) -> Result<LearnedEmbedding> {
    let prefix = embedding.prefix_unscaled(m)?;
    rescale(&prefix, secants, TraceMode::Auto)
}

/// Runs the full game for `cfg.rank` rounds and returns the rescaled
/// embedding, the closed-form bound constants and per-round
/// diagnostics.
pub fn solve(secants: &SecantSet, cfg: &GameConfig) -> Result<SolveOutput> {
    cfg.validate()?;
    let m = secants.len();
    let r = cfg.rank;
    let eta = match cfg.eta_override {
        Some(v) => v,
        None => step_size(m, r),
    };
    let lmax = loss_max(secants);

    let mut weights = DualWeights::uniform(m);
    let mut factors: Vec<Option<Vec<f64>>> = Vec::with_capacity(r);
    let mut stats: Vec<IterationStat> = Vec::with_capacity(r);
    let mut running_image = vec![0.0; m];

    for t in 1..=r {
        let step = primal_step(
            secants,
            &weights,
            cfg.eig_tol,
            cfg.eig_max_iter,
            seed::derive(cfg.seed, EIG_STREAM, t as u64),
        )?;

        // image of this round's step: (Vᵀu)² or zero
        let image_t: Vec<f64> = match &step.factor {
            Some(u) => secants.projections(u).iter().map(|p| p * p).collect(),
            None => vec![0.0; m],
        };

        // payoff of every stacked constraint against this step
        let mut losses = Vec::with_capacity(2 * m);
        losses.extend(image_t.iter().map(|a| a - 1.0));
        losses.extend(image_t.iter().map(|a| 1.0 - a));
        weights = dual_update(&weights, &losses, eta, lmax)?;

        for (acc, a) in running_image.iter_mut().zip(&image_t) {
            *acc += (a - *acc) / t as f64;
        }
        stats.push(IterationStat {
            step: t,
            lambda_min: step.lambda_min,
            delta_running: auto_residual(&running_image),
            weight_sum_error: weights.sum_error(),
            weight_min: weights.min(),
            eig_iterations: step.eig_iterations,
        });
        factors.push(step.factor);
    }

    let unscaled = LearnedEmbedding::new(secants.dim(), factors, 1.0)?;
    let embedding = rescale(&unscaled, secants, cfg.trace_mode)?;

    let image = embedding.operator_image(secants)?;
    let error_inf = 0.0;
    let bounds = BoundReport {
        eta,
        loss_max: lmax,
        gap: approximation_gap(m, r),
        theorem_rhs: theorem_bound(error_inf, image.sup_norm(), m, r),
        error_inf,
    };
    Ok(SolveOutput {
        embedding,
        bounds,
        iterations: stats,
    })
}
