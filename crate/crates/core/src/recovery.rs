//! Compressed-sensing recovery sweep: encode noisy training signals,
//! decode by ℓ₁-regularized least squares, report MSE against SNR.
//!
//! The decoder minimizes ½‖y − Φz‖² + λ‖z‖₁ with a monotone accelerated
//! proximal-gradient iteration; the sparsity basis is the identity. The
//! sweep corrupts each selected signal once per SNR level (shared across
//! candidate matrices) and averages ‖x − ẑ‖²/n over the subset.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::dataset::DataSet;
use crate::embedding::LearnedEmbedding;
use crate::error::{Error, Result};
use crate::linalg::{dot, norm2, normalize};
use crate::seed;

const SUBSET_STREAM: u64 = 2;
const NOISE_STREAM: u64 = 3;

/// Noise is attached to the signals before encoding by default; the
/// measurement side is available for comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseSide {
    Signal,
    Measurement,
}

/// Regularization selection per decode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LambdaRule {
    /// `λ = c · ‖Φᵀy‖∞`
    ScaledSupNorm(f64),
    Fixed(f64),
}

#[derive(Debug, Clone)]
pub struct RecoveryConfig {
    pub snr_grid_db: Vec<f64>,
    pub subset_size: usize,
    pub lambda_rule: LambdaRule,
    pub max_iter: usize,
    pub tol: f64,
    pub seed: u64,
    pub noise_side: NoiseSide,
}

impl RecoveryConfig {
    pub fn new(seed: u64) -> Self {
        Self {
            snr_grid_db: (1..=8).map(|k| 5.0 * k as f64).collect(),
            subset_size: 50,
            lambda_rule: LambdaRule::ScaledSupNorm(0.1),
            max_iter: 1500,
            tol: 1e-9,
            seed,
            noise_side: NoiseSide::Signal,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.snr_grid_db.is_empty() || self.snr_grid_db.iter().any(|s| !s.is_finite()) {
            return Err(Error::InvalidArgument("snr grid must be nonempty and finite".into()));
        }
        if self.subset_size == 0 {
            return Err(Error::InvalidArgument("subset size must be positive".into()));
        }
        if self.max_iter == 0 || !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(Error::InvalidArgument(
                "decoder needs max_iter >= 1 and a positive tolerance".into(),
            ));
        }
        let lambda_ok = match self.lambda_rule {
            LambdaRule::ScaledSupNorm(c) => c >= 0.0 && c.is_finite(),
            LambdaRule::Fixed(v) => v >= 0.0 && v.is_finite(),
        };
        if !lambda_ok {
            return Err(Error::InvalidArgument("lambda rule needs a nonnegative value".into()));
        }
        Ok(())
    }
}

/// One `(snr, matrix)` cell of the sweep.
#[derive(Debug, Clone, serde::Serialize)]
pub struct SweepRow {
    pub snr_db: f64,
    pub label: String,
    pub mean_mse: f64,
    /// Per-signal MSEs in subset order.
    pub mses: Vec<f64>,
    /// Decodes that hit the iteration cap.
    pub unconverged: usize,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct RecoveryReport {
    pub rows: Vec<SweepRow>,
}

/// Adds i.i.d. Gaussian noise scaled so the expected noise energy
/// matches the requested SNR: `E‖w‖² = ‖x‖² · 10^(−snr/10)`. SNR values
/// above 300 dB are clamped.
pub fn add_noise(x: &[f64], snr_db: f64, noise_seed: u64) -> Result<Vec<f64>> {
    let energy = dot(x, x);
    if energy == 0.0 {
        return Err(Error::InvalidArgument("cannot attach noise to a zero signal".into()));
    }
    if !snr_db.is_finite() && snr_db < 0.0 {
        return Err(Error::InvalidArgument("snr must not be -inf".into()));
    }
    let snr = snr_db.min(300.0);
    let sigma = (energy * 10f64.powf(-snr / 10.0) / x.len() as f64).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(noise_seed);
    Ok(x.iter()
        .map(|xi| xi + sigma * rng.sample::<f64, _>(StandardNormal))
        .collect())
}

/// Result of one ℓ₁ decode.
#[derive(Debug, Clone)]
pub struct DecodeOutcome {
    pub estimate: Vec<f64>,
    pub iterations: usize,
    /// False when the iteration cap was hit before the objective
    /// stalled.
    pub converged: bool,
    pub objective: f64,
}

fn matvec(phi: &[Vec<f64>], z: &[f64]) -> Vec<f64> {
    phi.iter().map(|row| dot(row, z)).collect()
}

fn rmatvec(phi: &[Vec<f64>], r: &[f64], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n];
    for (row, &ri) in phi.iter().zip(r) {
        if ri != 0.0 {
            for (o, &a) in out.iter_mut().zip(row) {
                *o += ri * a;
            }
        }
    }
    out
}

fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// Top eigenvalue of `ΦᵀΦ` by power iteration, used as the gradient
/// Lipschitz constant.
fn lipschitz(phi: &[Vec<f64>], n: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(0x9e37_79b9);
    let mut v: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    if normalize(&mut v) == 0.0 {
        return 0.0;
    }
    let mut lip = 0.0;
    for _ in 0..200 {
        let w = rmatvec(phi, &matvec(phi, &v), n);
        let norm = norm2(&w);
        if norm == 0.0 {
            return 0.0;
        }
        if (norm - lip).abs() <= 1e-12 * norm.max(1.0) {
            return norm;
        }
        lip = norm;
        v = w;
        for x in v.iter_mut() {
            *x /= norm;
        }
    }
    lip
}

/// Approximate minimizer of `½‖y − Φz‖² + λ‖z‖₁`.
///
/// Monotone accelerated proximal gradient with step `1/L`; stops when
/// the relative objective decrease falls below `tol`. Hitting the
/// iteration cap flags the outcome instead of failing.
pub fn bpdn_decode(
    phi: &[Vec<f64>],
    y: &[f64],
    lambda: f64,
    max_iter: usize,
    tol: f64,
) -> Result<DecodeOutcome> {
    if phi.is_empty() {
        return Err(Error::InvalidArgument("decoder needs at least one measurement row".into()));
    }
    let n = phi[0].len();
    if n == 0 || phi.iter().any(|row| row.len() != n) {
        return Err(Error::InvalidArgument("measurement rows must share a positive width".into()));
    }
    if y.len() != phi.len() {
        return Err(Error::DimensionMismatch {
            expected: phi.len(),
            got: y.len(),
        });
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "lambda must be nonnegative, got {lambda}"
        )));
    }
    if max_iter == 0 || !(tol > 0.0 && tol.is_finite()) {
        return Err(Error::InvalidArgument(
            "decoder needs max_iter >= 1 and a positive tolerance".into(),
        ));
    }

    let objective = |z: &[f64], phi_z: &[f64]| -> f64 {
        let fit: f64 = y
            .iter()
            .zip(phi_z)
            .map(|(yi, pi)| (yi - pi) * (yi - pi))
            .sum();
        0.5 * fit + lambda * z.iter().map(|v| v.abs()).sum::<f64>()
    };

    let lip = lipschitz(phi, n);
    if lip == 0.0 {
        // zero operator: the fit term is constant and the penalty picks 0
        let zeros = vec![0.0; n];
        let obj = objective(&zeros, &vec![0.0; phi.len()]);
        return Ok(DecodeOutcome {
            estimate: zeros,
            iterations: 0,
            converged: true,
            objective: obj,
        });
    }
    // the power iteration approaches the top eigenvalue from below
    let step = 1.0 / (lip * 1.02);

    let mut x = vec![0.0; n];
    let mut yk = x.clone();
    let mut t = 1.0_f64;
    let mut obj_x = objective(&x, &vec![0.0; phi.len()]);
    let mut sampled_obj = f64::INFINITY;
    let mut converged = false;
    let mut iterations = 0;
    let mut at_rest = true; // yk == x with no momentum in flight

    for k in 1..=max_iter {
        iterations = k;
        let phi_y = matvec(phi, &yk);
        let residual: Vec<f64> = phi_y.iter().zip(y).map(|(p, yi)| p - yi).collect();
        let grad = rmatvec(phi, &residual, n);
        let z: Vec<f64> = yk
            .iter()
            .zip(&grad)
            .map(|(yi, gi)| soft_threshold(yi - step * gi, step * lambda))
            .collect();
        let phi_z = matvec(phi, &z);
        let obj_z = objective(&z, &phi_z);

        if obj_z > obj_x {
            // the extrapolated candidate overshot; a plain proximal step
            // from the current point that still fails to improve means
            // we sit at the fixed point
            if at_rest {
                converged = true;
                break;
            }
            t = 1.0;
            yk = x.clone();
            at_rest = true;
            continue;
        }

        let decrease = obj_x - obj_z;
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let mut y_next = vec![0.0; n];
        for i in 0..n {
            y_next[i] = z[i] + ((t - 1.0) / t_next) * (z[i] - x[i]);
        }
        x = z;
        obj_x = obj_z;
        yk = y_next;
        t = t_next;
        at_rest = false;

        if k % 10 == 0 {
            debug_assert!(
                obj_x <= sampled_obj + 1e-9 * sampled_obj.abs().max(1.0),
                "objective increased: {obj_x} > {sampled_obj}"
            );
            sampled_obj = obj_x;
        }
        if decrease < tol * obj_x.abs().max(1.0) {
            converged = true;
            break;
        }
    }

    Ok(DecodeOutcome {
        estimate: x,
        iterations,
        converged,
        objective: obj_x,
    })
}

fn lambda_for(rule: LambdaRule, phi: &[Vec<f64>], y: &[f64], n: usize) -> f64 {
    match rule {
        LambdaRule::Fixed(v) => v,
        LambdaRule::ScaledSupNorm(c) => {
            let corr = rmatvec(phi, y, n);
            c * corr.iter().map(|v| v.abs()).fold(0.0, f64::max)
        }
    }
}

/// Runs the full sweep: for every SNR level and candidate matrix,
/// corrupt the selected signals, encode, decode and record `‖x − ẑ‖²/n`
/// against the clean signal.
///
/// Signal-side noise draws depend only on the run seed, the SNR level
/// and the signal's dataset index, so every matrix sees the same
/// corrupted signals and results do not depend on scheduling.
pub fn mse_sweep(
    data: &DataSet,
    embeddings: &[(String, &LearnedEmbedding)],
    cfg: &RecoveryConfig,
) -> Result<RecoveryReport> {
    cfg.validate()?;
    if embeddings.is_empty() {
        return Err(Error::InvalidArgument("need at least one matrix to sweep".into()));
    }
    for (i, (label, emb)) in embeddings.iter().enumerate() {
        if embeddings[..i].iter().any(|(other, _)| other == label) {
            return Err(Error::DuplicateLabel(label.clone()));
        }
        if emb.dim() != data.dim() {
            return Err(Error::DimensionMismatch {
                expected: data.dim(),
                got: emb.dim(),
            });
        }
    }
    if cfg.subset_size > data.len() {
        return Err(Error::InvalidArgument(format!(
            "subset size {} exceeds dataset size {}",
            cfg.subset_size,
            data.len()
        )));
    }

    let mut subset: Vec<usize> = {
        let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(cfg.seed, SUBSET_STREAM, 0));
        rand::seq::index::sample(&mut rng, data.len(), cfg.subset_size).into_vec()
    };
    subset.sort_unstable();

    let phis: Vec<Vec<Vec<f64>>> = embeddings.iter().map(|(_, e)| e.phi_rows()).collect();
    let n = data.dim();

    struct Task {
        snr_idx: usize,
        emb_idx: usize,
        subset_pos: usize,
    }
    let mut task_list = Vec::with_capacity(cfg.snr_grid_db.len() * embeddings.len() * subset.len());
    for snr_idx in 0..cfg.snr_grid_db.len() {
        for emb_idx in 0..embeddings.len() {
            for subset_pos in 0..subset.len() {
                task_list.push(Task {
                    snr_idx,
                    emb_idx,
                    subset_pos,
                });
            }
        }
    }

    let run_task = |task: &Task| -> Result<(f64, bool)> {
        let snr = cfg.snr_grid_db[task.snr_idx];
        let ds_index = subset[task.subset_pos];
        let x = data.point(ds_index);
        let phi = &phis[task.emb_idx];
        let noise_key = (task.snr_idx as u64) << 32 | ds_index as u64;
        let y = match cfg.noise_side {
            NoiseSide::Signal => {
                let noisy = add_noise(x, snr, seed::derive(cfg.seed, NOISE_STREAM, noise_key))?;
                matvec(phi, &noisy)
            }
            NoiseSide::Measurement => {
                // measurement dimensions differ per matrix, so the draw
                // includes the matrix index
                let clean = matvec(phi, x);
                let key = seed::derive(cfg.seed, NOISE_STREAM, noise_key ^ ((task.emb_idx as u64) << 56));
                add_noise(&clean, snr, key)?
            }
        };
        let lambda = lambda_for(cfg.lambda_rule, phi, &y, n);
        let decode = bpdn_decode(phi, &y, lambda, cfg.max_iter, cfg.tol)?;
        let mse: f64 = x
            .iter()
            .zip(&decode.estimate)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            / n as f64;
        Ok((mse, decode.converged))
    };

    #[cfg(feature = "parallel")]
    let outcomes: Vec<Result<(f64, bool)>> = task_list.par_iter().map(run_task).collect();
    #[cfg(not(feature = "parallel"))]
    let outcomes: Vec<Result<(f64, bool)>> = task_list.iter().map(run_task).collect();

    let mut rows = Vec::with_capacity(cfg.snr_grid_db.len() * embeddings.len());
    let per_cell = subset.len();
    for snr_idx in 0..cfg.snr_grid_db.len() {
        for emb_idx in 0..embeddings.len() {
            let base = (snr_idx * embeddings.len() + emb_idx) * per_cell;
            let mut mses = Vec::with_capacity(per_cell);
            let mut unconverged = 0;
            for outcome in &outcomes[base..base + per_cell] {
                match outcome {
                    Ok((mse, converged)) => {
                        mses.push(*mse);
                        if !converged {
                            unconverged += 1;
                        }
                    }
                    Err(e) => {
                        return Err(Error::InvalidArgument(format!(
                            "sweep task failed: {e}"
                        )))
                    }
                }
            }
            let mean_mse = mses.iter().sum::<f64>() / per_cell as f64;
            rows.push(SweepRow {
                snr_db: cfg.snr_grid_db[snr_idx],
                label: embeddings[emb_idx].0.clone(),
                mean_mse,
                mses,
                unconverged,
            });
        }
    }
    Ok(RecoveryReport { rows })
}
