//! Data-adaptive sensing matrix design under an explicit energy budget.
//!
//! Given a training corpus, this crate learns a low-rank measurement
//! matrix Φ whose Gram matrix B = ΦᵀΦ is near-isometric on the set of
//! normalized pairwise differences (secants) of the corpus. The learner
//! plays a minimax game: a multiplicative-weights dual climbs onto the
//! worst-violated isometry constraint while rank-1 primal steps descend
//! through an extreme eigenpair of the weighted secant operator.
//! Averaging the rank-1 steps and rescaling onto the trace budget
//! yields a nested family of embeddings: every prefix of the factor
//! sequence is itself a valid, smaller measurement matrix.
//!
//! Evaluation utilities compare the learned matrix against PCA and
//! trace-matched Gaussian baselines on the empirical restricted-
//! isometry constant and on compressed-sensing recovery error.
//!
//! The hot kernels run on rayon when the default `parallel` feature is
//! enabled and fall back to sequential loops otherwise; both paths
//! produce bit-identical results.

pub mod dataset;
pub mod embedding;
pub mod error;
pub mod eval;
pub mod recovery;
pub mod secant;
pub mod solver;

mod linalg;
mod seed;

pub use dataset::{generate_translated_squares, load_dataset, save_dataset, DataSet};
pub use embedding::LearnedEmbedding;
pub use error::{Error, Result};
pub use eval::{
    empirical_generalization, empirical_ric, gaussian_baseline, generalization_bound,
    pca_baseline, GeneralizationReport, RicReport,
};
pub use recovery::{
    add_noise, bpdn_decode, mse_sweep, LambdaRule, NoiseSide, RecoveryConfig, RecoveryReport,
};
pub use secant::{build_secants, OperatorImage, SecantBudget, SecantSet};
pub use solver::{
    approximation_gap, dual_update, game_loss, min_eigenpair, prefix_embedding, primal_step,
    rescale, solve, step_size, theorem_bound, BoundReport, DualWeights, GameConfig, SolveOutput,
    TraceMode,
};
