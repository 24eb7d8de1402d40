//! Pseudo-likelihood community detection for weighted networks.
//!
//! Implements the Gaussian weighted stochastic block model, the
//! pseudo-likelihood EM fit over block sums, spectral and
//! discretization-based initializers, permutation-invariant error metrics,
//! and evaluators for the consistency bounds of the homogeneous model.

pub mod error;
pub mod eval;
pub mod flags;
pub mod init;
pub mod io;
pub mod matrix;
pub mod model;
pub mod pl;
pub mod theory;

pub use error::{Error, Result};
pub use flags::{Flag, Flags};
pub use matrix::Mat;
pub use model::{
    apportion_counts, derive_stream, derive_substream, homogeneous_params, sample_robustness_network,
    sample_wsbm, BlockParams, EdgeDistributionSpec, LabelAssignment, Labeling, WeightedNetwork,
};
pub use pl::{
    block_sums, complete_log_likelihood, confusion_matrix, e_step, estimate_block_params,
    label_update, m_step, mixture_params, pl_fit, pseudo_log_likelihood, variance_floor,
    BlockSums, ConfusionMatrix, FitOptions, FitResult, MixtureParams, Responsibilities,
};
pub use init::{
    db_auto_level, db_init, oracle_init, spectral_init, DbInit, OracleMode, OracleSpec,
    DEFAULT_RESTARTS,
};
pub use eval::{
    align_to_reference, hungarian_match, loss_with_permutation, misclassification_loss,
    mismatch_proportion, overlap_table, OverlapRow,
};
pub use theory::{
    balanced_bounds, binary_entropy, bound_heatmap, kappa, unbalanced_bounds,
    BalancedBoundReport, BoundHeatmap, UnbalancedBoundReport,
};
