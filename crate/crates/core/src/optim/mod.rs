//! Shared numerical engines.
//!
//! Everything downstream of the geometry stages is fitted with one of the
//! engines in this module: damped Gauss–Newton least squares ([`lm_fit`]),
//! polynomial feature maps ([`PolynomialModel`]), small fully-connected
//! networks trained by full-batch SGD ([`mlp_train`]), and inverse-distance
//! KNN regression ([`knn_regress`]). All engines are deterministic given an
//! explicit seed.

mod knn;
mod lm;
mod mlp;
mod model_io;
mod poly;

pub use knn::knn_regress;
pub use lm::{lm_fit, AcceptedStep, LmFit, LmSettings};
pub use mlp::{
    loss_gradients, mlp_loss, mlp_train, MlpDataset, MlpModel, MlpTrainSettings, MlpTrained,
    OutputActivation,
};
pub use model_io::{load_model, model_from_str, model_to_string, save_model, SavedModel};
pub use poly::{
    fit_polynomial_lm, monomial_count, monomial_exponents, poly_features, PolynomialModel,
};

/// Errors produced by the numerical engines.
#[derive(Debug, thiserror::Error)]
pub enum OptimError {
    /// The residual function returned NaN or infinity where a finite value
    /// was required (initial point or Jacobian evaluation).
    #[error("residual function returned a non-finite value")]
    NonFiniteResidual,
    /// An input vector did not match the model's expected dimension.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },
    /// A training set with zero samples was supplied.
    #[error("empty dataset")]
    EmptyDataset,
    /// Every training restart diverged to a non-finite loss.
    #[error("training loss became non-finite in every restart")]
    NonFiniteLoss,
    /// Fewer samples than the operation needs.
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    /// A serialized model could not be parsed.
    #[error("model format: {0}")]
    ModelFormat(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
