//! Gaussian-process covariance estimation by leave-one-out cross-validation.
//!
//! Leave-one-out predictive moments come in closed form from `(K + σ_ε² I)⁻¹`,
//! any scoring rule of those moments is a criterion, and [`adjoint`] gives its
//! gradient at the cost of a couple of matrix products.

pub mod adjoint;
pub mod alloc_audit;
pub mod cli;
pub mod error;
pub mod estimator;
pub mod experiment;
pub mod kernels;
pub mod likelihood;
mod linalg;
pub mod loo;
pub mod optimize;
pub mod oracles;
pub mod rng;
pub mod scoring;

pub use adjoint::{adjoint_loo, criterion_with_gradient, naive_gradient, AdjointSeed, CovarianceAdjoint};
pub use error::{GpError, Result};
pub use estimator::{estimate, Criterion, EstimatorConfig, FitResult};
pub use kernels::{build_covariance, contract_gradient, kernel_eval, param_derivative, KernelFamily, KernelParams};
pub use likelihood::{lml_gradient, log_marginal_likelihood};
pub use loo::{loo_moments, precompute, Dataset, LooMoments, LooWorkspace};
pub use scoring::{criterion, score_point, score_point_grad, ScoreGradient, ScoringRule};
