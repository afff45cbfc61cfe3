//! Group-Lasso quantile regression.
//!
//! The crate fits the penalized check-loss estimator
//!
//! ```text
//! (1/n) Σ ρ_τ(y_i − x_i'β) + (λ/n) Σ_{k≥2} w_k ‖Σ̂_k^{1/2} β_{G_k}‖₂,   w_k = √p_k
//! ```
//!
//! with an ADMM splitting solver whose iterates are certified by an explicit
//! second-order-cone dual, picks λ from the conditional quantile of a pivotal
//! score statistic, estimates sparse additive quantile models on centered
//! spline or Fourier bases, and ships the data generators used to benchmark
//! all of that.
//!
//! Module map:
//!
//! - [`design`]: group partitions, grouped designs, Gram square roots.
//! - [`objective`]: check loss, group penalty, proximal maps, Knight's identity.
//! - [`solver`]: ADMM fit, dual certificate, `λ_max`, SOCP assembly.
//! - [`tuning`]: pivotal simulation of λ.
//! - [`additive`]: basis construction, design expansion, additive fits.
//! - [`sim`]: Model 1 / Model 2 generators, metrics, experiment driver.
//! - [`diagnostics`]: heuristic restricted eigenvalues, Ω₀ check, λ_A.
//! - [`io`]: CSV and sidecar parsing used by the `gqr` binary.

// `!(x > 0.0)` is deliberate: NaN must fail validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod additive;
pub mod design;
pub mod diagnostics;
pub mod error;
pub mod io;
pub mod objective;
pub mod sim;
pub mod solver;
pub mod tuning;

pub use additive::{
    build_basis, expand_design, fit_additive, fit_additive_at, l2_error, predict_g, AdditiveModel, BasisFamily,
    BasisSpec, OutOfDomain,
};
pub use design::{rescale_to_identity, sqrt_psd, GroupPartition, GroupedDesign, PsdSqrt, Rescaling};
pub use error::{GqrError, Result};
pub use objective::{
    check_loss, group_soft_threshold, knight_decomposition, objective_value, prox_check, CheckLoss, ObjectiveValue,
    PenaltySpec,
};
pub use solver::{
    dual_certificate, fit, fit_l1, fit_unpenalized, lambda_max, DualCertificate, QuantileFit, SocpProblem,
    SolverOptions,
};
pub use tuning::{pivot_draw, select_lambda, theta_schedule, PivotConfig, TuningResult};

/// Dense column-major matrix used throughout the crate.
pub type Matrix = nalgebra::DMatrix<f64>;
/// Dense vector used throughout the crate.
pub type Vector = nalgebra::DVector<f64>;
