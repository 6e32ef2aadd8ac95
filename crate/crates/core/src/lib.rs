//! Two-fidelity Bayesian optimization for hyperparameter search.
//!
//! Cheap early-stopped ("light") training runs and full ("heavy") runs are
//! linked by a truncated additive model: the heavy response is a scaled
//! light response plus a Gaussian-process discrepancy confined to a known
//! interval. The optimizer spends light runs freely and picks heavy runs
//! among already light-evaluated configurations by an upper confidence
//! bound on the heavy prediction.
//!
//! The Gaussian-process, linear-algebra and design layers are generic over
//! the floating-point type; the aliases below fix it to `f64`, which the
//! two-fidelity model and the optimization loops use throughout.

// `!(x > 0.0)` style checks are kept on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Published approximation coefficients are kept digit-for-digit.
#![allow(clippy::excessive_precision, clippy::inconsistent_digit_grouping)]

pub mod acquisition;
pub mod design;
pub mod driver;
pub mod gp;
pub mod kernel;
pub mod linalg;
pub mod objectives;
pub mod optim;
pub mod qmc;
pub mod scalar;
pub mod space;
pub mod tam;
pub mod truncnorm;

pub use acquisition::{
    beta_schedule, maximize_ucb_l, select_ht_candidate, ucb, AcquisitionContext,
};
pub use driver::{run_btao, run_gpbo, run_random, simple_regret, RunError, RunSettings, RunTrace};
pub use gp::{fit_gp, gp_log_likelihood, gp_predict, GpError};
pub use objectives::{Benchmark, Fidelity, Objective, Sense, Synthetic};
pub use scalar::Scalar;
pub use space::SearchSpace;
pub use tam::{
    fit_tam, tam_log_likelihood, tam_posterior, tam_predict, TamModel, TruncationWindow,
};
pub use truncnorm::{mvn_rect_prob, tn_moments, TruncatedNormalPosterior};

pub type ConfigPoint = kernel::ConfigPoint<f64>;
pub type GpModel = gp::GpModel<f64>;
pub type NestedDesign = design::NestedDesign<f64>;
pub type SquareMatrix = linalg::SquareMatrix<f64>;
pub type Cholesky = linalg::Cholesky<f64>;
