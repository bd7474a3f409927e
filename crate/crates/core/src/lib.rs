//! Simulation library for high-dimensional sparse contextual bandits.
//!
//! The crate is organized around five pieces:
//!
//! - [`estimator`]: ℓ₁-penalized maximum likelihood for linear and logistic
//!   GLMs, solved by coordinate descent (linear) or proximal gradient (logistic).
//! - [`contexts`]: synthetic context generators, sparse true parameters and
//!   reward sampling.
//! - [`policies`]: the sparsity-agnostic Lasso bandit together with the
//!   forced-sampling Lasso bandit, the doubly-robust Lasso bandit, an oracle
//!   and a uniformly random baseline, all behind the [`policies::Policy`] trait.
//! - [`harness`]: replicated experiments on common random numbers, regret
//!   accounting and CSV/TOML persistence.
//! - [`diagnostics`]: Monte Carlo checks of the estimation machinery
//!   (compatibility constants, oracle inequality, Gram-matrix concentration,
//!   a Bernstein-type tail bound and the balanced-covariance constant).

// `!(x > 0.0)` style guards are used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod contexts;
pub mod diagnostics;
pub mod error;
pub mod estimator;
pub mod harness;
pub mod policies;
mod util;

pub use contexts::{
    best_arm, expected_reward, make_parameter, sample_reward, ContextSampler, ContextSet,
    ContextSource, DistributionKind, DistributionSpec, ModelSpec,
};
pub use error::{Error, Result};
pub use estimator::{
    fit_lasso, lambda_schedule, neg_log_likelihood, soft_threshold, LassoProblem,
    LassoSolution, LinkKind, SolverOptions,
};
pub use harness::{
    run_experiment, summarize, write_results, ContextFamily, ExperimentConfig, ExperimentResult, PolicySummary,
    RegretTrace,
};
pub use policies::{Policy, PolicyKind};
pub use util::stream_rng;
