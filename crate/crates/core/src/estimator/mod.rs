//! ℓ₁-penalized maximum-likelihood estimation for linear and logistic GLMs.
//!
//! The estimator minimizes
//!
//! ```text
//! ℓ_n(β) + λ‖β‖₁,   ℓ_n(β) = −(1/n) Σ_j [ y_j X_jᵀβ − m(X_jᵀβ) ]
//! ```
//!
//! where `m` is the cumulant of the link. The linear link is solved by cyclic
//! coordinate descent on the covariance form `(XᵀX/n, Xᵀy/n)`; the logistic
//! link by proximal gradient with a Barzilai–Borwein trial step and
//! backtracking (step halving until the quadratic upper model holds).
//! No intercept is fitted and features are used as given.

mod link;
mod solver;

pub use link::LinkKind;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::util::l1_norm;

/// Proximal operator of `gamma·|·|`.
#[inline]
pub fn soft_threshold(z: f64, gamma: f64) -> f64 {
    debug_assert!(gamma >= 0.0);
    if z > gamma {
        z - gamma
    } else if z < -gamma {
        z + gamma
    } else {
        0.0
    }
}

/// Penalty schedule `λ_t = λ₀ √((4 ln t + 2 ln d) / t)`.
///
/// Requires `t ≥ 1`, `d ≥ 2` and `lambda0 > 0` for a strictly positive result.
pub fn lambda_schedule(lambda0: f64, t: usize, d: usize) -> f64 {
    debug_assert!(t >= 1 && d >= 1);
    let t = t as f64;
    lambda0 * ((4.0 * t.ln() + 2.0 * (d as f64).ln()) / t).sqrt()
}

/// Design, responses, penalty and link of one Lasso-GLM fit.
#[derive(Debug, Clone)]
pub struct LassoProblem {
    x: DMatrix<f64>,
    y: DVector<f64>,
    lambda: f64,
    link: LinkKind,
}

impl LassoProblem {
    pub fn new(x: DMatrix<f64>, y: DVector<f64>, lambda: f64, link: LinkKind) -> Result<Self> {
        let (n, d) = x.shape();
        if n == 0 || d == 0 {
            return Err(Error::InvalidInput(format!("design must be non-empty, got {n}x{d}")));
        }
        if y.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: y.len() });
        }
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidInput(format!("lambda must be finite and >= 0, got {lambda}")));
        }
        for j in 0..d {
            if x.column(j).iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite { coordinate: j });
            }
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("responses contain non-finite values".into()));
        }
        Ok(Self { x, y, lambda, link })
    }

    /// Like [`LassoProblem::new`] but rejects any row with `‖X_row‖₂ > x_max`.
    pub fn with_row_bound(
        x: DMatrix<f64>,
        y: DVector<f64>,
        lambda: f64,
        link: LinkKind,
        x_max: f64,
    ) -> Result<Self> {
        let problem = Self::new(x, y, lambda, link)?;
        for (i, row) in problem.x.row_iter().enumerate() {
            let norm = row.norm();
            if norm > x_max {
                return Err(Error::InvalidInput(format!(
                    "row {i} has norm {norm} exceeding x_max = {x_max}"
                )));
            }
        }
        Ok(problem)
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn d(&self) -> usize {
        self.x.ncols()
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn link(&self) -> LinkKind {
        self.link
    }

    pub fn set_lambda(&mut self, lambda: f64) -> Result<()> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidInput(format!("lambda must be finite and >= 0, got {lambda}")));
        }
        self.lambda = lambda;
        Ok(())
    }

    fn check_dim(&self, beta: &DVector<f64>) -> Result<()> {
        if beta.len() != self.d() {
            return Err(Error::DimensionMismatch { expected: self.d(), got: beta.len() });
        }
        Ok(())
    }

    /// Covariance form `(XᵀX/n, Xᵀy/n)` of the design.
    pub fn covariance_form(&self) -> CovarianceForm {
        let n = self.n() as f64;
        CovarianceForm {
            gram: self.x.tr_mul(&self.x) / n,
            xty: self.x.tr_mul(&self.y) / n,
        }
    }
}

/// Sufficient statistics of a linear-link problem: `G = XᵀX/n`, `c = Xᵀy/n`.
///
/// The linear negative log-likelihood is `½βᵀGβ − cᵀβ` exactly, so fits on the
/// covariance form match fits on the raw data.
#[derive(Debug, Clone)]
pub struct CovarianceForm {
    pub gram: DMatrix<f64>,
    pub xty: DVector<f64>,
}

impl CovarianceForm {
    pub fn d(&self) -> usize {
        self.xty.len()
    }

    pub fn loss(&self, beta: &DVector<f64>) -> f64 {
        0.5 * beta.dot(&(&self.gram * beta)) - self.xty.dot(beta)
    }

    pub fn gradient(&self, beta: &DVector<f64>) -> DVector<f64> {
        &self.gram * beta - &self.xty
    }
}

/// `ℓ_n(β) = −(1/n) Σ_j [ y_j X_jᵀβ − m(X_jᵀβ) ]`.
pub fn neg_log_likelihood(problem: &LassoProblem, beta: &DVector<f64>) -> Result<f64> {
    problem.check_dim(beta)?;
    Ok(solver::loss(problem, &(problem.x() * beta)))
}

/// Analytic gradient `∇ℓ_n(β) = (1/n) Σ_j (μ(X_jᵀβ) − y_j) X_j`.
pub fn gradient(problem: &LassoProblem, beta: &DVector<f64>) -> Result<DVector<f64>> {
    problem.check_dim(beta)?;
    Ok(solver::loss_gradient(problem, &(problem.x() * beta)))
}

/// Penalized objective `ℓ_n(β) + λ‖β‖₁`.
pub fn objective(problem: &LassoProblem, beta: &DVector<f64>) -> Result<f64> {
    Ok(neg_log_likelihood(problem, beta)? + problem.lambda() * l1_norm(beta))
}

/// Largest violation of the coordinate-wise stationarity conditions.
///
/// For `β_j = 0` the condition is `|g_j| ≤ λ`; otherwise `g_j + λ·sign(β_j) = 0`.
pub fn kkt_violation(grad: &DVector<f64>, beta: &DVector<f64>, lambda: f64) -> f64 {
    grad.iter()
        .zip(beta.iter())
        .map(|(&g, &b)| {
            if b == 0.0 {
                (g.abs() - lambda).max(0.0)
            } else {
                (g + lambda * b.signum()).abs()
            }
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Tolerance on the KKT residual.
    pub tol: f64,
    /// Maximum number of sweeps (coordinate descent) or steps (proximal gradient).
    pub max_iter: usize,
    /// Record the objective after every sweep/step into [`LassoSolution::trace`].
    pub record_trace: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { tol: 1e-7, max_iter: 10_000, record_trace: false }
    }
}

impl SolverOptions {
    fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::InvalidInput(format!("tol must be > 0, got {}", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidInput("max_iter must be >= 1".into()));
        }
        Ok(())
    }
}

/// Result of a Lasso fit.
#[derive(Debug, Clone)]
pub struct LassoSolution {
    pub beta: DVector<f64>,
    /// `ℓ_n(β) + λ‖β‖₁` at `beta`.
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    pub kkt_violation: f64,
    /// Objective per iteration; empty unless requested.
    pub trace: Vec<f64>,
}

/// Minimizes `ℓ_n(β) + λ‖β‖₁`.
///
/// `init` warm-starts the solver. When the iteration budget runs out the best
/// iterate is returned with `converged = false`. A non-finite iterate is a
/// hard error naming the coordinate.
pub fn fit_lasso(
    problem: &LassoProblem,
    init: Option<&DVector<f64>>,
    opts: &SolverOptions,
) -> Result<LassoSolution> {
    opts.validate()?;
    let start = start_point(problem.d(), init)?;
    match problem.link() {
        LinkKind::Linear => {
            solver::coordinate_descent(&problem.covariance_form(), problem.lambda(), start, opts)
        }
        LinkKind::Logistic => solver::proximal_gradient(problem, start, opts),
    }
}

/// Linear-link fit directly on a covariance form.
pub fn fit_lasso_covariance(
    form: &CovarianceForm,
    lambda: f64,
    init: Option<&DVector<f64>>,
    opts: &SolverOptions,
) -> Result<LassoSolution> {
    opts.validate()?;
    if form.gram.shape() != (form.d(), form.d()) {
        return Err(Error::DimensionMismatch { expected: form.d(), got: form.gram.nrows() });
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidInput(format!("lambda must be finite and >= 0, got {lambda}")));
    }
    let start = start_point(form.d(), init)?;
    solver::coordinate_descent(form, lambda, start, opts)
}

fn start_point(d: usize, init: Option<&DVector<f64>>) -> Result<DVector<f64>> {
    match init {
        Some(b) if b.len() != d => Err(Error::DimensionMismatch { expected: d, got: b.len() }),
        Some(b) => {
            if let Some(j) = b.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite { coordinate: j });
            }
            Ok(b.clone())
        }
        None => Ok(DVector::zeros(d)),
    }
}
