use nalgebra::DVector;

use super::history::History;
use super::{sa_lasso_choose, Policy};
use crate::contexts::ContextSet;
use crate::error::{Error, Result};
use crate::estimator::{lambda_schedule, LinkKind, SolverOptions};

/// Settings of the sparsity-agnostic Lasso bandit. Its only statistical
/// input is `lambda0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SaLassoConfig {
    pub lambda0: f64,
    pub link: LinkKind,
    pub solver: SolverOptions,
    /// Refit only when `t` crosses the next power of this factor. `None`
    /// refits every round.
    pub refit_growth: Option<f64>,
}

impl SaLassoConfig {
    pub fn new(lambda0: f64, link: LinkKind) -> Self {
        Self { lambda0, link, solver: SolverOptions::default(), refit_growth: None }
    }
}

/// Greedy arm choice on a Lasso estimate refit every round with the
/// decaying penalty `λ_t = λ₀ √((4 ln t + 2 ln d)/t)`, warm-started from the
/// previous estimate. The first estimate is the zero vector.
#[derive(Debug, Clone)]
pub struct SaLasso {
    cfg: SaLassoConfig,
    history: History,
    beta_hat: DVector<f64>,
    last_lambda: Option<f64>,
    next_refit: f64,
    warnings: usize,
}

impl SaLasso {
    pub fn new(d: usize, cfg: SaLassoConfig) -> Result<Self> {
        if !(cfg.lambda0 > 0.0 && cfg.lambda0.is_finite()) {
            return Err(Error::Config(format!("lambda0 must be positive, got {}", cfg.lambda0)));
        }
        if let Some(g) = cfg.refit_growth {
            if !(g > 1.0) {
                return Err(Error::Config(format!("refit growth factor must exceed 1, got {g}")));
            }
        }
        Ok(Self {
            cfg,
            history: History::new(d),
            beta_hat: DVector::zeros(d),
            last_lambda: None,
            next_refit: 1.0,
            warnings: 0,
        })
    }

    pub fn beta_hat(&self) -> &DVector<f64> {
        &self.beta_hat
    }

    /// Replaces the current estimate; used to plant estimates in tests and diagnostics.
    pub fn set_beta_hat(&mut self, beta: DVector<f64>) {
        assert_eq!(beta.len(), self.history.dim());
        self.beta_hat = beta;
    }

    pub fn history(&self) -> &History {
        &self.history
    }

    /// Penalty used for the latest refit.
    pub fn last_lambda(&self) -> Option<f64> {
        self.last_lambda
    }

    /// Round index `t` of the next decision.
    pub fn round(&self) -> usize {
        self.history.len() + 1
    }

    /// Appends the observation and refits `β̂_{t+1}` with `λ_t`.
    pub fn observe(&mut self, x: &DVector<f64>, y: f64) -> Result<()> {
        if x.len() != self.history.dim() {
            return Err(Error::DimensionMismatch { expected: self.history.dim(), got: x.len() });
        }
        self.history.push(x, y);
        let t = self.history.len();
        if let Some(growth) = self.cfg.refit_growth {
            if (t as f64) < self.next_refit {
                return Ok(());
            }
            self.next_refit = (self.next_refit * growth).max(t as f64 + 1.0);
        }
        let lambda = lambda_schedule(self.cfg.lambda0, t, self.history.dim());
        let sol = self.history.fit(lambda, self.cfg.link, Some(&self.beta_hat), &self.cfg.solver)?;
        if !sol.converged {
            self.warnings += 1;
        }
        self.beta_hat = sol.beta;
        self.last_lambda = Some(lambda);
        Ok(())
    }
}

impl Policy for SaLasso {
    fn name(&self) -> &str {
        "sa_lasso"
    }

    fn choose(&mut self, ctx: &ContextSet) -> usize {
        sa_lasso_choose(&self.beta_hat, ctx)
    }

    fn update(&mut self, ctx: &ContextSet, arm: usize, reward: f64) -> Result<()> {
        self.observe(&ctx.arm(arm), reward)
    }

    fn rounds_observed(&self) -> usize {
        self.history.len()
    }

    fn solver_warnings(&self) -> usize {
        self.warnings
    }
}
