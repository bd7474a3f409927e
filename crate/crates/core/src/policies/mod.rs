//! Bandit policies behind one interface.
//!
//! Learning policies only ever see contexts, their own choices and the
//! observed rewards; the true parameter, the noise level and the sparsity
//! are never handed to them. The oracle is the single exception and exists
//! only as the zero-regret reference.

mod dr_lasso;
mod forced_sampling;
mod history;
mod sa_lasso;

#[cfg(test)]
mod tests;

pub use dr_lasso::{pseudo_reward, DrLasso, DrLassoTuning};
pub use forced_sampling::{forced_arm, ForcedSamplingLasso, LassoBanditTuning};
pub use history::History;
pub use sa_lasso::{SaLasso, SaLassoConfig};

use nalgebra::DVector;
use rand::{Rng, RngCore};
use rand_chacha::ChaCha8Rng;

use crate::contexts::{best_arm, ContextSet, ModelSpec};
use crate::error::{Error, Result};
use crate::estimator::{LinkKind, SolverOptions};
use crate::util::argmax;

pub trait Policy: Send {
    fn name(&self) -> &str;

    /// Arm to pull in the current round.
    fn choose(&mut self, ctx: &ContextSet) -> usize;

    /// Feeds back the reward of the pulled arm.
    fn update(&mut self, ctx: &ContextSet, arm: usize, reward: f64) -> Result<()>;

    /// Number of observations absorbed so far.
    fn rounds_observed(&self) -> usize;

    /// Refits that hit the iteration budget before converging.
    fn solver_warnings(&self) -> usize {
        0
    }
}

/// Greedy choice on linear scores: lowest-index maximizer of `X_iᵀβ̂`.
pub fn sa_lasso_choose(beta_hat: &DVector<f64>, ctx: &ContextSet) -> usize {
    argmax(ctx.scores(beta_hat).iter().copied())
}

/// Arm with the highest expected reward under the true model.
pub fn oracle_choose(model: &ModelSpec, ctx: &ContextSet) -> Result<usize> {
    best_arm(model, ctx)
}

pub fn random_choose(rng: &mut dyn RngCore, arms: usize) -> usize {
    rng.random_range(0..arms)
}

/// Zero-regret reference policy.
#[derive(Debug, Clone)]
pub struct Oracle {
    model: ModelSpec,
    rounds: usize,
}

impl Oracle {
    pub fn new(model: ModelSpec) -> Self {
        Self { model, rounds: 0 }
    }
}

impl Policy for Oracle {
    fn name(&self) -> &str {
        "oracle"
    }

    fn choose(&mut self, ctx: &ContextSet) -> usize {
        oracle_choose(&self.model, ctx).expect("oracle model dimension matches contexts")
    }

    fn update(&mut self, _ctx: &ContextSet, _arm: usize, _reward: f64) -> Result<()> {
        self.rounds += 1;
        Ok(())
    }

    fn rounds_observed(&self) -> usize {
        self.rounds
    }
}

#[derive(Debug, Clone)]
pub struct RandomPolicy {
    rng: ChaCha8Rng,
    rounds: usize,
}

impl RandomPolicy {
    pub fn new(rng: ChaCha8Rng) -> Self {
        Self { rng, rounds: 0 }
    }
}

impl Policy for RandomPolicy {
    fn name(&self) -> &str {
        "random"
    }

    fn choose(&mut self, ctx: &ContextSet) -> usize {
        random_choose(&mut self.rng, ctx.arms())
    }

    fn update(&mut self, _ctx: &ContextSet, _arm: usize, _reward: f64) -> Result<()> {
        self.rounds += 1;
        Ok(())
    }

    fn rounds_observed(&self) -> usize {
        self.rounds
    }
}

/// Policy identifiers accepted by the harness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    SaLasso,
    LassoBandit,
    DrLasso,
    Oracle,
    Random,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 5] =
        [PolicyKind::SaLasso, PolicyKind::LassoBandit, PolicyKind::DrLasso, PolicyKind::Oracle, PolicyKind::Random];

    pub fn as_str(self) -> &'static str {
        match self {
            PolicyKind::SaLasso => "sa_lasso",
            PolicyKind::LassoBandit => "lasso_bandit",
            PolicyKind::DrLasso => "dr_lasso",
            PolicyKind::Oracle => "oracle",
            PolicyKind::Random => "random",
        }
    }
}

impl std::str::FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PolicyKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s.trim())
            .ok_or_else(|| Error::Config(format!("unknown policy `{s}`")))
    }
}

impl std::fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Everything needed to instantiate any policy for one run.
#[derive(Debug, Clone)]
pub struct PolicySetup {
    pub d: usize,
    pub arms: usize,
    pub link: LinkKind,
    pub lambda0: f64,
    pub refit_growth: Option<f64>,
    pub lasso_bandit: LassoBanditTuning,
    pub dr_lasso: DrLassoTuning,
    pub solver: SolverOptions,
}

impl PolicySetup {
    /// Instantiates `kind`. Only the oracle reads `model`.
    pub fn build(&self, kind: PolicyKind, model: &ModelSpec, rng: ChaCha8Rng) -> Result<Box<dyn Policy>> {
        Ok(match kind {
            PolicyKind::SaLasso => {
                let cfg = SaLassoConfig {
                    lambda0: self.lambda0,
                    link: self.link,
                    solver: self.solver,
                    refit_growth: self.refit_growth,
                };
                Box::new(SaLasso::new(self.d, cfg)?)
            }
            PolicyKind::LassoBandit => {
                Box::new(ForcedSamplingLasso::new(self.d, self.arms, self.lasso_bandit, self.solver)?)
            }
            PolicyKind::DrLasso => Box::new(DrLasso::new(self.d, self.dr_lasso, self.solver, rng)?),
            PolicyKind::Oracle => Box::new(Oracle::new(model.clone())),
            PolicyKind::Random => Box::new(RandomPolicy::new(rng)),
        })
    }
}
