//! Doubly-robust Lasso bandit.
//!
//! For the first `z_t` rounds arms are drawn uniformly. Afterwards the greedy
//! arm under the current estimate is played with probability
//! `1 − p_t + p_t/K` and every other arm with probability `p_t/K`, where
//! `p_t = min(1, λ₁ √((ln t + ln d)/t))`. After observing `Y` for arm `a`
//! played with probability `π_a`, the pseudo-reward
//!
//! ```text
//! r̂ = X̄ᵀβ̂ + (Y − X_aᵀβ̂) / (K π_a),   X̄ = (1/K) Σ_i X_i
//! ```
//!
//! is regressed on `X̄` by Lasso with penalty `λ₂ √((ln t + ln d)/t)`.
//! Given the contexts, `r̂` is unbiased for `X̄ᵀβ*` whatever `β̂` is.

use nalgebra::DVector;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::history::History;
use super::Policy;
use crate::contexts::ContextSet;
use crate::error::{Error, Result};
use crate::estimator::{LinkKind, SolverOptions};
use crate::util::argmax;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct DrLassoTuning {
    /// Scale of the randomization probability.
    pub lambda1: f64,
    /// Scale of the Lasso penalty.
    pub lambda2: f64,
    /// Length of the initial uniform-exploration phase.
    pub z_t: usize,
}

impl DrLassoTuning {
    /// Tuning used when the baseline is told the sparsity `s0`: the uniform
    /// warm-up lasts `2·s0` rounds.
    pub fn for_sparsity(s0: usize, arms: usize) -> Self {
        Self { lambda1: 1.0, lambda2: 1.0, z_t: (2 * s0).max(arms) }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("lambda1", self.lambda1), ("lambda2", self.lambda2)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("dr lasso {name} must be finite and >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

/// `X̄ᵀβ̂ + (Y − X_aᵀβ̂)/(K π_a)`.
pub fn pseudo_reward(ctx: &ContextSet, beta_hat: &DVector<f64>, arm: usize, reward: f64, prob: f64) -> f64 {
    let k = ctx.arms() as f64;
    let mean_ctx = mean_context(ctx);
    mean_ctx.dot(beta_hat) + (reward - ctx.arm(arm).dot(beta_hat)) / (k * prob)
}

fn mean_context(ctx: &ContextSet) -> DVector<f64> {
    ctx.features.row_mean().transpose()
}

#[derive(Debug, Clone)]
pub struct DrLasso {
    tuning: DrLassoTuning,
    d: usize,
    solver: SolverOptions,
    history: History,
    beta_hat: DVector<f64>,
    rng: ChaCha8Rng,
    probs: Vec<f64>,
    round: usize,
    warnings: usize,
}

impl DrLasso {
    pub fn new(d: usize, tuning: DrLassoTuning, solver: SolverOptions, rng: ChaCha8Rng) -> Result<Self> {
        tuning.validate()?;
        Ok(Self {
            tuning,
            d,
            solver,
            history: History::new(d),
            beta_hat: DVector::zeros(d),
            rng,
            probs: Vec::new(),
            round: 0,
            warnings: 0,
        })
    }

    pub fn beta_hat(&self) -> &DVector<f64> {
        &self.beta_hat
    }

    pub fn pseudo_rewards(&self) -> &[f64] {
        self.history.responses()
    }

    fn rate(&self, t: usize) -> f64 {
        (((t as f64).ln() + (self.d as f64).ln()) / t as f64).sqrt()
    }

    /// Selection probabilities for round `t`.
    fn probabilities(&self, ctx: &ContextSet, t: usize) -> Vec<f64> {
        let k = ctx.arms();
        if t <= self.tuning.z_t {
            return vec![1.0 / k as f64; k];
        }
        let greedy = argmax(ctx.scores(&self.beta_hat).iter().copied());
        let p = (self.tuning.lambda1 * self.rate(t)).min(1.0);
        (0..k).map(|i| p / k as f64 + if i == greedy { 1.0 - p } else { 0.0 }).collect()
    }
}

impl Policy for DrLasso {
    fn name(&self) -> &str {
        "dr_lasso"
    }

    fn choose(&mut self, ctx: &ContextSet) -> usize {
        self.probs = self.probabilities(ctx, self.round + 1);
        let u: f64 = self.rng.random();
        let mut acc = 0.0;
        for (i, &p) in self.probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return i;
            }
        }
        self.probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
    }

    fn update(&mut self, ctx: &ContextSet, arm: usize, reward: f64) -> Result<()> {
        self.round += 1;
        let t = self.round;
        if self.probs.len() != ctx.arms() {
            self.probs = self.probabilities(ctx, t);
        }
        let prob = self.probs[arm];
        if !(prob > 0.0) {
            return Err(Error::InvalidInput(format!("arm {arm} had zero selection probability")));
        }
        let r_hat = pseudo_reward(ctx, &self.beta_hat, arm, reward, prob);
        self.history.push(&mean_context(ctx), r_hat);
        self.probs.clear();

        let lambda = self.tuning.lambda2 * self.rate(t);
        let sol = self.history.fit(lambda, LinkKind::Linear, Some(&self.beta_hat), &self.solver)?;
        if !sol.converged {
            self.warnings += 1;
        }
        self.beta_hat = sol.beta;
        Ok(())
    }

    fn rounds_observed(&self) -> usize {
        self.round
    }

    fn solver_warnings(&self) -> usize {
        self.warnings
    }
}
