//! Forced-sampling Lasso bandit, adapted to shared-parameter contexts.
//!
//! The baseline was designed for one context shared by all arms and one
//! parameter per arm. It is run here on the concatenated context
//! `[X_{t,1}; …; X_{t,K}] ∈ ℝ^{Kd}`; arm `i`'s parameter is `β*` placed in
//! block `i`, so `X_tᵀβ*_i = X_{t,i}ᵀβ*`.
//!
//! Arm `i` (1-based) is forced at the times
//! `{(2ⁿ − 1)Kq + j : n ≥ 0, j ∈ {q(i−1)+1, …, qi}}`. Outside those times
//! the forced-sample estimators (penalty `λ₁`) pre-select every arm within
//! `h/2` of the best forced-sample score, and the all-sample estimators
//! (penalty `λ₂ √((ln t + ln Kd)/t)`) pick among them.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::history::History;
use super::Policy;
use crate::contexts::ContextSet;
use crate::error::{Error, Result};
use crate::estimator::{LinkKind, SolverOptions};
use crate::util::argmax;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct LassoBanditTuning {
    /// Forced pulls per arm per block.
    pub q: usize,
    /// Pre-selection margin; arms within `h/2` of the best forced score survive.
    pub h: f64,
    /// Penalty of the forced-sample estimators.
    pub lambda1: f64,
    /// Scale of the all-sample penalty.
    pub lambda2: f64,
}

impl LassoBanditTuning {
    /// Tuning used when the baseline is told the sparsity `s0`: the number of
    /// forced pulls grows with the number of active coordinates per arm.
    pub fn for_sparsity(s0: usize, arms: usize) -> Self {
        Self { q: s0.div_ceil(arms.max(1)).max(1), h: 5.0, lambda1: 0.05, lambda2: 0.05 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.q == 0 {
            return Err(Error::Config("lasso bandit q must be >= 1".into()));
        }
        for (name, v) in [("h", self.h), ("lambda1", self.lambda1), ("lambda2", self.lambda2)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("lasso bandit {name} must be finite and >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

/// Arm forced at round `t` (1-based), if any; arms are 0-based.
pub fn forced_arm(t: usize, arms: usize, q: usize) -> Option<usize> {
    let block = arms * q;
    let mut n = 0u32;
    loop {
        let start = ((1usize << n) - 1).checked_mul(block)?;
        if t <= start {
            return None;
        }
        if t <= start + block {
            return Some((t - start - 1) / q);
        }
        n += 1;
        if n >= usize::BITS - 1 {
            return None;
        }
    }
}

#[derive(Debug, Clone)]
pub struct ForcedSamplingLasso {
    tuning: LassoBanditTuning,
    arms: usize,
    d: usize,
    solver: SolverOptions,
    forced: Vec<History>,
    all: Vec<History>,
    beta_forced: Vec<DVector<f64>>,
    beta_all: Vec<DVector<f64>>,
    round: usize,
    warnings: usize,
}

impl ForcedSamplingLasso {
    pub fn new(d: usize, arms: usize, tuning: LassoBanditTuning, solver: SolverOptions) -> Result<Self> {
        tuning.validate()?;
        if arms == 0 || d == 0 {
            return Err(Error::Config("lasso bandit needs d >= 1 and arms >= 1".into()));
        }
        let dim = arms * d;
        Ok(Self {
            tuning,
            arms,
            d,
            solver,
            forced: vec![History::new(dim); arms],
            all: vec![History::new(dim); arms],
            beta_forced: vec![DVector::zeros(dim); arms],
            beta_all: vec![DVector::zeros(dim); arms],
            round: 0,
            warnings: 0,
        })
    }

    fn concat(&self, ctx: &ContextSet) -> DVector<f64> {
        DVector::from_iterator(self.arms * self.d, ctx.features.row_iter().flat_map(|r| r.iter().copied().collect::<Vec<_>>()))
    }

    pub fn forced_samples(&self, arm: usize) -> usize {
        self.forced[arm].len()
    }

    fn refit(&mut self, which: Which, arm: usize, lambda: f64) -> Result<()> {
        let (hist, beta) = match which {
            Which::Forced => (&self.forced[arm], &mut self.beta_forced[arm]),
            Which::All => (&self.all[arm], &mut self.beta_all[arm]),
        };
        if hist.is_empty() {
            return Ok(());
        }
        let sol = hist.fit(lambda, LinkKind::Linear, Some(beta), &self.solver)?;
        if !sol.converged {
            self.warnings += 1;
        }
        *beta = sol.beta;
        Ok(())
    }
}

#[derive(Clone, Copy)]
enum Which {
    Forced,
    All,
}

impl Policy for ForcedSamplingLasso {
    fn name(&self) -> &str {
        "lasso_bandit"
    }

    fn choose(&mut self, ctx: &ContextSet) -> usize {
        let t = self.round + 1;
        if let Some(arm) = forced_arm(t, self.arms, self.tuning.q) {
            return arm;
        }
        let x = self.concat(ctx);
        let forced_scores: Vec<f64> = self.beta_forced.iter().map(|b| b.dot(&x)).collect();
        let best = forced_scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let cutoff = best - self.tuning.h / 2.0;
        argmax(self.beta_all.iter().zip(&forced_scores).map(|(b, &fs)| {
            if fs >= cutoff {
                b.dot(&x)
            } else {
                f64::NEG_INFINITY
            }
        }))
    }

    fn update(&mut self, ctx: &ContextSet, arm: usize, reward: f64) -> Result<()> {
        self.round += 1;
        let t = self.round;
        let x = self.concat(ctx);
        let was_forced = forced_arm(t, self.arms, self.tuning.q) == Some(arm);
        self.all[arm].push(&x, reward);
        if was_forced {
            self.forced[arm].push(&x, reward);
            self.refit(Which::Forced, arm, self.tuning.lambda1)?;
        }
        let dim = (self.arms * self.d) as f64;
        let lambda2 = self.tuning.lambda2 * (((t as f64).ln() + dim.ln()) / t as f64).sqrt();
        for i in 0..self.arms {
            self.refit(Which::All, i, lambda2)?;
        }
        Ok(())
    }

    fn rounds_observed(&self) -> usize {
        self.round
    }

    fn solver_warnings(&self) -> usize {
        self.warnings
    }
}
