use nalgebra::DVector;
use rand::seq::index;
use rand::{Rng, RngCore};
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::ContextSet;
use crate::error::{Error, Result};
use crate::estimator::LinkKind;
use crate::util::argmax;

/// A sparse true parameter and its support.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseParameter {
    #[serde(with = "dvector_serde")]
    pub beta_star: DVector<f64>,
    pub active_set: Vec<usize>,
}

/// Draws `s0` support indices uniformly without replacement and fills them
/// with independent `Uniform(0, 1]` values; all other entries are zero.
///
/// `s0 = 0` is accepted and yields the zero vector.
pub fn make_parameter(d: usize, s0: usize, rng: &mut dyn RngCore) -> Result<SparseParameter> {
    if s0 > d {
        return Err(Error::InvalidInput(format!("sparsity s0 = {s0} exceeds dimension d = {d}")));
    }
    let mut active_set = index::sample(rng, d, s0).into_vec();
    active_set.sort_unstable();
    let mut beta_star = DVector::zeros(d);
    for &j in &active_set {
        // 1 - U[0,1) keeps every drawn entry strictly nonzero
        beta_star[j] = 1.0 - rng.random::<f64>();
    }
    Ok(SparseParameter { beta_star, active_set })
}

/// Reward model `Y = μ(xᵀβ*) + ε`, `ε ~ N(0, σ²)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    #[serde(with = "dvector_serde")]
    pub beta_star: DVector<f64>,
    pub active_set: Vec<usize>,
    pub link: LinkKind,
    pub sigma: f64,
    /// Feature norm bound, when one is enforced.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_max: Option<f64>,
}

impl ModelSpec {
    pub fn new(beta_star: DVector<f64>, link: LinkKind, sigma: f64) -> Result<Self> {
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidInput(format!("sigma must be finite and >= 0, got {sigma}")));
        }
        let active_set = (0..beta_star.len()).filter(|&j| beta_star[j] != 0.0).collect();
        Ok(Self { beta_star, active_set, link, sigma, x_max: None })
    }

    pub fn from_parameter(param: SparseParameter, link: LinkKind, sigma: f64) -> Result<Self> {
        Self::new(param.beta_star, link, sigma)
    }

    pub fn d(&self) -> usize {
        self.beta_star.len()
    }

    pub fn s0(&self) -> usize {
        self.active_set.len()
    }

    /// `‖β*‖₂`.
    pub fn b(&self) -> f64 {
        self.beta_star.norm()
    }

    /// Expected reward given a linear score `xᵀβ*`.
    pub fn mean_from_score(&self, score: f64) -> f64 {
        self.link.mu(score)
    }

    /// Reward with a pre-drawn standard normal `z`: `μ(score) + σ z`.
    pub fn reward_with_noise(&self, score: f64, z: f64) -> f64 {
        self.link.mu(score) + self.sigma * z
    }

    fn check_dim(&self, len: usize) -> Result<()> {
        if len != self.d() {
            return Err(Error::DimensionMismatch { expected: self.d(), got: len });
        }
        Ok(())
    }
}

/// `μ(xᵀβ*)`.
pub fn expected_reward(model: &ModelSpec, x: &DVector<f64>) -> Result<f64> {
    model.check_dim(x.len())?;
    Ok(model.link.mu(x.dot(&model.beta_star)))
}

/// `μ(xᵀβ*) + ε` with a fresh `ε ~ N(0, σ²)`.
pub fn sample_reward(model: &ModelSpec, x: &DVector<f64>, rng: &mut dyn RngCore) -> Result<f64> {
    let mean = expected_reward(model, x)?;
    let z: f64 = rng.sample(StandardNormal);
    Ok(mean + model.sigma * z)
}

/// Lowest-index arm with maximal expected reward.
pub fn best_arm(model: &ModelSpec, ctx: &ContextSet) -> Result<usize> {
    model.check_dim(ctx.dim())?;
    let scores = ctx.scores(&model.beta_star);
    Ok(argmax(scores.iter().map(|&s| model.link.mu(s))))
}

mod dvector_serde {
    use nalgebra::DVector;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &DVector<f64>, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DVector<f64>, D::Error> {
        Vec::<f64>::deserialize(d).map(DVector::from_vec)
    }
}
