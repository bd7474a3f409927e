//! Synthetic contexts, sparse parameters and rewards.
//!
//! Three context families are shipped:
//!
//! * equicorrelated Gaussian: for every coordinate independently, the K arm
//!   values are drawn from `N(0, V)` with `V_ii = 1`, `V_ij = ρ²`, so arms are
//!   correlated within a coordinate and coordinates are independent;
//! * uniform hypercube: every coordinate of every arm is `Uniform[-1, 1]`;
//! * elliptical: `X = μ + R·A·U` with `R ~ N(0, 1)`, `U` uniform on the unit
//!   sphere of `ℝ^k` and `A` a fixed `d × k` matrix of rank `k`.
//!
//! All three are symmetric about the origin (with `μ = 0`), so the density
//! ratio `p(−x)/p(x)` is identically one.

mod model;

pub use model::{best_arm, expected_reward, make_parameter, sample_reward, ModelSpec, SparseParameter};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngCore};
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Family of context distributions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DistributionKind {
    /// Per-coordinate `N(0, V)` across arms with off-diagonal correlation `rho2`.
    GaussianEquicorrelated { rho2: f64 },
    UniformHypercube,
    /// `X = R·A·U`; `rank = None` means `k = d`.
    Elliptical { rank: Option<usize> },
}

impl DistributionKind {
    /// Density ratio bound `ν` for the shipped kinds (all symmetric about zero).
    pub fn symmetry_ratio(&self) -> f64 {
        1.0
    }

    pub fn label(&self) -> &'static str {
        match self {
            DistributionKind::GaussianEquicorrelated { .. } => "gaussian",
            DistributionKind::UniformHypercube => "uniform",
            DistributionKind::Elliptical { .. } => "elliptical",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct DistributionSpec {
    pub kind: DistributionKind,
    pub d: usize,
    pub arms: usize,
    /// Rescale rows whose ℓ₂ norm exceeds this bound. Off by default.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clip_to_xmax: Option<f64>,
}

impl DistributionSpec {
    pub fn new(kind: DistributionKind, d: usize, arms: usize) -> Self {
        Self { kind, d, arms, clip_to_xmax: None }
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 || self.arms == 0 {
            return Err(Error::InvalidInput(format!(
                "need d >= 1 and arms >= 1, got d = {}, arms = {}",
                self.d, self.arms
            )));
        }
        if let Some(c) = self.clip_to_xmax {
            if !(c > 0.0 && c.is_finite()) {
                return Err(Error::InvalidInput(format!("clip bound must be positive, got {c}")));
            }
        }
        match self.kind {
            DistributionKind::GaussianEquicorrelated { rho2 } if !(0.0..1.0).contains(&rho2) => {
                Err(Error::InvalidInput(format!("rho2 must lie in [0, 1), got {rho2}")))
            }
            DistributionKind::Elliptical { rank: Some(k) } if k == 0 || k > self.d => Err(
                Error::InvalidInput(format!("elliptical rank must be in 1..={}, got {k}", self.d)),
            ),
            _ => Ok(()),
        }
    }
}

/// One round's feature vectors: row `i` is the context of arm `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct ContextSet {
    pub features: DMatrix<f64>,
    pub round: usize,
}

impl ContextSet {
    pub fn new(features: DMatrix<f64>, round: usize) -> Self {
        Self { features, round }
    }

    pub fn arms(&self) -> usize {
        self.features.nrows()
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn arm(&self, i: usize) -> DVector<f64> {
        self.features.row(i).transpose()
    }

    /// Linear scores `X_iᵀβ` of all arms.
    pub fn scores(&self, beta: &DVector<f64>) -> DVector<f64> {
        &self.features * beta
    }

    /// Largest row ℓ₂ norm.
    pub fn max_row_norm(&self) -> f64 {
        self.features.row_iter().map(|r| r.norm()).fold(0.0, f64::max)
    }
}

/// Anything that can produce a round of contexts.
pub trait ContextSource: Send + Sync {
    fn arms(&self) -> usize;
    fn dim(&self) -> usize;
    fn sample_context_set(&self, round: usize, rng: &mut dyn RngCore) -> ContextSet;
}

#[derive(Debug, Clone)]
enum Sampler {
    Gaussian { chol: DMatrix<f64> },
    Uniform,
    Elliptical { a: DMatrix<f64>, mu: DVector<f64> },
}

/// A [`DistributionSpec`] with its per-experiment state: the Cholesky factor
/// of `V` for Gaussian contexts, the mixing matrix `A` for elliptical ones.
#[derive(Debug, Clone)]
pub struct ContextSampler {
    spec: DistributionSpec,
    sampler: Sampler,
}

impl ContextSampler {
    /// Builds the sampler. Elliptical specs draw `A` with entries
    /// `Uniform[0, 1]` from `rng` and use `μ = 0`.
    pub fn new(spec: &DistributionSpec, rng: &mut dyn RngCore) -> Result<Self> {
        spec.validate()?;
        let sampler = match spec.kind {
            DistributionKind::GaussianEquicorrelated { rho2 } => {
                let k = spec.arms;
                let v = DMatrix::from_fn(k, k, |i, j| if i == j { 1.0 } else { rho2 });
                let chol = v.cholesky().ok_or_else(|| {
                    Error::Factorization(format!("equicorrelation matrix with rho2 = {rho2} is not positive definite"))
                })?;
                Sampler::Gaussian { chol: chol.unpack() }
            }
            DistributionKind::UniformHypercube => Sampler::Uniform,
            DistributionKind::Elliptical { rank } => {
                let k = rank.unwrap_or(spec.d);
                let a = DMatrix::from_fn(spec.d, k, |_, _| rng.random::<f64>());
                return Self::elliptical(spec, a, DVector::zeros(spec.d));
            }
        };
        Ok(Self { spec: spec.clone(), sampler })
    }

    /// Elliptical sampler with an explicit mixing matrix and mean.
    pub fn elliptical(spec: &DistributionSpec, a: DMatrix<f64>, mu: DVector<f64>) -> Result<Self> {
        spec.validate()?;
        if a.nrows() != spec.d {
            return Err(Error::DimensionMismatch { expected: spec.d, got: a.nrows() });
        }
        if mu.len() != spec.d {
            return Err(Error::DimensionMismatch { expected: spec.d, got: mu.len() });
        }
        let k = a.ncols();
        if k == 0 || a.rank(1e-10) != k {
            return Err(Error::Factorization(format!("mixing matrix must have full column rank {k}")));
        }
        let mut spec = spec.clone();
        spec.kind = DistributionKind::Elliptical { rank: Some(k) };
        Ok(Self { spec, sampler: Sampler::Elliptical { a, mu } })
    }

    pub fn spec(&self) -> &DistributionSpec {
        &self.spec
    }

    /// Density ratio bound `ν`, when it is known (`1` for every zero-mean kind).
    pub fn symmetry_ratio(&self) -> Option<f64> {
        match &self.sampler {
            Sampler::Elliptical { mu, .. } if mu.iter().any(|&m| m != 0.0) => None,
            _ => Some(self.spec.kind.symmetry_ratio()),
        }
    }

    /// Analytic `Σ = (1/K) E[𝐗ᵀ𝐗]` of the unclipped distribution.
    pub fn theoretical_gram(&self) -> DMatrix<f64> {
        let d = self.spec.d;
        match &self.sampler {
            Sampler::Gaussian { .. } => DMatrix::identity(d, d),
            Sampler::Uniform => DMatrix::identity(d, d) / 3.0,
            // E[R²] = 1 and E[UUᵀ] = I_k / k
            Sampler::Elliptical { a, mu } => a * a.transpose() / a.ncols() as f64 + mu * mu.transpose(),
        }
    }

    pub fn sample(&self, round: usize, rng: &mut dyn RngCore) -> ContextSet {
        let (k, d) = (self.spec.arms, self.spec.d);
        let mut features = DMatrix::zeros(k, d);
        match &self.sampler {
            Sampler::Gaussian { chol } => {
                let mut z = vec![0.0; k];
                for i in 0..d {
                    for zj in z.iter_mut() {
                        *zj = rng.sample(StandardNormal);
                    }
                    for a in 0..k {
                        let mut v = 0.0;
                        for b in 0..=a {
                            v += chol[(a, b)] * z[b];
                        }
                        features[(a, i)] = v;
                    }
                }
            }
            Sampler::Uniform => {
                for a in 0..k {
                    for i in 0..d {
                        features[(a, i)] = rng.random_range(-1.0..=1.0);
                    }
                }
            }
            Sampler::Elliptical { a: mix, mu } => {
                let rank = mix.ncols();
                for a in 0..k {
                    let r: f64 = rng.sample(StandardNormal);
                    let mut u = DVector::from_fn(rank, |_, _| rng.sample::<f64, _>(StandardNormal));
                    let norm = u.norm();
                    if norm > 0.0 {
                        u /= norm;
                    }
                    let x = mu + r * (mix * u);
                    features.row_mut(a).copy_from(&x.transpose());
                }
            }
        }
        if let Some(bound) = self.spec.clip_to_xmax {
            for mut row in features.row_iter_mut() {
                let norm = row.norm();
                if norm > bound {
                    row *= bound / norm;
                }
            }
        }
        ContextSet::new(features, round)
    }
}

impl ContextSource for ContextSampler {
    fn arms(&self) -> usize {
        self.spec.arms
    }

    fn dim(&self) -> usize {
        self.spec.d
    }

    fn sample_context_set(&self, round: usize, rng: &mut dyn RngCore) -> ContextSet {
        self.sample(round, rng)
    }
}

/// Monte Carlo estimate of `Σ = (1/K) E[𝐗ᵀ𝐗]` with entrywise standard errors.
pub fn monte_carlo_gram(
    source: &dyn ContextSource,
    draws: usize,
    rng: &mut dyn RngCore,
) -> (DMatrix<f64>, DMatrix<f64>) {
    let d = source.dim();
    let k = source.arms() as f64;
    let mut sum = DMatrix::zeros(d, d);
    let mut sum_sq = DMatrix::zeros(d, d);
    for t in 0..draws {
        let ctx = source.sample_context_set(t + 1, rng);
        let g = ctx.features.tr_mul(&ctx.features) / k;
        sum_sq += g.component_mul(&g);
        sum += g;
    }
    let n = draws as f64;
    let mean = sum / n;
    let var = (sum_sq / n - mean.component_mul(&mean)).map(|v| v.max(0.0));
    let se = var.map(|v| (v / (n - 1.0).max(1.0)).sqrt());
    (mean, se)
}
