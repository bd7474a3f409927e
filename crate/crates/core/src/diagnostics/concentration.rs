//! Distance between the adapted Gram matrix
//! `Σ_t = (1/t) Σ_τ E[X_τ X_τᵀ | 𝓕_{τ−1}]` and the empirical one
//! `Σ̂_t = (1/t) Σ_τ X_τ X_τᵀ` along policy trajectories.
//!
//! The conditional expectation at round `τ` is estimated by drawing fresh
//! context sets and applying the policy's decision rule frozen at `β̂_τ`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngCore};
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cone::{compatibility_constant, ConeOptions};
use super::{log_log_slope, max_abs};
use crate::contexts::{make_parameter, monte_carlo_gram, ContextSampler, ContextSet, ContextSource, ModelSpec};
use crate::error::{Error, Result};
use crate::estimator::LinkKind;
use crate::harness::ContextFamily;
use crate::policies::{sa_lasso_choose, Policy, SaLasso, SaLassoConfig};
use crate::util::stream_rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConcentrationPolicy {
    #[default]
    SaLasso,
    Random,
}

impl std::str::FromStr for ConcentrationPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sa_lasso" => Ok(ConcentrationPolicy::SaLasso),
            "random" => Ok(ConcentrationPolicy::Random),
            other => Err(Error::Config(format!("concentration check supports sa_lasso or random, got `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct ConcentrationConfig {
    pub d: usize,
    pub arms: usize,
    pub s0: usize,
    pub horizon: usize,
    pub trajectories: usize,
    pub dist: ContextFamily,
    pub rho2: f64,
    pub policy: ConcentrationPolicy,
    pub sigma: f64,
    /// Penalty scale of SA trajectories; defaults to `2σ`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda0: Option<f64>,
    /// Fresh context sets per round for the conditional expectation.
    pub draws_per_round: usize,
    /// Draws for the Monte Carlo theoretical Gram matrix.
    pub gram_draws: usize,
    pub checkpoints: Vec<usize>,
    /// Decay requirement: value at `decay_to` at most `decay_factor` times
    /// the value at `decay_from`.
    pub decay_from: usize,
    pub decay_to: usize,
    pub decay_factor: f64,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jobs: Option<usize>,
    pub cone: ConeOptions,
}

impl Default for ConcentrationConfig {
    fn default() -> Self {
        Self {
            d: 10,
            arms: 2,
            s0: 2,
            horizon: 400,
            trajectories: 50,
            dist: ContextFamily::Gaussian,
            rho2: 0.0,
            policy: ConcentrationPolicy::SaLasso,
            sigma: 1.0,
            lambda0: None,
            draws_per_round: 25,
            gram_draws: 100_000,
            checkpoints: vec![25, 50, 100, 200, 400],
            decay_from: 100,
            decay_to: 400,
            decay_factor: 0.7,
            seed: 0,
            jobs: None,
            cone: ConeOptions { samples: 500, ..ConeOptions::default() },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct ConcentrationCheckpoint {
    pub t: usize,
    pub mean_sup_error: f64,
    pub se_sup_error: f64,
    /// Share of trajectories with `‖Σ_t − Σ̂_t‖_∞ ≤ φ₀²/(32 s₀ ν)`.
    pub event_rate: f64,
    pub mean_phi2_empirical: f64,
    pub min_phi2_empirical: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct ConcentrationReport {
    pub pass: bool,
    /// Mean error at `decay_to` over mean error at `decay_from`.
    pub decay_ratio: f64,
    pub log_log_slope: f64,
    /// Monte Carlo stand-in for `φ₀² = φ²(Σ, S₀)`, averaged over trajectories.
    pub phi0_sq_estimate: f64,
    pub nu: f64,
    /// Mean of `φ₀²/(32 s₀ ν)`.
    pub event_threshold: f64,
    /// Mean of `min(1/2, φ₀²/(256 s₀ ν x_max²))` with the realized `x_max`.
    pub c0: f64,
    /// `2 ln(2d²)/C₀²`.
    pub t0: f64,
    pub conditional_draws_per_round: usize,
    pub notes: Vec<String>,
    pub config: ConcentrationConfig,
    pub checkpoints: Vec<ConcentrationCheckpoint>,
}

impl ConcentrationConfig {
    fn validate(&self) -> Result<()> {
        if self.s0 == 0 || self.s0 > self.d {
            return Err(Error::Config(format!("s0 must lie in 1..={}, got {}", self.d, self.s0)));
        }
        if self.trajectories == 0 || self.draws_per_round == 0 || self.gram_draws < 2 {
            return Err(Error::Config("trajectories, draws-per-round and gram-draws must be positive".into()));
        }
        if self.checkpoints.is_empty() || self.checkpoints.iter().any(|&t| t == 0 || t > self.horizon) {
            return Err(Error::Config(format!("checkpoints must lie in 1..={}", self.horizon)));
        }
        for t in [self.decay_from, self.decay_to] {
            if !self.checkpoints.contains(&t) {
                return Err(Error::Config(format!("decay checkpoint {t} is not among the checkpoints")));
            }
        }
        Ok(())
    }
}

struct Trajectory {
    sup_error: Vec<f64>,
    phi2_hat: Vec<f64>,
    phi0_sq: f64,
    x_max: f64,
}

pub fn check_matrix_concentration(cfg: &ConcentrationConfig) -> Result<ConcentrationReport> {
    cfg.validate()?;
    let spec = cfg.dist.spec(cfg.d, cfg.arms, cfg.rho2, None);
    let sampler = ContextSampler::new(&spec, &mut stream_rng(cfg.seed, u64::MAX))?;
    let nu = sampler.symmetry_ratio().unwrap_or(f64::NAN);
    let (gram, _) = monte_carlo_gram(&sampler, cfg.gram_draws, &mut stream_rng(cfg.seed, u64::MAX - 1));
    let mut checkpoints = cfg.checkpoints.clone();
    checkpoints.sort_unstable();
    checkpoints.dedup();

    let trajs: Vec<Trajectory> = super::pool(cfg.jobs)?.install(|| {
        (0..cfg.trajectories)
            .into_par_iter()
            .map(|k| trajectory(cfg, &sampler, &gram, &checkpoints, k as u64))
            .collect::<Result<_>>()
    })?;

    let n = trajs.len() as f64;
    let phi0_sq = trajs.iter().map(|t| t.phi0_sq).sum::<f64>() / n;
    let s0 = cfg.s0 as f64;
    let thresholds: Vec<f64> = trajs.iter().map(|t| t.phi0_sq / (32.0 * s0 * nu)).collect();
    let c0 = trajs
        .iter()
        .map(|t| (t.phi0_sq / (256.0 * s0 * nu * t.x_max.powi(2))).min(0.5))
        .sum::<f64>()
        / n;
    let t0 = 2.0 * (2.0 * (cfg.d as f64).powi(2)).ln() / c0.powi(2);

    let mut rows = Vec::new();
    for (i, &t) in checkpoints.iter().enumerate() {
        let errs: Vec<f64> = trajs.iter().map(|tr| tr.sup_error[i]).collect();
        let (mean, sd) = crate::util::mean_std(&errs);
        let phis: Vec<f64> = trajs.iter().map(|tr| tr.phi2_hat[i]).collect();
        rows.push(ConcentrationCheckpoint {
            t,
            mean_sup_error: mean,
            se_sup_error: sd / n.sqrt(),
            event_rate: errs.iter().zip(&thresholds).filter(|(e, th)| e <= th).count() as f64 / n,
            mean_phi2_empirical: phis.iter().sum::<f64>() / n,
            min_phi2_empirical: phis.iter().copied().fold(f64::INFINITY, f64::min),
        });
    }
    let at = |t: usize| rows.iter().find(|r| r.t == t).map(|r| r.mean_sup_error).unwrap_or(f64::NAN);
    let decay_ratio = at(cfg.decay_to) / at(cfg.decay_from);
    let slope = log_log_slope(&rows.iter().map(|r| (r.t as f64, r.mean_sup_error)).collect::<Vec<_>>());
    Ok(ConcentrationReport {
        pass: decay_ratio <= cfg.decay_factor,
        decay_ratio,
        log_log_slope: slope,
        phi0_sq_estimate: phi0_sq,
        nu,
        event_threshold: thresholds.iter().sum::<f64>() / n,
        c0,
        t0,
        conditional_draws_per_round: cfg.draws_per_round,
        notes: vec![
            "phi0^2 is unknown; it is replaced by the compatibility constant of a Monte Carlo estimate of Sigma".into(),
            format!("Sigma estimated from {} context draws", cfg.gram_draws),
            "nu = 1 by symmetry of the shipped context distributions".into(),
            "x_max in C0 is the realized maximum row norm of each trajectory".into(),
        ],
        config: cfg.clone(),
        checkpoints: rows,
    })
}

/// Monte Carlo `E[X_a X_aᵀ]` for the arm `a` picked greedily on `beta_hat`,
/// or for a uniformly random arm when `beta_hat` is `None`.
pub fn conditional_gram(
    source: &dyn ContextSource,
    beta_hat: Option<&DVector<f64>>,
    draws: usize,
    rng: &mut dyn RngCore,
) -> DMatrix<f64> {
    let d = source.dim();
    let mut sum = DMatrix::<f64>::zeros(d, d);
    for t in 0..draws {
        let ctx = source.sample_context_set(t + 1, rng);
        match beta_hat {
            Some(b) => {
                let x = ctx.arm(sa_lasso_choose(b, &ctx));
                sum.ger(1.0, &x, &x, 1.0);
            }
            None => sum += ctx.features.tr_mul(&ctx.features) / ctx.arms() as f64,
        }
    }
    sum / draws as f64
}

fn trajectory(
    cfg: &ConcentrationConfig,
    sampler: &ContextSampler,
    gram: &DMatrix<f64>,
    checkpoints: &[usize],
    k: u64,
) -> Result<Trajectory> {
    let d = cfg.d;
    let param = make_parameter(d, cfg.s0, &mut stream_rng(cfg.seed, 8 * k))?;
    let support = param.active_set.clone();
    let model = ModelSpec::from_parameter(param, LinkKind::Linear, cfg.sigma)?;
    let mut ctx_rng = stream_rng(cfg.seed, 8 * k + 1);
    let mut noise_rng = stream_rng(cfg.seed, 8 * k + 2);
    let mut mc_rng = stream_rng(cfg.seed, 8 * k + 3);
    let mut choice_rng = stream_rng(cfg.seed, 8 * k + 4);
    let mut sa = SaLasso::new(d, SaLassoConfig::new(cfg.lambda0.unwrap_or(2.0 * cfg.sigma), LinkKind::Linear))?;
    let cone = ConeOptions { seed: cfg.seed ^ (k << 20), ..cfg.cone };
    let phi0_sq = compatibility_constant(gram, &support, &cone)?.value;

    let mut adapted = DMatrix::<f64>::zeros(d, d);
    let mut empirical = DMatrix::<f64>::zeros(d, d);
    let mut x_max: f64 = 0.0;
    let (mut sup_error, mut phi2_hat) = (Vec::new(), Vec::new());
    let mut next = checkpoints.iter().peekable();
    for t in 1..=cfg.horizon {
        let cond = match cfg.policy {
            ConcentrationPolicy::SaLasso => conditional_gram(sampler, Some(sa.beta_hat()), cfg.draws_per_round, &mut mc_rng),
            ConcentrationPolicy::Random => conditional_gram(sampler, None, cfg.draws_per_round, &mut mc_rng),
        };
        adapted += cond;

        let ctx: ContextSet = sampler.sample(t, &mut ctx_rng);
        x_max = x_max.max(ctx.max_row_norm());
        let arm = match cfg.policy {
            ConcentrationPolicy::SaLasso => sa.choose(&ctx),
            ConcentrationPolicy::Random => choice_rng.random_range(0..ctx.arms()),
        };
        let x = ctx.arm(arm);
        empirical.ger(1.0, &x, &x, 1.0);
        if cfg.policy == ConcentrationPolicy::SaLasso {
            let z: f64 = noise_rng.sample(StandardNormal);
            sa.update(&ctx, arm, model.reward_with_noise(x.dot(&model.beta_star), z))?;
        }
        if next.peek() == Some(&&t) {
            next.next();
            let tf = t as f64;
            let sigma_hat = &empirical / tf;
            sup_error.push(max_abs(&(&adapted / tf - &sigma_hat)));
            let cone_t = ConeOptions { seed: cone.seed ^ t as u64, ..cone };
            phi2_hat.push(compatibility_constant(&sigma_hat, &support, &cone_t)?.value);
        }
    }
    Ok(Trajectory { sup_error, phi2_hat, phi0_sq, x_max })
}
