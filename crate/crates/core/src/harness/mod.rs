//! Replicated bandit runs, regret accounting and result files.
//!
//! All policies of a run face the same context stream and the same noise:
//! one standard normal is drawn per (round, arm) before any policy acts, so
//! two policies pulling the same arm observe the same reward.

mod config;
mod output;


pub use config::{ContextFamily, ExperimentConfig};
pub use output::{
    read_summary, summary_rows, version, write_results, write_summary, write_traces, Manifest, SummaryRow, MANIFEST_FILE,
    SUMMARY_FILE, TRACES_FILE,
};

use std::collections::BTreeMap;
use std::time::Instant;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::contexts::{make_parameter, ContextSampler, ModelSpec};
use crate::error::{Error, Result};
use crate::policies::{Policy, PolicyKind};
use crate::util::{argmax, mean_std, stream_rng};

// Stream layout: every run owns a block of streams, one per consumer.
const STREAMS_PER_RUN: u64 = 64;
const BETA: u64 = 0;
const CONTEXTS: u64 = 1;
const NOISE: u64 = 2;
const POLICY_BASE: u64 = 8;
const EXPERIMENT_STREAM: u64 = u64::MAX;

fn run_stream(run: usize, role: u64) -> u64 {
    run as u64 * STREAMS_PER_RUN + role
}

/// Regret of one policy in one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RegretTrace {
    pub run_id: usize,
    pub policy: PolicyKind,
    /// `r_t = μ(X_{a*}ᵀβ*) − μ(X_{a_t}ᵀβ*)` for `t = 1..=T`.
    pub inst_regret: Vec<f64>,
    pub cum_regret: Vec<f64>,
}

impl RegretTrace {
    pub fn from_instantaneous(run_id: usize, policy: PolicyKind, inst_regret: Vec<f64>) -> Self {
        let cum_regret = inst_regret
            .iter()
            .scan(0.0, |acc, r| {
                *acc += r;
                Some(*acc)
            })
            .collect();
        Self { run_id, policy, inst_regret, cum_regret }
    }

    pub fn horizon(&self) -> usize {
        self.inst_regret.len()
    }

    pub fn final_regret(&self) -> f64 {
        self.cum_regret.last().copied().unwrap_or(0.0)
    }
}

/// Mean and sample standard deviation of `R(t)` across runs for one policy.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicySummary {
    pub policy: PolicyKind,
    pub runs: usize,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl PolicySummary {
    /// Mean cumulative regret at round `t` (1-based).
    pub fn mean_at(&self, t: usize) -> f64 {
        self.mean[t - 1]
    }

    pub fn std_at(&self, t: usize) -> f64 {
        self.std[t - 1]
    }

    pub fn final_mean(&self) -> f64 {
        self.mean.last().copied().unwrap_or(0.0)
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    /// Sorted by run, then by the order of `config.policies`.
    pub traces: Vec<RegretTrace>,
    pub solver_warnings: BTreeMap<PolicyKind, usize>,
    pub wall_time_secs: f64,
}

impl ExperimentResult {
    pub fn summary(&self) -> Vec<PolicySummary> {
        summarize(&self.traces)
    }

    pub fn summary_for(&self, policy: PolicyKind) -> Option<PolicySummary> {
        self.summary().into_iter().find(|s| s.policy == policy)
    }
}

/// Per-policy mean and standard deviation of cumulative regret at every
/// round, in order of first appearance. Runs shorter than the longest are
/// ignored past their end.
pub fn summarize(traces: &[RegretTrace]) -> Vec<PolicySummary> {
    let mut order: Vec<PolicyKind> = Vec::new();
    for tr in traces {
        if !order.contains(&tr.policy) {
            order.push(tr.policy);
        }
    }
    order
        .into_iter()
        .map(|policy| {
            let group: Vec<&RegretTrace> = traces.iter().filter(|t| t.policy == policy).collect();
            let horizon = group.iter().map(|t| t.horizon()).max().unwrap_or(0);
            let (mut mean, mut std) = (Vec::with_capacity(horizon), Vec::with_capacity(horizon));
            for t in 0..horizon {
                let vals: Vec<f64> = group.iter().filter_map(|tr| tr.cum_regret.get(t).copied()).collect();
                let (m, s) = mean_std(&vals);
                mean.push(m);
                std.push(s);
            }
            PolicySummary { policy, runs: group.len(), mean, std }
        })
        .collect()
}

/// Runs every policy of `config` over `config.runs` independent replications.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult> {
    config.validate()?;
    let start = Instant::now();
    let setup = config.policy_setup()?;
    let spec = config.distribution()?;
    let sampler = ContextSampler::new(&spec, &mut stream_rng(config.seed, EXPERIMENT_STREAM))?;

    let run_one = |run: usize| -> Result<(Vec<RegretTrace>, Vec<usize>)> {
        let beta_run = if config.shared_beta { 0 } else { run };
        let param = make_parameter(config.d, config.s0, &mut stream_rng(config.seed, run_stream(beta_run, BETA)))?;
        let model = ModelSpec::from_parameter(param, config.link, config.sigma)?;
        let mut policies: Vec<Box<dyn Policy>> = config
            .policies
            .iter()
            .enumerate()
            .map(|(j, &kind)| setup.build(kind, &model, stream_rng(config.seed, run_stream(run, POLICY_BASE + j as u64))))
            .collect::<Result<_>>()?;
        simulate_run(run, &config.policies, &mut policies, &model, &sampler, config)
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.jobs.unwrap_or(0))
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let per_run: Vec<(Vec<RegretTrace>, Vec<usize>)> =
        pool.install(|| (0..config.runs).into_par_iter().map(run_one).collect::<Result<_>>())?;

    let mut solver_warnings = BTreeMap::new();
    let mut traces = Vec::with_capacity(config.runs * config.policies.len());
    for (run_traces, warnings) in per_run {
        for (kind, w) in config.policies.iter().zip(warnings) {
            *solver_warnings.entry(*kind).or_insert(0) += w;
        }
        traces.extend(run_traces);
    }
    Ok(ExperimentResult {
        config: config.clone(),
        traces,
        solver_warnings,
        wall_time_secs: start.elapsed().as_secs_f64(),
    })
}

fn simulate_run(
    run: usize,
    kinds: &[PolicyKind],
    policies: &mut [Box<dyn Policy>],
    model: &ModelSpec,
    sampler: &ContextSampler,
    config: &ExperimentConfig,
) -> Result<(Vec<RegretTrace>, Vec<usize>)> {
    let mut ctx_rng = stream_rng(config.seed, run_stream(run, CONTEXTS));
    let mut noise_rng = stream_rng(config.seed, run_stream(run, NOISE));
    let mut inst: Vec<Vec<f64>> = vec![Vec::with_capacity(config.horizon); policies.len()];
    let mut noise = vec![0.0; config.arms];
    for t in 1..=config.horizon {
        let ctx = sampler.sample(t, &mut ctx_rng);
        for z in noise.iter_mut() {
            *z = noise_rng.sample(StandardNormal);
        }
        let scores = ctx.scores(&model.beta_star);
        let means: Vec<f64> = scores.iter().map(|&s| model.mean_from_score(s)).collect();
        let best = means[argmax(means.iter().copied())];
        for (p, regrets) in policies.iter_mut().zip(inst.iter_mut()) {
            let arm = p.choose(&ctx);
            if arm >= ctx.arms() {
                return Err(Error::InvalidInput(format!("policy {} chose arm {arm} of {}", p.name(), ctx.arms())));
            }
            regrets.push(best - means[arm]);
            p.update(&ctx, arm, model.reward_with_noise(scores[arm], noise[arm]))?;
        }
    }
    let warnings = policies.iter().map(|p| p.solver_warnings()).collect();
    let traces = kinds
        .iter()
        .zip(inst)
        .map(|(&kind, r)| RegretTrace::from_instantaneous(run, kind, r))
        .collect();
    Ok((traces, warnings))
}
