use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use sparse_bandit::{run_experiment, write_results, ContextFamily, ExperimentConfig, LinkKind, PolicyKind};

mod diagnose;

#[derive(Parser)]
#[command(name = "sparse-bandit", version, about = "Sparse contextual bandit simulations and diagnostics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run replicated bandit experiments and write regret traces.
    Simulate(SimulateArgs),
    /// Monte Carlo checks of the estimation lemmas.
    #[command(subcommand)]
    Diagnose(diagnose::DiagnoseCommand),
}

/// Every flag overrides the matching key of `--config` when both are given.
#[derive(Args, Debug, Default)]
struct SimulateArgs {
    /// TOML file with the same keys as the flags below.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    arms: Option<usize>,
    #[arg(long)]
    s0: Option<usize>,
    #[arg(long)]
    horizon: Option<usize>,
    #[arg(long)]
    runs: Option<usize>,
    /// gaussian, uniform or elliptical.
    #[arg(long)]
    dist: Option<ContextFamily>,
    #[arg(long)]
    rho2: Option<f64>,
    /// Rank of the elliptical mixing matrix.
    #[arg(long)]
    rank: Option<usize>,
    /// linear or logistic.
    #[arg(long)]
    link: Option<LinkKind>,
    #[arg(long)]
    sigma: Option<f64>,
    /// Comma-separated: sa_lasso, lasso_bandit, dr_lasso, oracle, random.
    #[arg(long, value_delimiter = ',')]
    policies: Option<Vec<PolicyKind>>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for traces.csv, summary.csv and manifest.toml.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    clip_xmax: Option<f64>,
    /// Sparsity given to the baselines' tuning rules.
    #[arg(long)]
    baseline_s0: Option<usize>,
    #[arg(long)]
    lambda0: Option<f64>,
    /// Refit only when t crosses powers of this factor.
    #[arg(long)]
    refit_growth: Option<f64>,
    /// One β* shared by all runs.
    #[arg(long)]
    shared_beta: bool,
}

impl SimulateArgs {
    fn into_config(self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => {
                let (Some(d), Some(arms), Some(s0), Some(horizon)) = (self.d, self.arms, self.s0, self.horizon) else {
                    bail!("--d, --arms, --s0 and --horizon are required without --config");
                };
                let policies = vec![PolicyKind::SaLasso, PolicyKind::LassoBandit, PolicyKind::DrLasso, PolicyKind::Oracle];
                let mut cfg = ExperimentConfig::new(d, arms, s0, horizon, 20, policies);
                cfg.seed = 42;
                cfg
            }
        };
        macro_rules! set {
            ($($field:ident),*) => {$(if let Some(v) = self.$field { cfg.$field = v; })*};
        }
        macro_rules! set_opt {
            ($($field:ident),*) => {$(if self.$field.is_some() { cfg.$field = self.$field; })*};
        }
        set!(d, arms, s0, horizon, runs, dist, rho2, link, sigma, policies, seed);
        set_opt!(rank, out, jobs, clip_xmax, baseline_s0, lambda0, refit_growth);
        cfg.shared_beta |= self.shared_beta;
        cfg.validate()?;
        Ok(cfg)
    }
}

fn simulate(args: SimulateArgs) -> Result<()> {
    let cfg = args.into_config()?;
    let result = run_experiment(&cfg)?;
    println!("policy,runs,mean_final_regret,std_final_regret");
    for s in result.summary() {
        println!("{},{},{:.4},{:.4}", s.policy, s.runs, s.final_mean(), s.std.last().copied().unwrap_or(0.0));
    }
    for (policy, n) in result.solver_warnings.iter().filter(|(_, n)| **n > 0) {
        eprintln!("warning: {policy}: {n} refits hit the iteration limit");
    }
    eprintln!("wall time {:.1}s", result.wall_time_secs);
    if let Some(dir) = &cfg.out {
        let paths = write_results(&result, dir).with_context(|| format!("writing results to {}", dir.display()))?;
        for p in paths {
            eprintln!("wrote {}", p.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Simulate(args) => simulate(args),
        Command::Diagnose(cmd) => diagnose::run(cmd),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
