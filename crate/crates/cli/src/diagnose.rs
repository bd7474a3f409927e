use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Subcommand};
use nalgebra::DMatrix;
use serde::de::DeserializeOwned;

use sparse_bandit::diagnostics::{
    check_bernstein_adapted, check_matrix_concentration, check_oracle_inequality, compatibility_constant,
    restricted_eigenvalue, write_report, BalancedConfig, BernsteinConfig, ConcentrationConfig, ConcentrationPolicy,
    ConeOptions, MartingaleKind, OracleIneqConfig,
};
use sparse_bandit::{ContextFamily, LinkKind};

#[derive(Subcommand, Debug)]
pub enum DiagnoseCommand {
    /// Violation frequency of the ℓ₁ oracle inequality along SA trajectories.
    OracleIneq(OracleArgs),
    /// Decay of ‖Σ_t − Σ̂_t‖_∞ along policy trajectories.
    Concentration(ConcentrationArgs),
    /// Monte Carlo tail of the Bernstein-type maximal inequality.
    Bernstein(BernsteinArgs),
    /// Compatibility constant and restricted eigenvalue of a matrix.
    Compat(CompatArgs),
    /// Balanced-covariance constant for K ≥ 3 arms.
    BalancedCov(BalancedArgs),
}

/// Flags shared by every check.
#[derive(Args, Debug)]
pub struct Common {
    /// TOML file with the report's config keys; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory for the `.toml` report and `.csv` rows.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    jobs: Option<usize>,
}

impl Common {
    fn load<T: DeserializeOwned + Default>(&self) -> Result<T> {
        match &self.config {
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                toml::from_str(&text).with_context(|| format!("parsing {}", p.display()))
            }
            None => Ok(T::default()),
        }
    }
}

macro_rules! override_fields {
    ($cfg:ident, $args:ident; $($field:ident),*) => {$(if let Some(v) = $args.$field.clone() { $cfg.$field = v; })*};
}

#[derive(Args, Debug)]
pub struct OracleArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    arms: Option<usize>,
    #[arg(long)]
    s0: Option<usize>,
    #[arg(long)]
    horizon: Option<usize>,
    #[arg(long)]
    trajectories: Option<usize>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    dist: Option<ContextFamily>,
    #[arg(long)]
    rho2: Option<f64>,
    #[arg(long)]
    link: Option<LinkKind>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    lambda0: Option<f64>,
    /// Comma-separated rounds.
    #[arg(long, value_delimiter = ',')]
    checkpoints: Option<Vec<usize>>,
    #[arg(long)]
    burn_in: Option<usize>,
}

#[derive(Args, Debug)]
pub struct ConcentrationArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    arms: Option<usize>,
    #[arg(long)]
    s0: Option<usize>,
    #[arg(long)]
    horizon: Option<usize>,
    #[arg(long)]
    trajectories: Option<usize>,
    #[arg(long)]
    dist: Option<ContextFamily>,
    #[arg(long)]
    rho2: Option<f64>,
    /// sa_lasso or random.
    #[arg(long)]
    policy: Option<ConcentrationPolicy>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    lambda0: Option<f64>,
    #[arg(long)]
    draws_per_round: Option<usize>,
    #[arg(long)]
    gram_draws: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    checkpoints: Option<Vec<usize>>,
    #[arg(long)]
    decay_from: Option<usize>,
    #[arg(long)]
    decay_to: Option<usize>,
}

#[derive(Args, Debug)]
pub struct BernsteinArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    d: Option<usize>,
    /// Comma-separated `tau:w` pairs, e.g. `100:0.05,200:0.1`.
    #[arg(long, value_delimiter = ',', value_parser = parse_grid_point)]
    grid: Option<Vec<(usize, f64)>>,
    #[arg(long)]
    trials: Option<usize>,
    /// rademacher, adapted or outer-product.
    #[arg(long)]
    generator: Option<MartingaleKind>,
}

#[derive(Args, Debug)]
pub struct CompatArgs {
    #[command(flatten)]
    common: Common,
    /// Headerless CSV holding a square matrix.
    #[arg(long, conflicts_with = "identity")]
    matrix: Option<PathBuf>,
    /// Use the d×d identity instead of a file.
    #[arg(long)]
    identity: Option<usize>,
    /// Multiply the matrix by this factor.
    #[arg(long, default_value_t = 1.0)]
    scale: f64,
    /// Comma-separated 0-based support indices.
    #[arg(long, value_delimiter = ',', required = true)]
    support: Vec<usize>,
    #[arg(long)]
    samples: Option<usize>,
}

#[derive(Args, Debug)]
pub struct BalancedArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    arms: Option<usize>,
    #[arg(long)]
    dist: Option<ContextFamily>,
    #[arg(long)]
    rho2: Option<f64>,
    /// Comma-separated score direction.
    #[arg(long, value_delimiter = ',')]
    beta: Option<Vec<f64>>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    batches: Option<usize>,
}

fn parse_grid_point(s: &str) -> Result<(usize, f64), String> {
    let (tau, w) = s.split_once(':').ok_or_else(|| format!("expected tau:w, got `{s}`"))?;
    Ok((tau.trim().parse().map_err(|e| format!("{e}"))?, w.trim().parse().map_err(|e| format!("{e}"))?))
}

fn finish<R: serde::Serialize, Row: serde::Serialize>(
    out: Option<&Path>,
    stem: &str,
    report: &R,
    rows: &[Row],
    pass: Option<bool>,
) -> Result<()> {
    if let Some(dir) = out {
        for p in write_report(dir, stem, report, rows)? {
            eprintln!("wrote {}", p.display());
        }
    }
    if let Some(pass) = pass {
        println!("{stem}: {}", if pass { "PASS" } else { "FAIL" });
    }
    Ok(())
}

fn oracle(args: OracleArgs) -> Result<()> {
    let mut cfg: OracleIneqConfig = args.common.load()?;
    override_fields!(cfg, args; d, arms, s0, horizon, trajectories, delta, dist, rho2, link, sigma, checkpoints, burn_in);
    if args.lambda0.is_some() {
        cfg.lambda0 = args.lambda0;
    }
    cfg.seed = args.common.seed.unwrap_or(cfg.seed);
    cfg.jobs = args.common.jobs.or(cfg.jobs);
    let report = check_oracle_inequality(&cfg)?;
    println!("t,used,excluded,violations,rate,se,mean_error_l1,mean_bound_l1,rate_l2");
    for r in &report.checkpoints {
        println!(
            "{},{},{},{},{:.4},{:.4},{:.4},{:.4},{:.4}",
            r.t, r.used, r.excluded, r.violations, r.rate, r.se, r.mean_error_l1, r.mean_bound_l1, r.rate_l2
        );
    }
    finish(args.common.out.as_deref(), "oracle_ineq", &report, &report.checkpoints, Some(report.pass))
}

fn concentration(args: ConcentrationArgs) -> Result<()> {
    let mut cfg: ConcentrationConfig = args.common.load()?;
    override_fields!(cfg, args; d, arms, s0, horizon, trajectories, dist, rho2, policy, sigma, draws_per_round,
        gram_draws, checkpoints, decay_from, decay_to);
    if args.lambda0.is_some() {
        cfg.lambda0 = args.lambda0;
    }
    cfg.seed = args.common.seed.unwrap_or(cfg.seed);
    cfg.jobs = args.common.jobs.or(cfg.jobs);
    let report = check_matrix_concentration(&cfg)?;
    println!("t,mean_sup_error,se,event_rate,mean_phi2_empirical,min_phi2_empirical");
    for r in &report.checkpoints {
        println!(
            "{},{:.5},{:.5},{:.3},{:.4},{:.4}",
            r.t, r.mean_sup_error, r.se_sup_error, r.event_rate, r.mean_phi2_empirical, r.min_phi2_empirical
        );
    }
    println!("decay ratio {:.4}, log-log slope {:.3}", report.decay_ratio, report.log_log_slope);
    finish(args.common.out.as_deref(), "concentration", &report, &report.checkpoints, Some(report.pass))
}

fn bernstein(args: BernsteinArgs) -> Result<()> {
    let mut cfg: BernsteinConfig = args.common.load()?;
    override_fields!(cfg, args; d, grid, trials, generator);
    cfg.seed = args.common.seed.unwrap_or(cfg.seed);
    cfg.jobs = args.common.jobs.or(cfg.jobs);
    let report = check_bernstein_adapted(&cfg)?;
    println!("tau,w,threshold,bound,empirical,se");
    for r in &report.rows {
        println!("{},{},{:.4},{:.3e},{:.3e},{:.3e}", r.tau, r.w, r.threshold, r.bound, r.empirical, r.se);
    }
    finish(args.common.out.as_deref(), "bernstein", &report, &report.rows, Some(report.pass))
}

fn read_matrix(path: &Path) -> Result<DMatrix<f64>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_path(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        rows.push(rec.iter().map(|v| v.parse::<f64>()).collect::<Result<_, _>>()?);
    }
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        bail!("{} does not hold a square matrix", path.display());
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

#[derive(serde::Serialize)]
#[serde(rename_all = "kebab-case")]
struct CompatReport {
    compatibility: sparse_bandit::diagnostics::ConeEstimate,
    restricted_eigenvalue: sparse_bandit::diagnostics::ConeEstimate,
    support: Vec<usize>,
    scale: f64,
}

#[derive(serde::Serialize)]
struct CompatRow {
    quantity: &'static str,
    value: f64,
    exhaustive: bool,
    orthants_refined: usize,
}

fn compat(args: CompatArgs) -> Result<()> {
    let m = match (&args.matrix, args.identity) {
        (Some(p), _) => read_matrix(p)?,
        (None, Some(d)) => DMatrix::identity(d, d),
        (None, None) => bail!("give --matrix FILE or --identity D"),
    } * args.scale;
    let mut opts: ConeOptions = args.common.load()?;
    if let Some(s) = args.samples {
        opts.samples = s;
    }
    opts.seed = args.common.seed.unwrap_or(opts.seed);
    let phi = compatibility_constant(&m, &args.support, &opts)?;
    let re = restricted_eigenvalue(&m, &args.support, &opts)?;
    println!("compatibility {:.6} (orthants refined {}, exhaustive {})", phi.value, phi.orthants_refined, phi.exhaustive);
    println!("restricted eigenvalue {:.6}", re.value);
    let rows = [
        CompatRow { quantity: "compatibility", value: phi.value, exhaustive: phi.exhaustive, orthants_refined: phi.orthants_refined },
        CompatRow { quantity: "restricted_eigenvalue", value: re.value, exhaustive: re.exhaustive, orthants_refined: re.orthants_refined },
    ];
    let report = CompatReport { compatibility: phi, restricted_eigenvalue: re, support: args.support, scale: args.scale };
    finish(args.common.out.as_deref(), "compat", &report, &rows, None)
}

fn balanced(args: BalancedArgs) -> Result<()> {
    let mut cfg: BalancedConfig = args.common.load()?;
    override_fields!(cfg, args; d, arms, dist, rho2, samples, batches);
    if args.beta.is_some() {
        cfg.beta = args.beta.clone();
    }
    cfg.seed = args.common.seed.unwrap_or(cfg.seed);
    cfg.jobs = args.common.jobs.or(cfg.jobs);
    let report = cfg.run()?;
    println!("C estimate {:.4} ± {:.4} (orderings {})", report.estimate, report.se, report.orderings_seen);
    for note in &report.notes {
        eprintln!("note: {note}");
    }
    finish(args.common.out.as_deref(), "balanced_cov", &report, &report.rows, None)
}

pub fn run(cmd: DiagnoseCommand) -> Result<()> {
    match cmd {
        DiagnoseCommand::OracleIneq(a) => oracle(a),
        DiagnoseCommand::Concentration(a) => concentration(a),
        DiagnoseCommand::Bernstein(a) => bernstein(a),
        DiagnoseCommand::Compat(a) => compat(a),
        DiagnoseCommand::BalancedCov(a) => balanced(a),
    }
}
