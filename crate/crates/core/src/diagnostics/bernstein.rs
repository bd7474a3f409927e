//! Tail of `max_{i≤j} |(1/τ) Σ_t γ_t^{ij}|` for martingale-difference
//! arrays against the bound `exp(−τw/2)` at the threshold
//! `w + √(2w) + √(4 ln(2d²)/τ) + 2 ln(2d²)/τ`.

use rand::{Rng, RngCore};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::util::stream_rng;

/// Threshold of the maximal inequality for `d(d+1)/2` sequences of length `τ`.
pub fn bernstein_threshold(tau: usize, w: f64, d: usize) -> f64 {
    let l = (2.0 * (d as f64).powi(2)).ln();
    let tau = tau as f64;
    w + (2.0 * w).sqrt() + (4.0 * l / tau).sqrt() + 2.0 * l / tau
}

/// Generators of `γ_t^{ij}`; each has conditional mean zero and
/// `E|γ|^m ≤ m!`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MartingaleKind {
    /// Independent ±1 signs.
    #[default]
    Rademacher,
    /// `c_t ε_t` with Rademacher `ε_t` and a predictable scale
    /// `c_t = 1` if the running sum is nonnegative, `1/2` otherwise.
    Adapted,
    /// `(X_i X_j − E[X_i X_j])/2` with `X` uniform on `[−1, 1]^d`, shared
    /// by all pairs of a round.
    OuterProduct,
}

impl std::str::FromStr for MartingaleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rademacher" => Ok(MartingaleKind::Rademacher),
            "adapted" => Ok(MartingaleKind::Adapted),
            "outer-product" => Ok(MartingaleKind::OuterProduct),
            other => Err(Error::Config(format!("unknown generator `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct BernsteinConfig {
    pub d: usize,
    /// `(τ, w)` pairs.
    pub grid: Vec<(usize, f64)>,
    pub trials: usize,
    pub generator: MartingaleKind,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jobs: Option<usize>,
}

impl Default for BernsteinConfig {
    fn default() -> Self {
        Self {
            d: 5,
            grid: vec![(100, 0.05), (200, 0.1), (400, 0.2)],
            trials: 100_000,
            generator: MartingaleKind::Rademacher,
            seed: 0,
            jobs: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct BernsteinRow {
    pub tau: usize,
    pub w: f64,
    pub threshold: f64,
    pub bound: f64,
    pub trials: usize,
    pub exceedances: usize,
    pub empirical: f64,
    /// `√(b(1−b)/trials)` with `b` the bound clipped to `[0, 1]`.
    pub se: f64,
    /// Largest normalized maximum seen in any trial.
    pub max_statistic: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct BernsteinReport {
    pub pass: bool,
    pub config: BernsteinConfig,
    pub rows: Vec<BernsteinRow>,
}

const CHUNK: usize = 1000;

pub fn check_bernstein_adapted(cfg: &BernsteinConfig) -> Result<BernsteinReport> {
    if cfg.d == 0 || cfg.trials == 0 || cfg.grid.is_empty() {
        return Err(Error::Config("d, trials and grid must be nonempty".into()));
    }
    if let Some((tau, w)) = cfg.grid.iter().find(|(tau, w)| *tau == 0 || !(*w >= 0.0)) {
        return Err(Error::Config(format!("invalid grid point (tau {tau}, w {w})")));
    }
    let pool = super::pool(cfg.jobs)?;
    let mut rows = Vec::with_capacity(cfg.grid.len());
    for (g, &(tau, w)) in cfg.grid.iter().enumerate() {
        let threshold = bernstein_threshold(tau, w, cfg.d);
        let chunks = cfg.trials.div_ceil(CHUNK);
        let (exceed, max_stat) = pool.install(|| {
            (0..chunks)
                .into_par_iter()
                .map(|c| {
                    let mut rng = stream_rng(cfg.seed, ((g as u64) << 32) | c as u64);
                    let n = CHUNK.min(cfg.trials - c * CHUNK);
                    let mut hits = 0usize;
                    let mut worst: f64 = 0.0;
                    for _ in 0..n {
                        let stat = max_statistic(cfg.generator, cfg.d, tau, &mut rng);
                        worst = worst.max(stat);
                        if stat >= threshold {
                            hits += 1;
                        }
                    }
                    (hits, worst)
                })
                .reduce(|| (0, 0.0), |a, b| (a.0 + b.0, a.1.max(b.1)))
        });
        let bound = (-(tau as f64) * w / 2.0).exp();
        let b = bound.min(1.0);
        let se = (b * (1.0 - b) / cfg.trials as f64).sqrt();
        let empirical = exceed as f64 / cfg.trials as f64;
        rows.push(BernsteinRow {
            tau,
            w,
            threshold,
            bound,
            trials: cfg.trials,
            exceedances: exceed,
            empirical,
            se,
            max_statistic: max_stat,
            pass: empirical <= bound + 3.0 * se,
        });
    }
    Ok(BernsteinReport { pass: rows.iter().all(|r| r.pass), config: cfg.clone(), rows })
}

/// `max_{i≤j} |(1/τ) Σ_t γ_t^{ij}|` for one simulated array.
fn max_statistic(kind: MartingaleKind, d: usize, tau: usize, rng: &mut impl RngCore) -> f64 {
    let pairs = d * (d + 1) / 2;
    let tau_f = tau as f64;
    match kind {
        MartingaleKind::Rademacher => (0..pairs)
            .map(|_| {
                let mut ones = 0u32;
                let mut left = tau;
                while left > 0 {
                    let take = left.min(64);
                    let bits = rng.next_u64();
                    let mask = if take == 64 { u64::MAX } else { (1u64 << take) - 1 };
                    ones += (bits & mask).count_ones();
                    left -= take;
                }
                (2.0 * ones as f64 - tau_f).abs() / tau_f
            })
            .fold(0.0, f64::max),
        MartingaleKind::Adapted => (0..pairs)
            .map(|_| {
                let mut sum = 0.0;
                let mut bits = 0u64;
                for t in 0..tau {
                    if t % 64 == 0 {
                        bits = rng.next_u64();
                    }
                    let eps = if (bits >> (t % 64)) & 1 == 1 { 1.0 } else { -1.0 };
                    let scale = if sum >= 0.0 { 1.0 } else { 0.5 };
                    sum += scale * eps;
                }
                (sum / tau_f).abs()
            })
            .fold(0.0, f64::max),
        MartingaleKind::OuterProduct => {
            let mut sums = vec![0.0; pairs];
            let mut x = vec![0.0; d];
            for _ in 0..tau {
                x.iter_mut().for_each(|v| *v = rng.random_range(-1.0..1.0));
                let mut p = 0;
                for i in 0..d {
                    for j in i..d {
                        let centre = if i == j { 1.0 / 3.0 } else { 0.0 };
                        sums[p] += 0.5 * (x[i] * x[j] - centre);
                        p += 1;
                    }
                }
            }
            sums.iter().fold(0.0, |m: f64, s| m.max((s / tau_f).abs()))
        }
    }
}
