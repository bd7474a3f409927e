//! Monte Carlo estimate of the balanced-covariance constant: the smallest
//! `C` with `E[X_{i_k}X_{i_k}ᵀ 1{π}] ≼ C·E[(X_{i_1}X_{i_1}ᵀ + X_{i_K}X_{i_K}ᵀ) 1{π}]`
//! for every ordering `π` of the arm scores and every middle rank `k`.
//!
//! For each ordering the two sides are accumulated separately and `C` is the
//! largest generalized eigenvalue, computed through the Cholesky factor of
//! the right-hand side.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::contexts::{ContextSampler, ContextSource};
use crate::error::{Error, Result};
use crate::harness::ContextFamily;
use crate::util::{mean_std, stream_rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct BalancedConfig {
    pub d: usize,
    pub arms: usize,
    pub dist: ContextFamily,
    pub rho2: f64,
    /// Score direction; defaults to the normalized all-ones vector.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<Vec<f64>>,
    pub samples: usize,
    /// Independent batches used for the error bar.
    pub batches: usize,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jobs: Option<usize>,
}

impl Default for BalancedConfig {
    fn default() -> Self {
        Self {
            d: 10,
            arms: 3,
            dist: ContextFamily::Gaussian,
            rho2: 0.0,
            beta: None,
            samples: 1_000_000,
            batches: 10,
            seed: 0,
            jobs: None,
        }
    }
}

impl BalancedConfig {
    pub fn beta(&self) -> Result<DVector<f64>> {
        match &self.beta {
            Some(b) if b.len() != self.d => Err(Error::DimensionMismatch { expected: self.d, got: b.len() }),
            Some(b) => Ok(DVector::from_column_slice(b)),
            None => Ok(DVector::from_element(self.d, 1.0 / (self.d as f64).sqrt())),
        }
    }

    /// Builds the context sampler and runs the estimate.
    pub fn run(&self) -> Result<BalancedReport> {
        let spec = self.dist.spec(self.d, self.arms, self.rho2, None);
        let sampler = ContextSampler::new(&spec, &mut stream_rng(self.seed, u64::MAX))?;
        let mut report =
            estimate_balanced_covariance_constant(&sampler, &self.beta()?, self.samples, self.batches, self.seed, self.jobs)?;
        report.config = Some(self.clone());
        Ok(report)
    }
}

/// Generalized eigenvalue of one (ordering, middle rank) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct BalancedRow {
    /// Arms from lowest to highest score, space separated.
    pub ordering: String,
    pub rank: usize,
    pub count: usize,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct BalancedReport {
    pub estimate: f64,
    /// Standard error from the spread of per-batch estimates.
    pub se: f64,
    pub batch_estimates: Vec<f64>,
    pub samples: usize,
    pub orderings_seen: usize,
    pub notes: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<BalancedConfig>,
    pub rows: Vec<BalancedRow>,
}

/// Per-ordering sums of outer products.
#[derive(Clone)]
struct Acc {
    count: usize,
    middle: Vec<DMatrix<f64>>,
    extremes: DMatrix<f64>,
}

type Accs = BTreeMap<Vec<usize>, Acc>;

fn accumulate(source: &dyn ContextSource, beta: &DVector<f64>, n: usize, seed: u64, stream: u64) -> Accs {
    let (k, d) = (source.arms(), source.dim());
    let mut rng = stream_rng(seed, stream);
    let mut accs = Accs::new();
    for t in 0..n {
        let ctx = source.sample_context_set(t + 1, &mut rng);
        let scores = ctx.scores(beta);
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(a.cmp(&b)));
        let acc = accs.entry(order.clone()).or_insert_with(|| Acc {
            count: 0,
            middle: vec![DMatrix::zeros(d, d); k - 2],
            extremes: DMatrix::zeros(d, d),
        });
        acc.count += 1;
        for (r, &arm) in order.iter().enumerate() {
            let x = ctx.arm(arm);
            if r == 0 || r == k - 1 {
                acc.extremes.ger(1.0, &x, &x, 1.0);
            } else {
                acc.middle[r - 1].ger(1.0, &x, &x, 1.0);
            }
        }
    }
    accs
}

fn merge(into: &mut Accs, from: &Accs) {
    for (key, acc) in from {
        match into.get_mut(key) {
            Some(a) => {
                a.count += acc.count;
                a.extremes += &acc.extremes;
                for (m, n) in a.middle.iter_mut().zip(&acc.middle) {
                    *m += n;
                }
            }
            None => {
                into.insert(key.clone(), acc.clone());
            }
        }
    }
}

/// Largest `λ` with `A v = λ B v`, or `None` when `B` is not positive definite.
pub(super) fn generalized_max_eigenvalue(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Option<f64> {
    let l = b.clone().cholesky()?.unpack();
    let l_inv = l.solve_lower_triangular(&DMatrix::identity(b.nrows(), b.nrows()))?;
    let mut c = &l_inv * a * l_inv.transpose();
    c = (&c + c.transpose()) * 0.5;
    Some(c.symmetric_eigen().eigenvalues.max())
}

fn evaluate(accs: &Accs, d: usize, notes: Option<&mut Vec<String>>) -> (f64, Vec<BalancedRow>) {
    let mut rows = Vec::new();
    let mut skipped = Vec::new();
    for (order, acc) in accs {
        let label = order.iter().map(|a| a.to_string()).collect::<Vec<_>>().join(" ");
        if acc.count < d {
            skipped.push(format!("ordering [{label}] skipped: {} samples", acc.count));
            continue;
        }
        for (r, m) in acc.middle.iter().enumerate() {
            match generalized_max_eigenvalue(m, &acc.extremes) {
                Some(ratio) => rows.push(BalancedRow { ordering: label.clone(), rank: r + 2, count: acc.count, ratio }),
                None => skipped.push(format!("ordering [{label}] skipped: extreme-arm matrix is singular")),
            }
        }
    }
    if let Some(n) = notes {
        skipped.dedup();
        n.extend(skipped);
    }
    let est = rows.iter().map(|r| r.ratio).fold(f64::NEG_INFINITY, f64::max);
    (est, rows)
}

pub fn estimate_balanced_covariance_constant(
    source: &dyn ContextSource,
    beta: &DVector<f64>,
    samples: usize,
    batches: usize,
    seed: u64,
    jobs: Option<usize>,
) -> Result<BalancedReport> {
    let (k, d) = (source.arms(), source.dim());
    if k < 3 {
        return Err(Error::InvalidInput(format!("balanced covariance needs at least 3 arms, got {k}")));
    }
    if beta.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: beta.len() });
    }
    if batches == 0 || samples < batches {
        return Err(Error::Config("need at least one sample per batch".into()));
    }
    let per_batch: Vec<Accs> = super::pool(jobs)?.install(|| {
        (0..batches)
            .into_par_iter()
            .map(|b| {
                let n = samples / batches + usize::from(b < samples % batches);
                accumulate(source, beta, n, seed, b as u64)
            })
            .collect()
    });
    let mut total = Accs::new();
    for acc in &per_batch {
        merge(&mut total, acc);
    }
    let mut notes = Vec::new();
    let (estimate, rows) = evaluate(&total, d, Some(&mut notes));
    let batch_estimates: Vec<f64> =
        per_batch.iter().map(|a| evaluate(a, d, None).0).filter(|v| v.is_finite()).collect();
    let se = if batch_estimates.len() > 1 {
        mean_std(&batch_estimates).1 / (batch_estimates.len() as f64).sqrt()
    } else {
        f64::NAN
    };
    if !estimate.is_finite() {
        notes.push("no ordering had enough samples for an estimate".into());
    }
    Ok(BalancedReport {
        estimate,
        se,
        batch_estimates,
        samples,
        orderings_seen: total.len(),
        notes,
        config: None,
        rows,
    })
}
