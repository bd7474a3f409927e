//! Monte Carlo checks of the estimation lemmas on small instances.
//!
//! Every check is a read-only observer: it may replay a policy, but nothing
//! it computes flows back into the policy's decisions. Reports carry their
//! sample counts and standard errors and are deterministic given the seed.

mod balanced;
mod bernstein;
mod concentration;
mod cone;
mod oracle;

#[cfg(test)]
mod tests;

pub use balanced::{estimate_balanced_covariance_constant, BalancedConfig, BalancedReport, BalancedRow};
pub use bernstein::{
    bernstein_threshold, check_bernstein_adapted, BernsteinConfig, BernsteinReport, BernsteinRow, MartingaleKind,
};
pub use concentration::{
    check_matrix_concentration, conditional_gram, ConcentrationCheckpoint, ConcentrationConfig, ConcentrationPolicy,
    ConcentrationReport,
};
pub use cone::{
    compatibility_constant, in_cone, restricted_eigenvalue, ConeEstimate, ConeOptions, ConeSample, CONE_RATIO,
};
pub use oracle::{
    check_oracle_inequality, lemma_lambda, oracle_bound_l1, oracle_bound_l2, OracleCheckpoint, OracleIneqConfig,
    OracleIneqReport,
};

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};

/// Writes `<stem>.toml` (the full report) and `<stem>.csv` (one line per
/// row) into `dir`.
pub fn write_report<R: Serialize, Row: Serialize>(
    dir: &Path,
    stem: &str,
    report: &R,
    rows: &[Row],
) -> Result<[PathBuf; 2]> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let toml_path = dir.join(format!("{stem}.toml"));
    let csv_path = dir.join(format!("{stem}.csv"));
    let text = toml::to_string(report).map_err(|e| Error::Serialization(e.to_string()))?;
    std::fs::write(&toml_path, text).map_err(|e| Error::io(&toml_path, e))?;
    let mut w = csv::Writer::from_path(&csv_path).map_err(|e| Error::csv(&csv_path, e))?;
    for row in rows {
        w.serialize(row).map_err(|e| Error::csv(&csv_path, e))?;
    }
    w.flush().map_err(|e| Error::io(&csv_path, e))?;
    Ok([toml_path, csv_path])
}

fn pool(jobs: Option<usize>) -> Result<rayon::ThreadPool> {
    if jobs == Some(0) {
        return Err(Error::Config("jobs must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))
}

/// Max absolute entry.
fn max_abs(m: &nalgebra::DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |acc, v| acc.max(v.abs()))
}

/// Least-squares slope of `ln y` against `ln x`.
fn log_log_slope(points: &[(f64, f64)]) -> f64 {
    let pts: Vec<(f64, f64)> = points.iter().filter(|(x, y)| *x > 0.0 && *y > 0.0).map(|(x, y)| (x.ln(), y.ln())).collect();
    let n = pts.len() as f64;
    if pts.len() < 2 {
        return f64::NAN;
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}
