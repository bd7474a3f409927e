use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{summarize, ExperimentConfig, ExperimentResult, PolicySummary, RegretTrace};
use crate::error::{Error, Result};

pub const TRACES_FILE: &str = "traces.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const MANIFEST_FILE: &str = "manifest.toml";

const TRACE_HEADER: [&str; 5] = ["run_id", "policy", "t", "inst_regret", "cum_regret"];
const SUMMARY_HEADER: [&str; 4] = ["policy", "t", "mean_cum_regret", "std_cum_regret"];

/// Crate version, suffixed with `git describe` output when the build saw a
/// git checkout.
pub fn version() -> String {
    match option_env!("SPARSE_BANDIT_GIT_DESCRIBE") {
        Some(g) if !g.is_empty() => format!("{} ({g})", env!("CARGO_PKG_VERSION")),
        _ => env!("CARGO_PKG_VERSION").to_string(),
    }
}

/// Sidecar describing how a result directory was produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct Manifest {
    pub version: String,
    pub wall_time_secs: f64,
    pub trace_rows: usize,
    pub solver_warnings: BTreeMap<String, usize>,
    pub config: ExperimentConfig,
}

/// One line of `summary.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub policy: String,
    pub t: usize,
    pub mean_cum_regret: f64,
    pub std_cum_regret: f64,
}

pub fn summary_rows(summaries: &[PolicySummary]) -> Vec<SummaryRow> {
    summaries
        .iter()
        .flat_map(|s| {
            (0..s.mean.len()).map(move |i| SummaryRow {
                policy: s.policy.to_string(),
                t: i + 1,
                mean_cum_regret: s.mean[i],
                std_cum_regret: s.std[i],
            })
        })
        .collect()
}

/// Writes `traces.csv`, `summary.csv` and `manifest.toml` into `dir`,
/// creating it if needed. Returns the three paths in that order.
pub fn write_results(result: &ExperimentResult, dir: &Path) -> Result<[PathBuf; 3]> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let traces = dir.join(TRACES_FILE);
    let summary = dir.join(SUMMARY_FILE);
    let manifest = dir.join(MANIFEST_FILE);
    write_traces(&result.traces, &traces)?;
    write_summary(&summarize(&result.traces), &summary)?;

    let record = Manifest {
        version: version(),
        wall_time_secs: result.wall_time_secs,
        trace_rows: result.traces.iter().map(|t| t.horizon()).sum(),
        solver_warnings: result.solver_warnings.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
        config: result.config.clone(),
    };
    let text = toml::to_string(&record).map_err(|e| Error::Serialization(e.to_string()))?;
    fs::write(&manifest, text).map_err(|e| Error::io(&manifest, e))?;
    Ok([traces, summary, manifest])
}

pub fn write_traces(traces: &[RegretTrace], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
    w.write_record(TRACE_HEADER).map_err(|e| Error::csv(path, e))?;
    for tr in traces {
        let (run, policy) = (tr.run_id.to_string(), tr.policy.as_str());
        for (i, (r, c)) in tr.inst_regret.iter().zip(&tr.cum_regret).enumerate() {
            w.write_record([run.as_str(), policy, &(i + 1).to_string(), &r.to_string(), &c.to_string()])
                .map_err(|e| Error::csv(path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_summary(summaries: &[PolicySummary], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
    w.write_record(SUMMARY_HEADER).map_err(|e| Error::csv(path, e))?;
    for row in summary_rows(summaries) {
        w.write_record([
            row.policy.as_str(),
            &row.t.to_string(),
            &row.mean_cum_regret.to_string(),
            &row.std_cum_regret.to_string(),
        ])
        .map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_summary(path: &Path) -> Result<Vec<SummaryRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    r.deserialize().map(|row| row.map_err(|e| Error::csv(path, e))).collect()
}
