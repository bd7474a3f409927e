use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::contexts::{DistributionKind, DistributionSpec};
use crate::error::{Error, Result};
use crate::estimator::{LinkKind, SolverOptions};
use crate::policies::{DrLassoTuning, LassoBanditTuning, PolicyKind, PolicySetup};

/// Context generator family selected on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ContextFamily {
    #[default]
    Gaussian,
    Uniform,
    Elliptical,
}

impl std::str::FromStr for ContextFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(ContextFamily::Gaussian),
            "uniform" => Ok(ContextFamily::Uniform),
            "elliptical" => Ok(ContextFamily::Elliptical),
            other => Err(Error::Config(format!("unknown distribution `{other}`"))),
        }
    }
}

impl ContextFamily {
    pub fn spec(self, d: usize, arms: usize, rho2: f64, rank: Option<usize>) -> DistributionSpec {
        let kind = match self {
            ContextFamily::Gaussian => DistributionKind::GaussianEquicorrelated { rho2 },
            ContextFamily::Uniform => DistributionKind::UniformHypercube,
            ContextFamily::Elliptical => DistributionKind::Elliptical { rank },
        };
        DistributionSpec::new(kind, d, arms)
    }
}

/// One experiment grid point. Field names match the `simulate` flags so a
/// TOML file with the same keys can stand in for the command line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct ExperimentConfig {
    pub d: usize,
    pub arms: usize,
    pub s0: usize,
    pub horizon: usize,
    pub runs: usize,
    #[serde(default)]
    pub dist: ContextFamily,
    #[serde(default)]
    pub rho2: f64,
    /// Rank of the elliptical mixing matrix; defaults to `d`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rank: Option<usize>,
    #[serde(default)]
    pub link: LinkKind,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    pub policies: Vec<PolicyKind>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    /// Worker threads; `None` uses every available core.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jobs: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clip_xmax: Option<f64>,
    /// Sparsity handed to the baselines' tuning rules; defaults to `s0`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline_s0: Option<usize>,
    /// Defaults to `2 σ x_max` with `x_max` the clip radius, or 1 unclipped.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub refit_growth: Option<f64>,
    /// Draw one β* for all runs instead of one per run.
    #[serde(default)]
    pub shared_beta: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lasso_bandit: Option<LassoBanditTuning>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dr_lasso: Option<DrLassoTuning>,
}

fn default_sigma() -> f64 {
    1.0
}

impl ExperimentConfig {
    /// Defaults for everything but the problem size and policy list.
    pub fn new(d: usize, arms: usize, s0: usize, horizon: usize, runs: usize, policies: Vec<PolicyKind>) -> Self {
        Self {
            d,
            arms,
            s0,
            horizon,
            runs,
            dist: ContextFamily::Gaussian,
            rho2: 0.0,
            rank: None,
            link: LinkKind::Linear,
            sigma: 1.0,
            policies,
            seed: 0,
            out: None,
            jobs: None,
            clip_xmax: None,
            baseline_s0: None,
            lambda0: None,
            refit_growth: None,
            shared_beta: false,
            lasso_bandit: None,
            dr_lasso: None,
        }
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Serialization(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.d == 0 || self.arms == 0 {
            return fail("d and arms must be positive".into());
        }
        if self.s0 > self.d {
            return fail(format!("s0 = {} exceeds d = {}", self.s0, self.d));
        }
        if self.horizon == 0 || self.runs == 0 {
            return fail("horizon and runs must be at least 1".into());
        }
        if self.policies.is_empty() {
            return fail("policy list is empty".into());
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return fail(format!("sigma must be nonnegative, got {}", self.sigma));
        }
        if self.jobs == Some(0) {
            return fail("jobs must be at least 1".into());
        }
        if let Some(s) = self.baseline_s0 {
            if s == 0 || s > self.d {
                return fail(format!("baseline-s0 must lie in 1..={}, got {s}", self.d));
            }
        }
        self.distribution()?.validate()?;
        self.policy_setup()?;
        Ok(())
    }

    pub fn distribution(&self) -> Result<DistributionSpec> {
        let mut spec = self.dist.spec(self.d, self.arms, self.rho2, self.rank);
        spec.clip_to_xmax = self.clip_xmax;
        Ok(spec)
    }

    /// `x_max` used by the default penalty scale.
    pub fn x_max(&self) -> f64 {
        self.clip_xmax.unwrap_or(1.0)
    }

    pub fn lambda0(&self) -> f64 {
        self.lambda0.unwrap_or(2.0 * self.sigma * self.x_max())
    }

    pub fn policy_setup(&self) -> Result<PolicySetup> {
        let s = self.baseline_s0.unwrap_or(self.s0).max(1);
        let lasso_bandit = self.lasso_bandit.unwrap_or_else(|| LassoBanditTuning::for_sparsity(s, self.arms));
        let dr_lasso = self.dr_lasso.unwrap_or_else(|| DrLassoTuning::for_sparsity(s, self.arms));
        lasso_bandit.validate()?;
        dr_lasso.validate()?;
        let lambda0 = self.lambda0();
        if self.policies.contains(&PolicyKind::SaLasso) && !(lambda0 > 0.0 && lambda0.is_finite()) {
            return Err(Error::Config(format!(
                "lambda0 must be positive, got {lambda0}; set it explicitly when sigma = 0"
            )));
        }
        if let Some(g) = self.refit_growth {
            if !(g > 1.0) {
                return Err(Error::Config(format!("refit growth factor must exceed 1, got {g}")));
            }
        }
        Ok(PolicySetup {
            d: self.d,
            arms: self.arms,
            link: self.link,
            lambda0,
            refit_growth: self.refit_growth,
            lasso_bandit,
            dr_lasso,
            solver: SolverOptions::default(),
        })
    }
}
