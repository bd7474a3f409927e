use serde::{Deserialize, Serialize};

/// Inverse link of the reward GLM.
///
/// Each variant carries the mean function `mu`, its derivative `mu_dot` and
/// the cumulant `m` with `m' = mu`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum LinkKind {
    #[default]
    Linear,
    Logistic,
}

impl LinkKind {
    #[inline]
    pub fn mu(self, z: f64) -> f64 {
        match self {
            LinkKind::Linear => z,
            LinkKind::Logistic => sigmoid(z),
        }
    }

    #[inline]
    pub fn mu_dot(self, z: f64) -> f64 {
        match self {
            LinkKind::Linear => 1.0,
            LinkKind::Logistic => {
                let p = sigmoid(z);
                p * (1.0 - p)
            }
        }
    }

    /// Cumulant `m(z)`: `z²/2` for the linear link, `log(1 + e^z)` for the logistic link.
    #[inline]
    pub fn cumulant(self, z: f64) -> f64 {
        match self {
            LinkKind::Linear => 0.5 * z * z,
            LinkKind::Logistic => z.max(0.0) + (-z.abs()).exp().ln_1p(),
        }
    }

    /// Smallest value of `mu_dot` over `[-radius, radius]`.
    pub fn min_slope_on(self, radius: f64) -> f64 {
        match self {
            LinkKind::Linear => 1.0,
            // mu_dot is even and decreasing in |z|
            LinkKind::Logistic => self.mu_dot(radius.abs()),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            LinkKind::Linear => "linear",
            LinkKind::Logistic => "logistic",
        }
    }
}

impl std::str::FromStr for LinkKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "linear" => Ok(LinkKind::Linear),
            "logistic" => Ok(LinkKind::Logistic),
            other => Err(format!("unknown link `{other}` (expected linear or logistic)")),
        }
    }
}

impl std::fmt::Display for LinkKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[inline]
fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const LINKS: [LinkKind; 2] = [LinkKind::Linear, LinkKind::Logistic];

    #[test]
    fn closed_forms() {
        assert_eq!(LinkKind::Linear.mu(1.5), 1.5);
        assert_eq!(LinkKind::Linear.cumulant(2.0), 2.0);
        assert_eq!(LinkKind::Linear.mu_dot(-4.0), 1.0);
        assert_eq!(LinkKind::Logistic.mu(0.0), 0.5);
        assert!((LinkKind::Logistic.cumulant(0.0) - 2f64.ln()).abs() < 1e-15);
        assert_eq!(LinkKind::Logistic.mu_dot(0.0), 0.25);
    }

    #[test]
    fn cumulant_derivative_is_mean_function() {
        let h = 1e-5;
        for link in LINKS {
            for i in -40..=40 {
                let z = i as f64 * 0.25;
                let fd = (link.cumulant(z + h) - link.cumulant(z - h)) / (2.0 * h);
                assert!((fd - link.mu(z)).abs() < 1e-8, "{link} z={z}");
                let fd2 = (link.mu(z + h) - link.mu(z - h)) / (2.0 * h);
                assert!((fd2 - link.mu_dot(z)).abs() < 1e-8, "{link} z={z}");
            }
        }
    }

    #[test]
    fn mean_function_strictly_increasing() {
        for link in LINKS {
            let mut prev = link.mu(-20.0);
            for i in -199..=200 {
                let z = i as f64 * 0.1;
                let cur = link.mu(z);
                assert!(cur > prev);
                prev = cur;
            }
        }
    }

    #[test]
    fn logistic_slope_bounded() {
        for i in -100..=100 {
            let s = LinkKind::Logistic.mu_dot(i as f64 * 0.3);
            assert!(s > 0.0 && s <= 0.25);
        }
        assert!(LinkKind::Logistic.cumulant(800.0).is_finite());
        assert!(LinkKind::Logistic.cumulant(-800.0) >= 0.0);
    }

    #[test]
    fn parse_roundtrip() {
        for link in LINKS {
            assert_eq!(link.as_str().parse::<LinkKind>().unwrap(), link);
        }
        assert!("probit".parse::<LinkKind>().is_err());
    }
}
