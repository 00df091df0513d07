//! Run configuration read by `rcs optimize --config`.

use std::path::{Path, PathBuf};

use rcs_core::sphere::DEFAULT_CAP;
use rcs_core::{OptimizationProblem, QuadratureConfig};
use serde::Deserialize;

use crate::failure::Failure;

fn default_alpha() -> f64 {
    0.05
}

fn default_k() -> f64 {
    DEFAULT_CAP
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub p: u32,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_k")]
    pub k: f64,
    /// Knot positions; the default rule is used when absent.
    #[serde(default)]
    pub knots: Option<Vec<f64>>,
    #[serde(default)]
    pub gamma_grid: Option<Vec<f64>>,
    #[serde(default)]
    pub rel_tol: Option<f64>,
    #[serde(default)]
    pub value_floor: Option<f64>,
    #[serde(default)]
    pub coverage_slack: Option<f64>,
    #[serde(default)]
    pub max_iterations: Option<usize>,
    /// When set, `optimize` checks its result by simulation at `γ = 0` and at
    /// the sweep minimum.
    #[serde(default)]
    pub mc_samples: Option<u64>,
    #[serde(default)]
    pub mc_seed: Option<u64>,
    /// Radius file written by `optimize` when `--out` is not given.
    #[serde(default)]
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn read(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::Input(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| Failure::Input(format!("cannot parse {}: {e}", path.display())))
    }

    pub fn problem(&self) -> Result<OptimizationProblem, Failure> {
        let mut pr = OptimizationProblem::with_cap(self.p, self.alpha, self.k)?;
        if let Some(knots) = &self.knots {
            pr.knots = knots.clone();
        }
        if let Some(grid) = &self.gamma_grid {
            pr.gamma_grid = grid.clone();
        }
        if let Some(t) = self.rel_tol {
            pr.quadrature = QuadratureConfig::with_rel_tol(t);
        }
        if let Some(v) = self.value_floor {
            pr.value_floor = v;
        }
        if let Some(s) = self.coverage_slack {
            pr.coverage_slack = s;
        }
        if let Some(n) = self.max_iterations {
            pr.max_iterations = n;
        }
        pr.validate()?;
        Ok(pr)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_uses_defaults() {
        let c: RunConfig = serde_json::from_str(r#"{"p": 3}"#).unwrap();
        let pr = c.problem().unwrap();
        assert_eq!(pr, OptimizationProblem::new(3, 0.05).unwrap());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(serde_json::from_str::<RunConfig>(r#"{"p": 3, "alpah": 0.1}"#).is_err());
    }

    #[test]
    fn invalid_values_are_input_errors() {
        let c: RunConfig = serde_json::from_str(r#"{"p": 4}"#).unwrap();
        assert!(matches!(c.problem(), Err(Failure::Input(_))));
        let c: RunConfig = serde_json::from_str(r#"{"p": 3, "gamma_grid": [3.0, 1.0]}"#).unwrap();
        assert!(matches!(c.problem(), Err(Failure::Input(_))));
    }
}
