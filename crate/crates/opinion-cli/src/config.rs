use crate::Failure;
use opinion::paths::{Endpoint, PathName};
use opinion::ModelSpec;
use serde::Deserialize;
use std::path::Path;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TubeConfig {
    pub path: String,
    /// Energy window above each path state, `"p/q"` or an integer.
    pub window: serde_json::Value,
    #[serde(default = "default_state_cap")]
    pub state_cap: usize,
}

fn default_state_cap() -> usize {
    2_000_000
}

/// One experiment, read from a JSON file. Command-line flags override the
/// seed.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub spec: Option<ModelSpec>,
    pub seed: Option<u64>,
    #[serde(default)]
    pub betas: Vec<f64>,
    pub replicas: Option<u64>,
    pub step_cap: Option<u64>,
    pub start: Option<String>,
    pub target: Option<String>,
    #[serde(default)]
    pub gates: bool,
    #[serde(default)]
    pub paths: Vec<String>,
    #[serde(default)]
    pub sides: Vec<usize>,
    pub max_area: Option<usize>,
    pub tube: Option<TubeConfig>,
    #[serde(default)]
    pub criteria: Vec<String>,
    pub ks_threshold: Option<f64>,
}

impl ExperimentConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, Failure> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::spec(format!("cannot read {}: {e}", path.display())))?;
        let cfg: ExperimentConfig = serde_json::from_str(&text)
            .map_err(|e| Failure::spec(format!("invalid config {}: {e}", path.display())))?;
        cfg.check()?;
        Ok(cfg)
    }

    fn check(&self) -> Result<(), Failure> {
        if let Some(spec) = &self.spec {
            spec.validate().map_err(|e| Failure::spec(e.to_string()))?;
        }
        if let Some(b) = self.betas.iter().find(|b| !(**b > 0.0) || !b.is_finite()) {
            return Err(Failure::spec(format!("beta must be positive, got {b}")));
        }
        if self.replicas == Some(0) || self.step_cap == Some(0) || self.max_area == Some(0) {
            return Err(Failure::spec(
                "replicas, step_cap and max_area must be positive",
            ));
        }
        if self.sides.contains(&0) {
            return Err(Failure::spec("torus sides must be positive"));
        }
        if let Some(t) = self.ks_threshold {
            if !(t > 0.0 && t < 1.0) {
                return Err(Failure::spec(format!(
                    "ks_threshold must lie in (0, 1), got {t}"
                )));
            }
        }
        Ok(())
    }

    pub fn spec(&self) -> Result<ModelSpec, Failure> {
        self.spec
            .clone()
            .ok_or_else(|| Failure::spec("config has no spec"))
    }

    pub fn endpoint(text: &str) -> Result<Endpoint, Failure> {
        match text {
            "-1" | "minus" => Ok(Endpoint::AllMinus),
            "+1" | "plus" => Ok(Endpoint::AllPlus),
            "sigma_A" | "stable_family" => Ok(Endpoint::StableFamily),
            other => Err(Failure::spec(format!(
                "unknown endpoint {other:?}, expected -1, +1 or sigma_A"
            ))),
        }
    }

    pub fn path_names(&self) -> Result<Vec<PathName>, Failure> {
        self.paths
            .iter()
            .map(|p| {
                p.parse()
                    .map_err(|e: opinion::ModelError| Failure::spec(e.to_string()))
            })
            .collect()
    }
}
