//! Experiment configuration: one JSON document drives every subcommand.
//! Set-defining fields are exact rational strings; tuning knobs are plain
//! numbers.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::construction::{normalize_params, ParamSpec, RawParamSpec};
use crate::error::{Error, Result};
use crate::experiment::ExperimentSettings;
use crate::qsmap::QsMap;
use crate::rational::{parse_rat, rat_to_f64};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScalesSpec {
    /// The construction scales `delta_1 > delta_2 > ...`.
    Named(String),
    /// Explicit rational scale strings.
    List(Vec<String>),
}

impl Default for ScalesSpec {
    fn default() -> Self {
        ScalesSpec::Named("construction".into())
    }
}

fn default_precision() -> u32 {
    50
}
fn default_depth() -> usize {
    12
}
fn default_d_fraction() -> f64 {
    0.5
}
fn default_seed() -> u64 {
    17
}
fn default_k_max() -> usize {
    30
}
fn default_window() -> usize {
    10
}
fn default_m_sweep_depth() -> u32 {
    12
}
fn default_m_margin() -> f64 {
    1.05
}
fn default_samples() -> usize {
    500
}
fn default_chains() -> usize {
    32
}
fn default_c_cap() -> f64 {
    16.0
}
fn default_hypothesis_threshold() -> f64 {
    0.9
}
fn default_mlema_p() -> f64 {
    0.5
}
fn default_mlema_eps() -> f64 {
    0.1
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Inline parameter spec, or `params_file` pointing at one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<RawParamSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params_file: Option<String>,
    /// Map spec in the catalog JSON form; identity when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub map: Option<serde_json::Value>,
    #[serde(default = "default_depth")]
    pub depth: usize,
    /// Working precision in decimal digits.
    #[serde(default = "default_precision")]
    pub precision: u32,
    #[serde(default = "default_d_fraction")]
    pub d_fraction: f64,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub scales: ScalesSpec,
    #[serde(default = "default_k_max")]
    pub k_max: usize,
    #[serde(default = "default_window")]
    pub window: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measure_depth: Option<usize>,
    #[serde(default = "default_m_sweep_depth")]
    pub m_sweep_depth: u32,
    #[serde(default = "default_m_margin")]
    pub m_margin: f64,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_chains")]
    pub chains: usize,
    #[serde(default = "default_c_cap")]
    pub c_cap: f64,
    #[serde(default = "default_hypothesis_threshold")]
    pub hypothesis_threshold: f64,
    #[serde(default = "default_mlema_p")]
    pub mlema_p: f64,
    #[serde(default = "default_mlema_eps")]
    pub mlema_eps: f64,
    /// Output directory; the CLI flag takes precedence.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
}

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let cfg: ExperimentConfig = serde_json::from_str(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.depth < 1 {
            return Err(Error::Config("depth must be at least 1".into()));
        }
        if self.precision < 15 {
            return Err(Error::Config("precision must be at least 15 digits".into()));
        }
        if !(self.d_fraction > 0.0 && self.d_fraction < 1.0) {
            return Err(Error::Config(format!(
                "d_fraction {} outside (0,1)",
                self.d_fraction
            )));
        }
        if self.params.is_none() && self.params_file.is_none() {
            return Err(Error::Config(
                "either params or params_file is required".into(),
            ));
        }
        Ok(())
    }

    /// Resolves the parameter spec, following `params_file` when needed, and
    /// validates it down to the configured depth.
    pub fn load_params(&self, base: Option<&Path>) -> Result<ParamSpec> {
        let raw = if let Some(raw) = &self.params {
            raw.clone()
        } else {
            let rel = self.params_file.as_ref().expect("validated");
            let path = match base {
                Some(b) => b.join(rel),
                None => rel.into(),
            };
            serde_json::from_str(&std::fs::read_to_string(path)?)?
        };
        normalize_params(&raw, self.depth.max(self.k_max + 1))
    }

    /// The configured map; identity when none is given.
    pub fn load_map(&self) -> Result<QsMap> {
        match &self.map {
            Some(v) => QsMap::from_json_value(v),
            None => Ok(QsMap::Identity),
        }
    }

    /// Explicit scales as f64, or `None` for the construction scales.
    pub fn resolve_scales(&self) -> Result<Option<Vec<f64>>> {
        match &self.scales {
            ScalesSpec::Named(name) if name == "construction" => Ok(None),
            ScalesSpec::Named(other) => Err(Error::Config(format!(
                "unknown scales rule {other:?}, expected \"construction\" or a list"
            ))),
            ScalesSpec::List(list) => {
                let scales = list
                    .iter()
                    .map(|s| parse_rat(s).map(|r| rat_to_f64(&r)))
                    .collect::<Result<Vec<_>>>()?;
                Ok(Some(scales))
            }
        }
    }

    pub fn experiment_settings(&self) -> Result<ExperimentSettings> {
        Ok(ExperimentSettings {
            depth: self.depth,
            digits: self.precision,
            d_fraction: self.d_fraction,
            seed: self.seed,
            k_max: self.k_max,
            window: self.window,
            measure_depth: self.measure_depth.unwrap_or_else(|| self.depth.min(12)),
            m_sweep_depth: self.m_sweep_depth,
            m_margin: self.m_margin,
            window_samples: self.samples,
            chain_samples: self.chains,
            c_cap: self.c_cap,
            scales: self.resolve_scales()?,
            hypothesis_threshold: self.hypothesis_threshold,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_parses_with_defaults() {
        let cfg: ExperimentConfig = serde_json::from_str(
            r#"{
                "params": {
                    "branching": {"rule": "constant", "params": {"value": 2}},
                    "ratio": {"rule": "constant", "params": {"value": "1/3"}},
                    "gaps": {"rule": "uniform"}
                }
            }"#,
        )
        .unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.precision, 50);
        assert_eq!(cfg.depth, 12);
        let params = cfg.load_params(None).unwrap();
        assert_eq!(params, ParamSpec::middle_thirds());
        assert_eq!(cfg.load_map().unwrap(), QsMap::Identity);
        assert!(cfg.resolve_scales().unwrap().is_none());
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let cfg: ExperimentConfig = serde_json::from_str(r#"{"depth": 0}"#).unwrap();
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        let cfg: ExperimentConfig =
            serde_json::from_str(r#"{"precision": 5, "depth": 3}"#).unwrap();
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        let cfg: ExperimentConfig =
            serde_json::from_str(r#"{"d_fraction": 1.5, "depth": 3}"#).unwrap();
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn explicit_scales_parse_exactly() {
        let cfg: ExperimentConfig = serde_json::from_str(
            r#"{
                "params": {"branching": [2], "ratio": ["1/3"], "gaps": {"rule": "uniform"}},
                "depth": 1,
                "k_max": 0,
                "scales": ["1/3", "1/9", "1/27"]
            }"#,
        )
        .unwrap();
        let scales = cfg.resolve_scales().unwrap().unwrap();
        assert_eq!(scales, vec![1.0 / 3.0, 1.0 / 9.0, 1.0 / 27.0]);
        let bad: ExperimentConfig = serde_json::from_str(
            r#"{"params": {"branching": [2], "ratio": ["1/3"], "gaps": {"rule": "uniform"}},
                "scales": "dyadic"}"#,
        )
        .unwrap();
        assert!(bad.resolve_scales().is_err());
    }
}
