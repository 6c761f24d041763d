//! Run manifest: resolved settings with their sources, config hash, seed,
//! version, worker count, timing and per-criterion outcomes.

use std::collections::BTreeMap;

use serde::Serialize;

use super::config::{ExperimentConfig, Source};
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriterionOutcome {
    pub name: String,
    pub pass: bool,
}

impl CriterionOutcome {
    pub fn new(name: impl Into<String>, pass: bool) -> Self {
        Self { name: name.into(), pass }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SettingRecord {
    pub value: serde_json::Value,
    pub source: Source,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub experiment: &'static str,
    pub config_hash: String,
    pub seed: u64,
    pub workers: usize,
    /// Wall-clock seconds; the only field that varies between identical runs.
    pub duration_seconds: f64,
    pub settings: BTreeMap<String, SettingRecord>,
    pub outputs: Vec<String>,
    pub criteria: Vec<CriterionOutcome>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub summary: Option<serde_json::Value>,
}

impl Manifest {
    pub fn new(
        cfg: &ExperimentConfig,
        workers: usize,
        duration_seconds: f64,
        outputs: Vec<String>,
        criteria: Vec<CriterionOutcome>,
    ) -> Result<Self> {
        let values = serde_json::to_value(cfg)?;
        let settings = cfg
            .sources
            .iter()
            .map(|(name, source)| {
                let value = values.get(*name).cloned().unwrap_or(serde_json::Value::Null);
                (name.to_string(), SettingRecord { value, source: *source })
            })
            .collect();
        Ok(Self {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            experiment: cfg.experiment.name(),
            config_hash: cfg.hash()?,
            seed: cfg.seed,
            workers,
            duration_seconds,
            settings,
            outputs,
            criteria,
            summary: None,
        })
    }

    pub fn all_pass(&self) -> bool {
        self.criteria.iter().all(|c| c.pass)
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }
}
