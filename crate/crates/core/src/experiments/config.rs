//! Experiment configuration: JSON file fields, command-line overrides and
//! per-experiment defaults, resolved with precedence flag > file > default.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::datagen::{BetaSpec, FeatureFamily, ModelSpec};
use crate::error::{Error, Result};
use crate::estimators::Regime;
use crate::missingness::{MaskDesign, MnarDesign};
use crate::montecarlo::ReplicationPlan;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Figure1,
    SgdSweep,
    Mnar,
    Validate,
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Figure1 => "figure1",
            Experiment::SgdSweep => "sgd-sweep",
            Experiment::Mnar => "mnar",
            Experiment::Validate => "validate",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmitFormat {
    #[default]
    Csv,
    Json,
}

/// Optional settings, as read from a config file or from flags.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    pub seed: Option<u64>,
    pub replicates: Option<usize>,
    pub p: Option<usize>,
    pub d: Option<usize>,
    pub rho: Option<f64>,
    pub sigma: Option<f64>,
    pub beta: Option<BetaSpec>,
    pub d_grid: Option<Vec<usize>>,
    pub n_grid: Option<Vec<usize>>,
    pub gamma_mult: Option<f64>,
    pub regime: Option<Regime>,
    pub kappa: Option<f64>,
    pub patterns_per_weight: Option<usize>,
    pub n_train: Option<usize>,
    pub n_test: Option<usize>,
    pub mnar_intercept: Option<f64>,
    pub mnar_slope_norm: Option<f64>,
    pub emit_format: Option<EmitFormat>,
}

impl Settings {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("invalid config {}: {e}", path.display())))
    }
}

/// Where a resolved setting came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Flag,
    File,
    Default,
}

/// Fully resolved experiment configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub seed: u64,
    pub replicates: usize,
    pub p: usize,
    pub d: usize,
    pub rho: f64,
    pub sigma: f64,
    pub beta: BetaSpec,
    pub d_grid: Vec<usize>,
    pub n_grid: Vec<usize>,
    pub gamma_mult: f64,
    pub regime: Regime,
    pub kappa: f64,
    pub patterns_per_weight: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub mnar_intercept: f64,
    pub mnar_slope_norm: f64,
    pub emit_format: EmitFormat,
    #[serde(skip)]
    pub sources: BTreeMap<&'static str, Source>,
}

pub const DEFAULT_SEED: u64 = 20_240_501;

fn figure1_grid() -> Vec<usize> {
    (1..20).map(|k| 5 * k).chain((10..=40).map(|k| 10 * k)).collect()
}

fn defaults(experiment: Experiment) -> ExperimentConfig {
    let base = ExperimentConfig {
        experiment,
        seed: DEFAULT_SEED,
        replicates: 200,
        p: 100,
        d: 50,
        rho: 0.8,
        sigma: 0.0,
        beta: BetaSpec::Norm { norm: 1.0 },
        d_grid: figure1_grid(),
        n_grid: vec![100, 1_000, 10_000],
        gamma_mult: 1.0,
        regime: Regime::LowDim,
        kappa: 1.0,
        patterns_per_weight: 4,
        n_train: ReplicationPlan::DEFAULT_N_TRAIN,
        n_test: ReplicationPlan::DEFAULT_N_TEST,
        mnar_intercept: MnarDesign::intercept_for_rate(0.8),
        mnar_slope_norm: 1.0,
        emit_format: EmitFormat::Csv,
        sources: BTreeMap::new(),
    };
    match experiment {
        Experiment::Figure1 | Experiment::Validate => base,
        Experiment::SgdSweep => ExperimentConfig {
            replicates: 50,
            p: 1000,
            d: 5,
            d_grid: vec![5],
            ..base
        },
        Experiment::Mnar => ExperimentConfig {
            replicates: 5,
            p: 20,
            d_grid: vec![50, 200, 800],
            ..base
        },
    }
}

macro_rules! resolve_fields {
    ($cfg:ident, $flags:ident, $file:ident; $($field:ident),* $(,)?) => {
        $(
            if let Some(v) = $flags.$field.clone() {
                $cfg.$field = v;
                $cfg.sources.insert(stringify!($field), Source::Flag);
            } else if let Some(v) = $file.$field.clone() {
                $cfg.$field = v;
                $cfg.sources.insert(stringify!($field), Source::File);
            } else {
                $cfg.sources.insert(stringify!($field), Source::Default);
            }
        )*
    };
}

impl ExperimentConfig {
    /// Resolves settings with precedence flag > file > default and validates them.
    pub fn resolve(experiment: Experiment, file: &Settings, flags: &Settings) -> Result<Self> {
        let mut cfg = defaults(experiment);
        resolve_fields!(cfg, flags, file;
            seed, replicates, p, d, rho, sigma, beta, d_grid, n_grid, gamma_mult, regime, kappa,
            patterns_per_weight, n_train, n_test, mnar_intercept, mnar_slope_norm, emit_format);
        if cfg.sources["regime"] == Source::Default {
            cfg.regime = if cfg.d < cfg.p { Regime::LowDim } else { Regime::HighDim };
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn defaults(experiment: Experiment) -> Result<Self> {
        Self::resolve(experiment, &Settings::default(), &Settings::default())
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.replicates < 2 {
            return bad(format!("replicates must be at least 2, got {}", self.replicates));
        }
        if self.p == 0 || self.d == 0 {
            return bad("p and d must be positive".into());
        }
        if !(self.rho > 0.0 && self.rho <= 1.0) {
            return bad(format!("rho must lie in (0, 1], got {}", self.rho));
        }
        if !(self.sigma >= 0.0) || !self.sigma.is_finite() {
            return bad("sigma must be finite and nonnegative".into());
        }
        if !(self.gamma_mult > 0.0) || !self.gamma_mult.is_finite() {
            return bad("gamma_mult must be positive".into());
        }
        if !(self.kappa > 0.0) {
            return bad("kappa must be positive".into());
        }
        if self.patterns_per_weight == 0 {
            return bad("patterns_per_weight must be at least 1".into());
        }
        let grid_ok = |g: &[usize]| !g.is_empty() && !g.contains(&0);
        match self.experiment {
            Experiment::Figure1 | Experiment::Mnar if !grid_ok(&self.d_grid) => {
                bad("d grid must be nonempty with positive entries".into())
            }
            Experiment::SgdSweep if !grid_ok(&self.n_grid) => bad("n grid must be nonempty with positive entries".into()),
            Experiment::Mnar if self.n_train == 0 || self.n_test < 2 => {
                bad("need n_train >= 1 and n_test >= 2".into())
            }
            _ => {
                self.beta.expand(self.p).map_err(|e| Error::Config(e.to_string()))?;
                Ok(())
            }
        }
    }

    pub fn model(&self, d: usize) -> Result<ModelSpec> {
        ModelSpec::new(self.p, d, self.sigma, self.beta.expand(self.p)?, FeatureFamily::GaussianSphere)
    }

    pub fn plan(&self) -> ReplicationPlan {
        ReplicationPlan {
            replicates: self.replicates,
            base_seed: self.seed,
            n_train: self.n_train,
            n_test: self.n_test,
        }
    }

    pub fn mnar_design(&self) -> MaskDesign {
        MaskDesign::MnarLogistic(MnarDesign {
            intercept: self.mnar_intercept,
            slope_norm: self.mnar_slope_norm,
        })
    }

    /// Canonical JSON of the resolved settings (sources excluded).
    pub fn canonical_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    /// SHA-256 of [`Self::canonical_json`], hex encoded.
    pub fn hash(&self) -> Result<String> {
        let digest = Sha256::digest(self.canonical_json()?.as_bytes());
        Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precedence_flag_over_file_over_default() {
        let file = Settings { rho: Some(0.5), p: Some(30), ..Default::default() };
        let flags = Settings { rho: Some(0.9), ..Default::default() };
        let cfg = ExperimentConfig::resolve(Experiment::Figure1, &file, &flags).unwrap();
        assert_eq!(cfg.rho, 0.9);
        assert_eq!(cfg.p, 30);
        assert_eq!(cfg.replicates, 200);
        assert_eq!(cfg.sources["rho"], Source::Flag);
        assert_eq!(cfg.sources["p"], Source::File);
        assert_eq!(cfg.sources["replicates"], Source::Default);
    }

    #[test]
    fn figure1_defaults_follow_caption() {
        let cfg = ExperimentConfig::defaults(Experiment::Figure1).unwrap();
        assert_eq!((cfg.p, cfg.rho, cfg.sigma), (100, 0.8, 0.0));
        assert!(cfg.d_grid.contains(&50) && cfg.d_grid.contains(&400));
        assert_eq!(cfg.model(50).unwrap().beta_norm2(), 1.0);
    }

    #[test]
    fn rejects_bad_settings() {
        let empty = Settings { n_grid: Some(vec![]), ..Default::default() };
        assert!(ExperimentConfig::resolve(Experiment::SgdSweep, &Settings::default(), &empty).is_err());
        let rho = Settings { rho: Some(1.5), ..Default::default() };
        assert!(ExperimentConfig::resolve(Experiment::Figure1, &rho, &Settings::default()).is_err());
        assert!(serde_json::from_str::<Settings>(r#"{"unknown": 1}"#).is_err());
    }

    #[test]
    fn hash_changes_with_settings() {
        let a = ExperimentConfig::defaults(Experiment::Mnar).unwrap();
        let b = ExperimentConfig::resolve(Experiment::Mnar, &Settings::default(), &Settings { seed: Some(1), ..Default::default() })
            .unwrap();
        assert_ne!(a.hash().unwrap(), b.hash().unwrap());
        assert_eq!(a.hash().unwrap(), ExperimentConfig::defaults(Experiment::Mnar).unwrap().hash().unwrap());
        assert_eq!(a.hash().unwrap().len(), 64);
    }

    #[test]
    fn config_file_parses() {
        let s: Settings = serde_json::from_str(r#"{"seed": 3, "beta": [1.0, 0.0], "regime": "high_dim"}"#).unwrap();
        assert_eq!(s.seed, Some(3));
        assert_eq!(s.beta, Some(BetaSpec::Explicit(vec![1.0, 0.0])));
        assert_eq!(s.regime, Some(Regime::HighDim));
        let s: Settings = serde_json::from_str(r#"{"beta": {"norm": 2.0}}"#).unwrap();
        assert_eq!(s.beta, Some(BetaSpec::Norm { norm: 2.0 }));
    }
}
