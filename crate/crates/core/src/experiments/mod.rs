//! Experiment runners behind the `rfimpute` command: each turns a resolved
//! [`ExperimentConfig`] into output tables, criteria and a run manifest.

pub mod cli;
pub mod config;
pub mod manifest;
pub mod output;
pub mod validate;

use std::path::{Path, PathBuf};
use std::time::Instant;

pub use config::{EmitFormat, Experiment, ExperimentConfig, Settings, Source};
pub use manifest::{CriterionOutcome, Manifest};
pub use output::{Cell, Table};
pub use validate::{run_validation, Check, ValidationReport};

use crate::error::{Error, Result};
use crate::montecarlo::{
    combined_stderr, loglog_slope, mnar_convergence_experiment, risk_curves_vs_d, sgd_learning_curve, RiskCurveRow,
    SgdCurveSpec, MAX_EXCLUDED_FRACTION, ROUNDOFF_SLACK,
};

/// Files produced by a run, before they are written.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub files: Vec<(String, String)>,
    pub criteria: Vec<CriterionOutcome>,
    /// Extra experiment summary recorded in the manifest.
    pub summary: Option<serde_json::Value>,
    /// Set when a hard numerical criterion failed; maps to exit status 3.
    pub numerical_failure: bool,
}

fn render(table: &Table, stem: &str, format: EmitFormat) -> Result<(String, String)> {
    Ok(match format {
        EmitFormat::Csv => (format!("{stem}.csv"), table.to_csv()),
        EmitFormat::Json => (format!("{stem}.json"), table.to_json()?),
    })
}

/// Output file names of an experiment, manifest included.
pub fn output_names(cfg: &ExperimentConfig) -> Vec<String> {
    let ext = match cfg.emit_format {
        EmitFormat::Csv => "csv",
        EmitFormat::Json => "json",
    };
    let mut names: Vec<String> = match cfg.experiment {
        Experiment::Figure1 => vec![format!("figure1_panel_a.{ext}"), format!("figure1_panel_b.{ext}")],
        Experiment::SgdSweep => vec![format!("sgd_sweep.{ext}")],
        Experiment::Mnar => vec![format!("mnar.{ext}")],
        Experiment::Validate => vec!["validate.json".into()],
    };
    names.push(manifest_name(cfg.experiment));
    names
}

pub fn manifest_name(experiment: Experiment) -> String {
    format!("{}_manifest.json", experiment.name().replace('-', "_"))
}

fn figure1_table(rows: &[&RiskCurveRow]) -> Table {
    let mut t = Table::new(vec![
        "d",
        "risk_complete_mc",
        "risk_complete_stderr",
        "risk_complete_exact",
        "risk_miss_mc",
        "risk_miss_stderr",
        "risk_miss_exact",
        "risk_imp_mc",
        "risk_imp_stderr",
        "risk_imp_upper_bound",
        "risk_imp_lower_bound",
    ]);
    for r in rows {
        t.push(vec![
            r.d.into(),
            r.complete.mean.into(),
            r.complete.stderr.into(),
            r.complete_exact.into(),
            r.miss.mean.into(),
            r.miss.stderr.into(),
            r.miss_exact.into(),
            r.imp.mean.into(),
            r.imp.stderr.into(),
            r.imp_upper.into(),
            r.imp_lower.into(),
        ]);
    }
    t
}

/// Checks of the risk curves: closed-form agreement, imputed bounds for
/// `d ≥ p`, and the ordering `R* ≤ R*_miss ≤ R*_imp`, all at 3 stderr.
pub fn figure1_criteria(rows: &[RiskCurveRow], p: usize) -> Vec<CriterionOutcome> {
    let complete = rows.iter().all(|r| r.complete.agrees_with(r.complete_exact, 3.0));
    let miss = rows.iter().all(|r| r.miss.agrees_with(r.miss_exact, 3.0));
    let bounds = rows.iter().filter(|r| r.d >= p).all(|r| {
        let tol = 3.0 * r.imp.stderr + ROUNDOFF_SLACK;
        r.imp.mean >= r.imp_lower - tol && r.imp_upper.is_none_or(|u| r.imp.mean <= u + tol)
    });
    let ordering = rows.iter().all(|r| {
        r.complete.mean <= r.miss.mean + 3.0 * combined_stderr(&r.complete, &r.miss) + ROUNDOFF_SLACK
            && r.miss.mean <= r.imp.mean + 3.0 * combined_stderr(&r.miss, &r.imp) + ROUNDOFF_SLACK
    });
    vec![
        CriterionOutcome::new("complete_risk_matches_closed_form", complete),
        CriterionOutcome::new("missing_risk_matches_closed_form", miss),
        CriterionOutcome::new("imputed_risk_within_bounds", bounds),
        CriterionOutcome::new("risk_ordering", ordering),
    ]
}

pub fn run_figure1(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let mut grid = cfg.d_grid.clone();
    grid.sort_unstable();
    grid.dedup();
    let model = cfg.model(grid[0])?;
    let rows = risk_curves_vs_d(&grid, &model, cfg.rho, &cfg.plan(), cfg.patterns_per_weight)?;
    let below: Vec<&RiskCurveRow> = rows.iter().filter(|r| r.d < cfg.p).collect();
    let all: Vec<&RiskCurveRow> = rows.iter().collect();
    Ok(RunOutput {
        files: vec![
            render(&figure1_table(&below), "figure1_panel_a", cfg.emit_format)?,
            render(&figure1_table(&all), "figure1_panel_b", cfg.emit_format)?,
        ],
        criteria: figure1_criteria(&rows, cfg.p),
        summary: None,
        numerical_failure: false,
    })
}

pub fn run_sgd_sweep(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let model = cfg.model(cfg.d)?;
    let spec = SgdCurveSpec {
        rho: cfg.rho,
        n_grid: cfg.n_grid.clone(),
        regime: cfg.regime,
        kappa: cfg.kappa,
        gamma_mult: cfg.gamma_mult,
    };
    let rows = sgd_learning_curve(&model, &spec, &cfg.plan())?;
    let mut t = Table::new(vec![
        "n",
        "gamma",
        "excess_risk_mean",
        "excess_risk_stderr",
        "learning_error_mean",
        "learning_error_stderr",
        "reference_risk",
        "plateau",
        "excluded_replicates",
        "completed_replicates",
    ]);
    for r in &rows {
        t.push(vec![
            r.n.into(),
            r.gamma.into(),
            r.excess.map(|e| e.mean).into(),
            r.excess.map(|e| e.stderr).into(),
            r.learning_error.map(|e| e.mean).into(),
            r.learning_error.map(|e| e.stderr).into(),
            r.reference_risk.into(),
            r.plateau.into(),
            r.excluded.into(),
            r.completed.into(),
        ]);
    }
    let exclusions_ok = rows.iter().all(|r| r.excluded_fraction() <= MAX_EXCLUDED_FRACTION);
    let ns: Vec<f64> = rows.iter().map(|r| r.n as f64).collect();
    let le: Option<Vec<f64>> = rows.iter().map(|r| r.learning_error.map(|e| e.mean)).collect();
    let slope = le.as_ref().and_then(|le| loglog_slope(&ns, le));
    let mut criteria = vec![CriterionOutcome::new("divergent_replicates_within_limit", exclusions_ok)];
    if rows.len() >= 2 {
        criteria.push(CriterionOutcome::new(
            "learning_error_decreasing",
            le.as_ref().is_some_and(|le| le.windows(2).all(|w| w[1] < w[0])),
        ));
    }
    let summary = serde_json::json!({
        "regime": cfg.regime,
        "learning_error_loglog_slope": slope,
        "gamma_policy_multiplier": cfg.gamma_mult,
    });
    Ok(RunOutput {
        files: vec![render(&t, "sgd_sweep", cfg.emit_format)?],
        criteria,
        summary: Some(summary),
        numerical_failure: !exclusions_ok,
    })
}

pub fn run_mnar(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let model = cfg.model(cfg.d_grid[0])?;
    let outcome = mnar_convergence_experiment(&model, &cfg.mnar_design(), &cfg.d_grid, &cfg.plan())?;
    let mut t = Table::new(vec!["d", "risk_imp_mc", "stderr", "sigma2_reference"]);
    for r in &outcome.rows {
        t.push(vec![r.d.into(), r.risk.mean.into(), r.risk.stderr.into(), r.sigma2_reference.into()]);
    }
    let mut criteria = Vec::new();
    if let Some(trend) = &outcome.trend {
        criteria.push(CriterionOutcome::new("imputed_risk_decreasing", trend.decreasing));
        criteria.push(CriterionOutcome::new("imputed_risk_halves", trend.ratio_last_first <= 0.5));
    }
    Ok(RunOutput {
        files: vec![render(&t, "mnar", cfg.emit_format)?],
        criteria,
        summary: Some(serde_json::json!({ "trend": outcome.trend })),
        numerical_failure: false,
    })
}

pub fn run_validate(cfg: &ExperimentConfig, perturb: Option<&str>) -> Result<RunOutput> {
    let report = run_validation(cfg.seed, perturb)?;
    let criteria = report.checks.iter().map(|c| CriterionOutcome::new(c.name, c.pass)).collect();
    Ok(RunOutput {
        files: vec![("validate.json".into(), report.to_json()?)],
        criteria,
        summary: None,
        numerical_failure: !report.all_pass(),
    })
}

/// Result of [`execute`]: the manifest and the paths written.
#[derive(Debug, Clone)]
pub struct Execution {
    pub manifest: Manifest,
    pub written: Vec<PathBuf>,
    pub numerical_failure: bool,
}

/// Runs an experiment and writes its outputs and manifest into `out_dir`.
/// Nothing is written if any target exists and `force` is off, or if the
/// computation fails.
pub fn execute(cfg: &ExperimentConfig, out_dir: &Path, force: bool, perturb: Option<&str>) -> Result<Execution> {
    let names = output_names(cfg);
    let name_refs: Vec<&str> = names.iter().map(String::as_str).collect();
    output::check_collisions(out_dir, &name_refs, force)?;
    if perturb.is_some() && cfg.experiment != Experiment::Validate {
        return Err(Error::Config("--perturb only applies to validate".into()));
    }
    let start = Instant::now();
    let run = match cfg.experiment {
        Experiment::Figure1 => run_figure1(cfg)?,
        Experiment::SgdSweep => run_sgd_sweep(cfg)?,
        Experiment::Mnar => run_mnar(cfg)?,
        Experiment::Validate => run_validate(cfg, perturb)?,
    };
    let duration = start.elapsed().as_secs_f64();
    std::fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();
    for (name, contents) in &run.files {
        let path = out_dir.join(name);
        output::write_atomic(&path, contents.as_bytes())?;
        written.push(path);
    }
    let mut manifest = Manifest::new(
        cfg,
        rayon::current_num_threads(),
        duration,
        run.files.iter().map(|(n, _)| n.clone()).collect(),
        run.criteria,
    )?;
    manifest.summary = run.summary;
    let path = out_dir.join(manifest_name(cfg.experiment));
    output::write_atomic(&path, manifest.to_json()?.as_bytes())?;
    written.push(path);
    Ok(Execution {
        manifest,
        written,
        numerical_failure: run.numerical_failure,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(experiment: Experiment, flags: Settings) -> ExperimentConfig {
        ExperimentConfig::resolve(experiment, &Settings::default(), &flags).unwrap()
    }

    #[test]
    fn figure1_small_run_writes_both_panels() {
        let cfg = small(
            Experiment::Figure1,
            Settings {
                p: Some(10),
                d_grid: Some(vec![12, 3, 6, 20]),
                replicates: Some(20),
                ..Default::default()
            },
        );
        let run = run_figure1(&cfg).unwrap();
        let a = &run.files[0].1;
        let b = &run.files[1].1;
        assert_eq!(a.lines().count(), 1 + 2);
        assert_eq!(b.lines().count(), 1 + 4);
        assert!(b.lines().nth(1).unwrap().starts_with("3,"));
        assert!(run.criteria.iter().all(|c| c.pass), "{:?}", run.criteria);
    }

    #[test]
    fn gamma_override_scales_policy() {
        let base = Settings {
            p: Some(20),
            d: Some(4),
            n_grid: Some(vec![50]),
            replicates: Some(4),
            ..Default::default()
        };
        let one = run_sgd_sweep(&small(Experiment::SgdSweep, base.clone())).unwrap();
        let half = run_sgd_sweep(&small(
            Experiment::SgdSweep,
            Settings { gamma_mult: Some(0.5), ..base },
        ))
        .unwrap();
        let gamma = |out: &RunOutput| -> f64 {
            out.files[0].1.lines().nth(1).unwrap().split(',').nth(1).unwrap().parse().unwrap()
        };
        assert!((gamma(&half) - 0.5 * gamma(&one)).abs() < 1e-15);
    }

    #[test]
    fn single_point_mnar_grid_omits_trend() {
        let cfg = small(
            Experiment::Mnar,
            Settings {
                d_grid: Some(vec![10]),
                n_train: Some(2000),
                n_test: Some(500),
                replicates: Some(2),
                ..Default::default()
            },
        );
        let run = run_mnar(&cfg).unwrap();
        assert!(run.criteria.is_empty());
        assert_eq!(run.summary.unwrap()["trend"], serde_json::Value::Null);
    }

    #[test]
    fn execute_refuses_to_overwrite() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small(
            Experiment::Figure1,
            Settings {
                p: Some(5),
                d_grid: Some(vec![2, 8]),
                replicates: Some(4),
                ..Default::default()
            },
        );
        let first = execute(&cfg, dir.path(), false, None).unwrap();
        assert_eq!(first.written.len(), 3);
        let before = std::fs::read(dir.path().join("figure1_panel_b.csv")).unwrap();
        assert!(matches!(execute(&cfg, dir.path(), false, None), Err(Error::OutputExists(_))));
        execute(&cfg, dir.path(), true, None).unwrap();
        assert_eq!(std::fs::read(dir.path().join("figure1_panel_b.csv")).unwrap(), before);
    }

    #[test]
    fn json_emit_format() {
        let cfg = small(
            Experiment::Mnar,
            Settings {
                d_grid: Some(vec![5, 10]),
                n_train: Some(1000),
                n_test: Some(200),
                replicates: Some(2),
                emit_format: Some(EmitFormat::Json),
                ..Default::default()
            },
        );
        assert_eq!(output_names(&cfg), vec!["mnar.json", "mnar_manifest.json"]);
        let run = run_mnar(&cfg).unwrap();
        let v: serde_json::Value = serde_json::from_str(&run.files[0].1).unwrap();
        assert_eq!(v.as_array().unwrap().len(), 2);
    }
}
