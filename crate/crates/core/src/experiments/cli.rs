//! Command-line front end.
//!
//! Exit status: 0 success, 1 I/O failure, 2 configuration error or output
//! collision, 3 numerical failure (divergence or a failed validation check).

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use super::config::{EmitFormat, Experiment, ExperimentConfig, Settings};
use super::execute;
use crate::error::Error;
use crate::estimators::Regime;

/// Environment variable holding the worker-thread count.
pub const WORKERS_ENV: &str = "RFIMPUTE_WORKERS";

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "rfimpute", version, about = "Risk of zero-imputation on random features: Monte Carlo studies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Risk curves against the number of features (two panels).
    Figure1(RunArgs),
    /// Averaged-SGD excess risk against the sample size.
    SgdSweep(RunArgs),
    /// Imputed risk under logistic MNAR masks against the number of features.
    Mnar(RunArgs),
    /// Run the oracle check suite and write a JSON report.
    Validate(RunArgs),
}

#[derive(Debug, Args)]
struct RunArgs {
    /// JSON config file; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "results")]
    out: PathBuf,
    #[arg(long)]
    replicates: Option<usize>,
    /// Overwrite existing outputs.
    #[arg(long)]
    force: bool,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    p: Option<usize>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    sigma: Option<f64>,
    /// Comma-separated feature counts.
    #[arg(long, value_delimiter = ',')]
    d_grid: Option<Vec<usize>>,
    /// Comma-separated sample sizes.
    #[arg(long, value_delimiter = ',')]
    n_grid: Option<Vec<usize>>,
    /// Multiplier applied to the step-size policy.
    #[arg(long)]
    gamma_mult: Option<f64>,
    /// Step-size regime: low_dim, high_dim or general.
    #[arg(long)]
    regime: Option<Regime>,
    #[arg(long)]
    kappa: Option<f64>,
    #[arg(long)]
    n_train: Option<usize>,
    #[arg(long)]
    n_test: Option<usize>,
    #[arg(long)]
    mnar_intercept: Option<f64>,
    #[arg(long)]
    mnar_slope_norm: Option<f64>,
    /// csv or json.
    #[arg(long, value_parser = parse_format)]
    emit_format: Option<EmitFormat>,
    /// Alter the oracle constant of the named validation check.
    #[arg(long, hide = true)]
    perturb: Option<String>,
}

fn parse_format(s: &str) -> Result<EmitFormat, String> {
    match s {
        "csv" => Ok(EmitFormat::Csv),
        "json" => Ok(EmitFormat::Json),
        _ => Err(format!("expected csv or json, got `{s}`")),
    }
}

impl RunArgs {
    fn settings(&self) -> Settings {
        Settings {
            seed: self.seed,
            replicates: self.replicates,
            p: self.p,
            d: self.d,
            rho: self.rho,
            sigma: self.sigma,
            beta: None,
            d_grid: self.d_grid.clone(),
            n_grid: self.n_grid.clone(),
            gamma_mult: self.gamma_mult,
            regime: self.regime,
            kappa: self.kappa,
            patterns_per_weight: None,
            n_train: self.n_train,
            n_test: self.n_test,
            mnar_intercept: self.mnar_intercept,
            mnar_slope_norm: self.mnar_slope_norm,
            emit_format: self.emit_format,
        }
    }
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Io(_) | Error::Json(_) => EXIT_IO,
        Error::Config(_) | Error::OutputExists(_) | Error::InvalidParameter { .. } | Error::ShapeMismatch { .. } => {
            EXIT_CONFIG
        }
        Error::NonFinite { .. }
        | Error::NotSymmetric { .. }
        | Error::Singular(_)
        | Error::NotApplicable(_)
        | Error::Divergence { .. } => EXIT_NUMERICAL,
    }
}

fn configure_workers() -> Result<(), Error> {
    let Ok(raw) = std::env::var(WORKERS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| Error::Config(format!("{WORKERS_ENV} must be a positive integer, got `{raw}`")))?;
    // The global pool can only be built once per process; later calls keep it.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

/// Parses `args` (program name first), runs the command and returns the exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let (experiment, args) = match &cli.command {
        Command::Figure1(a) => (Experiment::Figure1, a),
        Command::SgdSweep(a) => (Experiment::SgdSweep, a),
        Command::Mnar(a) => (Experiment::Mnar, a),
        Command::Validate(a) => (Experiment::Validate, a),
    };
    let result = configure_workers().and_then(|()| {
        let file = match &args.config {
            Some(path) => Settings::from_file(path)?,
            None => Settings::default(),
        };
        let cfg = ExperimentConfig::resolve(experiment, &file, &args.settings())?;
        execute(&cfg, &args.out, args.force, args.perturb.as_deref())
    });
    match result {
        Ok(exec) => {
            for c in &exec.manifest.criteria {
                println!("{} {}", if c.pass { "PASS" } else { "FAIL" }, c.name);
            }
            for path in &exec.written {
                println!("wrote {}", path.display());
            }
            if exec.numerical_failure {
                EXIT_NUMERICAL
            } else {
                EXIT_OK
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
