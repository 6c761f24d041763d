//! Drives an experiment from a JSON config with overrides, as the CLI does,
//! and writes outputs plus a manifest into a temporary directory.
//!
//! cargo run --example config_run

use rfimpute::experiments::{execute, Experiment, ExperimentConfig, Settings};

fn main() -> rfimpute::Result<()> {
    let file: Settings = serde_json::from_str(r#"{"p": 20, "d": 4, "n_grid": [100, 1000], "replicates": 10, "rho": 0.6}"#)?;
    let flags = Settings { gamma_mult: Some(0.5), ..Default::default() };
    let cfg = ExperimentConfig::resolve(Experiment::SgdSweep, &file, &flags)?;
    let dir = std::env::temp_dir().join(format!("rfimpute-config-run-{}", std::process::id()));
    let exec = execute(&cfg, &dir, true, None)?;
    for path in &exec.written {
        println!("== {}", path.display());
        print!("{}", std::fs::read_to_string(path)?);
    }
    std::fs::remove_dir_all(&dir)?;
    Ok(())
}
