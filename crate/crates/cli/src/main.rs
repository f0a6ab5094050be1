use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use semiflow_lab::{load_config, run_command, Command, ConfigError, RunError};

#[derive(Debug, Parser)]
#[command(name = "semiflow-lab", about = "Age-structured HBV model experiments")]
struct Cli {
    /// One of: r0, equilibria, simulate, crosscheck, spectrum, lyapunov, fit, sweep, extinction
    command: String,
    /// TOML run configuration
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides io.out_dir)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated perturbation sizes for `sweep`
    #[arg(long, value_delimiter = ',')]
    eps: Option<Vec<f64>>,
    /// Horizon of the selected command
    #[arg(long)]
    horizon: Option<f64>,
}

fn run(cli: Cli) -> Result<bool, RunError> {
    let cmd = Command::parse(&cli.command).ok_or_else(|| ConfigError {
        key: None,
        line: None,
        message: format!("unknown command `{}`", cli.command),
    })?;
    let mut cfg = load_config(&cli.config)?;
    if let Some(out) = cli.out {
        cfg.out_dir = out;
    }
    if let Some(eps) = cli.eps {
        cfg.sweep.eps = eps;
    }
    if let Some(h) = cli.horizon {
        if !(h.is_finite() && h > 0.0) {
            return Err(ConfigError {
                key: Some("horizon".into()),
                line: None,
                message: format!("horizon must be a finite value > 0, got {h}"),
            }
            .into());
        }
        match cmd {
            Command::Sweep => cfg.sweep.horizon = h,
            Command::Extinction => cfg.sweep.extinction_horizon = h,
            _ => cfg.sim.horizon = h,
        }
    }
    if let Ok(n) = std::env::var("SEMIFLOW_THREADS") {
        let n: usize = n.parse().map_err(|_| ConfigError {
            key: Some("SEMIFLOW_THREADS".into()),
            line: None,
            message: format!("expected a thread count, got `{n}`"),
        })?;
        // a second initialisation only fails if a pool already exists
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    Ok(run_command(cmd, &cfg)?.verdict)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("{}", e.to_record());
            ExitCode::from(1)
        }
    }
}
