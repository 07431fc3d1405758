use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use perqwalk::cli::{self, ExperimentConfig};
use perqwalk::Error;

/// Continuous-time quantum walks on dynamical percolation graphs.
#[derive(Parser)]
#[command(name = "perqwalk", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a single experiment from a config file.
    Run { config: PathBuf },
    /// Run the Cartesian product of the config's [sweep] axes.
    Sweep { config: PathBuf },
    /// Check a config file without running anything.
    Validate { config: PathBuf },
}

const EXIT_CONFIG: u8 = 1;
const EXIT_RUNTIME: u8 = 2;

fn load(path: &Path) -> Result<ExperimentConfig, ExitCode> {
    ExperimentConfig::load(path).map_err(|e| {
        eprintln!("config error: {e}");
        ExitCode::from(EXIT_CONFIG)
    })
}

fn validate(config: &ExperimentConfig, sweeping: bool) -> Result<(), ExitCode> {
    config.validate(sweeping).map_err(|e| {
        eprintln!("config error: {e}");
        ExitCode::from(EXIT_CONFIG)
    })
}

fn install_threads(config: &ExperimentConfig) -> Result<(), ExitCode> {
    let threads = cli::resolve_threads(config.threads);
    if threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| {
                eprintln!("runtime error: {e}");
                ExitCode::from(EXIT_RUNTIME)
            })?;
    }
    Ok(())
}

fn base_dir(config_path: &Path) -> PathBuf {
    config_path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."))
}

fn execute(path: &Path, sweeping: bool) -> Result<(), ExitCode> {
    let config = load(path)?;
    validate(&config, sweeping)?;
    install_threads(&config)?;
    let base = base_dir(path);
    let report = if sweeping {
        cli::sweep(&config, &base)
    } else {
        cli::run(&config, &base)
    };
    match report {
        Ok(report) => {
            println!(
                "wrote {} files to {}",
                report.files.len(),
                report.output_dir.display()
            );
            Ok(())
        }
        Err(e @ Error::Config(_)) => {
            eprintln!("config error: {e}");
            Err(ExitCode::from(EXIT_CONFIG))
        }
        Err(e) => {
            eprintln!("runtime error: {e}");
            Err(ExitCode::from(EXIT_RUNTIME))
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // help and version requests are not errors
            let is_error = e.use_stderr();
            let _ = e.print();
            return if is_error {
                ExitCode::from(EXIT_CONFIG)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let outcome = match &cli.command {
        Command::Run { config } => execute(config, false),
        Command::Sweep { config } => execute(config, true),
        Command::Validate { config } => load(config)
            .and_then(|c| validate(&c, false).or_else(|_| validate(&c, true)))
            .map(|()| println!("config ok")),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(code) => code,
    }
}
