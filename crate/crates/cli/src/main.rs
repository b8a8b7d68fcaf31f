use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use blsat_cli::report::pretty;
use blsat_cli::{execute, parse_config, CliError, Command, ConfigError, ExperimentReport, Status};
use clap::Parser;

/// Gaussian Brascamp-Lieb constants, Legendre duality and barycenter experiments.
///
/// Every run reads a JSON config and emits one JSON report (stdout, or
/// `<out>/report.json` together with CSV tables and grid files).
/// Exit codes: 0 success, 2 config error, 3 infeasible or unbounded,
/// 4 non-convergence, 1 I/O failure.
#[derive(Debug, Parser)]
#[command(name = "blsat", version)]
struct Cli {
    command: Command,
    /// JSON config for the experiment.
    #[arg(long)]
    config: PathBuf,
    /// Directory for report.json, CSV tables and grid files.
    #[arg(long)]
    out: Option<PathBuf>,
}

const THREADS_ENV: &str = "BLSAT_THREADS";

fn threads(config: Option<usize>) -> Result<usize, ConfigError> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(ConfigError::new(THREADS_ENV, format!("expected a positive integer, got {v:?}"))),
        },
        Err(_) => Ok(config.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))),
    }
}

fn run(cli: &Cli) -> Result<Status, CliError> {
    let document = std::fs::read_to_string(&cli.config)
        .map_err(|e| ConfigError::new("", format!("cannot read {}: {e}", cli.config.display())))?;
    let mut cfg = parse_config(&document, Some(cli.command))?;
    cfg.base_dir = cli.config.parent().map(Path::to_path_buf).unwrap_or_default();
    let threads = threads(cfg.settings.threads)?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Io(format!("cannot start worker threads: {e}")))?;

    let started = Instant::now();
    let report = match execute(&cfg) {
        Ok(r) => r,
        // Outcomes such as an unbounded objective still get a report.
        Err(CliError::Core(e)) if Status::of_error(&e).is_some() => {
            let mut r = ExperimentReport::new(cfg.command, cfg.echo.clone(), cfg.settings.seed);
            r.degrade(Status::of_error(&e).expect("checked above"));
            r.error = Some(e.to_string());
            r
        }
        Err(e) => return Err(e),
    };
    let wall = started.elapsed().as_secs_f64();

    let out = cli.out.clone().or_else(|| cfg.settings.out.as_ref().map(|p| cfg.base_dir.join(p)));
    match out {
        Some(dir) => {
            report
                .write(&dir, threads, wall)
                .map_err(|e| CliError::Io(format!("cannot write to {}: {e}", dir.display())))?;
            eprintln!("blsat: {} {} -> {}", cfg.command, report.status.as_str(), dir.join("report.json").display());
        }
        None => println!("{}", pretty(&report.to_json(threads, wall, &[]))),
    }
    Ok(report.status)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(status) => ExitCode::from(status.exit_code()),
        Err(e) => {
            eprintln!("blsat: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
