use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgAction, Parser, Subcommand};
use crswf_cli::commands::{mean_wall_ms, ESTIMATES_FILE, SWEEP_FILE};
use crswf_cli::{cmd_estimate, cmd_evaluate, cmd_simulate, cmd_sweep, CliError, CliResult, RunConfig};

/// Sliding-window state estimation for continuum robots.
#[derive(Debug, Parser)]
#[command(name = "crswf", version)]
struct Cli {
    /// Config file of `key = value` lines; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Window length in seconds (0 gives a filter).
    #[arg(long, global = true)]
    window_seconds: Option<f64>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Trajectory profile, e.g. slow-free-space or fast-contact.
    #[arg(long, global = true)]
    profile: Option<String>,
    /// Override any config key, e.g. `--set qc_time_linear=2`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
    /// More logging (-v info, -vv debug).
    #[arg(short, long, action = ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write ground truth and noisy measurements.
    Simulate {
        #[arg(long)]
        duration: Option<f64>,
    },
    /// Run the sliding-window estimator over a measurement file.
    Estimate {
        #[arg(long)]
        measurements: Option<PathBuf>,
        #[arg(long)]
        duration: Option<f64>,
    },
    /// Compare estimates with ground truth.
    Evaluate {
        #[arg(long)]
        estimates: Option<PathBuf>,
        #[arg(long)]
        truth: Option<PathBuf>,
    },
    /// Evaluate every profile over a range of window lengths.
    Sweep {
        /// Comma-separated window lengths in seconds.
        #[arg(long, value_delimiter = ',')]
        windows: Option<Vec<f64>>,
        /// Comma-separated profile names.
        #[arg(long, value_delimiter = ',')]
        profiles: Option<Vec<String>>,
        #[arg(long)]
        duration: Option<f64>,
    },
}

fn build_config(cli: &Cli) -> CliResult<RunConfig> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &cli.config {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        cfg.apply_file(&text)
            .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    }
    for kv in &cli.overrides {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("--set expects KEY=VALUE, got `{kv}`")))?;
        cfg.set(k.trim(), v.trim())?;
    }
    if let Some(w) = cli.window_seconds {
        cfg.swf.window_seconds = w;
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.out = o.clone();
    }
    if let Some(p) = &cli.profile {
        cfg.profile = p.clone();
    }
    match &cli.command {
        Command::Simulate { duration } => {
            cfg.duration = duration.or(cfg.duration);
        }
        Command::Estimate { measurements, duration } => {
            cfg.duration = duration.or(cfg.duration);
            if let Some(m) = measurements {
                cfg.measurements = Some(m.clone());
            }
        }
        Command::Evaluate { estimates, truth } => {
            if let Some(e) = estimates {
                cfg.estimates = Some(e.clone());
            }
            if let Some(t) = truth {
                cfg.truth = Some(t.clone());
            }
        }
        Command::Sweep {
            windows,
            profiles,
            duration,
        } => {
            cfg.duration = duration.or(cfg.duration);
            if let Some(w) = windows {
                cfg.windows = w.clone();
            }
            if let Some(p) = profiles {
                cfg.profiles = p.clone();
            }
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> CliResult<()> {
    let cfg = build_config(cli)?;
    match cli.command {
        Command::Simulate { .. } => {
            let s = cmd_simulate(&cfg)?;
            println!(
                "seed {}: {} truth rows, {} measurements ({} tip poses, {} gyro) in {}",
                s.seed,
                s.truth_rows,
                s.measurements,
                s.tip_poses,
                s.gyros,
                cfg.out.display()
            );
        }
        Command::Estimate { .. } => {
            let run = cmd_estimate(&cfg)?;
            println!(
                "{} slices, window of {} slices, mean solve {:.3} ms; wrote {}",
                run.estimates.len(),
                run.window_slices,
                mean_wall_ms(&run.reports),
                cfg.out.join(ESTIMATES_FILE).display()
            );
        }
        Command::Evaluate { .. } => {
            let report = cmd_evaluate(&cfg)?;
            print!("{report}");
        }
        Command::Sweep { .. } => {
            let rows = cmd_sweep(&cfg)?;
            let failed = rows.iter().filter(|r| r.failure.is_some()).count();
            println!(
                "{} runs ({} failed); wrote {}",
                rows.len(),
                failed,
                cfg.out.join(SWEEP_FILE).display()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
