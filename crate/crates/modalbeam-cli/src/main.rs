use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use modalbeam_cli::config::ExperimentConfig;
use modalbeam_cli::experiments::{self, PatternMode};

/// Nearfield beamformer simulator: runs the reference experiments and
/// exports their figure/table data as CSV.
#[derive(Parser)]
#[command(name = "modalbeam", version, about)]
struct Cli {
    /// Configuration file (TOML). Built-in defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for CSV artifacts.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Override the master seed from the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Mode {
    /// Analytic frequency-domain sweeps.
    Freq,
    /// Capture synthesis driven through the sample-by-sample beamformer.
    Time,
}

impl From<Mode> for PatternMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Freq => PatternMode::Freq,
            Mode::Time => PatternMode::Time,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Modal filter impulse responses, analytic and estimated.
    Filters,
    /// Beampattern sweeps: polar cuts, full-sphere grids, radial profile.
    Beampattern {
        #[arg(long, value_enum, default_value_t = Mode::Freq)]
        mode: Mode,
    },
    /// Source-to-output coherence over repeated noisy scenes.
    Coherence,
    /// Multiplication and latency cost table.
    Complexity,
    /// All of the above.
    All {
        #[arg(long, value_enum, default_value_t = Mode::Freq)]
        mode: Mode,
    },
}

fn run() -> anyhow::Result<()> {
    let cli = Cli::parse();
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.master_seed = seed;
    }
    cfg.validate()?;

    let mut written = Vec::new();
    match cli.command {
        Command::Filters => written.push(experiments::run_filters(&cfg, &cli.out)?),
        Command::Beampattern { mode } => {
            written.extend(experiments::run_beampattern(&cfg, &cli.out, mode.into())?)
        }
        Command::Coherence => {
            let outcome = experiments::run_coherence(&cfg, &cli.out)?;
            println!(
                "in-band coherence: {:.3} beamformed, {:.3} bare microphone",
                outcome.band_beamformed, outcome.band_bare
            );
            written.push(outcome.path);
        }
        Command::Complexity => written.push(experiments::run_complexity(&cfg, &cli.out)?),
        Command::All { mode } => {
            written.push(experiments::run_filters(&cfg, &cli.out)?);
            written.extend(experiments::run_beampattern(&cfg, &cli.out, mode.into())?);
            let outcome = experiments::run_coherence(&cfg, &cli.out)?;
            println!(
                "in-band coherence: {:.3} beamformed, {:.3} bare microphone",
                outcome.band_beamformed, outcome.band_bare
            );
            written.push(outcome.path);
            written.push(experiments::run_complexity(&cfg, &cli.out)?);
        }
    }
    for path in written {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("{}", serde_json::json!({ "error": format!("{err:#}") }));
            ExitCode::FAILURE
        }
    }
}
