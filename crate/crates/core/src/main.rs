use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use levsqueeze::commands::{self, Figure, PsdOptions};
use levsqueeze::config::{load_config, ExperimentConfig};
use levsqueeze::fit::FitInit;
use levsqueeze::units::hz_to_rad_s;
use levsqueeze::{Error, Result};

/// Squeezing a levitated nanoparticle by switching the trap frequency:
/// simulation, analysis and fitting.
#[derive(Parser)]
#[command(name = "levsqueeze", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the configured ensemble and store it.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the seed in the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the number of traces.
        #[arg(long)]
        traces: Option<usize>,
    },
    /// Analyse a stored ensemble (path to its JSON sidecar).
    Analyze {
        ensemble: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Use this config instead of the one embedded in the ensemble.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Welch PSD and Lorentzian fit of a trace CSV (t_s, z_m).
    FitPsd {
        trace: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1 << 16)]
        segment_length: usize,
        #[arg(long, default_value_t = 0.5)]
        overlap: f64,
        /// Half-width of the fit band around the peak, Hz.
        #[arg(long, default_value_t = 5e3)]
        fit_halfwidth_hz: f64,
    },
    /// Fit (ω₂, η) to a squeezing curve CSV (tau_s, lambda_db[, sigma_db]).
    FitSqueezing {
        curve: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        omega1_rad_s: f64,
        /// Starting ω₂; the commanded trap frequency.
        #[arg(long)]
        omega2_rad_s: f64,
        #[arg(long, default_value_t = 0.9)]
        eta: f64,
    },
    /// Run a figure pipeline end to end.
    Reproduce {
        /// fig1c, fig1d, fig2, fig4a, fig4b or all.
        #[arg(long)]
        figure: String,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        traces: Option<usize>,
    },
}

fn with_overrides(mut cfg: ExperimentConfig, seed: Option<u64>, traces: Option<usize>) -> Result<ExperimentConfig> {
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(n) = traces {
        cfg.n_traces = n;
        cfg.sweep_n_traces = n;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<serde_json::Value> {
    match cli.command {
        Command::Simulate { config, out, seed, traces } => {
            let cfg = with_overrides(load_config(&config)?, seed, traces)?;
            commands::cmd_simulate(&cfg, &out)
        }
        Command::Analyze { ensemble, out, config } => {
            let cfg = config.map(|p| load_config(&p)).transpose()?;
            commands::cmd_analyze(&ensemble, &out, cfg.as_ref())
        }
        Command::FitPsd {
            trace,
            out,
            segment_length,
            overlap,
            fit_halfwidth_hz,
        } => commands::cmd_fit_psd(
            &trace,
            &out,
            PsdOptions {
                segment_length,
                overlap,
                fit_halfwidth: hz_to_rad_s(fit_halfwidth_hz),
            },
        ),
        Command::FitSqueezing {
            curve,
            out,
            omega1_rad_s,
            omega2_rad_s,
            eta,
        } => commands::cmd_fit_squeezing(&curve, &out, omega1_rad_s, FitInit { omega2: omega2_rad_s, eta }),
        Command::Reproduce {
            figure,
            config,
            out,
            seed,
            traces,
        } => {
            let cfg = with_overrides(load_config(&config)?, seed, traces)?;
            let figures: Vec<Figure> = if figure.eq_ignore_ascii_case("all") {
                Figure::ALL.to_vec()
            } else {
                vec![figure.parse()?]
            };
            let mut summary = serde_json::Map::new();
            for f in figures {
                let dir = if figure.eq_ignore_ascii_case("all") { out.join(f.name()) } else { out.clone() };
                summary.insert(f.name().into(), commands::cmd_reproduce(f, &cfg, &dir)?);
            }
            Ok(summary.into())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(summary) => {
            println!("{}", serde_json::to_string_pretty(&summary).unwrap_or_default());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    e.exit_code().clamp(1, 255) as u8
}
