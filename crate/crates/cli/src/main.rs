//! `holobeam` — sweep experiments and focusing studies for the
//! continuous-aperture data/energy beamforming stack.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use holobeam_cli::harness::{self, CliOverrides};
use holobeam_cli::{config, SchemeId};

#[derive(Parser)]
#[command(
    name = "holobeam",
    version,
    about = "Continuous-aperture data/energy beamforming experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ProfileArg {
    /// 2 data users, 1 energy user, 121 Fourier modes.
    Desk,
    /// 4 data users, 2 energy users, 441 Fourier modes.
    Full,
}

impl From<ProfileArg> for config::Profile {
    fn from(p: ProfileArg) -> Self {
        match p {
            ProfileArg::Desk => config::Profile::Desk,
            ProfileArg::Full => config::Profile::Full,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run a scheme-comparison sweep from a JSON config (resumable).
    Run {
        /// Experiment config (JSON; SI units with unit-suffixed keys).
        config: PathBuf,
        /// Output directory (default: config's out_dir, else holobeam-out).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Replace the config's scenario with a built-in preset.
        #[arg(long, value_enum)]
        profile: Option<ProfileArg>,
        /// Comma-separated subset of H-IDET,FD-IDET,FD,MF,UPPER.
        #[arg(long, value_delimiter = ',')]
        schemes: Option<Vec<String>>,
        /// Seed for the randomized-initialization ablations.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Near-field focusing study for a single receiver: pattern maps,
    /// exact-versus-paraxial harvest, and focus scans.
    Pattern {
        /// Experiment config; the study block sets foci and scan ranges.
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Aperture current maps (x,y,amplitude,phase CSVs) from a saved
    /// report JSON.
    Maps {
        /// A report_*.json produced by `holobeam run`.
        report: PathBuf,
        /// Output directory (default: the report's directory).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("holobeam: {e}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cli: Cli) -> holobeam_cli::Result<()> {
    match cli.command {
        Command::Run { config: path, out, profile, schemes, seed } => {
            let cfg = config::load_config(&path)?;
            config::validate(&cfg)?;
            let schemes = schemes
                .map(|list| list.iter().map(|s| s.parse::<SchemeId>()).collect())
                .transpose()?;
            let run = harness::resolve(
                cfg,
                CliOverrides {
                    out,
                    profile: profile.map(Into::into),
                    schemes,
                    seed,
                },
            )?;
            let outcome = harness::run_experiment(&run)?;
            println!(
                "{}: {} new row(s), {} already present",
                outcome.results_path.display(),
                outcome.rows_written,
                outcome.rows_skipped
            );
            Ok(())
        }
        Command::Pattern { config: path, out } => {
            let cfg = config::load_config(&path)?;
            config::validate(&cfg)?;
            let run = harness::resolve(
                cfg,
                CliOverrides {
                    out,
                    ..Default::default()
                },
            )?;
            let outcome = harness::run_single_eu_study(&run)?;
            for f in &outcome.files {
                println!("{}", f.display());
            }
            Ok(())
        }
        Command::Maps { report, out } => {
            let out_dir = out.unwrap_or_else(|| {
                report
                    .parent()
                    .map(PathBuf::from)
                    .unwrap_or_else(|| PathBuf::from("."))
            });
            for f in harness::emit_current_maps(&report, &out_dir)? {
                println!("{}", f.display());
            }
            Ok(())
        }
    }
}
