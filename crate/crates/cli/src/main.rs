//! `fxpf`: simulate, beamform, evaluate, and compare aberration-corrected
//! plane-wave images from one JSON config. Exit codes: 0 success, 1 invalid
//! input or usage, 2 file format or I/O failure.

use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use fxpf_cli::commands::{cmd_beamform, cmd_compare, cmd_evaluate, cmd_simulate};
use fxpf_cli::config::{FxpfMode, PipelineConfig};
use fxpf_core::{Error, Result};

#[derive(Parser)]
#[command(name = "fxpf", version, about = "Plane-wave ultrasound pipeline with prediction filtering")]
struct Cli {
    /// Pipeline config file (JSON). Omit to use the built-in reference
    /// experiment.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override the global seed; phantom and aberration reseed together.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads: a count, or "auto" for one per core.
    #[arg(long, global = true, default_value = "auto")]
    threads: String,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the configured phantom and write a channel-data file.
    Simulate {
        /// Output channel-data file.
        #[arg(long, default_value = "frame.fxpf")]
        out: PathBuf,
    },
    /// Beamform a channel-data file into an envelope file and a PGM image.
    Beamform {
        /// Input channel-data file.
        input: PathBuf,
        /// Filter variant: off, fixed:<p>, or adaptive.
        #[arg(long, default_value = "adaptive")]
        fxpf: String,
        /// Output directory for envelope.fenv and image.pgm.
        #[arg(long, default_value = "beamform_out")]
        out: PathBuf,
    },
    /// Score an envelope file against the configured regions.
    Evaluate {
        /// Input envelope file.
        envelope: PathBuf,
        /// Optional file for the metrics JSON (stdout always gets it).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run off, fixed:1, fixed:4, and adaptive on one simulated frame and
    /// summarize contrast and gCNR per variant.
    Compare {
        /// Output directory.
        #[arg(long, default_value = "compare_out")]
        out: PathBuf,
    },
}

fn configure_threads(threads: &str) -> Result<()> {
    if threads == "auto" {
        return Ok(());
    }
    let count: usize = threads
        .parse()
        .ok()
        .filter(|n| *n >= 1)
        .ok_or_else(|| {
            Error::Validation(format!(
                "--threads expects a positive count or \"auto\", got {threads:?}"
            ))
        })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(count)
        .build_global()
        .map_err(|e| Error::Validation(format!("thread pool: {e}")))
}

fn load_config(cli: &Cli) -> Result<PipelineConfig> {
    let mut config = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config = config.with_seed(seed);
    }
    Ok(config)
}

fn run(cli: Cli) -> Result<()> {
    configure_threads(&cli.threads)?;
    let config = load_config(&cli)?;
    match cli.command {
        Command::Simulate { out } => {
            let summary = cmd_simulate(&config, &out)?;
            println!(
                "wrote {}: {} elements x {} samples ({:.1} us), rms {:.3e}, {} scatterers",
                out.display(),
                summary.num_elements,
                summary.num_samples,
                summary.duration_seconds * 1e6,
                summary.rms_amplitude,
                summary.num_scatterers
            );
        }
        Command::Beamform { input, fxpf, out } => {
            let mode: FxpfMode = fxpf.parse()?;
            cmd_beamform(&input, &config, mode, &out)?;
            println!("wrote {}/envelope.fenv and {}/image.pgm", out.display(), out.display());
        }
        Command::Evaluate { envelope, out } => {
            let report = cmd_evaluate(&envelope, &config)?;
            let text = report.to_json_pretty();
            if let Some(path) = out {
                std::fs::write(path, &text)?;
            }
            print!("{text}");
        }
        Command::Compare { out } => {
            let report = cmd_compare(&config, &out)?;
            print!("{}", report.to_table());
            println!("wrote {}/compare.json", out.display());
        }
    }
    Ok(())
}

fn main() {
    env_logger::init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{e}");
            std::process::exit(0);
        }
        Err(e) => {
            eprint!("{e}");
            std::process::exit(1);
        }
    };
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
