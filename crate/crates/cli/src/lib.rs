//! Command-line frontend for dual-channel speech enhancement.
//!
//! Exit status: 0 on success, 2 for invalid input, 3 for weight-file
//! problems, 4 for numerical failures.

mod commands;
mod config;
mod error;
mod wav;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use dcse::simkit::SceneConstraints;

pub use commands::{
    cmd_enhance, cmd_eval, cmd_init_weights, cmd_inspect, cmd_separate, cmd_simulate, enhance_file, list_wavs, load_enhancer, read_manifest,
    EvalReport, FileScore, InspectReport, SimulateOptions, MANIFEST_NAME,
};
pub use config::{FileConfig, Settings};
pub use error::{CliError, CliResult};
pub use wav::{read_wav, to_i16, write_wav, write_wav_float};

#[derive(Debug, Parser)]
#[command(name = "dcse", version, about = "Dual-channel low-SNR speech enhancement")]
pub struct Cli {
    /// TOML file with default values for the common flags.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

/// Flags shared by several subcommands; each may also come from `--config`.
#[derive(Debug, Clone, Default, Args)]
pub struct CommonFlags {
    /// Model preset (id1 … id7).
    #[arg(long)]
    pub preset: Option<String>,
    /// Weight file.
    #[arg(long)]
    pub weights: Option<PathBuf>,
    /// Aux-IVA iterations.
    #[arg(long)]
    pub iva_iters: Option<usize>,
    /// Feed the noisy spectrogram in place of the IVA estimates.
    #[arg(long)]
    pub no_iva: bool,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output file or directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Files processed in parallel.
    #[arg(long)]
    pub jobs: Option<usize>,
}

impl CommonFlags {
    fn as_file_config(&self) -> FileConfig {
        FileConfig {
            preset: self.preset.clone(),
            weights: self.weights.clone(),
            iva_iters: self.iva_iters,
            no_iva: self.no_iva.then_some(true),
            seed: self.seed,
            out: self.out.clone(),
            jobs: self.jobs,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Enhance stereo recordings into mono speech.
    Enhance {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[command(flatten)]
        flags: CommonFlags,
    },
    /// Aux-IVA separation into speech and noise images.
    Separate {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[command(flatten)]
        flags: CommonFlags,
    },
    /// Simulate reverberant two-microphone mixtures from mono corpora.
    Simulate {
        #[arg(long)]
        speech_dir: PathBuf,
        #[arg(long)]
        noise_dir: PathBuf,
        #[arg(long)]
        n_scenes: usize,
        /// Image-method reflection order limit (default: full response length).
        #[arg(long)]
        max_order: Option<usize>,
        #[command(flatten)]
        flags: CommonFlags,
    },
    /// SI-SNR of estimates against same-named references.
    Eval {
        #[arg(long)]
        est_dir: PathBuf,
        #[arg(long)]
        ref_dir: PathBuf,
        /// Write the JSON report here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Parameter and complexity report for a preset.
    Inspect {
        #[arg(long)]
        json: bool,
        #[command(flatten)]
        flags: CommonFlags,
    },
    /// Write seeded random weights for a preset.
    InitWeights {
        #[command(flatten)]
        flags: CommonFlags,
    },
}

fn settings(cli_config: Option<&PathBuf>, flags: &CommonFlags) -> CliResult<Settings> {
    let file = match cli_config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    Settings::resolve(&file, &flags.as_file_config())
}

fn require_out(s: &Settings, what: &str) -> CliResult<PathBuf> {
    s.out.clone().ok_or_else(|| CliError::Validation(format!("--out is required for {what}")))
}

/// Executes a parsed command line.
pub fn run(cli: Cli) -> CliResult<()> {
    let config = cli.config.as_ref();
    match cli.command {
        Command::Enhance { inputs, flags } => {
            let s = settings(config, &flags)?;
            for p in cmd_enhance(&inputs, &s)? {
                println!("{}", p.display());
            }
        }
        Command::Separate { inputs, flags } => {
            let s = settings(config, &flags)?;
            for [a, b] in cmd_separate(&inputs, &s)? {
                println!("{}\t{}", a.display(), b.display());
            }
        }
        Command::Simulate { speech_dir, noise_dir, n_scenes, max_order, flags } => {
            let s = settings(config, &flags)?;
            let out = require_out(&s, "simulate")?;
            let records = cmd_simulate(&SimulateOptions {
                speech_dir,
                noise_dir,
                n_scenes,
                seed: s.seed,
                out: out.clone(),
                jobs: s.jobs,
                max_order,
                constraints: SceneConstraints::default(),
            })?;
            println!("{} scenes, manifest {}", records.len(), out.join(MANIFEST_NAME).display());
        }
        Command::Eval { est_dir, ref_dir, out } => {
            let report = cmd_eval(&est_dir, &ref_dir)?;
            let json = serde_json::to_string_pretty(&report).map_err(|e| CliError::Validation(e.to_string()))?;
            match &out {
                Some(p) => std::fs::write(p, json + "\n").map_err(|e| CliError::Validation(format!("{}: {e}", p.display())))?,
                None => println!("{json}"),
            }
            if !report.is_complete() {
                let mut problems = report.missing.iter().map(|m| format!("unpaired file {m}")).collect::<Vec<_>>();
                problems.extend(report.errors.iter().cloned());
                return Err(CliError::Validation(problems.join("; ")));
            }
        }
        Command::Inspect { json, flags } => {
            let s = settings(config, &flags)?;
            let report = cmd_inspect(&s.preset, s.iva_iters)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&report).map_err(|e| CliError::Validation(e.to_string()))?);
            } else {
                println!("{report}");
            }
        }
        Command::InitWeights { flags } => {
            let s = settings(config, &flags)?;
            let out = require_out(&s, "init-weights")?;
            let n = cmd_init_weights(&s.preset, s.seed, &out)?;
            println!("{}: {n} values for preset {}", out.display(), s.preset);
        }
    }
    Ok(())
}
