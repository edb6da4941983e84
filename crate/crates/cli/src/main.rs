use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use emohrnet_cli::commands;
use emohrnet_cli::config::load_config;
use emohrnet_cli::CliError;

/// Speech emotion recognition: log-Mel features, SpecAugment-style masking,
/// a multi-resolution CNN classifier, and a deterministic training loop.
#[derive(Parser)]
#[command(name = "emohrnet", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute and cache spectrograms for every manifest row
    Preprocess {
        /// Engine config JSON (defaults apply when omitted)
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory for cache files and the summary
        #[arg(long)]
        out: PathBuf,
        /// Master seed (overrides train.seed)
        #[arg(long)]
        seed: Option<u64>,
        /// Config overrides, e.g. --set dsp.n_mels=32
        #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
        set: Vec<String>,
    },
    /// Write original / augmented / difference spectrogram images
    AugmentPreview {
        /// A WAV file to preview
        sample: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
        set: Vec<String>,
    },
    /// Train and write best/last checkpoints, history CSV, resolved config
    Train {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Continue from a previous last.ckpt
        #[arg(long)]
        resume: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
        set: Vec<String>,
    },
    /// Evaluate a checkpoint on a manifest split
    Eval {
        /// Checkpoint file to evaluate
        checkpoint: PathBuf,
        /// Which split to score: train, val, or test
        #[arg(long, default_value = "test")]
        split: String,
        /// Where to write eval-report.json (stdout only when omitted)
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides applied on top of the checkpoint's embedded config
        #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
        set: Vec<String>,
    },
    /// Run per-op and full-model gradient checks
    Gradcheck {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
        set: Vec<String>,
        /// Deliberately corrupt one gradient as a negative control
        #[arg(long, hide = true)]
        corrupt_gradient: bool,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Preprocess {
            config,
            out,
            seed,
            set,
        } => {
            let cfg = load_config(config.as_deref(), seed, &set)?;
            commands::cmd_preprocess(&cfg, &out)
        }
        Command::AugmentPreview {
            sample,
            config,
            out,
            seed,
            set,
        } => {
            let cfg = load_config(config.as_deref(), seed, &set)?;
            commands::cmd_augment_preview(&cfg, &sample, &out)
        }
        Command::Train {
            config,
            out,
            resume,
            seed,
            set,
        } => {
            let cfg = load_config(config.as_deref(), seed, &set)?;
            commands::cmd_train(&cfg, &out, resume.as_deref()).map(|_| ())
        }
        Command::Eval {
            checkpoint,
            split,
            out,
            set,
        } => commands::cmd_eval(&checkpoint, &split, &set, out.as_deref()).map(|_| ()),
        Command::Gradcheck {
            config,
            seed,
            set,
            corrupt_gradient,
        } => {
            let cfg = load_config(config.as_deref(), seed, &set)?;
            commands::cmd_gradcheck(&cfg, cfg.train.seed, corrupt_gradient)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
