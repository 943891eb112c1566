//! `halalnet` command-line front end.
//!
//! Any `--key value` not declared by a subcommand is an override for that
//! subcommand's config; unknown keys are rejected. The resolved config is
//! written to stderr before work starts.
//!
//! Exit status: 0 success, 1 usage or config error, 2 data error,
//! 3 numerical failure.

mod commands;
mod overrides;

use clap::{CommandFactory, FromArgMatches, Parser, Subcommand};
use halalnet::{Error, ErrorClass};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(name = "halalnet", version, about = "One-shot slaughter-cut verification")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Segment every PPM image in a directory.
    ///
    /// Writes `masks/<name>.pgm`, `masked/<name>.ppm`, `summary.csv` and
    /// `failures.txt`. Overrides: segmentation keys.
    Segment {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Segmentation config file.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Train a Siamese model on a manifest.
    ///
    /// Writes `best.hnet`, `last.hnet`, `history.csv`, `train.cfg` and the
    /// `split/` manifests to `--out`. Overrides: training keys.
    Train {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Backbone config; defaults to the built-in desk config.
        #[arg(long)]
        backbone: Option<PathBuf>,
        /// Training config file.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Segmentation config file.
        #[arg(long)]
        segmentation: Option<PathBuf>,
        /// Continue from a checkpoint saved with training state.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Evaluate a checkpoint on seeded pairs drawn from a manifest.
    ///
    /// Overrides: `pairs` (256), `seed` (0), `threshold` (0.5),
    /// `segmented_probability` (2/3).
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        /// Also write the report as CSV.
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long)]
        segmentation: Option<PathBuf>,
    },
    /// Classify images against a control set.
    ///
    /// Overrides: `aggregation` (mean or max).
    Infer {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Lines of `<class-label> <image-path>`.
        #[arg(long)]
        control: PathBuf,
        /// Feed raw images to the network.
        #[arg(long)]
        no_segment: bool,
        #[arg(long)]
        segmentation: Option<PathBuf>,
        #[arg(required = true)]
        images: Vec<PathBuf>,
    },
    /// Generate the synthetic dataset.
    ///
    /// Overrides: synthetic spec keys.
    Synth {
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write augmented variants of one image.
    ///
    /// Overrides: `count` (8), `seed` (0), `aug_probability`,
    /// `aug_techniques`.
    AugmentPreview {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e.class() {
        ErrorClass::Usage => 1,
        ErrorClass::Data => 2,
        ErrorClass::Numerical => 3,
    }
}

fn main() -> ExitCode {
    let command = Cli::command();
    let (argv, pairs) = match overrides::partition(&command, std::env::args_os().collect()) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    let cli = match command.try_get_matches_from(argv).and_then(|m| Cli::from_arg_matches(&m)) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let result = match cli.cmd {
        Cmd::Segment { input, output, config } => commands::segment(&input, &output, config.as_deref(), pairs),
        Cmd::Train { manifest, out, backbone, config, segmentation, resume } => commands::train(commands::TrainArgs {
            manifest,
            out,
            backbone,
            config,
            segmentation,
            resume,
            overrides: pairs,
        }),
        Cmd::Eval { checkpoint, manifest, report, segmentation } => {
            commands::eval(&checkpoint, &manifest, report.as_deref(), segmentation.as_deref(), pairs)
        }
        Cmd::Infer { checkpoint, control, no_segment, segmentation, images } => {
            commands::infer(&checkpoint, &control, !no_segment, segmentation.as_deref(), &images, pairs)
        }
        Cmd::Synth { spec, out } => commands::synth(spec.as_deref(), &out, pairs),
        Cmd::AugmentPreview { input, out } => commands::augment_preview(&input, &out, pairs),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
