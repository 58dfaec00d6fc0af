use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use spectro_cli::{
    cmd_eval, cmd_generate, cmd_predict, cmd_train, EvalArgs, GenerateArgs, PredictArgs, TrainArgs,
};

/// Synthetic spectroscopy bench: generate seeded spectrum-image datasets,
/// train from-scratch models on them, and evaluate or classify.
#[derive(Parser)]
#[command(name = "spectro", version, about)]
struct Cli {
    /// Worker threads for generation and batch gradients (default: all
    /// cores). Results are identical for any thread count.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render a dataset of seeded spectrum images plus its manifest.
    Generate {
        /// Recipe config JSON (see configs/ for examples).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Built-in task name: placebo, apple, cranberry, dilution.
        #[arg(long)]
        task: Option<String>,
        /// Output dataset directory.
        #[arg(long)]
        out: PathBuf,
        /// Master seed (overrides the config value).
        #[arg(long)]
        seed: Option<u64>,
        /// Images per recipe (overrides the config value).
        #[arg(long)]
        per_class: Option<usize>,
    },
    /// Train a model on a dataset directory with a stratified split.
    Train {
        /// Dataset directory (from `generate`).
        #[arg(long)]
        data: PathBuf,
        /// Model kind: logreg, svm, linreg, cnn.
        #[arg(long)]
        model: String,
        /// Output model file (SPECMDL1).
        #[arg(long)]
        out: PathBuf,
        /// Train fraction of the stratified split.
        #[arg(long, default_value_t = 0.8)]
        split: f64,
        /// Training epochs (default depends on the model kind).
        #[arg(long)]
        epochs: Option<usize>,
        /// Seed driving the split and the batch order.
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Learning rate override.
        #[arg(long)]
        lr: Option<f64>,
        /// Mini-batch size override.
        #[arg(long)]
        batch: Option<usize>,
        /// L2 penalty override.
        #[arg(long)]
        l2: Option<f64>,
        /// Also write the per-epoch history as JSON.
        #[arg(long)]
        history: Option<PathBuf>,
        /// Feed raw 0-255 pixel values instead of dividing by 255.
        #[arg(long)]
        raw_pixels: bool,
        /// Stamp the model file with the build time (breaks byte
        /// reproducibility, off by default).
        #[arg(long)]
        timestamp: bool,
    },
    /// Evaluate a model file against a dataset and write the report.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Report JSON output path.
        #[arg(long)]
        report: PathBuf,
        /// Also write the headline metrics as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Directory for SVG plots (confusion matrix or scatter).
        #[arg(long)]
        plots: Option<PathBuf>,
    },
    /// Classify or regress a single PPM frame.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        image: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();

    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
        {
            eprintln!("error: cannot configure {threads} threads: {e}");
            return ExitCode::from(2);
        }
    }

    let result = match cli.command {
        Command::Generate {
            config,
            task,
            out,
            seed,
            per_class,
        } => cmd_generate(&GenerateArgs {
            config,
            task,
            out,
            seed,
            per_class,
        }),
        Command::Train {
            data,
            model,
            out,
            split,
            epochs,
            seed,
            lr,
            batch,
            l2,
            history,
            raw_pixels,
            timestamp,
        } => cmd_train(&TrainArgs {
            data,
            model,
            out,
            split,
            epochs,
            seed,
            learning_rate: lr,
            batch_size: batch,
            l2,
            history,
            raw_pixels,
            timestamp,
        }),
        Command::Eval {
            model,
            data,
            report,
            csv,
            plots,
        } => cmd_eval(&EvalArgs {
            model,
            data,
            report,
            csv,
            plots,
        }),
        Command::Predict { model, image } => cmd_predict(&PredictArgs { model, image }),
    };

    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code as u8)
        }
    }
}
