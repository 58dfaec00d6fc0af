//! Command implementations behind the `spectro` binary: dataset generation,
//! training, evaluation, and single-frame prediction, glued together so
//! every run is reproducible from its seeds.

use std::path::{Path, PathBuf};

use spectro_core::error::Error;
use spectro_core::metrics::{
    accuracy, mcc, mean_hinge_loss, pearson_r, regression_accuracy, roc_auc, zero_one_loss,
    ConfusionMatrix, EpochHistory, EvaluationReport,
};
use spectro_core::models::cnn::{train_cnn, CnnConfig};
use spectro_core::models::io::{load_model, save_model};
use spectro_core::models::linear::{train_linreg, train_logreg, train_svm, LinearKind};
use spectro_core::models::{AnyModel, Prediction, TrainOptions};
use spectro_core::ppm;
use spectro_core::preprocess::{split_dataset, PixelFeatures};
use spectro_core::rng::derive_seed;
use spectro_core::sim::tasks;
use spectro_core::sim::{generate_dataset, GenerateOptions, Manifest, RecipeConfig};
use spectro_core::spectral::LabeledDataset;
use spectro_core::svg;

/// Stream tags deriving independent purpose seeds from one user seed.
pub const SEED_TAG_SPLIT: u64 = 1;
pub const SEED_TAG_TRAIN: u64 = 2;

/// Post-main error carrying the process exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.message)
    }
}

impl From<Error> for CliError {
    fn from(err: Error) -> Self {
        let code = match &err {
            Error::Io(_) => 3,
            Error::Divergence { .. } => 4,
            _ => 2,
        };
        CliError {
            code,
            message: err.to_string(),
        }
    }
}

pub type CliResult = Result<(), CliError>;

fn usage(message: impl Into<String>) -> CliError {
    CliError {
        code: 2,
        message: message.into(),
    }
}

/// Options for `spectro generate`.
#[derive(Debug, Clone)]
pub struct GenerateArgs {
    pub config: Option<PathBuf>,
    pub task: Option<String>,
    pub out: PathBuf,
    pub seed: Option<u64>,
    pub per_class: Option<usize>,
}

/// Resolve config source with flag > file > default precedence applied to
/// the seed and per-class count.
fn load_recipe_config(args: &GenerateArgs) -> Result<RecipeConfig, CliError> {
    let config = match (&args.config, &args.task) {
        (Some(path), None) => RecipeConfig::load(path)?,
        (None, Some(name)) => tasks::builtin(name).ok_or_else(|| {
            usage(format!(
                "unknown task {name:?}; built-ins: {}",
                tasks::TASK_NAMES.join(", ")
            ))
        })?,
        (Some(_), Some(_)) => return Err(usage("give either --config or --task, not both")),
        (None, None) => return Err(usage("one of --config or --task is required")),
    };
    Ok(config)
}

pub fn cmd_generate(args: &GenerateArgs) -> CliResult {
    let config = load_recipe_config(args)?;
    let master_seed = args
        .seed
        .or(config.master_seed)
        .ok_or_else(|| usage("no master seed: pass --seed or set master_seed in the config"))?;
    let per_class = args
        .per_class
        .or(config.per_class)
        .ok_or_else(|| usage("no image count: pass --per-class or set per_class in the config"))?;

    let recipes = config.resolve()?;
    let opts = GenerateOptions {
        per_class,
        master_seed,
    };
    let manifest = generate_dataset(
        &recipes,
        &config.grid,
        &config.lamp,
        &config.noise,
        &opts,
        &args.out,
    )?;
    println!(
        "generated {} images ({} recipes x {per_class}) into {}",
        manifest.items.len(),
        recipes.len(),
        args.out.display()
    );
    Ok(())
}

/// Options for `spectro train`.
#[derive(Debug, Clone)]
pub struct TrainArgs {
    pub data: PathBuf,
    pub model: String,
    pub out: PathBuf,
    pub split: f64,
    pub epochs: Option<usize>,
    pub seed: u64,
    pub learning_rate: Option<f64>,
    pub batch_size: Option<usize>,
    pub l2: Option<f64>,
    pub history: Option<PathBuf>,
    pub raw_pixels: bool,
    pub timestamp: bool,
}

fn load_dataset(dir: &Path) -> Result<LabeledDataset, CliError> {
    let manifest = Manifest::load(dir)?;
    if manifest.items.is_empty() {
        return Err(usage(format!("dataset {} is empty", dir.display())));
    }
    Ok(manifest.load_images(dir)?)
}

fn apply_overrides(mut opts: TrainOptions, args: &TrainArgs) -> TrainOptions {
    if let Some(lr) = args.learning_rate {
        opts.learning_rate = lr;
    }
    if let Some(epochs) = args.epochs {
        opts.epochs = epochs;
    }
    if let Some(batch) = args.batch_size {
        opts.batch_size = batch;
    }
    if let Some(l2) = args.l2 {
        opts.l2 = l2;
    }
    opts.seed = derive_seed(args.seed, SEED_TAG_TRAIN);
    opts
}

pub fn cmd_train(args: &TrainArgs) -> CliResult {
    let ds = load_dataset(&args.data)?;
    let split = split_dataset(&ds, args.split, derive_seed(args.seed, SEED_TAG_SPLIT))?;
    let normalize = !args.raw_pixels;

    let train_labels: Vec<usize> = split.train.iter().map(|&i| ds.labels[i]).collect();

    let (mut model, history) = match args.model.as_str() {
        "logreg" | "svm" => {
            let opts = apply_overrides(
                if args.model == "svm" {
                    TrainOptions::svm_defaults()
                } else {
                    TrainOptions::logreg_defaults()
                },
                args,
            );
            let x = PixelFeatures::from_dataset(&ds, &split.train, normalize)?;
            let (model, losses) = if args.model == "svm" {
                train_svm(&x, &train_labels, &ds.label_set, normalize, &opts)?
            } else {
                train_logreg(&x, &train_labels, &ds.label_set, normalize, &opts)?
            };
            let history = EpochHistory {
                train_loss: losses,
                ..EpochHistory::default()
            };
            (AnyModel::Linear(model), history)
        }
        "linreg" => {
            if !ds.has_dilution_targets() {
                return Err(usage(
                    "linreg needs dilution targets; this dataset's manifest has none",
                ));
            }
            let opts = apply_overrides(TrainOptions::linreg_defaults(), args);
            let x = PixelFeatures::from_dataset(&ds, &split.train, normalize)?;
            let targets: Vec<f64> = split
                .train
                .iter()
                .map(|&i| ds.dilution_percent[i].expect("targets checked"))
                .collect();
            let (model, losses) = train_linreg(&x, &targets, normalize, &opts)?;
            let history = EpochHistory {
                train_loss: losses,
                ..EpochHistory::default()
            };
            (AnyModel::Linear(model), history)
        }
        "cnn" => {
            let opts = apply_overrides(TrainOptions::cnn_defaults(), args);
            let first = &ds.images[0];
            let config = CnnConfig {
                input_h: first.height(),
                input_w: first.width(),
                input_c: first.channels(),
                ..CnnConfig::default_for_classes(ds.label_set.len())
            };
            let train_imgs: Vec<_> = split.train.iter().map(|&i| &ds.images[i]).collect();
            let val_imgs: Vec<_> = split.test.iter().map(|&i| &ds.images[i]).collect();
            let val_labels: Vec<usize> = split.test.iter().map(|&i| ds.labels[i]).collect();
            let (model, history) = train_cnn(
                &train_imgs,
                &train_labels,
                &val_imgs,
                &val_labels,
                &ds.label_set,
                &config,
                normalize,
                &opts,
            )?;
            (AnyModel::Cnn(model), history)
        }
        other => {
            return Err(usage(format!(
                "unknown model kind {other:?}; expected logreg, svm, linreg or cnn"
            )))
        }
    };

    if args.timestamp {
        let stamp = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs().to_string())
            .unwrap_or_default();
        match &mut model {
            AnyModel::Linear(m) => m.training.timestamp = Some(stamp),
            AnyModel::Cnn(m) => m.training.timestamp = Some(stamp),
        }
    }

    save_model(&model, &args.out)?;
    if let Some(history_path) = &args.history {
        let text = serde_json::to_string_pretty(&history).map_err(Error::from)?;
        std::fs::write(history_path, text + "\n").map_err(Error::from)?;
    }

    let report = evaluate_model(&model, &ds, &split.test)?;
    print_report_summary("test", &report);
    println!("model written to {}", args.out.display());
    Ok(())
}

/// Options for `spectro eval`.
#[derive(Debug, Clone)]
pub struct EvalArgs {
    pub model: PathBuf,
    pub data: PathBuf,
    pub report: PathBuf,
    pub csv: Option<PathBuf>,
    pub plots: Option<PathBuf>,
}

pub fn cmd_eval(args: &EvalArgs) -> CliResult {
    let model = load_model(&args.model)?;
    let ds = load_dataset(&args.data)?;
    let all: Vec<usize> = (0..ds.len()).collect();
    let report = evaluate_model(&model, &ds, &all)?;

    std::fs::write(&args.report, report.to_json()?).map_err(Error::from)?;
    if let Some(csv_path) = &args.csv {
        std::fs::write(csv_path, report.to_csv()).map_err(Error::from)?;
    }
    if let Some(plots_dir) = &args.plots {
        std::fs::create_dir_all(plots_dir).map_err(Error::from)?;
        write_plots(&model, &ds, &all, &report, plots_dir)?;
    }
    print_report_summary("eval", &report);
    println!("report written to {}", args.report.display());
    Ok(())
}

fn write_plots(
    model: &AnyModel,
    ds: &LabeledDataset,
    indices: &[usize],
    report: &EvaluationReport,
    dir: &Path,
) -> CliResult {
    if let Some(confusion) = &report.confusion {
        let k = confusion.len();
        let mut cm_truth = Vec::new();
        let mut cm_pred = Vec::new();
        for (i, row) in confusion.iter().enumerate() {
            for (j, &n) in row.iter().enumerate() {
                for _ in 0..n {
                    cm_truth.push(i);
                    cm_pred.push(j);
                }
            }
        }
        let cm = ConfusionMatrix::from_predictions(&cm_truth, &cm_pred, k)?;
        std::fs::write(
            dir.join("confusion.svg"),
            svg::confusion_matrix_svg(&cm, model.label_set()),
        )
        .map_err(Error::from)?;
    }
    if matches!(model, AnyModel::Linear(m) if m.kind == LinearKind::Linreg) {
        let mut targets = Vec::new();
        let mut preds = Vec::new();
        for &i in indices {
            let target = ds.dilution_percent[i].ok_or_else(|| {
                Error::config("regression scatter needs dilution targets".to_string())
            })?;
            match model.predict_image(&ds.images[i])? {
                Prediction::Dilution { percent, .. } => {
                    targets.push(target);
                    preds.push(percent);
                }
                _ => unreachable!("linreg predicts dilution"),
            }
        }
        std::fs::write(
            dir.join("scatter.svg"),
            svg::scatter_svg(&targets, &preds, "true dilution %", "predicted dilution %"),
        )
        .map_err(Error::from)?;
    }
    Ok(())
}

/// Options for `spectro predict`.
#[derive(Debug, Clone)]
pub struct PredictArgs {
    pub model: PathBuf,
    pub image: PathBuf,
}

pub fn cmd_predict(args: &PredictArgs) -> CliResult {
    let model = load_model(&args.model)?;
    let img = ppm::read_file(&args.image)?;
    match model.predict_image(&img)? {
        Prediction::Class {
            label,
            probability,
            score,
            ..
        } => {
            if let Some(p) = probability {
                println!("{label} p={p:.4}");
            } else if let Some(s) = score {
                println!("{label} score={s:+.4}");
            } else {
                println!("{label}");
            }
        }
        Prediction::Dilution { percent, clamped } => {
            let suffix = if clamped { " (clamped)" } else { "" };
            println!("dilution {percent:.1}%{suffix}");
        }
    }
    Ok(())
}

/// Evaluate a model over dataset items `indices` and assemble the report.
pub fn evaluate_model(
    model: &AnyModel,
    ds: &LabeledDataset,
    indices: &[usize],
) -> Result<EvaluationReport, CliError> {
    if indices.is_empty() {
        return Err(usage("evaluation set is empty"));
    }
    let mut report = EvaluationReport {
        model_kind: model.kind_str().to_string(),
        label_set: model.label_set().to_vec(),
        samples: indices.len(),
        ..EvaluationReport::default()
    };

    if let AnyModel::Linear(m) = model {
        if m.kind == LinearKind::Linreg {
            if !indices
                .iter()
                .all(|&i| ds.dilution_percent[i].is_some())
            {
                return Err(usage(
                    "regression evaluation needs dilution targets in the manifest",
                ));
            }
            let mut preds = Vec::with_capacity(indices.len());
            let mut targets = Vec::with_capacity(indices.len());
            let mut clamped_count = 0usize;
            for &i in indices {
                let x = model.features_for(&ds.images[i]);
                let (p, clamped) = m.predict_dilution(&x)?;
                preds.push(p);
                targets.push(ds.dilution_percent[i].expect("checked above"));
                clamped_count += clamped as usize;
            }
            report.pearson_r = Some(pearson_r(&preds, &targets)?);
            report.regression_accuracy = Some(regression_accuracy(&preds, &targets)?);
            report.clamped_predictions = Some(clamped_count);
            return Ok(report);
        }
    }

    // Classification path. Label sets must agree exactly: class indices are
    // meaningful in both directions.
    if model.label_set() != ds.label_set {
        return Err(usage(format!(
            "label-set mismatch: model has {:?}, dataset has {:?}",
            model.label_set(),
            ds.label_set
        )));
    }
    let k = ds.label_set.len();
    let binary = k == 2;
    let mut truth = Vec::with_capacity(indices.len());
    let mut pred = Vec::with_capacity(indices.len());
    let mut positive_scores: Vec<f64> = Vec::new();
    let mut margins: Vec<f64> = Vec::new();

    for &i in indices {
        truth.push(ds.labels[i]);
        match model {
            AnyModel::Linear(m) => {
                let x = model.features_for(&ds.images[i]);
                pred.push(m.predict_class(&x)?);
                if binary {
                    match m.kind {
                        LinearKind::Logreg => {
                            positive_scores.push(m.predict_proba(&x)?[1]);
                            margins.push(m.binary_score(&x)?);
                        }
                        LinearKind::Svm => {
                            let s = m.binary_score(&x)?;
                            positive_scores.push(s);
                            margins.push(s);
                        }
                        LinearKind::Linreg => unreachable!("handled above"),
                    }
                }
            }
            AnyModel::Cnn(m) => {
                let probs = m.forward_image(&ds.images[i])?;
                pred.push(spectro_core::models::argmax_tie_low(&probs));
                if binary {
                    positive_scores.push(probs[1]);
                }
            }
        }
    }

    let cm = ConfusionMatrix::from_predictions(&truth, &pred, k)?;
    report.accuracy_percent = Some(accuracy(&cm)?);
    report.zero_one_loss_percent = Some(zero_one_loss(&cm)?);
    if binary {
        report.mcc = Some(mcc(&cm)?);
        let bool_truth: Vec<bool> = truth.iter().map(|&t| t == 1).collect();
        if bool_truth.iter().any(|&b| b) && bool_truth.iter().any(|&b| !b) {
            report.roc_auc = Some(roc_auc(&positive_scores, &bool_truth)?);
        }
        if !margins.is_empty() {
            let pm1: Vec<f64> = truth.iter().map(|&t| if t == 1 { 1.0 } else { -1.0 }).collect();
            report.mean_hinge_loss = Some(mean_hinge_loss(&margins, &pm1)?);
        }
    }
    report.confusion = Some(cm.rows());
    Ok(report)
}

fn print_report_summary(stage: &str, report: &EvaluationReport) {
    let mut parts = vec![format!("{stage}: n={}", report.samples)];
    if let Some(v) = report.accuracy_percent {
        parts.push(format!("accuracy={v:.2}%"));
    }
    if let Some(v) = report.zero_one_loss_percent {
        parts.push(format!("loss={v:.2}%"));
    }
    if let Some(v) = report.mean_hinge_loss {
        parts.push(format!("hinge={v:.4}"));
    }
    if let Some(v) = report.mcc {
        parts.push(format!("mcc={v:.4}"));
    }
    if let Some(v) = report.roc_auc {
        parts.push(format!("auc={v:.4}"));
    }
    if let Some(v) = report.pearson_r {
        parts.push(format!("r={v:.4}"));
    }
    if let Some(v) = report.regression_accuracy {
        parts.push(format!("regression-accuracy={v:.2} (100 - MAE reconstruction)"));
    }
    println!("{}", parts.join("  "));
}
