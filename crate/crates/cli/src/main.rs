use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use coresample::dbn::{FineTuneConfig, PretrainConfig};
use coresample::pipeline::{
    evaluate, evaluate_regression, predict_command, train_command, EvalOptions, PredictConfig, TargetKind, TrainConfig,
};
use coresample::sampler::{Palette, SamplingMode, DEFAULT_STRIDE};
use coresample::{Error, Result};

/// Pixel labelling with CNN hypercolumns and a deep belief network.
#[derive(Parser, Debug)]
#[command(name = "coresample", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train a model from images and label images.
    Train(TrainArgs),
    /// Label every image in a directory with a trained model.
    Predict(PredictArgs),
    /// Compare predicted label images with ground truth.
    Eval(EvalArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Sampling {
    Uniform,
    Stratified,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(long)]
    images: PathBuf,
    #[arg(long)]
    labels: PathBuf,
    /// Feature extractor weights (CSFW).
    #[arg(long)]
    weights: PathBuf,
    /// Class palette; label colours not listed map to its rest class.
    #[arg(long, required_unless_present = "regression", conflicts_with = "regression")]
    palette: Option<PathBuf>,
    /// Labels are single-channel raw images of real values.
    #[arg(long)]
    regression: bool,
    /// "blocks", a comma-separated list of layer names, or "none".
    #[arg(long, default_value = "blocks")]
    taps: String,
    #[arg(long, default_value_t = 500)]
    samples_per_image: usize,
    #[arg(long, value_enum, default_value = "uniform")]
    sampling: Sampling,
    #[arg(long, default_value_t = DEFAULT_STRIDE)]
    stride: usize,
    /// Contrast factors, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "0.8,1.0,1.2")]
    contrast: Vec<f64>,
    /// Hidden layer widths, comma separated, or "none".
    #[arg(long, default_value = "1024,512,128")]
    hidden: String,
    #[arg(long, default_value_t = 10)]
    pretrain_epochs: usize,
    #[arg(long, default_value_t = 0.01)]
    pretrain_lr: f64,
    #[arg(long, default_value_t = 1)]
    gibbs_k: usize,
    /// Persistent chains per RBM.
    #[arg(long, default_value_t = 15)]
    chains: usize,
    #[arg(long, default_value_t = 20)]
    epochs: usize,
    #[arg(long, default_value_t = 0.1)]
    lr: f64,
    /// Learning rate at epoch t is lr / (1 + lr_decay * t).
    #[arg(long, default_value_t = 1.0)]
    lr_decay: f64,
    #[arg(long, default_value_t = 64)]
    batch_size: usize,
    #[arg(long, default_value_t = 1e-5)]
    l1: f64,
    #[arg(long, default_value_t = 1e-4)]
    l2: f64,
    #[arg(long, default_value_t = 0.5)]
    dropout: f64,
    #[arg(long)]
    seed: u64,
    /// Directory with images/ and labels/ scored after every epoch.
    #[arg(long)]
    validation: Option<PathBuf>,
    /// Stop when the validation score stalls.
    #[arg(long, requires = "validation")]
    early_stop: bool,
    #[arg(long, default_value_t = 5)]
    patience: usize,
    /// Model file to write; the log and metrics go next to it.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    weights: PathBuf,
    #[arg(long)]
    images: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    truth: PathBuf,
    /// Palette for label images; without it raw regression outputs are compared.
    #[arg(long)]
    palette: Option<PathBuf>,
    /// Leave pixels of the palette's rest class out of every metric.
    #[arg(long, requires = "palette")]
    ignore_rest: bool,
    #[arg(long)]
    report: PathBuf,
}

fn parse_hidden(spec: &str) -> Result<Vec<usize>> {
    let spec = spec.trim();
    if spec.is_empty() || spec.eq_ignore_ascii_case("none") {
        return Ok(Vec::new());
    }
    spec.split(',')
        .map(|s| {
            s.trim()
                .parse::<usize>()
                .ok()
                .filter(|&n| n > 0)
                .ok_or_else(|| Error::Argument(format!("bad hidden layer width {s:?}")))
        })
        .collect()
}

fn train(a: TrainArgs) -> Result<()> {
    let target = match &a.palette {
        Some(p) => TargetKind::Classes(Palette::load(p)?),
        None => TargetKind::Values,
    };
    let taps = if a.taps.trim().eq_ignore_ascii_case("none") {
        String::new()
    } else {
        a.taps.clone()
    };
    let config = TrainConfig {
        taps,
        samples_per_image: a.samples_per_image,
        sampling: match a.sampling {
            Sampling::Uniform => SamplingMode::Uniform,
            Sampling::Stratified => SamplingMode::Stratified,
        },
        stride: a.stride,
        contrast: a.contrast.clone(),
        hidden: parse_hidden(&a.hidden)?,
        pretrain: PretrainConfig {
            epochs: a.pretrain_epochs,
            lr: a.pretrain_lr,
            gibbs_k: a.gibbs_k,
            batch_size: a.batch_size,
            chains: a.chains,
            seed: 0,
        },
        fine_tune: FineTuneConfig {
            lr: a.lr,
            lr_decay: a.lr_decay,
            epochs: a.epochs,
            batch_size: a.batch_size,
            l1: a.l1,
            l2: a.l2,
            dropout: a.dropout,
            seed: 0,
            patience: Some(a.patience),
        },
        validation: a.validation.clone(),
        early_stop: a.early_stop,
        ..TrainConfig::new(a.images, a.labels, a.weights, target, a.out, a.seed)
    };
    let outcome = train_command(&config)?;
    println!(
        "trained on {} rows, {} epochs; model written to {}",
        outcome.sample_rows,
        outcome.report.epoch_losses.len(),
        config.out.display()
    );
    Ok(())
}

fn predict(a: PredictArgs) -> Result<()> {
    let written = predict_command(&PredictConfig {
        model: a.model,
        weights: a.weights,
        images: a.images,
        out: a.out.clone(),
    })?;
    println!("wrote {} images to {}", written.len(), a.out.display());
    Ok(())
}

fn eval(a: EvalArgs) -> Result<()> {
    let text = match &a.palette {
        Some(p) => {
            let palette = Palette::load(p)?;
            let options = EvalOptions {
                ignore_rest: a.ignore_rest,
            };
            evaluate(&a.pred, &a.truth, &palette, options)?.to_text()
        }
        None => evaluate_regression(&a.pred, &a.truth)?.to_text(),
    };
    fs::write(&a.report, &text)?;
    print!("{text}");
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(a) => train(a),
        Command::Predict(a) => predict(a),
        Command::Eval(a) => eval(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.category());
            ExitCode::FAILURE
        }
    }
}
