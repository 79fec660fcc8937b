use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use log::{info, warn};
use ndarray::Array2;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::dataset::{labelled_pairs, load_targets, TargetKind};
use super::features::FeatureExtractor;
use super::model_file::{save_model, Provenance, SavedModel};
use crate::dbn::{fine_tune, pretrain_stack, DbnModel, FineTuneConfig, HeadKind, PretrainConfig, TrainReport};
use crate::error::{with_path, Error, Result};
use crate::extractor::{load_weights, TapSet};
use crate::image_io::read_image;
use crate::sampler::{
    augment_contrast, draw_pixels, CoreSample, Normalizer, NormalizerAccumulator, PixelSource, SamplingMode, Targets,
    DEFAULT_CONTRAST_FACTORS, DEFAULT_STRIDE,
};

const STREAM_PRETRAIN: u64 = 1;
const STREAM_HEAD: u64 = 2;
const STREAM_FINE_TUNE: u64 = 3;
const STREAM_SAMPLE: u64 = 1 << 32;
const STREAM_VALIDATION: u64 = 2 << 32;

/// Independent seed for one purpose, derived from the run seed.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng.next_u64()
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub images: PathBuf,
    pub labels: PathBuf,
    pub weights: PathBuf,
    pub target: TargetKind,
    /// `"blocks"` or a comma-separated list of layer names; empty for raw
    /// input channels only.
    pub taps: String,
    /// Pixels drawn from each image and from each of its contrast variants.
    pub samples_per_image: usize,
    pub sampling: SamplingMode,
    pub stride: usize,
    pub contrast: Vec<f64>,
    /// Hidden layer widths. Empty trains the head directly on the features.
    pub hidden: Vec<usize>,
    /// The `seed` fields of both configs are replaced by seeds derived from `seed`.
    pub pretrain: PretrainConfig,
    pub fine_tune: FineTuneConfig,
    pub seed: u64,
    pub out: PathBuf,
    /// Directory with `images/` and `labels/` subdirectories.
    pub validation: Option<PathBuf>,
    /// Stop on validation stalls, using `fine_tune.patience` (default 5).
    pub early_stop: bool,
}

impl TrainConfig {
    pub fn new(
        images: PathBuf,
        labels: PathBuf,
        weights: PathBuf,
        target: TargetKind,
        out: PathBuf,
        seed: u64,
    ) -> Self {
        Self {
            images,
            labels,
            weights,
            target,
            taps: "blocks".into(),
            samples_per_image: 500,
            sampling: SamplingMode::Uniform,
            stride: DEFAULT_STRIDE,
            contrast: DEFAULT_CONTRAST_FACTORS.to_vec(),
            hidden: vec![1024, 512, 128],
            pretrain: PretrainConfig::default(),
            fine_tune: FineTuneConfig::default(),
            seed,
            out,
            validation: None,
            early_stop: false,
        }
    }

    pub fn log_path(&self) -> PathBuf {
        suffixed(&self.out, "log")
    }

    pub fn metrics_path(&self) -> PathBuf {
        suffixed(&self.out, "metrics")
    }
}

fn suffixed(path: &Path, ext: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub model: SavedModel,
    pub report: TrainReport,
    /// Rows the DBN was trained on, after normalization.
    pub sample_rows: usize,
}

/// Raw (unnormalized) sampled rows from a set of labelled images, plus a
/// normalizer accumulator fed with every pixel of every image.
struct Collected {
    samples: Vec<CoreSample>,
    acc: NormalizerAccumulator,
}

fn collect(
    pairs: &[(PathBuf, PathBuf)],
    fx: &FeatureExtractor,
    config: &TrainConfig,
    contrast: &[f64],
    stream: u64,
) -> Result<Collected> {
    let mut acc = NormalizerAccumulator::new(fx.k());
    let mut samples = Vec::new();
    for (i, (image_path, label_path)) in pairs.iter().enumerate() {
        let image = read_image(image_path)?;
        let (w, h) = (image.width(), image.height());
        let targets = load_targets(label_path, &config.target, w, h)?;
        let classes = match &targets {
            Targets::Classes(c) => Some(c.as_slice()),
            Targets::Values(_) => None,
        };
        let n = config.samples_per_image.min(w * h);
        if n < config.samples_per_image {
            warn!("{}: only {} pixels, sampling all of them", image_path.display(), w * h);
        }
        for (j, variant) in augment_contrast(&image, contrast)?.iter().enumerate() {
            let id = i * contrast.len() + j;
            let picked = draw_pixels(
                w * h,
                n,
                derive_seed(config.seed, stream + id as u64),
                config.sampling,
                classes,
            )?;
            let slot: HashMap<usize, usize> = picked.iter().enumerate().map(|(r, &p)| (p, r)).collect();
            let mut rows = Array2::zeros((n, fx.k()));
            fx.stream_core(variant, |pixels, chunk| {
                acc.update(chunk)?;
                for (r, p) in pixels.iter().enumerate() {
                    if let Some(&s) = slot.get(p) {
                        rows.row_mut(s).assign(&chunk.row(r));
                    }
                }
                Ok(())
            })
            .map_err(|e| with_path(e, image_path))?;
            let targets = match &targets {
                Targets::Classes(c) => Targets::Classes(picked.iter().map(|&p| c[p]).collect()),
                Targets::Values(v) => Targets::Values(picked.iter().map(|&p| v[p]).collect()),
            };
            samples.push(CoreSample {
                features: rows,
                targets: Some(targets),
                sources: picked
                    .iter()
                    .map(|&p| PixelSource {
                        image: id,
                        x: p % w,
                        y: p / w,
                    })
                    .collect(),
            });
        }
        info!("cores: {} ({}/{})", image_path.display(), i + 1, pairs.len());
    }
    Ok(Collected { samples, acc })
}

fn normalized(samples: &[CoreSample], normalizer: &Normalizer) -> Result<CoreSample> {
    let mut all = CoreSample::concat(samples)?;
    normalizer.apply_in_place(all.features.view_mut())?;
    Ok(all)
}

/// Sample cores from the training set, fit the normalizer, pretrain and
/// fine-tune the network, and write the model file, a text log
/// (`<out>.log`) and a `key=value` metrics file (`<out>.metrics`).
pub fn train_command(config: &TrainConfig) -> Result<TrainOutcome> {
    if config.samples_per_image == 0 {
        return Err(Error::Argument("samples per image must be at least 1".into()));
    }
    if config.early_stop && config.validation.is_none() {
        return Err(Error::Argument("early stopping needs a validation directory".into()));
    }
    let pairs = labelled_pairs(&config.images, &config.labels)?;
    if pairs.is_empty() {
        return Err(Error::Argument(format!(
            "no training images in {}",
            config.images.display()
        )));
    }
    let network = load_weights(&config.weights)?;
    let taps = if config.taps.trim().is_empty() {
        TapSet::empty()
    } else {
        TapSet::parse(&config.taps, &network)?
    };
    let input_channels = network.input_channels();
    let fx = FeatureExtractor::new(network, taps, config.stride)?;
    let contrast = if config.contrast.is_empty() {
        vec![1.0]
    } else {
        config.contrast.clone()
    };
    info!("{} training images, k = {}", pairs.len(), fx.k());

    let Collected { samples, acc } = collect(&pairs, &fx, config, &contrast, STREAM_SAMPLE)?;
    let normalizer = acc.finish()?;
    let sample = normalized(&samples, &normalizer)?;

    let validation = match &config.validation {
        None => None,
        Some(dir) => {
            let vpairs = labelled_pairs(&dir.join("images"), &dir.join("labels"))?;
            if vpairs.is_empty() {
                return Err(Error::Argument(format!("no validation images in {}", dir.display())));
            }
            let v = collect(&vpairs, &fx, config, &[1.0], STREAM_VALIDATION)?;
            Some(normalized(&v.samples, &normalizer)?)
        }
    };

    let (head_kind, outputs, palette) = match &config.target {
        TargetKind::Classes(p) => (HeadKind::Logistic, p.class_count(), Some(p.clone())),
        TargetKind::Values => (HeadKind::Linear, 1, None),
    };
    let pretrain = PretrainConfig {
        seed: derive_seed(config.seed, STREAM_PRETRAIN),
        ..config.pretrain.clone()
    };
    let mut fine = FineTuneConfig {
        seed: derive_seed(config.seed, STREAM_FINE_TUNE),
        ..config.fine_tune.clone()
    };
    if config.early_stop {
        fine.patience = Some(fine.patience.unwrap_or(5));
    } else {
        fine.patience = None;
    }

    let mut recon_errors = Vec::new();
    let hidden = if config.hidden.is_empty() {
        Vec::new()
    } else {
        let sizes: Vec<usize> = std::iter::once(fx.k()).chain(config.hidden.iter().copied()).collect();
        let p = pretrain_stack(&sizes, sample.features.view(), &pretrain)?;
        recon_errors = p.recon_errors.clone();
        p.layers()
    };
    let initial = DbnModel::assemble(
        hidden,
        fx.k(),
        head_kind,
        outputs,
        derive_seed(config.seed, STREAM_HEAD),
    )?;
    let (dbn, mut report) = fine_tune(&initial, &sample, &fine, validation.as_ref())?;
    report.recon_errors = recon_errors;

    let model = SavedModel {
        dbn,
        normalizer,
        taps: fx.taps().names().to_vec(),
        stride: fx.stride(),
        input_channels,
        palette,
        provenance: Provenance {
            seed: config.seed,
            samples_per_image: config.samples_per_image,
            sampling: config.sampling,
            contrast,
            pretrain,
            fine_tune: fine,
        },
    };
    save_model(&model, &config.out)?;
    let (log, metrics) = render_report(&model, &report, sample.len());
    fs::write(config.log_path(), log).map_err(|e| with_path(e.into(), &config.log_path()))?;
    fs::write(config.metrics_path(), metrics).map_err(|e| with_path(e.into(), &config.metrics_path()))?;
    Ok(TrainOutcome {
        model,
        report,
        sample_rows: sample.len(),
    })
}

fn render_report(model: &SavedModel, report: &TrainReport, rows: usize) -> (String, String) {
    let sizes = model.dbn.layer_sizes();
    let val_name = match model.dbn.head_kind {
        HeadKind::Logistic => "validation accuracy",
        HeadKind::Linear => "validation mse",
    };
    let loss_name = match model.dbn.head_kind {
        HeadKind::Logistic => "nll",
        HeadKind::Linear => "mse",
    };
    let mut log = String::new();
    let _ = writeln!(
        log,
        "layers {sizes:?}, {rows} training rows, seed {}",
        model.provenance.seed
    );
    for (l, errs) in report.recon_errors.iter().enumerate() {
        for (e, v) in errs.iter().enumerate() {
            let _ = writeln!(log, "pretrain layer {l} epoch {e}: reconstruction error {v:.6}");
        }
    }
    for (e, v) in report.epoch_losses.iter().enumerate() {
        let _ = write!(log, "fine-tune epoch {e}: {loss_name} {v:.6}");
        if let Some(s) = report.validation.get(e) {
            let _ = write!(log, ", {val_name} {s:.6}");
        }
        log.push('\n');
    }
    if report.stopped_early {
        log.push_str("stopped early\n");
    }

    let join = |v: &[f64]| v.iter().map(f64::to_string).collect::<Vec<_>>().join(",");
    let mut m = String::new();
    let _ = writeln!(
        m,
        "layers={}",
        sizes.iter().map(usize::to_string).collect::<Vec<_>>().join(",")
    );
    let _ = writeln!(m, "k={}", sizes[0]);
    let _ = writeln!(m, "rows={rows}");
    let _ = writeln!(m, "seed={}", model.provenance.seed);
    let _ = writeln!(m, "epochs={}", report.epoch_losses.len());
    let _ = writeln!(m, "loss={loss_name}");
    let _ = writeln!(m, "epoch_losses={}", join(&report.epoch_losses));
    if let Some(l) = report.epoch_losses.last() {
        let _ = writeln!(m, "final_loss={l}");
    }
    for (l, errs) in report.recon_errors.iter().enumerate() {
        let _ = writeln!(m, "recon_errors.{l}={}", join(errs));
    }
    if !report.validation.is_empty() {
        let _ = writeln!(m, "validation={}", join(&report.validation));
    }
    if let Some(v) = report.final_validation() {
        let _ = writeln!(m, "final_validation={v}");
    }
    let _ = writeln!(m, "stopped_early={}", report.stopped_early);
    (log, m)
}

/// Parse `key=value` lines, skipping blanks, comments and `[section]` headers.
pub fn parse_key_values(text: &str) -> HashMap<String, String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#') && !l.starts_with('['))
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .collect()
}
