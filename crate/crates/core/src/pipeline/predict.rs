use std::fs;
use std::path::{Path, PathBuf};

use log::info;

use super::dataset::list_images;
use super::features::FeatureExtractor;
use super::model_file::{load_model, SavedModel};
use crate::dbn::HeadKind;
use crate::error::{with_path, Error, Result};
use crate::extractor::{load_weights, NetworkModel, TapSet};
use crate::image_io::{read_image, write_indexed_png, write_raw_image};
use crate::sampler::Targets;
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PredictConfig {
    pub model: PathBuf,
    pub weights: PathBuf,
    pub images: PathBuf,
    pub out: PathBuf,
}

/// Rebuild the feature extractor a model was trained with, checking that the
/// weights produce hypercolumns of the length the model expects.
pub fn extractor_for(saved: &SavedModel, network: NetworkModel) -> Result<FeatureExtractor> {
    if network.input_channels() != saved.input_channels {
        return Err(Error::Validation(format!(
            "model was trained on {}-channel images but the weights take {} channels",
            saved.input_channels,
            network.input_channels()
        )));
    }
    let fx = FeatureExtractor::new(network, TapSet::new(saved.taps.iter().cloned()), saved.stride)?;
    if fx.k() != saved.normalizer.k() {
        return Err(Error::Validation(format!(
            "model expects k = {} features per pixel but the weights and taps give k = {}",
            saved.normalizer.k(),
            fx.k()
        )));
    }
    Ok(fx)
}

/// Predict every pixel of `image`, streaming its core through the network.
/// Classes for a logistic head, values for a linear head, row-major.
pub fn predict_image(saved: &SavedModel, fx: &FeatureExtractor, image: &Tensor) -> Result<Targets> {
    let n = image.width() * image.height();
    let mut out = match saved.dbn.head_kind {
        HeadKind::Logistic => Targets::Classes(vec![0; n]),
        HeadKind::Linear => Targets::Values(vec![0.0; n]),
    };
    fx.stream_core(image, |pixels, rows| {
        let rows = saved.normalizer.apply(rows)?;
        match (saved.dbn.predict(rows.view())?, &mut out) {
            (Targets::Classes(p), Targets::Classes(o)) => pixels.iter().zip(p).for_each(|(&i, c)| o[i] = c),
            (Targets::Values(p), Targets::Values(o)) => pixels.iter().zip(p).for_each(|(&i, v)| o[i] = v),
            _ => unreachable!("head kind fixed above"),
        }
        Ok(())
    })?;
    Ok(out)
}

/// Output file for `image` in `out_dir`: `<stem>.png` for labels, `<stem>.raw`
/// for regression values.
pub fn output_path(out_dir: &Path, image: &Path, head: HeadKind) -> PathBuf {
    let stem = image.file_stem().unwrap_or_default();
    let ext = match head {
        HeadKind::Logistic => "png",
        HeadKind::Linear => "raw",
    };
    out_dir.join(stem).with_extension(ext)
}

/// Label every image in `config.images` and write one output per image.
pub fn predict_command(config: &PredictConfig) -> Result<Vec<PathBuf>> {
    let saved = load_model(&config.model)?;
    let fx = extractor_for(&saved, load_weights(&config.weights)?)?;
    let images = list_images(&config.images)?;
    if images.is_empty() {
        return Err(Error::Argument(format!("no images in {}", config.images.display())));
    }
    fs::create_dir_all(&config.out).map_err(|e| with_path(e.into(), &config.out))?;
    let colors = saved.palette.as_ref().map(|p| p.render_colors());
    let mut written = Vec::with_capacity(images.len());
    for path in &images {
        let image = read_image(path)?;
        let dest = output_path(&config.out, path, saved.dbn.head_kind);
        match predict_image(&saved, &fx, &image).map_err(|e| with_path(e, path))? {
            Targets::Classes(c) => {
                let idx: Vec<u8> = c.iter().map(|&v| v as u8).collect();
                let colors = colors.as_deref().expect("classification models carry a palette");
                write_indexed_png(&dest, image.width(), image.height(), &idx, colors)?;
            }
            Targets::Values(v) => {
                write_raw_image(&dest, &Tensor::new(1, image.height(), image.width(), v)?)?;
            }
        }
        info!("{} -> {}", path.display(), dest.display());
        written.push(dest);
    }
    Ok(written)
}
