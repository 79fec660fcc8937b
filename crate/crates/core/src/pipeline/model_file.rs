//! Trained model files.
//!
//! Little-endian throughout. Matrices are row-major `f64`.
//!
//! ```text
//! magic "CSDM" | u32 version (1)
//! u32 n | u32 layer_sizes[n]          input width, hidden widths, output count
//! u8 head (0 logistic, 1 linear)
//! f64 normalizer_min[k] | f64 normalizer_max[k]
//! per hidden layer, then the head:
//!     f64 weights[inputs*outputs] | f64 bias[outputs]
//! f64 dropout[n - 2]
//! u64 seed | u32 samples_per_image | u8 sampling (0 uniform, 1 stratified)
//! u32 m | f64 contrast_factors[m]
//! u32 epochs | f64 lr | u32 gibbs_k | u32 batch | u32 chains | u64 seed          pretraining
//! f64 lr | f64 lr_decay | u32 epochs | u32 batch | f64 l1 | f64 l2 | f64 dropout
//!     | u64 seed | u32 patience (0 = none)                                        fine-tuning
//! u32 stride | u32 input_channels | u32 t | str taps[t]
//! u8 has_palette, then if 1: u32 c | c × (u8 has_colour | u8 rgb[3] | str name)
//! u32 crc32 of every preceding byte
//! ```
//!
//! `str` is a `u16` byte length followed by UTF-8.

use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};

use crate::binio::{ByteReader, ByteWriter, Truncation};
use crate::dbn::{DbnModel, DenseLayer, FineTuneConfig, HeadKind, PretrainConfig};
use crate::error::{with_path, Error, Result};
use crate::sampler::{Normalizer, Palette, PaletteClass, SamplingMode};

pub const MODEL_MAGIC: &[u8; 4] = b"CSDM";
pub const MODEL_VERSION: u32 = 1;

/// Settings a model was trained with, kept so a run can be repeated.
#[derive(Clone, Debug, PartialEq)]
pub struct Provenance {
    pub seed: u64,
    pub samples_per_image: usize,
    pub sampling: SamplingMode,
    pub contrast: Vec<f64>,
    pub pretrain: PretrainConfig,
    pub fine_tune: FineTuneConfig,
}

/// Everything prediction needs besides the trunk weights.
#[derive(Clone, Debug, PartialEq)]
pub struct SavedModel {
    pub dbn: DbnModel,
    pub normalizer: Normalizer,
    pub taps: Vec<String>,
    pub stride: usize,
    pub input_channels: usize,
    /// Present for classification models.
    pub palette: Option<Palette>,
    pub provenance: Provenance,
}

impl SavedModel {
    pub fn validate(&self) -> Result<()> {
        self.dbn.validate()?;
        if self.normalizer.k() != self.dbn.inputs() {
            return Err(Error::Validation(format!(
                "normalizer covers {} features but the network takes {}",
                self.normalizer.k(),
                self.dbn.inputs()
            )));
        }
        match (&self.palette, self.dbn.head_kind) {
            (Some(p), HeadKind::Logistic) if p.class_count() != self.dbn.outputs() => Err(Error::Validation(format!(
                "palette has {} classes but the network predicts {}",
                p.class_count(),
                self.dbn.outputs()
            ))),
            (None, HeadKind::Logistic) => Err(Error::Validation("classification model without a palette".into())),
            (Some(_), HeadKind::Linear) => Err(Error::Validation("regression model with a palette".into())),
            _ => Ok(()),
        }
    }
}

fn write_layer(w: &mut ByteWriter, l: &DenseLayer) {
    l.weights.iter().chain(l.bias.iter()).for_each(|&v| w.f64(v));
}

pub fn encode_model(model: &SavedModel) -> Result<Vec<u8>> {
    model.validate()?;
    let mut w = ByteWriter::default();
    w.bytes(MODEL_MAGIC);
    w.u32(MODEL_VERSION);
    let sizes = model.dbn.layer_sizes();
    w.len(sizes.len());
    sizes.iter().for_each(|&s| w.len(s));
    w.u8(match model.dbn.head_kind {
        HeadKind::Logistic => 0,
        HeadKind::Linear => 1,
    });
    model
        .normalizer
        .min()
        .iter()
        .chain(model.normalizer.max())
        .for_each(|&v| w.f64(v));
    model.dbn.hidden.iter().for_each(|l| write_layer(&mut w, l));
    write_layer(&mut w, &model.dbn.head);
    model.dbn.dropout.iter().for_each(|&p| w.f64(p));

    let p = &model.provenance;
    w.u64(p.seed);
    w.len(p.samples_per_image);
    w.u8(match p.sampling {
        SamplingMode::Uniform => 0,
        SamplingMode::Stratified => 1,
    });
    w.len(p.contrast.len());
    p.contrast.iter().for_each(|&f| w.f64(f));
    let pre = &p.pretrain;
    w.len(pre.epochs);
    w.f64(pre.lr);
    w.len(pre.gibbs_k);
    w.len(pre.batch_size);
    w.len(pre.chains);
    w.u64(pre.seed);
    let ft = &p.fine_tune;
    w.f64(ft.lr);
    w.f64(ft.lr_decay);
    w.len(ft.epochs);
    w.len(ft.batch_size);
    w.f64(ft.l1);
    w.f64(ft.l2);
    w.f64(ft.dropout);
    w.u64(ft.seed);
    w.len(ft.patience.unwrap_or(0));

    w.len(model.stride);
    w.len(model.input_channels);
    w.len(model.taps.len());
    model.taps.iter().for_each(|t| w.short_str(t));
    match &model.palette {
        None => w.u8(0),
        Some(pal) => {
            w.u8(1);
            w.len(pal.class_count());
            for c in pal.classes() {
                w.u8(u8::from(c.color.is_some()));
                w.bytes(&c.color.unwrap_or([0; 3]));
                w.short_str(&c.name);
            }
        }
    }
    let crc = crc32fast::hash(&w.buf);
    w.u32(crc);
    Ok(w.buf)
}

fn read_layer(r: &mut ByteReader, inputs: usize, outputs: usize) -> Result<DenseLayer> {
    let count = inputs
        .checked_mul(outputs)
        .ok_or_else(|| r.err("layer size overflows"))?;
    let weights = r.f64_vec(count)?;
    let bias = r.f64_vec(outputs)?;
    Ok(DenseLayer {
        weights: Array2::from_shape_vec((inputs, outputs), weights).expect("length checked"),
        bias: Array1::from(bias),
    })
}

fn flag(r: &mut ByteReader, what: &str) -> Result<bool> {
    match r.u8()? {
        0 => Ok(false),
        1 => Ok(true),
        v => Err(r.err(format!("bad {what} flag {v}"))),
    }
}

pub fn decode_model(bytes: &[u8]) -> Result<SavedModel> {
    if bytes.len() < 12 {
        return Err(Error::format("model file", "file too short"));
    }
    let (body, tail) = bytes.split_at(bytes.len() - 4);
    let mut r = ByteReader::new(body, "model file", Truncation::Format);
    r.magic(MODEL_MAGIC)?;
    let version = r.u32()?;
    if version != MODEL_VERSION {
        return Err(r.err(format!("unsupported version {version}")));
    }
    let stored = u32::from_le_bytes(tail.try_into().expect("four bytes"));
    if crc32fast::hash(body) != stored {
        return Err(Error::format(
            "model file",
            "checksum mismatch (file truncated or corrupted)",
        ));
    }

    let n = r.len()?;
    if !(2..=64).contains(&n) {
        return Err(r.err(format!("implausible layer count {n}")));
    }
    let sizes = r.u32_vec(n)?.into_iter().map(|s| s as usize).collect::<Vec<_>>();
    if sizes.contains(&0) {
        return Err(r.err("zero-width layer"));
    }
    let head_kind = match r.u8()? {
        0 => HeadKind::Logistic,
        1 => HeadKind::Linear,
        v => return Err(r.err(format!("unknown head kind {v}"))),
    };
    let k = sizes[0];
    let min = r.f64_vec(k)?;
    let max = r.f64_vec(k)?;
    let normalizer = Normalizer::from_parts(min, max).map_err(|e| r.err(e.to_string()))?;
    let mut hidden = Vec::with_capacity(n - 2);
    for pair in sizes[..n - 1].windows(2) {
        hidden.push(read_layer(&mut r, pair[0], pair[1])?);
    }
    let head = read_layer(&mut r, sizes[n - 2], sizes[n - 1])?;
    let dropout = r.f64_vec(n - 2)?;

    let seed = r.u64()?;
    let samples_per_image = r.len()?;
    let sampling = match r.u8()? {
        0 => SamplingMode::Uniform,
        1 => SamplingMode::Stratified,
        v => return Err(r.err(format!("unknown sampling mode {v}"))),
    };
    let m = r.len()?;
    let contrast = r.f64_vec(m)?;
    let pretrain = PretrainConfig {
        epochs: r.len()?,
        lr: r.f64()?,
        gibbs_k: r.len()?,
        batch_size: r.len()?,
        chains: r.len()?,
        seed: r.u64()?,
    };
    let fine_tune = FineTuneConfig {
        lr: r.f64()?,
        lr_decay: r.f64()?,
        epochs: r.len()?,
        batch_size: r.len()?,
        l1: r.f64()?,
        l2: r.f64()?,
        dropout: r.f64()?,
        seed: r.u64()?,
        patience: Some(r.len()?).filter(|&p| p > 0),
    };

    let stride = r.len()?;
    let input_channels = r.len()?;
    let t = r.len()?;
    if t > r.remaining() / 2 {
        return Err(r.err(format!("tap count {t} exceeds the file")));
    }
    let taps = (0..t).map(|_| r.short_str()).collect::<Result<Vec<_>>>()?;
    let palette = if flag(&mut r, "palette")? {
        let c = r.len()?;
        if c > 256 {
            return Err(r.err(format!("{c} palette classes exceed the limit of 256")));
        }
        let mut classes = Vec::with_capacity(c);
        for _ in 0..c {
            let has = flag(&mut r, "colour")?;
            let rgb = [r.u8()?, r.u8()?, r.u8()?];
            let name = r.short_str()?;
            classes.push(PaletteClass {
                color: has.then_some(rgb),
                name,
            });
        }
        Some(Palette::new(classes).map_err(|e| r.err(e.to_string()))?)
    } else {
        None
    };
    r.finish()?;

    let mut dbn = DbnModel::new(hidden, head, head_kind).map_err(|e| r.err(e.to_string()))?;
    dbn.dropout = dropout;
    let model = SavedModel {
        dbn,
        normalizer,
        taps,
        stride,
        input_channels,
        palette,
        provenance: Provenance {
            seed,
            samples_per_image,
            sampling,
            contrast,
            pretrain,
            fine_tune,
        },
    };
    model.validate().map_err(|e| r.err(e.to_string()))?;
    Ok(model)
}

pub fn save_model(model: &SavedModel, path: &Path) -> Result<()> {
    let bytes = encode_model(model)?;
    fs::write(path, bytes).map_err(|e| with_path(e.into(), path))
}

pub fn load_model(path: &Path) -> Result<SavedModel> {
    let bytes = fs::read(path).map_err(|e| with_path(e.into(), path))?;
    decode_model(&bytes).map_err(|e| with_path(e, path))
}
