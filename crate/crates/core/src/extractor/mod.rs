//! Pretrained CNN feature extractor.
//!
//! A [`NetworkModel`] is the convolutional trunk of a pretrained classifier
//! (fully connected and softmax layers are not representable). Running a tile
//! through it with a [`TapSet`] returns the activation maps of the tapped
//! layers, which the core builder turns into hypercolumns.

mod weights;

use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::tensor::{conv2d, maxpool, pool_output_dims, relu, ConvSpec, Tensor};

pub use weights::{decode_weights, encode_weights, load_weights, save_weights, WEIGHTS_MAGIC, WEIGHTS_VERSION};

/// Side length of the square tiles the network consumes.
pub const TILE: usize = 224;

#[derive(Clone, Debug, PartialEq)]
pub enum LayerOp {
    Conv(ConvSpec),
    Relu,
    MaxPool { window: usize, stride: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct LayerDef {
    pub name: String,
    pub op: LayerOp,
}

impl LayerDef {
    pub fn conv(name: impl Into<String>, spec: ConvSpec) -> Self {
        Self {
            name: name.into(),
            op: LayerOp::Conv(spec),
        }
    }

    pub fn relu(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            op: LayerOp::Relu,
        }
    }

    pub fn maxpool(name: impl Into<String>, window: usize, stride: usize) -> Self {
        Self {
            name: name.into(),
            op: LayerOp::MaxPool { window, stride },
        }
    }

    fn apply(&self, input: &Tensor) -> Result<Tensor> {
        match &self.op {
            LayerOp::Conv(spec) => conv2d(input, spec),
            LayerOp::Relu => Ok(relu(input)),
            LayerOp::MaxPool { window, stride } => maxpool(input, *window, *stride),
        }
    }

    fn output_shape(&self, (c, h, w): (usize, usize, usize)) -> Result<(usize, usize, usize)> {
        match &self.op {
            LayerOp::Conv(spec) => {
                spec.validate()?;
                if spec.in_channels != c {
                    return Err(Error::Validation(format!(
                        "layer {:?}: in_channels {} does not match incoming {c} channels",
                        self.name, spec.in_channels
                    )));
                }
                let (oh, ow) = spec.output_dims(h, w)?;
                Ok((spec.out_channels, oh, ow))
            }
            LayerOp::Relu => Ok((c, h, w)),
            LayerOp::MaxPool { window, stride } => {
                let (oh, ow) = pool_output_dims(h, w, *window, *stride)?;
                Ok((c, oh, ow))
            }
        }
    }
}

/// Validated convolutional trunk plus its input normalisation.
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkModel {
    channel_means: Vec<f64>,
    layers: Vec<LayerDef>,
}

impl NetworkModel {
    /// Build a model, checking that the layer chain type-checks on a
    /// `TILE × TILE` probe and that layer names are unique.
    pub fn new(channel_means: Vec<f64>, layers: Vec<LayerDef>) -> Result<Self> {
        if channel_means.is_empty() {
            return Err(Error::Validation("model must have at least one input channel".into()));
        }
        let mut seen = HashSet::new();
        for l in &layers {
            if !seen.insert(l.name.as_str()) {
                return Err(Error::Validation(format!("duplicate layer name {:?}", l.name)));
            }
        }
        let model = Self { channel_means, layers };
        model.trace()?;
        Ok(model)
    }

    pub fn input_channels(&self) -> usize {
        self.channel_means.len()
    }

    pub fn channel_means(&self) -> &[f64] {
        &self.channel_means
    }

    pub fn layers(&self) -> &[LayerDef] {
        &self.layers
    }

    /// `(channels, TILE, TILE)`
    pub fn expected_input(&self) -> (usize, usize, usize) {
        (self.input_channels(), TILE, TILE)
    }

    /// Output shape of every layer for a tile input.
    pub fn trace(&self) -> Result<Vec<(usize, usize, usize)>> {
        let mut shape = self.expected_input();
        let mut shapes = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            shape = layer.output_shape(shape).map_err(|e| match e {
                Error::Validation(m) => Error::Validation(m),
                other => Error::Validation(format!("layer {:?}: {other}", layer.name)),
            })?;
            shapes.push(shape);
        }
        Ok(shapes)
    }

    pub fn layer_index(&self, name: &str) -> Option<usize> {
        self.layers.iter().position(|l| l.name == name)
    }

    /// Number of compute layers (everything except activations).
    pub fn compute_layer_count(&self) -> usize {
        self.layers.iter().filter(|l| !matches!(l.op, LayerOp::Relu)).count()
    }
}

/// Names of the layers whose outputs are captured during a forward pass.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TapSet {
    names: Vec<String>,
}

impl TapSet {
    pub fn new<S: Into<String>>(names: impl IntoIterator<Item = S>) -> Self {
        Self {
            names: names.into_iter().map(Into::into).collect(),
        }
    }

    pub fn empty() -> Self {
        Self::default()
    }

    /// The last layer before each max-pool, plus the final layer when the
    /// trunk does not end in a pool. For VGG-16 this is the post-ReLU output
    /// of the last convolution in each of the five blocks.
    pub fn block_ends(model: &NetworkModel) -> Self {
        let layers = model.layers();
        let mut names = Vec::new();
        for (i, l) in layers.iter().enumerate() {
            if matches!(l.op, LayerOp::MaxPool { .. }) && i > 0 {
                names.push(layers[i - 1].name.clone());
            }
        }
        if let Some(last) = layers.last() {
            if !matches!(last.op, LayerOp::MaxPool { .. }) {
                names.push(last.name.clone());
            }
        }
        names.dedup();
        Self { names }
    }

    /// `"blocks"` selects [`TapSet::block_ends`]; anything else is a
    /// comma-separated list of layer names.
    pub fn parse(spec: &str, model: &NetworkModel) -> Result<Self> {
        let spec = spec.trim();
        let taps = if spec.eq_ignore_ascii_case("blocks") {
            Self::block_ends(model)
        } else {
            Self::new(spec.split(',').map(str::trim).filter(|s| !s.is_empty()))
        };
        taps.resolve(model)?;
        Ok(taps)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    /// Layer indices in layer order.
    pub fn resolve(&self, model: &NetworkModel) -> Result<Vec<usize>> {
        let mut idx = self
            .names
            .iter()
            .map(|n| {
                model
                    .layer_index(n)
                    .ok_or_else(|| Error::Validation(format!("tap {n:?} does not name a layer in the model")))
            })
            .collect::<Result<Vec<_>>>()?;
        idx.sort_unstable();
        idx.dedup();
        Ok(idx)
    }

    /// Channel count of each tapped output, in capture order.
    pub fn channel_counts(&self, model: &NetworkModel) -> Result<Vec<usize>> {
        let shapes = model.trace()?;
        Ok(self.resolve(model)?.into_iter().map(|i| shapes[i].0).collect())
    }

    /// Hypercolumn length: tapped channels plus the raw input channels.
    pub fn feature_count(&self, model: &NetworkModel) -> Result<usize> {
        Ok(self.channel_counts(model)?.iter().sum::<usize>() + model.input_channels())
    }
}

/// Run `tile` through the trunk and return copies of the tapped outputs in
/// layer order. Layers after the last tap are skipped.
pub fn forward_with_taps(model: &NetworkModel, tile: &Tensor, taps: &TapSet) -> Result<Vec<Tensor>> {
    let (c, h, w) = model.expected_input();
    if tile.channels() != c {
        return Err(Error::shape("tile channels", c, tile.channels()));
    }
    if tile.height() != h {
        return Err(Error::shape("tile height", h, tile.height()));
    }
    if tile.width() != w {
        return Err(Error::shape("tile width", w, tile.width()));
    }
    let tapped = taps.resolve(model)?;
    let Some(&last) = tapped.last() else {
        return Ok(Vec::new());
    };
    let mut out = Vec::with_capacity(tapped.len());
    let mut current = tile.clone();
    let mut next_tap = tapped.iter().peekable();
    for (i, layer) in model.layers.iter().enumerate().take(last + 1) {
        current = layer.apply(&current)?;
        if next_tap.peek() == Some(&&i) {
            out.push(current.clone());
            next_tap.next();
        }
    }
    Ok(out)
}
