use ndarray::{Array1, Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::loss::{sigmoid, softmax_rows};
use crate::error::{Error, Result};
use crate::sampler::Targets;

/// Fully connected layer, `y = x · weights + bias`.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseLayer {
    /// `inputs × outputs`
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

impl DenseLayer {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            weights: Array2::zeros((inputs, outputs)),
            bias: Array1::zeros(outputs),
        }
    }

    /// Weights from `N(0, 0.01²)`, zero bias.
    pub fn random(inputs: usize, outputs: usize, rng: &mut impl Rng) -> Self {
        let normal = Normal::new(0.0, 0.01).expect("valid normal");
        Self {
            weights: Array2::from_shape_simple_fn((inputs, outputs), || normal.sample(rng)),
            bias: Array1::zeros(outputs),
        }
    }

    pub fn inputs(&self) -> usize {
        self.weights.nrows()
    }

    pub fn outputs(&self) -> usize {
        self.weights.ncols()
    }

    pub(crate) fn affine(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let mut z = x.dot(&self.weights);
        z += &self.bias;
        z
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HeadKind {
    /// Softmax over classes, trained on negative log-likelihood.
    Logistic,
    /// Real-valued outputs, trained on mean squared error.
    Linear,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ForwardMode {
    Infer,
    /// Dropout active, masks drawn from a generator seeded with `seed`.
    Train {
        seed: u64,
    },
}

/// Sigmoid hidden layers followed by a logistic or linear head.
#[derive(Clone, Debug, PartialEq)]
pub struct DbnModel {
    pub hidden: Vec<DenseLayer>,
    pub head: DenseLayer,
    pub head_kind: HeadKind,
    /// Drop probability per hidden layer, used in training mode only.
    pub dropout: Vec<f64>,
}

/// Per-layer activations from one forward pass, kept for backpropagation.
pub(crate) struct Trace {
    /// `acts[0]` is the input, `acts[l + 1]` the (masked) output of hidden layer `l`.
    pub acts: Vec<Array2<f64>>,
    /// Sigmoid outputs before masking, one per hidden layer.
    pub sig: Vec<Array2<f64>>,
    pub masks: Vec<Option<Array2<f64>>>,
    pub output: Array2<f64>,
}

impl DbnModel {
    pub fn new(hidden: Vec<DenseLayer>, head: DenseLayer, head_kind: HeadKind) -> Result<Self> {
        let dropout = vec![0.0; hidden.len()];
        let model = Self {
            hidden,
            head,
            head_kind,
            dropout,
        };
        model.validate()?;
        Ok(model)
    }

    /// Pretrained (or empty) hidden stack plus a freshly initialised head.
    pub fn assemble(
        hidden: Vec<DenseLayer>,
        inputs: usize,
        head_kind: HeadKind,
        outputs: usize,
        seed: u64,
    ) -> Result<Self> {
        let last = hidden.last().map_or(inputs, DenseLayer::outputs);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        if let Some(first) = hidden.first() {
            if first.inputs() != inputs {
                return Err(Error::shape("first layer inputs", inputs, first.inputs()));
            }
        }
        Self::new(hidden, DenseLayer::random(last, outputs, &mut rng), head_kind)
    }

    /// Randomly initialised network with layer sizes `sizes[0] → … → outputs`.
    pub fn random(sizes: &[usize], head_kind: HeadKind, outputs: usize, seed: u64) -> Result<Self> {
        if sizes.is_empty() {
            return Err(Error::Argument("layer sizes must include the input width".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let hidden = sizes
            .windows(2)
            .map(|w| DenseLayer::random(w[0], w[1], &mut rng))
            .collect();
        let last = *sizes.last().expect("non-empty");
        Self::new(hidden, DenseLayer::random(last, outputs, &mut rng), head_kind)
    }

    pub fn validate(&self) -> Result<()> {
        let mut width = self.inputs();
        for (i, l) in self.hidden.iter().enumerate() {
            if l.inputs() != width {
                return Err(Error::Validation(format!(
                    "hidden layer {i} expects {} inputs but receives {width}",
                    l.inputs()
                )));
            }
            if l.bias.len() != l.outputs() {
                return Err(Error::Validation(format!("hidden layer {i} bias has the wrong length")));
            }
            width = l.outputs();
        }
        if self.head.inputs() != width {
            return Err(Error::Validation(format!(
                "head expects {} inputs but the last hidden layer has {width} units",
                self.head.inputs()
            )));
        }
        if self.head.bias.len() != self.head.outputs() {
            return Err(Error::Validation("head bias has the wrong length".into()));
        }
        if self.head.outputs() == 0 || self.inputs() == 0 || self.hidden.iter().any(|l| l.outputs() == 0) {
            return Err(Error::Validation("layers must have at least one unit".into()));
        }
        if self.head_kind == HeadKind::Logistic && self.head.outputs() < 2 {
            return Err(Error::Validation("a logistic head needs at least 2 classes".into()));
        }
        if self.dropout.len() != self.hidden.len() {
            return Err(Error::Validation(format!(
                "{} dropout rates for {} hidden layers",
                self.dropout.len(),
                self.hidden.len()
            )));
        }
        if let Some(p) = self.dropout.iter().find(|p| !(0.0..1.0).contains(*p)) {
            return Err(Error::Validation(format!("dropout rate {p} outside [0, 1)")));
        }
        let finite = self
            .hidden
            .iter()
            .chain(std::iter::once(&self.head))
            .all(|l| l.weights.iter().chain(l.bias.iter()).all(|v| v.is_finite()));
        if !finite {
            return Err(Error::Validation("non-finite parameter".into()));
        }
        Ok(())
    }

    pub fn inputs(&self) -> usize {
        self.hidden.first().unwrap_or(&self.head).inputs()
    }

    pub fn outputs(&self) -> usize {
        self.head.outputs()
    }

    /// `[inputs, hidden…, outputs]`
    pub fn layer_sizes(&self) -> Vec<usize> {
        std::iter::once(self.inputs())
            .chain(self.hidden.iter().map(DenseLayer::outputs))
            .chain(std::iter::once(self.outputs()))
            .collect()
    }

    pub fn set_dropout(&mut self, p: f64) -> Result<()> {
        if !(0.0..1.0).contains(&p) {
            return Err(Error::Argument(format!("dropout rate {p} outside [0, 1)")));
        }
        self.dropout = vec![p; self.hidden.len()];
        Ok(())
    }

    fn check_input(&self, x: ArrayView2<f64>) -> Result<()> {
        if x.ncols() != self.inputs() {
            return Err(Error::shape("feature columns", self.inputs(), x.ncols()));
        }
        Ok(())
    }

    /// Softmax probabilities (logistic head) or raw outputs (linear head).
    pub fn forward(&self, x: ArrayView2<f64>, mode: ForwardMode) -> Result<Array2<f64>> {
        self.check_input(x)?;
        Ok(match mode {
            ForwardMode::Infer => self.trace(x, None::<&mut ChaCha8Rng>).output,
            ForwardMode::Train { seed } => self.trace(x, Some(&mut ChaCha8Rng::seed_from_u64(seed))).output,
        })
    }

    /// Forward pass keeping intermediate values. With `rng`, each hidden unit
    /// is dropped with its layer's rate and survivors scale by `1 / (1 − p)`.
    pub(crate) fn trace<R: Rng>(&self, x: ArrayView2<f64>, mut rng: Option<&mut R>) -> Trace {
        let masks = self
            .hidden
            .iter()
            .zip(&self.dropout)
            .map(|(l, &p)| match rng.as_deref_mut() {
                Some(r) if p > 0.0 => Some(dropout_mask(x.nrows(), l.outputs(), p, r)),
                _ => None,
            })
            .collect();
        self.trace_with_masks(x, masks)
    }

    pub(crate) fn trace_with_masks(&self, x: ArrayView2<f64>, masks: Vec<Option<Array2<f64>>>) -> Trace {
        let mut acts = vec![x.to_owned()];
        let mut sig = Vec::with_capacity(self.hidden.len());
        for (l, mask) in self.hidden.iter().zip(&masks) {
            let s = l.affine(acts.last().expect("input present").view()).mapv(sigmoid);
            let a = match mask {
                Some(m) => &s * m,
                None => s.clone(),
            };
            sig.push(s);
            acts.push(a);
        }
        let z = self.head.affine(acts.last().expect("input present").view());
        let output = match self.head_kind {
            HeadKind::Logistic => softmax_rows(z.view()),
            HeadKind::Linear => z,
        };
        Trace {
            acts,
            sig,
            masks,
            output,
        }
    }

    /// Class per row (argmax, ties to the lowest index) for a logistic head;
    /// raw outputs, row-major, for a linear head.
    pub fn predict(&self, x: ArrayView2<f64>) -> Result<Targets> {
        let out = self.forward(x, ForwardMode::Infer)?;
        Ok(match self.head_kind {
            HeadKind::Logistic => Targets::Classes(out.rows().into_iter().map(|r| argmax(r.iter().copied())).collect()),
            HeadKind::Linear => Targets::Values(out.iter().copied().collect()),
        })
    }
}

fn argmax(values: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in values.enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best.0
}

/// Entries are `0` with probability `p`, otherwise `1 / (1 − p)`.
pub(crate) fn dropout_mask(rows: usize, cols: usize, p: f64, rng: &mut impl Rng) -> Array2<f64> {
    let keep = 1.0 / (1.0 - p);
    Array2::from_shape_simple_fn((rows, cols), || if rng.random::<f64>() < p { 0.0 } else { keep })
}
