use log::debug;
use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::loss::{mse_gradient, mse_loss, nll_logit_gradient, nll_loss};
use super::network::{dropout_mask, DbnModel, DenseLayer, HeadKind, Trace};
use super::rbm::Rbm;
use crate::error::{Error, Result};
use crate::sampler::{CoreSample, Targets};

#[derive(Clone, Debug, PartialEq)]
pub struct PretrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub gibbs_k: usize,
    pub batch_size: usize,
    /// Persistent chains per RBM.
    pub chains: usize,
    pub seed: u64,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        Self {
            epochs: 10,
            lr: 0.01,
            gibbs_k: 1,
            batch_size: 64,
            chains: 15,
            seed: 0,
        }
    }
}

/// Greedily trained RBM stack.
#[derive(Clone, Debug, PartialEq)]
pub struct Pretrained {
    pub rbms: Vec<Rbm>,
    /// `recon_errors[layer][epoch]`
    pub recon_errors: Vec<Vec<f64>>,
}

impl Pretrained {
    /// Hidden layers initialised from the RBM weights and hidden biases.
    pub fn layers(&self) -> Vec<DenseLayer> {
        self.rbms
            .iter()
            .map(|r| DenseLayer {
                weights: r.weights.clone(),
                bias: r.hidden_bias.clone(),
            })
            .collect()
    }
}

/// Train one RBM per consecutive pair in `sizes`. RBM `l` sees the hidden
/// probabilities of RBM `l − 1` on the full data set.
pub fn pretrain_stack(sizes: &[usize], data: ArrayView2<f64>, config: &PretrainConfig) -> Result<Pretrained> {
    if sizes.len() < 2 {
        return Err(Error::Argument(format!(
            "pretraining needs at least one hidden layer, got sizes {sizes:?}"
        )));
    }
    if data.nrows() == 0 {
        return Err(Error::Argument("no pretraining data".into()));
    }
    if data.ncols() != sizes[0] {
        return Err(Error::shape("feature columns", sizes[0], data.ncols()));
    }
    if data.iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(Error::Argument("pretraining data must lie in [0, 1]".into()));
    }
    if config.batch_size == 0 {
        return Err(Error::Argument("batch size must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut input = data.to_owned();
    let mut rbms = Vec::with_capacity(sizes.len() - 1);
    let mut recon_errors = Vec::with_capacity(sizes.len() - 1);
    for (layer, pair) in sizes.windows(2).enumerate() {
        let mut rbm = Rbm::new(pair[0], pair[1], config.chains, &mut rng)?;
        let mut errors = Vec::with_capacity(config.epochs);
        let mut order: Vec<usize> = (0..input.nrows()).collect();
        for epoch in 0..config.epochs {
            order.shuffle(&mut rng);
            let mut total = 0.0;
            for idx in order.chunks(config.batch_size) {
                let batch = input.select(Axis(0), idx);
                total += rbm.pcd_step(batch.view(), config.lr, config.gibbs_k, &mut rng)? * idx.len() as f64;
            }
            let err = total / input.nrows() as f64;
            debug!("rbm {layer} epoch {epoch}: reconstruction error {err:.6}");
            errors.push(err);
        }
        input = rbm.hidden_probs(input.view());
        rbms.push(rbm);
        recon_errors.push(errors);
    }
    Ok(Pretrained { rbms, recon_errors })
}

#[derive(Clone, Debug, PartialEq)]
pub struct FineTuneConfig {
    pub lr: f64,
    /// Learning rate at epoch `t` (from 0) is `lr / (1 + lr_decay · t)`.
    pub lr_decay: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub l1: f64,
    pub l2: f64,
    pub dropout: f64,
    pub seed: u64,
    /// Stop after this many epochs without a validation improvement.
    pub patience: Option<usize>,
}

impl Default for FineTuneConfig {
    fn default() -> Self {
        Self {
            lr: 0.1,
            lr_decay: 1.0,
            epochs: 20,
            batch_size: 64,
            l1: 1e-5,
            l2: 1e-4,
            dropout: 0.5,
            seed: 0,
            patience: None,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainReport {
    /// Head loss over the full training sample after each epoch.
    pub epoch_losses: Vec<f64>,
    /// `recon_errors[layer][epoch]` from pretraining.
    pub recon_errors: Vec<Vec<f64>>,
    /// Accuracy (classification) or MSE (regression) on the validation sample.
    pub validation: Vec<f64>,
    pub stopped_early: bool,
}

impl TrainReport {
    pub fn final_validation(&self) -> Option<f64> {
        self.validation.last().copied()
    }
}

/// Gradients in the same layout as the model's parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub hidden: Vec<DenseLayer>,
    pub head: DenseLayer,
}

fn head_loss_and_grad(kind: HeadKind, output: &Array2<f64>, targets: &Targets) -> Result<(f64, Array2<f64>)> {
    match (kind, targets) {
        (HeadKind::Logistic, Targets::Classes(labels)) => Ok((
            nll_loss(output.view(), labels)?,
            nll_logit_gradient(output.view(), labels)?,
        )),
        (HeadKind::Linear, Targets::Values(values)) => {
            let t = value_matrix(values, output.nrows(), output.ncols())?;
            Ok((
                mse_loss(output.view(), t.view())?,
                mse_gradient(output.view(), t.view())?,
            ))
        }
        _ => Err(Error::Validation("target kind does not match the model head".into())),
    }
}

fn value_matrix(values: &[f64], rows: usize, cols: usize) -> Result<Array2<f64>> {
    if values.len() != rows * cols {
        return Err(Error::shape("target values", rows * cols, values.len()));
    }
    Ok(Array2::from_shape_vec((rows, cols), values.to_vec()).expect("length checked"))
}

/// Head loss of the model in inference mode.
pub fn head_loss(model: &DbnModel, x: ArrayView2<f64>, targets: &Targets) -> Result<f64> {
    let out = model.forward(x, super::ForwardMode::Infer)?;
    head_loss_and_grad(model.head_kind, &out, targets).map(|(l, _)| l)
}

fn regularizer(model: &DbnModel, l1: f64, l2: f64) -> f64 {
    model
        .hidden
        .iter()
        .chain(std::iter::once(&model.head))
        .map(|l| l.weights.iter().map(|w| l1 * w.abs() + l2 * w * w).sum::<f64>())
        .sum()
}

fn backprop(model: &DbnModel, trace: &Trace, mut delta: Array2<f64>, l1: f64, l2: f64) -> Gradients {
    let reg = |w: &Array2<f64>, g: &mut Array2<f64>| {
        g.zip_mut_with(w, |g, &w| *g += l1 * sign(w) + 2.0 * l2 * w);
    };
    let last = trace.acts.last().expect("input present");
    let mut head_w = last.t().dot(&delta);
    reg(&model.head.weights, &mut head_w);
    let head = DenseLayer {
        weights: head_w,
        bias: delta.sum_axis(Axis(0)),
    };
    let mut upstream = delta.dot(&model.head.weights.t());
    let mut hidden = Vec::with_capacity(model.hidden.len());
    for l in (0..model.hidden.len()).rev() {
        if let Some(m) = &trace.masks[l] {
            upstream *= m;
        }
        delta = upstream * trace.sig[l].mapv(|s| s * (1.0 - s));
        let mut gw = trace.acts[l].t().dot(&delta);
        reg(&model.hidden[l].weights, &mut gw);
        hidden.push(DenseLayer {
            weights: gw,
            bias: delta.sum_axis(Axis(0)),
        });
        upstream = delta.dot(&model.hidden[l].weights.t());
    }
    hidden.reverse();
    Gradients { hidden, head }
}

fn sign(w: f64) -> f64 {
    if w > 0.0 {
        1.0
    } else if w < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Value and gradient of `head loss + l1·Σ|W| + l2·ΣW²`, the sums running over
/// every weight matrix (biases excluded). `masks` fixes the dropout pattern per
/// hidden layer (`None` for no dropout), scaled as in training.
pub fn objective_and_gradient(
    model: &DbnModel,
    x: ArrayView2<f64>,
    targets: &Targets,
    masks: Option<&[Array2<f64>]>,
    l1: f64,
    l2: f64,
) -> Result<(f64, Gradients)> {
    if x.ncols() != model.inputs() {
        return Err(Error::shape("feature columns", model.inputs(), x.ncols()));
    }
    if targets.len() == 0 || x.nrows() == 0 {
        return Err(Error::Argument("empty batch".into()));
    }
    let masks = match masks {
        None => vec![None; model.hidden.len()],
        Some(ms) => {
            if ms.len() != model.hidden.len() {
                return Err(Error::shape("dropout masks", model.hidden.len(), ms.len()));
            }
            for (m, l) in ms.iter().zip(&model.hidden) {
                if m.dim() != (x.nrows(), l.outputs()) {
                    return Err(Error::shape("dropout mask columns", l.outputs(), m.ncols()));
                }
            }
            ms.iter().cloned().map(Some).collect()
        }
    };
    let trace = model.trace_with_masks(x, masks);
    let (loss, delta) = head_loss_and_grad(model.head_kind, &trace.output, targets)?;
    let grads = backprop(model, &trace, delta, l1, l2);
    Ok((loss + regularizer(model, l1, l2), grads))
}

fn apply(model: &mut DbnModel, g: &Gradients, lr: f64) {
    for (l, gl) in model.hidden.iter_mut().zip(&g.hidden) {
        l.weights.scaled_add(-lr, &gl.weights);
        l.bias.scaled_add(-lr, &gl.bias);
    }
    model.head.weights.scaled_add(-lr, &g.head.weights);
    model.head.bias.scaled_add(-lr, &g.head.bias);
}

fn gather(targets: &Targets, idx: &[usize], outputs: usize) -> Targets {
    match targets {
        Targets::Classes(v) => Targets::Classes(idx.iter().map(|&i| v[i]).collect()),
        Targets::Values(v) => Targets::Values(
            idx.iter()
                .flat_map(|&i| v[i * outputs..(i + 1) * outputs].iter().copied())
                .collect(),
        ),
    }
}

/// Accuracy in `[0, 1]` for a logistic head, MSE for a linear head.
pub fn score(model: &DbnModel, sample: &CoreSample) -> Result<f64> {
    let targets = sample
        .targets
        .as_ref()
        .ok_or_else(|| Error::Argument("sample has no targets".into()))?;
    match (model.predict(sample.features.view())?, targets) {
        (Targets::Classes(p), Targets::Classes(t)) => {
            if p.len() != t.len() || t.is_empty() {
                return Err(Error::shape("targets", p.len(), t.len()));
            }
            Ok(p.iter().zip(t).filter(|(a, b)| a == b).count() as f64 / t.len() as f64)
        }
        (Targets::Values(_), Targets::Values(_)) => head_loss(model, sample.features.view(), targets),
        _ => Err(Error::Validation("target kind does not match the model head".into())),
    }
}

fn targets_of(sample: &CoreSample) -> Result<&Targets> {
    sample
        .targets
        .as_ref()
        .ok_or_else(|| Error::Argument("sample has no targets".into()))
}

/// Minibatch gradient descent with dropout on hidden layers.
///
/// With a validation sample, its score is recorded after every epoch. With
/// `patience` set as well, training stops once the score has not improved for
/// that many epochs and the best model seen is returned.
pub fn fine_tune(
    model: &DbnModel,
    sample: &CoreSample,
    config: &FineTuneConfig,
    validation: Option<&CoreSample>,
) -> Result<(DbnModel, TrainReport)> {
    if sample.is_empty() {
        return Err(Error::Argument("empty training sample".into()));
    }
    if config.batch_size == 0 {
        return Err(Error::Argument("batch size must be at least 1".into()));
    }
    let targets = targets_of(sample)?;
    let outputs = model.outputs();
    let expected = match targets {
        Targets::Classes(_) => sample.len(),
        Targets::Values(_) => sample.len() * outputs,
    };
    if targets.len() != expected {
        return Err(Error::shape("targets", expected, targets.len()));
    }
    if let Some(v) = validation {
        targets_of(v)?;
    }

    let mut model = model.clone();
    model.set_dropout(config.dropout)?;
    let higher_is_better = model.head_kind == HeadKind::Logistic;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut report = TrainReport::default();
    let mut order: Vec<usize> = (0..sample.len()).collect();
    let mut best: Option<(f64, DbnModel)> = None;
    let mut stale = 0;

    for epoch in 0..config.epochs {
        let lr = config.lr / (1.0 + config.lr_decay * epoch as f64);
        order.shuffle(&mut rng);
        for idx in order.chunks(config.batch_size) {
            let x = sample.features.select(Axis(0), idx);
            let t = gather(targets, idx, outputs);
            let masks: Vec<Array2<f64>> = model
                .hidden
                .iter()
                .zip(&model.dropout)
                .map(|(l, &p)| {
                    if p > 0.0 {
                        dropout_mask(idx.len(), l.outputs(), p, &mut rng)
                    } else {
                        Array2::ones((idx.len(), l.outputs()))
                    }
                })
                .collect();
            let (_, g) = objective_and_gradient(&model, x.view(), &t, Some(&masks), config.l1, config.l2)?;
            if lr != 0.0 {
                apply(&mut model, &g, lr);
            }
        }
        model.validate()?;
        let loss = head_loss(&model, sample.features.view(), targets)?;
        debug!("fine-tune epoch {epoch}: loss {loss:.6}");
        report.epoch_losses.push(loss);

        if let Some(v) = validation {
            let s = score(&model, v)?;
            report.validation.push(s);
            let improved = best
                .as_ref()
                .is_none_or(|(b, _)| if higher_is_better { s > *b } else { s < *b });
            if improved {
                best = Some((s, model.clone()));
                stale = 0;
            } else {
                stale += 1;
            }
            if config.patience.is_some_and(|p| stale >= p) {
                report.stopped_early = true;
                break;
            }
        }
    }
    if config.patience.is_some() {
        if let Some((_, m)) = best {
            model = m;
        }
    }
    Ok((model, report))
}
