//! Bernoulli restricted Boltzmann machine trained with persistent-chain
//! contrastive divergence.
//!
//! Visible units take values in `[0, 1]` (min-max scaled features are read as
//! Bernoulli probabilities); hidden units are binary.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::loss::{sigmoid, softplus};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Rbm {
    /// `visible × hidden`
    pub weights: Array2<f64>,
    pub visible_bias: Array1<f64>,
    pub hidden_bias: Array1<f64>,
    /// Persistent fantasy particles, one visible state per row.
    pub chains: Array2<f64>,
}

/// Log-likelihood gradient estimate, same shapes as the parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct RbmGradient {
    pub weights: Array2<f64>,
    pub visible_bias: Array1<f64>,
    pub hidden_bias: Array1<f64>,
}

impl Rbm {
    /// Weights drawn from `N(0, 0.01²)`, zero biases, chains started from
    /// uniform random binary states.
    pub fn new(visible: usize, hidden: usize, chains: usize, rng: &mut impl Rng) -> Result<Self> {
        if visible == 0 || hidden == 0 || chains == 0 {
            return Err(Error::Argument(format!(
                "RBM needs positive sizes, got visible={visible} hidden={hidden} chains={chains}"
            )));
        }
        let normal = Normal::new(0.0, 0.01).expect("valid normal");
        Ok(Self {
            weights: Array2::from_shape_simple_fn((visible, hidden), || normal.sample(rng)),
            visible_bias: Array1::zeros(visible),
            hidden_bias: Array1::zeros(hidden),
            chains: Array2::from_shape_simple_fn((chains, visible), || f64::from(u8::from(rng.random::<bool>()))),
        })
    }

    pub fn visible(&self) -> usize {
        self.weights.nrows()
    }

    pub fn hidden(&self) -> usize {
        self.weights.ncols()
    }

    fn check_visible(&self, cols: usize) -> Result<()> {
        if cols != self.visible() {
            return Err(Error::shape("visible units", self.visible(), cols));
        }
        Ok(())
    }

    /// `E(v, h) = −b·v − c·h − vᵀ W h`
    pub fn energy(&self, v: ArrayView1<f64>, h: ArrayView1<f64>) -> f64 {
        -self.visible_bias.dot(&v) - self.hidden_bias.dot(&h) - v.dot(&self.weights.dot(&h))
    }

    /// `F(v) = −b·v − Σⱼ ln(1 + exp(cⱼ + (vᵀW)ⱼ))`
    pub fn free_energy(&self, v: ArrayView1<f64>) -> Result<f64> {
        self.check_visible(v.len())?;
        let act = v.dot(&self.weights) + &self.hidden_bias;
        Ok(-self.visible_bias.dot(&v) - act.iter().map(|&a| softplus(a)).sum::<f64>())
    }

    /// `p(h = 1 | v)` for each row of `v`.
    pub fn hidden_probs(&self, v: ArrayView2<f64>) -> Array2<f64> {
        let mut a = v.dot(&self.weights);
        a += &self.hidden_bias;
        a.mapv_inplace(sigmoid);
        a
    }

    /// `p(v = 1 | h)` for each row of `h`.
    pub fn visible_probs(&self, h: ArrayView2<f64>) -> Array2<f64> {
        let mut a = h.dot(&self.weights.t());
        a += &self.visible_bias;
        a.mapv_inplace(sigmoid);
        a
    }

    /// Mean squared difference between `batch` and its mean-field
    /// reconstruction `p(v | p(h | batch))`.
    pub fn reconstruction_error(&self, batch: ArrayView2<f64>) -> Result<f64> {
        self.check_visible(batch.ncols())?;
        let rec = self.visible_probs(self.hidden_probs(batch).view());
        Ok((&batch - &rec).mapv(|d| d * d).mean().unwrap_or(0.0))
    }

    /// Advance every persistent chain by `k` block Gibbs sweeps.
    pub fn advance_chains(&mut self, k: usize, rng: &mut impl Rng) {
        for _ in 0..k {
            let h = bernoulli(self.hidden_probs(self.chains.view()), rng);
            self.chains = bernoulli(self.visible_probs(h.view()), rng);
        }
    }

    /// PCD gradient estimate: data statistics from `batch`, model statistics
    /// from the persistent chains after `gibbs_k` further sweeps.
    pub fn pcd_gradient(&mut self, batch: ArrayView2<f64>, gibbs_k: usize, rng: &mut impl Rng) -> Result<RbmGradient> {
        self.check_visible(batch.ncols())?;
        if batch.nrows() == 0 {
            return Err(Error::Argument("empty batch".into()));
        }
        if gibbs_k == 0 {
            return Err(Error::Argument("gibbs_k must be at least 1".into()));
        }
        let n = batch.nrows() as f64;
        let pos_h = self.hidden_probs(batch);
        self.advance_chains(gibbs_k, rng);
        let m = self.chains.nrows() as f64;
        let neg_h = self.hidden_probs(self.chains.view());

        let weights = batch.t().dot(&pos_h) / n - self.chains.t().dot(&neg_h) / m;
        let visible_bias = batch.sum_axis(Axis(0)) / n - self.chains.sum_axis(Axis(0)) / m;
        let hidden_bias = pos_h.sum_axis(Axis(0)) / n - neg_h.sum_axis(Axis(0)) / m;
        Ok(RbmGradient {
            weights,
            visible_bias,
            hidden_bias,
        })
    }

    /// One PCD update by gradient ascent. Returns the reconstruction error of
    /// `batch` under the parameters before the update.
    pub fn pcd_step(&mut self, batch: ArrayView2<f64>, lr: f64, gibbs_k: usize, rng: &mut impl Rng) -> Result<f64> {
        let recon = self.reconstruction_error(batch)?;
        let g = self.pcd_gradient(batch, gibbs_k, rng)?;
        if lr != 0.0 {
            self.weights.scaled_add(lr, &g.weights);
            self.visible_bias.scaled_add(lr, &g.visible_bias);
            self.hidden_bias.scaled_add(lr, &g.hidden_bias);
        }
        Ok(recon)
    }
}

fn bernoulli(mut probs: Array2<f64>, rng: &mut impl Rng) -> Array2<f64> {
    probs.mapv_inplace(|p| f64::from(u8::from(rng.random::<f64>() < p)));
    probs
}
