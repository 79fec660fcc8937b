use ndarray::{Array2, ArrayView2, ArrayViewMut2};

use super::core::Core;
use crate::error::{Error, Result};

/// Per-feature min-max scaling fitted on training data and reused unchanged
/// at test time.
#[derive(Clone, Debug, PartialEq)]
pub struct Normalizer {
    min: Vec<f64>,
    max: Vec<f64>,
}

impl Normalizer {
    pub fn from_parts(min: Vec<f64>, max: Vec<f64>) -> Result<Self> {
        if min.len() != max.len() {
            return Err(Error::shape("normalizer max", min.len(), max.len()));
        }
        if let Some(i) = (0..min.len()).find(|&i| !(min[i] <= max[i])) {
            return Err(Error::Validation(format!(
                "normalizer feature {i}: min {} exceeds max {}",
                min[i], max[i]
            )));
        }
        Ok(Self { min, max })
    }

    /// Extrema over every row of every core.
    pub fn fit(cores: &[Core]) -> Result<Self> {
        let first = cores
            .first()
            .ok_or_else(|| Error::Argument("cannot fit a normalizer without cores".into()))?;
        let mut acc = NormalizerAccumulator::new(first.k());
        for core in cores {
            acc.update(core.features.view())?;
        }
        acc.finish()
    }

    pub fn k(&self) -> usize {
        self.min.len()
    }

    pub fn min(&self) -> &[f64] {
        &self.min
    }

    pub fn max(&self) -> &[f64] {
        &self.max
    }

    /// `(x − min) / (max − min)` clamped to `[0, 1]`; constant features map to 0.
    pub fn apply(&self, rows: ArrayView2<f64>) -> Result<Array2<f64>> {
        let mut out = rows.to_owned();
        self.apply_in_place(out.view_mut())?;
        Ok(out)
    }

    pub fn apply_in_place(&self, mut rows: ArrayViewMut2<f64>) -> Result<()> {
        if rows.ncols() != self.k() {
            return Err(Error::shape("feature columns", self.k(), rows.ncols()));
        }
        for mut row in rows.rows_mut() {
            for (j, v) in row.iter_mut().enumerate() {
                let range = self.max[j] - self.min[j];
                *v = if range > 0.0 {
                    ((*v - self.min[j]) / range).clamp(0.0, 1.0)
                } else {
                    0.0
                };
            }
        }
        Ok(())
    }
}

/// Running min/max, for fitting over cores that are never all in memory.
/// The result does not depend on update order.
#[derive(Clone, Debug)]
pub struct NormalizerAccumulator {
    min: Vec<f64>,
    max: Vec<f64>,
    rows: usize,
}

impl NormalizerAccumulator {
    pub fn new(k: usize) -> Self {
        Self {
            min: vec![f64::INFINITY; k],
            max: vec![f64::NEG_INFINITY; k],
            rows: 0,
        }
    }

    pub fn update(&mut self, rows: ArrayView2<f64>) -> Result<()> {
        if rows.ncols() != self.min.len() {
            return Err(Error::shape("feature columns", self.min.len(), rows.ncols()));
        }
        for row in rows.rows() {
            for (j, &v) in row.iter().enumerate() {
                self.min[j] = self.min[j].min(v);
                self.max[j] = self.max[j].max(v);
            }
        }
        self.rows += rows.nrows();
        Ok(())
    }

    pub fn finish(self) -> Result<Normalizer> {
        if self.rows == 0 {
            return Err(Error::Argument("cannot fit a normalizer on zero rows".into()));
        }
        Normalizer::from_parts(self.min, self.max)
    }
}
