//! Segmentation metrics.
//!
//! Percentages are computed as `100 · hits / count`. For classification the
//! MSE compares class indices scaled to `[0, 1]` by `1 / (C − 1)`.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{with_path, Error, Result};
use crate::image_io::{read_image, read_labels};
use crate::sampler::{create_targets, Palette};

use super::dataset::{list_images, pair_by_stem};

#[derive(Clone, Debug, PartialEq)]
pub struct MetricsReport {
    pub class_names: Vec<String>,
    /// `confusion[truth][predicted]` pixel counts.
    pub confusion: Vec<Vec<u64>>,
    /// Pixels evaluated (the confusion matrix total).
    pub total: u64,
    /// Correct pixels over evaluated pixels, in percent.
    pub accuracy: f64,
    pub mse: f64,
    /// Per-class accuracy in percent; `None` for classes absent from the truth.
    pub per_class: Vec<Option<f64>>,
    /// Unweighted mean of the defined per-class accuracies.
    pub class_average: f64,
    /// Pixel-weighted accuracy, equal to `accuracy`.
    pub global_average: f64,
    /// Class left out of every metric, if any.
    pub ignored: Option<usize>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct EvalOptions {
    /// Skip pixels whose true class is the palette's rest class.
    pub ignore_rest: bool,
}

/// Accumulates label pairs image by image.
#[derive(Clone, Debug)]
pub struct ConfusionMatrix {
    counts: Vec<Vec<u64>>,
    sq_err: f64,
    ignored: Option<usize>,
}

impl ConfusionMatrix {
    pub fn new(classes: usize, ignored: Option<usize>) -> Self {
        Self {
            counts: vec![vec![0; classes]; classes],
            sq_err: 0.0,
            ignored,
        }
    }

    pub fn add(&mut self, predicted: &[usize], truth: &[usize]) -> Result<()> {
        if predicted.len() != truth.len() {
            return Err(Error::shape("predicted pixels", truth.len(), predicted.len()));
        }
        let c = self.counts.len();
        let scale = if c > 1 { 1.0 / (c - 1) as f64 } else { 0.0 };
        for (&p, &t) in predicted.iter().zip(truth) {
            if p >= c || t >= c {
                return Err(Error::Argument(format!(
                    "class {} outside the {c}-class palette",
                    p.max(t)
                )));
            }
            if Some(t) == self.ignored {
                continue;
            }
            self.counts[t][p] += 1;
            let d = (p as f64 - t as f64) * scale;
            self.sq_err += d * d;
        }
        Ok(())
    }

    pub fn report(&self, class_names: Vec<String>) -> Result<MetricsReport> {
        let total: u64 = self.counts.iter().flatten().sum();
        if total == 0 {
            return Err(Error::Argument("no pixels to evaluate".into()));
        }
        let correct: u64 = (0..self.counts.len()).map(|i| self.counts[i][i]).sum();
        let per_class: Vec<Option<f64>> = self
            .counts
            .iter()
            .enumerate()
            .map(|(i, row)| {
                let n: u64 = row.iter().sum();
                (n > 0).then(|| 100.0 * row[i] as f64 / n as f64)
            })
            .collect();
        let defined: Vec<f64> = per_class.iter().flatten().copied().collect();
        let accuracy = 100.0 * correct as f64 / total as f64;
        Ok(MetricsReport {
            class_names,
            confusion: self.counts.clone(),
            total,
            accuracy,
            mse: self.sq_err / total as f64,
            class_average: defined.iter().sum::<f64>() / defined.len() as f64,
            per_class,
            global_average: accuracy,
            ignored: self.ignored,
        })
    }
}

/// Metrics for one flat set of predicted and true labels.
pub fn metrics_from_labels(
    predicted: &[usize],
    truth: &[usize],
    class_names: Vec<String>,
    ignored: Option<usize>,
) -> Result<MetricsReport> {
    let mut m = ConfusionMatrix::new(class_names.len(), ignored);
    m.add(predicted, truth)?;
    m.report(class_names)
}

/// Compare predicted label images with ground truth, matched by file stem.
pub fn evaluate(pred_dir: &Path, truth_dir: &Path, palette: &Palette, options: EvalOptions) -> Result<MetricsReport> {
    let pairs = pair_by_stem(&list_images(pred_dir)?, &list_images(truth_dir)?, "prediction", "truth")?;
    if pairs.is_empty() {
        return Err(Error::Argument(format!("no label images in {}", pred_dir.display())));
    }
    let ignored = options.ignore_rest.then(|| palette.rest_class());
    let mut m = ConfusionMatrix::new(palette.class_count(), ignored);
    for (pred, truth) in &pairs {
        let t = read_labels(truth)?;
        let p = read_labels(pred)?;
        let pt = create_targets(&p, palette, t.width, t.height).map_err(|e| with_path(e, pred))?;
        let tt = create_targets(&t, palette, t.width, t.height).map_err(|e| with_path(e, truth))?;
        m.add(&pt, &tt)?;
    }
    m.report(palette.classes().iter().map(|c| c.name.clone()).collect())
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegressionReport {
    pub pixels: u64,
    pub mse: f64,
}

impl RegressionReport {
    pub fn to_text(&self) -> String {
        format!(
            "MSE {:.6}\n\n[metrics]\npixels={}\nmse={}\n",
            self.mse, self.pixels, self.mse
        )
    }
}

/// Mean squared error between predicted and true single-channel raw images.
pub fn evaluate_regression(pred_dir: &Path, truth_dir: &Path) -> Result<RegressionReport> {
    let pairs = pair_by_stem(&list_images(pred_dir)?, &list_images(truth_dir)?, "prediction", "truth")?;
    let (mut pixels, mut sum) = (0u64, 0.0);
    for (pred, truth) in &pairs {
        let p = read_image(pred)?;
        let t = read_image(truth)?;
        if p.dims() != t.dims() {
            return Err(Error::Validation(format!(
                "{}: shape {:?} differs from the truth {:?}",
                pred.display(),
                p.dims(),
                t.dims()
            )));
        }
        sum += p
            .data()
            .iter()
            .zip(t.data())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>();
        pixels += p.data().len() as u64;
    }
    if pixels == 0 {
        return Err(Error::Argument(format!("no images in {}", pred_dir.display())));
    }
    Ok(RegressionReport {
        pixels,
        mse: sum / pixels as f64,
    })
}

impl MetricsReport {
    /// Per-class table followed by a `[metrics]` section of `key=value` lines.
    pub fn to_text(&self) -> String {
        let width = self.class_names.iter().map(String::len).max().unwrap_or(0).max(11);
        let mut s = String::new();
        let _ = writeln!(s, "{:<width$}  {:>10}  {:>8}", "class", "pixels", "acc %");
        for (i, name) in self.class_names.iter().enumerate() {
            if Some(i) == self.ignored {
                continue;
            }
            let n: u64 = self.confusion[i].iter().sum();
            match self.per_class[i] {
                Some(a) => writeln!(s, "{name:<width$}  {n:>10}  {a:>8.2}"),
                None => writeln!(s, "{name:<width$}  {n:>10}  {:>8}", "n/a"),
            }
            .expect("writing to a string");
        }
        let _ = writeln!(s, "{:<width$}  {:>10}  {:>8.2}", "Class Avg.", "", self.class_average);
        let _ = writeln!(
            s,
            "{:<width$}  {:>10}  {:>8.2}",
            "Global Avg.", self.total, self.global_average
        );
        let _ = writeln!(s, "{:<width$}  {:>10}  {:>8.4}", "MSE", "", self.mse);
        let _ = writeln!(s, "\n[metrics]");
        let _ = writeln!(s, "pixels={}", self.total);
        let _ = writeln!(s, "accuracy={}", self.accuracy);
        let _ = writeln!(s, "mse={}", self.mse);
        let _ = writeln!(s, "class_average={}", self.class_average);
        let _ = writeln!(s, "global_average={}", self.global_average);
        for (i, name) in self.class_names.iter().enumerate() {
            let acc = self.per_class[i].map_or("nan".to_string(), |a| a.to_string());
            let row: Vec<String> = self.confusion[i].iter().map(u64::to_string).collect();
            let _ = writeln!(s, "class.{i}.name={name}");
            let _ = writeln!(s, "class.{i}.accuracy={acc}");
            let _ = writeln!(s, "confusion.{i}={}", row.join(" "));
        }
        s
    }
}
