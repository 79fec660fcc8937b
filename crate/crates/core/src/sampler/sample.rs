use ndarray::{concatenate, Array2, Axis};
use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::core::Core;
use crate::error::{Error, Result};

/// Per-pixel supervision.
#[derive(Clone, Debug, PartialEq)]
pub enum Targets {
    Classes(Vec<usize>),
    Values(Vec<f64>),
}

impl Targets {
    pub fn len(&self) -> usize {
        match self {
            Targets::Classes(v) => v.len(),
            Targets::Values(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn gather(&self, idx: &[usize]) -> Targets {
        match self {
            Targets::Classes(v) => Targets::Classes(idx.iter().map(|&i| v[i]).collect()),
            Targets::Values(v) => Targets::Values(idx.iter().map(|&i| v[i]).collect()),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum SamplingMode {
    #[default]
    Uniform,
    /// Equal quotas per class present, topped up uniformly when a class runs short.
    Stratified,
}

/// Where a sampled row came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PixelSource {
    pub image: usize,
    pub x: usize,
    pub y: usize,
}

/// Randomly drawn hypercolumns with aligned targets.
#[derive(Clone, Debug, PartialEq)]
pub struct CoreSample {
    pub features: Array2<f64>,
    pub targets: Option<Targets>,
    pub sources: Vec<PixelSource>,
}

impl CoreSample {
    pub fn len(&self) -> usize {
        self.features.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Stack samples row-wise. Either all or none must carry targets, of one kind.
    pub fn concat(samples: &[CoreSample]) -> Result<CoreSample> {
        let first = samples
            .first()
            .ok_or_else(|| Error::Argument("nothing to concatenate".into()))?;
        let views: Vec<_> = samples.iter().map(|s| s.features.view()).collect();
        let features = concatenate(Axis(0), &views)
            .map_err(|_| Error::Validation("core samples have different feature counts".into()))?;
        let targets = match &first.targets {
            None => {
                if samples.iter().any(|s| s.targets.is_some()) {
                    return Err(Error::Validation("some core samples lack targets".into()));
                }
                None
            }
            Some(Targets::Classes(_)) => {
                let mut all = Vec::with_capacity(features.nrows());
                for s in samples {
                    match &s.targets {
                        Some(Targets::Classes(v)) => all.extend_from_slice(v),
                        _ => return Err(Error::Validation("mixed target kinds".into())),
                    }
                }
                Some(Targets::Classes(all))
            }
            Some(Targets::Values(_)) => {
                let mut all = Vec::with_capacity(features.nrows());
                for s in samples {
                    match &s.targets {
                        Some(Targets::Values(v)) => all.extend_from_slice(v),
                        _ => return Err(Error::Validation("mixed target kinds".into())),
                    }
                }
                Some(Targets::Values(all))
            }
        };
        Ok(CoreSample {
            features,
            targets,
            sources: samples.iter().flat_map(|s| s.sources.iter().copied()).collect(),
        })
    }
}

/// Choose `n` distinct pixel indices out of `pixel_count`, deterministically
/// from `seed`.
pub fn draw_pixels(
    pixel_count: usize,
    n: usize,
    seed: u64,
    mode: SamplingMode,
    classes: Option<&[usize]>,
) -> Result<Vec<usize>> {
    if n == 0 || n > pixel_count {
        return Err(Error::Argument(format!("sample size {n} outside 1..={pixel_count}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match mode {
        SamplingMode::Uniform => Ok(index::sample(&mut rng, pixel_count, n).into_vec()),
        SamplingMode::Stratified => {
            let classes = classes.ok_or_else(|| Error::Argument("stratified sampling needs class labels".into()))?;
            if classes.len() != pixel_count {
                return Err(Error::shape("class labels", pixel_count, classes.len()));
            }
            let n_classes = classes.iter().max().map_or(0, |&m| m + 1);
            let mut by_class = vec![Vec::new(); n_classes];
            for (i, &c) in classes.iter().enumerate() {
                by_class[c].push(i);
            }
            let present = by_class.iter().filter(|v| !v.is_empty()).count();
            let quota = n.div_ceil(present);
            let mut chosen = Vec::with_capacity(n + present);
            let mut taken = vec![false; pixel_count];
            for members in by_class.iter().filter(|v| !v.is_empty()) {
                let take = quota.min(members.len());
                for j in index::sample(&mut rng, members.len(), take) {
                    chosen.push(members[j]);
                    taken[members[j]] = true;
                }
            }
            chosen.shuffle(&mut rng);
            chosen.truncate(n);
            if chosen.len() < n {
                let rest: Vec<usize> = (0..pixel_count).filter(|&i| !taken[i]).collect();
                let extra = n - chosen.len();
                chosen.extend(index::sample(&mut rng, rest.len(), extra).into_iter().map(|j| rest[j]));
            }
            Ok(chosen)
        }
    }
}

/// Draw `n` rows of `core` without replacement.
pub fn sample_core(
    core: &Core,
    image_id: usize,
    n: usize,
    seed: u64,
    targets: Option<&Targets>,
    mode: SamplingMode,
) -> Result<CoreSample> {
    if let Some(t) = targets {
        if t.len() != core.pixel_count() {
            return Err(Error::shape("targets", core.pixel_count(), t.len()));
        }
    }
    let classes = match targets {
        Some(Targets::Classes(c)) => Some(c.as_slice()),
        _ => None,
    };
    let idx = draw_pixels(core.pixel_count(), n, seed, mode, classes)?;
    Ok(CoreSample {
        features: core.features.select(Axis(0), &idx),
        targets: targets.map(|t| t.gather(&idx)),
        sources: idx
            .iter()
            .map(|&p| PixelSource {
                image: image_id,
                x: p % core.width,
                y: p / core.width,
            })
            .collect(),
    })
}
