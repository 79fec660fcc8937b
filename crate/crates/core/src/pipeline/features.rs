use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::extractor::{forward_with_taps, NetworkModel, TapSet};
use crate::sampler::{preprocess, Core, CoreAssembler};
use crate::tensor::Tensor;

/// Rows handed to a sink at a time.
pub const CHUNK_ROWS: usize = 4096;

/// Trunk, taps and tiling stride: everything needed to turn an image into
/// hypercolumns.
#[derive(Clone, Debug)]
pub struct FeatureExtractor {
    model: NetworkModel,
    taps: TapSet,
    stride: usize,
    k: usize,
}

impl FeatureExtractor {
    pub fn new(model: NetworkModel, taps: TapSet, stride: usize) -> Result<Self> {
        if stride == 0 {
            return Err(Error::Argument("tile stride must be at least 1".into()));
        }
        let k = taps.feature_count(&model)?;
        Ok(Self { model, taps, stride, k })
    }

    pub fn model(&self) -> &NetworkModel {
        &self.model
    }

    pub fn taps(&self) -> &TapSet {
        &self.taps
    }

    pub fn stride(&self) -> usize {
        self.stride
    }

    /// Hypercolumn length.
    pub fn k(&self) -> usize {
        self.k
    }

    /// Compute every hypercolumn of `image` tile by tile. `sink` receives
    /// pixel indices (`y · W + x`) and the matching rows, at most
    /// [`CHUNK_ROWS`] at a time; every pixel is delivered exactly once.
    pub fn stream_core(
        &self,
        image: &Tensor,
        mut sink: impl FnMut(&[usize], ArrayView2<f64>) -> Result<()>,
    ) -> Result<()> {
        let tiles = preprocess(image, &self.model, self.stride)?;
        let offsets: Vec<_> = tiles.iter().map(|t| t.offset).collect();
        let mut asm = CoreAssembler::new(image, &offsets)?;
        let mut buf = Array2::zeros((0, self.k));
        for (t, tile) in tiles.iter().enumerate() {
            let pixels = asm.owned_pixels(t);
            if pixels.is_empty() {
                continue;
            }
            let maps = forward_with_taps(&self.model, &tile.tensor, &self.taps)?;
            for chunk in pixels.chunks(CHUNK_ROWS) {
                if buf.nrows() != chunk.len() {
                    buf = Array2::zeros((chunk.len(), self.k));
                }
                asm.fill_rows(t, &maps, chunk, buf.view_mut())?;
                sink(chunk, buf.view())?;
            }
        }
        Ok(())
    }

    /// The full core of `image`, held in memory.
    pub fn core(&self, image: &Tensor) -> Result<Core> {
        let mut features = Array2::zeros((image.width() * image.height(), self.k));
        self.stream_core(image, |pixels, rows| {
            for (r, &p) in pixels.iter().enumerate() {
                features.row_mut(p).assign(&rows.row(r));
            }
            Ok(())
        })?;
        Ok(Core {
            width: image.width(),
            height: image.height(),
            features,
        })
    }
}
