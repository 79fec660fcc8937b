//! Hypercolumn cores.
//!
//! Column layout of a hypercolumn: the channels of each tapped map in layer
//! order, followed by the raw input channels. Row `y · W + x` belongs to pixel
//! `(x, y)`.

use ndarray::{Array2, ArrayViewMut2};

use crate::error::{Error, Result};
use crate::extractor::TILE;
use crate::tensor::{ResizePlan, Tensor};

/// One hypercolumn per image pixel.
#[derive(Clone, Debug, PartialEq)]
pub struct Core {
    pub width: usize,
    pub height: usize,
    pub features: Array2<f64>,
}

impl Core {
    pub fn k(&self) -> usize {
        self.features.ncols()
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }
}

/// Maps produced by one tile, tagged with the tile's image offset.
pub type TileMaps = ((isize, isize), Vec<Tensor>);

/// Assigns every pixel to the tile that produces its hypercolumn and writes
/// rows on demand, so callers can stream a core tile by tile instead of
/// holding it all in memory.
///
/// Where tiles overlap the later tile in processing order wins.
pub struct CoreAssembler<'a> {
    image: &'a Tensor,
    offsets: Vec<(isize, isize)>,
    owners: Vec<u32>,
    layout: Option<Vec<usize>>,
}

impl<'a> CoreAssembler<'a> {
    pub fn new(image: &'a Tensor, offsets: &[(isize, isize)]) -> Result<Self> {
        let (w, h) = (image.width(), image.height());
        let mut owners = vec![u32::MAX; w * h];
        for (t, &(ox, oy)) in offsets.iter().enumerate() {
            let (x0, x1) = clip(ox, w);
            let (y0, y1) = clip(oy, h);
            for y in y0..y1 {
                owners[y * w + x0..y * w + x1].fill(t as u32);
            }
        }
        if let Some(p) = owners.iter().position(|&o| o == u32::MAX) {
            return Err(Error::Validation(format!(
                "tiles leave pixel ({}, {}) uncovered",
                p % w,
                p / w
            )));
        }
        Ok(Self {
            image,
            offsets: offsets.to_vec(),
            owners,
            layout: None,
        })
    }

    pub fn tile_count(&self) -> usize {
        self.offsets.len()
    }

    /// Pixel indices whose hypercolumn comes from `tile`, in row-major order.
    pub fn owned_pixels(&self, tile: usize) -> Vec<usize> {
        let t = tile as u32;
        self.owners
            .iter()
            .enumerate()
            .filter_map(|(i, &o)| (o == t).then_some(i))
            .collect()
    }

    /// Hypercolumn length for maps with these channel counts.
    pub fn feature_count(&self, map_channels: &[usize]) -> usize {
        map_channels.iter().sum::<usize>() + self.image.channels()
    }

    /// Check that `maps` has the same structure as every earlier tile.
    fn check_layout(&mut self, maps: &[Tensor]) -> Result<()> {
        let layout: Vec<usize> = maps.iter().map(Tensor::channels).collect();
        match &self.layout {
            None => self.layout = Some(layout),
            Some(prev) if *prev != layout => {
                return Err(Error::Validation(format!(
                    "tile maps disagree: expected channel layout {prev:?}, got {layout:?}"
                )))
            }
            Some(_) => {}
        }
        Ok(())
    }

    /// Write the hypercolumns of `pixels` (all owned by `tile`) into `out`,
    /// one row per pixel.
    pub fn fill_rows(
        &mut self,
        tile: usize,
        maps: &[Tensor],
        pixels: &[usize],
        mut out: ArrayViewMut2<f64>,
    ) -> Result<()> {
        self.check_layout(maps)?;
        let k = self.feature_count(&maps.iter().map(Tensor::channels).collect::<Vec<_>>());
        if out.ncols() != k {
            return Err(Error::shape("core columns", k, out.ncols()));
        }
        if out.nrows() != pixels.len() {
            return Err(Error::shape("core rows", pixels.len(), out.nrows()));
        }
        let plans = maps
            .iter()
            .map(|m| ResizePlan::new(m.width(), m.height(), TILE, TILE))
            .collect::<Result<Vec<_>>>()?;
        let (ox, oy) = self.offsets[tile];
        let w = self.image.width();
        for (r, &p) in pixels.iter().enumerate() {
            debug_assert_eq!(self.owners[p], tile as u32);
            let (x, y) = (p % w, p / w);
            let tx = (x as isize - ox) as usize;
            let ty = (y as isize - oy) as usize;
            let mut row = out.row_mut(r);
            let mut col = 0;
            for (map, plan) in maps.iter().zip(&plans) {
                for c in 0..map.channels() {
                    row[col] = plan.sample(map.channel(c), tx, ty);
                    col += 1;
                }
            }
            for c in 0..self.image.channels() {
                row[col] = self.image.get(c, y, x);
                col += 1;
            }
        }
        Ok(())
    }
}

fn clip(offset: isize, dim: usize) -> (usize, usize) {
    let lo = offset.max(0) as usize;
    let hi = (offset + TILE as isize).clamp(0, dim as isize) as usize;
    (lo.min(hi), hi)
}

/// Assemble the full core of `image` from its tiles' maps.
///
/// `image` holds the raw (not mean-subtracted) pixel values; they become the
/// last columns of each hypercolumn.
pub fn build_core(image: &Tensor, tiles_with_maps: &[TileMaps]) -> Result<Core> {
    let offsets: Vec<_> = tiles_with_maps.iter().map(|(o, _)| *o).collect();
    let mut asm = CoreAssembler::new(image, &offsets)?;
    let channels: Vec<usize> = match tiles_with_maps.first() {
        Some((_, maps)) => maps.iter().map(Tensor::channels).collect(),
        None => return Err(Error::Argument("no tiles given".into())),
    };
    let k = asm.feature_count(&channels);
    let mut features = Array2::zeros((image.width() * image.height(), k));
    let mut buf = Array2::zeros((0, k));
    for (t, (_, maps)) in tiles_with_maps.iter().enumerate() {
        let pixels = asm.owned_pixels(t);
        if buf.nrows() != pixels.len() {
            buf = Array2::zeros((pixels.len(), k));
        }
        asm.fill_rows(t, maps, &pixels, buf.view_mut())?;
        for (r, &p) in pixels.iter().enumerate() {
            features.row_mut(p).assign(&buf.row(r));
        }
    }
    Ok(Core {
        width: image.width(),
        height: image.height(),
        features,
    })
}
