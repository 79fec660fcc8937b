use crate::error::{Error, Result};
use crate::extractor::{NetworkModel, TILE};
use crate::tensor::Tensor;

/// Default sliding-window stride (half a tile).
pub const DEFAULT_STRIDE: usize = 112;

/// A mean-subtracted `TILE × TILE` window of an image.
///
/// `offset` is the image coordinate of the tile's top-left corner. It is
/// negative along an axis where the image is smaller than a tile and was
/// padded to fit.
#[derive(Clone, Debug, PartialEq)]
pub struct Tile {
    pub tensor: Tensor,
    pub offset: (isize, isize),
}

/// Window start positions along one axis.
///
/// Short axes get a single centred window. Long axes get windows at
/// `0, stride, 2·stride, …` with the last one clamped to `dim − TILE` so the
/// whole axis is covered. Strides above `TILE` are capped at `TILE`, since a
/// wider step would skip pixels.
pub fn tile_offsets(dim: usize, stride: usize) -> Vec<isize> {
    assert!(stride >= 1, "stride must be positive");
    let stride = stride.min(TILE);
    if dim <= TILE {
        return vec![-(((TILE - dim) / 2) as isize)];
    }
    let mut out = Vec::new();
    let mut o = 0;
    while o + TILE < dim {
        out.push(o as isize);
        o += stride;
    }
    out.push((dim - TILE) as isize);
    out
}

/// Tile offsets in processing order: rows of tiles top to bottom, each row
/// left to right.
pub fn tile_grid(width: usize, height: usize, stride: usize) -> Vec<(isize, isize)> {
    let xs = tile_offsets(width, stride);
    tile_offsets(height, stride)
        .into_iter()
        .flat_map(|y| xs.iter().map(move |&x| (x, y)))
        .collect()
}

/// Cut an image into network-sized tiles and subtract the model's channel
/// means. Pixels outside the image are zero after subtraction, i.e. padding
/// uses the channel mean in raw units. Images are never rescaled.
pub fn preprocess(image: &Tensor, model: &NetworkModel, stride: usize) -> Result<Vec<Tile>> {
    if stride == 0 {
        return Err(Error::Argument("tile stride must be at least 1".into()));
    }
    if image.channels() != model.input_channels() {
        return Err(Error::shape("image channels", model.input_channels(), image.channels()));
    }
    let means = model.channel_means();
    let (w, h) = (image.width() as isize, image.height() as isize);
    tile_grid(image.width(), image.height(), stride)
        .into_iter()
        .map(|(ox, oy)| {
            let tensor = Tensor::from_fn(image.channels(), TILE, TILE, |c, ty, tx| {
                let (x, y) = (ox + tx as isize, oy + ty as isize);
                if x < 0 || y < 0 || x >= w || y >= h {
                    0.0
                } else {
                    image.get(c, y as usize, x as usize) - means[c]
                }
            })?;
            Ok(Tile {
                tensor,
                offset: (ox, oy),
            })
        })
        .collect()
}
