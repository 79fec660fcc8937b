//! From raw images to normalised core samples: tiling and mean subtraction,
//! contrast augmentation, hypercolumn assembly, feature scaling, pixel
//! sampling and label targets.

pub mod augment;
pub mod cache;
pub mod core;
pub mod normalize;
pub mod palette;
pub mod sample;
pub mod tiling;

pub use self::augment::{augment_contrast, DEFAULT_CONTRAST_FACTORS};
pub use self::cache::{decode_core_cache, encode_core_cache, read_core_cache, write_core_cache};
pub use self::core::{build_core, Core, CoreAssembler, TileMaps};
pub use self::normalize::{Normalizer, NormalizerAccumulator};
pub use self::palette::{create_targets, Palette, PaletteClass};
pub use self::sample::{draw_pixels, sample_core, CoreSample, PixelSource, SamplingMode, Targets};
pub use self::tiling::{preprocess, tile_grid, tile_offsets, Tile, DEFAULT_STRIDE};
