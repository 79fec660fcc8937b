//! Synthetic two-texture data set and a small fixed-filter trunk.

#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};

use coresample::extractor::{save_weights, LayerDef, NetworkModel};
use coresample::image_io::{write_label_png, write_png, LabelImage};
use coresample::sampler::Palette;
use coresample::tensor::{ConvSpec, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const SIDE: usize = 64;
pub const STRIPES: [u8; 3] = [255, 0, 0];
pub const CHECKER: [u8; 3] = [0, 0, 255];
pub const HIGH: f64 = 200.0;
pub const LOW: f64 = 50.0;

pub fn palette() -> Palette {
    Palette::parse("255,0,0 stripes\n0,0,255 checker\nrest other\n").unwrap()
}

/// One image: horizontal stripes two pixels tall on one side of a random
/// vertical or horizontal split, a checkerboard of two-pixel squares on the
/// other. Both textures use the same two grey levels in equal proportion, so
/// a pixel's own intensity says nothing about its class.
pub fn texture_image(seed: u64) -> (Tensor, LabelImage) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let split = rng.random_range(16..SIDE - 16);
    let vertical: bool = rng.random();
    let stripes_first: bool = rng.random();
    let (px, py): (usize, usize) = (rng.random_range(0..4), rng.random_range(0..4));
    let mut labels = Vec::with_capacity(SIDE * SIDE);
    let mut noise = Vec::with_capacity(SIDE * SIDE);
    for _ in 0..SIDE * SIDE {
        noise.push(rng.random_range(-10.0..10.0));
    }
    for y in 0..SIDE {
        for x in 0..SIDE {
            let first = if vertical { x < split } else { y < split };
            labels.push(if first == stripes_first { STRIPES } else { CHECKER });
        }
    }
    let image = Tensor::from_fn(1, SIDE, SIDE, |_, y, x| {
        let on = if labels[y * SIDE + x] == STRIPES {
            ((y + py) / 2) % 2 == 0
        } else {
            ((x + px) / 2 + (y + py) / 2) % 2 == 0
        };
        (if on { HIGH } else { LOW }) + noise[y * SIDE + x]
    })
    .unwrap();
    (
        image,
        LabelImage {
            width: SIDE,
            height: SIDE,
            pixels: labels,
        },
    )
}

/// Write `count` images and labels named `img000.png`, … into
/// `root/images` and `root/labels`.
pub fn write_dataset(root: &Path, count: usize, seed: u64) -> (PathBuf, PathBuf) {
    let (images, labels) = (root.join("images"), root.join("labels"));
    fs::create_dir_all(&images).unwrap();
    fs::create_dir_all(&labels).unwrap();
    for i in 0..count {
        let (img, lab) = texture_image(seed * 1000 + i as u64);
        let name = format!("img{i:03}.png");
        write_png(&images.join(&name), &img).unwrap();
        write_label_png(&labels.join(&name), &lab).unwrap();
    }
    (images, labels)
}

fn conv(out: usize, inp: usize, weights: Vec<f64>, bias: Vec<f64>) -> ConvSpec {
    ConvSpec {
        out_channels: out,
        in_channels: inp,
        kernel_h: 3,
        kernel_w: 3,
        stride: 1,
        padding: 1,
        weights,
        bias,
    }
}

/// Two conv blocks. conv1_1 holds signed horizontal and vertical difference
/// filters plus seeded random ones, conv1_2 box-filters each channel, block 2
/// is seeded random. Block ends are `relu1_2` and `relu2_1`.
pub fn texture_trunk(seed: u64) -> NetworkModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    const C: usize = 8;
    let dx = [0.0, 0.0, 0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0];
    let dy = [0.0, -1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0];
    let mut w1 = Vec::with_capacity(C * 9);
    for k in [dx, dx.map(|v| -v), dy, dy.map(|v| -v)] {
        w1.extend(k.map(|v| v / 100.0));
    }
    for _ in 4..C {
        w1.extend((0..9).map(|_| rng.random_range(-0.01..0.01)));
    }
    let mut w2 = vec![0.0; C * C * 9];
    for c in 0..C {
        w2[(c * C + c) * 9..(c * C + c + 1) * 9].fill(1.0 / 9.0);
    }
    let w3 = (0..C * C * 9).map(|_| rng.random_range(-0.2..0.2)).collect();
    NetworkModel::new(
        vec![(HIGH + LOW) / 2.0],
        vec![
            LayerDef::conv("conv1_1", conv(C, 1, w1, vec![0.0; C])),
            LayerDef::relu("relu1_1"),
            LayerDef::conv("conv1_2", conv(C, C, w2, vec![0.0; C])),
            LayerDef::relu("relu1_2"),
            LayerDef::maxpool("pool1", 2, 2),
            LayerDef::conv("conv2_1", conv(C, C, w3, vec![0.0; C])),
            LayerDef::relu("relu2_1"),
            LayerDef::maxpool("pool2", 2, 2),
        ],
    )
    .unwrap()
}

pub fn write_trunk(path: &Path, seed: u64) {
    save_weights(&texture_trunk(seed), path).unwrap();
}
