//! Regenerate the fuzz corpus seeds: `cargo run -p coresample --example fuzz_seeds`.

use std::fs;
use std::path::{Path, PathBuf};

use coresample::dbn::{DbnModel, HeadKind};
use coresample::extractor::{encode_weights, LayerDef, NetworkModel};
use coresample::image_io::{encode_raw_image, write_label_png, write_png, LabelImage};
use coresample::pipeline::{encode_model, Provenance, SavedModel};
use coresample::sampler::{encode_core_cache, Core, Normalizer, Palette, SamplingMode};
use coresample::tensor::{ConvSpec, Tensor};
use ndarray::Array2;

fn corpus(target: &str) -> PathBuf {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fuzz/corpus").join(target);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn trunk() -> NetworkModel {
    let spec = ConvSpec {
        out_channels: 2,
        in_channels: 1,
        kernel_h: 3,
        kernel_w: 3,
        stride: 1,
        padding: 1,
        weights: (0..18).map(|i| i as f64 / 16.0 - 0.5).collect(),
        bias: vec![0.25, -0.25],
    };
    NetworkModel::new(
        vec![127.5],
        vec![
            LayerDef::conv("conv1_1", spec),
            LayerDef::relu("relu1_1"),
            LayerDef::maxpool("pool1", 2, 2),
        ],
    )
    .unwrap()
}

fn saved(head: HeadKind) -> SavedModel {
    let outputs = if head == HeadKind::Logistic { 3 } else { 1 };
    SavedModel {
        dbn: DbnModel::random(&[3, 4], head, outputs, 7).unwrap(),
        normalizer: Normalizer::from_parts(vec![0.0, -1.0, 2.0], vec![1.0, 1.0, 5.0]).unwrap(),
        taps: vec!["relu1_1".into()],
        stride: 112,
        input_channels: 1,
        palette: (head == HeadKind::Logistic).then(|| Palette::parse("255,0,0 a\n0,0,255 b\nrest c\n").unwrap()),
        provenance: Provenance {
            seed: 3,
            samples_per_image: 500,
            sampling: SamplingMode::Uniform,
            contrast: vec![0.8, 1.0, 1.2],
            pretrain: Default::default(),
            fine_tune: Default::default(),
        },
    }
}

fn main() {
    fs::write(corpus("decode_weights").join("trunk.csfw"), encode_weights(&trunk())).unwrap();

    fs::write(
        corpus("decode_model").join("logistic.csdm"),
        encode_model(&saved(HeadKind::Logistic)).unwrap(),
    )
    .unwrap();
    fs::write(
        corpus("decode_model").join("linear.csdm"),
        encode_model(&saved(HeadKind::Linear)).unwrap(),
    )
    .unwrap();

    let img = Tensor::from_fn(1, 3, 4, |_, y, x| (y * 4 + x) as f64 - 5.5).unwrap();
    fs::write(
        corpus("decode_raw_image").join("3x4.raw"),
        encode_raw_image(&img).unwrap(),
    )
    .unwrap();

    let core = Core {
        width: 2,
        height: 2,
        features: Array2::from_shape_fn((4, 3), |(r, c)| (r * 3 + c) as f64 / 12.0),
    };
    fs::write(corpus("decode_core_cache").join("2x2.cscc"), encode_core_cache(&core)).unwrap();

    let png = corpus("decode_png_image");
    write_png(
        &png.join("gray.png"),
        &Tensor::from_fn(1, 4, 4, |_, y, x| (y * 60 + x * 3) as f64).unwrap(),
    )
    .unwrap();
    write_png(
        &png.join("rgb.png"),
        &Tensor::from_fn(3, 2, 3, |c, y, x| (c * 80 + y * 10 + x) as f64).unwrap(),
    )
    .unwrap();
    let labels = LabelImage {
        width: 2,
        height: 2,
        pixels: vec![[255, 0, 0], [0, 0, 255], [1, 2, 3], [255, 0, 0]],
    };
    write_label_png(&png.join("labels.png"), &labels).unwrap();

    let pal = corpus("palette_parse");
    fs::write(pal.join("two.txt"), "255,0,0 stripes\n0,0,255 checker\nrest other\n").unwrap();
    fs::write(pal.join("camvid.txt"), Palette::camvid().to_text()).unwrap();
    fs::write(pal.join("comments.txt"), "# classes\n\n10,20,30 a b\nrest\n").unwrap();
}
