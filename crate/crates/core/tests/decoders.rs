//! Decoders return errors, never panic, on arbitrary and mutated input.

use coresample::dbn::{DbnModel, HeadKind};
use coresample::extractor::{decode_weights, encode_weights, LayerDef, NetworkModel};
use coresample::image_io::{decode_png_image, decode_png_labels, decode_raw_image, encode_raw_image};
use coresample::pipeline::{decode_model, encode_model, Provenance, SavedModel};
use coresample::sampler::{decode_core_cache, encode_core_cache, Core, Normalizer, Palette, SamplingMode};
use coresample::tensor::{ConvSpec, Tensor};
use ndarray::Array2;
use proptest::prelude::*;

fn weights_bytes() -> Vec<u8> {
    let spec = ConvSpec {
        out_channels: 2,
        in_channels: 1,
        kernel_h: 3,
        kernel_w: 3,
        stride: 1,
        padding: 1,
        weights: (0..18).map(|i| i as f64 / 8.0).collect(),
        bias: vec![0.5, -0.5],
    };
    let m = NetworkModel::new(
        vec![100.0],
        vec![
            LayerDef::conv("c", spec),
            LayerDef::relu("r"),
            LayerDef::maxpool("p", 2, 2),
        ],
    )
    .unwrap();
    encode_weights(&m)
}

fn model_bytes() -> Vec<u8> {
    let saved = SavedModel {
        dbn: DbnModel::random(&[3, 4], HeadKind::Logistic, 2, 1).unwrap(),
        normalizer: Normalizer::from_parts(vec![0.0; 3], vec![1.0; 3]).unwrap(),
        taps: vec!["r".into()],
        stride: 112,
        input_channels: 1,
        palette: Some(Palette::parse("1,2,3 a\nrest b\n").unwrap()),
        provenance: Provenance {
            seed: 1,
            samples_per_image: 10,
            sampling: SamplingMode::Uniform,
            contrast: vec![1.0],
            pretrain: Default::default(),
            fine_tune: Default::default(),
        },
    };
    encode_model(&saved).unwrap()
}

/// Overwrite bytes at `edits`. With `checksummed`, recompute the trailing
/// CRC so the model decoder reaches the fields behind it.
fn mutate(mut bytes: Vec<u8>, edits: &[(usize, u8)], checksummed: bool) -> Vec<u8> {
    for &(at, v) in edits {
        let n = bytes.len();
        bytes[at % n] = v;
    }
    if checksummed && bytes.len() >= 4 {
        let body = bytes.len() - 4;
        let crc = crc32fast::hash(&bytes[..body]);
        bytes[body..].copy_from_slice(&crc.to_le_bytes());
    }
    bytes
}

fn decode_all(bytes: &[u8]) {
    let _ = decode_weights(bytes);
    let _ = decode_model(bytes);
    let _ = decode_raw_image(bytes);
    let _ = decode_core_cache(bytes);
    let _ = decode_png_image(bytes);
    let _ = decode_png_labels(bytes);
    let _ = Palette::parse(&String::from_utf8_lossy(bytes));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn arbitrary_bytes(bytes in proptest::collection::vec(any::<u8>(), 0..256)) {
        decode_all(&bytes);
    }

    #[test]
    fn mutated_weights(edits in proptest::collection::vec((any::<usize>(), any::<u8>()), 1..6), cut in any::<usize>()) {
        let bytes = mutate(weights_bytes(), &edits, false);
        let _ = decode_weights(&bytes);
        let _ = decode_weights(&bytes[..cut % (bytes.len() + 1)]);
    }

    #[test]
    fn mutated_model(edits in proptest::collection::vec((any::<usize>(), any::<u8>()), 1..6)) {
        let _ = decode_model(&mutate(model_bytes(), &edits, true));
    }

    #[test]
    fn mutated_raw_and_cache(edits in proptest::collection::vec((any::<usize>(), any::<u8>()), 1..4)) {
        let img = Tensor::from_fn(1, 3, 5, |_, y, x| (y * 5 + x) as f64).unwrap();
        let _ = decode_raw_image(&mutate(encode_raw_image(&img).unwrap(), &edits, false));
        let core = Core { width: 2, height: 2, features: Array2::from_elem((4, 3), 0.5) };
        let _ = decode_core_cache(&mutate(encode_core_cache(&core), &edits, false));
    }

    #[test]
    fn palette_lines(text in "([0-9]{1,3},[0-9]{1,3},[0-9]{1,3} [a-z]{0,4}\n|rest [a-z]*\n|#.*\n|[ -~]{0,12}\n){0,6}") {
        if let Ok(p) = Palette::parse(&text) {
            prop_assert_eq!(Palette::parse(&p.to_text()).unwrap(), p);
        }
    }
}

#[test]
fn valid_encodings_decode() {
    assert!(decode_weights(&weights_bytes()).is_ok());
    assert!(decode_model(&model_bytes()).is_ok());
}

#[test]
fn checked_in_seeds_are_valid() {
    let root = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("fuzz/corpus");
    let files = |t: &str| -> Vec<Vec<u8>> {
        let mut v: Vec<_> = std::fs::read_dir(root.join(t))
            .unwrap()
            .map(|e| e.unwrap().path())
            .collect();
        v.sort();
        v.iter().map(|p| std::fs::read(p).unwrap()).collect()
    };
    for b in files("decode_weights") {
        decode_weights(&b).unwrap();
    }
    for b in files("decode_model") {
        decode_model(&b).unwrap();
    }
    for b in files("decode_raw_image") {
        decode_raw_image(&b).unwrap();
    }
    for b in files("decode_core_cache") {
        decode_core_cache(&b).unwrap();
    }
    for b in files("decode_png_image") {
        decode_png_image(&b).unwrap();
        decode_png_labels(&b).unwrap();
    }
    for b in files("palette_parse") {
        Palette::parse(std::str::from_utf8(&b).unwrap()).unwrap();
    }
}
