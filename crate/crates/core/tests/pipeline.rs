mod common;

use std::fs;
use std::path::{Path, PathBuf};

use coresample::dbn::{FineTuneConfig, PretrainConfig};
use coresample::extractor::{save_weights, LayerDef, NetworkModel};
use coresample::image_io::{read_image, read_labels, write_label_png, write_png, write_raw_image, LabelImage};
use coresample::pipeline::{
    evaluate_regression, parse_key_values, predict_command, train_command, PredictConfig, TargetKind, TrainConfig,
};
use coresample::tensor::{ConvSpec, Tensor};
use coresample::Error;

fn quick(root: &Path, images: PathBuf, labels: PathBuf, target: TargetKind) -> TrainConfig {
    let weights = root.join("trunk.csfw");
    if !weights.exists() {
        common::write_trunk(&weights, 3);
    }
    TrainConfig {
        samples_per_image: 100,
        contrast: vec![1.0],
        hidden: vec![8],
        pretrain: PretrainConfig {
            epochs: 2,
            ..Default::default()
        },
        fine_tune: FineTuneConfig {
            lr: 0.3,
            lr_decay: 0.1,
            epochs: 6,
            dropout: 0.0,
            ..Default::default()
        },
        ..TrainConfig::new(images, labels, weights, target, root.join("model.csdm"), 5)
    }
}

fn predict_into(config: &TrainConfig, images: &Path, out: &Path) -> coresample::Result<Vec<PathBuf>> {
    predict_command(&PredictConfig {
        model: config.out.clone(),
        weights: config.weights.clone(),
        images: images.to_path_buf(),
        out: out.to_path_buf(),
    })
}

#[test]
fn zero_images_is_an_argument_error_and_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let (images, labels) = (dir.path().join("images"), dir.path().join("labels"));
    fs::create_dir_all(&images).unwrap();
    fs::create_dir_all(&labels).unwrap();
    let config = quick(dir.path(), images, labels, TargetKind::Classes(common::palette()));
    let err = train_command(&config).unwrap_err();
    assert!(matches!(err, Error::Argument(_)), "{err}");
    assert!(!config.out.exists());
}

#[test]
fn label_size_mismatch_names_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let (images, labels) = common::write_dataset(dir.path(), 2, 4);
    let small = LabelImage {
        width: 10,
        height: 10,
        pixels: vec![common::STRIPES; 100],
    };
    write_label_png(&labels.join("img001.png"), &small).unwrap();
    let config = quick(dir.path(), images, labels, TargetKind::Classes(common::palette()));
    let err = train_command(&config).unwrap_err();
    assert!(matches!(err, Error::Validation(_)), "{err}");
    assert!(err.to_string().contains("img001.png"), "{err}");
}

#[test]
fn unreadable_weights_are_a_format_error() {
    let dir = tempfile::tempdir().unwrap();
    let (images, labels) = common::write_dataset(dir.path(), 1, 4);
    let config = quick(dir.path(), images, labels, TargetKind::Classes(common::palette()));
    fs::write(&config.weights, b"not a weight file").unwrap();
    let err = train_command(&config).unwrap_err();
    assert!(matches!(err, Error::Format { .. }), "{err}");
}

#[test]
fn early_stop_without_validation_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let (images, labels) = common::write_dataset(dir.path(), 1, 4);
    let mut config = quick(dir.path(), images, labels, TargetKind::Classes(common::palette()));
    config.early_stop = true;
    assert!(matches!(train_command(&config), Err(Error::Argument(_))));
}

#[test]
fn train_writes_model_log_and_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let (images, labels) = common::write_dataset(&dir.path().join("train"), 3, 6);
    let config = quick(dir.path(), images, labels, TargetKind::Classes(common::palette()));
    let outcome = train_command(&config).unwrap();
    assert_eq!(outcome.sample_rows, 300);
    assert!(config.out.exists());

    let log = fs::read_to_string(config.log_path()).unwrap();
    assert!(log.contains("fine-tune epoch 5"), "{log}");
    let metrics = parse_key_values(&fs::read_to_string(config.metrics_path()).unwrap());
    assert_eq!(metrics["k"], "17");
    assert_eq!(metrics["layers"], "17,8,3");
    assert_eq!(metrics["rows"], "300");
    let losses: Vec<f64> = metrics["epoch_losses"].split(',').map(|v| v.parse().unwrap()).collect();
    assert_eq!(losses.len(), 6);
    assert!(losses[5] < losses[0], "{losses:?}");
}

#[test]
fn validation_runs_and_early_stop_restores_a_model() {
    let dir = tempfile::tempdir().unwrap();
    let (images, labels) = common::write_dataset(&dir.path().join("train"), 2, 6);
    common::write_dataset(&dir.path().join("val"), 1, 7);
    let mut config = quick(dir.path(), images, labels, TargetKind::Classes(common::palette()));
    config.validation = Some(dir.path().join("val"));
    config.early_stop = true;
    config.fine_tune.patience = Some(1);
    let outcome = train_command(&config).unwrap();
    let v = &outcome.report.validation;
    assert!(!v.is_empty() && v.len() == outcome.report.epoch_losses.len());
    assert!(v.iter().all(|a| (0.0..=1.0).contains(a)));
    let metrics = parse_key_values(&fs::read_to_string(config.metrics_path()).unwrap());
    assert!(metrics.contains_key("final_validation"));
}

#[test]
fn k_mismatch_at_predict_time_cites_both_values() {
    let dir = tempfile::tempdir().unwrap();
    let (images, labels) = common::write_dataset(&dir.path().join("train"), 1, 6);
    let config = quick(
        dir.path(),
        images.clone(),
        labels,
        TargetKind::Classes(common::palette()),
    );
    train_command(&config).unwrap();

    // Same tap names, narrower layers: k = 3 + 3 + 1 = 7 instead of 17.
    let conv = |out: usize, inp: usize| ConvSpec {
        out_channels: out,
        in_channels: inp,
        kernel_h: 3,
        kernel_w: 3,
        stride: 1,
        padding: 1,
        weights: vec![0.1; out * inp * 9],
        bias: vec![0.0; out],
    };
    let narrow = NetworkModel::new(
        vec![125.0],
        vec![
            LayerDef::conv("conv1_1", conv(3, 1)),
            LayerDef::relu("relu1_1"),
            LayerDef::conv("conv1_2", conv(3, 3)),
            LayerDef::relu("relu1_2"),
            LayerDef::maxpool("pool1", 2, 2),
            LayerDef::conv("conv2_1", conv(3, 3)),
            LayerDef::relu("relu2_1"),
            LayerDef::maxpool("pool2", 2, 2),
        ],
    )
    .unwrap();
    let other = dir.path().join("narrow.csfw");
    save_weights(&narrow, &other).unwrap();
    let err = predict_command(&PredictConfig {
        model: config.out.clone(),
        weights: other,
        images,
        out: dir.path().join("pred"),
    })
    .unwrap_err();
    assert!(matches!(err, Error::Validation(_)), "{err}");
    let msg = err.to_string();
    assert!(msg.contains("k = 17") && msg.contains("k = 7"), "{msg}");
}

#[test]
fn truncated_model_is_a_format_error() {
    let dir = tempfile::tempdir().unwrap();
    let (images, labels) = common::write_dataset(&dir.path().join("train"), 1, 6);
    let config = quick(
        dir.path(),
        images.clone(),
        labels,
        TargetKind::Classes(common::palette()),
    );
    train_command(&config).unwrap();
    let bytes = fs::read(&config.out).unwrap();
    fs::write(&config.out, &bytes[..bytes.len() / 2]).unwrap();
    let err = predict_into(&config, &images, &dir.path().join("pred")).unwrap_err();
    assert!(matches!(err, Error::Format { .. }), "{err}");
}

#[test]
fn outputs_match_input_sizes_and_constant_input_gives_constant_labels() {
    let dir = tempfile::tempdir().unwrap();
    let (images, labels) = common::write_dataset(&dir.path().join("train"), 2, 6);
    let config = quick(dir.path(), images, labels, TargetKind::Classes(common::palette()));
    train_command(&config).unwrap();

    let test = dir.path().join("test");
    fs::create_dir_all(&test).unwrap();
    let sizes = [(37, 23), (64, 64), (300, 230)];
    for (i, &(w, h)) in sizes.iter().enumerate() {
        let img = Tensor::from_fn(1, h, w, |_, y, x| ((x * 7 + y * 13) % 256) as f64).unwrap();
        write_png(&test.join(format!("s{i}.png")), &img).unwrap();
    }
    write_png(&test.join("flat.png"), &Tensor::filled(1, 90, 250, 120.0).unwrap()).unwrap();

    let written = predict_into(&config, &test, &dir.path().join("pred")).unwrap();
    assert_eq!(written.len(), 4);
    for path in &written {
        let stem = path.file_stem().unwrap().to_str().unwrap();
        let src = read_image(&test.join(format!("{stem}.png"))).unwrap();
        let pred = read_labels(path).unwrap();
        assert_eq!((pred.width, pred.height), (src.width(), src.height()), "{stem}");
        if stem == "flat" {
            assert!(pred.pixels.iter().all(|&p| p == pred.pixels[0]));
        }
    }
}

#[test]
fn regression_targets_round_trip_through_raw_files() {
    let dir = tempfile::tempdir().unwrap();
    let (images, labels) = (dir.path().join("images"), dir.path().join("values"));
    fs::create_dir_all(&images).unwrap();
    fs::create_dir_all(&labels).unwrap();
    for i in 0..2 {
        let (img, lab) = common::texture_image(40 + i);
        write_png(&images.join(format!("r{i}.png")), &img).unwrap();
        let values = lab
            .pixels
            .iter()
            .map(|&p| if p == common::STRIPES { 1.0 } else { -1.0 })
            .collect();
        write_raw_image(
            &labels.join(format!("r{i}.raw")),
            &Tensor::new(1, common::SIDE, common::SIDE, values).unwrap(),
        )
        .unwrap();
    }
    let mut config = quick(dir.path(), images.clone(), labels.clone(), TargetKind::Values);
    config.samples_per_image = 500;
    config.hidden = vec![16];
    config.pretrain.epochs = 10;
    config.pretrain.lr = 0.05;
    config.fine_tune.epochs = 40;
    config.fine_tune.lr = 0.1;
    config.fine_tune.lr_decay = 0.05;
    let outcome = train_command(&config).unwrap();
    assert!(outcome.model.palette.is_none());

    let pred = dir.path().join("pred");
    let written = predict_into(&config, &images, &pred).unwrap();
    for path in &written {
        assert_eq!(path.extension().unwrap(), "raw");
        assert_eq!(read_image(path).unwrap().dims(), (1, common::SIDE, common::SIDE));
    }
    let report = evaluate_regression(&pred, &labels).unwrap();
    assert_eq!(report.pixels, 2 * (common::SIDE * common::SIDE) as u64);
    let truth: Vec<f64> = (0..2)
        .flat_map(|i| read_image(&labels.join(format!("r{i}.raw"))).unwrap().into_data())
        .collect();
    let mean = truth.iter().sum::<f64>() / truth.len() as f64;
    let variance = truth.iter().map(|t| (t - mean) * (t - mean)).sum::<f64>() / truth.len() as f64;
    // Variance is the error of the best constant prediction.
    assert!(report.mse < 0.5 * variance, "mse {} vs variance {variance}", report.mse);
}
