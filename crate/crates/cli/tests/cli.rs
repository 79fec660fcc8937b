use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use coresample::extractor::{save_weights, LayerDef, NetworkModel};
use coresample::image_io::{read_labels, write_label_png, write_png, LabelImage};
use coresample::tensor::{ConvSpec, Tensor};

const RED: [u8; 3] = [255, 0, 0];
const BLUE: [u8; 3] = [0, 0, 255];

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_coresample"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Two 32x32 images: stripes on the left half (red), checkerboard on the
/// right (blue), plus a one-conv trunk and a palette.
fn fixture(root: &Path) {
    for dir in ["images", "labels"] {
        fs::create_dir_all(root.join(dir)).unwrap();
    }
    for i in 0..2 {
        let img = Tensor::from_fn(1, 32, 32, |_, y, x| {
            let on = if x < 16 {
                (y + i) / 2 % 2 == 0
            } else {
                ((x + i) / 2 + y / 2) % 2 == 0
            };
            if on {
                200.0
            } else {
                50.0
            }
        })
        .unwrap();
        let labels = LabelImage {
            width: 32,
            height: 32,
            pixels: (0..32 * 32).map(|p| if p % 32 < 16 { RED } else { BLUE }).collect(),
        };
        write_png(&root.join(format!("images/t{i}.png")), &img).unwrap();
        write_label_png(&root.join(format!("labels/t{i}.png")), &labels).unwrap();
    }
    let spec = ConvSpec {
        out_channels: 4,
        in_channels: 1,
        kernel_h: 3,
        kernel_w: 3,
        stride: 1,
        padding: 1,
        weights: (0..36).map(|i| ((i * 7) % 11) as f64 / 100.0 - 0.05).collect(),
        bias: vec![0.0; 4],
    };
    let trunk = NetworkModel::new(
        vec![125.0],
        vec![
            LayerDef::conv("conv1", spec),
            LayerDef::relu("relu1"),
            LayerDef::maxpool("pool1", 2, 2),
        ],
    )
    .unwrap();
    save_weights(&trunk, root.join("trunk.csfw")).unwrap();
    fs::write(
        root.join("palette.txt"),
        "255,0,0 stripes\n0,0,255 checker\nrest other\n",
    )
    .unwrap();
}

fn train_args(root: &Path, out: &str) -> Vec<String> {
    let p = |s: &str| root.join(s).display().to_string();
    [
        "train",
        "--images",
        &p("images"),
        "--labels",
        &p("labels"),
        "--weights",
        &p("trunk.csfw"),
        "--palette",
        &p("palette.txt"),
        "--samples-per-image",
        "60",
        "--contrast",
        "1.0",
        "--hidden",
        "6",
        "--pretrain-epochs",
        "1",
        "--epochs",
        "3",
        "--seed",
        "9",
        "--out",
        &p(out),
    ]
    .map(String::from)
    .to_vec()
}

fn run(args: &[String]) -> Output {
    bin(&args.iter().map(String::as_str).collect::<Vec<_>>())
}

#[test]
fn train_predict_eval_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    fixture(root);
    let p = |s: &str| root.join(s).display().to_string();

    let o = run(&train_args(root, "m.csdm"));
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(root.join("m.csdm").exists());
    assert!(root.join("m.csdm.log").exists());
    assert!(root.join("m.csdm.metrics").exists());

    let o = bin(&[
        "predict",
        "--model",
        &p("m.csdm"),
        "--weights",
        &p("trunk.csfw"),
        "--images",
        &p("images"),
        "--out",
        &p("pred"),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let pred = read_labels(&root.join("pred/t0.png")).unwrap();
    assert_eq!((pred.width, pred.height), (32, 32));

    let o = bin(&[
        "eval",
        "--pred",
        &p("pred"),
        "--truth",
        &p("labels"),
        "--palette",
        &p("palette.txt"),
        "--report",
        &p("report.txt"),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report = fs::read_to_string(root.join("report.txt")).unwrap();
    assert!(report.contains("Global Avg."), "{report}");
    assert!(report.contains("accuracy="), "{report}");
    assert_eq!(String::from_utf8_lossy(&o.stdout), report);
}

#[test]
fn training_is_reproducible_from_the_command_line() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    fixture(root);
    for out in ["a.csdm", "b.csdm"] {
        let o = run(&train_args(root, out));
        assert!(o.status.success(), "{}", stderr(&o));
    }
    assert_eq!(
        fs::read(root.join("a.csdm")).unwrap(),
        fs::read(root.join("b.csdm")).unwrap()
    );
}

#[test]
fn errors_are_categorised() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    fixture(root);
    let p = |s: &str| root.join(s).display().to_string();

    fs::create_dir_all(root.join("empty")).unwrap();
    let mut args = train_args(root, "m.csdm");
    for (i, a) in args.clone().iter().enumerate() {
        if a == "--images" || a == "--labels" {
            args[i + 1] = p("empty");
        }
    }
    let o = run(&args);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("error[argument]"), "{}", stderr(&o));
    assert!(!root.join("m.csdm").exists());

    fs::write(root.join("bad.csfw"), b"junk").unwrap();
    let args: Vec<String> = train_args(root, "m.csdm")
        .into_iter()
        .map(|a| if a.ends_with("trunk.csfw") { p("bad.csfw") } else { a })
        .collect();
    let o = run(&args);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("error[format]"), "{}", stderr(&o));

    let o = bin(&[
        "predict",
        "--model",
        &p("missing.csdm"),
        "--weights",
        &p("trunk.csfw"),
        "--images",
        &p("images"),
        "--out",
        &p("pred"),
    ]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("error[io]"), "{}", stderr(&o));
}

#[test]
fn argument_parsing_rejects_incomplete_commands() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    fixture(root);
    let mut no_seed = train_args(root, "m.csdm");
    let at = no_seed.iter().position(|a| a == "--seed").unwrap();
    no_seed.drain(at..at + 2);
    assert!(!run(&no_seed).status.success());

    let mut early = train_args(root, "m.csdm");
    early.push("--early-stop".into());
    let o = run(&early);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("--validation"), "{}", stderr(&o));

    let mut bad_hidden = train_args(root, "m.csdm");
    let at = bad_hidden.iter().position(|a| a == "--hidden").unwrap();
    bad_hidden[at + 1] = "8,x".into();
    let o = run(&bad_hidden);
    assert!(stderr(&o).contains("error[argument]"), "{}", stderr(&o));
}
