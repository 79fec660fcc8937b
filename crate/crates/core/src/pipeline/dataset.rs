use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{with_path, Error, Result};
use crate::image_io::{read_image, read_labels, ImageKind};
use crate::sampler::{create_targets, Palette, Targets};
use crate::tensor::Tensor;

/// Supported image files in `dir` (PNG and raw), sorted by file name.
pub fn list_images(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = fs::read_dir(dir).map_err(|e| with_path(e.into(), dir))?;
    let mut out = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| with_path(e.into(), dir))?.path();
        if path.is_file() && ImageKind::from_path(&path).is_some() {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

/// Match two file lists by stem. Any file without a partner is reported and
/// the whole pairing fails.
pub fn pair_by_stem(
    left: &[PathBuf],
    right: &[PathBuf],
    left_name: &str,
    right_name: &str,
) -> Result<Vec<(PathBuf, PathBuf)>> {
    let mut by_stem: BTreeMap<String, (Option<PathBuf>, Option<PathBuf>)> = BTreeMap::new();
    for p in left {
        let slot = &mut by_stem.entry(stem(p)).or_default().0;
        if slot.replace(p.clone()).is_some() {
            return Err(Error::Validation(format!(
                "two {left_name} files share the stem {:?}",
                stem(p)
            )));
        }
    }
    for p in right {
        let slot = &mut by_stem.entry(stem(p)).or_default().1;
        if slot.replace(p.clone()).is_some() {
            return Err(Error::Validation(format!(
                "two {right_name} files share the stem {:?}",
                stem(p)
            )));
        }
    }
    let mut pairs = Vec::new();
    let mut unmatched = Vec::new();
    for (s, entry) in by_stem {
        match entry {
            (Some(a), Some(b)) => pairs.push((a, b)),
            (Some(a), None) => unmatched.push(format!("{} (no {right_name} file)", a.display())),
            (None, Some(b)) => unmatched.push(format!("{} (no {left_name} file)", b.display())),
            (None, None) => unreachable!("stem {s} has no files"),
        }
    }
    if !unmatched.is_empty() {
        return Err(Error::Validation(format!("unmatched files: {}", unmatched.join(", "))));
    }
    Ok(pairs)
}

/// Image/label pairs from two directories.
pub fn labelled_pairs(images: &Path, labels: &Path) -> Result<Vec<(PathBuf, PathBuf)>> {
    pair_by_stem(&list_images(images)?, &list_images(labels)?, "image", "label")
}

/// What a label file holds.
#[derive(Clone, Debug, PartialEq)]
pub enum TargetKind {
    /// Colour label images mapped through a palette.
    Classes(Palette),
    /// Single-channel images of real-valued targets.
    Values,
}

/// Per-pixel targets of `label` for an image of the given size.
pub fn load_targets(label: &Path, kind: &TargetKind, width: usize, height: usize) -> Result<Targets> {
    let size_err = |w: usize, h: usize| {
        Error::Validation(format!(
            "{}: label is {w}x{h} but the image is {width}x{height}",
            label.display()
        ))
    };
    match kind {
        TargetKind::Classes(palette) => {
            let img = read_labels(label)?;
            if (img.width, img.height) != (width, height) {
                return Err(size_err(img.width, img.height));
            }
            Ok(Targets::Classes(
                create_targets(&img, palette, width, height).map_err(|e| with_path(e, label))?,
            ))
        }
        TargetKind::Values => {
            let img: Tensor = read_image(label)?;
            if (img.width(), img.height()) != (width, height) {
                return Err(size_err(img.width(), img.height()));
            }
            if img.channels() != 1 {
                return Err(Error::Validation(format!(
                    "{}: regression targets must have one channel, found {}",
                    label.display(),
                    img.channels()
                )));
            }
            Ok(Targets::Values(img.into_data()))
        }
    }
}
