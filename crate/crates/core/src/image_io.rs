//! Reading and writing the image formats the pipeline consumes.
//!
//! * PNG, 8-bit grayscale or RGB (alpha is dropped, palettes are expanded,
//!   16-bit samples are reduced to 8 bits). Values are kept on the 0–255 scale.
//! * Raw single-channel float images (SAR data), `.raw`:
//!   `u32 width | u32 height | f32 values[width*height]`, little-endian, row-major.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;

use crate::binio::{ByteReader, ByteWriter, Truncation};
use crate::error::{with_path, Error, Result};
use crate::tensor::Tensor;

/// Largest accepted image side, guarding decoders against forged headers.
pub const MAX_IMAGE_SIDE: usize = 1 << 15;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ImageKind {
    Png,
    Raw,
}

impl ImageKind {
    pub fn from_path(path: &Path) -> Option<Self> {
        let ext = path.extension()?.to_str()?.to_ascii_lowercase();
        match ext.as_str() {
            "png" => Some(ImageKind::Png),
            "raw" => Some(ImageKind::Raw),
            _ => None,
        }
    }
}

/// Label image as RGB triples; grayscale values `g` become `(g, g, g)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<[u8; 3]>,
}

struct DecodedPng {
    width: usize,
    height: usize,
    channels: usize,
    samples: Vec<u8>,
}

fn decode_png(bytes: &[u8]) -> Result<DecodedPng> {
    let bad = |e: png::DecodingError| Error::format("PNG image", e.to_string());
    let mut decoder = png::Decoder::new(std::io::Cursor::new(bytes));
    decoder.set_transformations(png::Transformations::EXPAND | png::Transformations::STRIP_16);
    let header = decoder.read_header_info().map_err(bad)?;
    let (width, height) = (header.width as usize, header.height as usize);
    if width == 0 || height == 0 || width > MAX_IMAGE_SIDE || height > MAX_IMAGE_SIDE {
        return Err(Error::format("PNG image", format!("unsupported size {width}x{height}")));
    }
    let mut reader = decoder.read_info().map_err(bad)?;
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| Error::format("PNG image", "image too large"))?;
    let mut buf = vec![0u8; size];
    let info = reader.next_frame(&mut buf).map_err(bad)?;
    buf.truncate(info.buffer_size());
    let stored = info.color_type.samples();
    // Drop alpha; keep gray or RGB.
    let channels = match info.color_type {
        png::ColorType::Grayscale | png::ColorType::GrayscaleAlpha => 1,
        _ => 3,
    };
    let samples = if stored == channels {
        buf
    } else {
        buf.chunks_exact(stored)
            .flat_map(|px| px[..channels].to_vec())
            .collect()
    };
    if samples.len() != width * height * channels {
        return Err(Error::format("PNG image", "unexpected sample layout"));
    }
    Ok(DecodedPng {
        width,
        height,
        channels,
        samples,
    })
}

/// Decode a PNG into a `channels × height × width` tensor on the 0–255 scale.
pub fn decode_png_image(bytes: &[u8]) -> Result<Tensor> {
    let png = decode_png(bytes)?;
    let plane = png.width * png.height;
    let mut data = vec![0.0; png.channels * plane];
    for (i, px) in png.samples.chunks_exact(png.channels).enumerate() {
        for (c, &v) in px.iter().enumerate() {
            data[c * plane + i] = v as f64;
        }
    }
    Tensor::new(png.channels, png.height, png.width, data)
}

pub fn decode_png_labels(bytes: &[u8]) -> Result<LabelImage> {
    let png = decode_png(bytes)?;
    let pixels = png
        .samples
        .chunks_exact(png.channels)
        .map(|px| {
            if png.channels == 1 {
                [px[0]; 3]
            } else {
                [px[0], px[1], px[2]]
            }
        })
        .collect();
    Ok(LabelImage {
        width: png.width,
        height: png.height,
        pixels,
    })
}

pub fn decode_raw_image(bytes: &[u8]) -> Result<Tensor> {
    let mut r = ByteReader::new(bytes, "raw image", Truncation::Format);
    let width = r.len()?;
    let height = r.len()?;
    if width == 0 || height == 0 || width > MAX_IMAGE_SIDE || height > MAX_IMAGE_SIDE {
        return Err(r.err(format!("unsupported size {width}x{height}")));
    }
    let data = r.f32_vec(width * height)?;
    r.finish()?;
    Tensor::new(1, height, width, data)
}

pub fn encode_raw_image(image: &Tensor) -> Result<Vec<u8>> {
    if image.channels() != 1 {
        return Err(Error::shape("raw image channels", 1, image.channels()));
    }
    let mut w = ByteWriter::default();
    w.len(image.width());
    w.len(image.height());
    for &v in image.data() {
        w.f32(v as f32);
    }
    Ok(w.buf)
}

fn kind_of(path: &Path) -> Result<ImageKind> {
    ImageKind::from_path(path)
        .ok_or_else(|| Error::Argument(format!("{}: unsupported image extension", path.display())))
}

pub fn read_image(path: &Path) -> Result<Tensor> {
    let kind = kind_of(path)?;
    let bytes = fs::read(path).map_err(|e| with_path(e.into(), path))?;
    match kind {
        ImageKind::Png => decode_png_image(&bytes),
        ImageKind::Raw => decode_raw_image(&bytes),
    }
    .map_err(|e| with_path(e, path))
}

pub fn read_labels(path: &Path) -> Result<LabelImage> {
    if kind_of(path)? != ImageKind::Png {
        return Err(Error::Argument(format!("{}: label images must be PNG", path.display())));
    }
    let bytes = fs::read(path).map_err(|e| with_path(e.into(), path))?;
    decode_png_labels(&bytes).map_err(|e| with_path(e, path))
}

pub fn write_raw_image(path: &Path, image: &Tensor) -> Result<()> {
    fs::write(path, encode_raw_image(image)?)?;
    Ok(())
}

fn png_encoder<'a>(
    out: BufWriter<File>,
    width: usize,
    height: usize,
    color: png::ColorType,
) -> Result<png::Encoder<'a, BufWriter<File>>> {
    let (w, h) = (
        u32::try_from(width).map_err(|_| Error::Argument("image too wide".into()))?,
        u32::try_from(height).map_err(|_| Error::Argument("image too tall".into()))?,
    );
    let mut enc = png::Encoder::new(out, w, h);
    enc.set_color(color);
    enc.set_depth(png::BitDepth::Eight);
    Ok(enc)
}

fn encode_err(e: png::EncodingError) -> Error {
    match e {
        png::EncodingError::IoError(io) => Error::Io(io),
        other => Error::format("PNG image", other.to_string()),
    }
}

/// Write an 8-bit indexed PNG whose colour table is `colors`.
pub fn write_indexed_png(path: &Path, width: usize, height: usize, indices: &[u8], colors: &[[u8; 3]]) -> Result<()> {
    if indices.len() != width * height {
        return Err(Error::shape("label pixels", width * height, indices.len()));
    }
    if colors.is_empty() || colors.len() > 256 {
        return Err(Error::Argument(format!(
            "palette must have 1..=256 colours, got {}",
            colors.len()
        )));
    }
    if let Some(&i) = indices.iter().find(|&&i| i as usize >= colors.len()) {
        return Err(Error::Argument(format!(
            "label index {i} outside the {}-colour palette",
            colors.len()
        )));
    }
    let file = BufWriter::new(File::create(path)?);
    let mut enc = png_encoder(file, width, height, png::ColorType::Indexed)?;
    enc.set_palette(colors.iter().flatten().copied().collect::<Vec<u8>>());
    let mut writer = enc.write_header().map_err(encode_err)?;
    writer.write_image_data(indices).map_err(encode_err)?;
    writer.finish().map_err(encode_err)?;
    Ok(())
}

/// Write an 8-bit grayscale or RGB PNG from a tensor, rounding and clamping to 0–255.
pub fn write_png(path: &Path, image: &Tensor) -> Result<()> {
    let color = match image.channels() {
        1 => png::ColorType::Grayscale,
        3 => png::ColorType::Rgb,
        c => return Err(Error::Argument(format!("cannot write a {c}-channel PNG"))),
    };
    let plane = image.width() * image.height();
    let mut bytes = Vec::with_capacity(plane * image.channels());
    for i in 0..plane {
        for c in 0..image.channels() {
            bytes.push(image.channel(c)[i].round().clamp(0.0, 255.0) as u8);
        }
    }
    let file = BufWriter::new(File::create(path)?);
    let enc = png_encoder(file, image.width(), image.height(), color)?;
    let mut writer = enc.write_header().map_err(encode_err)?;
    writer.write_image_data(&bytes).map_err(encode_err)?;
    writer.finish().map_err(encode_err)?;
    Ok(())
}

/// Write an RGB label image.
pub fn write_label_png(path: &Path, labels: &LabelImage) -> Result<()> {
    let flat: Vec<u8> = labels.pixels.iter().flatten().copied().collect();
    let file = BufWriter::new(File::create(path)?);
    let enc = png_encoder(file, labels.width, labels.height, png::ColorType::Rgb)?;
    let mut writer = enc.write_header().map_err(encode_err)?;
    writer.write_image_data(&flat).map_err(encode_err)?;
    writer.finish().map_err(encode_err)?;
    Ok(())
}
