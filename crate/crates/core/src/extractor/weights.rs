//! CSFW weight files.
//!
//! ```text
//! magic "CSFW" | u32 version (1) | u32 input_channels | f32 channel_means[input_channels]
//! u32 layer_count, then per layer:
//!   u8 kind (0 conv, 1 relu, 2 maxpool) | u16 name_len | name (UTF-8)
//!   conv:    u32 out, in, kh, kw, stride, pad | f32 weights[out*in*kh*kw] | f32 bias[out]
//!   maxpool: u32 window, stride
//! ```
//!
//! Everything is little-endian. Values are widened to `f64` on load.

use std::fs;
use std::path::Path;

use super::{LayerDef, LayerOp, NetworkModel};
use crate::binio::{ByteReader, ByteWriter, Truncation};
use crate::error::{with_path, Result};
use crate::tensor::ConvSpec;

pub const WEIGHTS_MAGIC: &[u8; 4] = b"CSFW";
pub const WEIGHTS_VERSION: u32 = 1;

const KIND_CONV: u8 = 0;
const KIND_RELU: u8 = 1;
const KIND_MAXPOOL: u8 = 2;

pub fn load_weights(path: impl AsRef<Path>) -> Result<NetworkModel> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| with_path(e.into(), path))?;
    decode_weights(&bytes).map_err(|e| with_path(e, path))
}

pub fn save_weights(model: &NetworkModel, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_weights(model))?;
    Ok(())
}

/// Parse a CSFW image. Truncation is reported as an I/O error; a bad header
/// as a format error; an inconsistent layer chain as a validation error.
pub fn decode_weights(bytes: &[u8]) -> Result<NetworkModel> {
    let mut r = ByteReader::new(bytes, "weight file", Truncation::Io);
    r.magic(WEIGHTS_MAGIC)?;
    let version = r.u32()?;
    if version != WEIGHTS_VERSION {
        return Err(r.err(format!("unsupported version {version}")));
    }
    let input_channels = r.len()?;
    if input_channels == 0 {
        return Err(r.err("zero input channels"));
    }
    let means = r.f32_vec(input_channels)?;
    let layer_count = r.len()?;
    // Every layer needs at least three bytes; bound the allocation by the input.
    let mut layers = Vec::with_capacity(layer_count.min(r.remaining() / 3));
    for _ in 0..layer_count {
        let kind = r.u8()?;
        let name = r.short_str()?;
        let op = match kind {
            KIND_CONV => {
                let (out, inp, kh, kw) = (r.len()?, r.len()?, r.len()?, r.len()?);
                let (stride, pad) = (r.len()?, r.len()?);
                let count = out
                    .checked_mul(inp)
                    .and_then(|v| v.checked_mul(kh))
                    .and_then(|v| v.checked_mul(kw))
                    .ok_or_else(|| r.err(format!("layer {name:?}: weight count overflows")))?;
                let weights = r.f32_vec(count)?;
                let bias = r.f32_vec(out)?;
                LayerOp::Conv(ConvSpec {
                    out_channels: out,
                    in_channels: inp,
                    kernel_h: kh,
                    kernel_w: kw,
                    stride,
                    padding: pad,
                    weights,
                    bias,
                })
            }
            KIND_RELU => LayerOp::Relu,
            KIND_MAXPOOL => {
                let window = r.len()?;
                let stride = r.len()?;
                LayerOp::MaxPool { window, stride }
            }
            other => return Err(r.err(format!("layer {name:?}: unknown kind {other}"))),
        };
        layers.push(LayerDef { name, op });
    }
    r.finish()?;
    NetworkModel::new(means, layers)
}

/// Serialise a model; weights are narrowed to `f32`.
pub fn encode_weights(model: &NetworkModel) -> Vec<u8> {
    let mut w = ByteWriter::default();
    w.bytes(WEIGHTS_MAGIC);
    w.u32(WEIGHTS_VERSION);
    w.len(model.input_channels());
    for &m in model.channel_means() {
        w.f32(m as f32);
    }
    w.len(model.layers().len());
    for layer in model.layers() {
        let kind = match layer.op {
            LayerOp::Conv(_) => KIND_CONV,
            LayerOp::Relu => KIND_RELU,
            LayerOp::MaxPool { .. } => KIND_MAXPOOL,
        };
        w.u8(kind);
        w.short_str(&layer.name);
        match &layer.op {
            LayerOp::Conv(s) => {
                for v in [
                    s.out_channels,
                    s.in_channels,
                    s.kernel_h,
                    s.kernel_w,
                    s.stride,
                    s.padding,
                ] {
                    w.len(v);
                }
                for &v in s.weights.iter().chain(&s.bias) {
                    w.f32(v as f32);
                }
            }
            LayerOp::Relu => {}
            LayerOp::MaxPool { window, stride } => {
                w.len(*window);
                w.len(*stride);
            }
        }
    }
    w.buf
}
