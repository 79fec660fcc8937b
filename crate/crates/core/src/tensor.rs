//! Dense `channels × height × width` tensors and the handful of kernels the
//! feature extractor and core builder need.
//!
//! All kernels are pure: they borrow their inputs and return fresh tensors.
//! Arithmetic is done in `f64` throughout.

use ndarray::{linalg::general_mat_mul, ArrayView2, ArrayViewMut2, ShapeBuilder};

use crate::error::{Error, Result};

/// Rank-3 tensor stored row-major in `(channel, row, column)` order.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(channels: usize, height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        check_dims(channels, height, width)?;
        let expected = channels * height * width;
        if data.len() != expected {
            return Err(Error::shape("data length", expected, data.len()));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Argument(format!("non-finite tensor value at index {i}")));
        }
        Ok(Self {
            channels,
            height,
            width,
            data,
        })
    }

    pub fn filled(channels: usize, height: usize, width: usize, value: f64) -> Result<Self> {
        check_dims(channels, height, width)?;
        Self::new(channels, height, width, vec![value; channels * height * width])
    }

    pub fn zeros(channels: usize, height: usize, width: usize) -> Result<Self> {
        Self::filled(channels, height, width, 0.0)
    }

    pub fn from_fn(
        channels: usize,
        height: usize,
        width: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Result<Self> {
        check_dims(channels, height, width)?;
        let mut data = Vec::with_capacity(channels * height * width);
        for c in 0..channels {
            for y in 0..height {
                for x in 0..width {
                    data.push(f(c, y, x));
                }
            }
        }
        Self::new(channels, height, width, data)
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// `(channels, height, width)`
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.channels, self.height, self.width)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, c: usize, y: usize, x: usize) -> f64 {
        self.data[(c * self.height + y) * self.width + x]
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        let plane = self.height * self.width;
        &self.data[c * plane..(c + 1) * plane]
    }

    /// Per-channel arithmetic mean.
    pub fn channel_means(&self) -> Vec<f64> {
        (0..self.channels)
            .map(|c| {
                let ch = self.channel(c);
                ch.iter().sum::<f64>() / ch.len() as f64
            })
            .collect()
    }

    /// Apply `f` to every value; the result must stay finite.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Tensor> {
        Tensor::new(
            self.channels,
            self.height,
            self.width,
            self.data.iter().map(|&v| f(v)).collect(),
        )
    }
}

fn check_dims(channels: usize, height: usize, width: usize) -> Result<()> {
    if channels == 0 || height == 0 || width == 0 {
        return Err(Error::Argument(format!(
            "tensor dimensions must be positive, got {channels}x{height}x{width}"
        )));
    }
    Ok(())
}

/// Weights and geometry of one convolution layer.
///
/// Weights are laid out `(out, in, kernel_h, kernel_w)` and applied as a
/// cross-correlation (no kernel flip).
#[derive(Clone, Debug, PartialEq)]
pub struct ConvSpec {
    pub out_channels: usize,
    pub in_channels: usize,
    pub kernel_h: usize,
    pub kernel_w: usize,
    pub stride: usize,
    pub padding: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl ConvSpec {
    pub fn validate(&self) -> Result<()> {
        if self.out_channels == 0 || self.in_channels == 0 || self.kernel_h == 0 || self.kernel_w == 0 {
            return Err(Error::Config(format!(
                "convolution dimensions must be positive, got out={} in={} kernel={}x{}",
                self.out_channels, self.in_channels, self.kernel_h, self.kernel_w
            )));
        }
        if self.stride == 0 {
            return Err(Error::Config("convolution stride must be at least 1".into()));
        }
        let expected = self.out_channels * self.in_channels * self.kernel_h * self.kernel_w;
        if self.weights.len() != expected {
            return Err(Error::shape("conv weights", expected, self.weights.len()));
        }
        if self.bias.len() != self.out_channels {
            return Err(Error::shape("conv bias", self.out_channels, self.bias.len()));
        }
        Ok(())
    }

    /// Output spatial size for an input of `height × width`.
    ///
    /// The padded extent minus the kernel must be an exact multiple of the
    /// stride; truncation would hide architecture mismatches.
    pub fn output_dims(&self, height: usize, width: usize) -> Result<(usize, usize)> {
        let out_h = conv_extent("height", height, self.kernel_h, self.stride, self.padding)?;
        let out_w = conv_extent("width", width, self.kernel_w, self.stride, self.padding)?;
        Ok((out_h, out_w))
    }
}

fn conv_extent(axis: &str, size: usize, kernel: usize, stride: usize, padding: usize) -> Result<usize> {
    let padded = size + 2 * padding;
    if padded < kernel {
        return Err(Error::Config(format!(
            "{axis}: padded extent {padded} is smaller than kernel {kernel}"
        )));
    }
    let span = padded - kernel;
    if span % stride != 0 {
        return Err(Error::Config(format!(
            "{axis}: (extent {padded} - kernel {kernel}) is not divisible by stride {stride}"
        )));
    }
    Ok(span / stride + 1)
}

// Upper bound on the number of f64 values in one unrolled patch block.
const IM2COL_BLOCK: usize = 1 << 22;

/// 2-D cross-correlation with zero padding.
///
/// `out[o, y, x] = bias[o] + Σ weights[o, c, i, j] · padded[c, y·stride + i, x·stride + j]`
pub fn conv2d(input: &Tensor, spec: &ConvSpec) -> Result<Tensor> {
    spec.validate()?;
    if input.channels != spec.in_channels {
        return Err(Error::shape("channels", spec.in_channels, input.channels));
    }
    let (out_h, out_w) = spec.output_dims(input.height, input.width)?;
    let (kh, kw) = (spec.kernel_h, spec.kernel_w);
    let patch = spec.in_channels * kh * kw;
    let plane = out_h * out_w;

    let mut out = vec![0.0; spec.out_channels * plane];
    for o in 0..spec.out_channels {
        out[o * plane..(o + 1) * plane].fill(spec.bias[o]);
    }

    let weights =
        ArrayView2::from_shape((spec.out_channels, patch), &spec.weights).expect("weight length validated above");
    let rows_per_block = (IM2COL_BLOCK / (patch * out_w)).clamp(1, out_h);
    let mut cols = vec![0.0; patch * rows_per_block * out_w];

    let pad = spec.padding as isize;
    let (in_h, in_w) = (input.height as isize, input.width as isize);
    let mut y0 = 0;
    while y0 < out_h {
        let y1 = (y0 + rows_per_block).min(out_h);
        let n = (y1 - y0) * out_w;
        let cols = &mut cols[..patch * n];
        // Unroll receptive fields: one column per output pixel of this block.
        for c in 0..spec.in_channels {
            let src = input.channel(c);
            for i in 0..kh {
                for j in 0..kw {
                    let row = &mut cols[((c * kh + i) * kw + j) * n..][..n];
                    for (yy, oy) in (y0..y1).enumerate() {
                        let sy = (oy * spec.stride + i) as isize - pad;
                        let dst = &mut row[yy * out_w..(yy + 1) * out_w];
                        if sy < 0 || sy >= in_h {
                            dst.fill(0.0);
                            continue;
                        }
                        let src_row = &src[sy as usize * input.width..][..input.width];
                        for (ox, d) in dst.iter_mut().enumerate() {
                            let sx = (ox * spec.stride + j) as isize - pad;
                            *d = if sx < 0 || sx >= in_w {
                                0.0
                            } else {
                                src_row[sx as usize]
                            };
                        }
                    }
                }
            }
        }
        let cols_view = ArrayView2::from_shape((patch, n), &*cols).expect("block sized above");
        let mut out_view =
            ArrayViewMut2::from_shape((spec.out_channels, n).strides((plane, 1)), &mut out[y0 * out_w..])
                .expect("output block lies inside the output buffer");
        general_mat_mul(1.0, &weights, &cols_view, 1.0, &mut out_view);
        y0 = y1;
    }

    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::Validation("convolution produced non-finite values".into()));
    }
    Ok(Tensor {
        channels: spec.out_channels,
        height: out_h,
        width: out_w,
        data: out,
    })
}

/// Elementwise `max(0, x)`.
pub fn relu(input: &Tensor) -> Tensor {
    Tensor {
        channels: input.channels,
        height: input.height,
        width: input.width,
        data: input.data.iter().map(|&v| v.max(0.0)).collect(),
    }
}

/// Max pooling over square `window × window` blocks.
pub fn maxpool(input: &Tensor, window: usize, stride: usize) -> Result<Tensor> {
    let (out_h, out_w) = pool_output_dims(input.height, input.width, window, stride)?;
    let mut data = Vec::with_capacity(input.channels * out_h * out_w);
    for c in 0..input.channels {
        let src = input.channel(c);
        for oy in 0..out_h {
            for ox in 0..out_w {
                let mut best = f64::NEG_INFINITY;
                for i in 0..window {
                    let row = &src[(oy * stride + i) * input.width + ox * stride..][..window];
                    for &v in row {
                        best = best.max(v);
                    }
                }
                data.push(best);
            }
        }
    }
    Ok(Tensor {
        channels: input.channels,
        height: out_h,
        width: out_w,
        data,
    })
}

pub fn pool_output_dims(height: usize, width: usize, window: usize, stride: usize) -> Result<(usize, usize)> {
    if window == 0 || stride == 0 {
        return Err(Error::Config("pool window and stride must be at least 1".into()));
    }
    let extent = |axis: &str, size: usize| -> Result<usize> {
        if size < window {
            return Err(Error::Config(format!(
                "{axis} {size} is smaller than pool window {window}"
            )));
        }
        if (size - window) % stride != 0 {
            return Err(Error::Config(format!(
                "{axis}: ({size} - window {window}) is not divisible by stride {stride}"
            )));
        }
        Ok((size - window) / stride + 1)
    };
    Ok((extent("height", height)?, extent("width", width)?))
}

/// Interpolation taps along one axis: the two source indices and the weight
/// of the second one.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AxisTap {
    pub lo: usize,
    pub hi: usize,
    pub frac: f64,
}

/// Half-pixel-centre mapping from `dst` samples onto `src` samples, clamped at
/// the edges: `s = (d + 0.5) · src / dst − 0.5`.
pub fn axis_taps(src: usize, dst: usize) -> Vec<AxisTap> {
    let scale = src as f64 / dst as f64;
    let last = (src - 1) as f64;
    (0..dst)
        .map(|d| {
            let s = ((d as f64 + 0.5) * scale - 0.5).clamp(0.0, last);
            let lo = s.floor() as usize;
            let hi = (lo + 1).min(src - 1);
            AxisTap {
                lo,
                hi,
                frac: s - lo as f64,
            }
        })
        .collect()
}

/// Precomputed bilinear resampling from one plane size to another.
///
/// Used directly by [`bilinear_resize`] and by the core builder, which samples
/// single pixels without materialising the resized planes.
#[derive(Clone, Debug)]
pub struct ResizePlan {
    src_w: usize,
    xs: Vec<AxisTap>,
    ys: Vec<AxisTap>,
}

impl ResizePlan {
    pub fn new(src_w: usize, src_h: usize, dst_w: usize, dst_h: usize) -> Result<Self> {
        if src_w == 0 || src_h == 0 || dst_w == 0 || dst_h == 0 {
            return Err(Error::Argument(format!(
                "resize dimensions must be positive, got {src_w}x{src_h} -> {dst_w}x{dst_h}"
            )));
        }
        Ok(Self {
            src_w,
            xs: axis_taps(src_w, dst_w),
            ys: axis_taps(src_h, dst_h),
        })
    }

    /// Interpolated value at destination pixel `(x, y)` of `plane`.
    #[inline]
    pub fn sample(&self, plane: &[f64], x: usize, y: usize) -> f64 {
        let tx = self.xs[x];
        let ty = self.ys[y];
        let top = &plane[ty.lo * self.src_w..];
        let bottom = &plane[ty.hi * self.src_w..];
        let (a, b, c, d) = (top[tx.lo], top[tx.hi], bottom[tx.lo], bottom[tx.hi]);
        let upper = a + tx.frac * (b - a);
        let lower = c + tx.frac * (d - c);
        let v = upper + ty.frac * (lower - upper);
        // Rounding in the lerps may step one ulp outside the corner range.
        v.clamp(a.min(b).min(c.min(d)), a.max(b).max(c.max(d)))
    }
}

/// Bilinear resize of every channel to `target_w × target_h`.
pub fn bilinear_resize(map: &Tensor, target_w: usize, target_h: usize) -> Result<Tensor> {
    let plan = ResizePlan::new(map.width, map.height, target_w, target_h)?;
    let mut data = Vec::with_capacity(map.channels * target_w * target_h);
    for c in 0..map.channels {
        let plane = map.channel(c);
        for y in 0..target_h {
            for x in 0..target_w {
                data.push(plan.sample(plane, x, y));
            }
        }
    }
    Ok(Tensor {
        channels: map.channels,
        height: target_h,
        width: target_w,
        data,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn t(c: usize, h: usize, w: usize, v: &[f64]) -> Tensor {
        Tensor::new(c, h, w, v.to_vec()).unwrap()
    }

    fn spec(
        out: usize,
        inp: usize,
        k: usize,
        stride: usize,
        padding: usize,
        weights: Vec<f64>,
        bias: Vec<f64>,
    ) -> ConvSpec {
        ConvSpec {
            out_channels: out,
            in_channels: inp,
            kernel_h: k,
            kernel_w: k,
            stride,
            padding,
            weights,
            bias,
        }
    }

    // Direct summation over the padded input, independent of the unrolled path.
    fn brute_conv(input: &Tensor, s: &ConvSpec) -> Vec<f64> {
        let (oh, ow) = s.output_dims(input.height(), input.width()).unwrap();
        let mut out = Vec::new();
        for o in 0..s.out_channels {
            for y in 0..oh {
                for x in 0..ow {
                    let mut acc = s.bias[o];
                    for c in 0..s.in_channels {
                        for i in 0..s.kernel_h {
                            for j in 0..s.kernel_w {
                                let py = (y * s.stride + i) as isize - s.padding as isize;
                                let px = (x * s.stride + j) as isize - s.padding as isize;
                                if py >= 0 && px >= 0 && (py as usize) < input.height() && (px as usize) < input.width()
                                {
                                    let w = s.weights[((o * s.in_channels + c) * s.kernel_h + i) * s.kernel_w + j];
                                    acc += w * input.get(c, py as usize, px as usize);
                                }
                            }
                        }
                    }
                    out.push(acc);
                }
            }
        }
        out
    }

    #[test]
    fn conv_two_by_two_diagonal_kernel() {
        let input = t(1, 3, 3, &[1., 2., 3., 4., 5., 6., 7., 8., 9.]);
        let s = spec(1, 1, 2, 1, 0, vec![1., 0., 0., 1.], vec![0.]);
        let out = conv2d(&input, &s).unwrap();
        assert_eq!(out.dims(), (1, 2, 2));
        assert_eq!(out.data(), &[6., 8., 12., 14.]);
    }

    #[test]
    fn conv_identity_and_zero_kernels() {
        let input = Tensor::from_fn(1, 5, 4, |_, y, x| (y * 7 + x) as f64 - 3.5).unwrap();
        let id = conv2d(&input, &spec(1, 1, 1, 1, 0, vec![1.], vec![0.])).unwrap();
        assert_eq!(id, input);
        let zero = conv2d(&input, &spec(2, 1, 3, 1, 1, vec![0.; 18], vec![0.25, -2.])).unwrap();
        assert!(zero.channel(0).iter().all(|&v| v == 0.25));
        assert!(zero.channel(1).iter().all(|&v| v == -2.));
    }

    #[test]
    fn conv_rejects_bad_shapes() {
        let input = Tensor::zeros(2, 4, 4).unwrap();
        let err = conv2d(&input, &spec(1, 3, 1, 1, 0, vec![0.; 3], vec![0.])).unwrap_err();
        assert!(matches!(err, Error::Shape { axis: "channels", .. }));
        // (4 - 3) is not a multiple of 2
        let err = conv2d(&input, &spec(1, 2, 3, 2, 0, vec![0.; 18], vec![0.])).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
        let err = conv2d(&input, &spec(1, 2, 3, 1, 0, vec![0.; 5], vec![0.])).unwrap_err();
        assert!(matches!(
            err,
            Error::Shape {
                axis: "conv weights",
                ..
            }
        ));
    }

    #[test]
    fn relu_basics() {
        let x = t(1, 1, 3, &[-1., 0., 2.]);
        assert_eq!(relu(&x).data(), &[0., 0., 2.]);
        let pos = t(1, 1, 2, &[0.5, 3.]);
        assert_eq!(relu(&pos), pos);
        let neg = t(1, 2, 1, &[-0.5, -3.]);
        assert_eq!(relu(&neg).data(), &[0., 0.]);
    }

    #[test]
    fn maxpool_window_maxima() {
        let x = t(
            1,
            4,
            4,
            &[1., 2., 5., 6., 3., 4., 7., 8., 9., 10., 13., 14., 11., 12., 15., 16.],
        );
        let out = maxpool(&x, 2, 2).unwrap();
        assert_eq!(out.dims(), (1, 2, 2));
        assert_eq!(out.data(), &[4., 8., 12., 16.]);

        let c = Tensor::filled(2, 6, 6, 1.5).unwrap();
        let out = maxpool(&c, 2, 2).unwrap();
        assert_eq!(out, Tensor::filled(2, 3, 3, 1.5).unwrap());

        let g = maxpool(&x, 4, 1).unwrap();
        assert_eq!(g.data(), &[16.]);

        assert!(matches!(maxpool(&x, 3, 2), Err(Error::Config(_))));
        assert!(matches!(maxpool(&x, 5, 1), Err(Error::Config(_))));
    }

    // Reference bilinear resize written straight from the coordinate formula.
    fn reference_resize(src: &[f64], sw: usize, sh: usize, dw: usize, dh: usize) -> Vec<f64> {
        let coord = |d: usize, s: usize, dd: usize| -> f64 {
            let v = (d as f64 + 0.5) * (s as f64 / dd as f64) - 0.5;
            v.max(0.0).min(s as f64 - 1.0)
        };
        let mut out = Vec::new();
        for y in 0..dh {
            for x in 0..dw {
                let sy = coord(y, sh, dh);
                let sx = coord(x, sw, dw);
                let (y0, x0) = (sy.floor() as usize, sx.floor() as usize);
                let (y1, x1) = ((y0 + 1).min(sh - 1), (x0 + 1).min(sw - 1));
                let (fy, fx) = (sy - y0 as f64, sx - x0 as f64);
                let p = |yy: usize, xx: usize| src[yy * sw + xx];
                out.push(
                    p(y0, x0) * (1. - fy) * (1. - fx)
                        + p(y0, x1) * (1. - fy) * fx
                        + p(y1, x0) * fy * (1. - fx)
                        + p(y1, x1) * fy * fx,
                );
            }
        }
        out
    }

    #[test]
    fn bilinear_two_by_two_to_four() {
        let src = t(1, 2, 2, &[0., 1., 2., 3.]);
        let out = bilinear_resize(&src, 4, 4).unwrap();
        let expected = reference_resize(src.data(), 2, 2, 4, 4);
        for (a, b) in out.data().iter().zip(&expected) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
        assert_eq!(out.get(0, 0, 0), 0.);
        assert_eq!(out.get(0, 0, 3), 1.);
        assert_eq!(out.get(0, 3, 0), 2.);
        assert_eq!(out.get(0, 3, 3), 3.);
        // second column of the first row sits a quarter of the way to the right neighbour
        assert!((out.get(0, 0, 1) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn bilinear_constant_and_identity() {
        let c = Tensor::filled(1, 3, 5, 2.5).unwrap();
        let out = bilinear_resize(&c, 11, 7).unwrap();
        assert!(out.data().iter().all(|&v| v == 2.5));
        let x = Tensor::from_fn(1, 3, 5, |_, y, x| (y * x) as f64 * 0.3 - 1.).unwrap();
        assert_eq!(bilinear_resize(&x, 5, 3).unwrap(), x);
    }

    fn arb_tensor(max_c: usize, max_hw: usize) -> impl Strategy<Value = Tensor> {
        (1..=max_c, 1..=max_hw, 1..=max_hw).prop_flat_map(|(c, h, w)| {
            proptest::collection::vec(-10.0f64..10.0, c * h * w).prop_map(move |d| Tensor::new(c, h, w, d).unwrap())
        })
    }

    proptest! {
        #[test]
        fn conv_matches_brute_force(
            input in arb_tensor(4, 8),
            out_c in 1usize..4,
            k in 1usize..4,
            stride in 1usize..3,
            pad in 0usize..2,
            seed in any::<u64>(),
        ) {
            let s0 = spec(out_c, input.channels(), k, stride, pad, vec![], vec![]);
            let dims = s0.output_dims(input.height(), input.width());
            // only shapes with an exact output size are valid
            prop_assume!(dims.is_ok());
            let (oh, ow) = dims.unwrap();
            prop_assert_eq!(oh, (input.height() + 2 * pad - k) / stride + 1);
            prop_assert_eq!(ow, (input.width() + 2 * pad - k) / stride + 1);
            let mut state = seed;
            let mut next = || {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                ((state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
            };
            let n = out_c * input.channels() * k * k;
            let s = spec(out_c, input.channels(), k, stride, pad,
                (0..n).map(|_| next()).collect(), (0..out_c).map(|_| next()).collect());
            let fast = conv2d(&input, &s).unwrap();
            prop_assert_eq!(fast.dims(), (out_c, oh, ow));
            for (a, b) in fast.data().iter().zip(brute_conv(&input, &s)) {
                prop_assert!((a - b).abs() <= 1e-10);
            }
        }

        #[test]
        fn maxpool_stays_within_channel_range(input in arb_tensor(3, 8), window in 1usize..4, stride in 1usize..3) {
            prop_assume!(pool_output_dims(input.height(), input.width(), window, stride).is_ok());
            let out = maxpool(&input, window, stride).unwrap();
            for c in 0..input.channels() {
                let ch = input.channel(c);
                let lo = ch.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = ch.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                prop_assert!(out.channel(c).iter().all(|&v| v >= lo && v <= hi));
            }
        }

        #[test]
        fn bilinear_output_within_source_range(input in arb_tensor(1, 6), tw in 1usize..12, th in 1usize..12) {
            let out = bilinear_resize(&input, tw, th).unwrap();
            let lo = input.data().iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = input.data().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(out.data().iter().all(|&v| v >= lo && v <= hi));
            let same = bilinear_resize(&input, input.width(), input.height()).unwrap();
            prop_assert_eq!(same, input);
        }

        #[test]
        fn relu_is_idempotent(input in arb_tensor(2, 6)) {
            let once = relu(&input);
            prop_assert_eq!(relu(&once), once);
        }
    }
}
