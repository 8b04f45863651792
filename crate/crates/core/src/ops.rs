//! The four network primitives — strided convolution, transposed convolution,
//! ReLU, and per-pair softmax — with hand-written backward passes.
//!
//! Every kernel accumulates in a fixed storage order (innermost loops run
//! channel, then kernel row, then kernel column), so outputs and gradients are
//! bit-identical across runs. No broadcasting: shape mismatches are errors.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{ConvParams, Tensor};

/// Gradients of a (de)convolution with respect to its input and parameters.
#[derive(Clone, Debug)]
pub struct ConvGrads<T> {
    pub input: Tensor<T>,
    pub weights: Tensor<T>,
    /// Shaped `(1, out_channels, 1, 1)` like the bias parameter itself.
    pub bias: Tensor<T>,
}

/// Output extent of a padded strided convolution: `(i + 2p - k) / s + 1`.
pub fn conv_out_dim(input: usize, kernel: usize, stride: usize, padding: usize) -> Option<usize> {
    let padded = input + 2 * padding;
    if padded < kernel || stride == 0 {
        return None;
    }
    Some((padded - kernel) / stride + 1)
}

/// Output extent of a transposed convolution: `(i - 1) * s - 2p + k`.
pub fn deconv_out_dim(input: usize, kernel: usize, stride: usize, padding: usize) -> Option<usize> {
    if input == 0 || stride == 0 {
        return None;
    }
    ((input - 1) * stride + kernel).checked_sub(2 * padding).filter(|&d| d > 0)
}

fn check_conv_shapes<T: Scalar>(
    op: &'static str,
    input: &Tensor<T>,
    weights: &Tensor<T>,
    bias: &[T],
) -> Result<()> {
    let [_, ic, _, _] = input.shape();
    let [oc, wic, _, _] = weights.shape();
    if ic != wic {
        return Err(Error::shape(
            op,
            format!("input channels {wic} (weight shape {:?})", weights.shape()),
            format!("input channels {ic} (input shape {:?})", input.shape()),
        ));
    }
    if bias.len() != oc {
        return Err(Error::shape(
            op,
            format!("bias of {oc} values"),
            format!("{}", bias.len()),
        ));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// conv2d
// ---------------------------------------------------------------------------

pub(crate) fn conv2d_raw<T: Scalar>(
    input: &Tensor<T>,
    weights: &Tensor<T>,
    bias: &[T],
    stride: usize,
    padding: usize,
) -> Result<Tensor<T>> {
    check_conv_shapes("conv2d", input, weights, bias)?;
    let [b, ic, ih, iw] = input.shape();
    let [oc, _, kh, kw] = weights.shape();
    let oh = conv_out_dim(ih, kh, stride, padding).ok_or_else(|| {
        Error::shape(
            "conv2d",
            format!("padded input at least {kh}x{kw}"),
            format!("{ih}x{iw} with padding {padding}"),
        )
    })?;
    let ow = conv_out_dim(iw, kw, stride, padding).ok_or_else(|| {
        Error::shape(
            "conv2d",
            format!("padded input at least {kh}x{kw}"),
            format!("{ih}x{iw} with padding {padding}"),
        )
    })?;

    let x = input.data();
    let w = weights.data();
    let mut out = Tensor::zeros([b, oc, oh, ow]);
    let o = out.data_mut();

    let p = padding as isize;
    for bi in 0..b {
        for co in 0..oc {
            let bias_v = bias[co];
            for oy in 0..oh {
                let y0 = (oy * stride) as isize - p;
                let ky_lo = (-y0).max(0) as usize;
                let ky_hi = ((ih as isize - y0).min(kh as isize)).max(0) as usize;
                for ox in 0..ow {
                    let x0 = (ox * stride) as isize - p;
                    let kx_lo = (-x0).max(0) as usize;
                    let kx_hi = ((iw as isize - x0).min(kw as isize)).max(0) as usize;
                    let mut acc = bias_v;
                    if kx_lo < kx_hi {
                        for ci in 0..ic {
                            for ky in ky_lo..ky_hi {
                                let iy = (y0 + ky as isize) as usize;
                                let xrow = ((bi * ic + ci) * ih + iy) * iw + (x0 + kx_lo as isize) as usize;
                                let wrow = ((co * ic + ci) * kh + ky) * kw + kx_lo;
                                let n = kx_hi - kx_lo;
                                let xs = &x[xrow..xrow + n];
                                let ws = &w[wrow..wrow + n];
                                for i in 0..n {
                                    acc += xs[i] * ws[i];
                                }
                            }
                        }
                    }
                    o[((bi * oc + co) * oh + oy) * ow + ox] = acc;
                }
            }
        }
    }
    Ok(out)
}

/// Strided 2-D convolution with zero padding.
pub fn conv2d<T: Scalar>(input: &Tensor<T>, params: &ConvParams<T>) -> Result<Tensor<T>> {
    conv2d_raw(
        input,
        &params.weights,
        params.bias.data(),
        params.stride,
        params.padding,
    )
}

pub(crate) fn conv2d_grads_raw<T: Scalar>(
    input: &Tensor<T>,
    weights: &Tensor<T>,
    stride: usize,
    padding: usize,
    grad_out: &Tensor<T>,
) -> Result<(Tensor<T>, Tensor<T>, Tensor<T>)> {
    let [b, ic, ih, iw] = input.shape();
    let [oc, _, kh, kw] = weights.shape();
    let oh = conv_out_dim(ih, kh, stride, padding)
        .ok_or_else(|| Error::shape("conv2d_backward", "valid forward geometry", "degenerate"))?;
    let ow = conv_out_dim(iw, kw, stride, padding)
        .ok_or_else(|| Error::shape("conv2d_backward", "valid forward geometry", "degenerate"))?;
    if grad_out.shape() != [b, oc, oh, ow] {
        return Err(Error::shape(
            "conv2d_backward",
            format!("grad_out [{b}, {oc}, {oh}, {ow}]"),
            format!("{:?}", grad_out.shape()),
        ));
    }
    if weights.shape()[1] != ic {
        return Err(Error::shape(
            "conv2d_backward",
            format!("weights with {ic} input channels"),
            format!("{:?}", weights.shape()),
        ));
    }

    let x = input.data();
    let w = weights.data();
    let g = grad_out.data();
    let p = padding as isize;
    let s = stride;

    // d/d bias: plain sum of the output gradient per output channel.
    let mut gbias = Tensor::zeros([1, oc, 1, 1]);
    {
        let gb = gbias.data_mut();
        for co in 0..oc {
            let mut acc = T::zero();
            for bi in 0..b {
                let base = (bi * oc + co) * oh * ow;
                for i in 0..oh * ow {
                    acc += g[base + i];
                }
            }
            gb[co] = acc;
        }
    }

    // d/d weights: for each weight coordinate, gather over every output
    // position whose receptive field includes it.
    let mut gweights = Tensor::zeros([oc, ic, kh, kw]);
    {
        let gw = gweights.data_mut();
        for co in 0..oc {
            for ci in 0..ic {
                for ky in 0..kh {
                    // oy range with iy = oy*s + ky - p inside [0, ih)
                    let oy_lo = if (ky as isize) < p {
                        ((p - ky as isize) as usize).div_ceil(s)
                    } else {
                        0
                    };
                    let oy_hi_excl = {
                        let top = ih as isize - 1 + p - ky as isize;
                        if top < 0 {
                            0
                        } else {
                            ((top as usize) / s + 1).min(oh)
                        }
                    };
                    for kx in 0..kw {
                        let ox_lo = if (kx as isize) < p {
                            ((p - kx as isize) as usize).div_ceil(s)
                        } else {
                            0
                        };
                        let ox_hi_excl = {
                            let right = iw as isize - 1 + p - kx as isize;
                            if right < 0 {
                                0
                            } else {
                                ((right as usize) / s + 1).min(ow)
                            }
                        };
                        let mut acc = T::zero();
                        for bi in 0..b {
                            for oy in oy_lo..oy_hi_excl {
                                let iy = (oy * s) as isize + ky as isize - p;
                                let grow = ((bi * oc + co) * oh + oy) * ow;
                                let xrow = ((bi * ic + ci) * ih + iy as usize) * iw;
                                for ox in ox_lo..ox_hi_excl {
                                    let ix = (ox * s) as isize + kx as isize - p;
                                    acc += g[grow + ox] * x[xrow + ix as usize];
                                }
                            }
                        }
                        gw[((co * ic + ci) * kh + ky) * kw + kx] = acc;
                    }
                }
            }
        }
    }

    // d/d input: gather over every output position fed by this input pixel.
    let mut ginput = Tensor::zeros([b, ic, ih, iw]);
    {
        let gi = ginput.data_mut();
        for bi in 0..b {
            for ci in 0..ic {
                for iy in 0..ih {
                    for ix in 0..iw {
                        let mut acc = T::zero();
                        for ky in 0..kh {
                            let t = iy as isize + p - ky as isize;
                            if t < 0 || (t as usize) % s != 0 {
                                continue;
                            }
                            let oy = (t as usize) / s;
                            if oy >= oh {
                                continue;
                            }
                            for kx in 0..kw {
                                let u = ix as isize + p - kx as isize;
                                if u < 0 || (u as usize) % s != 0 {
                                    continue;
                                }
                                let ox = (u as usize) / s;
                                if ox >= ow {
                                    continue;
                                }
                                for co in 0..oc {
                                    acc += g[((bi * oc + co) * oh + oy) * ow + ox]
                                        * w[((co * ic + ci) * kh + ky) * kw + kx];
                                }
                            }
                        }
                        gi[((bi * ic + ci) * ih + iy) * iw + ix] = acc;
                    }
                }
            }
        }
    }

    Ok((ginput, gweights, gbias))
}

/// Backward pass of [`conv2d`] given the upstream gradient of its output.
pub fn conv2d_backward<T: Scalar>(
    input: &Tensor<T>,
    params: &ConvParams<T>,
    grad_out: &Tensor<T>,
) -> Result<ConvGrads<T>> {
    let (input, weights, bias) =
        conv2d_grads_raw(input, &params.weights, params.stride, params.padding, grad_out)?;
    Ok(ConvGrads {
        input,
        weights,
        bias,
    })
}

// ---------------------------------------------------------------------------
// deconv2d (transposed convolution)
// ---------------------------------------------------------------------------

pub(crate) fn deconv2d_raw<T: Scalar>(
    input: &Tensor<T>,
    weights: &Tensor<T>,
    bias: &[T],
    stride: usize,
    padding: usize,
) -> Result<Tensor<T>> {
    check_conv_shapes("deconv2d", input, weights, bias)?;
    let [b, ic, ih, iw] = input.shape();
    let [oc, _, kh, kw] = weights.shape();
    let oh = deconv_out_dim(ih, kh, stride, padding).ok_or_else(|| {
        Error::shape(
            "deconv2d",
            "positive output extent",
            format!("input {ih}x{iw}, kernel {kh}x{kw}, stride {stride}, padding {padding}"),
        )
    })?;
    let ow = deconv_out_dim(iw, kw, stride, padding).ok_or_else(|| {
        Error::shape(
            "deconv2d",
            "positive output extent",
            format!("input {ih}x{iw}, kernel {kh}x{kw}, stride {stride}, padding {padding}"),
        )
    })?;

    let x = input.data();
    let w = weights.data();
    let mut out = Tensor::zeros([b, oc, oh, ow]);
    let o = out.data_mut();
    let p = padding as isize;
    let s = stride;

    for bi in 0..b {
        for co in 0..oc {
            let bias_v = bias[co];
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut acc = bias_v;
                    for ci in 0..ic {
                        for ky in 0..kh {
                            let t = oy as isize + p - ky as isize;
                            if t < 0 || (t as usize) % s != 0 {
                                continue;
                            }
                            let iy = (t as usize) / s;
                            if iy >= ih {
                                continue;
                            }
                            for kx in 0..kw {
                                let u = ox as isize + p - kx as isize;
                                if u < 0 || (u as usize) % s != 0 {
                                    continue;
                                }
                                let ix = (u as usize) / s;
                                if ix >= iw {
                                    continue;
                                }
                                acc += x[((bi * ic + ci) * ih + iy) * iw + ix]
                                    * w[((co * ic + ci) * kh + ky) * kw + kx];
                            }
                        }
                    }
                    o[((bi * oc + co) * oh + oy) * ow + ox] = acc;
                }
            }
        }
    }
    Ok(out)
}

/// Transposed convolution (fractionally-strided upsampling).
pub fn deconv2d<T: Scalar>(input: &Tensor<T>, params: &ConvParams<T>) -> Result<Tensor<T>> {
    deconv2d_raw(
        input,
        &params.weights,
        params.bias.data(),
        params.stride,
        params.padding,
    )
}

pub(crate) fn deconv2d_grads_raw<T: Scalar>(
    input: &Tensor<T>,
    weights: &Tensor<T>,
    stride: usize,
    padding: usize,
    grad_out: &Tensor<T>,
) -> Result<(Tensor<T>, Tensor<T>, Tensor<T>)> {
    let [b, ic, ih, iw] = input.shape();
    let [oc, _, kh, kw] = weights.shape();
    let oh = deconv_out_dim(ih, kh, stride, padding)
        .ok_or_else(|| Error::shape("deconv2d_backward", "valid forward geometry", "degenerate"))?;
    let ow = deconv_out_dim(iw, kw, stride, padding)
        .ok_or_else(|| Error::shape("deconv2d_backward", "valid forward geometry", "degenerate"))?;
    if grad_out.shape() != [b, oc, oh, ow] {
        return Err(Error::shape(
            "deconv2d_backward",
            format!("grad_out [{b}, {oc}, {oh}, {ow}]"),
            format!("{:?}", grad_out.shape()),
        ));
    }
    if weights.shape()[1] != ic {
        return Err(Error::shape(
            "deconv2d_backward",
            format!("weights with {ic} input channels"),
            format!("{:?}", weights.shape()),
        ));
    }

    let x = input.data();
    let w = weights.data();
    let g = grad_out.data();
    let p = padding as isize;
    let s = stride;

    let mut gbias = Tensor::zeros([1, oc, 1, 1]);
    {
        let gb = gbias.data_mut();
        for co in 0..oc {
            let mut acc = T::zero();
            for bi in 0..b {
                let base = (bi * oc + co) * oh * ow;
                for i in 0..oh * ow {
                    acc += g[base + i];
                }
            }
            gb[co] = acc;
        }
    }

    // Each input pixel scatters to output positions oy = iy*s - p + ky, so its
    // gradient gathers the upstream gradient over the same window.
    let mut ginput = Tensor::zeros([b, ic, ih, iw]);
    {
        let gi = ginput.data_mut();
        for bi in 0..b {
            for ci in 0..ic {
                for iy in 0..ih {
                    for ix in 0..iw {
                        let mut acc = T::zero();
                        for co in 0..oc {
                            for ky in 0..kh {
                                let oy = iy as isize * s as isize - p + ky as isize;
                                if oy < 0 || oy as usize >= oh {
                                    continue;
                                }
                                for kx in 0..kw {
                                    let ox = ix as isize * s as isize - p + kx as isize;
                                    if ox < 0 || ox as usize >= ow {
                                        continue;
                                    }
                                    acc += g[((bi * oc + co) * oh + oy as usize) * ow + ox as usize]
                                        * w[((co * ic + ci) * kh + ky) * kw + kx];
                                }
                            }
                        }
                        gi[((bi * ic + ci) * ih + iy) * iw + ix] = acc;
                    }
                }
            }
        }
    }

    let mut gweights = Tensor::zeros([oc, ic, kh, kw]);
    {
        let gw = gweights.data_mut();
        for co in 0..oc {
            for ci in 0..ic {
                for ky in 0..kh {
                    for kx in 0..kw {
                        let mut acc = T::zero();
                        for bi in 0..b {
                            for iy in 0..ih {
                                let oy = iy as isize * s as isize - p + ky as isize;
                                if oy < 0 || oy as usize >= oh {
                                    continue;
                                }
                                let xrow = ((bi * ic + ci) * ih + iy) * iw;
                                let grow = ((bi * oc + co) * oh + oy as usize) * ow;
                                for ix in 0..iw {
                                    let ox = ix as isize * s as isize - p + kx as isize;
                                    if ox < 0 || ox as usize >= ow {
                                        continue;
                                    }
                                    acc += x[xrow + ix] * g[grow + ox as usize];
                                }
                            }
                        }
                        gw[((co * ic + ci) * kh + ky) * kw + kx] = acc;
                    }
                }
            }
        }
    }

    Ok((ginput, gweights, gbias))
}

/// Backward pass of [`deconv2d`].
pub fn deconv2d_backward<T: Scalar>(
    input: &Tensor<T>,
    params: &ConvParams<T>,
    grad_out: &Tensor<T>,
) -> Result<ConvGrads<T>> {
    let (input, weights, bias) =
        deconv2d_grads_raw(input, &params.weights, params.stride, params.padding, grad_out)?;
    Ok(ConvGrads {
        input,
        weights,
        bias,
    })
}

// ---------------------------------------------------------------------------
// relu
// ---------------------------------------------------------------------------

pub fn relu<T: Scalar>(input: &Tensor<T>) -> Tensor<T> {
    input.map(|v| if v > T::zero() { v } else { T::zero() })
}

/// Backward pass of [`relu`]; takes the forward *input* (pre-activation).
/// The subgradient at exactly zero is zero.
pub fn relu_backward<T: Scalar>(input: &Tensor<T>, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
    if input.shape() != grad_out.shape() {
        return Err(Error::shape(
            "relu_backward",
            format!("{:?}", input.shape()),
            format!("{:?}", grad_out.shape()),
        ));
    }
    let mut out = Tensor::zeros(input.shape());
    let o = out.data_mut();
    for (i, (&x, &g)) in input.data().iter().zip(grad_out.data()).enumerate() {
        o[i] = if x > T::zero() { g } else { T::zero() };
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// softmax over channel pairs
// ---------------------------------------------------------------------------

/// Softmax applied independently to each consecutive channel pair
/// `(2k, 2k+1)` at every pixel. Channel count must be even. Outputs lie in
/// `[0, 1]` and each pair sums to 1; equal logits map to exactly 0.5.
pub fn softmax_pairs<T: Scalar>(input: &Tensor<T>) -> Result<Tensor<T>> {
    let [b, c, h, w] = input.shape();
    if c % 2 != 0 || c == 0 {
        return Err(Error::OddChannels {
            op: "softmax_pairs",
            channels: c,
        });
    }
    let x = input.data();
    let mut out = Tensor::zeros([b, c, h, w]);
    let o = out.data_mut();
    let plane = h * w;
    for bi in 0..b {
        for pair in 0..c / 2 {
            let a0 = ((bi * c + 2 * pair) * h) * w;
            let a1 = ((bi * c + 2 * pair + 1) * h) * w;
            for i in 0..plane {
                let a = x[a0 + i];
                let bv = x[a1 + i];
                let m = a.max(bv);
                let ea = (a - m).exp();
                let eb = (bv - m).exp();
                let den = ea + eb;
                o[a0 + i] = ea / den;
                o[a1 + i] = eb / den;
            }
        }
    }
    Ok(out)
}

/// Backward pass of [`softmax_pairs`]; takes the forward *output*
/// (the probabilities).
pub fn softmax_pairs_backward<T: Scalar>(probs: &Tensor<T>, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
    if probs.shape() != grad_out.shape() {
        return Err(Error::shape(
            "softmax_pairs_backward",
            format!("{:?}", probs.shape()),
            format!("{:?}", grad_out.shape()),
        ));
    }
    let [b, c, h, w] = probs.shape();
    if c % 2 != 0 || c == 0 {
        return Err(Error::OddChannels {
            op: "softmax_pairs_backward",
            channels: c,
        });
    }
    let p = probs.data();
    let g = grad_out.data();
    let mut out = Tensor::zeros([b, c, h, w]);
    let o = out.data_mut();
    let plane = h * w;
    for bi in 0..b {
        for pair in 0..c / 2 {
            let a0 = ((bi * c + 2 * pair) * h) * w;
            let a1 = ((bi * c + 2 * pair + 1) * h) * w;
            for i in 0..plane {
                let (pa, pb) = (p[a0 + i], p[a1 + i]);
                let (ga, gb) = (g[a0 + i], g[a1 + i]);
                let s = ga * pa + gb * pb;
                o[a0 + i] = pa * (ga - s);
                o[a1 + i] = pb * (gb - s);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn params<T: Scalar>(w: Tensor<T>, stride: usize, padding: usize) -> ConvParams<T> {
        let oc = w.shape()[0];
        ConvParams::new(w, Tensor::zeros([1, oc, 1, 1]), stride, padding).unwrap()
    }

    #[test]
    fn conv_identity_kernel_passes_input_through() {
        let x = Tensor::<f64>::from_fn([1, 1, 3, 3], |_, _, y, xx| (y * 3 + xx) as f64);
        let w = Tensor::from_vec([1, 1, 1, 1], vec![1.0]).unwrap();
        let y = conv2d(&x, &params(w, 1, 0)).unwrap();
        assert_eq!(y.data(), x.data());
    }

    #[test]
    fn conv_ones_3x3_counts_overlap() {
        // All-ones 5x5 input, all-ones 3x3 kernel, stride 1, pad 1:
        // corners see 4 taps, edges 6, interior 9.
        let x = Tensor::<f64>::from_fn([1, 1, 5, 5], |_, _, _, _| 1.0);
        let w = Tensor::from_vec([1, 1, 3, 3], vec![1.0; 9]).unwrap();
        let y = conv2d(&x, &params(w, 1, 1)).unwrap();
        assert_eq!(y.shape(), [1, 1, 5, 5]);
        assert_eq!(y.at(0, 0, 0, 0), 4.0);
        assert_eq!(y.at(0, 0, 0, 2), 6.0);
        assert_eq!(y.at(0, 0, 2, 2), 9.0);
        assert_eq!(y.at(0, 0, 4, 4), 4.0);
    }

    #[test]
    fn conv_shape_formula_matches_stride_two() {
        // 8x8 kernel, stride 2, pad 3 halves a 16x24 input.
        let x = Tensor::<f64>::zeros([2, 3, 16, 24]);
        let w = Tensor::zeros([5, 3, 8, 8]);
        let y = conv2d(&x, &params(w, 2, 3)).unwrap();
        assert_eq!(y.shape(), [2, 5, 8, 12]);
    }

    #[test]
    fn conv_rejects_channel_mismatch() {
        let x = Tensor::<f64>::zeros([1, 2, 4, 4]);
        let w = Tensor::zeros([1, 3, 3, 3]);
        assert!(conv2d(&x, &params(w, 1, 1)).is_err());
    }

    #[test]
    fn deconv_single_pixel_spreads_uniformly() {
        // 1x1 input through a 4x4 all-ones kernel, stride 2, pad 1 yields a
        // 2x2 output that repeats the input value.
        let x = Tensor::from_vec([1, 1, 1, 1], vec![2.5]).unwrap();
        let w = Tensor::from_vec([1, 1, 4, 4], vec![1.0; 16]).unwrap();
        let y = deconv2d(&x, &params(w, 2, 1)).unwrap();
        assert_eq!(y.shape(), [1, 1, 2, 2]);
        assert_eq!(y.data(), &[2.5; 4]);
    }

    #[test]
    fn deconv_doubles_resolution() {
        let x = Tensor::<f64>::zeros([1, 4, 6, 9]);
        let w = Tensor::zeros([2, 4, 4, 4]);
        let y = deconv2d(&x, &params(w, 2, 1)).unwrap();
        assert_eq!(y.shape(), [1, 2, 12, 18]);
    }

    #[test]
    fn deconv_then_conv_restores_extent() {
        let x = Tensor::<f64>::zeros([1, 1, 5, 7]);
        let up = deconv2d(&x, &params(Tensor::zeros([1, 1, 4, 4]), 2, 1)).unwrap();
        let down = conv2d(&up, &params(Tensor::zeros([1, 1, 4, 4]), 2, 1)).unwrap();
        assert_eq!(down.shape(), x.shape());
    }

    #[test]
    fn relu_clamps_negatives_only() {
        let x = Tensor::from_vec([1, 1, 1, 4], vec![-2.0, 0.0, 0.5, 3.0]).unwrap();
        assert_eq!(relu(&x).data(), &[0.0, 0.0, 0.5, 3.0]);
    }

    #[test]
    fn softmax_pairs_equal_logits_give_half() {
        let x = Tensor::from_vec([1, 4, 1, 1], vec![0.3, 0.3, -1.0, -1.0]).unwrap();
        let y = softmax_pairs(&x).unwrap();
        assert_eq!(y.data(), &[0.5, 0.5, 0.5, 0.5]);
    }

    #[test]
    fn softmax_pairs_sum_to_one_and_order_preserving() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x = Tensor::<f64>::from_fn([2, 6, 3, 4], |_, _, _, _| rng.random_range(-4.0..4.0));
        let y = softmax_pairs(&x).unwrap();
        for bi in 0..2 {
            for pair in 0..3 {
                for yy in 0..3 {
                    for xx in 0..4 {
                        let a = y.at(bi, 2 * pair, yy, xx);
                        let b = y.at(bi, 2 * pair + 1, yy, xx);
                        assert!((a + b - 1.0).abs() < 1e-12);
                        assert!((0.0..=1.0).contains(&a));
                        let la = x.at(bi, 2 * pair, yy, xx);
                        let lb = x.at(bi, 2 * pair + 1, yy, xx);
                        assert_eq!(la > lb, a > b);
                    }
                }
            }
        }
    }

    #[test]
    fn softmax_pairs_rejects_odd_channels() {
        let x = Tensor::<f64>::zeros([1, 3, 2, 2]);
        assert!(softmax_pairs(&x).is_err());
    }

    // --- quick finite-difference sanity checks (the acceptance suite runs the
    //     exhaustive version across many trials) ---

    fn rel_err(a: f64, n: f64) -> f64 {
        (a - n).abs() / a.abs().max(n.abs()).max(1.0)
    }

    /// Scalar projection loss sum(c * f(x)) lets one backward pass produce
    /// every coordinate's analytic derivative at once.
    fn check_conv_like(deconv: bool, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = Tensor::<f64>::from_fn([2, 3, 5, 6], |_, _, _, _| rng.random_range(-1.0..1.0));
        let w = Tensor::<f64>::from_fn([2, 3, 3, 3], |_, _, _, _| rng.random_range(-1.0..1.0));
        let b = Tensor::<f64>::from_fn([1, 2, 1, 1], |_, _, _, _| rng.random_range(-1.0..1.0));
        let p = ConvParams::new(w, b, 2, 1).unwrap();
        let fwd = |pp: &ConvParams<f64>, xx: &Tensor<f64>| {
            if deconv {
                deconv2d(xx, pp).unwrap()
            } else {
                conv2d(xx, pp).unwrap()
            }
        };
        let y0 = fwd(&p, &x);
        let c = Tensor::<f64>::from_fn(y0.shape(), |_, _, _, _| rng.random_range(-1.0..1.0));
        let loss = |pp: &ConvParams<f64>, xx: &Tensor<f64>| -> f64 {
            fwd(pp, xx)
                .data()
                .iter()
                .zip(c.data())
                .map(|(a, b)| a * b)
                .sum()
        };
        let grads = if deconv {
            deconv2d_backward(&x, &p, &c).unwrap()
        } else {
            conv2d_backward(&x, &p, &c).unwrap()
        };
        let h = 1e-4;
        // input coordinates
        for i in (0..x.len()).step_by(17) {
            let mut xp = x.clone();
            xp.data_mut()[i] += h;
            let mut xm = x.clone();
            xm.data_mut()[i] -= h;
            let num = (loss(&p, &xp) - loss(&p, &xm)) / (2.0 * h);
            assert!(
                rel_err(grads.input.data()[i], num) < 1e-6,
                "input grad {i}: analytic {} numeric {num}",
                grads.input.data()[i]
            );
        }
        // weight coordinates
        for i in (0..p.weights.len()).step_by(11) {
            let mut pp = p.clone();
            pp.weights.data_mut()[i] += h;
            let mut pm = p.clone();
            pm.weights.data_mut()[i] -= h;
            let num = (loss(&pp, &x) - loss(&pm, &x)) / (2.0 * h);
            assert!(
                rel_err(grads.weights.data()[i], num) < 1e-6,
                "weight grad {i}: analytic {} numeric {num}",
                grads.weights.data()[i]
            );
        }
        // bias coordinates
        for i in 0..p.bias.len() {
            let mut pp = p.clone();
            pp.bias.data_mut()[i] += h;
            let mut pm = p.clone();
            pm.bias.data_mut()[i] -= h;
            let num = (loss(&pp, &x) - loss(&pm, &x)) / (2.0 * h);
            assert!(rel_err(grads.bias.data()[i], num) < 1e-6);
        }
    }

    #[test]
    fn conv_gradients_match_finite_differences() {
        check_conv_like(false, 21);
    }

    #[test]
    fn deconv_gradients_match_finite_differences() {
        check_conv_like(true, 22);
    }

    #[test]
    fn softmax_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let x = Tensor::<f64>::from_fn([1, 4, 2, 3], |_, _, _, _| rng.random_range(-2.0..2.0));
        let c = Tensor::<f64>::from_fn([1, 4, 2, 3], |_, _, _, _| rng.random_range(-1.0..1.0));
        let loss = |xx: &Tensor<f64>| -> f64 {
            softmax_pairs(xx)
                .unwrap()
                .data()
                .iter()
                .zip(c.data())
                .map(|(a, b)| a * b)
                .sum()
        };
        let probs = softmax_pairs(&x).unwrap();
        let g = softmax_pairs_backward(&probs, &c).unwrap();
        let h = 1e-4;
        for i in 0..x.len() {
            let mut xp = x.clone();
            xp.data_mut()[i] += h;
            let mut xm = x.clone();
            xm.data_mut()[i] -= h;
            let num = (loss(&xp) - loss(&xm)) / (2.0 * h);
            assert!(rel_err(g.data()[i], num) < 1e-6);
        }
    }
}
