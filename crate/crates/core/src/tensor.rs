//! Dense 4-D tensors in `(batch, channels, height, width)` layout.
//!
//! Storage is a flat row-major `Vec` (width fastest), which fixes the
//! accumulation order of every kernel and makes results bit-reproducible
//! run to run.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<T> {
    shape: [usize; 4],
    data: Vec<T>,
    /// Gradient accumulated for this tensor when it is used as a trainable
    /// parameter; `None` until a backward pass (or `grad_mut`) touches it.
    grad: Option<Vec<T>>,
}

impl<T: Scalar> Tensor<T> {
    pub fn zeros(shape: [usize; 4]) -> Tensor<T> {
        Tensor {
            shape,
            data: vec![T::zero(); shape.iter().product()],
            grad: None,
        }
    }

    pub fn from_vec(shape: [usize; 4], data: Vec<T>) -> Result<Tensor<T>> {
        let expect: usize = shape.iter().product();
        if data.len() != expect {
            return Err(Error::shape(
                "Tensor::from_vec",
                format!("{expect} values for {shape:?}"),
                format!("{}", data.len()),
            ));
        }
        Ok(Tensor {
            shape,
            data,
            grad: None,
        })
    }

    /// Builds a tensor by evaluating `f(b, c, y, x)` in storage order.
    pub fn from_fn(shape: [usize; 4], mut f: impl FnMut(usize, usize, usize, usize) -> T) -> Tensor<T> {
        let mut data = Vec::with_capacity(shape.iter().product());
        for b in 0..shape[0] {
            for c in 0..shape[1] {
                for y in 0..shape[2] {
                    for x in 0..shape[3] {
                        data.push(f(b, c, y, x));
                    }
                }
            }
        }
        Tensor {
            shape,
            data,
            grad: None,
        }
    }

    pub fn shape(&self) -> [usize; 4] {
        self.shape
    }

    pub fn batch(&self) -> usize {
        self.shape[0]
    }

    pub fn channels(&self) -> usize {
        self.shape[1]
    }

    pub fn height(&self) -> usize {
        self.shape[2]
    }

    pub fn width(&self) -> usize {
        self.shape[3]
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn idx(&self, b: usize, c: usize, y: usize, x: usize) -> usize {
        ((b * self.shape[1] + c) * self.shape[2] + y) * self.shape[3] + x
    }

    #[inline]
    pub fn at(&self, b: usize, c: usize, y: usize, x: usize) -> T {
        self.data[self.idx(b, c, y, x)]
    }

    #[inline]
    pub fn set(&mut self, b: usize, c: usize, y: usize, x: usize, v: T) {
        let i = self.idx(b, c, y, x);
        self.data[i] = v;
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Tensor<T> {
        Tensor {
            shape: self.shape,
            data: self.data.iter().map(|&v| f(v)).collect(),
            grad: None,
        }
    }

    /// Elementwise sum; shapes must match exactly.
    pub fn add(&self, other: &Tensor<T>) -> Result<Tensor<T>> {
        if self.shape != other.shape {
            return Err(Error::shape(
                "add",
                format!("{:?}", self.shape),
                format!("{:?}", other.shape),
            ));
        }
        Ok(Tensor {
            shape: self.shape,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| a + b)
                .collect(),
            grad: None,
        })
    }

    /// Concatenates along the channel axis; batch and spatial dims must match.
    pub fn concat_channels(parts: &[&Tensor<T>]) -> Result<Tensor<T>> {
        let first = parts
            .first()
            .ok_or_else(|| Error::config("concat_channels: no inputs"))?;
        let [b, _, h, w] = first.shape;
        let mut channels = 0;
        for p in parts {
            if p.shape[0] != b || p.shape[2] != h || p.shape[3] != w {
                return Err(Error::shape(
                    "concat_channels",
                    format!("batch {b}, spatial {h}x{w}"),
                    format!("{:?}", p.shape),
                ));
            }
            channels += p.shape[1];
        }
        let mut out = Tensor::zeros([b, channels, h, w]);
        let plane = h * w;
        for bi in 0..b {
            let mut co = 0;
            for p in parts {
                let pc = p.shape[1];
                let src = &p.data[bi * pc * plane..(bi + 1) * pc * plane];
                let dst_start = (bi * channels + co) * plane;
                out.data[dst_start..dst_start + pc * plane].copy_from_slice(src);
                co += pc;
            }
        }
        Ok(out)
    }

    /// Copies out channels `[start, start + count)` as a standalone tensor.
    pub fn slice_channels(&self, start: usize, count: usize) -> Result<Tensor<T>> {
        let [b, c, h, w] = self.shape;
        if start + count > c {
            return Err(Error::shape(
                "slice_channels",
                format!("channels within 0..{c}"),
                format!("{start}..{}", start + count),
            ));
        }
        Ok(Tensor::from_fn([b, count, h, w], |bi, ci, y, x| {
            self.at(bi, start + ci, y, x)
        }))
    }

    // ----- gradient slot -----

    pub fn grad(&self) -> Option<&[T]> {
        self.grad.as_deref()
    }

    /// Gradient slot, created zero-filled on first use.
    pub fn grad_mut(&mut self) -> &mut [T] {
        let n = self.data.len();
        self.grad.get_or_insert_with(|| vec![T::zero(); n])
    }

    pub fn set_grad(&mut self, grad: Vec<T>) -> Result<()> {
        if grad.len() != self.data.len() {
            return Err(Error::shape(
                "set_grad",
                format!("{} values", self.data.len()),
                format!("{}", grad.len()),
            ));
        }
        self.grad = Some(grad);
        Ok(())
    }

    pub fn clear_grad(&mut self) {
        self.grad = None;
    }
}

/// Parameters of one convolution or transposed-convolution layer.
///
/// `weights` has shape `(out_channels, in_channels, kh, kw)` for both kinds;
/// `bias` holds one value per output channel, stored as a `(1, out, 1, 1)`
/// tensor so it owns a gradient slot like any other parameter.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvParams<T> {
    pub weights: Tensor<T>,
    pub bias: Tensor<T>,
    pub stride: usize,
    pub padding: usize,
}

impl<T: Scalar> ConvParams<T> {
    pub fn new(weights: Tensor<T>, bias: Tensor<T>, stride: usize, padding: usize) -> Result<ConvParams<T>> {
        if stride == 0 {
            return Err(Error::config("stride must be >= 1"));
        }
        let [oc, _, _, _] = weights.shape();
        if bias.shape() != [1, oc, 1, 1] {
            return Err(Error::shape(
                "ConvParams::new",
                format!("bias [1, {oc}, 1, 1]"),
                format!("{:?}", bias.shape()),
            ));
        }
        Ok(ConvParams {
            weights,
            bias,
            stride,
            padding,
        })
    }

    /// He initialization: weights ~ N(0, 2 / fan_in) with fan_in =
    /// in_channels * kh * kw, biases zero. Sampling order is fixed
    /// (storage order), so a seeded RNG reproduces parameters exactly.
    pub fn init_he(
        out_ch: usize,
        in_ch: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
        rng: &mut impl Rng,
    ) -> ConvParams<T> {
        let fan_in = (in_ch * kernel * kernel) as f64;
        let std = (2.0 / fan_in).sqrt();
        let mut data = Vec::with_capacity(out_ch * in_ch * kernel * kernel);
        for _ in 0..out_ch * in_ch * kernel * kernel {
            let z: f64 = StandardNormal.sample(rng);
            data.push(T::from_f64(z * std));
        }
        ConvParams {
            weights: Tensor::from_vec([out_ch, in_ch, kernel, kernel], data).expect("sized above"),
            bias: Tensor::zeros([1, out_ch, 1, 1]),
            stride,
            padding,
        }
    }

    pub fn out_channels(&self) -> usize {
        self.weights.shape()[0]
    }

    pub fn in_channels(&self) -> usize {
        self.weights.shape()[1]
    }

    pub fn kernel_h(&self) -> usize {
        self.weights.shape()[2]
    }

    pub fn kernel_w(&self) -> usize {
        self.weights.shape()[3]
    }

    /// Trainable scalar count (weights plus biases).
    pub fn parameter_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn storage_is_bchw_row_major() {
        let t = Tensor::<f64>::from_fn([2, 2, 2, 3], |b, c, y, x| {
            (1000 * b + 100 * c + 10 * y + x) as f64
        });
        assert_eq!(t.at(1, 0, 1, 2), 1012.0);
        assert_eq!(t.idx(0, 1, 0, 0), 6);
        assert_eq!(t.data()[t.idx(1, 1, 1, 1)], 1111.0);
    }

    #[test]
    fn concat_channels_stacks_in_order() {
        let a = Tensor::<f64>::from_fn([1, 2, 1, 2], |_, c, _, x| (10 * c + x) as f64);
        let b = Tensor::<f64>::from_fn([1, 1, 1, 2], |_, _, _, x| (100 + x) as f64);
        let c = Tensor::concat_channels(&[&a, &b]).unwrap();
        assert_eq!(c.shape(), [1, 3, 1, 2]);
        assert_eq!(c.data(), &[0.0, 1.0, 10.0, 11.0, 100.0, 101.0]);
    }

    #[test]
    fn concat_channels_rejects_spatial_mismatch() {
        let a = Tensor::<f64>::zeros([1, 1, 2, 2]);
        let b = Tensor::<f64>::zeros([1, 1, 2, 3]);
        assert!(Tensor::concat_channels(&[&a, &b]).is_err());
    }

    #[test]
    fn slice_channels_round_trips_concat() {
        let a = Tensor::<f64>::from_fn([2, 3, 2, 2], |b, c, y, x| (b + 7 * c + 3 * y + x) as f64);
        let left = a.slice_channels(0, 2).unwrap();
        let right = a.slice_channels(2, 1).unwrap();
        let back = Tensor::concat_channels(&[&left, &right]).unwrap();
        assert_eq!(back.data(), a.data());
    }

    #[test]
    fn he_init_is_seed_deterministic() {
        use rand::SeedableRng;
        let mut r1 = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let mut r2 = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let a = ConvParams::<f64>::init_he(4, 3, 3, 1, 1, &mut r1);
        let b = ConvParams::<f64>::init_he(4, 3, 3, 1, 1, &mut r2);
        assert_eq!(a.weights.data(), b.weights.data());
        assert!(a.bias.data().iter().all(|&v| v == 0.0));
    }
}
