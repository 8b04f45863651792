use std::fmt::{Debug, Display};
use std::iter::Sum;

/// Floating-point scalar the numeric core is generic over.
///
/// Everything numeric (tensors, kernels, losses, the optimizer, ground-truth
/// generation) is written against this trait so the same code runs in `f64`
/// where correctness is checked against finite differences and in `f32` where
/// training speed matters. Both impls must be IEEE-754 so results are
/// bit-reproducible for a fixed evaluation order.
pub trait Scalar:
    num_traits::Float + num_traits::NumAssign + Sum + Debug + Display + Send + Sync + 'static
{
    fn from_f64(v: f64) -> Self;
    fn to_f64(self) -> f64;

    fn from_usize(v: usize) -> Self {
        Self::from_f64(v as f64)
    }
}

impl Scalar for f32 {
    fn from_f64(v: f64) -> Self {
        v as f32
    }
    fn to_f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    fn from_f64(v: f64) -> Self {
        v
    }
    fn to_f64(self) -> f64 {
        self
    }
}
