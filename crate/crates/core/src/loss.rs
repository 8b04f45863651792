//! Class-weighted binocular cross-entropy and its analytic gradients.
//!
//! The training objective sums a weighted binary cross-entropy over both
//! views:
//!
//! ```text
//! L = -1/2 [ w_L^o  Σ 1(O_L=1) ln P_L  +  w_L^v Σ 1(O_L=0) ln(1 - P_L)
//!          + w_R^o  Σ 1(O_R=1) ln P_R  +  w_R^v Σ 1(O_R=0) ln(1 - P_R) ]
//! ```
//!
//! written as *sums* over pixels, not means (an optional per-pixel
//! normalization exists for stability and defaults off). Single-view
//! architectures keep the -1/2 factor and simply have no second term.
//!
//! Class weights are bounded inverse log-frequencies, `w^c = 1/ln(ε + q^c)`
//! with `q^c` the proportion of class `c` in the training batch for that
//! view. The bound parameter must satisfy `ε > 1` so the weight stays finite
//! and positive even when a class is absent (`q = 0`).
//!
//! Each view term reports both its value and its gradient with respect to
//! the occlusion-probability channel, so the graph runtime can chain it
//! through the network without owning any objective math.

use crate::error::{Error, Result};
use crate::lrc::{DisparityMap, OcclusionMap};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Probabilities are clamped to `[PROB_CLAMP, 1 - PROB_CLAMP]` before logs.
pub const PROB_CLAMP: f64 = 1e-7;

/// Default class-weight bound for dense synthetic data. Datasets with much
/// sparser occlusion call for a smaller bound (1.2 for high-resolution
/// indoor scans, 1.01 for film-style sequences with thin occlusion);
/// anything > 1 is valid.
pub const DEFAULT_CLASS_EPSILON: f64 = 1.5;

/// Bounded class weight `1 / ln(epsilon + q)` for a class of proportion `q`.
pub fn bounded_weight<T: Scalar>(q: T, epsilon: f64) -> Result<T> {
    if !(epsilon > 1.0) {
        return Err(Error::InvalidEpsilon { epsilon });
    }
    if q < T::zero() || q > T::one() {
        return Err(Error::config(format!(
            "class proportion must lie in [0,1], got {q}"
        )));
    }
    Ok(T::one() / (T::from_f64(epsilon) + q).ln())
}

/// `(w_occ, w_vis)` for one view over a batch of ground-truth maps, from the
/// pooled occluded/visible proportions.
pub fn view_class_weights<T: Scalar>(targets: &[&OcclusionMap], epsilon: f64) -> Result<(T, T)> {
    let total: usize = targets.iter().map(|m| m.grid.len()).sum();
    if total == 0 {
        return Err(Error::EmptyDataset);
    }
    let occluded: usize = targets.iter().map(|m| m.occluded_count()).sum();
    let q_occ = T::from_usize(occluded) / T::from_usize(total);
    Ok((
        bounded_weight(q_occ, epsilon)?,
        bounded_weight(T::one() - q_occ, epsilon)?,
    ))
}

/// Per-view `(w_occ, w_vis)` pairs for a binocular batch.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClassWeights<T> {
    pub left: (T, T),
    pub right: (T, T),
}

impl<T: Scalar> ClassWeights<T> {
    pub fn uniform() -> ClassWeights<T> {
        ClassWeights {
            left: (T::one(), T::one()),
            right: (T::one(), T::one()),
        }
    }

    pub fn from_batch(
        left: &[&OcclusionMap],
        right: &[&OcclusionMap],
        epsilon: f64,
    ) -> Result<ClassWeights<T>> {
        Ok(ClassWeights {
            left: view_class_weights(left, epsilon)?,
            right: view_class_weights(right, epsilon)?,
        })
    }
}

/// One view's weighted cross-entropy term and its gradient.
///
/// `probs` is any `(B, C, H, W)` probability tensor; `channel` names the
/// channel holding this view's occlusion probability `P`. The term value is
///
/// ```text
/// -1/2 [ w_occ Σ 1(occ) ln P + w_vis Σ 1(vis) ln(1 - P) ]
/// ```
///
/// so the full objective is just the sum of its view terms. The returned
/// gradient tensor is `d(term)/d(probs)`: nonzero only on `channel`, and
/// zero wherever the probability sits at the clamp boundary (the clamp is
/// flat there, and finite differences agree).
///
/// With `normalize` the term and gradient are divided by the number of
/// pixels in the view's batch.
pub fn view_loss_term<T: Scalar>(
    probs: &Tensor<T>,
    channel: usize,
    targets: &[&OcclusionMap],
    weights: (T, T),
    normalize: bool,
) -> Result<(T, Tensor<T>)> {
    let [b, c, h, w] = probs.shape();
    if channel >= c {
        return Err(Error::shape(
            "view_loss_term",
            format!("channel < {c}"),
            format!("channel {channel}"),
        ));
    }
    if targets.len() != b {
        return Err(Error::shape(
            "view_loss_term",
            format!("{b} target maps"),
            format!("{}", targets.len()),
        ));
    }
    for m in targets {
        if m.width() != w || m.height() != h {
            return Err(Error::shape(
                "view_loss_term",
                format!("{w}x{h} targets"),
                format!("{}x{}", m.width(), m.height()),
            ));
        }
    }
    let (w_occ, w_vis) = weights;
    let lo = T::from_f64(PROB_CLAMP);
    let hi = T::one() - lo;
    let scale = if normalize {
        T::from_f64(-0.5) / T::from_usize(b * h * w)
    } else {
        T::from_f64(-0.5)
    };

    let mut value = T::zero();
    let mut grad = Tensor::zeros(probs.shape());
    for (bi, target) in targets.iter().enumerate() {
        for y in 0..h {
            for x in 0..w {
                let p = probs.at(bi, channel, y, x);
                let clamped = p.max(lo).min(hi);
                let at_bound = p <= lo || p >= hi;
                let (v, g) = if target.grid.get(x, y) {
                    (w_occ * clamped.ln(), w_occ / clamped)
                } else {
                    (
                        w_vis * (T::one() - clamped).ln(),
                        -w_vis / (T::one() - clamped),
                    )
                };
                value += scale * v;
                if !at_bound {
                    grad.set(bi, channel, y, x, scale * g);
                }
            }
        }
    }
    if !value.is_finite() {
        return Err(Error::NonFinite {
            op: "view_loss_term",
            detail: "loss sum overflowed or inputs were non-finite".into(),
        });
    }
    Ok((value, grad))
}

/// Mean absolute error between predicted binocular disparity (`B x 2 x H x W`,
/// channel 0 = left, channel 1 = right) and ground truth, with its gradient
/// `sign(pred - gt) / N`. The regression head trains on this.
pub fn mae_loss<T: Scalar>(
    pred: &Tensor<T>,
    left: &[&DisparityMap<T>],
    right: &[&DisparityMap<T>],
) -> Result<(T, Tensor<T>)> {
    let [b, c, h, w] = pred.shape();
    if c != 2 {
        return Err(Error::shape("mae_loss", "2 channels", format!("{c}")));
    }
    if left.len() != b || right.len() != b {
        return Err(Error::shape(
            "mae_loss",
            format!("{b} maps per view"),
            format!("{}+{}", left.len(), right.len()),
        ));
    }
    for m in left.iter().chain(right.iter()) {
        if m.width() != w || m.height() != h {
            return Err(Error::shape(
                "mae_loss",
                format!("{w}x{h} maps"),
                format!("{}x{}", m.width(), m.height()),
            ));
        }
    }
    let n = T::from_usize(b * 2 * h * w);
    let mut value = T::zero();
    let mut grad = Tensor::zeros(pred.shape());
    for bi in 0..b {
        for (ch, maps) in [(0, &left), (1, &right)] {
            for y in 0..h {
                for x in 0..w {
                    let diff = pred.at(bi, ch, y, x) - maps[bi].grid.get(x, y);
                    value += diff.abs() / n;
                    let sign = if diff > T::zero() {
                        T::one()
                    } else if diff < T::zero() {
                        -T::one()
                    } else {
                        T::zero()
                    };
                    grad.set(bi, ch, y, x, sign / n);
                }
            }
        }
    }
    Ok((value, grad))
}
