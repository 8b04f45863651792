//! Ground-truth binocular occlusion from disparity via left-right consistency.
//!
//! A pixel `p` of view `v` is labeled occluded when the disparity it stores
//! disagrees with the other view's disparity sampled at `p`'s correspondence:
//!
//! ```text
//! O_v(p) = 1  iff  |D_v(p) - D̂_v(p)| > delta,
//! D̂_v(p) = bilinear sample of D_v' at t,
//! t = (x - D_L(p), y) for the left view, (x + D_R(p), y) for the right.
//! ```
//!
//! Correspondences falling outside the other view's frame have no match and
//! count as occluded by default (`oob_is_occluded`). Crops must regenerate
//! their ground truth from the cropped disparities: a window changes which
//! correspondences are out of frame, so masks are never croppable directly.

use crate::data::StereoSample;
use crate::error::{Error, Result};
use crate::grid::{CropRect, Grid, View};
use crate::scalar::Scalar;

/// Dense per-pixel disparity for one view. Values are non-negative
/// (left `(x, y)` matches right `(x - d, y)`).
///
/// `valid` marks pixels with trusted disparity; `None` means all-valid, which
/// is always the case for synthetic data. The mask is carried through crops
/// for datasets that provide one, but the occlusion labeling itself does not
/// consult it (no special treatment of invalid pixels is defined).
#[derive(Clone, Debug, PartialEq)]
pub struct DisparityMap<T> {
    pub view: View,
    pub grid: Grid<T>,
    pub valid: Option<Grid<bool>>,
}

impl<T: Scalar> DisparityMap<T> {
    pub fn new(view: View, grid: Grid<T>) -> Result<DisparityMap<T>> {
        if grid.data().iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                op: "DisparityMap::new",
                detail: "disparity values must be finite".into(),
            });
        }
        Ok(DisparityMap {
            view,
            grid,
            valid: None,
        })
    }

    pub fn width(&self) -> usize {
        self.grid.width()
    }

    pub fn height(&self) -> usize {
        self.grid.height()
    }

    pub fn crop(&self, r: CropRect) -> Result<DisparityMap<T>> {
        Ok(DisparityMap {
            view: self.view,
            grid: self.grid.crop(r)?,
            valid: self.valid.as_ref().map(|v| v.crop(r)).transpose()?,
        })
    }

    pub fn flip_horizontal(&self) -> DisparityMap<T> {
        DisparityMap {
            view: self.view.opposite(),
            grid: self.grid.flip_horizontal(),
            valid: self.valid.as_ref().map(|v| v.flip_horizontal()),
        }
    }
}

/// Binary occlusion labels for one view (`true` = occluded).
#[derive(Clone, Debug, PartialEq)]
pub struct OcclusionMap {
    pub view: View,
    pub grid: Grid<bool>,
}

impl OcclusionMap {
    pub fn width(&self) -> usize {
        self.grid.width()
    }

    pub fn height(&self) -> usize {
        self.grid.height()
    }

    pub fn occluded_count(&self) -> usize {
        self.grid.count(|v| v)
    }

    pub fn flip_horizontal(&self) -> OcclusionMap {
        OcclusionMap {
            view: self.view,
            grid: self.grid.flip_horizontal(),
        }
    }
}

/// Knobs of the consistency labeling.
#[derive(Clone, Copy, Debug)]
pub struct GtConfig<T> {
    /// Strict threshold on the disparity disagreement.
    pub delta: T,
    /// Whether out-of-frame correspondences are labeled occluded.
    pub oob_is_occluded: bool,
}

impl<T: Scalar> Default for GtConfig<T> {
    fn default() -> Self {
        GtConfig {
            delta: T::one(),
            oob_is_occluded: true,
        }
    }
}

/// Bilinear interpolation at continuous coordinates `(x, y)`.
///
/// Returns the sample and whether the point lies inside the grid's support
/// `[0, W-1] x [0, H-1]`. Out-of-support coordinates are clamped before
/// sampling so the returned value is always well defined; the flag tells the
/// caller the sample had no in-frame correspondence. The four neighbor
/// weights are the usual products of fractional offsets and sum to one.
pub fn bilinear_sample<T: Scalar>(grid: &Grid<T>, x: T, y: T) -> (T, bool) {
    let w = grid.width();
    let h = grid.height();
    let max_x = T::from_usize(w - 1);
    let max_y = T::from_usize(h - 1);
    let in_bounds = x >= T::zero() && x <= max_x && y >= T::zero() && y <= max_y;

    let cx = x.max(T::zero()).min(max_x);
    let cy = y.max(T::zero()).min(max_y);
    let x0 = cx.floor();
    let y0 = cy.floor();
    let fx = cx - x0;
    let fy = cy - y0;
    let x0 = x0.to_f64() as usize;
    let y0 = y0.to_f64() as usize;
    let x1 = (x0 + 1).min(w - 1);
    let y1 = (y0 + 1).min(h - 1);

    let one = T::one();
    let v = (one - fx) * (one - fy) * grid.get(x0, y0)
        + fx * (one - fy) * grid.get(x1, y0)
        + (one - fx) * fy * grid.get(x0, y1)
        + fx * fy * grid.get(x1, y1);
    (v, in_bounds)
}

/// Warps the other view's disparity onto `target`'s pixel grid.
///
/// For every pixel of `target` the source map is sampled at the
/// correspondence implied by the target disparity. Returns the warped map
/// and a flag grid marking correspondences that fell out of frame.
pub fn warp_disparity<T: Scalar>(
    target: &DisparityMap<T>,
    source: &DisparityMap<T>,
) -> Result<(Grid<T>, Grid<bool>)> {
    if source.view != target.view.opposite() {
        return Err(Error::ViewMismatch {
            op: "warp_disparity",
            expected: target.view.opposite(),
            got: source.view,
        });
    }
    if source.width() != target.width() || source.height() != target.height() {
        return Err(Error::shape(
            "warp_disparity",
            format!("{}x{}", target.width(), target.height()),
            format!("{}x{}", source.width(), source.height()),
        ));
    }
    let w = target.width();
    let h = target.height();
    let mut warped = Grid::new(w, h, T::zero());
    let mut oob = Grid::new(w, h, false);
    for y in 0..h {
        for x in 0..w {
            let d = target.grid.get(x, y);
            let sx = match target.view {
                View::Left => T::from_usize(x) - d,
                View::Right => T::from_usize(x) + d,
            };
            let (v, inside) = bilinear_sample(&source.grid, sx, T::from_usize(y));
            warped.set(x, y, v);
            oob.set(x, y, !inside);
        }
    }
    Ok((warped, oob))
}

/// Labels `target`'s pixels occluded wherever its disparity disagrees with
/// the warped other-view disparity by more than `delta` (strictly), or the
/// correspondence is out of frame and `oob_is_occluded` is set.
pub fn occlusion_from_disparity<T: Scalar>(
    target: &DisparityMap<T>,
    source: &DisparityMap<T>,
    cfg: &GtConfig<T>,
) -> Result<OcclusionMap> {
    if cfg.delta < T::zero() {
        return Err(Error::config(format!(
            "occlusion threshold delta must be >= 0, got {}",
            cfg.delta
        )));
    }
    let (warped, oob) = warp_disparity(target, source)?;
    let w = target.width();
    let h = target.height();
    let grid = Grid::from_fn(w, h, |x, y| {
        if oob.get(x, y) {
            cfg.oob_is_occluded
        } else {
            (target.grid.get(x, y) - warped.get(x, y)).abs() > cfg.delta
        }
    });
    Ok(OcclusionMap {
        view: target.view,
        grid,
    })
}

/// Consistency labels for both views at once.
pub fn occlusion_pair<T: Scalar>(
    left: &DisparityMap<T>,
    right: &DisparityMap<T>,
    cfg: &GtConfig<T>,
) -> Result<(OcclusionMap, OcclusionMap)> {
    if left.view != View::Left {
        return Err(Error::ViewMismatch {
            op: "occlusion_pair",
            expected: View::Left,
            got: left.view,
        });
    }
    if right.view != View::Right {
        return Err(Error::ViewMismatch {
            op: "occlusion_pair",
            expected: View::Right,
            got: right.view,
        });
    }
    Ok((
        occlusion_from_disparity(left, right, cfg)?,
        occlusion_from_disparity(right, left, cfg)?,
    ))
}

/// Network-compatible crop divisor (six halvings).
pub const CROP_DIVISOR: usize = 64;

/// Crops images and disparities of both views identically, then regenerates
/// the occlusion ground truth from the cropped disparities. Pixels whose
/// correspondence leaves the crop window become occluded, exactly as frame
/// edges do on full images. Crop dimensions must be multiples of
/// [`CROP_DIVISOR`] so the result stays network-compatible.
pub fn crop_with_gt<T: Scalar>(
    sample: &StereoSample<T>,
    rect: CropRect,
    cfg: &GtConfig<T>,
) -> Result<StereoSample<T>> {
    if rect.width % CROP_DIVISOR != 0 || rect.height % CROP_DIVISOR != 0 {
        return Err(Error::CropAlignment {
            width: rect.width,
            height: rect.height,
            divisor: CROP_DIVISOR,
        });
    }
    let left_disp = sample.left_disp.crop(rect)?;
    let right_disp = sample.right_disp.crop(rect)?;
    let (left_occ, right_occ) = occlusion_pair(&left_disp, &right_disp, cfg)?;
    Ok(StereoSample {
        left_image: sample.left_image.crop(rect)?,
        right_image: sample.right_image.crop(rect)?,
        left_disp,
        right_disp,
        left_occ: Some(left_occ),
        right_occ: Some(right_occ),
    })
}
