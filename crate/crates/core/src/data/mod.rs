//! Persistence and data generation: images, disparity maps (PFM), occlusion
//! masks, dataset manifests, checkpoints, and the synthetic scene generator.
//!
//! Conventions shared by everything below:
//! - images are 8-bit RGB, row-major, top-left origin;
//! - occlusion masks are 8-bit single-channel PNGs, 255 = occluded, 0 = visible;
//! - disparities are stored as single-channel PFM, full float precision;
//! - network inputs normalize each color channel from `[0, 255]` to
//!   `[-0.5, 0.5]`.

pub mod checkpoint;
pub mod manifest;
pub mod pfm;
pub mod synth;

use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{CropRect, Grid, View};
use crate::lrc::{DisparityMap, OcclusionMap};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

pub use checkpoint::{AdamSnapshot, Checkpoint, NamedTensor};
pub use manifest::{Manifest, ManifestEntry};
pub use synth::{synth_scene, Geometry, SceneSpec, ShapeSpec, SynthScene, Texture};

/// 8-bit RGB image, row-major, top-left origin.
#[derive(Clone, Debug, PartialEq)]
pub struct ColorImage {
    width: usize,
    height: usize,
    data: Vec<u8>, // interleaved RGB
}

impl ColorImage {
    pub fn new(width: usize, height: usize) -> ColorImage {
        ColorImage {
            width,
            height,
            data: vec![0; width * height * 3],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> [u8; 3]) -> ColorImage {
        let mut img = ColorImage::new(width, height);
        for y in 0..height {
            for x in 0..width {
                img.set_pixel(x, y, f(x, y));
            }
        }
        img
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn set_pixel(&mut self, x: usize, y: usize, rgb: [u8; 3]) {
        let i = (y * self.width + x) * 3;
        self.data[i..i + 3].copy_from_slice(&rgb);
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn crop(&self, r: CropRect) -> Result<ColorImage> {
        if r.x + r.width > self.width || r.y + r.height > self.height {
            return Err(Error::CropOutOfBounds {
                x: r.x,
                y: r.y,
                width: r.width,
                height: r.height,
                src_width: self.width,
                src_height: self.height,
            });
        }
        let mut out = ColorImage::new(r.width, r.height);
        for y in 0..r.height {
            let src = ((r.y + y) * self.width + r.x) * 3;
            let dst = y * r.width * 3;
            out.data[dst..dst + r.width * 3].copy_from_slice(&self.data[src..src + r.width * 3]);
        }
        Ok(out)
    }

    pub fn flip_horizontal(&self) -> ColorImage {
        ColorImage::from_fn(self.width, self.height, |x, y| {
            self.pixel(self.width - 1 - x, y)
        })
    }

    /// Converts to a `1 x 3 x H x W` tensor with each channel mapped from
    /// `[0, 255]` to `[-0.5, 0.5]`.
    pub fn to_tensor<T: Scalar>(&self) -> Tensor<T> {
        let scale = T::from_f64(1.0 / 255.0);
        let half = T::from_f64(0.5);
        Tensor::from_fn([1, 3, self.height, self.width], |_, c, y, x| {
            T::from_usize(self.pixel(x, y)[c] as usize) * scale - half
        })
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        let img = image::RgbImage::from_raw(self.width as u32, self.height as u32, self.data.clone())
            .expect("buffer length matches dimensions by construction");
        img.save(path)?;
        Ok(())
    }

    pub fn load_png(path: &Path) -> Result<ColorImage> {
        let img = image::open(path)?.to_rgb8();
        Ok(ColorImage {
            width: img.width() as usize,
            height: img.height() as usize,
            data: img.into_raw(),
        })
    }
}

/// Writes an occlusion mask as an 8-bit grayscale PNG (255 = occluded).
pub fn save_mask(mask: &OcclusionMap, path: &Path) -> Result<()> {
    let data: Vec<u8> = mask
        .grid
        .data()
        .iter()
        .map(|&o| if o { 255 } else { 0 })
        .collect();
    let img = image::GrayImage::from_raw(mask.width() as u32, mask.height() as u32, data)
        .expect("buffer length matches dimensions by construction");
    img.save(path)?;
    Ok(())
}

/// Reads an occlusion mask written by [`save_mask`]. Pixels must be exactly
/// 0 or 255; anything else is rejected rather than guessed at.
pub fn load_mask(path: &Path, view: View) -> Result<OcclusionMap> {
    let img = image::open(path)?.to_luma8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    let mut grid = Grid::new(w, h, false);
    for (x, y, p) in img.enumerate_pixels() {
        match p.0[0] {
            0 => {}
            255 => grid.set(x as usize, y as usize, true),
            other => {
                return Err(Error::MaskFormat {
                    path: path.to_path_buf(),
                    value: other,
                })
            }
        }
    }
    Ok(OcclusionMap { view, grid })
}

/// One rectified stereo pair with dense disparity for both views and,
/// once generated, occlusion labels for both views.
#[derive(Clone, Debug, PartialEq)]
pub struct StereoSample<T> {
    pub left_image: ColorImage,
    pub right_image: ColorImage,
    pub left_disp: DisparityMap<T>,
    pub right_disp: DisparityMap<T>,
    pub left_occ: Option<OcclusionMap>,
    pub right_occ: Option<OcclusionMap>,
}

impl<T: Scalar> StereoSample<T> {
    pub fn new(
        left_image: ColorImage,
        right_image: ColorImage,
        left_disp: DisparityMap<T>,
        right_disp: DisparityMap<T>,
    ) -> Result<StereoSample<T>> {
        let (w, h) = (left_image.width(), left_image.height());
        for (name, iw, ih) in [
            ("right_image", right_image.width(), right_image.height()),
            ("left_disp", left_disp.width(), left_disp.height()),
            ("right_disp", right_disp.width(), right_disp.height()),
        ] {
            if (iw, ih) != (w, h) {
                return Err(Error::shape(
                    "StereoSample::new",
                    format!("{w}x{h}"),
                    format!("{name} is {iw}x{ih}"),
                ));
            }
        }
        if left_disp.view != View::Left {
            return Err(Error::ViewMismatch {
                op: "StereoSample::new",
                expected: View::Left,
                got: left_disp.view,
            });
        }
        if right_disp.view != View::Right {
            return Err(Error::ViewMismatch {
                op: "StereoSample::new",
                expected: View::Right,
                got: right_disp.view,
            });
        }
        Ok(StereoSample {
            left_image,
            right_image,
            left_disp,
            right_disp,
            left_occ: None,
            right_occ: None,
        })
    }

    pub fn width(&self) -> usize {
        self.left_image.width()
    }

    pub fn height(&self) -> usize {
        self.left_image.height()
    }

    /// Labels both views by left-right consistency (see [`crate::lrc`]),
    /// replacing any existing labels.
    pub fn generate_gt(&mut self, cfg: &crate::lrc::GtConfig<T>) -> Result<()> {
        let (l, r) = crate::lrc::occlusion_pair(&self.left_disp, &self.right_disp, cfg)?;
        self.left_occ = Some(l);
        self.right_occ = Some(r);
        Ok(())
    }

    /// Ground-truth occlusion for one view; errors if not yet generated.
    pub fn occ(&self, view: View) -> Result<&OcclusionMap> {
        let m = match view {
            View::Left => self.left_occ.as_ref(),
            View::Right => self.right_occ.as_ref(),
        };
        m.ok_or_else(|| Error::config(format!("sample has no {view:?} occlusion labels yet")))
    }

    pub fn image(&self, view: View) -> &ColorImage {
        match view {
            View::Left => &self.left_image,
            View::Right => &self.right_image,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;

    fn flat_disp<T: Scalar>(view: View, w: usize, h: usize, d: T) -> DisparityMap<T> {
        DisparityMap::new(view, Grid::new(w, h, d)).unwrap()
    }

    #[test]
    fn image_crop_and_flip() {
        let img = ColorImage::from_fn(4, 2, |x, y| [x as u8, y as u8, 7]);
        let c = img
            .crop(CropRect {
                x: 1,
                y: 0,
                width: 2,
                height: 2,
            })
            .unwrap();
        assert_eq!(c.pixel(0, 1), [1, 1, 7]);
        let f = img.flip_horizontal();
        assert_eq!(f.pixel(0, 0), [3, 0, 7]);
    }

    #[test]
    fn tensor_normalization_maps_to_centered_range() {
        let mut img = ColorImage::new(2, 1);
        img.set_pixel(0, 0, [0, 128, 255]);
        let t: Tensor<f64> = img.to_tensor();
        assert_eq!(t.at(0, 0, 0, 0), -0.5);
        assert_eq!(t.at(0, 2, 0, 0), 0.5);
        assert!((t.at(0, 1, 0, 0) - (128.0 / 255.0 - 0.5)).abs() < 1e-12);
    }

    #[test]
    fn mask_round_trip_and_strictness() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.png");
        let mask = OcclusionMap {
            view: View::Left,
            grid: Grid::from_fn(5, 3, |x, y| (x + y) % 2 == 0),
        };
        save_mask(&mask, &path).unwrap();
        let back = load_mask(&path, View::Left).unwrap();
        assert_eq!(back.grid, mask.grid);

        // A gray pixel is not a valid mask value.
        let bad = image::GrayImage::from_pixel(2, 2, image::Luma([128u8]));
        let bad_path = dir.path().join("bad.png");
        bad.save(&bad_path).unwrap();
        let err = load_mask(&bad_path, View::Left).unwrap_err();
        assert!(matches!(err, Error::MaskFormat { value: 128, .. }));
    }

    #[test]
    fn sample_requires_matching_dimensions_and_views() {
        let img = ColorImage::new(8, 4);
        let bad = StereoSample::new(
            img.clone(),
            ColorImage::new(8, 6),
            flat_disp(View::Left, 8, 4, 1.0),
            flat_disp(View::Right, 8, 4, 1.0),
        );
        assert!(bad.is_err());
        let swapped = StereoSample::new(
            img.clone(),
            img.clone(),
            flat_disp(View::Right, 8, 4, 1.0),
            flat_disp(View::Left, 8, 4, 1.0),
        );
        assert!(swapped.is_err());
        let ok = StereoSample::new(
            img.clone(),
            img,
            flat_disp(View::Left, 8, 4, 1.0),
            flat_disp(View::Right, 8, 4, 1.0),
        );
        assert!(ok.is_ok());
    }
}
