//! Synthetic stereo scene generator with a brute-force visibility oracle.
//!
//! Scenes are a constant-disparity background plus fronto-parallel
//! rectangles and ellipses, each at its own constant disparity. Geometry is
//! expressed in **left-view coordinates**, which double as world
//! coordinates: a surface point at left column `x` appears in the right view
//! at column `x - d`. Rendering uses a z-buffer — at every pixel the surface
//! with the largest disparity (nearest) wins.
//!
//! Textures are sampled at *world* coordinates, so a surface point keeps its
//! color across views; seeded per-surface noise gives the matcher real
//! correspondence cues (flat colors make the learning problem degenerate).
//!
//! The oracle labels a pixel occluded by exact geometric visibility: its
//! true correspondence either leaves the other view's frame or is covered
//! there by a strictly nearer surface. This is independent of the
//! disparity-consistency labeling in [`crate::lrc`] and serves as its
//! ground truth.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::{Grid, View};
use crate::lrc::{DisparityMap, OcclusionMap};
use crate::scalar::Scalar;

use super::{ColorImage, StereoSample};

/// Fronto-parallel surface footprint in left-view (world) coordinates,
/// evaluated at pixel centers (integer coordinates).
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Geometry {
    /// Half-open box `[x, x + width) x [y, y + height)`.
    Rect { x: f64, y: f64, width: f64, height: f64 },
    /// Filled ellipse `((px-cx)/rx)^2 + ((py-cy)/ry)^2 <= 1`.
    Ellipse { cx: f64, cy: f64, rx: f64, ry: f64 },
}

impl Geometry {
    pub fn contains(&self, px: f64, py: f64) -> bool {
        match *self {
            Geometry::Rect { x, y, width, height } => {
                px >= x && px < x + width && py >= y && py < y + height
            }
            Geometry::Ellipse { cx, cy, rx, ry } => {
                let dx = (px - cx) / rx;
                let dy = (py - cy) / ry;
                dx * dx + dy * dy <= 1.0
            }
        }
    }

    /// Axis-aligned bounds `(x0, y0, x1, y1)`, used for the conservative
    /// equal-disparity overlap rejection.
    fn bbox(&self) -> (f64, f64, f64, f64) {
        match *self {
            Geometry::Rect { x, y, width, height } => (x, y, x + width, y + height),
            Geometry::Ellipse { cx, cy, rx, ry } => (cx - rx, cy - ry, cx + rx, cy + ry),
        }
    }
}

/// Per-surface coloring. Noise offsets are a deterministic hash of the
/// world-lattice coordinate, the surface index, and the scene seed.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Texture {
    Flat([u8; 3]),
    Noise { base: [u8; 3], amplitude: u8 },
}

impl Texture {
    fn sample(&self, seed: u64, surface: u64, world_x: f64, y: usize) -> [u8; 3] {
        match *self {
            Texture::Flat(c) => c,
            Texture::Noise { base, amplitude } => {
                if amplitude == 0 {
                    return base;
                }
                let h = lattice_hash(seed, surface, world_x.round() as i64, y as i64);
                let span = 2 * amplitude as i64 + 1;
                let mut out = [0u8; 3];
                for (ch, o) in out.iter_mut().enumerate() {
                    let byte = ((h >> (16 * ch)) & 0xFFFF) as i64;
                    let offset = byte % span - amplitude as i64;
                    *o = (base[ch] as i64 + offset).clamp(0, 255) as u8;
                }
                out
            }
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E3779B97F4A7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

fn lattice_hash(seed: u64, surface: u64, x: i64, y: i64) -> u64 {
    let mut h = splitmix64(seed);
    h = splitmix64(h ^ surface.wrapping_mul(0xA24BAED4963EE407));
    h = splitmix64(h ^ (x as u64).wrapping_mul(0x9FB21C651E98DF25));
    splitmix64(h ^ y as u64)
}

/// One foreground surface.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ShapeSpec {
    pub geometry: Geometry,
    pub disparity: f64,
    pub texture: Texture,
}

/// Full description of a synthetic scene; rendering is deterministic in it.
#[derive(Clone, Debug, PartialEq)]
pub struct SceneSpec {
    pub seed: u64,
    pub width: usize,
    pub height: usize,
    pub background_disparity: f64,
    pub background_texture: Texture,
    pub shapes: Vec<ShapeSpec>,
}

/// Rendered scene: the stereo sample (labels not yet generated) plus the
/// geometric-visibility occlusion maps.
#[derive(Clone, Debug)]
pub struct SynthScene<T> {
    pub sample: StereoSample<T>,
    pub oracle_left: OcclusionMap,
    pub oracle_right: OcclusionMap,
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        if self.width < 2 || self.height < 1 {
            return Err(Error::SceneInvalid {
                msg: format!("image {}x{} too small", self.width, self.height),
            });
        }
        let limit = self.width as f64 / 2.0;
        let mut disparities = vec![(self.background_disparity, "background".to_string())];
        for (i, s) in self.shapes.iter().enumerate() {
            disparities.push((s.disparity, format!("shape {i}")));
        }
        for (d, who) in &disparities {
            if !d.is_finite() || *d < 0.0 || *d >= limit {
                return Err(Error::SceneInvalid {
                    msg: format!("{who} disparity {d} outside [0, {limit}) for width {}", self.width),
                });
            }
        }
        // Equal disparities are ambiguous under a z-buffer wherever surfaces
        // overlap. The background overlaps everything; shape pairs are
        // checked conservatively by bounding box.
        for (i, s) in self.shapes.iter().enumerate() {
            if s.disparity == self.background_disparity {
                return Err(Error::SceneAmbiguous {
                    first: i,
                    second: usize::MAX,
                    disparity: s.disparity,
                });
            }
            for (j, t) in self.shapes.iter().enumerate().skip(i + 1) {
                if s.disparity == t.disparity {
                    let a = s.geometry.bbox();
                    let b = t.geometry.bbox();
                    let overlap = a.0 < b.2 && b.0 < a.2 && a.1 < b.3 && b.1 < a.3;
                    if overlap {
                        return Err(Error::SceneAmbiguous {
                            first: i,
                            second: j,
                            disparity: s.disparity,
                        });
                    }
                }
            }
        }
        Ok(())
    }

    /// Nearest surface covering the given view pixel: `(disparity, surface)`
    /// where `shapes.len()` denotes the background. A shape covers a right
    /// pixel `x` where its footprint shifted by its own disparity does.
    fn winner(&self, view: View, x: usize, y: usize) -> (f64, usize) {
        let mut best = (self.background_disparity, self.shapes.len());
        for (i, s) in self.shapes.iter().enumerate() {
            let wx = match view {
                View::Left => x as f64,
                View::Right => x as f64 + s.disparity,
            };
            if s.geometry.contains(wx, y as f64) && s.disparity > best.0 {
                best = (s.disparity, i);
            }
        }
        best
    }

    fn texture_of(&self, surface: usize) -> &Texture {
        if surface == self.shapes.len() {
            &self.background_texture
        } else {
            &self.shapes[surface].texture
        }
    }

    /// Is the world point at the other-view column `ox` covered there by a
    /// surface strictly nearer than disparity `d`?
    fn covered_by_nearer(&self, view: View, ox: f64, y: usize, d: f64) -> bool {
        self.shapes.iter().any(|s| {
            if s.disparity <= d {
                return false;
            }
            let wx = match view {
                // Checking visibility *in* the right view: its pixels show
                // world column ox + disparity.
                View::Right => ox + s.disparity,
                View::Left => ox,
            };
            s.geometry.contains(wx, y as f64)
        })
    }

    /// A mirrored copy of the scene about the vertical axis. Mirroring swaps
    /// the roles of the two views, so the mirrored scene's right-view
    /// occlusion is the horizontal flip of the original left-view occlusion
    /// (and vice versa). Textures are re-hashed, but geometry is exact.
    pub fn mirrored(&self) -> SceneSpec {
        let w = self.width as f64;
        let shapes = self
            .shapes
            .iter()
            .map(|s| {
                let geometry = match s.geometry {
                    // The mirror maps pixel center u to (W-1) - u and view
                    // roles swap, so the new left footprint is the mirror of
                    // the old right footprint (old left shifted by -d).
                    Geometry::Rect { x, y, width, height } => Geometry::Rect {
                        x: w - x - width + s.disparity,
                        y,
                        width,
                        height,
                    },
                    Geometry::Ellipse { cx, cy, rx, ry } => Geometry::Ellipse {
                        cx: (w - 1.0) - (cx - s.disparity),
                        cy,
                        rx,
                        ry,
                    },
                };
                ShapeSpec { geometry, ..*s }
            })
            .collect();
        SceneSpec {
            shapes,
            ..self.clone()
        }
    }

    /// Draws a random valid scene: 2-4 shapes over a textured background,
    /// all disparities distinct even integers (so consistency labeling and
    /// geometric visibility coincide away from discontinuities and the
    /// occlusion bands have exact integer widths).
    pub fn random(seed: u64, width: usize, height: usize) -> SceneSpec {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let background_disparity = 2.0 * rng.random_range(1..=2) as f64;
        let max_d = ((width / 2 - 1) as f64).min(background_disparity + 28.0);
        let mut candidates: Vec<f64> = Vec::new();
        let mut d = background_disparity + 2.0;
        while d <= max_d {
            candidates.push(d);
            d += 2.0;
        }
        candidates.shuffle(&mut rng);
        let n = rng.random_range(2..=4.min(candidates.len()));

        let noise = |rng: &mut ChaCha8Rng| Texture::Noise {
            base: [
                rng.random_range(60..=200),
                rng.random_range(60..=200),
                rng.random_range(60..=200),
            ],
            amplitude: 45,
        };

        let background_texture = noise(&mut rng);
        let shapes = candidates[..n]
            .iter()
            .map(|&disparity| {
                let sw = rng.random_range(width / 6..=width / 3) as f64;
                let sh = rng.random_range(height / 6..=height / 3) as f64;
                let x = rng.random_range(0..=(width as f64 - sw) as usize) as f64;
                let y = rng.random_range(0..=(height as f64 - sh) as usize) as f64;
                let geometry = if rng.random_bool(0.5) {
                    Geometry::Rect {
                        x,
                        y,
                        width: sw,
                        height: sh,
                    }
                } else {
                    Geometry::Ellipse {
                        cx: x + sw / 2.0,
                        cy: y + sh / 2.0,
                        rx: sw / 2.0,
                        ry: sh / 2.0,
                    }
                };
                ShapeSpec {
                    geometry,
                    disparity,
                    texture: noise(&mut rng),
                }
            })
            .collect();

        SceneSpec {
            seed,
            width,
            height,
            background_disparity,
            background_texture,
            shapes,
        }
    }
}

/// Renders a scene and computes its exact-visibility occlusion maps.
pub fn synth_scene<T: Scalar>(spec: &SceneSpec) -> Result<SynthScene<T>> {
    spec.validate()?;
    let (w, h) = (spec.width, spec.height);
    let bg = spec.shapes.len() as u64;

    let mut left_image = ColorImage::new(w, h);
    let mut right_image = ColorImage::new(w, h);
    let mut left_disp = Grid::new(w, h, T::zero());
    let mut right_disp = Grid::new(w, h, T::zero());
    let mut oracle_left = Grid::new(w, h, false);
    let mut oracle_right = Grid::new(w, h, false);
    let frame_max = (w - 1) as f64;

    for y in 0..h {
        for x in 0..w {
            let (dl, sl) = spec.winner(View::Left, x, y);
            left_disp.set(x, y, T::from_f64(dl));
            let surf = if sl == spec.shapes.len() { bg } else { sl as u64 };
            left_image.set_pixel(x, y, spec.texture_of(sl).sample(spec.seed, surf, x as f64, y));
            // The left pixel's correspondence sits at right column x - d.
            let ox = x as f64 - dl;
            let occ = !(0.0..=frame_max).contains(&ox)
                || spec.covered_by_nearer(View::Right, ox, y, dl);
            oracle_left.set(x, y, occ);

            let (dr, sr) = spec.winner(View::Right, x, y);
            right_disp.set(x, y, T::from_f64(dr));
            let surf = if sr == spec.shapes.len() { bg } else { sr as u64 };
            right_image.set_pixel(
                x,
                y,
                spec.texture_of(sr).sample(spec.seed, surf, x as f64 + dr, y),
            );
            let ox = x as f64 + dr;
            let occ = !(0.0..=frame_max).contains(&ox)
                || spec.covered_by_nearer(View::Left, ox, y, dr);
            oracle_right.set(x, y, occ);
        }
    }

    let sample = StereoSample::new(
        left_image,
        right_image,
        DisparityMap::new(View::Left, left_disp)?,
        DisparityMap::new(View::Right, right_disp)?,
    )?;
    Ok(SynthScene {
        sample,
        oracle_left: OcclusionMap {
            view: View::Left,
            grid: oracle_left,
        },
        oracle_right: OcclusionMap {
            view: View::Right,
            grid: oracle_right,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bare_scene(w: usize, h: usize, bg: f64, shapes: Vec<ShapeSpec>) -> SceneSpec {
        SceneSpec {
            seed: 1,
            width: w,
            height: h,
            background_disparity: bg,
            background_texture: Texture::Flat([10, 10, 10]),
            shapes,
        }
    }

    fn rect(x: f64, y: f64, width: f64, height: f64, disparity: f64) -> ShapeSpec {
        ShapeSpec {
            geometry: Geometry::Rect { x, y, width, height },
            disparity,
            texture: Texture::Flat([200, 50, 50]),
        }
    }

    #[test]
    fn background_only_band() {
        // Only the left view's leftmost d columns (no in-frame match) are
        // occluded; mirrored for the right view.
        let scene = synth_scene::<f64>(&bare_scene(20, 4, 3.0, vec![])).unwrap();
        for y in 0..4 {
            for x in 0..20 {
                assert_eq!(scene.oracle_left.grid.get(x, y), x < 3, "left ({x},{y})");
                assert_eq!(scene.oracle_right.grid.get(x, y), x >= 17, "right ({x},{y})");
            }
        }
    }

    #[test]
    fn near_rectangle_band_width_is_disparity_difference() {
        // Rect at columns [20, 30) with d_n = 7 over background d_b = 2:
        // occluded background band is x in [20 - 5, 20) on the rect's rows.
        let spec = bare_scene(64, 10, 2.0, vec![rect(20.0, 2.0, 10.0, 5.0, 7.0)]);
        let scene = synth_scene::<f64>(&spec).unwrap();
        for y in 0..10 {
            for x in 2..64 {
                // skip the out-of-frame band (x < 2)
                let in_band = (15..20).contains(&x) && (2..7).contains(&y);
                assert_eq!(
                    scene.oracle_left.grid.get(x, y),
                    in_band,
                    "left ({x},{y})"
                );
            }
        }
        // The rectangle itself and everything right of it stay visible.
        assert!(!scene.oracle_left.grid.get(20, 4));
        assert!(!scene.oracle_left.grid.get(35, 4));
    }

    #[test]
    fn z_buffer_prefers_larger_disparity() {
        let spec = bare_scene(
            32,
            8,
            1.0,
            vec![rect(4.0, 0.0, 20.0, 8.0, 3.0), rect(10.0, 0.0, 6.0, 8.0, 9.0)],
        );
        let scene = synth_scene::<f64>(&spec).unwrap();
        assert_eq!(scene.sample.left_disp.grid.get(12, 3), 9.0);
        assert_eq!(scene.sample.left_disp.grid.get(5, 3), 3.0);
        assert_eq!(scene.sample.left_disp.grid.get(30, 3), 1.0);
    }

    #[test]
    fn right_view_footprint_shifts_left() {
        let spec = bare_scene(32, 4, 1.0, vec![rect(10.0, 0.0, 5.0, 4.0, 4.0)]);
        let scene = synth_scene::<f64>(&spec).unwrap();
        // Left footprint [10,15); right footprint [6,11).
        assert_eq!(scene.sample.right_disp.grid.get(6, 1), 4.0);
        assert_eq!(scene.sample.right_disp.grid.get(10, 1), 4.0);
        assert_eq!(scene.sample.right_disp.grid.get(11, 1), 1.0);
        assert_eq!(scene.sample.left_disp.grid.get(6, 1), 1.0);
    }

    #[test]
    fn matching_texture_across_views() {
        // A visible surface point keeps its color: left (x,y) == right (x-d,y).
        let mut spec = SceneSpec::random(42, 64, 32);
        spec.background_texture = Texture::Noise {
            base: [120, 130, 140],
            amplitude: 45,
        };
        let scene = synth_scene::<f64>(&spec).unwrap();
        let d = spec.background_disparity as usize;
        for x in 40..50 {
            let y = 0; // top rows of random scenes are usually background
            if scene.sample.left_disp.grid.get(x, y).to_f64() == spec.background_disparity
                && !scene.oracle_left.grid.get(x, y)
            {
                assert_eq!(
                    scene.sample.left_image.pixel(x, y),
                    scene.sample.right_image.pixel(x - d, y),
                    "world point ({x},{y})"
                );
            }
        }
    }

    #[test]
    fn equal_disparity_overlap_rejected() {
        let spec = bare_scene(
            64,
            16,
            1.0,
            vec![rect(4.0, 0.0, 20.0, 8.0, 5.0), rect(10.0, 2.0, 6.0, 8.0, 5.0)],
        );
        assert!(matches!(
            synth_scene::<f64>(&spec),
            Err(Error::SceneAmbiguous { .. })
        ));
        // Same disparity as the background is equally ambiguous.
        let spec = bare_scene(64, 16, 5.0, vec![rect(4.0, 0.0, 8.0, 8.0, 5.0)]);
        assert!(synth_scene::<f64>(&spec).is_err());
    }

    #[test]
    fn disparity_limit_enforced() {
        let spec = bare_scene(20, 4, 10.0, vec![]);
        assert!(matches!(
            synth_scene::<f64>(&spec),
            Err(Error::SceneInvalid { .. })
        ));
    }

    #[test]
    fn deterministic_in_seed() {
        let a = SceneSpec::random(7, 128, 64);
        let b = SceneSpec::random(7, 128, 64);
        assert_eq!(a, b);
        let sa = synth_scene::<f32>(&a).unwrap();
        let sb = synth_scene::<f32>(&b).unwrap();
        assert_eq!(sa.sample.left_image, sb.sample.left_image);
        assert_eq!(sa.sample.right_disp.grid.data(), sb.sample.right_disp.grid.data());
        assert_ne!(
            SceneSpec::random(8, 128, 64),
            a,
            "different seeds should differ"
        );
    }

    #[test]
    fn mirrored_scene_swaps_occlusion_roles() {
        let spec = SceneSpec::random(3, 96, 48);
        let orig = synth_scene::<f64>(&spec).unwrap();
        let mirror = synth_scene::<f64>(&spec.mirrored()).unwrap();
        assert_eq!(
            mirror.oracle_right.grid,
            orig.oracle_left.flip_horizontal().grid
        );
        assert_eq!(
            mirror.oracle_left.grid,
            orig.oracle_right.flip_horizontal().grid
        );
    }
}
