//! Flat row-major 2-D storage shared by disparity maps, occlusion masks,
//! probability maps, and rendered images. Row 0 is the top image row.

use crate::error::{Error, Result};

/// Which camera of the rectified pair a map belongs to.
///
/// Disparities are non-negative everywhere: the left view's pixel `(x, y)`
/// corresponds to `(x - d, y)` in the right view, and the right view's
/// `(x, y)` to `(x + d, y)` in the left view.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum View {
    Left,
    Right,
}

impl View {
    pub fn opposite(self) -> View {
        match self {
            View::Left => View::Right,
            View::Right => View::Left,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            View::Left => "left",
            View::Right => "right",
        }
    }
}

/// Axis-aligned crop window in pixel coordinates (top-left origin).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CropRect {
    pub x: usize,
    pub y: usize,
    pub width: usize,
    pub height: usize,
}

impl CropRect {
    pub fn full(width: usize, height: usize) -> CropRect {
        CropRect {
            x: 0,
            y: 0,
            width,
            height,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Grid<T> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

impl<T: Copy> Grid<T> {
    pub fn new(width: usize, height: usize, fill: T) -> Grid<T> {
        Grid {
            width,
            height,
            data: vec![fill; width * height],
        }
    }

    pub fn from_vec(width: usize, height: usize, data: Vec<T>) -> Result<Grid<T>> {
        if data.len() != width * height {
            return Err(Error::shape(
                "Grid::from_vec",
                format!("{} values for {width}x{height}", width * height),
                format!("{}", data.len()),
            ));
        }
        Ok(Grid {
            width,
            height,
            data,
        })
    }

    /// Builds a grid by evaluating `f(x, y)` at every pixel, row by row.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> T) -> Grid<T> {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Grid {
            width,
            height,
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> T {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: T) {
        self.data[y * self.width + x] = v;
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn crop(&self, r: CropRect) -> Result<Grid<T>> {
        if r.width == 0
            || r.height == 0
            || r.x + r.width > self.width
            || r.y + r.height > self.height
        {
            return Err(Error::CropOutOfBounds {
                x: r.x,
                y: r.y,
                width: r.width,
                height: r.height,
                src_width: self.width,
                src_height: self.height,
            });
        }
        Ok(Grid::from_fn(r.width, r.height, |x, y| {
            self.get(r.x + x, r.y + y)
        }))
    }

    /// Mirror around the vertical axis (used by the swapped-and-mirrored
    /// training mode, where a flipped right view plays the role of a left view).
    pub fn flip_horizontal(&self) -> Grid<T> {
        Grid::from_fn(self.width, self.height, |x, y| {
            self.get(self.width - 1 - x, y)
        })
    }

    pub fn count(&self, mut pred: impl FnMut(T) -> bool) -> usize {
        self.data.iter().filter(|&&v| pred(v)).count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_fn_is_row_major_top_origin() {
        let g = Grid::from_fn(3, 2, |x, y| (10 * y + x) as i32);
        assert_eq!(g.data(), &[0, 1, 2, 10, 11, 12]);
        assert_eq!(g.get(2, 1), 12);
    }

    #[test]
    fn crop_extracts_window() {
        let g = Grid::from_fn(4, 4, |x, y| (10 * y + x) as i32);
        let c = g
            .crop(CropRect {
                x: 1,
                y: 2,
                width: 2,
                height: 2,
            })
            .unwrap();
        assert_eq!(c.data(), &[21, 22, 31, 32]);
    }

    #[test]
    fn crop_out_of_bounds_rejected() {
        let g = Grid::new(4, 4, 0i32);
        let r = CropRect {
            x: 3,
            y: 0,
            width: 2,
            height: 2,
        };
        assert!(g.crop(r).is_err());
    }

    #[test]
    fn flip_horizontal_mirrors_rows() {
        let g = Grid::from_fn(3, 1, |x, _| x as i32);
        assert_eq!(g.flip_horizontal().data(), &[2, 1, 0]);
    }
}
