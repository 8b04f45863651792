//! PFM ("portable float map") disparity I/O.
//!
//! Layout: the ASCII header is three whitespace-terminated tokens groups —
//! the type magic (`Pf` for single-channel; the 3-channel `PF` is rejected
//! for disparities), the dimensions `width height`, and a scale factor whose
//! *sign* encodes payload endianness (negative = little-endian). After the
//! single whitespace byte terminating the scale token comes the raw 32-bit
//! float payload, rows ordered **bottom to top**.
//!
//! Writers emit `-1.0` (little-endian) and reads honor both endiannesses;
//! the scale's magnitude carries no meaning here and is not preserved.
//! Round-trips are bit-exact for `f32` data.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{Grid, View};
use crate::lrc::DisparityMap;
use crate::scalar::Scalar;

fn pfm_err(msg: impl Into<String>) -> Error {
    Error::PfmFormat { msg: msg.into() }
}

/// Reads one whitespace-terminated token, consuming the terminator.
fn read_token(r: &mut impl Read) -> Result<String> {
    let mut buf = Vec::new();
    let mut byte = [0u8; 1];
    loop {
        if r.read(&mut byte)? == 0 {
            if buf.is_empty() {
                return Err(pfm_err("unexpected end of header"));
            }
            break;
        }
        if byte[0].is_ascii_whitespace() {
            if buf.is_empty() {
                continue; // skip leading whitespace between tokens
            }
            break;
        }
        buf.push(byte[0]);
        if buf.len() > 64 {
            return Err(pfm_err("header token longer than 64 bytes"));
        }
    }
    String::from_utf8(buf).map_err(|_| pfm_err("header is not ASCII"))
}

/// Parses a PFM stream into a top-origin grid.
pub fn read_pfm<T: Scalar>(r: &mut impl Read) -> Result<Grid<T>> {
    let magic = read_token(r)?;
    match magic.as_str() {
        "Pf" => {}
        "PF" => return Err(Error::PfmColorUnsupported),
        other => return Err(pfm_err(format!("bad magic {other:?}, expected \"Pf\""))),
    }
    let width: usize = read_token(r)?
        .parse()
        .map_err(|e| pfm_err(format!("bad width: {e}")))?;
    let height: usize = read_token(r)?
        .parse()
        .map_err(|e| pfm_err(format!("bad height: {e}")))?;
    if width == 0 || height == 0 {
        return Err(pfm_err(format!("degenerate dimensions {width}x{height}")));
    }
    let scale: f32 = read_token(r)?
        .parse()
        .map_err(|e| pfm_err(format!("bad scale: {e}")))?;
    if scale == 0.0 || !scale.is_finite() {
        return Err(pfm_err(format!(
            "scale must be finite and nonzero (its sign encodes endianness), got {scale}"
        )));
    }
    let little_endian = scale < 0.0;

    let count = width
        .checked_mul(height)
        .ok_or_else(|| pfm_err("dimensions overflow"))?;
    let mut payload = vec![0u8; count * 4];
    r.read_exact(&mut payload)
        .map_err(|_| pfm_err(format!("payload truncated: expected {} bytes", count * 4)))?;

    let mut grid = Grid::new(width, height, T::zero());
    for row in 0..height {
        // Payload rows run bottom to top.
        let y = height - 1 - row;
        for x in 0..width {
            let o = (row * width + x) * 4;
            let bytes = [payload[o], payload[o + 1], payload[o + 2], payload[o + 3]];
            let v = if little_endian {
                f32::from_le_bytes(bytes)
            } else {
                f32::from_be_bytes(bytes)
            };
            grid.set(x, y, T::from_f64(v as f64));
        }
    }
    Ok(grid)
}

/// Writes a top-origin grid as little-endian PFM (scale `-1.0`).
pub fn write_pfm<T: Scalar>(grid: &Grid<T>, w: &mut impl Write) -> Result<()> {
    write!(w, "Pf\n{} {}\n-1.0\n", grid.width(), grid.height())?;
    for row in 0..grid.height() {
        let y = grid.height() - 1 - row;
        for x in 0..grid.width() {
            let v = grid.get(x, y).to_f64() as f32;
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_pfm_path<T: Scalar>(path: &Path, view: View) -> Result<DisparityMap<T>> {
    let file = File::open(path).map_err(|e| Error::IoAt {
        path: path.to_path_buf(),
        source: e,
    })?;
    let grid = read_pfm(&mut BufReader::new(file))?;
    DisparityMap::new(view, grid)
}

pub fn write_pfm_path<T: Scalar>(map: &DisparityMap<T>, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::IoAt {
        path: path.to_path_buf(),
        source: e,
    })?;
    let mut w = BufWriter::new(file);
    write_pfm(&map.grid, &mut w)?;
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn round_trip_is_bit_exact() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let grid = Grid::from_fn(13, 7, |_, _| rng.random_range(-100.0f32..100.0) as f64);
        let mut buf = Vec::new();
        write_pfm(&grid, &mut buf).unwrap();
        let back: Grid<f64> = read_pfm(&mut buf.as_slice()).unwrap();
        assert_eq!(back.data(), grid.data());
    }

    #[test]
    fn golden_two_by_two_little_endian() {
        // Top-origin rows [[1,2],[3,4]] serialize bottom row first.
        let mut bytes = b"Pf\n2 2\n-1.0\n".to_vec();
        for v in [3.0f32, 4.0, 1.0, 2.0] {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        let grid: Grid<f32> = read_pfm(&mut bytes.as_slice()).unwrap();
        assert_eq!(grid.data(), &[1.0, 2.0, 3.0, 4.0]);

        let mut out = Vec::new();
        write_pfm(&grid, &mut out).unwrap();
        assert_eq!(out, bytes);
    }

    #[test]
    fn big_endian_payload_honored() {
        let mut bytes = b"Pf\n1 1\n1.0\n".to_vec();
        bytes.extend_from_slice(&42.5f32.to_be_bytes());
        let grid: Grid<f32> = read_pfm(&mut bytes.as_slice()).unwrap();
        assert_eq!(grid.get(0, 0), 42.5);
    }

    #[test]
    fn color_pfm_rejected() {
        let bytes = b"PF\n2 2\n-1.0\n".to_vec();
        let err = read_pfm::<f32>(&mut bytes.as_slice()).unwrap_err();
        assert!(matches!(err, Error::PfmColorUnsupported));
    }

    #[test]
    fn malformed_headers_rejected() {
        for bad in [
            &b"Px\n2 2\n-1.0\n"[..],
            &b"Pf\n2\n-1.0\n"[..],
            &b"Pf\n2 2\n0.0\n"[..],
            &b"Pf\n2 2\n"[..],
        ] {
            assert!(read_pfm::<f32>(&mut &bad[..]).is_err(), "{bad:?}");
        }
    }

    #[test]
    fn truncated_payload_rejected() {
        let mut bytes = b"Pf\n2 2\n-1.0\n".to_vec();
        bytes.extend_from_slice(&1.0f32.to_le_bytes());
        let err = read_pfm::<f32>(&mut bytes.as_slice()).unwrap_err();
        assert!(err.to_string().contains("truncated"));
    }

    #[test]
    fn path_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.pfm");
        let map = DisparityMap::new(View::Right, Grid::from_fn(5, 4, |x, y| (x * y) as f32)).unwrap();
        write_pfm_path(&map, &path).unwrap();
        let back: DisparityMap<f32> = read_pfm_path(&path, View::Right).unwrap();
        assert_eq!(back.grid.data(), map.grid.data());
        assert_eq!(back.view, View::Right);
    }
}
