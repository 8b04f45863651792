//! Self-describing binary checkpoint container.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic   8 bytes  b"SYMMCKPT"
//! version u32      currently 1
//! variant u32 len + UTF-8 bytes
//! channel_scale f64
//! seed    u64
//! count   u32      number of parameter tensors
//! count * [ name: u32 len + UTF-8, dims: 4 x u32, data: prod(dims) x f64 ]
//! adam    u8       0 = absent, 1 = present
//! if present: step u64, then count * [ m: n x f64, v: n x f64 ]
//! ```
//!
//! Parameters are stored as raw 64-bit floats regardless of the training
//! scalar type, so `f64` state round-trips bit-exactly and `f32` state
//! round-trips exactly through the widening. Every decode error carries the
//! byte offset where parsing stopped.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"SYMMCKPT";
pub const VERSION: u32 = 1;

/// Hard cap on parameter tensors per file; a sanity bound against garbage
/// counts, far above any variant's 50 (25 layers x weight+bias).
const MAX_PARAMS: u32 = 10_000;
const MAX_NAME: u32 = 4_096;

#[derive(Clone, Debug, PartialEq)]
pub struct NamedTensor {
    pub name: String,
    pub dims: [usize; 4],
    pub data: Vec<f64>,
}

/// Optimizer state snapshot, aligned index-for-index with `params`.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamSnapshot {
    pub step: u64,
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub variant: String,
    pub channel_scale: f64,
    pub seed: u64,
    pub params: Vec<NamedTensor>,
    pub adam: Option<AdamSnapshot>,
}

struct ByteReader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    fn err(&self, msg: impl Into<String>) -> Error {
        Error::CheckpointFormat {
            offset: self.pos,
            msg: msg.into(),
        }
    }

    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(self.err(format!(
                "{what}: need {n} bytes, only {} remain",
                self.buf.len() - self.pos
            )));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn f64(&mut self, what: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn f64_vec(&mut self, n: usize, what: &str) -> Result<Vec<f64>> {
        let raw = self.take(n * 8, what)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    fn string(&mut self, what: &str) -> Result<String> {
        let len = self.u32(what)?;
        if len > MAX_NAME {
            return Err(self.err(format!("{what}: length {len} exceeds limit {MAX_NAME}")));
        }
        let raw = self.take(len as usize, what)?;
        String::from_utf8(raw.to_vec()).map_err(|_| self.err(format!("{what}: invalid UTF-8")))
    }
}

impl Checkpoint {
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.variant.len() as u32).to_le_bytes());
        out.extend_from_slice(self.variant.as_bytes());
        out.extend_from_slice(&self.channel_scale.to_le_bytes());
        out.extend_from_slice(&self.seed.to_le_bytes());
        out.extend_from_slice(&(self.params.len() as u32).to_le_bytes());
        for p in &self.params {
            out.extend_from_slice(&(p.name.len() as u32).to_le_bytes());
            out.extend_from_slice(p.name.as_bytes());
            for d in p.dims {
                out.extend_from_slice(&(d as u32).to_le_bytes());
            }
            for v in &p.data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        match &self.adam {
            None => out.push(0),
            Some(a) => {
                out.push(1);
                out.extend_from_slice(&a.step.to_le_bytes());
                for (m, v) in a.m.iter().zip(&a.v) {
                    for x in m {
                        out.extend_from_slice(&x.to_le_bytes());
                    }
                    for x in v {
                        out.extend_from_slice(&x.to_le_bytes());
                    }
                }
            }
        }
        out
    }

    pub fn decode(buf: &[u8]) -> Result<Checkpoint> {
        let mut r = ByteReader { buf, pos: 0 };
        let magic = r.take(8, "magic")?;
        if magic != MAGIC {
            return Err(Error::CheckpointFormat {
                offset: 0,
                msg: format!("bad magic {magic:?}, expected {MAGIC:?}"),
            });
        }
        let version = r.u32("version")?;
        if version != VERSION {
            return Err(r.err(format!("unsupported version {version}, expected {VERSION}")));
        }
        let variant = r.string("variant name")?;
        let channel_scale = r.f64("channel_scale")?;
        if !channel_scale.is_finite() || channel_scale <= 0.0 {
            return Err(r.err(format!("channel_scale must be positive, got {channel_scale}")));
        }
        let seed = r.u64("seed")?;
        let count = r.u32("parameter count")?;
        if count > MAX_PARAMS {
            return Err(r.err(format!("parameter count {count} exceeds limit {MAX_PARAMS}")));
        }
        let mut params = Vec::with_capacity(count as usize);
        for i in 0..count {
            let name = r.string(&format!("parameter {i} name"))?;
            let mut dims = [0usize; 4];
            for d in &mut dims {
                *d = r.u32(&format!("parameter {name} dims"))? as usize;
            }
            let n = dims
                .iter()
                .try_fold(1usize, |a, &d| a.checked_mul(d))
                .filter(|&n| n <= (1 << 28))
                .ok_or_else(|| r.err(format!("parameter {name}: dims {dims:?} overflow")))?;
            let data = r.f64_vec(n, &format!("parameter {name} data"))?;
            params.push(NamedTensor { name, dims, data });
        }
        let adam = match r.u8("adam flag")? {
            0 => None,
            1 => {
                let step = r.u64("adam step")?;
                let mut m = Vec::with_capacity(params.len());
                let mut v = Vec::with_capacity(params.len());
                for p in &params {
                    m.push(r.f64_vec(p.data.len(), &format!("adam m for {}", p.name))?);
                    v.push(r.f64_vec(p.data.len(), &format!("adam v for {}", p.name))?);
                }
                Some(AdamSnapshot { step, m, v })
            }
            other => return Err(r.err(format!("adam flag must be 0 or 1, got {other}"))),
        };
        if r.pos != buf.len() {
            return Err(r.err(format!("{} trailing bytes after checkpoint", buf.len() - r.pos)));
        }
        Ok(Checkpoint {
            variant,
            channel_scale,
            seed,
            params,
            adam,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut file = File::create(path).map_err(|e| Error::IoAt {
            path: path.to_path_buf(),
            source: e,
        })?;
        file.write_all(&self.encode()).map_err(|e| Error::IoAt {
            path: path.to_path_buf(),
            source: e,
        })?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Checkpoint> {
        let mut buf = Vec::new();
        File::open(path)
            .and_then(|mut f| f.read_to_end(&mut buf))
            .map_err(|e| Error::IoAt {
                path: path.to_path_buf(),
                source: e,
            })?;
        Checkpoint::decode(&buf)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_checkpoint() -> Checkpoint {
        Checkpoint {
            variant: "symmnet".into(),
            channel_scale: 0.125,
            seed: 99,
            params: vec![
                NamedTensor {
                    name: "conv1.weight".into(),
                    dims: [2, 3, 1, 1],
                    data: vec![0.5, -1.25, 3.0, 0.0, 2.5e-3, -7.0],
                },
                NamedTensor {
                    name: "conv1.bias".into(),
                    dims: [1, 2, 1, 1],
                    data: vec![0.1, -0.2],
                },
            ],
            adam: Some(AdamSnapshot {
                step: 17,
                m: vec![vec![1.0; 6], vec![2.0; 2]],
                v: vec![vec![3.0; 6], vec![4.0; 2]],
            }),
        }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let ckpt = sample_checkpoint();
        let bytes = ckpt.encode();
        let back = Checkpoint::decode(&bytes).unwrap();
        assert_eq!(back, ckpt);
        // And through a file.
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.ckpt");
        ckpt.save(&path).unwrap();
        assert_eq!(Checkpoint::load(&path).unwrap(), ckpt);
    }

    #[test]
    fn round_trip_without_optimizer_state() {
        let mut ckpt = sample_checkpoint();
        ckpt.adam = None;
        assert_eq!(Checkpoint::decode(&ckpt.encode()).unwrap(), ckpt);
    }

    #[test]
    fn truncation_reports_position() {
        let bytes = sample_checkpoint().encode();
        for cut in [3, 8, 11, 13, 30, bytes.len() - 1] {
            let err = Checkpoint::decode(&bytes[..cut]).unwrap_err();
            match err {
                Error::CheckpointFormat { offset, .. } => assert!(offset <= cut, "cut {cut}"),
                other => panic!("expected format error, got {other}"),
            }
        }
    }

    #[test]
    fn bad_magic_and_version_rejected() {
        let mut bytes = sample_checkpoint().encode();
        bytes[0] = b'X';
        assert!(Checkpoint::decode(&bytes).is_err());
        let mut bytes = sample_checkpoint().encode();
        bytes[8] = 2; // version
        let err = Checkpoint::decode(&bytes).unwrap_err();
        assert!(err.to_string().contains("version"));
    }

    #[test]
    fn trailing_bytes_rejected() {
        let mut bytes = sample_checkpoint().encode();
        bytes.push(0);
        let err = Checkpoint::decode(&bytes).unwrap_err();
        assert!(err.to_string().contains("trailing"));
    }
}
