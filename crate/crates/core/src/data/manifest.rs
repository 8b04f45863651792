//! Plain-text dataset index.
//!
//! A dataset directory holds, per sample id:
//!
//! ```text
//! {id}_left.png  {id}_right.png  {id}_left_disp.pfm  {id}_right_disp.pfm
//! {id}_left_occ.png  {id}_right_occ.png     (once labels are generated)
//! ```
//!
//! `manifest.txt` lists one sample per line — id followed by the six paths
//! (relative to the directory, `-` for a mask that does not exist yet) —
//! in lexicographic id order, so listings are deterministic. `#` lines are
//! comments.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::grid::View;
use crate::scalar::Scalar;

use super::pfm::{read_pfm_path, write_pfm_path};
use super::{load_mask, save_mask, ColorImage, StereoSample};

pub const MANIFEST_FILE: &str = "manifest.txt";

/// One sample's files, relative to the manifest's directory.
#[derive(Clone, Debug, PartialEq)]
pub struct ManifestEntry {
    pub id: String,
    pub left_image: PathBuf,
    pub right_image: PathBuf,
    pub left_disp: PathBuf,
    pub right_disp: PathBuf,
    pub left_occ: Option<PathBuf>,
    pub right_occ: Option<PathBuf>,
}

impl ManifestEntry {
    /// The conventional file set for a sample id.
    pub fn for_id(id: &str, with_masks: bool) -> ManifestEntry {
        let p = |suffix: &str| PathBuf::from(format!("{id}{suffix}"));
        ManifestEntry {
            id: id.to_string(),
            left_image: p("_left.png"),
            right_image: p("_right.png"),
            left_disp: p("_left_disp.pfm"),
            right_disp: p("_right_disp.pfm"),
            left_occ: with_masks.then(|| p("_left_occ.png")),
            right_occ: with_masks.then(|| p("_right_occ.png")),
        }
    }

    fn required(&self) -> [&PathBuf; 4] {
        [
            &self.left_image,
            &self.right_image,
            &self.left_disp,
            &self.right_disp,
        ]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Manifest {
    pub root: PathBuf,
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    /// Indexes a dataset directory by its files: every `*_left.png` starts a
    /// sample, whose image/disparity companions must exist; masks are
    /// optional. Entries come out sorted by id.
    pub fn scan(dir: &Path) -> Result<Manifest> {
        let mut ids = Vec::new();
        for entry in fs::read_dir(dir).map_err(|e| Error::IoAt {
            path: dir.to_path_buf(),
            source: e,
        })? {
            let name = entry?.file_name();
            let name = name.to_string_lossy();
            if let Some(id) = name.strip_suffix("_left.png") {
                if !id.is_empty() {
                    ids.push(id.to_string());
                }
            }
        }
        ids.sort();
        let mut entries = Vec::with_capacity(ids.len());
        for id in ids {
            let mut e = ManifestEntry::for_id(&id, true);
            for p in e.required() {
                if !dir.join(p).is_file() {
                    return Err(Error::MissingFile { path: dir.join(p) });
                }
            }
            if !dir.join(e.left_occ.as_ref().unwrap()).is_file() {
                e.left_occ = None;
            }
            if !dir.join(e.right_occ.as_ref().unwrap()).is_file() {
                e.right_occ = None;
            }
            entries.push(e);
        }
        Ok(Manifest {
            root: dir.to_path_buf(),
            entries,
        })
    }

    /// Parses `dir/manifest.txt` and verifies every referenced file exists.
    pub fn load(dir: &Path) -> Result<Manifest> {
        let path = dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).map_err(|e| Error::IoAt {
            path: path.clone(),
            source: e,
        })?;
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 7 {
                return Err(Error::ManifestFormat {
                    path: path.clone(),
                    line: i + 1,
                    msg: format!("expected 7 fields (id + 6 paths), got {}", fields.len()),
                });
            }
            let opt = |f: &str| (f != "-").then(|| PathBuf::from(f));
            let entry = ManifestEntry {
                id: fields[0].to_string(),
                left_image: PathBuf::from(fields[1]),
                right_image: PathBuf::from(fields[2]),
                left_disp: PathBuf::from(fields[3]),
                right_disp: PathBuf::from(fields[4]),
                left_occ: opt(fields[5]),
                right_occ: opt(fields[6]),
            };
            let mut referenced: Vec<&PathBuf> = entry.required().to_vec();
            referenced.extend(entry.left_occ.iter());
            referenced.extend(entry.right_occ.iter());
            for p in referenced {
                if !dir.join(p).is_file() {
                    return Err(Error::MissingFile { path: dir.join(p) });
                }
            }
            entries.push(entry);
        }
        Ok(Manifest {
            root: dir.to_path_buf(),
            entries,
        })
    }

    /// Writes `manifest.txt` under the manifest's root, sorted by id.
    pub fn save(&self) -> Result<()> {
        let mut sorted: Vec<&ManifestEntry> = self.entries.iter().collect();
        sorted.sort_by(|a, b| a.id.cmp(&b.id));
        let mut out = String::from("# id left_image right_image left_disp right_disp left_occ right_occ\n");
        for e in sorted {
            let opt = |p: &Option<PathBuf>| {
                p.as_ref()
                    .map(|p| p.display().to_string())
                    .unwrap_or_else(|| "-".into())
            };
            writeln!(
                out,
                "{} {} {} {} {} {} {}",
                e.id,
                e.left_image.display(),
                e.right_image.display(),
                e.left_disp.display(),
                e.right_disp.display(),
                opt(&e.left_occ),
                opt(&e.right_occ),
            )
            .expect("writing to String cannot fail");
        }
        let path = self.root.join(MANIFEST_FILE);
        fs::write(&path, out).map_err(|e| Error::IoAt {
            path,
            source: e,
        })
    }

    /// Loads one sample's images, disparities, and any masks.
    pub fn load_sample<T: Scalar>(&self, entry: &ManifestEntry) -> Result<StereoSample<T>> {
        let mut sample = StereoSample::new(
            ColorImage::load_png(&self.root.join(&entry.left_image))?,
            ColorImage::load_png(&self.root.join(&entry.right_image))?,
            read_pfm_path(&self.root.join(&entry.left_disp), View::Left)?,
            read_pfm_path(&self.root.join(&entry.right_disp), View::Right)?,
        )?;
        if let Some(p) = &entry.left_occ {
            sample.left_occ = Some(load_mask(&self.root.join(p), View::Left)?);
        }
        if let Some(p) = &entry.right_occ {
            sample.right_occ = Some(load_mask(&self.root.join(p), View::Right)?);
        }
        Ok(sample)
    }

    /// Writes one sample's files under `root` with the conventional names
    /// and returns its entry (which the caller appends and saves).
    pub fn write_sample<T: Scalar>(
        root: &Path,
        id: &str,
        sample: &StereoSample<T>,
    ) -> Result<ManifestEntry> {
        let has_masks = sample.left_occ.is_some() && sample.right_occ.is_some();
        let mut entry = ManifestEntry::for_id(id, has_masks);
        sample.left_image.save_png(&root.join(&entry.left_image))?;
        sample.right_image.save_png(&root.join(&entry.right_image))?;
        write_pfm_path(&sample.left_disp, &root.join(&entry.left_disp))?;
        write_pfm_path(&sample.right_disp, &root.join(&entry.right_disp))?;
        if let Some(m) = &sample.left_occ {
            entry.left_occ = Some(PathBuf::from(format!("{id}_left_occ.png")));
            save_mask(m, &root.join(entry.left_occ.as_ref().unwrap()))?;
        }
        if let Some(m) = &sample.right_occ {
            entry.right_occ = Some(PathBuf::from(format!("{id}_right_occ.png")));
            save_mask(m, &root.join(entry.right_occ.as_ref().unwrap()))?;
        }
        Ok(entry)
    }
}
