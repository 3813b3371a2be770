//! Dataset JSON (`{"records": [...]}`) and the per-record map files that
//! sit next to it.
//!
//! Map files live in one directory, named after the record:
//! `<id>.intent.pgm`, `<id>.saliency.pgm` and `<id>.embed.json`. Inline
//! values in the dataset win over files. Relative `image_path` and
//! `saliency_path` values resolve against the dataset file's directory.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use postree_core::{DatasetRecord, GrayMap};
use serde::{Deserialize, Serialize};

use crate::{embed, fsio, pgm, Error};

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct DatasetFile {
    pub records: Vec<DatasetRecord>,
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub path: PathBuf,
    pub records: Vec<DatasetRecord>,
}

fn invalid(path: &Path, message: String) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        message,
    }
}

/// Record ids name output files, so they are restricted to
/// `[A-Za-z0-9_.-]` and may not start with a dot.
pub fn id_is_safe(id: &str) -> bool {
    !id.is_empty()
        && !id.starts_with('.')
        && id.bytes().all(|b| b.is_ascii_alphanumeric() || matches!(b, b'_' | b'-' | b'.'))
}

impl Dataset {
    pub fn load(path: &Path) -> Result<Self, Error> {
        let file: DatasetFile = fsio::read_json(path)?;
        let records = file.records;
        let mut seen = BTreeSet::new();
        for r in &records {
            if !id_is_safe(&r.record_id) {
                return Err(invalid(path, format!("record_id `{}` is not usable as a file name", r.record_id)));
            }
            if !seen.insert(r.record_id.as_str()) {
                return Err(invalid(path, format!("duplicate record_id `{}`", r.record_id)));
            }
            if r.canvas.width == 0 || r.canvas.height == 0 {
                return Err(invalid(path, format!("record {}: empty canvas", r.record_id)));
            }
            for (i, e) in r.elements.iter().enumerate() {
                e.shape
                    .validate()
                    .map_err(|err| invalid(path, format!("record {} element {i}: {err}", r.record_id)))?;
            }
            if let Some(p) = r.intent.polygons.iter().find(|p| p.0.len() < 3) {
                return Err(invalid(
                    path,
                    format!("record {}: intent polygon with {} vertices", r.record_id, p.0.len()),
                ));
            }
        }
        Ok(Self {
            path: path.to_path_buf(),
            records,
        })
    }

    pub fn base_dir(&self) -> &Path {
        self.path.parent().unwrap_or(Path::new("."))
    }

    pub fn resolve(&self, p: &str) -> PathBuf {
        let p = Path::new(p);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir().join(p)
        }
    }

    pub fn get(&self, record_id: &str) -> Option<&DatasetRecord> {
        self.records.iter().find(|r| r.record_id == record_id)
    }
}

/// Directory of per-record map files; `None` means no files at all.
#[derive(Debug, Clone, Default)]
pub struct MapsDir(pub Option<PathBuf>);

impl MapsDir {
    fn file(&self, record_id: &str, suffix: &str) -> Option<PathBuf> {
        let p = self.0.as_ref()?.join(format!("{record_id}.{suffix}"));
        p.is_file().then_some(p)
    }

    pub fn intent_map(&self, record_id: &str) -> Result<Option<GrayMap>, Error> {
        self.file(record_id, "intent.pgm").map(|p| pgm::read(&p)).transpose()
    }

    pub fn embedding(&self, record_id: &str) -> Result<Option<Vec<f64>>, Error> {
        self.file(record_id, "embed.json").map(|p| embed::read(&p)).transpose()
    }

    /// The record's own `saliency_path` first, then the maps directory.
    pub fn saliency(&self, ds: &Dataset, record: &DatasetRecord) -> Result<Option<GrayMap>, Error> {
        if let Some(p) = &record.saliency_path {
            return pgm::read(&ds.resolve(p)).map(Some);
        }
        self.file(&record.record_id, "saliency.pgm").map(|p| pgm::read(&p)).transpose()
    }

    /// Fills in intent maps and embeddings the dataset does not carry inline.
    pub fn attach(&self, records: &mut [DatasetRecord]) -> Result<(), Error> {
        for r in records {
            if r.intent.map.is_none() {
                r.intent.map = self.intent_map(&r.record_id)?;
            }
            if r.intent.embedding.is_none() {
                r.intent.embedding = self.embedding(&r.record_id)?;
            }
        }
        Ok(())
    }
}

/// Luma of the poster image in `[0, 1]`.
pub fn load_image_gray(path: &Path) -> Result<GrayMap, Error> {
    let img = image::open(path).map_err(|e| invalid(path, e.to_string()))?.to_luma8();
    let (w, h) = img.dimensions();
    let values = img.into_raw().into_iter().map(|v| v as f32 / 255.0).collect();
    GrayMap::new(w, h, values).map_err(|e| invalid(path, e.to_string()))
}

pub fn image_gray(ds: &Dataset, record: &DatasetRecord) -> Result<Option<GrayMap>, Error> {
    record
        .image_path
        .as_deref()
        .map(|p| load_image_gray(&ds.resolve(p)))
        .transpose()
}
