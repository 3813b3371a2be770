//! `<record_id>.embed.json`: `{"dim": n, "values": [...]}`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{fsio, Error};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbeddingFile {
    pub dim: usize,
    pub values: Vec<f64>,
}

impl EmbeddingFile {
    pub fn new(values: Vec<f64>) -> Self {
        Self {
            dim: values.len(),
            values,
        }
    }

    pub fn check(&self) -> Result<(), String> {
        if self.dim != self.values.len() {
            return Err(format!("dim {} but {} values", self.dim, self.values.len()));
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err("non-finite value".into());
        }
        Ok(())
    }
}

pub fn parse(text: &str) -> Result<Vec<f64>, String> {
    let f: EmbeddingFile = serde_json::from_str(text).map_err(|e| e.to_string())?;
    f.check()?;
    Ok(f.values)
}

pub fn read(path: &Path) -> Result<Vec<f64>, Error> {
    parse(&fsio::read_to_string(path)?).map_err(|message| Error::Parse {
        path: path.display().to_string(),
        message,
    })
}

pub fn write(path: &Path, values: &[f64]) -> Result<(), Error> {
    fsio::write_json(path, &EmbeddingFile::new(values.to_vec()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_and_checks_length() {
        assert_eq!(parse(r#"{"dim": 3, "values": [0.5, -1, 2e-3]}"#).unwrap(), [0.5, -1.0, 0.002]);
        assert!(parse(r#"{"dim": 2, "values": [1]}"#).is_err());
        assert!(parse(r#"{"dim": 1, "values": [1], "extra": 0}"#).is_err());
        assert!(parse(r#"{"values": [1]}"#).is_err());
    }

    #[test]
    fn write_then_read() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.embed.json");
        write(&p, &[0.25, 1.0 / 3.0]).unwrap();
        assert_eq!(read(&p).unwrap(), [0.25, 1.0 / 3.0]);
    }
}
