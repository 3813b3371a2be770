//! Binary intent index.
//!
//! ```text
//! "POIX"  u32 version  u32 count  u32 dim
//! count * dim  f32          embeddings, entry order
//! u32 len  len bytes JSON  [{record_id, intent_bboxes, category_multiset}]
//! ```
//! All integers and floats are little-endian. Entries are in record_id
//! order, as `IntentIndex` keeps them.

use std::path::Path;

use postree_core::retrieval::{IndexEntry, IntentIndex};

use crate::{fsio, Error};

const MAGIC: &[u8; 4] = b"POIX";
const VERSION: u32 = 1;

pub fn encode(index: &IntentIndex) -> Vec<u8> {
    let entries = index.entries();
    let mut out = Vec::with_capacity(16 + entries.len() * index.dim() * 4);
    out.extend_from_slice(MAGIC);
    for v in [VERSION, entries.len() as u32, index.dim() as u32] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for e in entries {
        for v in &e.embedding {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    let meta = serde_json::to_vec(entries).expect("index entries serialize");
    out.extend_from_slice(&(meta.len() as u32).to_le_bytes());
    out.extend_from_slice(&meta);
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], String> {
        let end = self.pos.checked_add(n).filter(|e| *e <= self.bytes.len()).ok_or("truncated index")?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, String> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

pub fn decode(bytes: &[u8]) -> Result<IntentIndex, String> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err("not a POIX index".into());
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(format!("unsupported index version {version}"));
    }
    let count = r.u32()? as usize;
    let dim = r.u32()? as usize;
    let raw = r.take(count.checked_mul(dim).and_then(|n| n.checked_mul(4)).ok_or("index too large")?)?;
    let len = r.u32()? as usize;
    let mut entries: Vec<IndexEntry> = serde_json::from_slice(r.take(len)?).map_err(|e| e.to_string())?;
    if r.pos != bytes.len() {
        return Err("trailing bytes after index".into());
    }
    if entries.len() != count {
        return Err(format!("header says {count} entries, metadata has {}", entries.len()));
    }
    let mut floats = raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap()));
    for e in &mut entries {
        e.embedding = floats.by_ref().take(dim).collect();
    }
    IntentIndex::from_entries(entries).map_err(|e| e.to_string())
}

pub fn write(path: &Path, index: &IntentIndex) -> Result<(), Error> {
    fsio::write_atomic(path, &encode(index))
}

pub fn read(path: &Path) -> Result<IntentIndex, Error> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes).map_err(|message| Error::Parse {
        path: path.display().to_string(),
        message,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use postree_core::Rect;

    fn entry(id: &str, emb: &[f32]) -> IndexEntry {
        IndexEntry {
            record_id: id.into(),
            embedding: emb.to_vec(),
            intent_bboxes: vec![Rect::new(1.0, 2.0, 3.5, 4.0)],
            category_multiset: [("text".to_string(), 2u32)].into_iter().collect(),
        }
    }

    #[test]
    fn round_trip() {
        let idx = IntentIndex::from_entries(vec![entry("b", &[1.5, -2.0]), entry("a", &[0.1, 0.2])]).unwrap();
        let bytes = encode(&idx);
        assert_eq!(&bytes[..4], b"POIX");
        assert_eq!(decode(&bytes).unwrap(), idx);
        assert_eq!(encode(&decode(&bytes).unwrap()), bytes);
    }

    #[test]
    fn rejects_corruption() {
        let idx = IntentIndex::from_entries(vec![entry("a", &[0.1, 0.2])]).unwrap();
        let bytes = encode(&idx);
        for cut in [0, 3, 10, 17, bytes.len() - 1] {
            assert!(decode(&bytes[..cut]).is_err(), "cut {cut}");
        }
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(decode(&extra).is_err());
        let mut magic = bytes;
        magic[0] = b'X';
        assert!(decode(&magic).is_err());
    }
}
