//! WSTCEMB1 embedding files: document and seed-term vectors produced by an
//! external sentence encoder.
//!
//! Layout (little-endian, no padding): 8-byte magic `WSTCEMB1`, `u32`
//! record count, `u32` dim, then per record a `u16` id length, the UTF-8 id
//! bytes, a `u8` kind (0 document, 1 seed term) and `dim` `f32` values.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::scalar::Real;

pub const MAGIC: &[u8; 8] = b"WSTCEMB1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecordKind {
    Document = 0,
    SeedTerm = 1,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingRecord {
    pub id: String,
    pub kind: RecordKind,
    pub vector: Vec<f32>,
}

/// Decodes a WSTCEMB1 byte buffer into its records, in file order.
pub fn decode(bytes: &[u8]) -> Result<(usize, Vec<EmbeddingRecord>)> {
    let fmt = |m: &str| Error::EmbeddingFormat(m.to_owned());
    if bytes.len() < 16 {
        return Err(fmt("truncated header"));
    }
    if &bytes[..8] != MAGIC {
        return Err(fmt("bad magic"));
    }
    let count = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let dim = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
    if dim == 0 {
        return Err(fmt("dim must be positive"));
    }
    let mut pos = 16;
    let mut take = |n: usize, what: &str| -> Result<&[u8]> {
        if bytes.len() - pos < n {
            return Err(Error::EmbeddingFormat(format!("truncated {what}")));
        }
        let s = &bytes[pos..pos + n];
        pos += n;
        Ok(s)
    };
    let mut records = Vec::with_capacity(count);
    for r in 0..count {
        let len = u16::from_le_bytes(take(2, "id length")?.try_into().unwrap()) as usize;
        let id = std::str::from_utf8(take(len, "id")?)
            .map_err(|_| Error::EmbeddingFormat(format!("record {r}: id is not UTF-8")))?
            .to_owned();
        let kind = match take(1, "kind")?[0] {
            0 => RecordKind::Document,
            1 => RecordKind::SeedTerm,
            k => return Err(Error::EmbeddingFormat(format!("record {r}: unknown kind {k}"))),
        };
        let raw = take(4 * dim, "vector")?;
        let vector: Vec<f32> = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        if vector.iter().any(|x| !x.is_finite()) {
            return Err(Error::EmbeddingFormat(format!("record {r} ({id:?}): non-finite value")));
        }
        records.push(EmbeddingRecord { id, kind, vector });
    }
    if pos != bytes.len() {
        return Err(fmt("trailing bytes after last record"));
    }
    Ok((dim, records))
}

pub fn encode(dim: usize, records: &[EmbeddingRecord]) -> Result<Vec<u8>> {
    if dim == 0 {
        return Err(Error::EmbeddingFormat("dim must be positive".into()));
    }
    let mut out = Vec::with_capacity(16 + records.len() * (3 + 4 * dim));
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(records.len() as u32).to_le_bytes());
    out.extend_from_slice(&(dim as u32).to_le_bytes());
    for r in records {
        if r.vector.len() != dim {
            return Err(Error::EmbeddingFormat(format!("{:?}: vector length {} != dim {dim}", r.id, r.vector.len())));
        }
        let id = r.id.as_bytes();
        let len: u16 = id
            .len()
            .try_into()
            .map_err(|_| Error::EmbeddingFormat(format!("id too long: {} bytes", id.len())))?;
        out.extend_from_slice(&len.to_le_bytes());
        out.extend_from_slice(id);
        out.push(r.kind as u8);
        for x in &r.vector {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    Ok(out)
}

/// Document and seed-term vectors keyed by id.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable<F> {
    pub dim: usize,
    pub docs: BTreeMap<String, Vec<F>>,
    pub seeds: BTreeMap<String, Vec<F>>,
}

impl<F: Real> EmbeddingTable<F> {
    pub fn from_records(dim: usize, records: Vec<EmbeddingRecord>) -> Result<Self> {
        let mut docs = BTreeMap::new();
        let mut seeds = BTreeMap::new();
        for r in records {
            let v: Vec<F> = r.vector.iter().map(|&x| F::lit(x as f64)).collect();
            let target = match r.kind {
                RecordKind::Document => &mut docs,
                RecordKind::SeedTerm => &mut seeds,
            };
            if target.insert(r.id.clone(), v).is_some() {
                return Err(Error::EmbeddingFormat(format!("duplicate record {:?}", r.id)));
            }
        }
        Ok(EmbeddingTable { dim, docs, seeds })
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let (dim, records) = decode(bytes)?;
        Self::from_records(dim, records)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let to32 = |v: &Vec<F>| v.iter().map(|x| x.as_f64() as f32).collect();
        let records: Vec<EmbeddingRecord> = self
            .docs
            .iter()
            .map(|(id, v)| EmbeddingRecord {
                id: id.clone(),
                kind: RecordKind::Document,
                vector: to32(v),
            })
            .chain(self.seeds.iter().map(|(id, v)| EmbeddingRecord {
                id: id.clone(),
                kind: RecordKind::SeedTerm,
                vector: to32(v),
            }))
            .collect();
        encode(self.dim, &records)
    }

    pub fn doc(&self, id: &str) -> Result<&[F]> {
        self.docs.get(id).map(Vec::as_slice).ok_or_else(|| Error::MissingEmbedding {
            kind: "document",
            id: id.to_owned(),
        })
    }

    pub fn seed(&self, term: &str) -> Result<&[F]> {
        self.seeds.get(term).map(Vec::as_slice).ok_or_else(|| Error::MissingEmbedding {
            kind: "seed term",
            id: term.to_owned(),
        })
    }

    /// Fails with the first missing document id, in the given order.
    pub fn require_docs<'a, I: IntoIterator<Item = &'a String>>(&self, ids: I) -> Result<()> {
        for id in ids {
            self.doc(id)?;
        }
        Ok(())
    }
}

/// Loads and validates a WSTCEMB1 file.
pub fn load_embeddings<F: Real>(path: &Path) -> Result<EmbeddingTable<F>> {
    EmbeddingTable::from_bytes(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal() -> Vec<EmbeddingRecord> {
        (0..3)
            .map(|i| EmbeddingRecord {
                id: format!("c{i}"),
                kind: RecordKind::Document,
                vector: (0..8).map(|k| (i * 8 + k) as f32 * 0.125).collect(),
            })
            .chain(std::iter::once(EmbeddingRecord {
                id: "pain".into(),
                kind: RecordKind::SeedTerm,
                vector: vec![1.0; 8],
            }))
            .collect()
    }

    #[test]
    fn round_trip_is_byte_identical() {
        let bytes = encode(8, &minimal()).unwrap();
        let t: EmbeddingTable<f64> = EmbeddingTable::from_bytes(&bytes).unwrap();
        assert_eq!(t.docs.len(), 3);
        assert_eq!(t.seeds.len(), 1);
        assert_eq!(t.dim, 8);
        let again = t.to_bytes().unwrap();
        let (_, a) = decode(&bytes).unwrap();
        let (_, b) = decode(&again).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn header_layout() {
        let bytes = encode(8, &minimal()).unwrap();
        assert_eq!(&bytes[..8], b"WSTCEMB1");
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 4);
        assert_eq!(u32::from_le_bytes(bytes[12..16].try_into().unwrap()), 8);
        // first record: u16 len 2, "c0", kind 0
        assert_eq!(&bytes[16..21], &[2, 0, b'c', b'0', 0]);
        assert_eq!(bytes.len(), 16 + 3 * (2 + 2 + 1 + 32) + (2 + 4 + 1 + 32));
    }

    #[test]
    fn rejects_trailing_bytes_and_bad_kind() {
        let mut bytes = encode(8, &minimal()).unwrap();
        bytes.push(0);
        assert!(matches!(decode(&bytes), Err(Error::EmbeddingFormat(m)) if m.contains("trailing")));
        let mut bytes = encode(8, &minimal()).unwrap();
        bytes[20] = 7;
        assert!(matches!(decode(&bytes), Err(Error::EmbeddingFormat(m)) if m.contains("kind")));
    }
}
