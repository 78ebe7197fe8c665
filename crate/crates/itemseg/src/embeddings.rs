//! LEMB per-line embedding files.
//!
//! Layout (little-endian): magic `LEMB`, u32 version, u32 dim, u32 n_docs,
//! u32 length + UTF-8 encoder name, then per document a u32-length doc id,
//! u32 n_lines and `n_lines * dim` f32 values.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use itemseg_core::lstm::EmbeddingMatrix;
use itemseg_core::synth::pseudo_embedding;
use thiserror::Error;

use crate::jsonl::{atomic_write, ConvertedDoc};
use crate::model_io::Reader;

pub const LEMB_MAGIC: &[u8; 4] = b"LEMB";
pub const LEMB_VERSION: u32 = 1;
pub const PSEUDO_ENCODER: &str = "pseudo-fnv1a";

#[derive(Debug, Error)]
pub enum EmbeddingFileError {
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("unsupported embedding file version {0}")]
    Version(u32),
    #[error("malformed embedding file: {0}")]
    Format(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingFile {
    pub encoder: String,
    pub dim: usize,
    pub docs: Vec<EmbeddingMatrix>,
}

impl EmbeddingFile {
    pub fn by_doc_id(self) -> BTreeMap<String, EmbeddingMatrix> {
        self.docs.into_iter().map(|m| (m.doc_id.clone(), m)).collect()
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>, EmbeddingFileError> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        out.extend_from_slice(LEMB_MAGIC);
        let put = |out: &mut Vec<u8>, v: usize| -> Result<(), EmbeddingFileError> {
            let v = u32::try_from(v).map_err(|_| EmbeddingFileError::Format(format!("{v} does not fit in u32")))?;
            out.extend_from_slice(&v.to_le_bytes());
            Ok(())
        };
        put(&mut out, LEMB_VERSION as usize)?;
        put(&mut out, self.dim)?;
        put(&mut out, self.docs.len())?;
        put(&mut out, self.encoder.len())?;
        out.extend_from_slice(self.encoder.as_bytes());
        for m in &self.docs {
            if m.dim() != self.dim {
                return Err(EmbeddingFileError::Format(format!("{} has dim {}", m.doc_id, m.dim())));
            }
            if !seen.insert(m.doc_id.as_str()) {
                return Err(EmbeddingFileError::Format(format!("duplicate doc id {}", m.doc_id)));
            }
            put(&mut out, m.doc_id.len())?;
            out.extend_from_slice(m.doc_id.as_bytes());
            put(&mut out, m.n_lines())?;
            for v in m.values() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, EmbeddingFileError> {
        let fmt = EmbeddingFileError::Format;
        let mut r = Reader::new(bytes);
        if r.take(4).map_err(fmt)? != LEMB_MAGIC {
            return Err(fmt("bad magic".into()));
        }
        let version = r.u32().map_err(fmt)?;
        if version != LEMB_VERSION as usize {
            return Err(EmbeddingFileError::Version(version as u32));
        }
        let dim = r.u32().map_err(fmt)?;
        let n_docs = r.u32().map_err(fmt)?;
        let encoder = r.string().map_err(fmt)?;
        let mut docs = Vec::with_capacity(n_docs.min(1 << 16));
        let mut seen = BTreeSet::new();
        for _ in 0..n_docs {
            let doc_id = r.string().map_err(fmt)?;
            if !seen.insert(doc_id.clone()) {
                return Err(fmt(format!("duplicate doc id {doc_id}")));
            }
            let n_lines = r.u32().map_err(fmt)?;
            let n_bytes = n_lines
                .checked_mul(dim)
                .and_then(|n| n.checked_mul(4))
                .ok_or_else(|| fmt("dimensions overflow".into()))?;
            let raw = r.take(n_bytes).map_err(fmt)?;
            let values = raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
                .collect();
            let m = EmbeddingMatrix::new(doc_id, dim, values).map_err(|e| fmt(e.to_string()))?;
            docs.push(m);
        }
        if !r.finished() {
            return Err(fmt("trailing bytes".into()));
        }
        Ok(EmbeddingFile { encoder, dim, docs })
    }

    pub fn save(&self, path: &Path) -> Result<(), EmbeddingFileError> {
        Ok(atomic_write(path, &self.to_bytes()?)?)
    }

    pub fn load(path: &Path) -> Result<Self, EmbeddingFileError> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

/// Hashed bag-of-words vectors standing in for a sentence encoder.
pub fn pseudo_embedding_file<'a>(docs: impl IntoIterator<Item = &'a ConvertedDoc>, dim: usize) -> EmbeddingFile {
    let docs = docs
        .into_iter()
        .map(|d| {
            let values = d.lines.iter().flat_map(|l| pseudo_embedding(l, dim)).collect();
            EmbeddingMatrix::new(d.doc_id.clone(), dim, values).expect("pseudo embeddings are finite")
        })
        .collect();
    EmbeddingFile {
        encoder: PSEUDO_ENCODER.to_string(),
        dim,
        docs,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> EmbeddingFile {
        let docs = vec![
            EmbeddingMatrix::new("a", 2, vec![1.0, -0.0, f32::MIN_POSITIVE, 3.5]).unwrap(),
            EmbeddingMatrix::new("b", 2, vec![]).unwrap(),
            EmbeddingMatrix::new("c", 2, vec![0.1, 0.2]).unwrap(),
        ];
        EmbeddingFile {
            encoder: "sentence-encoder".into(),
            dim: 2,
            docs,
        }
    }

    #[test]
    fn byte_layout() {
        let bytes = sample().to_bytes().unwrap();
        assert_eq!(&bytes[..4], b"LEMB");
        assert_eq!(&bytes[4..8], &1u32.to_le_bytes());
        assert_eq!(&bytes[8..12], &2u32.to_le_bytes());
        assert_eq!(&bytes[12..16], &3u32.to_le_bytes());
        assert_eq!(&bytes[16..20], &16u32.to_le_bytes());
        assert_eq!(&bytes[20..36], b"sentence-encoder");
        assert_eq!(&bytes[36..40], &1u32.to_le_bytes());
        assert_eq!(&bytes[40..41], b"a");
        assert_eq!(&bytes[41..45], &2u32.to_le_bytes());
        assert_eq!(bytes.len(), 36 + (4 + 1 + 4 + 16) + (4 + 1 + 4) + (4 + 1 + 4 + 8));
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let f = sample();
        let back = EmbeddingFile::from_bytes(&f.to_bytes().unwrap()).unwrap();
        assert_eq!(back.encoder, f.encoder);
        for (x, y) in back.docs.iter().zip(&f.docs) {
            assert_eq!(x.doc_id, y.doc_id);
            assert_eq!(x.n_lines(), y.n_lines());
            let bx: Vec<u32> = x.values().iter().map(|v| v.to_bits()).collect();
            let by: Vec<u32> = y.values().iter().map(|v| v.to_bits()).collect();
            assert_eq!(bx, by);
        }
    }

    #[test]
    fn rejects_duplicates_and_truncation() {
        let mut f = sample();
        f.docs[2].doc_id = "a".into();
        assert!(f.to_bytes().is_err());
        let bytes = sample().to_bytes().unwrap();
        assert!(EmbeddingFile::from_bytes(&bytes[..bytes.len() - 2]).is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(EmbeddingFile::from_bytes(&extra).is_err());
    }

    #[test]
    fn pseudo_rows_match_line_count() {
        let doc = ConvertedDoc {
            doc_id: "d".into(),
            lines: vec!["Item 1. Business".into(), "We sell".into(), "Item 1. Business".into()],
        };
        let f = pseudo_embedding_file([&doc], 8);
        assert_eq!(f.docs[0].n_lines(), 3);
        assert_eq!(f.docs[0].row(0), f.docs[0].row(2));
    }
}
