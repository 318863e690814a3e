//! Propagation store on disk: one binary file per word plus `index.json`.
//!
//! Word file layout (little-endian): magic `PSHG`, version `u16`, `n: u64`,
//! `d: u32`, word length `u16`, word ids `u16 × len`, then `n · d` row-major
//! `f64` values.

use std::collections::BTreeMap;
use std::path::Path;

use pshgcn_core::conv::PropagationStore;
use pshgcn_core::{Matrix, Word};
use serde::{Deserialize, Serialize};

use crate::config::OperatorChoice;
use crate::error::{Error, Result};
use crate::fsutil;

pub const MAGIC: &[u8; 4] = b"PSHG";
pub const VERSION: u16 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoreIndex {
    pub version: u16,
    pub n: usize,
    pub d: usize,
    pub alphabet: usize,
    pub operator: OperatorChoice,
    /// Word as `[a,b,...]` mapped to its file name.
    pub entries: BTreeMap<String, String>,
}

pub fn word_file_name(word: &Word) -> String {
    if word.is_empty() {
        "w.bin".into()
    } else {
        let ids: Vec<String> = word.ops().iter().map(usize::to_string).collect();
        format!("w_{}.bin", ids.join("_"))
    }
}

pub fn encode_word(word: &Word, value: &Matrix) -> Result<Vec<u8>> {
    let len = u16::try_from(word.len()).map_err(|_| Error::Data(format!("word {word} is too long to store")))?;
    let mut out = Vec::with_capacity(20 + 2 * word.len() + 8 * value.as_slice().len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(value.rows() as u64).to_le_bytes());
    let d = u32::try_from(value.cols()).map_err(|_| Error::Data("feature dimension exceeds u32".into()))?;
    out.extend_from_slice(&d.to_le_bytes());
    out.extend_from_slice(&len.to_le_bytes());
    for &id in word.ops() {
        let id = u16::try_from(id).map_err(|_| Error::Data(format!("word {word} has an id above u16")))?;
        out.extend_from_slice(&id.to_le_bytes());
    }
    for v in value.as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, k: usize) -> Option<&'a [u8]> {
        let s = self.bytes.get(self.pos..self.pos.checked_add(k)?)?;
        self.pos += k;
        Some(s)
    }

    fn array<const N: usize>(&mut self) -> Option<[u8; N]> {
        self.take(N).map(|s| s.try_into().expect("length checked"))
    }
}

pub fn decode_word(path: &Path, bytes: &[u8]) -> Result<(Word, Matrix)> {
    let truncated = || Error::format(path, "truncated propagation file");
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4) != Some(MAGIC.as_slice()) {
        return Err(Error::format(path, "bad magic, expected PSHG"));
    }
    let version = u16::from_le_bytes(r.array().ok_or_else(truncated)?);
    if version != VERSION {
        return Err(Error::format(path, format!("unsupported version {version}")));
    }
    let n = u64::from_le_bytes(r.array().ok_or_else(truncated)?) as usize;
    let d = u32::from_le_bytes(r.array().ok_or_else(truncated)?) as usize;
    let len = u16::from_le_bytes(r.array().ok_or_else(truncated)?) as usize;
    let mut ids = Vec::with_capacity(len);
    for _ in 0..len {
        ids.push(u16::from_le_bytes(r.array().ok_or_else(truncated)?) as usize);
    }
    let count = n.checked_mul(d).ok_or_else(|| Error::format(path, "n * d overflows"))?;
    if bytes.len() - r.pos != count.checked_mul(8).ok_or_else(truncated)? {
        return Err(Error::format(path, format!("expected {count} values after the header")));
    }
    let values = r.bytes[r.pos..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    Ok((Word::new(ids), Matrix::from_vec(n, d, values)?))
}

/// Writes every stored word and then the index (the index is written last, so
/// a store without one is incomplete).
pub fn save_store(store: &PropagationStore, alphabet: usize, operator: OperatorChoice, dir: &Path) -> Result<()> {
    fsutil::create_dir(dir)?;
    let mut entries = BTreeMap::new();
    for (word, value) in &store.entries {
        let name = word_file_name(word);
        fsutil::write_atomic(&dir.join(&name), &encode_word(word, value)?)?;
        entries.insert(word.to_string(), name);
    }
    let index = StoreIndex {
        version: VERSION,
        n: store.n,
        d: store.d,
        alphabet,
        operator,
        entries,
    };
    fsutil::write_json(&dir.join("index.json"), &index)
}

pub fn load_store(dir: &Path) -> Result<(StoreIndex, PropagationStore)> {
    let index_path = dir.join("index.json");
    let index: StoreIndex = fsutil::read_json(&index_path)?;
    let mut store = PropagationStore {
        n: index.n,
        d: index.d,
        entries: BTreeMap::new(),
    };
    for (key, name) in &index.entries {
        let path = dir.join(name);
        let (word, value) = decode_word(&path, &fsutil::read(&path)?)?;
        if word.to_string() != *key {
            return Err(Error::format(&path, format!("holds word {word}, index says {key}")));
        }
        if word.ops().iter().any(|&id| id >= 2 * index.alphabet) {
            return Err(Error::format(&path, format!("word {word} exceeds the alphabet")));
        }
        store
            .insert(word, value)
            .map_err(|e| Error::format(&path, e.to_string()))?;
    }
    Ok((index, store))
}
