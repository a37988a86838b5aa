//! Pair encoding: every ordered sentence pair of a document becomes one
//! `d`-dimensional vector, and the `n × n` grid of them is the relationship
//! tensor the model convolves over.

use std::fs;
use std::path::PathBuf;

use ndarray::Array3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::Document;
use crate::error::{ensure, Error, Result};

/// Joins a head and a tail sentence around `separator`. Head comes first.
pub fn pair_text(head: &str, tail: &str, separator: &str) -> String {
    let mut s = String::with_capacity(head.len() + separator.len() + tail.len());
    s.push_str(head);
    s.push_str(separator);
    s.push_str(tail);
    s
}

/// Keeps at most `max_units` whitespace-separated units.
pub fn truncate_units(text: &str, max_units: usize) -> String {
    text.split_whitespace()
        .take(max_units)
        .collect::<Vec<_>>()
        .join(" ")
}

/// A text encoder producing fixed-width pair embeddings.
///
/// Implementations must be deterministic for fixed weights. The `Sync`
/// bound lets [`encode_pairs`] fan pair encodings out over a thread pool.
pub trait EncoderBackend: Sync {
    fn name(&self) -> &str;
    fn dim(&self) -> usize;
    fn max_seq_len(&self) -> usize;
    fn separator(&self) -> &str;
    /// Changes whenever the mapping from text to vectors changes.
    fn version_hash(&self) -> String;
    fn encode(&self, text: &str) -> Result<Vec<f64>>;
}

/// Separator token used by the toy backend.
pub const TOY_SEPARATOR: &str = " [SEP] ";
const SEP_TOKEN: &str = "[SEP]";

fn fnv1a(bytes: impl IntoIterator<Item = u8>, mut hash: u64) -> u64 {
    for b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// Seeded, position-salted hash of one token.
///
/// FNV-1a (64 bit) over `seed (8 bytes LE) ‖ segment (1 byte) ‖
/// position (4 bytes LE) ‖ token bytes`. `segment` is 0 before the
/// `[SEP]` token and 1 after it; `position` counts tokens within the
/// segment.
pub fn token_hash(token: &str, segment: u8, position: u32, seed: u64) -> u64 {
    let h = fnv1a(seed.to_le_bytes(), 0xcbf2_9ce4_8422_2325);
    let h = fnv1a([segment], h);
    let h = fnv1a(position.to_le_bytes(), h);
    fnv1a(token.bytes(), h)
}

fn add_feature(v: &mut [f64], hash: u64) {
    let d = v.len() as u64;
    let sign = if hash >> 63 == 1 { -1.0 } else { 1.0 };
    v[(hash % d) as usize] += sign;
}

/// Signed feature hashing of whitespace tokens, L2-normalized.
///
/// Each token contributes `±1` to bucket `hash % d`, sign taken from the top
/// hash bit (see [`token_hash`]). Because positions are salted into the
/// hash, `"a b"` and `"b a"` map to different vectors, and head tokens are
/// distinguishable from tail tokens. An input without tokens, or whose
/// features cancel exactly, falls back to the hash of a sentinel token so
/// the output always has unit norm.
pub fn toy_encode(text: &str, d: usize, seed: u64) -> Result<Vec<f64>> {
    ensure!(d > 0, "embedding dimension must be positive");
    let mut v = vec![0.0; d];
    let mut segment = 0u8;
    let mut position = 0u32;
    for token in text.split_whitespace() {
        if token == SEP_TOKEN {
            segment = 1;
            position = 0;
            continue;
        }
        add_feature(&mut v, token_hash(token, segment, position, seed));
        position += 1;
    }
    let mut norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        v.iter_mut().for_each(|x| *x = 0.0);
        add_feature(&mut v, token_hash("<empty>", 2, 0, seed));
        norm = 1.0;
    }
    v.iter_mut().for_each(|x| *x /= norm);
    Ok(v)
}

/// Deterministic hashing backend used for desk-scale runs and tests.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToyBackend {
    pub dim: usize,
    pub seed: u64,
    pub max_seq_len: usize,
}

impl ToyBackend {
    pub fn new(dim: usize, seed: u64) -> Result<Self> {
        ensure!(dim > 0, "embedding dimension must be positive");
        Ok(ToyBackend {
            dim,
            seed,
            max_seq_len: 128,
        })
    }
}

impl EncoderBackend for ToyBackend {
    fn name(&self) -> &str {
        "toy"
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn max_seq_len(&self) -> usize {
        self.max_seq_len
    }

    fn separator(&self) -> &str {
        TOY_SEPARATOR
    }

    fn version_hash(&self) -> String {
        format!(
            "fnv1a-signed-v1-d{}-s{}-L{}",
            self.dim, self.seed, self.max_seq_len
        )
    }

    fn encode(&self, text: &str) -> Result<Vec<f64>> {
        toy_encode(text, self.dim, self.seed)
    }
}

/// `n × n × d` grid of pair embeddings; cell `(i, j)` encodes head `i`
/// followed by tail `j`. Stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct RelationshipTensor {
    pub n: usize,
    pub d: usize,
    pub values: Vec<f64>,
}

impl RelationshipTensor {
    pub fn zeros(n: usize, d: usize) -> Self {
        RelationshipTensor {
            n,
            d,
            values: vec![0.0; n * n * d],
        }
    }

    pub fn from_values(n: usize, d: usize, values: Vec<f64>) -> Result<Self> {
        ensure!(
            values.len() == n * n * d,
            "tensor of {} values cannot have shape ({n}, {n}, {d})",
            values.len()
        );
        Ok(RelationshipTensor { n, d, values })
    }

    pub fn cell(&self, head: usize, tail: usize) -> &[f64] {
        let start = (head * self.n + tail) * self.d;
        &self.values[start..start + self.d]
    }

    pub fn cell_mut(&mut self, head: usize, tail: usize) -> &mut [f64] {
        let start = (head * self.n + tail) * self.d;
        &mut self.values[start..start + self.d]
    }

    /// Swaps the head and tail axes.
    pub fn transpose(&self) -> Self {
        let mut out = RelationshipTensor::zeros(self.n, self.d);
        for i in 0..self.n {
            for j in 0..self.n {
                out.cell_mut(j, i).copy_from_slice(self.cell(i, j));
            }
        }
        out
    }

    pub fn to_array(&self) -> Array3<f64> {
        Array3::from_shape_vec((self.n, self.n, self.d), self.values.clone())
            .expect("shape matches length")
    }

    pub fn from_array(a: &Array3<f64>) -> Result<Self> {
        let (n, n2, d) = a.dim();
        ensure!(n == n2, "tensor is not square: ({n}, {n2}, {d})");
        RelationshipTensor::from_values(n, d, a.iter().copied().collect())
    }
}

/// Encodes all `n²` ordered pairs of `doc`.
///
/// Pair texts are truncated to the backend's `max_seq_len` whitespace units
/// before encoding. Cells are filled by index, so the result does not depend
/// on scheduling.
pub fn encode_pairs(doc: &Document, backend: &dyn EncoderBackend) -> Result<RelationshipTensor> {
    let n = doc.len();
    let d = backend.dim();
    ensure!(n >= 1, "document {} has no sentences", doc.doc_id);
    let cells: Vec<Result<Vec<f64>>> = (0..n * n)
        .into_par_iter()
        .map(|idx| {
            let (i, j) = (idx / n, idx % n);
            let text = pair_text(&doc.sentences[i], &doc.sentences[j], backend.separator());
            let text = truncate_units(&text, backend.max_seq_len());
            let v = backend.encode(&text).map_err(|e| Error::Encoder {
                head: i,
                tail: j,
                message: e.to_string(),
            })?;
            if v.len() != d {
                return Err(Error::Encoder {
                    head: i,
                    tail: j,
                    message: format!("expected {d} values, got {}", v.len()),
                });
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::Numeric(format!(
                    "pair embedding ({i}, {j}) of document {}",
                    doc.doc_id
                )));
            }
            Ok(v)
        })
        .collect();
    let mut values = Vec::with_capacity(n * n * d);
    for cell in cells {
        values.extend(cell?);
    }
    RelationshipTensor::from_values(n, d, values)
}

/// Metadata written next to each cached tensor.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheEntryMeta {
    pub doc_id: String,
    pub backend: String,
    pub backend_version: String,
    pub n: usize,
    pub d: usize,
}

/// On-disk tensor cache: one `.npy` array per document plus a `.json`
/// sidecar, keyed by `(doc_id, backend name, backend version)`.
#[derive(Clone, Debug)]
pub struct TensorCache {
    dir: PathBuf,
}

impl TensorCache {
    pub fn new(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(TensorCache { dir })
    }

    fn stem(&self, doc_id: &str, backend: &dyn EncoderBackend) -> PathBuf {
        use sha2::{Digest, Sha256};
        let mut hasher = Sha256::new();
        hasher.update(doc_id.as_bytes());
        hasher.update([0]);
        hasher.update(backend.name().as_bytes());
        hasher.update([0]);
        hasher.update(backend.version_hash().as_bytes());
        let digest = hasher.finalize();
        let safe: String = doc_id
            .chars()
            .map(|c| {
                if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                    c
                } else {
                    '_'
                }
            })
            .take(48)
            .collect();
        let key: String = digest[..8].iter().map(|b| format!("{b:02x}")).collect();
        self.dir.join(format!("{safe}-{}-{key}", backend.name()))
    }

    pub fn load(
        &self,
        doc: &Document,
        backend: &dyn EncoderBackend,
    ) -> Result<Option<RelationshipTensor>> {
        let stem = self.stem(&doc.doc_id, backend);
        let meta_path = stem.with_extension("json");
        if !meta_path.exists() {
            return Ok(None);
        }
        let meta_text = fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
        let meta: CacheEntryMeta = serde_json::from_str(&meta_text)
            .map_err(|e| Error::parse(meta_path.display().to_string(), e))?;
        if meta.doc_id != doc.doc_id
            || meta.backend != backend.name()
            || meta.backend_version != backend.version_hash()
        {
            return Ok(None);
        }
        let npy_path = stem.with_extension("npy");
        let array: Array3<f64> = ndarray_npy::read_npy(&npy_path)
            .map_err(|e| Error::parse(npy_path.display().to_string(), e))?;
        Ok(Some(RelationshipTensor::from_array(&array)?))
    }

    pub fn store(
        &self,
        doc: &Document,
        backend: &dyn EncoderBackend,
        t: &RelationshipTensor,
    ) -> Result<()> {
        let stem = self.stem(&doc.doc_id, backend);
        let npy_path = stem.with_extension("npy");
        ndarray_npy::write_npy(&npy_path, &t.to_array())
            .map_err(|e| Error::io(&npy_path, std::io::Error::other(e)))?;
        let meta = CacheEntryMeta {
            doc_id: doc.doc_id.clone(),
            backend: backend.name().to_string(),
            backend_version: backend.version_hash(),
            n: t.n,
            d: t.d,
        };
        let meta_path = stem.with_extension("json");
        let text = serde_json::to_string_pretty(&meta).expect("metadata serializes");
        fs::write(&meta_path, text).map_err(|e| Error::io(&meta_path, e))
    }

    pub fn get_or_encode(
        &self,
        doc: &Document,
        backend: &dyn EncoderBackend,
    ) -> Result<RelationshipTensor> {
        if let Some(t) = self.load(doc, backend)? {
            return Ok(t);
        }
        let t = encode_pairs(doc, backend)?;
        self.store(doc, backend, &t)?;
        Ok(t)
    }
}
