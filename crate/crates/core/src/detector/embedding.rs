//! Text embedding providers feeding the classification head.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::DetectorError;
use crate::weak_label::tokenize;

/// Sparse vector with sorted, unique indices.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseVec {
    pub dim: usize,
    pub indices: Vec<u32>,
    pub values: Vec<f64>,
}

impl SparseVec {
    pub fn from_dense(x: &[f64]) -> Self {
        let mut indices = Vec::new();
        let mut values = Vec::new();
        for (i, &v) in x.iter().enumerate() {
            if v != 0.0 {
                indices.push(i as u32);
                values.push(v);
            }
        }
        Self {
            dim: x.len(),
            indices,
            values,
        }
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for (&i, &v) in self.indices.iter().zip(&self.values) {
            out[i as usize] = v;
        }
        out
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &SparseVec) -> f64 {
        let (mut a, mut b, mut acc) = (0, 0, 0.0);
        while a < self.indices.len() && b < other.indices.len() {
            match self.indices[a].cmp(&other.indices[b]) {
                std::cmp::Ordering::Less => a += 1,
                std::cmp::Ordering::Greater => b += 1,
                std::cmp::Ordering::Equal => {
                    acc += self.values[a] * other.values[b];
                    a += 1;
                    b += 1;
                }
            }
        }
        acc
    }
}

/// Identifies a provider inside a saved model so it can be rebuilt or checked.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProviderDescriptor {
    HashedNgram { dim: usize, seed: u64 },
    Precomputed { dim: usize },
}

impl ProviderDescriptor {
    pub fn dim(&self) -> usize {
        match self {
            ProviderDescriptor::HashedNgram { dim, .. } | ProviderDescriptor::Precomputed { dim } => *dim,
        }
    }
}

/// Maps text to a fixed-length vector. Implementations are deterministic and
/// never change during training.
pub trait EmbeddingProvider: Send + Sync {
    fn dim(&self) -> usize;

    fn embed(&self, text: &str) -> Vec<f64>;

    fn embed_sparse(&self, text: &str) -> SparseVec {
        SparseVec::from_dense(&self.embed(text))
    }

    fn descriptor(&self) -> ProviderDescriptor;
}

/// Signed feature hashing of token unigrams and bigrams, L2-normalized.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HashedNgramProvider {
    dim: usize,
    seed: u64,
}

pub const DEFAULT_HASH_DIM: usize = 4096;

impl Default for HashedNgramProvider {
    fn default() -> Self {
        Self::new(DEFAULT_HASH_DIM, 0)
    }
}

impl HashedNgramProvider {
    pub fn new(dim: usize, seed: u64) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        Self { dim, seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    fn slot(&self, feature: &[&str]) -> (u32, f64) {
        let mut h = FNV_OFFSET;
        for b in self.seed.to_le_bytes() {
            h = fnv_step(h, b);
        }
        for (i, part) in feature.iter().enumerate() {
            if i > 0 {
                h = fnv_step(h, 0x1f);
            }
            for &b in part.as_bytes() {
                h = fnv_step(h, b);
            }
        }
        let h = avalanche(h);
        let idx = (h % self.dim as u64) as u32;
        let sign = if h >> 63 == 0 { 1.0 } else { -1.0 };
        (idx, sign)
    }
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv_step(h: u64, b: u8) -> u64 {
    (h ^ b as u64).wrapping_mul(FNV_PRIME)
}

fn avalanche(mut z: u64) -> u64 {
    z = (z ^ (z >> 33)).wrapping_mul(0xff51_afd7_ed55_8ccd);
    z = (z ^ (z >> 33)).wrapping_mul(0xc4ce_b9fe_1a85_ec53);
    z ^ (z >> 33)
}

impl EmbeddingProvider for HashedNgramProvider {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Vec<f64> {
        self.embed_sparse(text).to_dense()
    }

    fn embed_sparse(&self, text: &str) -> SparseVec {
        let tokens = tokenize(text);
        let mut acc: Vec<(u32, f64)> = Vec::with_capacity(tokens.len() * 2);
        for t in &tokens {
            acc.push(self.slot(&["1", t]));
        }
        for w in tokens.windows(2) {
            acc.push(self.slot(&["2", &w[0], &w[1]]));
        }
        acc.sort_by_key(|&(i, _)| i);
        let mut indices = Vec::with_capacity(acc.len());
        let mut values: Vec<f64> = Vec::with_capacity(acc.len());
        for (i, v) in acc {
            if indices.last() == Some(&i) {
                *values.last_mut().unwrap() += v;
            } else {
                indices.push(i);
                values.push(v);
            }
        }
        // signed collisions can cancel out
        let (indices, values): (Vec<u32>, Vec<f64>) =
            indices.into_iter().zip(values).filter(|&(_, v)| v != 0.0).unzip();
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        let values = if norm > 0.0 {
            values.into_iter().map(|v| v / norm).collect()
        } else {
            values
        };
        SparseVec {
            dim: self.dim,
            indices,
            values,
        }
    }

    fn descriptor(&self) -> ProviderDescriptor {
        ProviderDescriptor::HashedNgram {
            dim: self.dim,
            seed: self.seed,
        }
    }
}

/// Embeddings computed elsewhere (e.g. by a transformer encoder) and loaded from a file.
///
/// The file is JSON-lines, `{"text": ..., "vector": [...]}` per line. Texts
/// missing from the table embed to the zero vector.
#[derive(Debug, Clone)]
pub struct PrecomputedProvider {
    dim: usize,
    table: HashMap<String, Vec<f64>>,
}

#[derive(Deserialize)]
struct PrecomputedRecord {
    text: String,
    vector: Vec<f64>,
}

impl PrecomputedProvider {
    pub fn new(dim: usize, entries: impl IntoIterator<Item = (String, Vec<f64>)>) -> Result<Self, DetectorError> {
        let mut table = HashMap::new();
        for (text, v) in entries {
            if v.len() != dim {
                return Err(DetectorError::DimensionMismatch {
                    expected: dim,
                    found: v.len(),
                });
            }
            table.insert(text, v);
        }
        Ok(Self { dim, table })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, DetectorError> {
        let reader = BufReader::new(File::open(path)?);
        let mut entries = Vec::new();
        let mut dim = None;
        for line in reader.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: PrecomputedRecord =
                serde_json::from_str(&line).map_err(|e| DetectorError::ModelFile(e.to_string()))?;
            dim.get_or_insert(rec.vector.len());
            entries.push((rec.text, rec.vector));
        }
        Self::new(dim.unwrap_or(0), entries)
    }

    pub fn contains(&self, text: &str) -> bool {
        self.table.contains_key(text)
    }
}

impl EmbeddingProvider for PrecomputedProvider {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Vec<f64> {
        self.table.get(text).cloned().unwrap_or_else(|| vec![0.0; self.dim])
    }

    fn descriptor(&self) -> ProviderDescriptor {
        ProviderDescriptor::Precomputed { dim: self.dim }
    }
}

/// Cosine distance `1 - cos(a, b)`; 1 when either vector is zero.
pub fn cosine_distance(a: &SparseVec, b: &SparseVec) -> f64 {
    let na = a.norm();
    let nb = b.norm();
    if na == 0.0 || nb == 0.0 {
        return 1.0;
    }
    1.0 - a.dot(b) / (na * nb)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hashed_output_has_fixed_dim_and_unit_norm() {
        let p = HashedNgramProvider::new(64, 3);
        for text in ["The leaves are alternate.", "x", "Metropolitan France was settled"] {
            let v = p.embed(text);
            assert_eq!(v.len(), 64);
            let n: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!((n - 1.0).abs() < 1e-12, "{text}: {n}");
        }
        assert!(p.embed("").iter().all(|&x| x == 0.0));
        assert!(p.embed(" .. ").iter().all(|&x| x == 0.0));
    }

    #[test]
    fn hashed_is_deterministic_and_seed_dependent() {
        let a = HashedNgramProvider::new(4096, 1);
        let b = HashedNgramProvider::new(4096, 2);
        let t = "Leaves opposite, simple, entire";
        assert_eq!(a.embed_sparse(t), a.embed_sparse(t));
        assert_ne!(a.embed_sparse(t), b.embed_sparse(t));
        assert_eq!(a.embed_sparse(t).to_dense(), a.embed(t));
    }

    #[test]
    fn sparse_dense_round_trip() {
        let d = vec![0.0, 1.5, 0.0, -2.0];
        let s = SparseVec::from_dense(&d);
        assert_eq!(s.indices, vec![1, 3]);
        assert_eq!(s.to_dense(), d);
        assert_eq!(s.dot(&s), 1.5 * 1.5 + 4.0);
    }

    #[test]
    fn precomputed_lookup_and_dim_check() {
        let p = PrecomputedProvider::new(3, [("a".to_string(), vec![1.0, 0.0, 0.0])]).unwrap();
        assert_eq!(p.embed("a"), vec![1.0, 0.0, 0.0]);
        assert_eq!(p.embed("b"), vec![0.0; 3]);
        assert!(PrecomputedProvider::new(3, [("a".to_string(), vec![1.0])]).is_err());
    }

    #[test]
    fn cosine() {
        let a = SparseVec::from_dense(&[1.0, 0.0]);
        let b = SparseVec::from_dense(&[0.0, 2.0]);
        assert!((cosine_distance(&a, &a)).abs() < 1e-12);
        assert!((cosine_distance(&a, &b) - 1.0).abs() < 1e-12);
        assert_eq!(cosine_distance(&a, &SparseVec::from_dense(&[0.0, 0.0])), 1.0);
    }
}
