//! Binary model container.
//!
//! Layout: 8-byte magic, u32 format version, u32 header length, a JSON
//! header, then every head parameter as a little-endian f64.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::embedding::{EmbeddingProvider, HashedNgramProvider, ProviderDescriptor};
use super::head::ClassifierHead;
use super::score::Detector;
use super::DetectorError;

const MAGIC: &[u8; 8] = b"FLFLDET\0";
const VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    provider: ProviderDescriptor,
    input_dim: usize,
    hidden: usize,
    dropout: f64,
    threshold: f64,
    param_count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SavedModel {
    pub provider: ProviderDescriptor,
    pub head: ClassifierHead,
    pub threshold: f64,
}

impl SavedModel {
    /// Pairs the head with `provider`, which must match the saved descriptor's dimension.
    pub fn with_provider(self, provider: Box<dyn EmbeddingProvider>) -> Result<Detector, DetectorError> {
        if provider.dim() != self.provider.dim() {
            return Err(DetectorError::DimensionMismatch {
                expected: self.provider.dim(),
                found: provider.dim(),
            });
        }
        Detector::new(provider, self.head, self.threshold)
    }

    /// Rebuilds the hashed provider recorded in the file.
    pub fn into_detector(self) -> Result<Detector, DetectorError> {
        match self.provider {
            ProviderDescriptor::HashedNgram { dim, seed } => {
                self.with_provider(Box::new(HashedNgramProvider::new(dim, seed)))
            }
            ProviderDescriptor::Precomputed { .. } => Err(DetectorError::ModelFile(
                "model uses precomputed embeddings; supply the provider explicitly".into(),
            )),
        }
    }
}

pub fn encode_model(provider: &ProviderDescriptor, head: &ClassifierHead, threshold: f64) -> Vec<u8> {
    let header = Header {
        provider: provider.clone(),
        input_dim: head.input_dim(),
        hidden: head.hidden(),
        dropout: head.dropout(),
        threshold,
        param_count: head.params().len(),
    };
    let json = serde_json::to_vec(&header).expect("header serializes");
    let mut out = Vec::with_capacity(16 + json.len() + 8 * head.params().len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    for p in head.params() {
        out.extend_from_slice(&p.to_le_bytes());
    }
    out
}

pub fn decode_model(bytes: &[u8]) -> Result<SavedModel, DetectorError> {
    let bad = |m: &str| DetectorError::ModelFile(m.to_string());
    if bytes.len() < 16 || &bytes[..8] != MAGIC {
        return Err(bad("not a detector model file"));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if version != VERSION {
        return Err(DetectorError::ModelFile(format!(
            "unsupported format version {version}"
        )));
    }
    let hlen = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
    let body = bytes.get(16..16 + hlen).ok_or_else(|| bad("truncated header"))?;
    let header: Header = serde_json::from_slice(body).map_err(|e| DetectorError::ModelFile(e.to_string()))?;
    if header.provider.dim() != header.input_dim {
        return Err(DetectorError::DimensionMismatch {
            expected: header.provider.dim(),
            found: header.input_dim,
        });
    }
    let raw = &bytes[16 + hlen..];
    if raw.len() != header.param_count * 8 {
        return Err(bad("parameter block length does not match header"));
    }
    let params = raw
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let head = ClassifierHead::from_params(header.input_dim, header.hidden, header.dropout, params)?;
    Ok(SavedModel {
        provider: header.provider,
        head,
        threshold: header.threshold,
    })
}

pub fn save_model(
    path: impl AsRef<Path>,
    provider: &ProviderDescriptor,
    head: &ClassifierHead,
    threshold: f64,
) -> Result<(), DetectorError> {
    if provider.dim() != head.input_dim() {
        return Err(DetectorError::DimensionMismatch {
            expected: head.input_dim(),
            found: provider.dim(),
        });
    }
    let mut f = fs::File::create(path)?;
    f.write_all(&encode_model(provider, head, threshold))?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<SavedModel, DetectorError> {
    decode_model(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let head = ClassifierHead::new(16, 4, 0.1, 2);
        let desc = ProviderDescriptor::HashedNgram { dim: 16, seed: 9 };
        let bytes = encode_model(&desc, &head, 0.5);
        let m = decode_model(&bytes).unwrap();
        assert_eq!(m.head, head);
        assert_eq!(m.provider, desc);
        assert_eq!(m.threshold, 0.5);
        let det = m.into_detector().unwrap();
        assert_eq!(det.provider.dim(), 16);
    }

    #[test]
    fn mismatched_dimension_is_rejected() {
        let head = ClassifierHead::new(16, 4, 0.1, 2);
        let desc = ProviderDescriptor::HashedNgram { dim: 16, seed: 9 };
        let m = decode_model(&encode_model(&desc, &head, 0.5)).unwrap();
        let err = m.with_provider(Box::new(HashedNgramProvider::new(32, 9))).unwrap_err();
        assert!(matches!(
            err,
            DetectorError::DimensionMismatch {
                expected: 16,
                found: 32
            }
        ));

        let wrong = ProviderDescriptor::HashedNgram { dim: 8, seed: 9 };
        assert!(decode_model(&encode_model(&wrong, &head, 0.5)).is_err());
    }

    #[test]
    fn corrupt_files() {
        assert!(decode_model(b"nope").is_err());
        let head = ClassifierHead::new(4, 2, 0.0, 2);
        let mut bytes = encode_model(&ProviderDescriptor::Precomputed { dim: 4 }, &head, 0.5);
        bytes.pop();
        assert!(decode_model(&bytes).is_err());
    }
}
