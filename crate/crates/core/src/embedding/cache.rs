use std::path::{Path, PathBuf};

use crate::fsutil;

/// Content-addressed embedding store: one file per (embedder name, text
/// digest) holding a little-endian `u32` dimension followed by `f32` values.
#[derive(Clone, Debug)]
pub struct EmbeddingCache {
    dir: PathBuf,
}

impl EmbeddingCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path(&self, embedder: &str, digest: &str) -> PathBuf {
        let safe: String = embedder
            .chars()
            .map(|c| {
                if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                    c
                } else {
                    '_'
                }
            })
            .collect();
        self.dir.join(format!("{safe}-{digest}.bin"))
    }

    /// A missing, truncated or inconsistent file is treated as a miss.
    pub fn get(&self, embedder: &str, digest: &str) -> Option<Vec<f32>> {
        let bytes = std::fs::read(self.path(embedder, digest)).ok()?;
        decode(&bytes)
    }

    pub fn put(&self, embedder: &str, digest: &str, values: &[f32]) -> std::io::Result<()> {
        fsutil::write_atomic(&self.path(embedder, digest), &encode(values))
    }
}

pub(crate) fn encode(values: &[f32]) -> Vec<u8> {
    let mut out = Vec::with_capacity(4 + 4 * values.len());
    out.extend_from_slice(&(values.len() as u32).to_le_bytes());
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub(crate) fn decode(bytes: &[u8]) -> Option<Vec<f32>> {
    let (head, body) = bytes.split_first_chunk::<4>()?;
    let dim = u32::from_le_bytes(*head) as usize;
    if body.len() != dim * 4 {
        return None;
    }
    Some(
        body.chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn layout_is_dim_header_then_values() {
        let bytes = encode(&[1.0, -0.5]);
        assert_eq!(&bytes[..4], &[2, 0, 0, 0]);
        assert_eq!(&bytes[4..8], &1.0f32.to_le_bytes());
        assert_eq!(bytes.len(), 12);
        assert_eq!(decode(&bytes[..11]), None);
    }

    #[test]
    fn names_are_sanitized() {
        let dir = tempfile::tempdir().unwrap();
        let cache = EmbeddingCache::new(dir.path());
        cache.put("remote/model:v1", "abc", &[0.5]).unwrap();
        assert_eq!(cache.get("remote/model:v1", "abc"), Some(vec![0.5]));
        assert!(dir.path().join("remote_model_v1-abc.bin").exists());
        assert_eq!(cache.get("other", "abc"), None);
    }

    proptest! {
        #[test]
        fn encode_decode_round_trip(values in proptest::collection::vec(-1e6f32..1e6, 0..64)) {
            prop_assert_eq!(decode(&encode(&values)), Some(values));
        }
    }
}
