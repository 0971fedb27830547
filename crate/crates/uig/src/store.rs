//! The on-disk artifact store and run records.
//!
//! Image payloads live under `<root>/objects/<sha256-hex>`, written via a
//! temp file plus atomic rename so concurrent writers of the same address
//! cannot corrupt each other (last rename wins with identical content).
//! Puts are idempotent. Completed runs live under `<root>/runs/<run-id>/`
//! with an append-only `trace.json` and a `record.json` of wall-clock
//! metadata.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::engine::RunOutput;
use crate::error::{Error, Result};
use crate::image::{content_address, ImageRef, MediaKind};
use crate::trace::ReasoningTrace;

pub struct ArtifactStore {
    root: PathBuf,
}

impl ArtifactStore {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        std::fs::create_dir_all(root.join("objects"))?;
        std::fs::create_dir_all(root.join("runs"))?;
        Ok(ArtifactStore { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn object_path(&self, address: &str) -> PathBuf {
        self.root.join("objects").join(address)
    }

    /// Store a payload, returning its content-addressed ref. Idempotent:
    /// re-putting identical bytes touches nothing.
    pub fn put_bytes(&self, media: MediaKind, payload: Vec<u8>) -> Result<ImageRef> {
        let image = ImageRef::new(media, payload);
        self.put(&image)?;
        Ok(image)
    }

    pub fn put(&self, image: &ImageRef) -> Result<PathBuf> {
        let path = self.object_path(image.address());
        if path.exists() {
            return Ok(path);
        }
        let mut suffix = [0u8; 8];
        rand::thread_rng().fill_bytes(&mut suffix);
        let tmp = self.root.join("objects").join(format!(
            ".tmp-{}-{}",
            image.address(),
            hex::encode(suffix)
        ));
        std::fs::write(&tmp, image.payload())?;
        std::fs::rename(&tmp, &path)?;
        Ok(path)
    }

    pub fn contains(&self, address: &str) -> bool {
        self.object_path(address).exists()
    }

    pub fn get(&self, address: &str) -> Result<Vec<u8>> {
        let path = self.object_path(address);
        if !path.exists() {
            return Err(Error::NotFound {
                address: address.to_string(),
            });
        }
        let payload = std::fs::read(&path)?;
        // Integrity: the file must still hash to its name.
        let actual = content_address(&payload);
        if actual != address {
            return Err(Error::NotFound {
                address: format!("{address} (stored payload hashes to {actual})"),
            });
        }
        Ok(payload)
    }

    pub fn run_dir(&self, run_id: &str) -> PathBuf {
        self.root.join("runs").join(run_id)
    }

    /// Persist a completed run: every image payload, the trace, and the
    /// run record. Returns the record.
    pub fn persist_run(&self, out: &RunOutput) -> Result<RunRecord> {
        let started_unix_ms = unix_ms();
        let run_id = new_run_id();
        let run_dir = self.run_dir(&run_id);
        std::fs::create_dir_all(&run_dir)?;

        let mut image_addresses = Vec::with_capacity(out.images.len());
        for image in &out.images {
            self.put(image)?;
            image_addresses.push(image.address().to_string());
        }

        let trace_path = run_dir.join("trace.json");
        write_trace(&trace_path, &out.trace)?;

        let record = RunRecord {
            run_id,
            trace_path: trace_path.clone(),
            image_addresses,
            started_unix_ms,
            finished_unix_ms: unix_ms(),
        };
        std::fs::write(
            run_dir.join("record.json"),
            serde_json::to_string_pretty(&record)?,
        )?;
        Ok(record)
    }
}

/// Metadata for one persisted run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunRecord {
    /// Sortable ULID-style identifier (time-prefixed).
    pub run_id: String,
    pub trace_path: PathBuf,
    pub image_addresses: Vec<String>,
    pub started_unix_ms: u64,
    pub finished_unix_ms: u64,
}

/// Traces are append-only: writing over an existing file is refused.
pub fn write_trace(path: &Path, trace: &ReasoningTrace) -> Result<()> {
    use std::io::Write;
    let mut file = std::fs::File::options()
        .write(true)
        .create_new(true)
        .open(path)?;
    file.write_all(trace.to_json_pretty().as_bytes())?;
    Ok(())
}

pub fn read_trace(path: &Path) -> Result<ReasoningTrace> {
    ReasoningTrace::from_json(&std::fs::read_to_string(path)?)
}

fn unix_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

const CROCKFORD: &[u8; 32] = b"0123456789ABCDEFGHJKMNPQRSTVWXYZ";

/// ULID-style id: 48-bit millisecond timestamp plus 80 random bits,
/// Crockford base32, 26 characters. Lexicographic order follows creation
/// time at millisecond resolution.
pub fn new_run_id() -> String {
    let millis = unix_ms() & ((1 << 48) - 1);
    let mut random = [0u8; 10];
    rand::thread_rng().fill_bytes(&mut random);
    let mut value: u128 = (millis as u128) << 80;
    for (i, b) in random.iter().enumerate() {
        value |= (*b as u128) << (72 - 8 * i);
    }
    let mut out = String::with_capacity(26);
    for i in (0..26).rev() {
        let idx = ((value >> (5 * i)) & 0x1f) as usize;
        out.push(CROCKFORD[idx] as char);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::TempDir;

    #[test]
    fn put_is_idempotent_and_round_trips() {
        let dir = TempDir::new().unwrap();
        let store = ArtifactStore::open(dir.path()).unwrap();
        let a = store
            .put_bytes(MediaKind::SceneGraph, b"scene v1\n".to_vec())
            .unwrap();
        let b = store
            .put_bytes(MediaKind::SceneGraph, b"scene v1\n".to_vec())
            .unwrap();
        assert_eq!(a.address(), b.address());
        let objects: Vec<_> = std::fs::read_dir(dir.path().join("objects"))
            .unwrap()
            .collect();
        assert_eq!(objects.len(), 1, "identical payloads share one file");
        assert_eq!(store.get(a.address()).unwrap(), b"scene v1\n".to_vec());
    }

    #[test]
    fn get_unknown_address_is_not_found() {
        let dir = TempDir::new().unwrap();
        let store = ArtifactStore::open(dir.path()).unwrap();
        assert!(matches!(
            store.get("00ff").unwrap_err(),
            Error::NotFound { .. }
        ));
    }

    #[test]
    fn digest_matches_external_recomputation() {
        let dir = TempDir::new().unwrap();
        let store = ArtifactStore::open(dir.path()).unwrap();
        let payload = b"independently hashed".to_vec();
        let image = store.put_bytes(MediaKind::RasterPng, payload.clone()).unwrap();
        assert_eq!(image.address(), content_address(&payload));
    }

    #[test]
    fn trace_files_are_append_only() {
        use crate::backend::sim::SimBackend;
        use crate::engine::run_reasoning;
        use crate::sim::NoiseConfig;
        use crate::trace::{PromptSpec, ReasoningConfig};

        let dir = TempDir::new().unwrap();
        let backend = SimBackend::new(NoiseConfig::perfect());
        let out = run_reasoning(
            &PromptSpec::new("p", "count(ball,1)").unwrap(),
            &backend,
            &ReasoningConfig::default(),
        )
        .unwrap();
        let path = dir.path().join("trace.json");
        write_trace(&path, &out.trace).unwrap();
        assert!(write_trace(&path, &out.trace).is_err());
        let back = read_trace(&path).unwrap();
        assert_eq!(back, out.trace);
    }

    #[test]
    fn run_ids_are_unique_and_well_formed() {
        let ids: Vec<String> = (0..100).map(|_| new_run_id()).collect();
        for id in &ids {
            assert_eq!(id.len(), 26);
            assert!(id.bytes().all(|b| CROCKFORD.contains(&b)));
        }
        let mut unique = ids.clone();
        unique.sort();
        unique.dedup();
        assert_eq!(unique.len(), ids.len());
    }
}
