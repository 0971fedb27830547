//! Content-addressed image handles.
//!
//! An [`ImageRef`] pairs a payload (raster bytes, or the canonical
//! scene-graph serialization) with the hex SHA-256 digest of that payload.
//! Equal payloads always produce equal addresses, so semantic identity of
//! canonicalized scene graphs is checkable as plain address equality.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MediaKind {
    #[serde(rename = "raster-png")]
    RasterPng,
    #[serde(rename = "scene-graph")]
    SceneGraph,
}

impl fmt::Display for MediaKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MediaKind::RasterPng => write!(f, "raster-png"),
            MediaKind::SceneGraph => write!(f, "scene-graph"),
        }
    }
}

/// Hex SHA-256 of a byte payload.
pub fn content_address(payload: &[u8]) -> String {
    hex::encode(Sha256::digest(payload))
}

/// A full in-memory image: address, media kind, and the payload itself.
///
/// The payload is behind an `Arc` so refs can be cloned freely along the
/// reasoning chain without copying image bytes.
#[derive(Debug, Clone)]
pub struct ImageRef {
    address: String,
    media: MediaKind,
    payload: Arc<Vec<u8>>,
}

impl ImageRef {
    pub fn new(media: MediaKind, payload: Vec<u8>) -> Self {
        let address = content_address(&payload);
        ImageRef {
            address,
            media,
            payload: Arc::new(payload),
        }
    }

    pub fn scene(payload: Vec<u8>) -> Self {
        ImageRef::new(MediaKind::SceneGraph, payload)
    }

    pub fn raster(payload: Vec<u8>) -> Self {
        ImageRef::new(MediaKind::RasterPng, payload)
    }

    pub fn address(&self) -> &str {
        &self.address
    }

    pub fn media(&self) -> MediaKind {
        self.media
    }

    pub fn payload(&self) -> &[u8] {
        &self.payload
    }

    /// Payload-free handle for persistence inside traces.
    pub fn id(&self) -> ImageId {
        ImageId {
            address: self.address.clone(),
            media: self.media,
        }
    }
}

impl PartialEq for ImageRef {
    fn eq(&self, other: &Self) -> bool {
        self.address == other.address && self.media == other.media
    }
}

impl Eq for ImageRef {}

/// The persisted form of an image reference: address plus media kind,
/// without the payload. Trace documents store these; payloads live in the
/// artifact store.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageId {
    pub address: String,
    pub media: MediaKind,
}

impl fmt::Display for ImageId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.address)
    }
}
