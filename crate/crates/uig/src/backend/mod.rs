//! The unified-model backend contract: generate / understand / edit.
//!
//! Two implementations ship with the artifact: the in-process simulator
//! ([`sim::SimBackend`]) and a remote HTTP client ([`http::HttpBackend`]).
//! They are interchangeable from the reasoning loop's point of view.

pub mod http;
pub mod sim;

use sha2::{Digest, Sha256};

use crate::error::Result;
use crate::image::ImageRef;

/// A unified model exposing the three functions the reasoning loop needs.
/// Implementations must tolerate concurrent calls from independent runs.
pub trait UnifiedModelBackend: Send + Sync {
    /// Cheap health check; the loop refuses to start against a dead backend.
    fn probe(&self) -> Result<()>;

    /// Text-to-image generation.
    fn generate(&self, prompt: &str, seed: u64) -> Result<ImageRef>;

    /// Image understanding: returns the raw response text; the caller
    /// parses it into a verdict.
    fn understand(&self, image: &ImageRef, prompt: &str) -> Result<String>;

    /// Image editing under an instruction. The input image is never
    /// mutated; the result is a new ref.
    fn edit(&self, image: &ImageRef, instruction: &str, seed: u64) -> Result<ImageRef>;
}

impl<B: UnifiedModelBackend + ?Sized> UnifiedModelBackend for &B {
    fn probe(&self) -> Result<()> {
        (**self).probe()
    }
    fn generate(&self, prompt: &str, seed: u64) -> Result<ImageRef> {
        (**self).generate(prompt, seed)
    }
    fn understand(&self, image: &ImageRef, prompt: &str) -> Result<String> {
        (**self).understand(image, prompt)
    }
    fn edit(&self, image: &ImageRef, instruction: &str, seed: u64) -> Result<ImageRef> {
        (**self).edit(image, instruction, seed)
    }
}

/// Per-call seed derivation: SplitMix64 over `base + index * golden_gamma`.
///
/// The run-level seed stays fixed (the reproducibility contract) while each
/// stage of the loop sees a distinct, well-mixed stream — index 0 is the
/// initial generation, index i the edit of step i.
pub fn derive_seed(base: u64, index: u64) -> u64 {
    let mut z = base
        .wrapping_add(index.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Schedule-independent per-entry seed for benchmark runs: the base seed
/// mixed with the first eight bytes of the entry id's SHA-256.
pub fn derive_entry_seed(base: u64, entry_id: &str) -> u64 {
    let digest = Sha256::digest(entry_id.as_bytes());
    let mut first = [0u8; 8];
    first.copy_from_slice(&digest[..8]);
    derive_seed(base ^ u64::from_le_bytes(first), 0)
}
