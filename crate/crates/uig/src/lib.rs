//! Understanding-in-generation reasoning for text-to-image systems.
//!
//! The crate implements a generate → verify → edit → repeat loop in which
//! an understanding backend inspects each candidate image, diagnoses what
//! fails to match the prompt, and feeds that diagnosis into an image edit
//! — iterating until the verdict is a match or the budget runs out.
//!
//! Backends are pluggable: a remote HTTP unified model, or the built-in
//! deterministic scene-graph simulator that makes the loop's behavior
//! checkable at desk scale. An evaluation harness runs prompt suites
//! through the pipeline variants and aggregates per-iteration score
//! trends, termination statistics, and latencies.

pub mod backend;
pub mod engine;
pub mod error;
pub mod eval;
pub mod image;
pub mod protocol;
pub mod sim;
pub mod store;
pub mod trace;

pub use backend::{derive_entry_seed, derive_seed, UnifiedModelBackend};
pub use engine::{finalize, run_pipeline_variant, run_reasoning, RunOutput};
pub use error::{Error, Result};
pub use image::{ImageId, ImageRef, MediaKind};
pub use trace::{
    MissingEditPolicy, Pipeline, PromptSpec, ReasoningConfig, ReasoningStep, ReasoningTrace,
    TerminationReason, Verdict,
};
