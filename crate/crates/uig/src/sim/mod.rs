//! A deterministic symbolic text-to-image world.
//!
//! Prompts are written in a small constraint DSL, "images" are scene
//! graphs, the generator samples scenes that break constraints with
//! configurable probability, the understander diagnoses violations
//! exactly, and the editor applies (or fumbles) repair scripts. Scene
//! graphs serialize canonically, so image identity is content-address
//! identity.

pub mod check;
pub mod constraint;
pub mod edit;
pub mod scene;
pub mod vocab;
pub mod world;

pub use check::{check_constraints, diagnose, satisfied, score, Violation, ViolationSet};
pub use constraint::{Constraint, ConstraintSet};
pub use edit::{EditOp, EditScript};
pub use scene::{Entity, EntityId, SceneGraph};
pub use vocab::{ColorName, Noun, Relation, StyleName};
pub use world::{apply_edits, resample_violating, sample_scene, NoiseConfig};
