//! The simulator adapted to the unified-model backend contract.
//!
//! Prompts are constraint-DSL text, images are canonical scene-graph
//! serializations. The understand stage recovers the original prompt from
//! the rendered understanding prompt (the `Original prompt:` line the
//! shipped template emits) or answers single verification queries, so the
//! backend itself stays stateless and safe for concurrent runs.

use crate::backend::UnifiedModelBackend;
use crate::error::{Error, Result};
use crate::image::{ImageRef, MediaKind};
use crate::protocol::{extract_marked_line, ORIGINAL_PROMPT_MARKER, QUERY_MARKER};
use crate::sim::{
    apply_edits, check_constraints, diagnose, resample_violating, sample_scene, ConstraintSet,
    EditScript, NoiseConfig, SceneGraph,
};

#[derive(Debug, Clone, Default)]
pub struct SimBackend {
    noise: NoiseConfig,
}

impl SimBackend {
    pub fn new(noise: NoiseConfig) -> Self {
        SimBackend { noise }
    }

    pub fn noise(&self) -> &NoiseConfig {
        &self.noise
    }

    fn scene_of(&self, image: &ImageRef) -> Result<SceneGraph> {
        if image.media() != MediaKind::SceneGraph {
            return Err(Error::MediaMismatch {
                expected: MediaKind::SceneGraph,
                found: image.media(),
            });
        }
        let text = std::str::from_utf8(image.payload())
            .map_err(|_| Error::backend("scene payload is not valid UTF-8"))?;
        SceneGraph::parse(text)
    }
}

impl UnifiedModelBackend for SimBackend {
    fn probe(&self) -> Result<()> {
        Ok(())
    }

    fn generate(&self, prompt: &str, seed: u64) -> Result<ImageRef> {
        let constraints = ConstraintSet::parse(prompt)?;
        let scene = sample_scene(&constraints, &self.noise, seed);
        Ok(ImageRef::scene(scene.canonical_bytes()))
    }

    fn understand(&self, image: &ImageRef, prompt: &str) -> Result<String> {
        let scene = self.scene_of(image)?;

        // Single yes/no verification query (the question-based judge).
        if let Some(query) = extract_marked_line(prompt, QUERY_MARKER) {
            let query = query.trim_end_matches(['?', '.']).trim();
            let constraints = ConstraintSet::parse(query)?;
            let verdict = if check_constraints(&scene, &constraints).is_empty() {
                "MATCH: Yes"
            } else {
                "MATCH: No"
            };
            return Ok(format!("Verified: {query}\n{verdict}"));
        }

        // Full understanding prompt: recover the embedded original prompt.
        let original = match extract_marked_line(prompt, ORIGINAL_PROMPT_MARKER) {
            Some(text) => text.to_string(),
            // Bare DSL text is accepted for direct calls.
            None => {
                ConstraintSet::parse(prompt).map_err(|_| {
                    Error::backend(
                        "understanding prompt carries no recognizable original prompt or query",
                    )
                })?;
                prompt.to_string()
            }
        };
        let constraints = ConstraintSet::parse(&original)?;
        let (text, _script) = diagnose(&scene, &constraints);
        Ok(text)
    }

    fn edit(&self, image: &ImageRef, instruction: &str, seed: u64) -> Result<ImageRef> {
        let scene = self.scene_of(image)?;

        // Route 1: a canonical edit script.
        if let Ok(script) = EditScript::parse(instruction) {
            let out = apply_edits(&scene, &script, &self.noise, seed);
            return Ok(ImageRef::scene(out.canonical_bytes()));
        }
        // Route 2: salvage the first recognizable op from free text.
        if let Some(script) = EditScript::salvage(instruction) {
            let out = apply_edits(&scene, &script, &self.noise, seed);
            return Ok(ImageRef::scene(out.canonical_bytes()));
        }
        // Route 3: the instruction is prompt text (the no-bridge pipeline):
        // resample the violating elements with a fresh seed.
        if let Ok(constraints) = ConstraintSet::parse(instruction) {
            let out = resample_violating(&scene, &constraints, &self.noise, seed);
            return Ok(ImageRef::scene(out.canonical_bytes()));
        }
        Err(Error::UnparseableEditInstruction {
            instruction: instruction.to_string(),
        })
    }
}
