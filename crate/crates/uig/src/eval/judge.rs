//! Alignment judging: exact constraint scoring for simulator scenes, or
//! yes/no questioning of an understanding backend for anything else.

use crate::backend::UnifiedModelBackend;
use crate::error::{Error, Result};
use crate::eval::JudgeSpec;
use crate::image::{ImageRef, MediaKind};
use crate::protocol::{parse_understanding_response, yes_no_question_prompt};
use crate::sim::{score, ConstraintSet, SceneGraph};
use crate::trace::MissingEditPolicy;

/// Score an image against a judge spec, in [0, 1].
///
/// The exact judge requires a scene-graph image and delegates to the
/// simulator's scorer. The question judge sends each question to the
/// backend's understanding endpoint wrapped in the fixed yes/no template
/// and scores the fraction answered yes.
pub fn judge_alignment<B: UnifiedModelBackend + ?Sized>(
    image: &ImageRef,
    judge: &JudgeSpec,
    backend: &B,
) -> Result<f64> {
    match judge {
        JudgeSpec::Constraints(constraints) => {
            if image.media() != MediaKind::SceneGraph {
                return Err(Error::MediaMismatch {
                    expected: MediaKind::SceneGraph,
                    found: image.media(),
                });
            }
            let text = std::str::from_utf8(image.payload())
                .map_err(|_| Error::backend("scene payload is not valid UTF-8"))?;
            let scene = SceneGraph::parse(text)?;
            Ok(score(&scene, constraints))
        }
        JudgeSpec::Questions(questions) => {
            if questions.is_empty() {
                return Ok(1.0);
            }
            let mut yes = 0usize;
            for question in questions {
                let raw = backend.understand(image, &yes_no_question_prompt(question))?;
                let parsed =
                    parse_understanding_response(&raw, MissingEditPolicy::FallbackOriginalPrompt)?;
                if parsed.verdict.matched {
                    yes += 1;
                }
            }
            Ok(yes as f64 / questions.len() as f64)
        }
    }
}

/// Mechanically generate one yes/no question per constraint: the canonical
/// clause text itself. On simulator scenes the question judge then agrees
/// exactly with the constraint judge.
pub fn questions_for_constraints(constraints: &ConstraintSet) -> Vec<String> {
    constraints.iter().map(|c| c.to_string()).collect()
}
