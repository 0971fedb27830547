//! Reasoning-run domain types and the persisted trace document (schema
//! version 1).
//!
//! A trace records one full run: the initial generation, every
//! understand/edit step with its verdict and latencies, the final image,
//! and why the loop stopped. [`ReasoningTrace::validate`] checks every
//! structural invariant and doubles as the trace linter behind
//! `uig inspect`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::ImageId;

pub const TRACE_SCHEMA_VERSION: u32 = 1;

/// A text prompt with a stable identifier.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptSpec {
    pub id: String,
    pub text: String,
}

impl PromptSpec {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Result<Self> {
        let spec = PromptSpec {
            id: id.into(),
            text: text.into(),
        };
        if spec.text.trim().is_empty() {
            return Err(Error::InvalidConfig("prompt text must be non-empty".into()));
        }
        if spec.id.trim().is_empty() {
            return Err(Error::InvalidConfig("prompt id must be non-empty".into()));
        }
        Ok(spec)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pipeline {
    /// One generate call, nothing else.
    Baseline,
    /// The full loop, but every edit uses the original prompt as the
    /// instruction; the understanding output is kept only for the verdict.
    Nobridge,
    /// The full understanding-in-generation loop.
    Uig,
}

impl std::fmt::Display for Pipeline {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Pipeline::Baseline => write!(f, "baseline"),
            Pipeline::Nobridge => write!(f, "nobridge"),
            Pipeline::Uig => write!(f, "uig"),
        }
    }
}

/// What to do when a "No" verdict arrives without an editing instruction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MissingEditPolicy {
    /// Hard error. The default: silently falling back would contaminate
    /// ablation comparisons.
    #[serde(rename = "error")]
    Error,
    /// Use the original prompt text as the instruction, degenerating that
    /// step to no-bridge behavior.
    #[serde(rename = "fallback-original-prompt")]
    FallbackOriginalPrompt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReasoningConfig {
    pub max_iterations: u32,
    pub seed: u64,
    pub missing_edit_policy: MissingEditPolicy,
    pub pipeline: Pipeline,
}

impl Default for ReasoningConfig {
    fn default() -> Self {
        ReasoningConfig {
            max_iterations: 4,
            seed: 42,
            missing_edit_policy: MissingEditPolicy::Error,
            pipeline: Pipeline::Uig,
        }
    }
}

impl ReasoningConfig {
    pub const MAX_ITERATIONS_LIMIT: u32 = 32;

    pub fn validate(&self) -> Result<()> {
        if self.max_iterations < 1 || self.max_iterations > Self::MAX_ITERATIONS_LIMIT {
            return Err(Error::InvalidConfig(format!(
                "max_iterations must be in [1, {}], got {}",
                Self::MAX_ITERATIONS_LIMIT,
                self.max_iterations
            )));
        }
        Ok(())
    }

    pub fn with_pipeline(mut self, pipeline: Pipeline) -> Self {
        self.pipeline = pipeline;
        self
    }

    pub fn with_max_iterations(mut self, max_iterations: u32) -> Self {
        self.max_iterations = max_iterations;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

/// The match result of one understanding call.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub matched: bool,
    /// The understanding response, preserved verbatim.
    pub raw_text: String,
}

/// One understand(+edit) iteration.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReasoningStep {
    /// 1-based iteration index.
    pub index: u32,
    pub input_image: ImageId,
    pub verdict: Verdict,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub edit_prompt: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub output_image: Option<ImageId>,
    pub latency_understand_ms: u64,
    pub latency_edit_ms: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TerminationReason {
    /// The understanding stage answered Yes.
    Match,
    /// The iteration budget ran out; the final edit is returned unverified.
    Budget,
}

impl std::fmt::Display for TerminationReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TerminationReason::Match => write!(f, "match"),
            TerminationReason::Budget => write!(f, "budget"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReasoningTrace {
    pub version: u32,
    pub prompt: PromptSpec,
    pub config: ReasoningConfig,
    pub initial_image: ImageId,
    pub steps: Vec<ReasoningStep>,
    pub final_image: ImageId,
    pub terminated_by: TerminationReason,
    pub latency_generate_ms: u64,
    pub total_latency_ms: u64,
}

impl ReasoningTrace {
    pub fn generate_calls(&self) -> u32 {
        1
    }

    pub fn understand_calls(&self) -> u32 {
        self.steps.len() as u32
    }

    pub fn edit_calls(&self) -> u32 {
        self.steps.iter().filter(|s| s.output_image.is_some()).count() as u32
    }

    pub fn step_latency_sum(&self) -> u64 {
        self.steps
            .iter()
            .map(|s| s.latency_understand_ms + s.latency_edit_ms)
            .sum()
    }

    /// Check every structural invariant; the message names the first
    /// violated one.
    pub fn validate(&self) -> Result<()> {
        let fail = |message: String| Err(Error::InconsistentTrace(message));

        if self.version != TRACE_SCHEMA_VERSION {
            return fail(format!(
                "unknown trace schema version {} (expected {})",
                self.version, TRACE_SCHEMA_VERSION
            ));
        }
        self.config.validate()?;
        if self.prompt.text.trim().is_empty() {
            return fail("prompt text is empty".into());
        }

        if self.config.pipeline == Pipeline::Baseline {
            if !self.steps.is_empty() {
                return fail("baseline trace must have zero steps".into());
            }
            if self.final_image != self.initial_image {
                return fail("baseline final image must equal the initial image".into());
            }
        } else {
            if self.steps.is_empty() {
                return fail("trace must contain at least one step".into());
            }
            if self.steps.len() as u32 > self.config.max_iterations {
                return fail(format!(
                    "{} steps exceed max_iterations {}",
                    self.steps.len(),
                    self.config.max_iterations
                ));
            }
        }

        for (i, step) in self.steps.iter().enumerate() {
            let expected = i as u32 + 1;
            if step.index != expected {
                return fail(format!(
                    "step indices must be consecutive from 1: position {} has index {}",
                    i + 1,
                    step.index
                ));
            }
            if step.verdict.matched {
                if step.output_image.is_some() || step.edit_prompt.is_some() {
                    return fail(format!(
                        "matched step {} must have no edit prompt and no output image",
                        step.index
                    ));
                }
                if i + 1 != self.steps.len() {
                    return fail(format!(
                        "matched step {} must be the last step",
                        step.index
                    ));
                }
            } else {
                if step.edit_prompt.as_deref().is_none_or(|e| e.trim().is_empty()) {
                    return fail(format!(
                        "unmatched step {} must carry a non-empty edit prompt",
                        step.index
                    ));
                }
                if step.output_image.is_none() {
                    return fail(format!(
                        "unmatched step {} must carry an output image",
                        step.index
                    ));
                }
            }
            let expected_input = if i == 0 {
                &self.initial_image
            } else {
                match &self.steps[i - 1].output_image {
                    Some(out) => out,
                    None => unreachable!("earlier steps are unmatched"),
                }
            };
            if &step.input_image != expected_input {
                return fail(format!(
                    "step {} input image does not chain from the previous stage",
                    step.index
                ));
            }
        }

        if let Some(last) = self.steps.last() {
            match self.terminated_by {
                TerminationReason::Match => {
                    if !last.verdict.matched {
                        return fail(
                            "terminated_by=match requires the last verdict to be matched".into(),
                        );
                    }
                    if self.final_image != last.input_image {
                        return fail(
                            "match termination: final image must equal the image the \
                             matching verdict inspected (the last step's input)"
                                .into(),
                        );
                    }
                }
                TerminationReason::Budget => {
                    if last.verdict.matched {
                        return fail(
                            "terminated_by=budget requires the last verdict to be unmatched"
                                .into(),
                        );
                    }
                    if Some(&self.final_image) != last.output_image.as_ref() {
                        return fail(
                            "budget termination: final image must equal the last step's output"
                                .into(),
                        );
                    }
                }
            }
        } else if self.terminated_by != TerminationReason::Budget {
            return fail("a zero-step (baseline) trace terminates by budget".into());
        }

        let stage_sum = self.latency_generate_ms + self.step_latency_sum();
        if self.total_latency_ms < stage_sum {
            return fail(format!(
                "total latency {}ms is below the stage sum {}ms",
                self.total_latency_ms, stage_sum
            ));
        }
        Ok(())
    }

    /// Canonical JSON with every wall-clock latency field zeroed; two runs
    /// of the same deterministic configuration produce identical
    /// fingerprints.
    pub fn fingerprint(&self) -> String {
        let mut t = self.clone();
        t.latency_generate_ms = 0;
        t.total_latency_ms = 0;
        for s in &mut t.steps {
            s.latency_understand_ms = 0;
            s.latency_edit_ms = 0;
        }
        serde_json::to_string(&t).expect("trace serialization cannot fail")
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("trace serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        // Version gate first so unknown majors get a clear error rather
        // than a field mismatch.
        #[derive(Deserialize)]
        struct VersionOnly {
            version: u32,
        }
        let v: VersionOnly = serde_json::from_str(text)?;
        if v.version != TRACE_SCHEMA_VERSION {
            return Err(Error::InconsistentTrace(format!(
                "unknown trace schema version {} (this build reads version {})",
                v.version, TRACE_SCHEMA_VERSION
            )));
        }
        Ok(serde_json::from_str(text)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::{ImageRef, MediaKind};

    fn img(tag: &str) -> ImageId {
        ImageRef::new(MediaKind::SceneGraph, tag.as_bytes().to_vec()).id()
    }

    fn matched_step(index: u32, input: ImageId, lat: u64) -> ReasoningStep {
        ReasoningStep {
            index,
            input_image: input,
            verdict: Verdict {
                matched: true,
                raw_text: "MATCH: Yes".into(),
            },
            edit_prompt: None,
            output_image: None,
            latency_understand_ms: lat,
            latency_edit_ms: 0,
        }
    }

    fn edit_step(index: u32, input: ImageId, output: ImageId) -> ReasoningStep {
        ReasoningStep {
            index,
            input_image: input,
            verdict: Verdict {
                matched: false,
                raw_text: "MATCH: No\nEDIT: ADD(ball)".into(),
            },
            edit_prompt: Some("ADD(ball)".into()),
            output_image: Some(output),
            latency_understand_ms: 1,
            latency_edit_ms: 1,
        }
    }

    fn base_trace() -> ReasoningTrace {
        let initial = img("initial");
        ReasoningTrace {
            version: TRACE_SCHEMA_VERSION,
            prompt: PromptSpec::new("p1", "count(ball,2)").unwrap(),
            config: ReasoningConfig::default(),
            initial_image: initial.clone(),
            steps: vec![matched_step(1, initial.clone(), 2)],
            final_image: initial,
            terminated_by: TerminationReason::Match,
            latency_generate_ms: 3,
            total_latency_ms: 5,
        }
    }

    #[test]
    fn defaults_match_contract() {
        let c = ReasoningConfig::default();
        assert_eq!(c.max_iterations, 4);
        assert_eq!(c.seed, 42);
        assert_eq!(c.missing_edit_policy, MissingEditPolicy::Error);
        assert_eq!(c.pipeline, Pipeline::Uig);
    }

    #[test]
    fn valid_match_trace_passes() {
        base_trace().validate().unwrap();
    }

    #[test]
    fn budget_trace_final_must_be_last_output() {
        let initial = img("a");
        let mid = img("b");
        let last = img("c");
        let mut t = base_trace();
        t.config.max_iterations = 2;
        t.steps = vec![
            edit_step(1, initial.clone(), mid.clone()),
            edit_step(2, mid, last.clone()),
        ];
        t.initial_image = initial;
        t.final_image = last;
        t.terminated_by = TerminationReason::Budget;
        t.total_latency_ms = 100;
        t.validate().unwrap();

        t.final_image = img("tampered");
        let err = t.validate().unwrap_err();
        assert!(err.to_string().contains("last step's output"));
    }

    #[test]
    fn tampered_match_final_is_named() {
        let mut t = base_trace();
        t.final_image = img("tampered");
        let err = t.validate().unwrap_err();
        assert!(err.to_string().contains("matching verdict inspected"));
    }

    #[test]
    fn matched_step_with_output_rejected() {
        let mut t = base_trace();
        t.steps[0].output_image = Some(img("x"));
        assert!(t.validate().is_err());
    }

    #[test]
    fn broken_chain_rejected() {
        let initial = img("a");
        let mut t = base_trace();
        t.config.max_iterations = 2;
        t.steps = vec![
            edit_step(1, initial.clone(), img("b")),
            edit_step(2, img("WRONG"), img("c")),
        ];
        t.initial_image = initial;
        t.final_image = img("c");
        t.terminated_by = TerminationReason::Budget;
        t.total_latency_ms = 100;
        let err = t.validate().unwrap_err();
        assert!(err.to_string().contains("chain"));
    }

    #[test]
    fn baseline_must_have_no_steps() {
        let initial = img("a");
        let t = ReasoningTrace {
            version: TRACE_SCHEMA_VERSION,
            prompt: PromptSpec::new("p", "x").unwrap(),
            config: ReasoningConfig::default().with_pipeline(Pipeline::Baseline),
            initial_image: initial.clone(),
            steps: vec![],
            final_image: initial,
            terminated_by: TerminationReason::Budget,
            latency_generate_ms: 1,
            total_latency_ms: 1,
        };
        t.validate().unwrap();
    }

    #[test]
    fn json_round_trip_preserves_trace() {
        let t = base_trace();
        let json = t.to_json_pretty();
        let back = ReasoningTrace::from_json(&json).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn unknown_schema_version_rejected() {
        let mut t = base_trace();
        t.version = 9;
        let json = t.to_json_pretty();
        let err = ReasoningTrace::from_json(&json).unwrap_err();
        assert!(err.to_string().contains("version 9"));
    }

    #[test]
    fn fingerprint_ignores_latency() {
        let mut a = base_trace();
        let mut b = base_trace();
        a.total_latency_ms = 100;
        b.total_latency_ms = 999;
        b.steps[0].latency_understand_ms = 77;
        assert_eq!(a.fingerprint(), b.fingerprint());
    }

    #[test]
    fn config_bounds_enforced() {
        let mut c = ReasoningConfig {
            max_iterations: 0,
            ..ReasoningConfig::default()
        };
        assert!(c.validate().is_err());
        c.max_iterations = 33;
        assert!(c.validate().is_err());
        c.max_iterations = 32;
        assert!(c.validate().is_ok());
    }
}
