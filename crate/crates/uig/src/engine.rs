//! The reasoning state machine: generate, then understand/edit until the
//! verdict matches or the iteration budget runs out.
//!
//! Loop semantics: the initial image is generated once; each iteration i
//! (1-based) understands the previous image, stops with that image on a
//! "Yes" verdict, and otherwise edits — including at the final iteration,
//! whose edit is returned unverified under budget termination.
//!
//! Three pipeline variants share this skeleton: `baseline` stops after the
//! initial generation; `nobridge` runs the full loop but feeds every edit
//! the original prompt instead of the diagnosis; `uig` is the full loop.

use std::time::Instant;

use crate::backend::{derive_seed, UnifiedModelBackend};
use crate::error::{Error, Result};
use crate::image::{ImageId, ImageRef};
use crate::protocol::{parse_understanding_response, UnderstandingTemplate};
use crate::trace::{
    MissingEditPolicy, Pipeline, PromptSpec, ReasoningConfig, ReasoningStep, ReasoningTrace,
    TerminationReason, TRACE_SCHEMA_VERSION,
};

/// A completed run: the persisted trace plus every distinct image produced,
/// in production order (initial first, then each step's output).
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub trace: ReasoningTrace,
    pub images: Vec<ImageRef>,
}

impl RunOutput {
    pub fn final_image(&self) -> &ImageRef {
        self.images
            .iter()
            .find(|img| img.id() == self.trace.final_image)
            .expect("final image is always among the produced images")
    }
}

/// Run the full understanding-in-generation loop with the shipped
/// understanding template.
pub fn run_reasoning<B: UnifiedModelBackend + ?Sized>(
    prompt: &PromptSpec,
    backend: &B,
    config: &ReasoningConfig,
) -> Result<RunOutput> {
    run_loop(prompt, backend, config, &UnderstandingTemplate::builtin(), true)
}

/// Dispatch on `config.pipeline`.
pub fn run_pipeline_variant<B: UnifiedModelBackend + ?Sized>(
    prompt: &PromptSpec,
    backend: &B,
    config: &ReasoningConfig,
) -> Result<RunOutput> {
    run_pipeline_with_template(prompt, backend, config, &UnderstandingTemplate::builtin())
}

pub fn run_pipeline_with_template<B: UnifiedModelBackend + ?Sized>(
    prompt: &PromptSpec,
    backend: &B,
    config: &ReasoningConfig,
    template: &UnderstandingTemplate,
) -> Result<RunOutput> {
    match config.pipeline {
        Pipeline::Baseline => run_baseline(prompt, backend, config),
        Pipeline::Nobridge => run_loop(prompt, backend, config, template, false),
        Pipeline::Uig => run_loop(prompt, backend, config, template, true),
    }
}

fn run_baseline<B: UnifiedModelBackend + ?Sized>(
    prompt: &PromptSpec,
    backend: &B,
    config: &ReasoningConfig,
) -> Result<RunOutput> {
    config.validate()?;
    backend.probe()?;
    let start = Instant::now();
    let (initial, latency_generate_ms) = timed(|| backend.generate(&prompt.text, derive_seed(config.seed, 0)))?;
    let trace = ReasoningTrace {
        version: TRACE_SCHEMA_VERSION,
        prompt: prompt.clone(),
        config: *config,
        initial_image: initial.id(),
        steps: Vec::new(),
        final_image: initial.id(),
        terminated_by: TerminationReason::Budget,
        latency_generate_ms,
        total_latency_ms: elapsed_ms(start),
    };
    trace.validate()?;
    Ok(RunOutput {
        trace,
        images: vec![initial],
    })
}

fn run_loop<B: UnifiedModelBackend + ?Sized>(
    prompt: &PromptSpec,
    backend: &B,
    config: &ReasoningConfig,
    template: &UnderstandingTemplate,
    bridge: bool,
) -> Result<RunOutput> {
    config.validate()?;
    backend.probe()?;
    let start = Instant::now();
    let understanding_prompt = template.render(prompt);

    let (initial, latency_generate_ms) =
        timed(|| backend.generate(&prompt.text, derive_seed(config.seed, 0)))?;

    let mut images = vec![initial.clone()];
    let mut steps: Vec<ReasoningStep> = Vec::new();
    let mut current = initial.clone();

    for index in 1..=config.max_iterations {
        let (raw, latency_understand_ms) =
            timed(|| backend.understand(&current, &understanding_prompt))?;
        // Without the bridge the diagnosis is discarded, so a missing edit
        // prompt can never be an error there.
        let policy = if bridge {
            config.missing_edit_policy
        } else {
            MissingEditPolicy::FallbackOriginalPrompt
        };
        let parsed = parse_understanding_response(&raw, policy)?;

        if parsed.verdict.matched {
            steps.push(ReasoningStep {
                index,
                input_image: current.id(),
                verdict: parsed.verdict,
                edit_prompt: None,
                output_image: None,
                latency_understand_ms,
                latency_edit_ms: 0,
            });
            break;
        }

        let instruction = if bridge {
            parsed
                .edit_prompt
                .clone()
                .unwrap_or_else(|| prompt.text.clone())
        } else {
            prompt.text.clone()
        };

        let (edited, latency_edit_ms) =
            timed(|| backend.edit(&current, &instruction, derive_seed(config.seed, index as u64)))?;

        steps.push(ReasoningStep {
            index,
            input_image: current.id(),
            verdict: parsed.verdict,
            edit_prompt: Some(instruction),
            output_image: Some(edited.id()),
            latency_understand_ms,
            latency_edit_ms,
        });
        images.push(edited.clone());
        current = edited;
    }

    let (final_image, terminated_by) = finalize(&steps, &initial.id(), config)?;
    let trace = ReasoningTrace {
        version: TRACE_SCHEMA_VERSION,
        prompt: prompt.clone(),
        config: *config,
        initial_image: initial.id(),
        steps,
        final_image,
        terminated_by,
        latency_generate_ms,
        total_latency_ms: elapsed_ms(start),
    };
    trace.validate()?;
    Ok(RunOutput { trace, images })
}

/// Determine the final image and termination reason from completed steps:
/// a matched verdict returns the image it inspected (the matching step's
/// input); otherwise the last step's edit output is returned under budget.
pub fn finalize(
    steps: &[ReasoningStep],
    initial_image: &ImageId,
    config: &ReasoningConfig,
) -> Result<(ImageId, TerminationReason)> {
    let inconsistent = |message: String| Err(Error::InconsistentTrace(message));
    if steps.is_empty() {
        return inconsistent("cannot finalize a run with no steps".into());
    }
    if steps.len() as u32 > config.max_iterations {
        return inconsistent(format!(
            "{} steps exceed max_iterations {}",
            steps.len(),
            config.max_iterations
        ));
    }
    for (i, step) in steps.iter().enumerate() {
        let expected_input = if i == 0 {
            initial_image
        } else {
            match &steps[i - 1].output_image {
                Some(out) => out,
                None => {
                    return inconsistent(format!(
                        "step {} follows a step with no output image",
                        step.index
                    ))
                }
            }
        };
        if &step.input_image != expected_input {
            return inconsistent(format!(
                "step {} input image does not chain from the previous stage",
                step.index
            ));
        }
        if step.verdict.matched && i + 1 != steps.len() {
            return inconsistent(format!("matched step {} must be the last step", step.index));
        }
    }
    let last = steps.last().expect("non-empty");
    if last.verdict.matched {
        Ok((last.input_image.clone(), TerminationReason::Match))
    } else {
        match &last.output_image {
            Some(out) => Ok((out.clone(), TerminationReason::Budget)),
            None => inconsistent("unmatched final step carries no output image".into()),
        }
    }
}

fn timed<T>(f: impl FnOnce() -> Result<T>) -> Result<(T, u64)> {
    let t0 = Instant::now();
    let value = f()?;
    Ok((value, elapsed_ms(t0)))
}

fn elapsed_ms(since: Instant) -> u64 {
    since.elapsed().as_millis() as u64
}
