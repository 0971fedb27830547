//! The understanding-prompt protocol: building the prompt sent to the
//! understanding stage, and parsing the free-form response into a verdict
//! plus optional editing instruction.
//!
//! Responses are expected to end with a machine-parseable footer:
//!
//! ```text
//! MATCH: <Yes|No>
//! EDIT: <instruction>     (only when No)
//! ```
//!
//! Parsing is total: every input yields a [`ParsedResponse`] or one of the
//! two declared errors, never anything else. Scanning is line-based,
//! case-insensitive, first valid occurrence wins, and trailing punctuation
//! on the verdict token is ignored.

use crate::error::{Error, Result};
use crate::trace::{MissingEditPolicy, PromptSpec, Verdict};

const BUILTIN_TEMPLATE: &str = include_str!("../assets/understanding_prompt_v1.txt");
const PLACEHOLDER: &str = "{prompt}";

/// Marker line the simulator uses to recover the original prompt from a
/// rendered understanding prompt.
pub const ORIGINAL_PROMPT_MARKER: &str = "Original prompt:";

/// Marker line for single yes/no verification queries (the question-based
/// judge protocol).
pub const QUERY_MARKER: &str = "Verification query:";

/// A versioned understanding-prompt template with a single `{prompt}`
/// placeholder.
#[derive(Debug, Clone)]
pub struct UnderstandingTemplate {
    template_text: String,
    version: u32,
}

impl UnderstandingTemplate {
    /// The template shipped with the artifact.
    pub fn builtin() -> Self {
        UnderstandingTemplate {
            template_text: BUILTIN_TEMPLATE.to_string(),
            version: 1,
        }
    }

    /// Validate and wrap external template text. Version 0 marks a custom
    /// (non-shipped) template.
    pub fn from_text(text: impl Into<String>) -> Result<Self> {
        let text = text.into();
        match text.matches(PLACEHOLDER).count() {
            1 => Ok(UnderstandingTemplate {
                template_text: text,
                version: 0,
            }),
            n => Err(Error::Template(format!(
                "template must contain the placeholder {PLACEHOLDER} exactly once, found {n}"
            ))),
        }
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self> {
        UnderstandingTemplate::from_text(std::fs::read_to_string(path)?)
    }

    pub fn version(&self) -> u32 {
        self.version
    }

    pub fn render(&self, original: &PromptSpec) -> String {
        self.template_text.replace(PLACEHOLDER, &original.text)
    }
}

/// Render the shipped understanding prompt for the original prompt.
pub fn build_understanding_prompt(original: &PromptSpec) -> String {
    UnderstandingTemplate::builtin().render(original)
}

/// The fixed yes/no prompt wrapping one judge question.
pub fn yes_no_question_prompt(question: &str) -> String {
    format!(
        "You are verifying a single attribute of an image.\n\
         {QUERY_MARKER} {question}\n\
         Answer on one line, exactly \"MATCH: Yes\" or \"MATCH: No\"."
    )
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedResponse {
    pub verdict: Verdict,
    /// Single-line editing instruction; `None` when matched, or when absent
    /// under the fallback policy.
    pub edit_prompt: Option<String>,
}

/// Parse an understanding response.
///
/// The first line carrying `MATCH:` with a yes/no value decides the
/// verdict; the first `EDIT:` line supplies the instruction. A missing
/// verdict is [`Error::UnparseableVerdict`]; a `No` without an instruction
/// is [`Error::MissingEditPrompt`] under [`MissingEditPolicy::Error`], and
/// an empty `edit_prompt` under the fallback policy (the caller then
/// substitutes the original prompt).
pub fn parse_understanding_response(
    raw: &str,
    policy: MissingEditPolicy,
) -> Result<ParsedResponse> {
    let mut matched: Option<bool> = None;
    let mut edit: Option<String> = None;

    for line in raw.lines() {
        let trimmed = line.trim();
        if matched.is_none() {
            if let Some(value) = key_value(trimmed, "match") {
                if let Some(v) = parse_yes_no(value) {
                    matched = Some(v);
                    continue;
                }
            }
        }
        if edit.is_none() {
            if let Some(value) = key_value(trimmed, "edit") {
                let value = value.trim();
                if !value.is_empty() {
                    edit = Some(value.to_string());
                }
            }
        }
    }

    let matched = matched.ok_or_else(|| Error::UnparseableVerdict {
        snippet: snippet(raw),
    })?;

    if matched {
        return Ok(ParsedResponse {
            verdict: Verdict {
                matched: true,
                raw_text: raw.to_string(),
            },
            edit_prompt: None,
        });
    }

    if edit.is_none() && policy == MissingEditPolicy::Error {
        return Err(Error::MissingEditPrompt);
    }

    Ok(ParsedResponse {
        verdict: Verdict {
            matched: false,
            raw_text: raw.to_string(),
        },
        edit_prompt: edit,
    })
}

/// `"MATCH: Yes"` -> `Some("Yes")`, case-insensitive on the key.
fn key_value<'a>(line: &'a str, key: &str) -> Option<&'a str> {
    let head = line.get(..key.len())?;
    if !head.eq_ignore_ascii_case(key) {
        return None;
    }
    let rest = line[key.len()..].trim_start();
    rest.strip_prefix(':')
}

fn parse_yes_no(value: &str) -> Option<bool> {
    let token = value
        .trim()
        .trim_end_matches(['.', '!', ',', ';', ':'])
        .trim();
    if token.eq_ignore_ascii_case("yes") {
        Some(true)
    } else if token.eq_ignore_ascii_case("no") {
        Some(false)
    } else {
        None
    }
}

fn snippet(raw: &str) -> String {
    let mut s: String = raw.chars().take(80).collect();
    if raw.chars().count() > 80 {
        s.push_str("...");
    }
    s
}

/// Recover the text following a marker line, used by the simulator to
/// extract the original prompt (or the verification query) from a rendered
/// understanding prompt.
pub fn extract_marked_line<'a>(text: &'a str, marker: &str) -> Option<&'a str> {
    text.lines().find_map(|line| {
        let trimmed = line.trim();
        trimmed
            .strip_prefix(marker)
            .map(str::trim)
            .filter(|rest| !rest.is_empty())
    })
}
