//! Benchmark harness: suites, judges, metrics, and the benchmark runner.

pub mod bench;
pub mod gned;
pub mod judge;

pub use bench::{
    read_report, render_trend_csv, run_benchmark, write_report, BenchOptions, BenchmarkReport,
    EntryRow, LatencyStats, PipelineResult, PipelineTiming,
};
pub use gned::gned;
pub use judge::{judge_alignment, questions_for_constraints};

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::content_address;
use crate::sim::ConstraintSet;
use crate::trace::PromptSpec;

/// How an entry's images are judged: against exact constraints (simulator
/// scenes), or by yes/no questions put to an understanding backend.
#[derive(Debug, Clone)]
pub enum JudgeSpec {
    Constraints(ConstraintSet),
    Questions(Vec<String>),
}

#[derive(Debug, Clone)]
pub struct SuiteEntry {
    pub prompt: PromptSpec,
    pub judge: JudgeSpec,
}

/// A loaded prompt suite plus the digest of the file it came from.
#[derive(Debug, Clone)]
pub struct Suite {
    pub entries: Vec<SuiteEntry>,
    pub digest: String,
}

/// One line of a `.jsonl` suite file.
#[derive(Debug, Serialize, Deserialize)]
struct SuiteRecord {
    id: String,
    prompt: String,
    judge: JudgeRecord,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum JudgeRecord {
    /// Judge against the constraints parsed from the prompt text itself.
    Constraints,
    Questions { questions: Vec<String> },
}

/// Load a suite. `.jsonl` files hold one JSON record per line; any other
/// extension is read as DSL text (one prompt per line, `#` comments),
/// judged against its own constraints with generated ids.
pub fn load_suite(path: &Path) -> Result<Suite> {
    let raw = std::fs::read(path)?;
    let digest = content_address(&raw);
    let text = String::from_utf8(raw)
        .map_err(|_| Error::Schema {
            record: 0,
            message: "suite file is not valid UTF-8".to_string(),
        })?;

    let is_jsonl = path.extension().is_some_and(|e| e == "jsonl" || e == "json");
    let entries = if is_jsonl {
        parse_jsonl(&text)?
    } else {
        parse_dsl_lines(&text)?
    };

    if entries.is_empty() {
        return Err(Error::Schema {
            record: 0,
            message: "suite contains no entries".to_string(),
        });
    }
    for (i, entry) in entries.iter().enumerate() {
        if entries[..i].iter().any(|e| e.prompt.id == entry.prompt.id) {
            return Err(Error::Schema {
                record: i + 1,
                message: format!("duplicate id {:?}", entry.prompt.id),
            });
        }
    }
    Ok(Suite { entries, digest })
}

fn parse_jsonl(text: &str) -> Result<Vec<SuiteEntry>> {
    let mut entries = Vec::new();
    let mut record_no = 0usize;
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        record_no += 1;
        let record: SuiteRecord = serde_json::from_str(line).map_err(|e| Error::Schema {
            record: record_no,
            message: e.to_string(),
        })?;
        let prompt = PromptSpec::new(&record.id, &record.prompt).map_err(|e| Error::Schema {
            record: record_no,
            message: e.to_string(),
        })?;
        let judge = match record.judge {
            JudgeRecord::Constraints => {
                let constraints =
                    ConstraintSet::parse(&record.prompt).map_err(|e| Error::Schema {
                        record: record_no,
                        message: format!("constraints judge needs a DSL prompt: {e}"),
                    })?;
                JudgeSpec::Constraints(constraints)
            }
            JudgeRecord::Questions { questions } => {
                if questions.is_empty() {
                    return Err(Error::Schema {
                        record: record_no,
                        message: "questions judge needs at least one question".to_string(),
                    });
                }
                JudgeSpec::Questions(questions)
            }
        };
        entries.push(SuiteEntry { prompt, judge });
    }
    Ok(entries)
}

fn parse_dsl_lines(text: &str) -> Result<Vec<SuiteEntry>> {
    let mut entries = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let record_no = entries.len() + 1;
        let constraints = ConstraintSet::parse(line).map_err(|e| Error::Schema {
            record: record_no,
            message: format!("line {}: {e}", lineno + 1),
        })?;
        let prompt = PromptSpec::new(format!("p{record_no:03}"), line).expect("non-empty line");
        entries.push(SuiteEntry {
            prompt,
            judge: JudgeSpec::Constraints(constraints),
        });
    }
    Ok(entries)
}
