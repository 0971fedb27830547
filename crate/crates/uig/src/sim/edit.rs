//! Edit scripts: the simulator's concrete editing-instruction language.
//!
//! A script is a non-empty, `"; "`-joined sequence of ops on a single line,
//! e.g. `SET_COUNT(balloon,4); SET_COLOR(balloon,black)`. The canonical
//! rendering is parse-round-trippable. Free text that is not a canonical
//! script may still be salvaged by extracting the first recognizable op
//! (parenthesized or bare, e.g. `ADD ball`).

use std::fmt;

use crate::error::{Error, Result};
use crate::sim::vocab::{ColorName, Noun, Relation, StyleName};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EditOp {
    /// Add one entity, optionally colored.
    Add { noun: Noun, color: Option<ColorName> },
    /// Remove every entity of the noun (and relations touching them).
    Remove { noun: Noun },
    /// Color every entity of the noun, creating one if none exists.
    SetColor { noun: Noun, color: ColorName },
    /// Relate the canonical (lowest-id) subject/object pair, replacing any
    /// existing edges between that pair; missing endpoints are created.
    SetRel {
        subject: Noun,
        relation: Relation,
        object: Noun,
    },
    /// Adjust the entity count of the noun to exactly `n`. Additions clone
    /// the lowest-id existing entity's attributes; removals prefer
    /// relation-free entities, newest first.
    SetCount { noun: Noun, n: u32 },
    /// Add the style to every entity of the noun, creating one if none exists.
    SetStyle { noun: Noun, style: StyleName },
    /// Remove the style from every entity of the noun.
    ClearStyle { noun: Noun, style: StyleName },
}

impl EditOp {
    /// Nouns this op targets (for collateral-damage exclusion).
    pub fn target_nouns(&self) -> Vec<Noun> {
        match self {
            EditOp::Add { noun, .. }
            | EditOp::Remove { noun }
            | EditOp::SetColor { noun, .. }
            | EditOp::SetCount { noun, .. }
            | EditOp::SetStyle { noun, .. }
            | EditOp::ClearStyle { noun, .. } => vec![*noun],
            EditOp::SetRel { subject, object, .. } => {
                if subject == object {
                    vec![*subject]
                } else {
                    vec![*subject, *object]
                }
            }
        }
    }
}

impl fmt::Display for EditOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EditOp::Add { noun, color: None } => write!(f, "ADD({noun})"),
            EditOp::Add {
                noun,
                color: Some(c),
            } => write!(f, "ADD({noun},{c})"),
            EditOp::Remove { noun } => write!(f, "REMOVE({noun})"),
            EditOp::SetColor { noun, color } => write!(f, "SET_COLOR({noun},{color})"),
            EditOp::SetRel {
                subject,
                relation,
                object,
            } => write!(f, "SET_REL({subject},{relation},{object})"),
            EditOp::SetCount { noun, n } => write!(f, "SET_COUNT({noun},{n})"),
            EditOp::SetStyle { noun, style } => write!(f, "SET_STYLE({noun},{style})"),
            EditOp::ClearStyle { noun, style } => write!(f, "CLEAR_STYLE({noun},{style})"),
        }
    }
}

const OP_NAMES: &[&str] = &[
    // Longest first so SET_COLOR is not matched as SET_C + junk, and
    // CLEAR_STYLE before SET_STYLE's substring cousins.
    "CLEAR_STYLE",
    "SET_COLOR",
    "SET_COUNT",
    "SET_STYLE",
    "SET_REL",
    "REMOVE",
    "ADD",
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EditScript {
    ops: Vec<EditOp>,
}

impl EditScript {
    pub fn new(ops: Vec<EditOp>) -> Result<Self> {
        if ops.is_empty() {
            return Err(Error::Syntax {
                line: 1,
                col: 1,
                message: "edit script must contain at least one op".to_string(),
            });
        }
        Ok(EditScript { ops })
    }

    pub fn ops(&self) -> &[EditOp] {
        &self.ops
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    /// Canonical single-line rendering.
    pub fn render(&self) -> String {
        self.ops
            .iter()
            .map(|op| op.to_string())
            .collect::<Vec<_>>()
            .join("; ")
    }

    /// Strict parse of a canonical (or near-canonical) script: ops separated
    /// by ';', each `NAME(arg,...)`, case-insensitive names, whitespace-free
    /// or whitespace-sprinkled both accepted.
    pub fn parse(text: &str) -> Result<Self> {
        let mut ops = Vec::new();
        for (idx, chunk) in text.split(';').enumerate() {
            let chunk = chunk.trim();
            if chunk.is_empty() {
                return Err(Error::Syntax {
                    line: 1,
                    col: 1,
                    message: format!("empty op at position {}", idx + 1),
                });
            }
            ops.push(parse_op(chunk)?);
        }
        EditScript::new(ops)
    }

    /// Salvage rule: extract the first recognizable op anywhere in free
    /// text. Accepts both `ADD(ball)` and bare `ADD ball` forms. Returns
    /// `None` when nothing recognizable is found.
    pub fn salvage(text: &str) -> Option<EditScript> {
        let upper = text.to_ascii_uppercase();
        let mut best: Option<(usize, &str)> = None;
        for name in OP_NAMES {
            if let Some(pos) = find_op_token(&upper, name) {
                if best.is_none_or(|(p, _)| pos < p) {
                    best = Some((pos, name));
                }
            }
        }
        let (pos, name) = best?;
        let rest = &text[pos + name.len()..];
        let args = if let Some(open) = rest.find('(') {
            // Parenthesized form; ignore anything before '(' and after ')'.
            let inner = &rest[open + 1..];
            let close = inner.find(')')?;
            inner[..close].to_string()
        } else {
            // Bare form: args run to end of line / sentence.
            rest.split(['\n', ';', '.'])
                .next()
                .unwrap_or("")
                .trim()
                .replace(char::is_whitespace, ",")
        };
        let op = parse_op(&format!("{name}({args})")).ok()?;
        EditScript::new(vec![op]).ok()
    }
}

impl fmt::Display for EditScript {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

/// Find `name` in (uppercased) text at a token boundary: not preceded or
/// followed by an identifier character.
fn find_op_token(upper: &str, name: &str) -> Option<usize> {
    let bytes = upper.as_bytes();
    let is_ident = |b: u8| b.is_ascii_alphanumeric() || b == b'_';
    let mut from = 0;
    while let Some(off) = upper[from..].find(name) {
        let pos = from + off;
        let before_ok = pos == 0 || !is_ident(bytes[pos - 1]);
        let after = pos + name.len();
        let after_ok = after >= bytes.len() || !is_ident(bytes[after]);
        if before_ok && after_ok {
            return Some(pos);
        }
        from = pos + 1;
    }
    None
}

fn parse_op(chunk: &str) -> Result<EditOp> {
    let err = |message: String| Error::Syntax {
        line: 1,
        col: 1,
        message,
    };
    let open = chunk
        .find('(')
        .ok_or_else(|| err(format!("op {chunk:?} missing '('")))?;
    if !chunk.trim_end().ends_with(')') {
        return Err(err(format!("op {chunk:?} missing ')'")));
    }
    let name = chunk[..open].trim().to_ascii_uppercase();
    let inner = chunk.trim_end();
    let args: Vec<String> = inner[open + 1..inner.len() - 1]
        .split(',')
        .map(|a| a.trim().to_string())
        .filter(|a| !a.is_empty())
        .collect();

    let noun_arg = |i: usize| -> Result<Noun> {
        let w = args
            .get(i)
            .ok_or_else(|| err(format!("{name} missing argument {}", i + 1)))?;
        Noun::lookup(w).ok_or(Error::Vocabulary {
            line: 1,
            col: 1,
            word: w.clone(),
            kind: Noun::KIND,
        })
    };
    let color_arg = |i: usize| -> Result<ColorName> {
        let w = args
            .get(i)
            .ok_or_else(|| err(format!("{name} missing argument {}", i + 1)))?;
        ColorName::lookup(w).ok_or(Error::Vocabulary {
            line: 1,
            col: 1,
            word: w.clone(),
            kind: ColorName::KIND,
        })
    };
    let style_arg = |i: usize| -> Result<StyleName> {
        let w = args
            .get(i)
            .ok_or_else(|| err(format!("{name} missing argument {}", i + 1)))?;
        StyleName::lookup(w).ok_or(Error::Vocabulary {
            line: 1,
            col: 1,
            word: w.clone(),
            kind: StyleName::KIND,
        })
    };

    let arity = |n: usize| -> Result<()> {
        if args.len() == n {
            Ok(())
        } else {
            Err(err(format!("{name} expects {n} argument(s), got {}", args.len())))
        }
    };

    match name.as_str() {
        "ADD" => {
            if args.len() == 1 {
                Ok(EditOp::Add {
                    noun: noun_arg(0)?,
                    color: None,
                })
            } else {
                arity(2)?;
                Ok(EditOp::Add {
                    noun: noun_arg(0)?,
                    color: Some(color_arg(1)?),
                })
            }
        }
        "REMOVE" => {
            arity(1)?;
            Ok(EditOp::Remove { noun: noun_arg(0)? })
        }
        "SET_COLOR" => {
            arity(2)?;
            Ok(EditOp::SetColor {
                noun: noun_arg(0)?,
                color: color_arg(1)?,
            })
        }
        "SET_REL" => {
            arity(3)?;
            let subject = noun_arg(0)?;
            let w = &args[1];
            let relation = Relation::lookup(w).ok_or(Error::Vocabulary {
                line: 1,
                col: 1,
                word: w.clone(),
                kind: Relation::KIND,
            })?;
            let object = noun_arg(2)?;
            Ok(EditOp::SetRel {
                subject,
                relation,
                object,
            })
        }
        "SET_COUNT" => {
            arity(2)?;
            let noun = noun_arg(0)?;
            let n = args[1]
                .parse::<u32>()
                .map_err(|_| err(format!("SET_COUNT count must be an integer, got {:?}", args[1])))?;
            Ok(EditOp::SetCount { noun, n })
        }
        "SET_STYLE" => {
            arity(2)?;
            Ok(EditOp::SetStyle {
                noun: noun_arg(0)?,
                style: style_arg(1)?,
            })
        }
        "CLEAR_STYLE" => {
            arity(2)?;
            Ok(EditOp::ClearStyle {
                noun: noun_arg(0)?,
                style: style_arg(1)?,
            })
        }
        other => Err(err(format!("unknown op {other:?}"))),
    }
}
