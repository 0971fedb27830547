//! The constraint DSL: the simulator's prompt language.
//!
//! Grammar (whitespace-insensitive):
//!
//! ```text
//! prompt := clause (';' clause)*
//! clause := count | color | rel | style | 'not(' clause ')'
//! count  := 'count(' noun ',' integer ')'
//! color  := 'color(' noun ',' colorname ')'
//! rel    := 'rel(' noun ',' relation ',' noun ')'
//! style  := 'style(' adjective ',' noun ')'
//! ```
//!
//! Every constraint set has a canonical single-line rendering;
//! `parse(render(x)) == x` always, and `render(parse(s)) == s` whenever `s`
//! is already canonical.

use std::fmt;

use crate::error::{Error, Result};
use crate::sim::vocab::{ColorName, Noun, Relation, StyleName};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Constraint {
    /// Exactly `n` entities of `noun`.
    Count { noun: Noun, n: u32 },
    /// At least one entity of `noun`, and all of them colored `color`.
    Color { noun: Noun, color: ColorName },
    /// Some entity of `subject` stands in `relation` to some entity of `object`.
    Rel {
        subject: Noun,
        relation: Relation,
        object: Noun,
    },
    /// At least one entity of `noun`, and all of them carrying `style`.
    Style { style: StyleName, noun: Noun },
    /// Negation; nests at most one level (the inner constraint is never `Not`).
    Not(Box<Constraint>),
}

impl Constraint {
    pub fn negated(inner: Constraint) -> Constraint {
        debug_assert!(!matches!(inner, Constraint::Not(_)), "not(.) nests one level");
        Constraint::Not(Box::new(inner))
    }

    /// Nouns this constraint talks about.
    pub fn nouns(&self) -> Vec<Noun> {
        match self {
            Constraint::Count { noun, .. }
            | Constraint::Color { noun, .. }
            | Constraint::Style { noun, .. } => vec![*noun],
            Constraint::Rel { subject, object, .. } => {
                if subject == object {
                    vec![*subject]
                } else {
                    vec![*subject, *object]
                }
            }
            Constraint::Not(inner) => inner.nouns(),
        }
    }
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Constraint::Count { noun, n } => write!(f, "count({noun},{n})"),
            Constraint::Color { noun, color } => write!(f, "color({noun},{color})"),
            Constraint::Rel {
                subject,
                relation,
                object,
            } => write!(f, "rel({subject},{relation},{object})"),
            Constraint::Style { style, noun } => write!(f, "style({style},{noun})"),
            Constraint::Not(inner) => write!(f, "not({inner})"),
        }
    }
}

/// An ordered, duplicate-free list of constraints.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConstraintSet {
    constraints: Vec<Constraint>,
}

impl ConstraintSet {
    pub fn new(constraints: Vec<Constraint>) -> Result<Self> {
        for (i, c) in constraints.iter().enumerate() {
            if constraints[..i].contains(c) {
                return Err(Error::Syntax {
                    line: 1,
                    col: 1,
                    message: format!("duplicate constraint {c}"),
                });
            }
        }
        Ok(ConstraintSet { constraints })
    }

    /// Parse DSL text into a constraint set.
    pub fn parse(text: &str) -> Result<Self> {
        Parser::new(text).parse_prompt()
    }

    /// Canonical single-line rendering: clauses joined by `"; "`.
    pub fn render(&self) -> String {
        self.constraints
            .iter()
            .map(|c| c.to_string())
            .collect::<Vec<_>>()
            .join("; ")
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn len(&self) -> usize {
        self.constraints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.constraints.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Constraint> {
        self.constraints.iter()
    }
}

impl fmt::Display for ConstraintSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

/// Cursor over the input with line/column tracking for error positions.
struct Parser<'a> {
    chars: Vec<char>,
    pos: usize,
    line: usize,
    col: usize,
    _text: &'a str,
}

impl<'a> Parser<'a> {
    fn new(text: &'a str) -> Self {
        Parser {
            chars: text.chars().collect(),
            pos: 0,
            line: 1,
            col: 1,
            _text: text,
        }
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += 1;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(c) if c.is_whitespace()) {
            self.bump();
        }
    }

    fn syntax_err(&self, message: impl Into<String>) -> Error {
        Error::Syntax {
            line: self.line,
            col: self.col,
            message: message.into(),
        }
    }

    fn expect(&mut self, expected: char) -> Result<()> {
        self.skip_ws();
        match self.peek() {
            Some(c) if c == expected => {
                self.bump();
                Ok(())
            }
            Some(c) => Err(self.syntax_err(format!("expected '{expected}', found '{c}'"))),
            None => Err(self.syntax_err(format!("expected '{expected}', found end of input"))),
        }
    }

    /// A bare word: letters, digits, underscores.
    fn word(&mut self) -> Result<(String, usize, usize)> {
        self.skip_ws();
        let (line, col) = (self.line, self.col);
        let mut w = String::new();
        while matches!(self.peek(), Some(c) if c.is_ascii_alphanumeric() || c == '_') {
            w.push(self.bump().unwrap());
        }
        if w.is_empty() {
            return Err(Error::Syntax {
                line,
                col,
                message: match self.peek() {
                    Some(c) => format!("expected a word, found '{c}'"),
                    None => "expected a word, found end of input".to_string(),
                },
            });
        }
        Ok((w, line, col))
    }

    fn noun(&mut self) -> Result<Noun> {
        let (w, line, col) = self.word()?;
        Noun::lookup(&w).ok_or(Error::Vocabulary {
            line,
            col,
            word: w,
            kind: Noun::KIND,
        })
    }

    fn color(&mut self) -> Result<ColorName> {
        let (w, line, col) = self.word()?;
        ColorName::lookup(&w).ok_or(Error::Vocabulary {
            line,
            col,
            word: w,
            kind: ColorName::KIND,
        })
    }

    fn relation(&mut self) -> Result<Relation> {
        let (w, line, col) = self.word()?;
        Relation::lookup(&w).ok_or(Error::Vocabulary {
            line,
            col,
            word: w,
            kind: Relation::KIND,
        })
    }

    fn style(&mut self) -> Result<StyleName> {
        let (w, line, col) = self.word()?;
        StyleName::lookup(&w).ok_or(Error::Vocabulary {
            line,
            col,
            word: w,
            kind: StyleName::KIND,
        })
    }

    fn integer(&mut self) -> Result<u32> {
        let (w, line, col) = self.word()?;
        w.parse::<u32>().map_err(|_| Error::Syntax {
            line,
            col,
            message: format!("expected a non-negative integer, found {w:?}"),
        })
    }

    fn parse_prompt(&mut self) -> Result<ConstraintSet> {
        let mut constraints = Vec::new();
        loop {
            self.skip_ws();
            constraints.push(self.clause(false)?);
            self.skip_ws();
            match self.peek() {
                Some(';') => {
                    self.bump();
                }
                Some(c) => return Err(self.syntax_err(format!("expected ';' or end, found '{c}'"))),
                None => break,
            }
        }
        ConstraintSet::new(constraints)
    }

    fn clause(&mut self, inside_not: bool) -> Result<Constraint> {
        let (head, line, col) = self.word()?;
        match head.as_str() {
            "count" => {
                self.expect('(')?;
                let noun = self.noun()?;
                self.expect(',')?;
                let n = self.integer()?;
                self.expect(')')?;
                Ok(Constraint::Count { noun, n })
            }
            "color" => {
                self.expect('(')?;
                let noun = self.noun()?;
                self.expect(',')?;
                let color = self.color()?;
                self.expect(')')?;
                Ok(Constraint::Color { noun, color })
            }
            "rel" => {
                self.expect('(')?;
                let subject = self.noun()?;
                self.expect(',')?;
                let relation = self.relation()?;
                self.expect(',')?;
                let object = self.noun()?;
                self.expect(')')?;
                Ok(Constraint::Rel {
                    subject,
                    relation,
                    object,
                })
            }
            "style" => {
                self.expect('(')?;
                let style = self.style()?;
                self.expect(',')?;
                let noun = self.noun()?;
                self.expect(')')?;
                Ok(Constraint::Style { style, noun })
            }
            "not" => {
                if inside_not {
                    return Err(Error::Syntax {
                        line,
                        col,
                        message: "not(.) may not nest".to_string(),
                    });
                }
                self.expect('(')?;
                let inner = self.clause(true)?;
                self.expect(')')?;
                Ok(Constraint::negated(inner))
            }
            other => Err(Error::Syntax {
                line,
                col,
                message: format!(
                    "expected one of count/color/rel/style/not, found {other:?}"
                ),
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn noun(s: &str) -> Noun {
        Noun::lookup(s).unwrap()
    }

    #[test]
    fn parses_count_and_color() {
        let cs = ConstraintSet::parse("count(balloon,4); color(balloon,black)").unwrap();
        assert_eq!(cs.len(), 2);
        assert_eq!(
            cs.constraints()[0],
            Constraint::Count {
                noun: noun("balloon"),
                n: 4
            }
        );
    }

    #[test]
    fn parses_relation_constraint() {
        let cs = ConstraintSet::parse("rel(cup,behind,woman)").unwrap();
        assert_eq!(cs.len(), 1);
        assert!(matches!(cs.constraints()[0], Constraint::Rel { .. }));
    }

    #[test]
    fn whitespace_insensitive() {
        let a = ConstraintSet::parse("count( balloon , 4 ) ;\n color(balloon, black)").unwrap();
        let b = ConstraintSet::parse("count(balloon,4); color(balloon,black)").unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn empty_argument_is_a_syntax_error() {
        let err = ConstraintSet::parse("count(balloon, )").unwrap_err();
        match err {
            Error::Syntax { line, col, .. } => {
                assert_eq!(line, 1);
                assert!(col >= 15, "position should point at the empty argument, got col {col}");
            }
            other => panic!("expected syntax error, got {other}"),
        }
    }

    #[test]
    fn unknown_noun_is_a_vocabulary_error() {
        let err = ConstraintSet::parse("count(dragon,2)").unwrap_err();
        assert!(matches!(err, Error::Vocabulary { kind: "noun", .. }));
    }

    #[test]
    fn nested_not_rejected() {
        let err = ConstraintSet::parse("not(not(count(ball,1)))").unwrap_err();
        assert!(matches!(err, Error::Syntax { .. }));
        assert!(ConstraintSet::parse("not(count(ball,1))").is_ok());
    }

    #[test]
    fn duplicate_constraints_rejected() {
        assert!(ConstraintSet::parse("count(ball,2); count(ball,2)").is_err());
    }

    #[test]
    fn canonical_render_round_trips() {
        let s = "count(balloon,4); color(balloon,black); not(rel(cup,behind,woman))";
        let cs = ConstraintSet::parse(s).unwrap();
        assert_eq!(cs.render(), s);
        assert_eq!(ConstraintSet::parse(&cs.render()).unwrap(), cs);
    }
}
