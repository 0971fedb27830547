//! Ground-truth judging: exact constraint satisfaction, scoring, and the
//! diagnosing understander that turns violations into a minimal edit script.

use crate::sim::constraint::{Constraint, ConstraintSet};
use crate::sim::edit::{EditOp, EditScript};
use crate::sim::scene::SceneGraph;
use crate::sim::vocab::Noun;

/// Exact satisfaction semantics, per constraint kind:
///
/// - `count(noun,n)`: exactly `n` entities of the noun.
/// - `color(noun,c)`: at least one entity of the noun, all colored `c`.
/// - `rel(s,r,o)`: some `s` entity related by `r` to some distinct `o` entity.
/// - `style(st,noun)`: at least one entity of the noun, all carrying `st`.
/// - `not(c)`: `c` is violated.
pub fn satisfied(scene: &SceneGraph, constraint: &Constraint) -> bool {
    match constraint {
        Constraint::Count { noun, n } => scene.entities_of(*noun).len() as u32 == *n,
        Constraint::Color { noun, color } => {
            let entities = scene.entities_of(*noun);
            !entities.is_empty() && entities.iter().all(|e| e.color == Some(*color))
        }
        Constraint::Rel {
            subject,
            relation,
            object,
        } => scene.any_relation(*subject, *relation, *object),
        Constraint::Style { style, noun } => {
            let entities = scene.entities_of(*noun);
            !entities.is_empty() && entities.iter().all(|e| e.styles.contains(style))
        }
        Constraint::Not(inner) => !satisfied(scene, inner),
    }
}

/// A violated constraint plus a human-readable witness of the failure.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    /// Index of the constraint within its set.
    pub index: usize,
    pub constraint: Constraint,
    pub witness: String,
}

#[derive(Debug, Clone, Default)]
pub struct ViolationSet {
    pub violations: Vec<Violation>,
}

impl ViolationSet {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn len(&self) -> usize {
        self.violations.len()
    }
}

pub fn check_constraints(scene: &SceneGraph, constraints: &ConstraintSet) -> ViolationSet {
    let violations = constraints
        .iter()
        .enumerate()
        .filter(|(_, c)| !satisfied(scene, c))
        .map(|(index, c)| Violation {
            index,
            constraint: c.clone(),
            witness: witness(scene, c),
        })
        .collect();
    ViolationSet { violations }
}

fn witness(scene: &SceneGraph, constraint: &Constraint) -> String {
    match constraint {
        Constraint::Count { noun, n } => {
            format!("expected {n} {noun}, found {}", scene.entities_of(*noun).len())
        }
        Constraint::Color { noun, color } => {
            let entities = scene.entities_of(*noun);
            if entities.is_empty() {
                format!("no {noun} present to be {color}")
            } else {
                let found: Vec<String> = entities
                    .iter()
                    .map(|e| e.color.map_or("uncolored".to_string(), |c| c.to_string()))
                    .collect();
                format!("{noun} should be {color}, found {}", found.join("/"))
            }
        }
        Constraint::Rel {
            subject,
            relation,
            object,
        } => format!("no {subject} is {relation} any {object}"),
        Constraint::Style { style, noun } => {
            if scene.entities_of(*noun).is_empty() {
                format!("no {noun} present to be {style}")
            } else {
                format!("{noun} should be {style}")
            }
        }
        Constraint::Not(inner) => format!("forbidden: {inner} holds"),
    }
}

/// Fraction of constraints satisfied; an empty set scores 1.0 by convention.
pub fn score(scene: &SceneGraph, constraints: &ConstraintSet) -> f64 {
    if constraints.is_empty() {
        return 1.0;
    }
    let violated = check_constraints(scene, constraints).len();
    1.0 - violated as f64 / constraints.len() as f64
}

/// The repair op for one violated constraint. Deterministic; one op per
/// violation; applying the op under a perfect editor satisfies the
/// constraint without disturbing compatible sibling constraints.
fn fix_op(scene: &SceneGraph, constraints: &ConstraintSet, violated: &Constraint) -> EditOp {
    match violated {
        Constraint::Count { noun, n } => EditOp::SetCount { noun: *noun, n: *n },
        Constraint::Color { noun, color } => {
            // A wholly missing entity reads as an omission: repair by adding
            // it, unless a count-type constraint governs this noun (then
            // the count op owns entity creation; SET_COLOR colors whatever
            // it produces).
            let missing = scene.entities_of(*noun).is_empty();
            let counted = has_count_constraint(constraints, *noun);
            if missing && !counted {
                EditOp::Add {
                    noun: *noun,
                    color: Some(*color),
                }
            } else {
                EditOp::SetColor {
                    noun: *noun,
                    color: *color,
                }
            }
        }
        Constraint::Rel {
            subject,
            relation,
            object,
        } => EditOp::SetRel {
            subject: *subject,
            relation: *relation,
            object: *object,
        },
        Constraint::Style { style, noun } => EditOp::SetStyle {
            noun: *noun,
            style: *style,
        },
        Constraint::Not(inner) => match inner.as_ref() {
            Constraint::Count { noun, n } => EditOp::SetCount {
                noun: *noun,
                n: n + 1,
            },
            Constraint::Color { noun, color } => EditOp::SetColor {
                noun: *noun,
                color: color.alternative(),
            },
            Constraint::Rel {
                subject,
                relation,
                object,
            } => EditOp::SetRel {
                subject: *subject,
                relation: relation.inverse(),
                object: *object,
            },
            Constraint::Style { style, noun } => EditOp::ClearStyle {
                noun: *noun,
                style: *style,
            },
            Constraint::Not(_) => unreachable!("not(.) nests one level"),
        },
    }
}

fn has_count_constraint(constraints: &ConstraintSet, noun: Noun) -> bool {
    constraints.iter().any(|c| match c {
        Constraint::Count { noun: n, .. } => *n == noun,
        Constraint::Not(inner) => {
            matches!(inner.as_ref(), Constraint::Count { noun: n, .. } if *n == noun)
        }
        _ => false,
    })
}

/// The diagnosing understander. Returns the raw response text (already in
/// the `MATCH:`/`EDIT:` footer format) and, when the scene fails, the
/// minimal repair script — one op per violated constraint, in constraint
/// order.
pub fn diagnose(scene: &SceneGraph, constraints: &ConstraintSet) -> (String, Option<EditScript>) {
    let violations = check_constraints(scene, constraints);
    let total = constraints.len();
    if violations.is_empty() {
        let text = format!(
            "Checked {total} constraint(s) against the scene; every subject, \
             attribute, and relation matches.\nMATCH: Yes"
        );
        return (text, None);
    }
    let witnesses: Vec<&str> = violations
        .violations
        .iter()
        .map(|v| v.witness.as_str())
        .collect();
    let ops: Vec<EditOp> = violations
        .violations
        .iter()
        .map(|v| fix_op(scene, constraints, &v.constraint))
        .collect();
    let script = EditScript::new(ops).expect("violations are non-empty");
    let text = format!(
        "Checked {total} constraint(s) against the scene; {} violated: {}.\nMATCH: No\nEDIT: {}",
        violations.len(),
        witnesses.join("; "),
        script.render()
    );
    (text, Some(script))
}
