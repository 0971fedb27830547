//! The flawed generator, the noisy editor, and the perturbation table.
//!
//! Everything here is a pure function of its inputs plus an explicit seed:
//! the same (constraints, noise, seed) triple always produces the same
//! scene, byte for byte.
//!
//! Violation perturbations are the minimal semantic corruption per
//! constraint kind:
//!
//! | constraint      | corruption                                        |
//! |-----------------|---------------------------------------------------|
//! | count(n,k)      | count off by one or two (never below zero)        |
//! | color(n,c)      | one entity of `n` recolored to a different color  |
//! | rel(s,r,o)      | the matching edge replaced by its flipped inverse |
//! | style(st,n)     | the style dropped from one entity                 |
//! | not(c)          | `c` forced to hold                                |

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::check::satisfied;
use crate::sim::constraint::{Constraint, ConstraintSet};
use crate::sim::edit::{EditOp, EditScript};
use crate::sim::scene::{EntityId, SceneGraph};
use crate::sim::vocab::{ColorName, Noun, Relation};

/// Imperfection knobs for the simulated generator and editor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    /// Per-constraint probability that the generator breaks it.
    pub p_violate: f64,
    /// Per-op probability that an edit op silently fails.
    pub p_edit_fail: f64,
    /// Per-op (or, on the resample path, per-satisfied-constraint)
    /// probability of an additional mutation to an unrelated element.
    pub p_collateral: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig {
            p_violate: 0.5,
            p_edit_fail: 0.0,
            p_collateral: 0.0,
        }
    }
}

impl NoiseConfig {
    pub fn new(p_violate: f64, p_edit_fail: f64, p_collateral: f64) -> Result<Self> {
        let cfg = NoiseConfig {
            p_violate,
            p_edit_fail,
            p_collateral,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// A generator/editor that never errs.
    pub fn perfect() -> Self {
        NoiseConfig {
            p_violate: 0.0,
            p_edit_fail: 0.0,
            p_collateral: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, p) in [
            ("p_violate", self.p_violate),
            ("p_edit_fail", self.p_edit_fail),
            ("p_collateral", self.p_collateral),
        ] {
            if !(0.0..=1.0).contains(&p) || p.is_nan() {
                return Err(Error::InvalidConfig(format!(
                    "{name} must be in [0,1], got {p}"
                )));
            }
        }
        Ok(())
    }
}

/// Generate a scene for the constraints: first a fully satisfying scene is
/// constructed, then each constraint is independently corrupted with
/// probability `p_violate`.
pub fn sample_scene(constraints: &ConstraintSet, noise: &NoiseConfig, seed: u64) -> SceneGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut scene = build_satisfying(constraints);
    for constraint in constraints.iter() {
        let u: f64 = rng.gen();
        if u < noise.p_violate {
            force_violate(&mut scene, constraint, &mut rng);
        }
    }
    scene
}

/// Build a scene satisfying every constraint (assuming the set is
/// internally compatible). Deterministic: entities are created in first-
/// mention order with sequential ids.
fn build_satisfying(constraints: &ConstraintSet) -> SceneGraph {
    // Entity count targets: explicit count(.) wins, not(count(k)) defaults
    // to k+1, any other mention implies presence (one entity; two when a
    // relation needs distinct entities of the same noun).
    let mut order: Vec<Noun> = Vec::new();
    let mut explicit: Vec<(Noun, u32)> = Vec::new();
    let mut implied: Vec<(Noun, u32)> = Vec::new();

    let note = |list: &mut Vec<(Noun, u32)>, order: &mut Vec<Noun>, noun: Noun, n: u32| {
        if !order.contains(&noun) {
            order.push(noun);
        }
        match list.iter_mut().find(|(m, _)| *m == noun) {
            Some((_, existing)) => *existing = (*existing).max(n),
            None => list.push((noun, n)),
        }
    };

    for constraint in constraints.iter() {
        match constraint {
            Constraint::Count { noun, n } => note(&mut explicit, &mut order, *noun, *n),
            Constraint::Not(inner) => {
                if let Constraint::Count { noun, n } = inner.as_ref() {
                    note(&mut implied, &mut order, *noun, n + 1);
                } else {
                    for noun in inner.nouns() {
                        note(&mut implied, &mut order, noun, 1);
                    }
                    if let Constraint::Rel { subject, object, .. } = inner.as_ref() {
                        if subject == object {
                            note(&mut implied, &mut order, *subject, 2);
                        }
                    }
                }
            }
            Constraint::Rel { subject, object, .. } => {
                for noun in constraint.nouns() {
                    note(&mut implied, &mut order, noun, 1);
                }
                if subject == object {
                    note(&mut implied, &mut order, *subject, 2);
                }
            }
            other => {
                for noun in other.nouns() {
                    note(&mut implied, &mut order, noun, 1);
                }
            }
        }
    }

    let mut scene = SceneGraph::new();
    for noun in &order {
        let n = explicit
            .iter()
            .find(|(m, _)| m == noun)
            .or_else(|| implied.iter().find(|(m, _)| m == noun))
            .map(|(_, n)| *n)
            .unwrap_or(0);
        for _ in 0..n {
            scene.add_entity(*noun, None);
        }
    }

    // Attribute and relation pass, in constraint order.
    for constraint in constraints.iter() {
        match constraint {
            Constraint::Color { noun, color } => {
                for id in scene.ids_of(*noun) {
                    scene.set_color(id, *color);
                }
            }
            Constraint::Style { style, noun } => {
                for id in scene.ids_of(*noun) {
                    scene.add_style(id, *style);
                }
            }
            Constraint::Rel {
                subject,
                relation,
                object,
            } => {
                let (a, b) = canonical_pair(&mut scene, *subject, *object);
                scene.add_relation(a, *relation, b);
            }
            Constraint::Not(inner) => {
                // Entities default to no color / no styles, which already
                // violates the inner color/style constraint. A negated
                // relation is made concrete with the flipped edge.
                if let Constraint::Rel {
                    subject,
                    relation,
                    object,
                } = inner.as_ref()
                {
                    let (a, b) = canonical_pair(&mut scene, *subject, *object);
                    scene.add_relation(a, relation.inverse(), b);
                }
            }
            Constraint::Count { .. } => {}
        }
    }
    scene
}

/// Lowest-id entity of `noun`, created on demand.
fn ensure_entity(scene: &mut SceneGraph, noun: Noun) -> EntityId {
    match scene.ids_of(noun).first() {
        Some(id) => *id,
        None => scene.add_entity(noun, None),
    }
}

/// The canonical (lowest-id) subject/object pair for a relation edge.
/// Distinct entities; missing endpoints are created.
fn canonical_pair(scene: &mut SceneGraph, subject: Noun, object: Noun) -> (EntityId, EntityId) {
    let a = ensure_entity(scene, subject);
    let b = scene
        .ids_of(object)
        .into_iter()
        .find(|id| *id != a)
        .unwrap_or_else(|| scene.add_entity(object, None));
    (a, b)
}

/// Adjust the entity count of `noun` to exactly `target`. Additions clone
/// the lowest-id entity's attributes (so sibling color/style constraints
/// survive); removals prefer relation-free entities, newest first.
fn set_count_to(scene: &mut SceneGraph, noun: Noun, target: u32) {
    let current = scene.ids_of(noun).len() as u32;
    if current < target {
        let template = scene.entities_of(noun).first().map(|e| (*e).clone());
        for _ in 0..(target - current) {
            match &template {
                Some(t) => {
                    scene.add_clone_of(t);
                }
                None => {
                    scene.add_entity(noun, None);
                }
            }
        }
    } else if current > target {
        let mut doomed: Vec<EntityId> = Vec::new();
        let mut unrelated = scene.unrelated_ids_of(noun);
        unrelated.reverse();
        doomed.extend(unrelated);
        let mut rest: Vec<EntityId> = scene
            .ids_of(noun)
            .into_iter()
            .filter(|id| !doomed.contains(id))
            .collect();
        rest.reverse();
        doomed.extend(rest);
        for id in doomed.into_iter().take((current - target) as usize) {
            scene.remove_entity(id);
        }
    }
}

/// Corrupt the scene so that `constraint` no longer holds (no-op when it
/// already fails). `not(c)` is corrupted by forcing `c` to hold.
fn force_violate(scene: &mut SceneGraph, constraint: &Constraint, rng: &mut ChaCha8Rng) {
    match constraint {
        Constraint::Count { noun, n } => {
            let magnitude = rng.gen_range(1..=2u32);
            let shrink = *n > 0 && rng.gen_bool(0.5);
            let target = if shrink {
                n.saturating_sub(magnitude)
            } else {
                n + magnitude
            };
            set_count_to(scene, *noun, target);
        }
        Constraint::Color { noun, color } => {
            let ids = scene.ids_of(*noun);
            if ids.is_empty() {
                return; // vacuously violated already
            }
            let id = ids[rng.gen_range(0..ids.len())];
            let wrong: Vec<ColorName> = ColorName::all().filter(|c| c != color).collect();
            scene.set_color(id, wrong[rng.gen_range(0..wrong.len())]);
        }
        Constraint::Rel {
            subject,
            relation,
            object,
        } => {
            let edges = scene.matching_edges(*subject, *relation, *object);
            if edges.is_empty() {
                return;
            }
            for (s, r, o) in &edges {
                scene.remove_relation(*s, *r, *o);
            }
            let (s, _, o) = edges[0];
            scene.add_relation(s, relation.inverse(), o);
        }
        Constraint::Style { style, noun } => {
            let ids: Vec<EntityId> = scene
                .entities_of(*noun)
                .iter()
                .filter(|e| e.styles.contains(style))
                .map(|e| e.id)
                .collect();
            if ids.is_empty() {
                return;
            }
            let id = ids[rng.gen_range(0..ids.len())];
            scene.remove_style(id, *style);
        }
        Constraint::Not(inner) => force_satisfy(scene, inner, rng),
    }
}

/// Repair the scene so that `constraint` holds (no-op when it already
/// does). `not(c)` is satisfied by forcing `c` to fail.
fn force_satisfy(scene: &mut SceneGraph, constraint: &Constraint, rng: &mut ChaCha8Rng) {
    if satisfied(scene, constraint) {
        return;
    }
    match constraint {
        Constraint::Count { noun, n } => set_count_to(scene, *noun, *n),
        Constraint::Color { noun, color } => {
            ensure_entity(scene, *noun);
            for id in scene.ids_of(*noun) {
                scene.set_color(id, *color);
            }
        }
        Constraint::Rel {
            subject,
            relation,
            object,
        } => {
            let (a, b) = canonical_pair(scene, *subject, *object);
            scene.clear_relations_between(a, b);
            scene.add_relation(a, *relation, b);
        }
        Constraint::Style { style, noun } => {
            ensure_entity(scene, *noun);
            for id in scene.ids_of(*noun) {
                scene.add_style(id, *style);
            }
        }
        Constraint::Not(inner) => force_violate(scene, inner, rng),
    }
}

/// Deterministic application of a single edit op. See [`EditOp`] for the
/// exact semantics of each.
fn apply_op(scene: &mut SceneGraph, op: &EditOp) {
    match op {
        EditOp::Add { noun, color } => {
            scene.add_entity(*noun, *color);
        }
        EditOp::Remove { noun } => {
            for id in scene.ids_of(*noun) {
                scene.remove_entity(id);
            }
        }
        EditOp::SetColor { noun, color } => {
            ensure_entity(scene, *noun);
            for id in scene.ids_of(*noun) {
                scene.set_color(id, *color);
            }
        }
        EditOp::SetRel {
            subject,
            relation,
            object,
        } => {
            let (a, b) = canonical_pair(scene, *subject, *object);
            scene.clear_relations_between(a, b);
            scene.add_relation(a, *relation, b);
        }
        EditOp::SetCount { noun, n } => set_count_to(scene, *noun, *n),
        EditOp::SetStyle { noun, style } => {
            ensure_entity(scene, *noun);
            for id in scene.ids_of(*noun) {
                scene.add_style(id, *style);
            }
        }
        EditOp::ClearStyle { noun, style } => {
            for id in scene.ids_of(*noun) {
                scene.remove_style(id, *style);
            }
        }
    }
}

/// One random mutation of an element unrelated to `exclude` nouns:
/// recolor an entity, remove an entity, add an entity, or flip an edge.
/// Falls back to adding an entity when the drawn kind has no candidate.
fn collateral_mutation(scene: &mut SceneGraph, rng: &mut ChaCha8Rng, exclude: &[Noun]) {
    let kind = rng.gen_range(0..4u32);
    let victim_ids: Vec<EntityId> = scene
        .entities()
        .filter(|e| !exclude.contains(&e.noun))
        .map(|e| e.id)
        .collect();
    match kind {
        0 if !victim_ids.is_empty() => {
            let id = victim_ids[rng.gen_range(0..victim_ids.len())];
            let current = scene.entity(id).and_then(|e| e.color);
            let options: Vec<ColorName> =
                ColorName::all().filter(|c| Some(*c) != current).collect();
            scene.set_color(id, options[rng.gen_range(0..options.len())]);
        }
        1 if !victim_ids.is_empty() => {
            let id = victim_ids[rng.gen_range(0..victim_ids.len())];
            scene.remove_entity(id);
        }
        3 => {
            let edges: Vec<(EntityId, Relation, EntityId)> = scene
                .relations()
                .filter(|(s, _, o)| {
                    let s_ok = scene.entity(*s).is_some_and(|e| !exclude.contains(&e.noun));
                    let o_ok = scene.entity(*o).is_some_and(|e| !exclude.contains(&e.noun));
                    s_ok && o_ok
                })
                .copied()
                .collect();
            if edges.is_empty() {
                add_random_entity(scene, rng, exclude);
            } else {
                let (s, r, o) = edges[rng.gen_range(0..edges.len())];
                scene.remove_relation(s, r, o);
                scene.add_relation(s, r.inverse(), o);
            }
        }
        _ => add_random_entity(scene, rng, exclude),
    }
}

fn add_random_entity(scene: &mut SceneGraph, rng: &mut ChaCha8Rng, exclude: &[Noun]) {
    let nouns: Vec<Noun> = Noun::all().filter(|n| !exclude.contains(n)).collect();
    if nouns.is_empty() {
        return;
    }
    scene.add_entity(nouns[rng.gen_range(0..nouns.len())], None);
}

/// Apply an edit script with noise: each op silently fails with
/// probability `p_edit_fail`; each applied op additionally mutates an
/// unrelated element with probability `p_collateral`. The input scene is
/// untouched. Deterministic given (scene, script, noise, seed).
pub fn apply_edits(
    scene: &SceneGraph,
    script: &EditScript,
    noise: &NoiseConfig,
    seed: u64,
) -> SceneGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = scene.clone();
    for op in script.ops() {
        let fail: f64 = rng.gen();
        let collateral: f64 = rng.gen();
        if fail < noise.p_edit_fail {
            continue;
        }
        apply_op(&mut out, op);
        if collateral < noise.p_collateral {
            collateral_mutation(&mut out, &mut rng, &op.target_nouns());
        }
    }
    out
}

/// The no-bridge editing fallback: refine against the original prompt only.
///
/// Without a diagnosis, the editor regenerates each prompt element it finds
/// wanting and cannot avoid touching the rest: every violated constraint is
/// re-drawn (fixed with probability `1 - p_violate`), and every satisfied
/// constraint is caught in the regeneration and broken with probability
/// `p_collateral`.
pub fn resample_violating(
    scene: &SceneGraph,
    constraints: &ConstraintSet,
    noise: &NoiseConfig,
    seed: u64,
) -> SceneGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = scene.clone();
    let status: Vec<bool> = constraints.iter().map(|c| satisfied(&out, c)).collect();
    for (constraint, was_satisfied) in constraints.iter().zip(status) {
        let u: f64 = rng.gen();
        if was_satisfied {
            if u < noise.p_collateral {
                force_violate(&mut out, constraint, &mut rng);
            }
        } else if u >= noise.p_violate {
            force_satisfy(&mut out, constraint, &mut rng);
        }
    }
    out
}
