//! Independent oracles for the simulator: a second constraint evaluator
//! coded against the canonical serialization (not the scene structure),
//! the apply-then-check repair oracle, and the score identity.

mod common;

use std::collections::BTreeMap;

use common::{random_compatible_constraints, random_edit_script};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use uig::sim::{
    apply_edits, check_constraints, diagnose, sample_scene, score, Constraint, ConstraintSet,
    NoiseConfig, SceneGraph,
};

/// Brute-force evaluator over the canonical text serialization: parses the
/// `entity`/`rel` lines itself and checks each constraint by exhaustive
/// enumeration. Shares no code with `check_constraints`.
mod brute {
    use super::*;

    pub struct FlatScene {
        /// id -> (noun, color, styles)
        pub entities: BTreeMap<u32, (String, Option<String>, Vec<String>)>,
        /// (subject id, relation, object id)
        pub relations: Vec<(u32, String, u32)>,
    }

    pub fn parse(text: &str) -> FlatScene {
        let mut entities = BTreeMap::new();
        let mut relations = Vec::new();
        for line in text.lines().skip(1) {
            let tokens: Vec<&str> = line.split_whitespace().collect();
            match tokens.first() {
                Some(&"entity") => {
                    let id: u32 = tokens[1].parse().unwrap();
                    let noun = tokens[2].to_string();
                    let mut color = None;
                    let mut styles = Vec::new();
                    for t in &tokens[3..] {
                        if let Some(c) = t.strip_prefix("color=") {
                            color = Some(c.to_string());
                        } else if let Some(list) = t.strip_prefix("styles=") {
                            styles = list.split(',').map(str::to_string).collect();
                        }
                    }
                    entities.insert(id, (noun, color, styles));
                }
                Some(&"rel") => {
                    relations.push((
                        tokens[1].parse().unwrap(),
                        tokens[2].to_string(),
                        tokens[3].parse().unwrap(),
                    ));
                }
                _ => {}
            }
        }
        FlatScene { entities, relations }
    }

    pub fn satisfied(scene: &FlatScene, constraint: &Constraint) -> bool {
        match constraint {
            Constraint::Count { noun, n } => {
                let mut count = 0u32;
                for (candidate, _, _) in scene.entities.values() {
                    if candidate == noun.as_str() {
                        count += 1;
                    }
                }
                count == *n
            }
            Constraint::Color { noun, color } => {
                let mut present = false;
                for (candidate, c, _) in scene.entities.values() {
                    if candidate == noun.as_str() {
                        present = true;
                        if c.as_deref() != Some(color.as_str()) {
                            return false;
                        }
                    }
                }
                present
            }
            Constraint::Rel {
                subject,
                relation,
                object,
            } => {
                for (s, r, o) in &scene.relations {
                    if s == o || r != relation.as_str() {
                        continue;
                    }
                    let s_noun = scene.entities.get(s).map(|e| e.0.as_str());
                    let o_noun = scene.entities.get(o).map(|e| e.0.as_str());
                    if s_noun == Some(subject.as_str()) && o_noun == Some(object.as_str()) {
                        return true;
                    }
                }
                false
            }
            Constraint::Style { style, noun } => {
                let mut present = false;
                for (candidate, _, styles) in scene.entities.values() {
                    if candidate == noun.as_str() {
                        present = true;
                        if !styles.iter().any(|s| s == style.as_str()) {
                            return false;
                        }
                    }
                }
                present
            }
            Constraint::Not(inner) => !satisfied(scene, inner),
        }
    }
}

fn random_noisy_scene(rng: &mut ChaCha8Rng, constraints: &ConstraintSet) -> SceneGraph {
    let noise = NoiseConfig::new(rng.gen(), 0.0, 0.0).unwrap();
    let scene = sample_scene(constraints, &noise, rng.gen());
    // Half the time, churn it further with a random edit script so the
    // oracle sees scenes the generator alone would never produce.
    if rng.gen_bool(0.5) {
        let script = random_edit_script(rng);
        apply_edits(&scene, &script, &NoiseConfig::perfect(), rng.gen())
    } else {
        scene
    }
}

#[test]
fn checker_agrees_with_brute_force_evaluator() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x0AC1E);
    for case in 0..1000u64 {
        let k = rng.gen_range(1..=6);
        let own = random_compatible_constraints(&mut rng, k);
        // Cross-pair half the cases: constraints judged against a scene
        // generated for a different prompt.
        let judged = if rng.gen_bool(0.5) {
            own.clone()
        } else {
            let k2 = rng.gen_range(1..=6);
            random_compatible_constraints(&mut rng, k2)
        };
        let scene = random_noisy_scene(&mut rng, &own);
        let flat = brute::parse(&scene.canonical_string());

        let violations = check_constraints(&scene, &judged);
        for (i, constraint) in judged.iter().enumerate() {
            let fast = !violations.violations.iter().any(|v| v.index == i);
            let slow = brute::satisfied(&flat, constraint);
            assert_eq!(
                fast, slow,
                "case {case}: disagree on {constraint} over\n{}",
                scene.canonical_string()
            );
        }
    }
}

#[test]
fn score_matches_violation_fraction_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for _ in 0..1000 {
        let k = rng.gen_range(1..=6);
        let constraints = random_compatible_constraints(&mut rng, k);
        let scene = random_noisy_scene(&mut rng, &constraints);
        let violations = check_constraints(&scene, &constraints).len() as f64;
        let expected = 1.0 - violations / constraints.len() as f64;
        assert_eq!(score(&scene, &constraints), expected);
    }
}

#[test]
fn diagnosis_repairs_every_violation_in_one_pass() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xF1F0);
    let mut nontrivial = 0u32;
    for case in 0..1000u64 {
        let k = rng.gen_range(1..=6);
        let constraints = random_compatible_constraints(&mut rng, k);
        let noise = NoiseConfig::new(rng.gen_range(0.3..=1.0), 0.0, 0.0).unwrap();
        let scene = sample_scene(&constraints, &noise, rng.gen());
        let violations = check_constraints(&scene, &constraints);
        let (text, script) = diagnose(&scene, &constraints);

        if violations.is_empty() {
            assert!(script.is_none(), "case {case}");
            continue;
        }
        nontrivial += 1;
        let script = script.expect("violations demand a script");
        assert_eq!(
            script.len(),
            violations.len(),
            "case {case}: one op per violated constraint\n{text}"
        );
        let fixed = apply_edits(&scene, &script, &NoiseConfig::perfect(), rng.gen());
        let remaining = check_constraints(&fixed, &constraints);
        assert!(
            remaining.is_empty(),
            "case {case}: {} violations survive repair of {} over {}\nscript: {}\nbefore:\n{}\nafter:\n{}",
            remaining.len(),
            violations.len(),
            constraints.render(),
            script.render(),
            scene.canonical_string(),
            fixed.canonical_string()
        );
    }
    assert!(nontrivial > 700, "perturbation rates should leave most cases non-trivial");
}
