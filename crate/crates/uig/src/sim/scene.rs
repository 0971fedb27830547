//! Scene graphs: the simulator's symbolic stand-in for an image.
//!
//! A scene is a set of entities (noun + optional color + style set) and a
//! set of directed relation edges between entity ids. The canonical text
//! serialization is unique per semantic content — entities sorted by id,
//! styles sorted, relations sorted — so scene equality reduces to byte
//! (and therefore content-address) equality.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::sim::vocab::{ColorName, Noun, Relation, StyleName};

pub type EntityId = u32;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Entity {
    pub id: EntityId,
    pub noun: Noun,
    pub color: Option<ColorName>,
    pub styles: BTreeSet<StyleName>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SceneGraph {
    entities: BTreeMap<EntityId, Entity>,
    relations: BTreeSet<(EntityId, Relation, EntityId)>,
}

impl SceneGraph {
    pub fn new() -> Self {
        SceneGraph::default()
    }

    pub fn entities(&self) -> impl Iterator<Item = &Entity> {
        self.entities.values()
    }

    pub fn entity(&self, id: EntityId) -> Option<&Entity> {
        self.entities.get(&id)
    }

    pub fn relations(&self) -> impl Iterator<Item = &(EntityId, Relation, EntityId)> {
        self.relations.iter()
    }

    pub fn entity_count(&self) -> usize {
        self.entities.len()
    }

    /// Entities of a noun, ascending by id.
    pub fn entities_of(&self, noun: Noun) -> Vec<&Entity> {
        self.entities.values().filter(|e| e.noun == noun).collect()
    }

    pub fn ids_of(&self, noun: Noun) -> Vec<EntityId> {
        self.entities
            .values()
            .filter(|e| e.noun == noun)
            .map(|e| e.id)
            .collect()
    }

    fn next_id(&self) -> EntityId {
        self.entities.keys().next_back().map_or(1, |max| max + 1)
    }

    pub fn add_entity(&mut self, noun: Noun, color: Option<ColorName>) -> EntityId {
        let id = self.next_id();
        self.entities.insert(
            id,
            Entity {
                id,
                noun,
                color,
                styles: BTreeSet::new(),
            },
        );
        id
    }

    /// Add an entity copying `template`'s attributes (same noun, color, styles).
    pub fn add_clone_of(&mut self, template: &Entity) -> EntityId {
        let id = self.next_id();
        self.entities.insert(
            id,
            Entity {
                id,
                noun: template.noun,
                color: template.color,
                styles: template.styles.clone(),
            },
        );
        id
    }

    /// Remove an entity and every relation touching it.
    pub fn remove_entity(&mut self, id: EntityId) {
        self.entities.remove(&id);
        self.relations.retain(|(s, _, o)| *s != id && *o != id);
    }

    pub fn set_color(&mut self, id: EntityId, color: ColorName) {
        if let Some(e) = self.entities.get_mut(&id) {
            e.color = Some(color);
        }
    }

    pub fn add_style(&mut self, id: EntityId, style: StyleName) {
        if let Some(e) = self.entities.get_mut(&id) {
            e.styles.insert(style);
        }
    }

    pub fn remove_style(&mut self, id: EntityId, style: StyleName) {
        if let Some(e) = self.entities.get_mut(&id) {
            e.styles.remove(&style);
        }
    }

    /// Insert a relation edge. Both endpoints must exist.
    pub fn add_relation(&mut self, subject: EntityId, relation: Relation, object: EntityId) {
        debug_assert!(self.entities.contains_key(&subject));
        debug_assert!(self.entities.contains_key(&object));
        self.relations.insert((subject, relation, object));
    }

    pub fn remove_relation(&mut self, subject: EntityId, relation: Relation, object: EntityId) {
        self.relations.remove(&(subject, relation, object));
    }

    /// Drop every edge between the two entities, in both directions.
    pub fn clear_relations_between(&mut self, a: EntityId, b: EntityId) {
        self.relations
            .retain(|(s, _, o)| !((*s == a && *o == b) || (*s == b && *o == a)));
    }

    pub fn has_relation(&self, subject: EntityId, relation: Relation, object: EntityId) -> bool {
        self.relations.contains(&(subject, relation, object))
    }

    /// True when any `subject_noun` entity stands in `relation` to any
    /// distinct `object_noun` entity.
    pub fn any_relation(&self, subject_noun: Noun, relation: Relation, object_noun: Noun) -> bool {
        self.relations.iter().any(|(s, r, o)| {
            *r == relation
                && s != o
                && self.entities.get(s).is_some_and(|e| e.noun == subject_noun)
                && self.entities.get(o).is_some_and(|e| e.noun == object_noun)
        })
    }

    /// All edges matching (subject_noun, relation, object_noun) on distinct entities.
    pub fn matching_edges(
        &self,
        subject_noun: Noun,
        relation: Relation,
        object_noun: Noun,
    ) -> Vec<(EntityId, Relation, EntityId)> {
        self.relations
            .iter()
            .filter(|(s, r, o)| {
                *r == relation
                    && s != o
                    && self.entities.get(s).is_some_and(|e| e.noun == subject_noun)
                    && self.entities.get(o).is_some_and(|e| e.noun == object_noun)
            })
            .copied()
            .collect()
    }

    /// Ids of entities not participating in any relation, ascending.
    pub fn unrelated_ids_of(&self, noun: Noun) -> Vec<EntityId> {
        self.ids_of(noun)
            .into_iter()
            .filter(|id| !self.relations.iter().any(|(s, _, o)| s == id || o == id))
            .collect()
    }

    /// Canonical text serialization. Unique per semantic content.
    pub fn canonical_string(&self) -> String {
        let mut out = String::from("scene v1\n");
        for e in self.entities.values() {
            out.push_str(&format!("entity {} {}", e.id, e.noun));
            if let Some(c) = e.color {
                out.push_str(&format!(" color={c}"));
            }
            if !e.styles.is_empty() {
                let styles: Vec<&str> = e.styles.iter().map(|s| s.as_str()).collect();
                out.push_str(&format!(" styles={}", styles.join(",")));
            }
            out.push('\n');
        }
        for (s, r, o) in &self.relations {
            out.push_str(&format!("rel {s} {r} {o}\n"));
        }
        out
    }

    pub fn canonical_bytes(&self) -> Vec<u8> {
        self.canonical_string().into_bytes()
    }

    /// Parse the canonical serialization back into a scene.
    pub fn parse(text: &str) -> Result<SceneGraph> {
        let mut lines = text.lines().enumerate();
        let syntax = |line: usize, message: String| Error::Syntax {
            line: line + 1,
            col: 1,
            message,
        };
        match lines.next() {
            Some((_, "scene v1")) => {}
            Some((i, other)) => {
                return Err(syntax(i, format!("expected 'scene v1' header, found {other:?}")))
            }
            None => return Err(syntax(0, "empty scene document".to_string())),
        }
        let mut scene = SceneGraph::new();
        for (i, line) in lines {
            let line = line.trim_end();
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            match parts.next() {
                Some("entity") => {
                    let id: EntityId = parts
                        .next()
                        .and_then(|t| t.parse().ok())
                        .ok_or_else(|| syntax(i, "entity line missing id".to_string()))?;
                    let noun_tok = parts
                        .next()
                        .ok_or_else(|| syntax(i, "entity line missing noun".to_string()))?;
                    let noun = Noun::lookup(noun_tok).ok_or(Error::Vocabulary {
                        line: i + 1,
                        col: 1,
                        word: noun_tok.to_string(),
                        kind: Noun::KIND,
                    })?;
                    let mut color = None;
                    let mut styles = BTreeSet::new();
                    for attr in parts {
                        if let Some(c) = attr.strip_prefix("color=") {
                            color = Some(ColorName::lookup(c).ok_or(Error::Vocabulary {
                                line: i + 1,
                                col: 1,
                                word: c.to_string(),
                                kind: ColorName::KIND,
                            })?);
                        } else if let Some(list) = attr.strip_prefix("styles=") {
                            for s in list.split(',').filter(|s| !s.is_empty()) {
                                styles.insert(StyleName::lookup(s).ok_or(Error::Vocabulary {
                                    line: i + 1,
                                    col: 1,
                                    word: s.to_string(),
                                    kind: StyleName::KIND,
                                })?);
                            }
                        } else {
                            return Err(syntax(i, format!("unknown entity attribute {attr:?}")));
                        }
                    }
                    if scene.entities.contains_key(&id) {
                        return Err(syntax(i, format!("duplicate entity id {id}")));
                    }
                    scene.entities.insert(id, Entity { id, noun, color, styles });
                }
                Some("rel") => {
                    let s: EntityId = parts
                        .next()
                        .and_then(|t| t.parse().ok())
                        .ok_or_else(|| syntax(i, "rel line missing subject id".to_string()))?;
                    let rel_tok = parts
                        .next()
                        .ok_or_else(|| syntax(i, "rel line missing relation".to_string()))?;
                    let r = Relation::lookup(rel_tok).ok_or(Error::Vocabulary {
                        line: i + 1,
                        col: 1,
                        word: rel_tok.to_string(),
                        kind: Relation::KIND,
                    })?;
                    let o: EntityId = parts
                        .next()
                        .and_then(|t| t.parse().ok())
                        .ok_or_else(|| syntax(i, "rel line missing object id".to_string()))?;
                    if !scene.entities.contains_key(&s) || !scene.entities.contains_key(&o) {
                        return Err(syntax(i, format!("relation endpoint missing: {s} {o}")));
                    }
                    scene.relations.insert((s, r, o));
                }
                Some(other) => {
                    return Err(syntax(i, format!("unknown scene line kind {other:?}")))
                }
                None => unreachable!("blank lines are skipped"),
            }
        }
        Ok(scene)
    }
}
