//! The simulator's closed vocabulary.
//!
//! Prompts, scenes, and edit scripts may only mention words from these
//! tables. Each word type is a thin wrapper over an interned `&'static str`
//! so values are `Copy`, ordering is lexicographic, and construction is the
//! only place validation happens.

use std::fmt;

use serde::{Deserialize, Serialize, Serializer};

pub const NOUNS: &[&str] = &[
    "airplane", "ball", "balloon", "banana", "cat", "cup", "cushion", "desk", "dog", "giraffe",
    "girl", "key", "laptop", "pear", "stool", "woman",
];

pub const COLORS: &[&str] = &[
    "black", "blue", "brown", "green", "orange", "pink", "purple", "red", "white", "yellow",
];

pub const RELATIONS: &[&str] = &["behind", "in_front_of", "left_of", "on", "right_of", "under"];

pub const STYLES: &[&str] = &[
    "fluffy", "glass", "metal", "neon", "shiny", "striped", "vintage", "wooden",
];

fn intern(table: &'static [&'static str], word: &str) -> Option<&'static str> {
    table.iter().find(|w| **w == word).copied()
}

macro_rules! vocab_word {
    ($name:ident, $table:ident, $kind:literal) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub struct $name(&'static str);

        impl $name {
            /// Look up a word; `None` when it is not in the closed vocabulary.
            pub fn lookup(word: &str) -> Option<Self> {
                intern($table, word).map($name)
            }

            pub fn as_str(&self) -> &'static str {
                self.0
            }

            /// Every word of this kind, in canonical (sorted) order.
            pub fn all() -> impl Iterator<Item = Self> {
                $table.iter().map(|w| $name(w))
            }

            pub const KIND: &'static str = $kind;
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.0)
            }
        }

        impl Serialize for $name {
            fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                s.serialize_str(self.0)
            }
        }

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                let raw = String::deserialize(d)?;
                $name::lookup(&raw).ok_or_else(|| {
                    serde::de::Error::custom(format!("unknown {} {raw:?}", $kind))
                })
            }
        }
    };
}

vocab_word!(Noun, NOUNS, "noun");
vocab_word!(ColorName, COLORS, "color");
vocab_word!(Relation, RELATIONS, "relation");
vocab_word!(StyleName, STYLES, "style");

impl Relation {
    /// The spatial opposite, used both to corrupt a relation and to negate one.
    pub fn inverse(self) -> Relation {
        let inv = match self.0 {
            "behind" => "in_front_of",
            "in_front_of" => "behind",
            "on" => "under",
            "under" => "on",
            "left_of" => "right_of",
            "right_of" => "left_of",
            _ => unreachable!("closed vocabulary"),
        };
        Relation(inv)
    }
}

impl ColorName {
    /// First vocabulary color different from `self`; the deterministic
    /// "anything but this" choice used when a negated color must be repaired.
    pub fn alternative(self) -> ColorName {
        ColorName::all().find(|c| *c != self).expect("more than one color")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tables_are_sorted_and_unique() {
        for table in [NOUNS, COLORS, RELATIONS, STYLES] {
            let mut sorted = table.to_vec();
            sorted.sort_unstable();
            sorted.dedup();
            assert_eq!(sorted, table);
        }
    }

    #[test]
    fn relation_inverse_is_involutive() {
        for r in Relation::all() {
            assert_ne!(r.inverse(), r);
            assert_eq!(r.inverse().inverse(), r);
        }
    }

    #[test]
    fn lookup_rejects_unknown_words() {
        assert!(Noun::lookup("dragon").is_none());
        assert!(ColorName::lookup("mauve").is_none());
        assert_eq!(Noun::lookup("ball").unwrap().as_str(), "ball");
    }

    #[test]
    fn alternative_color_differs() {
        for c in ColorName::all() {
            assert_ne!(c.alternative(), c);
        }
    }
}
