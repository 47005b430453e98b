//! Trait schema: the ordered list of categorical traits and their allowed values.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::path::Path;

use serde::de::{MapAccess, Visitor};
use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{CoreError, Result};
use crate::text::match_key;

/// One categorical trait with its ordered allowed values.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trait {
    name: String,
    values: Vec<String>,
}

impl Trait {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn values(&self) -> &[String] {
        &self.values
    }

    /// Position of `value` among the allowed values, matched on [`match_key`].
    pub fn value_index(&self, value: &str) -> Option<usize> {
        let key = match_key(value);
        self.values.iter().position(|v| match_key(v) == key)
    }
}

/// Ordered mapping from trait name to its allowed values.
///
/// Names are unique and every trait carries at least two distinct, non-empty
/// values. Uniqueness is judged after normalization, so `"Opposite"` and
/// `" opposite"` cannot coexist within one trait.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraitSchema {
    traits: Vec<Trait>,
}

impl TraitSchema {
    pub fn new<N, V, I>(traits: I) -> Result<Self>
    where
        I: IntoIterator<Item = (N, Vec<V>)>,
        N: Into<String>,
        V: Into<String>,
    {
        let mut seen_names = HashSet::new();
        let mut out = Vec::new();
        for (name, values) in traits {
            let name: String = name.into();
            if name.trim().is_empty() {
                return Err(CoreError::EmptyTraitName);
            }
            if !seen_names.insert(match_key(&name)) {
                return Err(CoreError::DuplicateTrait(name));
            }
            let values: Vec<String> = values.into_iter().map(Into::into).collect();
            let mut seen_values = HashSet::new();
            for v in &values {
                if v.trim().is_empty() {
                    return Err(CoreError::EmptyValue { trait_name: name });
                }
                if !seen_values.insert(match_key(v)) {
                    return Err(CoreError::DuplicateValue {
                        trait_name: name,
                        value: v.clone(),
                    });
                }
            }
            if values.len() < 2 {
                return Err(CoreError::TooFewValues {
                    trait_name: name,
                    count: values.len(),
                });
            }
            out.push(Trait { name, values });
        }
        Ok(Self { traits: out })
    }

    pub fn traits(&self) -> &[Trait] {
        &self.traits
    }

    pub fn len(&self) -> usize {
        self.traits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.traits.is_empty()
    }

    pub fn get(&self, index: usize) -> Option<&Trait> {
        self.traits.get(index)
    }

    pub fn trait_index(&self, name: &str) -> Option<usize> {
        let key = match_key(name);
        self.traits.iter().position(|t| match_key(&t.name) == key)
    }

    pub fn find(&self, name: &str) -> Option<&Trait> {
        self.trait_index(name).map(|i| &self.traits[i])
    }

    /// A one-trait schema, used for single-trait prompting.
    pub fn single(&self, name: &str) -> Option<TraitSchema> {
        self.find(name).map(|t| TraitSchema {
            traits: vec![t.clone()],
        })
    }

    /// Sub-schema restricted to `names`, in this schema's order.
    pub fn restrict(&self, names: &[&str]) -> TraitSchema {
        let keys: HashSet<String> = names.iter().map(|n| match_key(n)).collect();
        TraitSchema {
            traits: self
                .traits
                .iter()
                .filter(|t| keys.contains(&match_key(&t.name)))
                .cloned()
                .collect(),
        }
    }

    /// Total number of (trait, value) columns.
    pub fn width(&self) -> usize {
        self.traits.iter().map(|t| t.values.len()).sum()
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("schema serializes")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_json_string() + "\n")?;
        Ok(())
    }
}

impl Serialize for TraitSchema {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(self.traits.len()))?;
        for t in &self.traits {
            map.serialize_entry(&t.name, &t.values)?;
        }
        map.end()
    }
}

impl<'de> Deserialize<'de> for TraitSchema {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct SchemaVisitor;

        impl<'de> Visitor<'de> for SchemaVisitor {
            type Value = TraitSchema;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a mapping from trait name to a list of value strings")
            }

            fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> Result<TraitSchema, A::Error> {
                // Entries are collected in document order; duplicates are caught by `new`.
                let mut entries: Vec<(String, Vec<String>)> = Vec::new();
                while let Some((k, v)) = map.next_entry::<String, Vec<String>>()? {
                    entries.push((k, v));
                }
                TraitSchema::new(entries).map_err(serde::de::Error::custom)
            }
        }

        deserializer.deserialize_map(SchemaVisitor)
    }
}
