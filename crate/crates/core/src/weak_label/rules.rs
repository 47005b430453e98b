//! Section-header labeling rules.

use std::fmt;
use std::path::Path;

use regex::{Regex, RegexBuilder};
use serde::de::{MapAccess, Visitor};
use serde::{Deserialize, Deserializer, Serialize};

use super::{Label, SectionedDocument, WeakLabelError};

const DEFAULT_RULES: &str = include_str!("../../data/header_rules.json");

/// Ordered (header pattern, label) table. The first matching pattern wins.
#[derive(Debug, Clone)]
pub struct HeaderRules {
    rules: Vec<(Regex, Label)>,
}

impl HeaderRules {
    /// Patterns are compiled case-insensitively and matched anywhere in the header.
    pub fn new<I, S>(rules: I) -> Result<Self, WeakLabelError>
    where
        I: IntoIterator<Item = (S, Label)>,
        S: AsRef<str>,
    {
        let rules = rules
            .into_iter()
            .map(|(p, l)| {
                RegexBuilder::new(p.as_ref())
                    .case_insensitive(true)
                    .build()
                    .map(|r| (r, l))
                    .map_err(|e| WeakLabelError::BadPattern(p.as_ref().to_string(), e.to_string()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        if rules.is_empty() {
            return Err(WeakLabelError::NoRules);
        }
        Ok(Self { rules })
    }

    /// Rules for the four source families: description-like headers versus the rest.
    pub fn defaults() -> Self {
        Self::from_json_str(DEFAULT_RULES).expect("bundled header rules are valid")
    }

    pub fn from_json_str(s: &str) -> Result<Self, WeakLabelError> {
        let table: RuleTable = serde_json::from_str(s).map_err(|e| WeakLabelError::Json(e.to_string()))?;
        Self::new(table.0)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, WeakLabelError> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn label_for(&self, header: &str) -> Option<Label> {
        self.rules.iter().find(|(r, _)| r.is_match(header)).map(|(_, l)| *l)
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }
}

/// JSON object kept in document order.
struct RuleTable(Vec<(String, Label)>);

impl<'de> Deserialize<'de> for RuleTable {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = RuleTable;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a mapping from header pattern to label")
            }
            fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> Result<RuleTable, A::Error> {
                let mut out = Vec::new();
                while let Some((k, v)) = map.next_entry::<String, Label>()? {
                    out.push((k, v));
                }
                Ok(RuleTable(out))
            }
        }
        d.deserialize_map(V)
    }
}

/// Labels each section body by its header; sections matching no rule are dropped.
pub fn label_sections(doc: &SectionedDocument, rules: &HeaderRules) -> Vec<(String, Label)> {
    doc.sections
        .iter()
        .filter_map(|s| rules.label_for(&s.header).map(|l| (s.body.clone(), l)))
        .collect()
}

/// Every section of pages unrelated to species becomes a negative example.
pub fn augment_negatives(random_docs: &[SectionedDocument]) -> Vec<(String, Label)> {
    random_docs
        .iter()
        .flat_map(|d| d.sections.iter().map(|s| (s.body.clone(), Label::NonDescriptive)))
        .collect()
}

impl Serialize for HeaderRules {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeMap;
        let mut m = s.serialize_map(Some(self.rules.len()))?;
        for (r, l) in &self.rules {
            m.serialize_entry(r.as_str(), l)?;
        }
        m.end()
    }
}

impl fmt::Display for HeaderRules {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (r, l) in &self.rules {
            writeln!(f, "{} -> {l:?}", r.as_str())?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weak_label::Section;

    fn doc(headers: &[&str]) -> SectionedDocument {
        SectionedDocument {
            source_id: "wikipedia".into(),
            species: Some("Hedera helix".into()),
            sections: headers
                .iter()
                .map(|h| Section {
                    header: h.to_string(),
                    body: format!("{h} body"),
                })
                .collect(),
        }
    }

    #[test]
    fn defaults_label_the_named_headers() {
        let rules = HeaderRules::defaults();
        let labeled = label_sections(
            &doc(&[
                "Description",
                "Introduction",
                "Habitat",
                "References",
                "Control and eradication",
            ]),
            &rules,
        );
        assert_eq!(
            labeled,
            vec![
                ("Description body".to_string(), Label::Descriptive),
                ("Introduction body".to_string(), Label::NonDescriptive),
                ("Habitat body".to_string(), Label::NonDescriptive),
                ("Control and eradication body".to_string(), Label::NonDescriptive),
            ]
        );
        assert_eq!(rules.label_for("APPEARANCE"), Some(Label::Descriptive));
        assert_eq!(rules.label_for("Characteristics"), Some(Label::Descriptive));
        assert_eq!(rules.label_for("See also"), None);
    }

    #[test]
    fn first_match_wins() {
        let rules = HeaderRules::new([("habitat", Label::NonDescriptive), ("habit", Label::Descriptive)]).unwrap();
        assert_eq!(rules.label_for("Habitat"), Some(Label::NonDescriptive));
        assert_eq!(rules.label_for("Habit"), Some(Label::Descriptive));
    }

    #[test]
    fn empty_rules_rejected() {
        assert!(matches!(
            HeaderRules::new(Vec::<(String, Label)>::new()),
            Err(WeakLabelError::NoRules)
        ));
        assert!(HeaderRules::from_json_str("{}").is_err());
        assert!(HeaderRules::from_json_str(r#"{"(": "descriptive"}"#).is_err());
    }

    #[test]
    fn negatives_cover_every_section() {
        let n = augment_negatives(&[doc(&["Description", "History"])]);
        assert_eq!(n.len(), 2);
        assert!(n.iter().all(|(_, l)| *l == Label::NonDescriptive));
    }
}
