use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The fourteen prompt attributes, in their canonical `a1`..`a14` order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttributeKey {
    ClassKeyword,
    Shape,
    Color,
    Size,
    Number,
    Location,
    GeneralClassInfo,
    View,
    Pathology,
    CardiacCycle,
    Gender,
    Age,
    ImageQuality,
    TumorType,
}

impl AttributeKey {
    pub const ALL: [AttributeKey; 14] = [
        AttributeKey::ClassKeyword,
        AttributeKey::Shape,
        AttributeKey::Color,
        AttributeKey::Size,
        AttributeKey::Number,
        AttributeKey::Location,
        AttributeKey::GeneralClassInfo,
        AttributeKey::View,
        AttributeKey::Pathology,
        AttributeKey::CardiacCycle,
        AttributeKey::Gender,
        AttributeKey::Age,
        AttributeKey::ImageQuality,
        AttributeKey::TumorType,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AttributeKey::ClassKeyword => "class_keyword",
            AttributeKey::Shape => "shape",
            AttributeKey::Color => "color",
            AttributeKey::Size => "size",
            AttributeKey::Number => "number",
            AttributeKey::Location => "location",
            AttributeKey::GeneralClassInfo => "general_class_info",
            AttributeKey::View => "view",
            AttributeKey::Pathology => "pathology",
            AttributeKey::CardiacCycle => "cardiac_cycle",
            AttributeKey::Gender => "gender",
            AttributeKey::Age => "age",
            AttributeKey::ImageQuality => "image_quality",
            AttributeKey::TumorType => "tumor_type",
        }
    }

    /// One-based attribute index (`a1`..`a14`).
    pub fn index(self) -> usize {
        Self::ALL.iter().position(|k| *k == self).unwrap() + 1
    }

    /// Whether the value may carry several entries (multi-component location,
    /// co-occurring pathologies).
    pub fn is_multi_valued(self) -> bool {
        matches!(self, AttributeKey::Location | AttributeKey::Pathology)
    }

    pub(crate) fn valid_keys() -> String {
        Self::ALL.iter().map(|k| k.as_str()).collect::<Vec<_>>().join(", ")
    }
}

impl fmt::Display for AttributeKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AttributeKey {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::UnknownAttributeKey {
                key: s.to_string(),
                valid: Self::valid_keys(),
            })
    }
}

/// Where an attribute value came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    MaskDerived,
    Sidecar,
    Bank,
    Literal,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AttrValue {
    One(String),
    Many(Vec<String>),
}

impl AttrValue {
    /// Surface form used inside templates; list entries are joined with ", ".
    pub fn render(&self) -> String {
        match self {
            AttrValue::One(s) => s.clone(),
            AttrValue::Many(v) => v.join(", "),
        }
    }

    pub fn items(&self) -> Vec<&str> {
        match self {
            AttrValue::One(s) => vec![s.as_str()],
            AttrValue::Many(v) => v.iter().map(String::as_str).collect(),
        }
    }

    pub fn is_empty(&self) -> bool {
        match self {
            AttrValue::One(s) => s.is_empty(),
            AttrValue::Many(v) => v.is_empty(),
        }
    }
}

impl From<&str> for AttrValue {
    fn from(s: &str) -> Self {
        AttrValue::One(s.to_string())
    }
}

impl From<String> for AttrValue {
    fn from(s: String) -> Self {
        AttrValue::One(s)
    }
}

impl From<Vec<String>> for AttrValue {
    fn from(v: Vec<String>) -> Self {
        AttrValue::Many(v)
    }
}

impl From<Vec<&str>> for AttrValue {
    fn from(v: Vec<&str>) -> Self {
        AttrValue::Many(v.into_iter().map(str::to_string).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributeEntry {
    pub value: AttrValue,
    pub provenance: Provenance,
}

/// Attribute values for one (sample, class) pair.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AttributeSet {
    entries: BTreeMap<AttributeKey, AttributeEntry>,
}

impl AttributeSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, key: AttributeKey, value: impl Into<AttrValue>, provenance: Provenance) -> Self {
        self.set(key, value, provenance);
        self
    }

    pub fn set(&mut self, key: AttributeKey, value: impl Into<AttrValue>, provenance: Provenance) {
        self.entries.insert(
            key,
            AttributeEntry {
                value: value.into(),
                provenance,
            },
        );
    }

    /// Insert only if the key is absent or holds a lower-priority value.
    /// Mask-derived values are never replaced.
    pub fn merge(&mut self, key: AttributeKey, value: impl Into<AttrValue>, provenance: Provenance) {
        match self.entries.get(&key) {
            Some(existing) if existing.provenance == Provenance::MaskDerived => {}
            _ => self.set(key, value, provenance),
        }
    }

    pub fn get(&self, key: AttributeKey) -> Option<&AttributeEntry> {
        self.entries.get(&key)
    }

    pub fn value(&self, key: AttributeKey) -> Option<&AttrValue> {
        self.entries.get(&key).map(|e| &e.value)
    }

    pub fn remove(&mut self, key: AttributeKey) -> Option<AttributeEntry> {
        self.entries.remove(&key)
    }

    pub fn contains(&self, key: AttributeKey) -> bool {
        self.entries.contains_key(&key)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (AttributeKey, &AttributeEntry)> {
        self.entries.iter().map(|(k, v)| (*k, v))
    }

    /// Rendered surface form, or a `MissingAttribute` error.
    pub fn require(&self, key: AttributeKey) -> Result<String> {
        match self.entries.get(&key) {
            Some(e) if !e.value.is_empty() => Ok(e.value.render()),
            _ => Err(Error::MissingAttribute(key)),
        }
    }
}
