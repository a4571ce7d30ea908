use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prompt::{AttrValue, AttributeKey};

/// Attribute value to semantically opposite value, per attribute.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OppositeMap {
    pub entries: BTreeMap<AttributeKey, BTreeMap<String, String>>,
}

const PAIRS: &[(AttributeKey, &[(&str, &str)])] = &[
    (AttributeKey::Size, &[("small", "large")]),
    (
        AttributeKey::Location,
        &[
            ("top left", "bottom right"),
            ("top right", "bottom left"),
            ("top", "bottom"),
            ("left", "right"),
        ],
    ),
    (
        AttributeKey::Color,
        &[
            ("pink", "green"),
            ("red", "blue"),
            ("white", "black"),
            ("yellow", "purple"),
            ("brown", "gray"),
            ("orange", "cyan"),
        ],
    ),
    (AttributeKey::Shape, &[("round", "irregular"), ("regular", "rectangle")]),
    (AttributeKey::View, &[("two-chamber", "four-chamber"), ("frontal", "lateral")]),
    (AttributeKey::CardiacCycle, &[("diastole", "systole")]),
    (AttributeKey::Gender, &[("female", "male")]),
    (AttributeKey::ImageQuality, &[("good", "poor")]),
    (AttributeKey::TumorType, &[("benign", "malignant")]),
];

/// One-way entries for values without a natural antonym.
const ONE_WAY: &[(AttributeKey, &[(&str, &str)])] = &[
    (AttributeKey::Size, &[("medium", "large"), ("none", "large")]),
    (AttributeKey::Location, &[("center", "top left")]),
    (
        AttributeKey::Number,
        &[
            ("no", "one"),
            ("one", "many"),
            ("two", "one"),
            ("three", "one"),
            ("four", "one"),
            ("five", "one"),
            ("six", "one"),
            ("seven", "one"),
            ("eight", "one"),
            ("nine", "one"),
            ("ten", "one"),
            ("many", "one"),
        ],
    ),
    (
        AttributeKey::Shape,
        &[
            ("oval", "irregular"),
            ("spherical", "irregular"),
            ("circular", "irregular"),
            ("triangular", "round"),
            ("elongated", "round"),
        ],
    ),
    (AttributeKey::ImageQuality, &[("medium", "poor")]),
];

impl Default for OppositeMap {
    fn default() -> Self {
        let mut entries: BTreeMap<AttributeKey, BTreeMap<String, String>> = BTreeMap::new();
        for (key, pairs) in PAIRS {
            let m = entries.entry(*key).or_default();
            for (a, b) in *pairs {
                m.insert(a.to_string(), b.to_string());
                m.insert(b.to_string(), a.to_string());
            }
        }
        for (key, pairs) in ONE_WAY {
            let m = entries.entry(*key).or_default();
            for (a, b) in *pairs {
                m.insert(a.to_string(), b.to_string());
            }
        }
        Self { entries }
    }
}

impl OppositeMap {
    pub fn supports(&self, key: AttributeKey) -> bool {
        self.entries.contains_key(&key)
    }

    pub fn insert(&mut self, key: AttributeKey, value: &str, opposite: &str) {
        self.entries.entry(key).or_default().insert(value.into(), opposite.into());
    }

    pub fn opposite(&self, key: AttributeKey, value: &str) -> Result<&str> {
        self.entries
            .get(&key)
            .and_then(|m| m.get(value))
            .map(String::as_str)
            .ok_or_else(|| Error::UnmappedOpposite {
                key,
                value: value.to_string(),
            })
    }

    /// Map every item of a (possibly multi-valued) attribute.
    pub fn apply(&self, key: AttributeKey, value: &AttrValue) -> Result<AttrValue> {
        Ok(match value {
            AttrValue::One(v) => AttrValue::One(self.opposite(key, v)?.to_string()),
            AttrValue::Many(vs) => AttrValue::Many(
                vs.iter()
                    .map(|v| self.opposite(key, v).map(str::to_string))
                    .collect::<Result<_>>()?,
            ),
        })
    }
}
