//! Per-sample attribute sidecar: a JSON object keyed by sample id whose
//! values map attribute names to a string or a list of strings.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::de::{Deserializer, MapAccess, Visitor};
use serde::Deserialize;

use super::{AttrValue, AttributeKey, AttributeSet, Provenance};
use crate::error::{Error, Result};

pub type Sidecar = BTreeMap<String, AttributeSet>;

/// Keeps duplicate keys instead of silently collapsing them.
struct Entries<V>(Vec<(String, V)>);

impl<'de, V: Deserialize<'de>> Deserialize<'de> for Entries<V> {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        struct EntriesVisitor<V>(std::marker::PhantomData<V>);

        impl<'de, V: Deserialize<'de>> Visitor<'de> for EntriesVisitor<V> {
            type Value = Entries<V>;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a JSON object")
            }

            fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> std::result::Result<Self::Value, A::Error> {
                let mut out = Vec::new();
                while let Some((k, v)) = map.next_entry::<String, V>()? {
                    out.push((k, v));
                }
                Ok(Entries(out))
            }
        }

        deserializer.deserialize_map(EntriesVisitor(std::marker::PhantomData))
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawValue {
    Text(String),
    List(Vec<String>),
    Number(serde_json::Number),
}

fn to_attr_value(key: AttributeKey, raw: RawValue) -> Result<AttrValue> {
    let value = match raw {
        RawValue::Text(s) => AttrValue::One(s),
        RawValue::Number(n) => AttrValue::One(n.to_string()),
        RawValue::List(v) if key.is_multi_valued() => AttrValue::Many(v),
        RawValue::List(_) => {
            return Err(Error::InvalidAttributeValue {
                key: key.to_string(),
                reason: "lists are only allowed for location and pathology".into(),
            })
        }
    };
    Ok(value)
}

pub fn parse_sidecar(text: &str) -> Result<Sidecar> {
    let Entries(samples) = serde_json::from_str::<Entries<Entries<RawValue>>>(text)?;
    let mut out = Sidecar::new();
    for (sample_id, Entries(attrs)) in samples {
        if out.contains_key(&sample_id) {
            return Err(Error::DuplicateSampleId(sample_id));
        }
        let mut set = AttributeSet::new();
        for (name, raw) in attrs {
            let key: AttributeKey = name.parse()?;
            if set.contains(key) {
                return Err(Error::InvalidAttributeValue {
                    key: name,
                    reason: format!("given twice for sample `{sample_id}`"),
                });
            }
            set.set(key, to_attr_value(key, raw)?, Provenance::Sidecar);
        }
        out.insert(sample_id, set);
    }
    Ok(out)
}

pub fn load_attribute_sidecar(path: impl AsRef<Path>) -> Result<Sidecar> {
    parse_sidecar(&std::fs::read_to_string(path)?)
}

/// Merge a sidecar fragment into `attrs`; mask-derived entries win.
pub fn apply_fragment(attrs: &mut AttributeSet, fragment: &AttributeSet) {
    for (key, entry) in fragment.iter() {
        attrs.merge(key, entry.value.clone(), Provenance::Sidecar);
    }
}
