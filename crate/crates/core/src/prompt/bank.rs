use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::DatasetFamily;
use crate::error::{Error, Result};

const ENDOSCOPY: [&str; 5] = [
    "a projecting growth of tissue",
    "often a bumpy flesh in rectum",
    "a small lump in the lining of colon",
    "a tissue growth that often resemble mushroom-like stalks",
    "an abnormal growth of tissues projecting from a mucous membrane",
];

const ISIC: [&str; 5] = [
    "a spot with dark speckles",
    "a spot with irregular texture",
    "a dark sore with irregular texture",
    "an irregular sore with speckles",
    "a rough wound on skin",
];

const DFU: [&str; 5] = [
    "a wound in foot and toes",
    "a sore in foot and toes",
    "a sore in skin of foot and toe",
    "an abnormality in foot and toes",
    "an open sore or lesion in foot and toes",
];

/// Five hand-written class descriptions per photographic family, used for
/// the general-class-info attribute.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneralDescriptionBank {
    entries: BTreeMap<DatasetFamily, Vec<String>>,
}

impl Default for GeneralDescriptionBank {
    fn default() -> Self {
        let mut entries = BTreeMap::new();
        for (family, list) in [
            (DatasetFamily::Endoscopy, ENDOSCOPY),
            (DatasetFamily::Isic, ISIC),
            (DatasetFamily::Dfu, DFU),
        ] {
            entries.insert(family, list.iter().map(|s| s.to_string()).collect());
        }
        Self { entries }
    }
}

impl GeneralDescriptionBank {
    pub const SIZE: usize = 5;

    pub fn new(entries: BTreeMap<DatasetFamily, Vec<String>>) -> Result<Self> {
        for (family, list) in &entries {
            if list.len() != Self::SIZE {
                return Err(Error::Config(format!(
                    "description bank for {family} must hold exactly {} entries, got {}",
                    Self::SIZE,
                    list.len()
                )));
            }
        }
        Ok(Self { entries })
    }

    pub fn descriptions(&self, family: DatasetFamily) -> Option<&[String]> {
        self.entries.get(&family).map(Vec::as_slice)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_banks_have_five_entries() {
        let bank = GeneralDescriptionBank::default();
        for family in [DatasetFamily::Endoscopy, DatasetFamily::Isic, DatasetFamily::Dfu] {
            assert_eq!(bank.descriptions(family).unwrap().len(), 5);
        }
        assert!(bank.descriptions(DatasetFamily::Camus).is_none());
        assert_eq!(bank.descriptions(DatasetFamily::Endoscopy).unwrap()[2], "a small lump in the lining of colon");
    }

    #[test]
    fn rejects_wrong_bank_size() {
        let mut m = BTreeMap::new();
        m.insert(DatasetFamily::Isic, vec!["x".to_string()]);
        assert!(GeneralDescriptionBank::new(m).is_err());
    }
}
