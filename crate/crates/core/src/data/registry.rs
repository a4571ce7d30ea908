use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prompt::DatasetFamily;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" | "valid" | "validation" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            _ => Err(Error::Config(format!("unknown split `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Category {
    Radiology,
    NonRadiology,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSizes {
    pub train: usize,
    pub val: usize,
    pub test: usize,
}

impl SplitSizes {
    pub const fn new(train: usize, val: usize, test: usize) -> Self {
        Self { train, val, test }
    }

    pub fn get(&self, split: Split) -> usize {
        match split {
            Split::Train => self.train,
            Split::Val => self.val,
            Split::Test => self.test,
        }
    }

    pub fn set(&mut self, split: Split, n: usize) {
        match split {
            Split::Train => self.train = n,
            Split::Val => self.val = n,
            Split::Test => self.test = n,
        }
    }
}

/// Foreground class: its name in `classes.json`, the label value in the
/// mask PNGs and the keyword used in prompts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassEntry {
    pub name: String,
    pub label: u8,
    pub keyword: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetDescriptor {
    /// Directory name and identifier, e.g. `kvasir_seg`.
    pub name: String,
    /// Human-readable name used in reports, e.g. `Kvasir-SEG`.
    pub display_name: String,
    pub category: Category,
    pub modality: String,
    pub organ: String,
    pub classes: Vec<ClassEntry>,
    pub splits: SplitSizes,
    pub family: DatasetFamily,
    #[serde(default)]
    pub test_only: bool,
}

impl DatasetDescriptor {
    pub fn is_endoscopy(&self) -> bool {
        self.family == DatasetFamily::Endoscopy
    }

    pub fn class_by_label(&self, label: u8) -> Option<&ClassEntry> {
        self.classes.iter().find(|c| c.label == label)
    }
}

fn classes(names: &[(&str, &str)]) -> Vec<ClassEntry> {
    names
        .iter()
        .enumerate()
        .map(|(i, (name, keyword))| ClassEntry {
            name: name.to_string(),
            label: (i + 1) as u8,
            keyword: keyword.to_string(),
        })
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn descriptor(
    name: &str,
    display: &str,
    category: Category,
    modality: &str,
    organ: &str,
    class_list: &[(&str, &str)],
    splits: SplitSizes,
    family: DatasetFamily,
) -> DatasetDescriptor {
    DatasetDescriptor {
        name: name.into(),
        display_name: display.into(),
        category,
        modality: modality.into(),
        organ: organ.into(),
        classes: classes(class_list),
        test_only: splits.train == 0 && splits.val == 0,
        splits,
        family,
    }
}

/// The eleven datasets with their published split sizes.
pub fn builtin_datasets() -> Vec<DatasetDescriptor> {
    use Category::*;
    use DatasetFamily as F;
    const POLYP: &[(&str, &str)] = &[("polyp", "polyp")];
    let endo = |name: &str, display: &str, s: SplitSizes| {
        descriptor(name, display, NonRadiology, "endoscopy", "colon", POLYP, s, F::Endoscopy)
    };
    vec![
        endo("kvasir_seg", "Kvasir-SEG", SplitSizes::new(800, 100, 100)),
        endo("clinicdb", "ClinicDB", SplitSizes::new(490, 61, 61)),
        endo("bkai", "BKAI", SplitSizes::new(800, 100, 100)),
        endo("etis", "ETIS", SplitSizes::new(0, 0, 196)),
        endo("colondb", "CVC-ColonDB", SplitSizes::new(0, 0, 380)),
        endo("cvc300", "CVC-300", SplitSizes::new(0, 0, 60)),
        descriptor(
            "isic2016",
            "ISIC",
            NonRadiology,
            "photography",
            "skin",
            &[("skin lesion", "skin melanoma")],
            SplitSizes::new(810, 90, 379),
            F::Isic,
        ),
        descriptor(
            "dfu2022",
            "DFU",
            NonRadiology,
            "photography",
            "foot",
            &[("foot ulcer", "foot ulcer")],
            SplitSizes::new(1600, 200, 200),
            F::Dfu,
        ),
        descriptor(
            "camus",
            "CAMUS",
            Radiology,
            "ultrasound",
            "heart",
            &[
                ("Left ventricular cavity", "Left ventricular cavity"),
                ("Myocardium", "Myocardium"),
                ("Left atrium cavity", "Left atrium cavity"),
            ],
            SplitSizes::new(4800, 600, 600),
            F::Camus,
        ),
        descriptor(
            "busi",
            "BUSI",
            Radiology,
            "ultrasound",
            "breast",
            &[("tumor", "tumor")],
            SplitSizes::new(624, 78, 78),
            F::Busi,
        ),
        descriptor(
            "chexlocalize",
            "CheXlocalize",
            Radiology,
            "x-ray",
            "chest",
            &[
                ("Atelectasis", "Atelectasis"),
                ("Cardiomegaly", "Cardiomegaly"),
                ("Consolidation", "Consolidation"),
                ("Edema", "Edema"),
                ("Enlarged Cardiomediastinum", "Enlarged Cardiomediastinum"),
                ("Lung Lesion", "Lung Lesion"),
                ("Airspace Opacity", "Airspace Opacity"),
                ("Pleural Effusion", "Pleural Effusion"),
                ("Pneumothorax", "Pneumothorax"),
                ("Support Devices", "Support Devices"),
            ],
            SplitSizes::new(1279, 446, 452),
            F::Chexlocalize,
        ),
    ]
}

/// Look up a built-in descriptor by identifier or display name.
pub fn builtin(name: &str) -> Result<DatasetDescriptor> {
    let key = name.to_ascii_lowercase();
    builtin_datasets()
        .into_iter()
        .find(|d| d.name == key || d.display_name.to_ascii_lowercase() == key)
        .ok_or_else(|| Error::UnknownDataset(name.to_string()))
}

/// Endoscopy datasets used for the cross-dataset study, in report order.
pub const ENDOSCOPY_TEST_SETS: [&str; 6] = ["kvasir_seg", "clinicdb", "bkai", "cvc300", "colondb", "etis"];

/// Trainable non-radiology datasets.
pub const NON_RADIOLOGY_TRAIN_SETS: [&str; 5] = ["kvasir_seg", "clinicdb", "bkai", "isic2016", "dfu2022"];

pub const RADIOLOGY_TRAIN_SETS: [&str; 3] = ["camus", "busi", "chexlocalize"];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eleven_datasets_with_published_splits() {
        let all = builtin_datasets();
        assert_eq!(all.len(), 11);
        assert_eq!(builtin("Kvasir-SEG").unwrap().splits, SplitSizes::new(800, 100, 100));
        assert_eq!(builtin("etis").unwrap().splits, SplitSizes::new(0, 0, 196));
        assert_eq!(builtin("chexlocalize").unwrap().classes.len(), 10);
        assert_eq!(builtin("camus").unwrap().classes.len(), 3);
        let test_only: Vec<_> = all.iter().filter(|d| d.test_only).map(|d| d.name.as_str()).collect();
        assert_eq!(test_only, vec!["etis", "colondb", "cvc300"]);
    }

    #[test]
    fn unknown_dataset() {
        assert!(matches!(builtin("mnist"), Err(Error::UnknownDataset(_))));
    }
}
