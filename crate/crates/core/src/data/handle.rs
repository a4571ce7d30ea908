//! On-disk dataset layout:
//!
//! ```text
//! <dataset>/
//!   classes.json            {"<class name>": <label>, ...}
//!   images/<split>/<id>.<png|jpg>
//!   masks/<split>/<id>.png  label-indexed
//!   splits/<split>.txt      optional id list, one per line
//!   attributes.json         optional attribute sidecar
//!   reports.json            optional free-text prompts {"<id>": "..."}
//!   descriptor.json         optional, for datasets outside the built-in registry
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use ndarray::{Array2, Array3};

use super::registry::{ClassEntry, DatasetDescriptor, Split, SplitSizes};
use crate::error::{Error, Result};
use crate::prompt::{load_attribute_sidecar, Sidecar};

const IMAGE_EXTENSIONS: [&str; 4] = ["png", "jpg", "jpeg", "bmp"];

#[derive(Debug, Clone, PartialEq)]
pub struct SampleRef {
    pub id: String,
    pub image_path: PathBuf,
    pub mask_path: PathBuf,
}

/// A loaded image with its label mask.
#[derive(Debug, Clone)]
pub struct Sample {
    pub id: String,
    /// H x W x 3, values in [0, 255].
    pub image: Arc<Array3<f32>>,
    /// H x W label mask.
    pub labels: Array2<u8>,
}

#[derive(Debug, Clone)]
pub struct DatasetHandle {
    pub descriptor: DatasetDescriptor,
    pub root: PathBuf,
    splits: BTreeMap<Split, Vec<SampleRef>>,
    observed: SplitSizes,
    sidecar: Sidecar,
    reports: BTreeMap<String, String>,
}

impl DatasetHandle {
    /// Handle over an explicit id list with no files behind it. Useful for
    /// planning and pooling arithmetic.
    pub fn in_memory(descriptor: DatasetDescriptor, ids: BTreeMap<Split, Vec<String>>) -> Self {
        let mut observed = SplitSizes::default();
        let splits = ids
            .into_iter()
            .map(|(split, ids)| {
                observed.set(split, ids.len());
                let refs = ids
                    .into_iter()
                    .map(|id| SampleRef {
                        image_path: PathBuf::from(format!("images/{split}/{id}.png")),
                        mask_path: PathBuf::from(format!("masks/{split}/{id}.png")),
                        id,
                    })
                    .collect();
                (split, refs)
            })
            .collect();
        Self {
            descriptor,
            root: PathBuf::new(),
            splits,
            observed,
            sidecar: Sidecar::new(),
            reports: BTreeMap::new(),
        }
    }

    /// In-memory handle whose ids follow the descriptor's declared split sizes.
    pub fn declared(descriptor: DatasetDescriptor) -> Self {
        let ids = Split::ALL
            .iter()
            .map(|&s| {
                let n = descriptor.splits.get(s);
                (s, (0..n).map(|i| format!("{}_{s}_{i:05}", descriptor.name)).collect())
            })
            .collect();
        Self::in_memory(descriptor, ids)
    }

    pub fn name(&self) -> &str {
        &self.descriptor.name
    }

    pub fn observed_sizes(&self) -> SplitSizes {
        self.observed
    }

    pub fn samples(&self, split: Split) -> &[SampleRef] {
        self.splits.get(&split).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn ids(&self, split: Split) -> impl Iterator<Item = &str> {
        self.samples(split).iter().map(|s| s.id.as_str())
    }

    pub fn sidecar(&self) -> &Sidecar {
        &self.sidecar
    }

    pub fn set_sidecar(&mut self, sidecar: Sidecar) {
        self.sidecar = sidecar;
    }

    /// Free-text prompt for a sample, when the dataset ships reports.
    pub fn report(&self, id: &str) -> Option<&str> {
        self.reports.get(id).map(String::as_str)
    }

    pub fn has_reports(&self) -> bool {
        !self.reports.is_empty()
    }

    pub fn classes(&self) -> &[ClassEntry] {
        &self.descriptor.classes
    }

    pub fn load(&self, sample: &SampleRef) -> Result<Sample> {
        let image = image::open(&sample.image_path)?.to_rgb8();
        let (w, h) = image.dimensions();
        let pixels: Vec<f32> = image.into_raw().into_iter().map(f32::from).collect();
        let image = Array3::from_shape_vec((h as usize, w as usize, 3), pixels)
            .map_err(|e| Error::Config(e.to_string()))?;

        let mask = image::open(&sample.mask_path)?.to_luma8();
        let (mw, mh) = mask.dimensions();
        if (mw, mh) != (w, h) {
            return Err(Error::ShapeMismatch {
                expected: vec![h as usize, w as usize],
                got: vec![mh as usize, mw as usize],
            });
        }
        let mut labels = Array2::from_shape_vec((mh as usize, mw as usize), mask.into_raw())
            .map_err(|e| Error::Config(e.to_string()))?;
        // Binary datasets are commonly stored as 0/255.
        if let [only] = self.descriptor.classes.as_slice() {
            labels.mapv_inplace(|v| if v > 0 { only.label } else { 0 });
        }
        Ok(Sample {
            id: sample.id.clone(),
            image: Arc::new(image),
            labels,
        })
    }
}

fn find_image(dir: &Path, id: &str) -> Option<PathBuf> {
    IMAGE_EXTENSIONS.iter().map(|ext| dir.join(format!("{id}.{ext}"))).find(|p| p.is_file())
}

fn list_ids(dir: &Path) -> Result<Vec<String>> {
    if !dir.is_dir() {
        return Ok(Vec::new());
    }
    let mut ids = Vec::new();
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        let ext_ok = path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()));
        if ext_ok {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                ids.push(stem.to_string());
            }
        }
    }
    ids.sort();
    Ok(ids)
}

fn read_classes(path: &Path, descriptor: &DatasetDescriptor) -> Result<Vec<ClassEntry>> {
    let table: BTreeMap<String, u8> = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    let mut out: Vec<ClassEntry> = table
        .into_iter()
        .map(|(name, label)| {
            let keyword = descriptor
                .classes
                .iter()
                .find(|c| c.name.eq_ignore_ascii_case(&name))
                .map(|c| c.keyword.clone())
                .unwrap_or_else(|| name.clone());
            ClassEntry { name, label, keyword }
        })
        .collect();
    out.sort_by_key(|c| c.label);
    Ok(out)
}

/// Open a dataset directory and validate it against its descriptor.
pub fn register_dataset(descriptor: DatasetDescriptor, root: impl AsRef<Path>) -> Result<DatasetHandle> {
    let root = root.as_ref().to_path_buf();
    let mut descriptor = descriptor;
    let classes_path = root.join("classes.json");
    if classes_path.is_file() {
        descriptor.classes = read_classes(&classes_path, &descriptor)?;
    }

    let mut splits = BTreeMap::new();
    let mut observed = SplitSizes::default();
    for split in Split::ALL {
        let image_dir = root.join("images").join(split.as_str());
        let manifest = root.join("splits").join(format!("{split}.txt"));
        let ids = if manifest.is_file() {
            std::fs::read_to_string(&manifest)?
                .lines()
                .map(str::trim)
                .filter(|l| !l.is_empty())
                .map(str::to_string)
                .collect()
        } else {
            list_ids(&image_dir)?
        };
        let mut refs = Vec::with_capacity(ids.len());
        for id in ids {
            let image_path = find_image(&image_dir, &id).ok_or_else(|| {
                std::io::Error::new(
                    std::io::ErrorKind::NotFound,
                    format!("image `{id}` listed in the {split} manifest not found in {}", image_dir.display()),
                )
            })?;
            let mask_path = root.join("masks").join(split.as_str()).join(format!("{id}.png"));
            if !mask_path.is_file() {
                return Err(Error::MissingMask { id, path: mask_path });
            }
            refs.push(SampleRef { id, image_path, mask_path });
        }
        observed.set(split, refs.len());
        splits.insert(split, refs);
    }

    if observed.train + observed.val + observed.test == 0 {
        return Err(Error::NoSamples(root));
    }
    if descriptor.test_only && observed.train + observed.val > 0 {
        return Err(Error::TestOnlyHasTrainData(descriptor.name.clone()));
    }
    if observed != descriptor.splits {
        log::warn!(
            "{}: split sizes differ from descriptor (expected {}/{}/{}, observed {}/{}/{})",
            descriptor.name,
            descriptor.splits.train,
            descriptor.splits.val,
            descriptor.splits.test,
            observed.train,
            observed.val,
            observed.test
        );
    }

    let sidecar_path = root.join("attributes.json");
    let sidecar = if sidecar_path.is_file() {
        load_attribute_sidecar(&sidecar_path)?
    } else {
        Sidecar::new()
    };
    let reports_path = root.join("reports.json");
    let reports = if reports_path.is_file() {
        serde_json::from_str(&std::fs::read_to_string(&reports_path)?)?
    } else {
        BTreeMap::new()
    };

    Ok(DatasetHandle {
        descriptor,
        root,
        splits,
        observed,
        sidecar,
        reports,
    })
}

/// Register `<data_root>/<name>`, using `descriptor.json` when present and
/// the built-in registry otherwise.
pub fn open_dataset(data_root: impl AsRef<Path>, name: &str) -> Result<DatasetHandle> {
    let dir = data_root.as_ref().join(name);
    let custom = dir.join("descriptor.json");
    let descriptor = if custom.is_file() {
        serde_json::from_str(&std::fs::read_to_string(custom)?)?
    } else {
        super::registry::builtin(name)?
    };
    register_dataset(descriptor, dir)
}

pub fn write_split_manifest(root: impl AsRef<Path>, split: Split, ids: &[String]) -> Result<()> {
    let dir = root.as_ref().join("splits");
    std::fs::create_dir_all(&dir)?;
    std::fs::write(dir.join(format!("{split}.txt")), ids.join("\n") + "\n")?;
    Ok(())
}
