use std::sync::Arc;

use ndarray::{Array2, Array3, ArrayView2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::handle::{DatasetHandle, Sample};
use super::registry::{ClassEntry, DatasetDescriptor, Split};
use crate::error::{Error, Result};
use crate::prompt::{
    build_attributes, eval_rng, AttributeSet, DatasetFamily, ExtractionConfig, PromptComposer, PromptType,
};

/// How a triplet's prompt can be rebuilt, e.g. to re-draw template choices
/// every training step or to perturb an attribute.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptPlan {
    pub family: DatasetFamily,
    pub ptype: PromptType,
    pub attributes: AttributeSet,
}

impl PromptPlan {
    pub fn compose<R: Rng + ?Sized>(&self, composer: &PromptComposer, rng: &mut R) -> Result<String> {
        composer.compose(self.family, self.ptype, &self.attributes, rng)
    }
}

/// Image, binary class mask and prompt: the unit of training and evaluation.
#[derive(Debug, Clone)]
pub struct SampleTriplet {
    pub sample_id: String,
    pub class_name: String,
    pub dataset: String,
    pub image: Arc<Array3<f32>>,
    pub mask: Array2<u8>,
    pub prompt: String,
    /// `None` for free-text prompts that bypass the template engine.
    pub plan: Option<PromptPlan>,
}

impl SampleTriplet {
    /// Key identifying the triplet inside a dataset.
    pub fn key(&self) -> String {
        format!("{}/{}", self.sample_id, self.class_name)
    }

    pub fn original_size(&self) -> (usize, usize) {
        self.mask.dim()
    }
}

/// Binary mask of one class, derived from a label mask.
#[derive(Debug, Clone)]
pub struct ClassMask {
    pub class: ClassEntry,
    pub mask: Array2<u8>,
}

impl ClassMask {
    pub fn is_empty(&self) -> bool {
        self.mask.iter().all(|v| *v == 0)
    }
}

/// Split a label mask into one binary mask per class in `classes`. Absent
/// classes yield an all-zero mask unless `emit_absent` is false.
pub fn split_classes(
    sample_id: &str,
    labels: ArrayView2<'_, u8>,
    classes: &[ClassEntry],
    emit_absent: bool,
) -> Result<Vec<ClassMask>> {
    for &v in labels.iter() {
        if v != 0 && !classes.iter().any(|c| c.label == v) {
            return Err(Error::UnknownLabel {
                id: sample_id.to_string(),
                label: v,
            });
        }
    }
    Ok(classes
        .iter()
        .map(|class| ClassMask {
            class: class.clone(),
            mask: labels.mapv(|v| u8::from(v == class.label)),
        })
        .filter(|cm| emit_absent || !cm.is_empty())
        .collect())
}

/// Expand one image with a multi-class label mask into per-class triplets;
/// `prompt_for` supplies each class's prompt (and plan, when templated).
pub fn expand_multiclass<F>(
    sample: &Sample,
    dataset: &str,
    classes: &[ClassEntry],
    emit_absent: bool,
    mut prompt_for: F,
) -> Result<Vec<SampleTriplet>>
where
    F: FnMut(&ClassEntry, ArrayView2<'_, u8>) -> Result<(String, Option<PromptPlan>)>,
{
    split_classes(&sample.id, sample.labels.view(), classes, emit_absent)?
        .into_iter()
        .map(|cm| {
            let (prompt, plan) = prompt_for(&cm.class, cm.mask.view())?;
            Ok(SampleTriplet {
                sample_id: sample.id.clone(),
                class_name: cm.class.name.clone(),
                dataset: dataset.to_string(),
                image: Arc::clone(&sample.image),
                mask: cm.mask,
                prompt,
                plan,
            })
        })
        .collect()
}

/// Settings for turning a dataset split into prompted triplets.
#[derive(Debug, Clone)]
pub struct TripletOptions {
    pub ptype: PromptType,
    pub extraction: ExtractionConfig,
    pub composer: PromptComposer,
    pub seed: u64,
    pub emit_absent: bool,
}

impl TripletOptions {
    pub fn new(ptype: PromptType) -> Self {
        Self {
            ptype,
            extraction: ExtractionConfig::default(),
            composer: PromptComposer::default(),
            seed: 0,
            emit_absent: true,
        }
    }
}

/// Prompted triplets of one loaded sample. Prompts use the per-sample
/// evaluation seed; a free-text report, when given, bypasses the templates.
pub fn sample_triplets(
    sample: &Sample,
    descriptor: &DatasetDescriptor,
    fragment: Option<&AttributeSet>,
    report: Option<&str>,
    options: &TripletOptions,
) -> Result<Vec<SampleTriplet>> {
    let family = descriptor.family;
    expand_multiclass(sample, &descriptor.name, &descriptor.classes, options.emit_absent, |class, mask| {
        if let Some(text) = report {
            let prompt = if options.ptype == PromptType::P0 { String::new() } else { text.to_string() };
            return Ok((prompt, None));
        }
        let attributes = build_attributes(&class.keyword, mask, fragment, &options.extraction)?;
        let plan = PromptPlan {
            family,
            ptype: options.ptype,
            attributes,
        };
        let mut rng = eval_rng(&sample.id, &class.name, options.seed);
        let prompt = plan.compose(&options.composer, &mut rng)?;
        Ok((prompt, Some(plan)))
    })
}

/// Load a split and build prompted triplets in manifest order.
pub fn load_triplets(handle: &DatasetHandle, split: Split, options: &TripletOptions) -> Result<Vec<SampleTriplet>> {
    let mut out = Vec::new();
    for sample_ref in handle.samples(split) {
        let sample = handle.load(sample_ref)?;
        let fragment = handle.sidecar().get(&sample.id);
        out.extend(sample_triplets(&sample, &handle.descriptor, fragment, handle.report(&sample.id), options)?);
    }
    Ok(out)
}
