//! Helpers shared by the integration test targets.
#![allow(dead_code)]

use vlseg_core::data::synthetic::{blob_samples, quadrant_samples, synthetic_triplets};
use vlseg_core::data::{SampleTriplet, TripletOptions};
use vlseg_core::prompt::{AttributeKey, AttributeSet, DatasetFamily, PromptComposer, PromptType, Provenance, TemplateChoice};
use vlseg_core::train::{OptimizerKind, SchedulerKind, TrainConfig};

/// One published example prompt with the attributes that produce it.
pub struct CorpusCase {
    pub label: String,
    pub family: DatasetFamily,
    pub ptype: PromptType,
    pub choice: TemplateChoice,
    pub attrs: AttributeSet,
    pub expected: &'static str,
}

fn attrs(pairs: &[(AttributeKey, &[&str])]) -> AttributeSet {
    let mut set = AttributeSet::new();
    for (key, values) in pairs {
        let provenance = if *key == AttributeKey::ClassKeyword { Provenance::Literal } else { Provenance::Sidecar };
        if key.is_multi_valued() {
            set.set(*key, values.to_vec(), provenance);
        } else {
            set.set(*key, values[0], provenance);
        }
    }
    set
}

fn case(
    label: impl Into<String>,
    family: DatasetFamily,
    ptype: PromptType,
    choice: TemplateChoice,
    attrs: AttributeSet,
    expected: &'static str,
) -> CorpusCase {
    CorpusCase {
        label: label.into(),
        family,
        ptype,
        choice,
        attrs,
        expected,
    }
}

fn phrasing(p: usize) -> TemplateChoice {
    TemplateChoice {
        phrasing: p,
        description: 0,
    }
}

/// Example prompts for the endoscopy, CheXlocalize, CAMUS and BUSI templates.
pub fn prompt_corpus() -> Vec<CorpusCase> {
    use AttributeKey::*;
    use PromptType::*;
    let mut out = Vec::new();

    let polyp = attrs(&[
        (ClassKeyword, &["polyp"]),
        (Number, &["one"]),
        (Size, &["medium"]),
        (Color, &["pink"]),
        (Shape, &["round"]),
        (Location, &["top left"]),
    ]);
    // "a small lump in the lining of colon" is the third bank entry
    let lump = TemplateChoice {
        phrasing: 0,
        description: 2,
    };
    for (ptype, choice, expected) in [
        (P1, TemplateChoice::default(), "polyp"),
        (P2, TemplateChoice::default(), "round polyp"),
        (P3, TemplateChoice::default(), "pink round polyp"),
        (P4, TemplateChoice::default(), "medium pink round polyp"),
        (P5, TemplateChoice::default(), "one medium pink round polyp"),
        (P6, TemplateChoice::default(), "one medium pink round polyp, located in the top left of the image"),
        (P7, lump, "polyp, which is a small lump in the lining of colon"),
        (P8, lump, "one medium pink round polyp, which is a small lump in the lining of colon"),
        (
            P9,
            lump,
            "one medium pink round polyp, which is a small lump in the lining of colon located in the top left of the image",
        ),
    ] {
        out.push(case(format!("endoscopy {ptype}"), DatasetFamily::Endoscopy, ptype, choice, polyp.clone(), expected));
    }

    let chex = attrs(&[
        (ClassKeyword, &["Airspace Opacity"]),
        (View, &["frontal"]),
        (Shape, &["rectangle"]),
        (Location, &["right"]),
        (
            Pathology,
            &[
                "Enlarged Cardiomediastinum",
                "Cardiomegaly",
                "Lung Opacity",
                "Consolidation",
                "Atelectasis",
                "Pleural Effusion",
            ],
        ),
    ]);
    for (ptype, expected) in [
        (P1, "Airspace Opacity in a chest Xray."),
        (P2, "Airspace Opacity in the frontal view of a Chest Xray."),
        (P3, "Airspace Opacity of shape rectangle in the frontal view of a Chest Xray."),
        (P4, "Airspace Opacity of shape rectangle, and located in right of the frontal view of a Chest Xray."),
        (
            P5,
            "Airspace Opacity of shape rectangle, and located in right of the frontal view of a Chest Xray. Enlarged Cardiomediastinum, Cardiomegaly, Lung Opacity, Consolidation, Atelectasis, Pleural Effusion are present.",
        ),
        (
            P6,
            "Airspace Opacity in a Chest Xray. Enlarged Cardiomediastinum, Cardiomegaly, Lung Opacity, Consolidation, Atelectasis, Pleural Effusion are present.",
        ),
    ] {
        out.push(case(format!("chexlocalize {ptype}"), DatasetFamily::Chexlocalize, ptype, TemplateChoice::default(), chex.clone(), expected));
    }

    let camus = |age: &str| {
        attrs(&[
            (ClassKeyword, &["Left ventricular cavity"]),
            (View, &["two-chamber"]),
            (CardiacCycle, &["diastole"]),
            (Gender, &["female"]),
            (Age, &[age]),
            (ImageQuality, &["poor"]),
            (Shape, &["triangular"]),
        ])
    };
    for (item, ptype, age, heart, ultrasound) in [
        (1, P1, "40-year-old", "Left ventricular cavity of the heart", "Left ventricular cavity in the cardiac ultrasound"),
        (
            2,
            P2,
            "40-year-old",
            "Left ventricular cavity in two-chamber view of the heart.",
            "Left ventricular cavity in two-chamber view in the cardiac ultrasound.",
        ),
        (
            3,
            P3,
            "40-year-old",
            "Left ventricular cavity in two-chamber view of the heart at the end of the diastole cycle.",
            "Left ventricular cavity in two-chamber view in the cardiac ultrasound at the end of the diastole cycle.",
        ),
        (
            4,
            P4,
            "40-year-old",
            "Left ventricular cavity in two-chamber view of the heart at the end of the diastole cycle of a female.",
            "Left ventricular cavity in two-chamber view in the cardiac ultrasound at the end of the diastole cycle of a female.",
        ),
        (
            5,
            P5,
            "forty-six-year-old",
            "Left ventricular cavity in two-chamber view of the heart at the end of the diastole cycle of a forty-six-year-old female.",
            "Left ventricular cavity in two-chamber view in the cardiac ultrasound at the end of the diastole cycle of a forty-six-year-old female.",
        ),
        (
            6,
            P6,
            "40-year-old",
            "Left ventricular cavity in two-chamber view of the heart at the end of the diastole cycle of a 40-year-old female with poor image quality.",
            "Left ventricular cavity in two-chamber view in the cardiac ultrasound at the end of the diastole cycle of a 40-year-old female with poor image quality.",
        ),
        (
            7,
            P7,
            "40-year-old",
            "Left ventricular cavity of triangular shape in two-chamber view of the heart at the end of the diastole cycle of a 40-year-old female with poor image quality.",
            "Left ventricular cavity of triangular shape in two-chamber view in the cardiac ultrasound at the end of the diastole cycle of a 40-year-old female with poor image quality.",
        ),
    ] {
        for (p, expected) in [(0, heart), (1, ultrasound)] {
            out.push(case(format!("camus item {item} phrasing {p}"), DatasetFamily::Camus, ptype, phrasing(p), camus(age), expected));
        }
    }

    let busi = |number: &str| {
        attrs(&[
            (ClassKeyword, &["tumor"]),
            (TumorType, &["benign"]),
            (Number, &[number]),
            (Size, &["medium"]),
            (Location, &["center", "left"]),
            (Shape, &["square-shaped"]),
        ])
    };
    out.push(case("busi item 1 normal", DatasetFamily::Busi, P1, phrasing(0), busi("no"), "No tumor in the breast ultrasound image"));
    out.push(case("busi item 1 tumor", DatasetFamily::Busi, P1, phrasing(0), busi("two"), "tumor in the breast ultrasound image"));
    for (item, ptype, by_type, by_shape) in [
        (2, P2, "Benign tumor in the breast ultrasound image", "Regular-shaped tumor in the breast ultrasound image"),
        (3, P3, "Two benign tumors in the breast ultrasound image", "Two regular-shaped tumors in the breast ultrasound image"),
        (
            4,
            P4,
            "Two medium benign tumors in the breast ultrasound image",
            "Two medium regular-shaped tumors in the breast ultrasound image",
        ),
        (
            5,
            P5,
            "Two medium benign tumors at the center, left in the breast ultrasound image",
            "Two medium regular-shaped tumors at the center, left in the breast ultrasound image",
        ),
        (
            6,
            P6,
            "Two medium square-shaped benign tumors at the center, left in the breast ultrasound image",
            "Two medium square-shaped regular tumors at the center, left in the breast ultrasound image",
        ),
    ] {
        for (p, expected) in [(0, by_type), (1, by_shape)] {
            out.push(case(format!("busi item {item} phrasing {p}"), DatasetFamily::Busi, ptype, phrasing(p), busi("two"), expected));
        }
    }
    out
}

/// Compose every corpus case; returns the mismatches as `(label, got, expected)`.
pub fn corpus_mismatches(cases: &[CorpusCase]) -> Vec<(String, String, String)> {
    let composer = PromptComposer::default();
    cases
        .iter()
        .filter_map(|c| {
            let got = composer
                .compose_with(c.family, c.ptype, &c.attrs, c.choice)
                .unwrap_or_else(|e| format!("error: {e}"));
            (got != c.expected).then(|| (c.label.clone(), got, c.expected.to_string()))
        })
        .collect()
}

pub fn blob_triplets(n: usize, side: usize, seed: u64, ptype: PromptType) -> Vec<SampleTriplet> {
    synthetic_triplets("blobs", &blob_samples(n, side, seed), &TripletOptions::new(ptype)).unwrap()
}

pub fn quadrant_triplets(n: usize, side: usize, seed: u64, ptype: PromptType) -> Vec<SampleTriplet> {
    let samples: Vec<_> = quadrant_samples(n, side, seed).into_iter().map(|(s, _)| s).collect();
    synthetic_triplets("quadrants", &samples, &TripletOptions::new(ptype)).unwrap()
}

/// Recipe for desk-scale smoke runs: fixed learning rate, one batch per epoch
/// for small sets, no early stop before `epochs`.
pub fn smoke_config(epochs: usize, batch_size: usize, lr: f64) -> TrainConfig {
    TrainConfig {
        optimizer: OptimizerKind::Adamw,
        lr,
        scheduler: SchedulerKind::Constant,
        batch_size,
        max_epochs: epochs,
        early_stop_patience: epochs,
        ..TrainConfig::default()
    }
}
