use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::opposite::OppositeMap;
use super::words::UNCOMMON_WORDS;
use crate::data::{PromptPlan, SampleTriplet};
use crate::error::{Error, Result};
use crate::prompt::{eval_rng, stable_seed, AttrValue, AttributeKey, PromptComposer, PromptType};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbationMode {
    Identity,
    RandomWord,
    Opposite,
    ClassNameOnly,
    SwapWithinDataset,
}

impl PerturbationMode {
    pub fn as_str(self) -> &'static str {
        match self {
            PerturbationMode::Identity => "identity",
            PerturbationMode::RandomWord => "random_word",
            PerturbationMode::Opposite => "opposite",
            PerturbationMode::ClassNameOnly => "class_name_only",
            PerturbationMode::SwapWithinDataset => "swap_within_dataset",
        }
    }

    fn needs_target(self) -> bool {
        matches!(
            self,
            PerturbationMode::RandomWord | PerturbationMode::Opposite | PerturbationMode::SwapWithinDataset
        )
    }
}

/// One prompt edit applied to every triplet of an evaluation set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PerturbationSpec {
    pub mode: PerturbationMode,
    #[serde(default)]
    pub target: Option<AttributeKey>,
    #[serde(default)]
    pub seed: u64,
}

impl PerturbationSpec {
    pub fn identity() -> Self {
        Self {
            mode: PerturbationMode::Identity,
            target: None,
            seed: 0,
        }
    }

    pub fn new(mode: PerturbationMode, target: AttributeKey) -> Self {
        Self {
            mode,
            target: Some(target),
            seed: 0,
        }
    }

    pub fn class_name_only() -> Self {
        Self {
            mode: PerturbationMode::ClassNameOnly,
            target: None,
            seed: 0,
        }
    }

    /// `mode` or `mode:attribute`, used as the report's perturbation column.
    pub fn label(&self) -> String {
        match (self.mode.needs_target(), self.target) {
            (true, Some(t)) => format!("{}:{}", self.mode.as_str(), t),
            _ => self.mode.as_str().to_string(),
        }
    }

    pub fn validate(&self, opposites: &OppositeMap) -> Result<()> {
        match (self.mode, self.target) {
            (m, None) if m.needs_target() => Err(Error::Config(format!("{} needs a target attribute", m.as_str()))),
            (PerturbationMode::Opposite, Some(t)) if !opposites.supports(t) => Err(Error::Config(format!(
                "no opposite values registered for attribute `{t}`"
            ))),
            _ => Ok(()),
        }
    }
}

/// Everything a perturbation needs beyond the triplet itself.
#[derive(Debug, Clone)]
pub struct PerturbContext {
    pub composer: PromptComposer,
    pub opposites: OppositeMap,
    /// Seed the base prompts were composed with.
    pub prompt_seed: u64,
    /// Distinct values of each attribute observed in the dataset.
    pub value_sets: BTreeMap<AttributeKey, Vec<AttrValue>>,
}

impl PerturbContext {
    pub fn new(triplets: &[SampleTriplet], prompt_seed: u64) -> Self {
        Self {
            composer: PromptComposer::default(),
            opposites: OppositeMap::default(),
            prompt_seed,
            value_sets: observed_values(triplets),
        }
    }
}

/// Distinct attribute values across the plans of a triplet set, in first-seen order.
pub fn observed_values(triplets: &[SampleTriplet]) -> BTreeMap<AttributeKey, Vec<AttrValue>> {
    let mut out: BTreeMap<AttributeKey, Vec<AttrValue>> = BTreeMap::new();
    let mut seen: BTreeSet<(AttributeKey, String)> = BTreeSet::new();
    for plan in triplets.iter().filter_map(|t| t.plan.as_ref()) {
        for (key, entry) in plan.attributes.iter() {
            if seen.insert((key, entry.value.render())) {
                out.entry(key).or_default().push(entry.value.clone());
            }
        }
    }
    out
}

fn item_rng(spec: &PerturbationSpec, triplet: &SampleTriplet) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(stable_seed(&format!("{}\u{1f}{}", spec.label(), triplet.key()), spec.seed))
}

/// Replacement value for the target attribute, or `None` to leave it.
fn replacement(
    spec: &PerturbationSpec,
    key: AttributeKey,
    current: &AttrValue,
    triplet: &SampleTriplet,
    ctx: &PerturbContext,
) -> Result<Option<AttrValue>> {
    let mut rng = item_rng(spec, triplet);
    Ok(match spec.mode {
        PerturbationMode::RandomWord => {
            Some(AttrValue::One(UNCOMMON_WORDS[rng.random_range(0..UNCOMMON_WORDS.len())].to_string()))
        }
        PerturbationMode::Opposite => Some(ctx.opposites.apply(key, current)?),
        PerturbationMode::SwapWithinDataset => {
            let rendered = current.render();
            let others: Vec<&AttrValue> = ctx
                .value_sets
                .get(&key)
                .map(|vs| vs.iter().filter(|v| v.render() != rendered).collect())
                .unwrap_or_default();
            if others.is_empty() {
                log::warn!("no alternative `{key}` value for {}; prompt left unchanged", triplet.key());
                None
            } else {
                Some(others[rng.random_range(0..others.len())].clone())
            }
        }
        PerturbationMode::Identity | PerturbationMode::ClassNameOnly => None,
    })
}

/// Prompt of `triplet` after applying `spec`. Template choices are the ones
/// the base prompt was drawn with, so only the target slot changes.
pub fn perturb_prompt(triplet: &SampleTriplet, spec: &PerturbationSpec, ctx: &PerturbContext) -> Result<String> {
    if spec.mode == PerturbationMode::Identity {
        return Ok(triplet.prompt.clone());
    }
    let plan: &PromptPlan = triplet.plan.as_ref().ok_or_else(|| {
        Error::Config(format!("{} has a free-text prompt and cannot be perturbed", triplet.key()))
    })?;
    let mut rng = eval_rng(&triplet.sample_id, &triplet.class_name, ctx.prompt_seed);
    if spec.mode == PerturbationMode::ClassNameOnly {
        return ctx.composer.compose(plan.family, PromptType::P1, &plan.attributes, &mut rng);
    }
    let key = spec
        .target
        .ok_or_else(|| Error::Config(format!("{} needs a target attribute", spec.mode.as_str())))?;
    let choice = ctx.composer.draw_choice(plan.family, plan.ptype, &mut rng);
    let mut attrs = plan.attributes.clone();
    if let Some(entry) = plan.attributes.get(key) {
        if let Some(value) = replacement(spec, key, &entry.value, triplet, ctx)? {
            attrs.set(key, value, entry.provenance);
        }
    }
    ctx.composer.compose_with(plan.family, plan.ptype, &attrs, choice)
}

/// Identity, class-name-only and every applicable (attribute, mode) pair for
/// the attributes present in the triplets' plans.
pub fn default_specs(triplets: &[SampleTriplet], opposites: &OppositeMap) -> Vec<PerturbationSpec> {
    let keys: BTreeSet<AttributeKey> = triplets
        .iter()
        .filter_map(|t| t.plan.as_ref())
        .flat_map(|p| p.attributes.iter().map(|(k, _)| k))
        .filter(|k| !matches!(k, AttributeKey::ClassKeyword | AttributeKey::GeneralClassInfo))
        .collect();
    let mut specs = vec![PerturbationSpec::identity(), PerturbationSpec::class_name_only()];
    for key in keys {
        specs.push(PerturbationSpec::new(PerturbationMode::RandomWord, key));
        if opposites.supports(key) {
            specs.push(PerturbationSpec::new(PerturbationMode::Opposite, key));
        }
        specs.push(PerturbationSpec::new(PerturbationMode::SwapWithinDataset, key));
    }
    specs
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synthetic::{blob_samples, synthetic_triplets};
    use crate::data::TripletOptions;

    fn p6() -> Vec<SampleTriplet> {
        synthetic_triplets("blobs", &blob_samples(6, 32, 11), &TripletOptions::new(PromptType::P6)).unwrap()
    }

    #[test]
    fn identity_is_byte_identical() {
        let data = p6();
        let ctx = PerturbContext::new(&data, 0);
        for t in &data {
            assert_eq!(perturb_prompt(t, &PerturbationSpec::identity(), &ctx).unwrap(), t.prompt);
        }
    }

    #[test]
    fn opposite_size_swaps_only_the_size_word() {
        let data = p6();
        let ctx = PerturbContext::new(&data, 0);
        let spec = PerturbationSpec::new(PerturbationMode::Opposite, AttributeKey::Size);
        for t in &data {
            let size = t.plan.as_ref().unwrap().attributes.value(AttributeKey::Size).unwrap().render();
            let opposite = ctx.opposites.opposite(AttributeKey::Size, &size).unwrap();
            let expected = t.prompt.replacen(&format!(" {size} "), &format!(" {opposite} "), 1);
            assert_eq!(perturb_prompt(t, &spec, &ctx).unwrap(), expected);
        }
    }

    #[test]
    fn class_name_only_gives_the_keyword() {
        let data = p6();
        let ctx = PerturbContext::new(&data, 0);
        assert_eq!(perturb_prompt(&data[0], &PerturbationSpec::class_name_only(), &ctx).unwrap(), "polyp");
    }

    #[test]
    fn random_words_are_seeded() {
        let data = p6();
        let ctx = PerturbContext::new(&data, 0);
        let spec = PerturbationSpec::new(PerturbationMode::RandomWord, AttributeKey::Color);
        let a = perturb_prompt(&data[0], &spec, &ctx).unwrap();
        assert_eq!(a, perturb_prompt(&data[0], &spec, &ctx).unwrap());
        assert!(UNCOMMON_WORDS.iter().any(|w| a.contains(&format!(" {w} "))));
        assert!(!a.contains("pink"));
    }

    #[test]
    fn unmapped_opposite_is_an_error() {
        let mut data = p6();
        let plan = data[0].plan.as_mut().unwrap();
        plan.attributes.set(AttributeKey::Color, "mauve", crate::prompt::Provenance::Sidecar);
        let ctx = PerturbContext::new(&data, 0);
        let spec = PerturbationSpec::new(PerturbationMode::Opposite, AttributeKey::Color);
        assert!(matches!(
            perturb_prompt(&data[0], &spec, &ctx),
            Err(Error::UnmappedOpposite { .. })
        ));
    }

    #[test]
    fn swap_draws_another_observed_value() {
        let data = p6();
        let ctx = PerturbContext::new(&data, 0);
        let spec = PerturbationSpec::new(PerturbationMode::SwapWithinDataset, AttributeKey::Location);
        let observed: Vec<String> = ctx.value_sets[&AttributeKey::Location].iter().map(|v| v.render()).collect();
        assert!(observed.len() > 1);
        for t in &data {
            let own = t.plan.as_ref().unwrap().attributes.value(AttributeKey::Location).unwrap().render();
            let p = perturb_prompt(t, &spec, &ctx).unwrap();
            assert_ne!(p, t.prompt);
            assert!(observed.iter().any(|o| o != &own && p.contains(o.as_str())));
        }
    }

    #[test]
    fn spec_labels_and_validation() {
        let o = OppositeMap::default();
        assert_eq!(PerturbationSpec::new(PerturbationMode::Opposite, AttributeKey::Size).label(), "opposite:size");
        assert!(PerturbationSpec::new(PerturbationMode::Opposite, AttributeKey::Age).validate(&o).is_err());
        let missing = PerturbationSpec {
            mode: PerturbationMode::RandomWord,
            target: None,
            seed: 0,
        };
        assert!(missing.validate(&o).is_err());
        let json = r#"{"mode": "swap_within_dataset", "target": "location"}"#;
        let spec: PerturbationSpec = serde_json::from_str(json).unwrap();
        assert_eq!(spec.label(), "swap_within_dataset:location");
    }
}
