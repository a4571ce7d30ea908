use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{builtin, PoolKind, ENDOSCOPY_TEST_SETS, NON_RADIOLOGY_TRAIN_SETS, RADIOLOGY_TRAIN_SETS};
use crate::error::{Error, Result};
use crate::model::{ModelKind, Variant};
use crate::prompt::{DatasetFamily, PromptType};

pub const ENDOSCOPY_TRAIN_SETS: [&str; 3] = ["kvasir_seg", "clinicdb", "bkai"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FreezeMode {
    #[default]
    Full,
    FrozenEncoders,
}

impl FreezeMode {
    pub fn as_str(self) -> &'static str {
        match self {
            FreezeMode::Full => "full",
            FreezeMode::FrozenEncoders => "frozen",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainData {
    Individual(String),
    Pooled(PoolKind),
}

impl TrainData {
    pub fn label(&self) -> String {
        match self {
            TrainData::Individual(name) => name.clone(),
            TrainData::Pooled(PoolKind::All) => "pool-all".into(),
            TrainData::Pooled(PoolKind::EndoscopyOnly) => "pool-endoscopy".into(),
        }
    }

    /// Datasets whose train and val splits feed the run.
    pub fn members(&self) -> Vec<String> {
        let names: Vec<&str> = match self {
            TrainData::Individual(name) => vec![name.as_str()],
            TrainData::Pooled(PoolKind::All) => NON_RADIOLOGY_TRAIN_SETS.iter().chain(&RADIOLOGY_TRAIN_SETS).copied().collect(),
            TrainData::Pooled(PoolKind::EndoscopyOnly) => ENDOSCOPY_TRAIN_SETS.to_vec(),
        };
        names.into_iter().map(str::to_string).collect()
    }
}

/// One finetuning run of the experiment matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSpec {
    pub model: ModelKind,
    #[serde(default)]
    pub freeze: FreezeMode,
    pub train_data: TrainData,
    pub ptype: PromptType,
    #[serde(default)]
    pub seed: u64,
    /// Test splits to evaluate on besides those of the training datasets.
    #[serde(default)]
    pub extra_test_sets: Vec<String>,
}

impl RunSpec {
    pub fn new(model: ModelKind, train_data: TrainData, ptype: PromptType) -> Self {
        Self {
            model,
            freeze: FreezeMode::Full,
            train_data,
            ptype,
            seed: 0,
            extra_test_sets: Vec::new(),
        }
    }

    pub fn id(&self) -> String {
        format!(
            "{}-{}-{}-{}-s{}",
            self.model,
            self.freeze.as_str(),
            self.train_data.label(),
            self.ptype.to_string().to_lowercase(),
            self.seed
        )
    }

    /// Test sets: the training members followed by the extra ones.
    pub fn test_sets(&self) -> Vec<String> {
        let mut out = self.train_data.members();
        for t in &self.extra_test_sets {
            if !out.contains(t) {
                out.push(t.clone());
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub runs: Vec<RunSpec>,
}

fn family_of(name: &str) -> Result<DatasetFamily> {
    Ok(builtin(name)?.family)
}

/// Prompt types every member of the training data supports.
fn common_prompt_types(members: &[String]) -> Result<Vec<PromptType>> {
    let mut common: Option<BTreeSet<PromptType>> = None;
    for m in members {
        let types: BTreeSet<PromptType> = family_of(m)?.prompt_types().into_iter().collect();
        common = Some(match common {
            None => types,
            Some(c) => c.intersection(&types).copied().collect(),
        });
    }
    Ok(common.unwrap_or_default().into_iter().collect())
}

impl ExperimentPlan {
    /// Every prompt type on each individual dataset in `sets`.
    pub fn individual(model: ModelKind, sets: &[&str]) -> Result<Self> {
        let mut runs = Vec::new();
        for set in sets {
            for ptype in family_of(set)?.prompt_types() {
                runs.push(RunSpec::new(model, TrainData::Individual(set.to_string()), ptype));
            }
        }
        Ok(Self { runs })
    }

    /// Ten prompt types on each of the five non-radiology datasets.
    pub fn non_radiology(variant: Variant) -> Result<Self> {
        Self::individual(ModelKind::Vlsm(variant), &NON_RADIOLOGY_TRAIN_SETS)
    }

    /// Every defined prompt type on each radiology dataset.
    pub fn radiology(variant: Variant) -> Result<Self> {
        Self::individual(ModelKind::Vlsm(variant), &RADIOLOGY_TRAIN_SETS)
    }

    /// Every prompt type shared by all pool members.
    pub fn pooled(variant: Variant, kind: PoolKind) -> Result<Self> {
        let data = TrainData::Pooled(kind);
        let runs = common_prompt_types(&data.members())?
            .into_iter()
            .map(|p| RunSpec::new(ModelKind::Vlsm(variant), data.clone(), p))
            .collect();
        Ok(Self { runs })
    }

    /// Individual runs for every VLSM, pooled runs for CLIPSeg and CRIS, and
    /// one image-only baseline run per training dataset. Endoscopy runs are
    /// also tested on the other endoscopy test sets.
    pub fn full_matrix() -> Result<Self> {
        let mut plan = Self::default();
        for v in [Variant::Clipseg, Variant::Cris, Variant::Biomedclipseg, Variant::BiomedclipsegD] {
            plan.extend(Self::non_radiology(v)?);
            plan.extend(Self::radiology(v)?);
        }
        for v in [Variant::Clipseg, Variant::Cris] {
            plan.extend(Self::pooled(v, PoolKind::All)?);
            plan.extend(Self::pooled(v, PoolKind::EndoscopyOnly)?);
        }
        for set in NON_RADIOLOGY_TRAIN_SETS.iter().chain(&RADIOLOGY_TRAIN_SETS) {
            plan.runs.push(RunSpec::new(ModelKind::Unet, TrainData::Individual(set.to_string()), PromptType::P0));
        }
        for run in &mut plan.runs {
            let endoscopic = run.train_data.members().iter().all(|m| ENDOSCOPY_TEST_SETS.contains(&m.as_str()));
            if endoscopic {
                run.extra_test_sets = ENDOSCOPY_TEST_SETS.iter().map(|s| s.to_string()).collect();
            }
        }
        Ok(plan)
    }

    pub fn extend(&mut self, other: ExperimentPlan) {
        self.runs.extend(other.runs);
    }

    pub fn len(&self) -> usize {
        self.runs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.runs.is_empty()
    }

    /// Unique ids, trainable datasets, supported prompt types, known test sets.
    pub fn validate(&self) -> Result<()> {
        let mut ids = BTreeSet::new();
        for run in &self.runs {
            let id = run.id();
            if !ids.insert(id.clone()) {
                return Err(Error::Plan(format!("duplicate run id `{id}`")));
            }
            let members = run.train_data.members();
            for m in &members {
                let d = builtin(m)?;
                if d.test_only {
                    return Err(Error::TestOnlyInTraining(m.clone()));
                }
            }
            if run.model != ModelKind::Unet && !common_prompt_types(&members)?.contains(&run.ptype) {
                return Err(Error::Plan(format!("{id}: {} is not defined for every training dataset", run.ptype)));
            }
            for t in &run.extra_test_sets {
                builtin(t)?;
            }
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let plan: Self = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        plan.validate()?;
        Ok(plan)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fifty_non_radiology_runs_per_vlsm() {
        for v in [Variant::Clipseg, Variant::Cris, Variant::Biomedclipseg, Variant::BiomedclipsegD] {
            let plan = ExperimentPlan::non_radiology(v).unwrap();
            assert_eq!(plan.len(), 50);
            plan.validate().unwrap();
        }
    }

    #[test]
    fn twenty_two_radiology_runs_per_vlsm() {
        assert_eq!(ExperimentPlan::radiology(Variant::Cris).unwrap().len(), 22);
    }

    #[test]
    fn full_matrix_is_valid() {
        let plan = ExperimentPlan::full_matrix().unwrap();
        plan.validate().unwrap();
        assert!(plan.len() > 4 * 72);
    }

    #[test]
    fn test_only_training_data_is_rejected() {
        let plan = ExperimentPlan {
            runs: vec![RunSpec::new(
                ModelKind::Vlsm(Variant::Clipseg),
                TrainData::Individual("etis".into()),
                PromptType::P1,
            )],
        };
        assert!(matches!(plan.validate(), Err(Error::TestOnlyInTraining(_))));
    }

    #[test]
    fn duplicates_are_rejected() {
        let run = RunSpec::new(ModelKind::Unet, TrainData::Individual("busi".into()), PromptType::P0);
        let plan = ExperimentPlan {
            runs: vec![run.clone(), run],
        };
        assert!(matches!(plan.validate(), Err(Error::Plan(_))));
    }

    #[test]
    fn ids_and_json_round_trip() {
        let run = RunSpec::new(ModelKind::Vlsm(Variant::BiomedclipsegD), TrainData::Pooled(PoolKind::EndoscopyOnly), PromptType::P3);
        assert_eq!(run.id(), "biomedclipseg_d-full-pool-endoscopy-p3-s0");
        let plan = ExperimentPlan { runs: vec![run] };
        let text = serde_json::to_string(&plan).unwrap();
        assert_eq!(serde_json::from_str::<ExperimentPlan>(&text).unwrap(), plan);
    }
}
