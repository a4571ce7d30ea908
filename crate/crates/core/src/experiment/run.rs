use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use candle_core::{DType, Device};
use serde::{Deserialize, Serialize};

use super::plan::{ExperimentPlan, FreezeMode, RunSpec, TrainData};
use crate::data::{load_triplets, open_dataset, pool, DatasetHandle, SampleTriplet, Split, TripletOptions};
use crate::error::{Error, Result};
use crate::eval::{evaluate, grouped_bar_chart, write_reports_json, write_samples_csv, write_summary_csv, EvalReport};
use crate::model::{
    build_variant, load_checkpoint, sha256_hex, BackboneProvider, CnnConfig, ModelKind, SegModel, UNet, VlsmConfig,
};
use crate::prompt::{write_jsonl, PromptRecord};
use crate::train::{fit, write_history_csv, FitOptions, TrainConfig, BEST_CHECKPOINT};

pub const RUNS_DIR: &str = "runs";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const CONFIG_FILE: &str = "config.json";
pub const CHECKPOINT_DIR: &str = "checkpoints";
pub const EVAL_DIR: &str = "eval";
pub const FIGS_DIR: &str = "figs";
pub const REPORTS_FILE: &str = "reports.json";

/// Version string recorded in run manifests.
pub fn version_string() -> String {
    format!(
        "{}+{}",
        env!("CARGO_PKG_VERSION"),
        option_env!("VLSEG_GIT_REV").unwrap_or("untracked")
    )
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub data_root: PathBuf,
    pub out_root: PathBuf,
    pub provider: BackboneProvider,
    /// Replaces the per-model default recipe (the run seed still applies).
    pub train: Option<TrainConfig>,
    pub max_epochs: Option<usize>,
    pub eval_batch_size: usize,
}

impl RunOptions {
    pub fn new(data_root: impl Into<PathBuf>, out_root: impl Into<PathBuf>) -> Self {
        Self {
            data_root: data_root.into(),
            out_root: out_root.into(),
            provider: BackboneProvider::Toy { seed: 0 },
            train: None,
            max_epochs: None,
            eval_batch_size: 16,
        }
    }

    pub fn train_config(&self, run: &RunSpec) -> TrainConfig {
        let mut c = self.train.clone().unwrap_or_else(|| TrainConfig::for_model(run.model));
        c.seed = run.seed;
        if let Some(e) = self.max_epochs {
            c.max_epochs = e;
        }
        c
    }
}

/// Everything that determines a run's outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub run: RunSpec,
    pub train: TrainConfig,
    pub provider: BackboneProvider,
}

impl RunConfig {
    pub fn checksum(&self) -> Result<String> {
        Ok(sha256_hex(serde_json::to_string(self)?.as_bytes()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    pub checksum: String,
    pub seed: u64,
    pub version: String,
    pub complete: bool,
    pub steps: u64,
    pub epochs: usize,
    pub best_epoch: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PlanSummary {
    pub trained: Vec<String>,
    pub skipped: Vec<String>,
    /// Optimiser steps taken across the runs executed now.
    pub steps: u64,
}

/// Model of `kind` with fresh parameters.
pub fn build_model(kind: ModelKind, freeze: FreezeMode, provider: &BackboneProvider, seed: u64) -> Result<Box<dyn SegModel>> {
    match kind {
        ModelKind::Vlsm(v) => {
            let mut config = VlsmConfig::toy(v, seed);
            if let BackboneProvider::Pretrained { .. } = provider {
                config.provider = provider.clone();
            }
            let frozen = freeze == FreezeMode::FrozenEncoders;
            config.freeze_text = frozen;
            config.freeze_image = frozen;
            Ok(Box::new(build_variant(&config, &Device::Cpu, DType::F32)?))
        }
        ModelKind::Unet => Ok(Box::new(UNet::new(&CnnConfig::toy(seed), &Device::Cpu, DType::F32)?)),
    }
}

/// The best checkpoint of a finished run, ready for evaluation.
pub fn load_run_model(run_dir: impl AsRef<Path>) -> Result<Box<dyn SegModel>> {
    let dir = run_dir.as_ref();
    let config = RunConfig::load(dir.join(CONFIG_FILE))?;
    let model = build_model(config.run.model, config.run.freeze, &config.provider, config.run.seed)?;
    let ckpt = dir.join(CHECKPOINT_DIR).join(BEST_CHECKPOINT);
    if !ckpt.exists() {
        return Err(Error::MissingCheckpoint(ckpt.display().to_string()));
    }
    load_checkpoint(ckpt, model.params())?;
    Ok(model)
}

fn open_members(data_root: &Path, data: &TrainData) -> Result<Vec<DatasetHandle>> {
    let handles: Vec<DatasetHandle> = data
        .members()
        .iter()
        .map(|m| open_dataset(data_root, m))
        .collect::<Result<_>>()?;
    if let TrainData::Pooled(kind) = data {
        pool(handles.clone(), *kind)?;
    } else if let Some(h) = handles.iter().find(|h| h.descriptor.test_only) {
        return Err(Error::TestOnlyInTraining(h.name().to_string()));
    }
    Ok(handles)
}

fn split_triplets(handles: &[DatasetHandle], split: Split, options: &TripletOptions) -> Result<Vec<SampleTriplet>> {
    let mut out = Vec::new();
    for h in handles {
        out.extend(load_triplets(h, split, options)?);
    }
    Ok(out)
}

fn prompt_records(triplets: &[SampleTriplet]) -> Vec<PromptRecord> {
    triplets
        .iter()
        .filter_map(|t| {
            t.plan.as_ref().map(|p| PromptRecord {
                sample_id: t.sample_id.clone(),
                class: t.class_name.clone(),
                ptype: p.ptype,
                prompt: t.prompt.clone(),
                attributes: p.attributes.clone(),
            })
        })
        .collect()
}

fn read_manifest(dir: &Path) -> Option<RunManifest> {
    let text = std::fs::read_to_string(dir.join(MANIFEST_FILE)).ok()?;
    serde_json::from_str(&text).ok()
}

/// Train and evaluate one run; returns the manifest and whether work was done.
pub fn execute_run(run: &RunSpec, options: &RunOptions) -> Result<(RunManifest, bool)> {
    let id = run.id();
    let dir = options.out_root.join(RUNS_DIR).join(&id);
    let config = RunConfig {
        run: run.clone(),
        train: options.train_config(run),
        provider: options.provider.clone(),
    };
    let checksum = config.checksum()?;
    if let Some(m) = read_manifest(&dir) {
        if m.complete && m.checksum == checksum {
            log::info!("{id}: complete, skipping");
            return Ok((m, false));
        }
    }
    std::fs::create_dir_all(dir.join(EVAL_DIR))?;
    std::fs::write(dir.join(CONFIG_FILE), serde_json::to_string_pretty(&config)?)?;

    let mut triplet_opts = TripletOptions::new(run.ptype);
    triplet_opts.seed = run.seed;
    let handles = open_members(&options.data_root, &run.train_data)?;
    let train = split_triplets(&handles, Split::Train, &triplet_opts)?;
    let val = split_triplets(&handles, Split::Val, &triplet_opts)?;
    let mut records = Vec::new();
    write_jsonl(&mut records, &prompt_records(&train))?;
    std::fs::write(dir.join("prompts.jsonl"), records)?;

    let mut model = build_model(run.model, run.freeze, &options.provider, run.seed)?;
    let fit_opts = FitOptions {
        out_dir: Some(dir.join(CHECKPOINT_DIR)),
        resume: true,
        composer: triplet_opts.composer.clone(),
    };
    log::info!("{id}: training on {} triplets", train.len());
    let outcome = fit(model.as_mut(), &train, &val, &config.train, &fit_opts)?;
    write_history_csv(dir.join("history.csv"), &outcome.history)?;

    let mut reports: Vec<EvalReport> = Vec::new();
    for set in run.test_sets() {
        let handle = match open_dataset(&options.data_root, &set) {
            Ok(h) => h,
            Err(e) if !run.train_data.members().contains(&set) => {
                log::warn!("{id}: skipping test set {set}: {e}");
                continue;
            }
            Err(e) => return Err(e),
        };
        let test = load_triplets(&handle, Split::Test, &triplet_opts)?;
        if test.is_empty() {
            log::warn!("{id}: {set} has no test samples");
            continue;
        }
        let report = evaluate(model.as_ref(), &test, options.eval_batch_size)?.with_train_data(run.train_data.label());
        write_samples_csv(dir.join(EVAL_DIR).join(format!("{set}.csv")), &report)?;
        reports.push(report);
    }
    write_summary_csv(dir.join(EVAL_DIR).join("summary.csv"), &reports)?;
    write_reports_json(dir.join(EVAL_DIR).join(REPORTS_FILE), &reports)?;
    if !reports.is_empty() {
        let groups: Vec<String> = reports.iter().map(|r| r.test_data.clone()).collect();
        let series = vec![(model.name(), reports.iter().map(|r| Some(r.dice_mean)).collect())];
        grouped_bar_chart(dir.join(FIGS_DIR).join("dice.svg"), &id, "Dice (%)", &groups, &series)?;
    }
    let manifest = RunManifest {
        run_id: id,
        checksum,
        seed: run.seed,
        version: version_string(),
        complete: true,
        steps: outcome.steps,
        epochs: outcome.history.len(),
        best_epoch: outcome.best_epoch,
    };
    std::fs::write(dir.join(MANIFEST_FILE), serde_json::to_string_pretty(&manifest)?)?;
    Ok((manifest, true))
}

/// Execute every run of the plan in order; completed runs with an unchanged
/// configuration are skipped.
pub fn run_plan(plan: &ExperimentPlan, options: &RunOptions) -> Result<PlanSummary> {
    plan.validate()?;
    std::fs::create_dir_all(&options.out_root)?;
    let mut summary = PlanSummary::default();
    let mut status: BTreeMap<String, RunManifest> = BTreeMap::new();
    for run in &plan.runs {
        let (manifest, worked) = execute_run(run, options)?;
        if worked {
            summary.steps += manifest.steps;
            summary.trained.push(manifest.run_id.clone());
        } else {
            summary.skipped.push(manifest.run_id.clone());
        }
        status.insert(manifest.run_id.clone(), manifest);
    }
    std::fs::write(
        options.out_root.join(MANIFEST_FILE),
        serde_json::to_string_pretty(&serde_json::json!({
            "version": version_string(),
            "plan": plan,
            "runs": status,
        }))?,
    )?;
    Ok(summary)
}
