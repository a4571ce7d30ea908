use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};

use candle_core::{DType, Tensor};
use ndarray::{Array2, Array3};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::TrainConfig;
use super::loss::combined_loss;
use super::optim::{AdamParams, Optimizer};
use super::schedule::{EarlyStopping, LrScheduler, SchedulerKind};
use crate::data::SampleTriplet;
use crate::error::{Error, Result};
use crate::eval::{dice_score, logits_to_mask, preprocess_all, stack_images, stack_targets, target_at, unstack_logits};
use crate::model::{load_checkpoint, save_checkpoint, SegModel};
use crate::prompt::{stable_seed, PromptComposer};

pub const HISTORY_FILE: &str = "history.csv";
pub const BEST_CHECKPOINT: &str = "best.safetensors";
pub const LAST_CHECKPOINT: &str = "last.safetensors";
pub const OPTIMIZER_STATE: &str = "optimizer.safetensors";
pub const STATE_FILE: &str = "state.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr: f64,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_dice: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EpochDecision {
    pub improved: bool,
    pub stop: bool,
}

/// Scheduler, early-stopping and history bookkeeping across epochs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainState {
    /// Completed epochs.
    pub epoch: usize,
    pub lr: f64,
    pub scheduler: LrScheduler,
    pub early: EarlyStopping,
    pub history: Vec<EpochRecord>,
    pub steps: u64,
}

impl TrainState {
    pub fn new(config: &TrainConfig) -> Self {
        let scheduler = match config.scheduler {
            SchedulerKind::Plateau => LrScheduler::plateau(config.lr, config.plateau_factor, config.plateau_patience),
            SchedulerKind::Cosine => LrScheduler::cosine(config.lr, config.max_epochs),
            SchedulerKind::Constant => LrScheduler::Constant { lr: config.lr },
        };
        Self {
            epoch: 0,
            lr: scheduler.lr(),
            scheduler,
            early: EarlyStopping::new(config.early_stop_patience),
            history: Vec::new(),
            steps: 0,
        }
    }

    /// Close an epoch: the scheduler watches validation loss, early stopping
    /// watches validation Dice.
    pub fn end_epoch(&mut self, train_loss: f64, val_loss: f64, val_dice: f64) -> EpochDecision {
        self.epoch += 1;
        self.history.push(EpochRecord {
            epoch: self.epoch,
            lr: self.lr,
            train_loss,
            val_loss,
            val_dice,
        });
        let improved = self.early.observe(self.epoch, val_dice);
        self.lr = self.scheduler.end_epoch(val_loss);
        EpochDecision {
            improved,
            stop: self.early.should_stop(),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct FitOptions {
    /// Checkpoints, history and resume state go here when set.
    pub out_dir: Option<PathBuf>,
    /// Continue from the state in `out_dir` when present.
    pub resume: bool,
    pub composer: PromptComposer,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitOutcome {
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_val_dice: f64,
    pub stopped_early: bool,
    pub steps: u64,
}

struct Prepared {
    images: Vec<Array3<f32>>,
    targets: Vec<Array2<f32>>,
}

fn prepare(model: &dyn SegModel, triplets: &[SampleTriplet]) -> Result<Prepared> {
    let side = model.output_side();
    Ok(Prepared {
        images: preprocess_all(triplets, model.input_spec())?,
        targets: triplets.iter().map(|t| target_at(t.mask.view(), side)).collect(),
    })
}

fn batch_tensors(model: &dyn SegModel, data: &Prepared, idx: &[usize]) -> Result<(Tensor, Tensor)> {
    let p = model.params();
    let images: Vec<&Array3<f32>> = idx.iter().map(|&i| &data.images[i]).collect();
    let targets: Vec<&Array2<f32>> = idx.iter().map(|&i| &data.targets[i]).collect();
    Ok((
        stack_images(&images, p.dtype(), p.device())?,
        stack_targets(&targets, p.dtype(), p.device())?,
    ))
}

fn scalar(t: &Tensor) -> Result<f64> {
    Ok(t.to_dtype(DType::F64)?.to_scalar::<f64>()?)
}

fn epoch_seed(seed: u64, epoch: usize, stream: &str) -> u64 {
    stable_seed(&format!("{stream}/{epoch}"), seed)
}

/// Validation loss and mean Dice at original resolution.
fn validate(model: &dyn SegModel, val: &[SampleTriplet], data: &Prepared, config: &TrainConfig) -> Result<(f64, f64)> {
    let loss_cfg = config.loss();
    let (mut loss_sum, mut dice_sum) = (0.0, 0.0);
    let idx: Vec<usize> = (0..val.len()).collect();
    for chunk in idx.chunks(config.batch_size) {
        let (x, y) = batch_tensors(model, data, chunk)?;
        let prompts: Vec<String> = chunk.iter().map(|&i| val[i].prompt.clone()).collect();
        let logits = model.forward(&x, &prompts)?.detach();
        loss_sum += scalar(&combined_loss(&logits, &y, &loss_cfg)?.total)? * chunk.len() as f64;
        for (l, &i) in unstack_logits(&logits)?.iter().zip(chunk) {
            let pred = logits_to_mask(l.view(), val[i].original_size());
            dice_sum += dice_score(pred.view(), val[i].mask.view())?;
        }
    }
    let n = val.len() as f64;
    Ok((loss_sum / n, dice_sum / n))
}

fn snapshot(model: &dyn SegModel) -> Result<BTreeMap<String, Tensor>> {
    model
        .params()
        .tensors()
        .into_iter()
        .map(|(k, t)| Ok((k, t.copy()?)))
        .collect()
}

fn save_tensor_map(path: &Path, tensors: &BTreeMap<String, Tensor>) -> Result<()> {
    let list: Vec<(String, Tensor)> = tensors
        .iter()
        .map(|(k, t)| Ok((k.clone(), t.contiguous()?)))
        .collect::<Result<_>>()?;
    safetensors::serialize_to_file(list, None::<HashMap<String, String>>, path)?;
    Ok(())
}

/// `epoch,lr,train_loss,val_loss,val_dice` rows.
pub fn write_history_csv(path: impl AsRef<Path>, history: &[EpochRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in history {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_history_csv(path: impl AsRef<Path>) -> Result<Vec<EpochRecord>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}

fn checkpoint_metadata(model: &dyn SegModel, state: &TrainState) -> BTreeMap<String, String> {
    BTreeMap::from([
        ("model".to_string(), model.name()),
        ("epoch".to_string(), state.epoch.to_string()),
    ])
}

/// Finetune `model` on `train`, selecting the epoch with the best validation
/// Dice. The model ends up holding the best parameters.
pub fn fit(
    model: &mut dyn SegModel,
    train: &[SampleTriplet],
    val: &[SampleTriplet],
    config: &TrainConfig,
    options: &FitOptions,
) -> Result<FitOutcome> {
    config.validate()?;
    if train.is_empty() || val.is_empty() {
        return Err(Error::EmptySplit);
    }
    let train_data = prepare(model, train)?;
    let val_data = prepare(model, val)?;
    let hp = AdamParams {
        weight_decay: config.weight_decay,
        ..AdamParams::default()
    };
    let mut optimizer = Optimizer::new(config.optimizer, hp, model.params().trainable())?;
    let mut state = TrainState::new(config);
    let mut best: Option<BTreeMap<String, Tensor>> = None;
    let loss_cfg = config.loss();

    if let Some(dir) = &options.out_dir {
        std::fs::create_dir_all(dir)?;
        let state_path = dir.join(STATE_FILE);
        if options.resume && state_path.exists() {
            state = serde_json::from_str(&std::fs::read_to_string(&state_path)?)?;
            load_checkpoint(dir.join(LAST_CHECKPOINT), model.params())?;
            let bytes = std::fs::read(dir.join(OPTIMIZER_STATE))?;
            let tensors: BTreeMap<String, Tensor> =
                candle_core::safetensors::load_buffer(&bytes, model.params().device())?.into_iter().collect();
            optimizer.load_state(&tensors, state.steps)?;
            let best_path = dir.join(BEST_CHECKPOINT);
            if best_path.exists() {
                let current = snapshot(model)?;
                load_checkpoint(&best_path, model.params())?;
                best = Some(snapshot(model)?);
                for (name, t) in &current {
                    model.params().assign(name, t)?;
                }
            }
            log::info!("resuming after epoch {}", state.epoch);
        }
    }

    let mut stopped_early = state.early.should_stop() && state.epoch > 0;
    while !stopped_early && state.epoch < config.max_epochs {
        let epoch = state.epoch + 1;
        let lr = state.lr;
        let mut order: Vec<usize> = (0..train.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(epoch_seed(config.seed, epoch, "order")));
        let mut prompt_rng = ChaCha8Rng::seed_from_u64(epoch_seed(config.seed, epoch, "prompts"));
        let mut loss_sum = 0.0;
        for (b, chunk) in order.chunks(config.batch_size).enumerate() {
            let (x, y) = batch_tensors(model, &train_data, chunk)?;
            let mut prompts = Vec::with_capacity(chunk.len());
            for &i in chunk {
                let t = &train[i];
                prompts.push(match (&t.plan, config.redraw_prompts) {
                    (Some(plan), true) => plan.compose(&options.composer, &mut prompt_rng)?,
                    _ => t.prompt.clone(),
                });
            }
            let logits = model.forward(&x, &prompts)?;
            let loss = combined_loss(&logits, &y, &loss_cfg)?.total;
            let value = scalar(&loss)?;
            if !value.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, batch: b, lr });
            }
            let grads = loss.backward()?;
            let scale = match config.grad_clip {
                Some(max) => {
                    let norm = optimizer.grad_norm(&grads)?;
                    if norm > max {
                        max / norm
                    } else {
                        1.0
                    }
                }
                None => 1.0,
            };
            optimizer.step_scaled(&grads, lr, scale)?;
            state.steps += 1;
            loss_sum += value * chunk.len() as f64;
        }
        let train_loss = loss_sum / train.len() as f64;
        let (val_loss, val_dice) = validate(model, val, &val_data, config)?;
        let decision = state.end_epoch(train_loss, val_loss, val_dice);
        log::info!(
            "epoch {epoch}: lr {lr:.3e} train {train_loss:.4} val {val_loss:.4} dice {:.2}",
            val_dice * 100.0
        );
        if decision.improved {
            best = Some(snapshot(model)?);
        }
        if let Some(dir) = &options.out_dir {
            let meta = checkpoint_metadata(model, &state);
            if decision.improved {
                save_checkpoint(dir.join(BEST_CHECKPOINT), model.params(), &meta)?;
            }
            save_checkpoint(dir.join(LAST_CHECKPOINT), model.params(), &meta)?;
            save_tensor_map(&dir.join(OPTIMIZER_STATE), &optimizer.state_tensors())?;
            std::fs::write(dir.join(STATE_FILE), serde_json::to_string_pretty(&state)?)?;
            write_history_csv(dir.join(HISTORY_FILE), &state.history)?;
        }
        stopped_early = decision.stop;
    }

    if let Some(best) = &best {
        for (name, t) in best {
            model.params().assign(name, t)?;
        }
    }
    Ok(FitOutcome {
        history: state.history.clone(),
        best_epoch: state.early.best_epoch,
        best_val_dice: state.early.best.unwrap_or(0.0),
        stopped_early,
        steps: state.steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synthetic::{blob_samples, synthetic_triplets};
    use crate::data::TripletOptions;
    use crate::model::{build_variant, SegModel, Variant, Vlsm, VlsmConfig, IMAGE_ENCODER, TEXT_ENCODER};
    use crate::prompt::PromptType;
    use candle_core::Device;

    fn triplets(n: usize, seed: u64) -> Vec<SampleTriplet> {
        synthetic_triplets("blobs", &blob_samples(n, 32, seed), &TripletOptions::new(PromptType::P3)).unwrap()
    }

    fn toy(variant: Variant) -> Vlsm {
        build_variant(&VlsmConfig::toy(variant, 1), &Device::Cpu, DType::F32).unwrap()
    }

    fn quick(epochs: usize) -> TrainConfig {
        TrainConfig {
            batch_size: 4,
            max_epochs: epochs,
            lr: 1e-3,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn same_seed_gives_same_history() {
        let data = triplets(6, 2);
        let run = || {
            let mut m = toy(Variant::Clipseg);
            fit(&mut m, &data, &data, &quick(2), &FitOptions::default()).unwrap().history
        };
        let (a, b) = (run(), run());
        assert_eq!(a.len(), 2);
        for (x, y) in a.iter().zip(&b) {
            assert!((x.train_loss - y.train_loss).abs() < 1e-6);
            assert!((x.val_loss - y.val_loss).abs() < 1e-6);
        }
    }

    #[test]
    fn resume_matches_uninterrupted_run() {
        let data = triplets(6, 4);
        let dir = tempfile::tempdir().unwrap();
        let full = {
            let mut m = toy(Variant::Cris);
            fit(&mut m, &data, &data, &quick(3), &FitOptions::default()).unwrap()
        };
        let opts = FitOptions {
            out_dir: Some(dir.path().to_path_buf()),
            resume: true,
            ..FitOptions::default()
        };
        let mut m = toy(Variant::Cris);
        fit(&mut m, &data, &data, &quick(1), &opts).unwrap();
        let mut m = toy(Variant::Cris);
        let resumed = fit(&mut m, &data, &data, &quick(3), &opts).unwrap();
        assert_eq!(resumed.history.len(), 3);
        for (x, y) in full.history.iter().zip(&resumed.history) {
            assert!((x.train_loss - y.train_loss).abs() < 1e-5, "{x:?} vs {y:?}");
        }
        let on_disk = read_history_csv(dir.path().join(HISTORY_FILE)).unwrap();
        assert_eq!(on_disk.len(), 3);
        assert!(dir.path().join(BEST_CHECKPOINT).exists());
    }

    #[test]
    fn frozen_encoders_are_bit_identical() {
        let data = triplets(4, 5);
        let mut config = VlsmConfig::toy(Variant::Clipseg, 3);
        config.freeze_text = true;
        config.freeze_image = true;
        let mut m = build_variant(&config, &Device::Cpu, DType::F32).unwrap();
        let before: Vec<Vec<f64>> = [TEXT_ENCODER, IMAGE_ENCODER]
            .iter()
            .map(|c| m.params().flatten(Some(c)).unwrap())
            .collect();
        let decoder_before = m.params().flatten(Some(crate::model::DECODER)).unwrap();
        let mut cfg = quick(10);
        cfg.batch_size = 4;
        let out = fit(&mut m, &data, &data, &cfg, &FitOptions::default()).unwrap();
        assert_eq!(out.steps, 10);
        for (c, b) in [TEXT_ENCODER, IMAGE_ENCODER].iter().zip(&before) {
            let after = m.params().flatten(Some(c)).unwrap();
            assert!(after.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
        // the best epoch may be the first, but some step changed the decoder
        assert_ne!(m.params().flatten(Some(crate::model::DECODER)).unwrap(), decoder_before);
    }

    #[test]
    fn nan_loss_is_reported_with_context() {
        let data = triplets(4, 6);
        let mut m = toy(Variant::Clipseg);
        let name = m.params().names().find(|n| n.starts_with("decoder")).unwrap().to_string();
        let v = m.params().get(&name).unwrap();
        let nan = (v.as_tensor().zeros_like().unwrap() + f64::NAN).unwrap();
        m.params().assign(&name, &nan).unwrap();
        let mut cfg = quick(1);
        cfg.lr = 5e-4;
        match fit(&mut m, &data, &data, &cfg, &FitOptions::default()) {
            Err(Error::NonFiniteLoss { epoch, batch, lr }) => {
                assert_eq!((epoch, batch), (1, 0));
                assert_eq!(lr, 5e-4);
            }
            other => panic!("expected a non-finite loss error, got {other:?}"),
        }
    }

    #[test]
    fn injected_flat_losses_reduce_lr_then_stop() {
        let mut cfg = TrainConfig::for_variant(Variant::Clipseg);
        cfg.early_stop_patience = 8;
        let mut s = TrainState::new(&cfg);
        let mut stop_at = None;
        for e in 1..=20 {
            if s.end_epoch(1.0, 1.0, 0.5).stop {
                stop_at = Some(e);
                break;
            }
        }
        assert_eq!(s.history[5].lr, 2e-3);
        assert!((s.lr - 2e-4).abs() < 1e-15);
        assert!((s.history[6].lr - 2e-4).abs() < 1e-15);
        assert_eq!(stop_at, Some(9));
    }

    #[test]
    fn empty_splits_are_rejected() {
        let mut m = toy(Variant::Clipseg);
        let data = triplets(2, 1);
        assert!(matches!(
            fit(&mut m, &[], &data, &quick(1), &FitOptions::default()),
            Err(Error::EmptySplit)
        ));
    }
}
