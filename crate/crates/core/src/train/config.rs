use std::path::Path;

use serde::{Deserialize, Serialize};

use super::loss::LossConfig;
use super::optim::OptimizerKind;
use super::schedule::SchedulerKind;
use crate::error::{Error, Result};
use crate::model::{ModelKind, Variant};

/// Every knob of the finetuning recipe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub bce_weight: f64,
    pub dice_smooth: f64,
    pub optimizer: OptimizerKind,
    pub weight_decay: f64,
    pub lr: f64,
    pub scheduler: SchedulerKind,
    pub plateau_patience: usize,
    pub plateau_factor: f64,
    pub early_stop_patience: usize,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub seed: u64,
    /// Global gradient-norm limit; off when absent.
    pub grad_clip: Option<f64>,
    /// Re-draw template choices (phrasing, description) every epoch.
    pub redraw_prompts: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self::for_variant(Variant::Clipseg)
    }
}

impl TrainConfig {
    /// CLIPSeg family: lr 2e-3, batch 128, early-stop patience 50.
    /// CRIS: lr 2e-5, batch 32, patience 10. Both use AdamW with weight
    /// decay 1e-3 and a x0.1 plateau reduction after 5 epochs.
    pub fn for_variant(variant: Variant) -> Self {
        let clipseg = variant.is_clipseg_family();
        Self {
            bce_weight: 0.2,
            dice_smooth: 1.0,
            optimizer: OptimizerKind::Adamw,
            weight_decay: 1e-3,
            lr: if clipseg { 2e-3 } else { 2e-5 },
            scheduler: SchedulerKind::Plateau,
            plateau_patience: 5,
            plateau_factor: 0.1,
            early_stop_patience: if clipseg { 50 } else { 10 },
            batch_size: if clipseg { 128 } else { 32 },
            max_epochs: 200,
            seed: 0,
            grad_clip: None,
            redraw_prompts: true,
        }
    }

    /// Image-only baseline: Dice loss alone, Adam, lr 1e-3, no weight decay.
    pub fn unet() -> Self {
        Self {
            bce_weight: 0.0,
            optimizer: OptimizerKind::Adam,
            weight_decay: 0.0,
            lr: 1e-3,
            early_stop_patience: 20,
            batch_size: 32,
            ..Self::for_variant(Variant::Clipseg)
        }
    }

    pub fn for_model(kind: ModelKind) -> Self {
        match kind {
            ModelKind::Vlsm(v) => Self::for_variant(v),
            ModelKind::Unet => Self::unet(),
        }
    }

    pub fn loss(&self) -> LossConfig {
        LossConfig {
            bce_weight: self.bce_weight,
            dice_smooth: self.dice_smooth,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("lr", self.lr),
            ("dice_smooth", self.dice_smooth),
            ("batch_size", self.batch_size as f64),
            ("max_epochs", self.max_epochs as f64),
            ("plateau_patience", self.plateau_patience as f64),
            ("early_stop_patience", self.early_stop_patience as f64),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [("bce_weight", self.bce_weight), ("weight_decay", self.weight_decay)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be non-negative, got {v}")));
            }
        }
        if !(self.plateau_factor > 0.0 && self.plateau_factor < 1.0) {
            return Err(Error::Config(format!(
                "plateau_factor must lie in (0, 1), got {}",
                self.plateau_factor
            )));
        }
        if let Some(c) = self.grad_clip {
            if !(c > 0.0) {
                return Err(Error::Config(format!("grad_clip must be positive, got {c}")));
            }
        }
        Ok(())
    }
}

/// Hyperparameter search space; `expand` yields one config per combination.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HyperGrid {
    pub optimizers: Vec<OptimizerKind>,
    pub lrs: Vec<f64>,
    pub batch_sizes: Vec<usize>,
    pub schedulers: Vec<SchedulerKind>,
}

impl Default for HyperGrid {
    fn default() -> Self {
        Self {
            optimizers: vec![OptimizerKind::Adam, OptimizerKind::Adamw],
            lrs: vec![1e-5, 1e-4, 1e-3, 1e-2],
            batch_sizes: vec![16, 32, 64, 128],
            schedulers: vec![SchedulerKind::Cosine, SchedulerKind::Constant, SchedulerKind::Plateau],
        }
    }
}

impl HyperGrid {
    pub const LR_RANGE: (f64, f64) = (1e-5, 1e-2);
    pub const BATCH_SIZES: [usize; 4] = [16, 32, 64, 128];

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = Self::LR_RANGE;
        if let Some(lr) = self.lrs.iter().find(|&&lr| !(lo..=hi).contains(&lr)) {
            return Err(Error::Config(format!("grid learning rate {lr} outside [{lo}, {hi}]")));
        }
        if let Some(b) = self.batch_sizes.iter().find(|b| !Self::BATCH_SIZES.contains(b)) {
            return Err(Error::Config(format!(
                "grid batch size {b} not in {:?}",
                Self::BATCH_SIZES
            )));
        }
        if self.optimizers.is_empty() || self.lrs.is_empty() || self.batch_sizes.is_empty() || self.schedulers.is_empty()
        {
            return Err(Error::Config("every grid axis needs at least one value".into()));
        }
        Ok(())
    }

    pub fn expand(&self, base: &TrainConfig) -> Result<Vec<TrainConfig>> {
        self.validate()?;
        let mut out = Vec::new();
        for &optimizer in &self.optimizers {
            for &lr in &self.lrs {
                for &batch_size in &self.batch_sizes {
                    for &scheduler in &self.schedulers {
                        out.push(TrainConfig {
                            optimizer,
                            lr,
                            batch_size,
                            scheduler,
                            ..base.clone()
                        });
                    }
                }
            }
        }
        Ok(out)
    }
}

/// TOML layout: a `[train]` table and an optional `[grid]` table.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainFile {
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub grid: Option<HyperGrid>,
}

impl TrainFile {
    pub fn parse(text: &str) -> Result<Self> {
        let f: Self = toml::from_str(text)?;
        f.train.validate()?;
        if let Some(g) = &f.grid {
            g.validate()?;
        }
        Ok(f)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string_pretty(self)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn per_variant_defaults() {
        let c = TrainConfig::for_variant(Variant::BiomedclipsegD);
        assert_eq!((c.lr, c.batch_size, c.early_stop_patience), (2e-3, 128, 50));
        let r = TrainConfig::for_variant(Variant::Cris);
        assert_eq!((r.lr, r.batch_size, r.early_stop_patience), (2e-5, 32, 10));
        for c in [c, r] {
            assert_eq!(c.weight_decay, 1e-3);
            assert_eq!(c.bce_weight, 0.2);
            assert_eq!(c.plateau_patience, 5);
            assert_eq!(c.plateau_factor, 0.1);
            assert_eq!(c.optimizer, OptimizerKind::Adamw);
        }
        let u = TrainConfig::unet();
        assert_eq!((u.lr, u.weight_decay, u.bce_weight, u.optimizer), (1e-3, 0.0, 0.0, OptimizerKind::Adam));
    }

    #[test]
    fn toml_round_trip_and_partial_files() {
        let f = TrainFile {
            train: TrainConfig::for_variant(Variant::Cris),
            grid: Some(HyperGrid::default()),
        };
        let text = f.to_toml().unwrap();
        assert_eq!(TrainFile::parse(&text).unwrap(), f);
        let partial = TrainFile::parse("[train]\nlr = 0.01\nmax_epochs = 3\n").unwrap();
        assert_eq!(partial.train.lr, 0.01);
        assert_eq!(partial.train.batch_size, 128);
        assert!(TrainFile::parse("[train]\nplateau_factor = 1.5\n").is_err());
    }

    #[test]
    fn grid_expansion() {
        let g = HyperGrid::default();
        assert_eq!(g.expand(&TrainConfig::default()).unwrap().len(), 2 * 4 * 4 * 3);
        let bad = HyperGrid {
            lrs: vec![0.1],
            ..HyperGrid::default()
        };
        assert!(bad.expand(&TrainConfig::default()).is_err());
    }
}
