use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchedulerKind {
    Plateau,
    Cosine,
    Constant,
}

impl std::str::FromStr for SchedulerKind {
    type Err = crate::Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "plateau" => Ok(SchedulerKind::Plateau),
            "cosine" => Ok(SchedulerKind::Cosine),
            "constant" => Ok(SchedulerKind::Constant),
            _ => Err(crate::Error::Config(format!("unknown scheduler `{s}`"))),
        }
    }
}

/// Learning-rate policy, advanced once per epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum LrScheduler {
    /// Multiply by `factor` once the monitored loss has gone `patience`
    /// epochs without a strict improvement.
    Plateau {
        initial: f64,
        factor: f64,
        patience: usize,
        reductions: i32,
        best: Option<f64>,
        bad_epochs: usize,
    },
    Cosine {
        initial: f64,
        min_lr: f64,
        period: usize,
        epoch: usize,
    },
    Constant {
        lr: f64,
    },
}

impl LrScheduler {
    pub fn plateau(initial: f64, factor: f64, patience: usize) -> Self {
        LrScheduler::Plateau {
            initial,
            factor,
            patience,
            reductions: 0,
            best: None,
            bad_epochs: 0,
        }
    }

    pub fn cosine(initial: f64, period: usize) -> Self {
        LrScheduler::Cosine {
            initial,
            min_lr: 0.0,
            period: period.max(1),
            epoch: 0,
        }
    }

    pub fn lr(&self) -> f64 {
        match *self {
            LrScheduler::Plateau {
                initial,
                factor,
                reductions,
                ..
            } => initial * factor.powi(reductions),
            LrScheduler::Cosine {
                initial,
                min_lr,
                period,
                epoch,
            } => {
                let t = (epoch.min(period)) as f64 / period as f64;
                min_lr + (initial - min_lr) * 0.5 * (1.0 + (std::f64::consts::PI * t).cos())
            }
            LrScheduler::Constant { lr } => lr,
        }
    }

    /// Record the end of an epoch; returns the learning rate for the next one.
    pub fn end_epoch(&mut self, val_loss: f64) -> f64 {
        match self {
            LrScheduler::Plateau {
                patience,
                reductions,
                best,
                bad_epochs,
                ..
            } => {
                if best.is_none_or(|b| val_loss < b) {
                    *best = Some(val_loss);
                    *bad_epochs = 0;
                } else {
                    *bad_epochs += 1;
                    if *bad_epochs >= *patience {
                        *reductions += 1;
                        *bad_epochs = 0;
                    }
                }
            }
            LrScheduler::Cosine { epoch, .. } => *epoch += 1,
            LrScheduler::Constant { .. } => {}
        }
        self.lr()
    }
}

/// Stop once the monitored score has gone `patience` epochs without a
/// strict improvement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EarlyStopping {
    pub patience: usize,
    pub best: Option<f64>,
    pub best_epoch: usize,
    pub since_improvement: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        Self {
            patience,
            best: None,
            best_epoch: 0,
            since_improvement: 0,
        }
    }

    /// Returns whether `score` improved on the best so far.
    pub fn observe(&mut self, epoch: usize, score: f64) -> bool {
        if self.best.is_none_or(|b| score > b) {
            self.best = Some(score);
            self.best_epoch = epoch;
            self.since_improvement = 0;
            true
        } else {
            self.since_improvement += 1;
            false
        }
    }

    pub fn should_stop(&self) -> bool {
        self.since_improvement >= self.patience
    }
}
