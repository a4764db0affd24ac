use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Budget size: quick desk runs or the original long schedules.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    #[default]
    Desk,
    Paper,
}

impl core::str::FromStr for Scale {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "desk" => Ok(Scale::Desk),
            "paper" => Ok(Scale::Paper),
            _ => Err(Error::Config(alloc::format!("unknown scale `{s}` (expected desk or paper)"))),
        }
    }
}

/// Step-decay learning rate with an initial hold, a floor and optional
/// early stopping.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Schedule {
    pub max_epochs: usize,
    pub lr0: f64,
    /// Epochs at `lr0` before the first decay.
    pub hold: usize,
    /// Epochs between decays after the hold.
    pub every: usize,
    pub factor: f64,
    pub lr_min: f64,
    /// Stop after this many epochs without a validation improvement.
    pub patience: Option<usize>,
    /// Validate every this many epochs.
    pub val_every: usize,
}

impl Schedule {
    /// Base-network training: 5k desk; 30k + 20% at paper scale.
    pub fn pinn(scale: Scale) -> Self {
        match scale {
            Scale::Desk => Self::proportional(5_000, Some(1_000)),
            Scale::Paper => Self {
                hold: 10_000,
                every: 5_000,
                ..Self::proportional(36_000, Some(1_000))
            },
        }
    }

    /// Per-task LoRA adaptation.
    pub fn lora(scale: Scale) -> Self {
        match scale {
            Scale::Desk => Self::proportional(2_000, Some(1_000)),
            Scale::Paper => Self {
                hold: 10_000,
                every: 5_000,
                ..Self::proportional(36_000, Some(1_000))
            },
        }
    }

    /// Hypernetwork training; fixed budget, best-validation snapshot.
    pub fn hyper(scale: Scale) -> Self {
        match scale {
            Scale::Desk => Self {
                hold: 1_000,
                every: 600,
                ..Self::proportional(3_000, None)
            },
            Scale::Paper => Self {
                hold: 5_000,
                every: 3_000,
                ..Self::proportional(15_000, None)
            },
        }
    }

    /// `lr0 = 1e-3` held for a third of the budget, then `×0.1` every sixth.
    pub fn proportional(max_epochs: usize, patience: Option<usize>) -> Self {
        Self {
            max_epochs,
            lr0: 1e-3,
            hold: max_epochs / 3,
            every: (max_epochs / 6).max(1),
            factor: 0.1,
            lr_min: 1e-7,
            patience,
            val_every: 10,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lr0 > 0.0 && self.lr_min > 0.0 && self.factor > 0.0 && self.factor <= 1.0) {
            return Err(Error::Config(alloc::format!(
                "learning rates must be positive and the decay factor in (0, 1] (lr0 {}, lr_min {}, factor {})",
                self.lr0, self.lr_min, self.factor
            )));
        }
        if self.every == 0 || self.val_every == 0 {
            return Err(Error::Config("decay and validation intervals must be at least 1".into()));
        }
        Ok(())
    }

    pub fn lr(&self, epoch: usize) -> f64 {
        let lr = if epoch < self.hold {
            self.lr0
        } else {
            let k = 1 + (epoch - self.hold) / self.every;
            self.lr0 * libm::pow(self.factor, k as f64)
        };
        lr.max(self.lr_min)
    }
}
