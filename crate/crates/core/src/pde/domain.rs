use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Axis-aligned spatial box with an optional time interval `[0, T]`.
///
/// Points are laid out as spatial coordinates followed by `t` when present.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub spatial: Vec<(f64, f64)>,
    pub horizon: Option<f64>,
}

impl Domain {
    pub fn new(spatial: Vec<(f64, f64)>, horizon: Option<f64>) -> Result<Self> {
        for &(lo, hi) in &spatial {
            if !(lo < hi) {
                return Err(Error::Config(alloc::format!("empty interval [{lo}, {hi}]")));
            }
        }
        if let Some(t) = horizon {
            if !(t > 0.0) {
                return Err(Error::Config(alloc::format!("time horizon must be positive, got {t}")));
            }
        }
        Ok(Self { spatial, horizon })
    }

    pub fn unit(spatial_dims: usize, horizon: Option<f64>) -> Self {
        Self {
            spatial: alloc::vec![(0.0, 1.0); spatial_dims],
            horizon,
        }
    }

    pub fn dim(&self) -> usize {
        self.spatial.len() + usize::from(self.horizon.is_some())
    }

    /// `[lo, hi]` of coordinate `i`, time included.
    pub fn bounds(&self, i: usize) -> (f64, f64) {
        if i < self.spatial.len() {
            self.spatial[i]
        } else {
            (0.0, self.horizon.expect("coordinate index within domain"))
        }
    }

    pub fn time_index(&self) -> Option<usize> {
        self.horizon.map(|_| self.spatial.len())
    }

    pub fn contains(&self, point: &[f64]) -> bool {
        point.len() == self.dim()
            && point.iter().enumerate().all(|(i, &p)| {
                let (lo, hi) = self.bounds(i);
                lo <= p && p <= hi
            })
    }
}
