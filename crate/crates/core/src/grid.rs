use crate::error::{FhjError, Result};
use serde::{Deserialize, Serialize};

/// Uniform time grid on `[0, T]` with `steps + 1` nodes `t_j = j * h`.
///
/// Only uniform grids are supported; kernel weights then depend on node
/// distance alone and can be precomputed in O(N).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    horizon: f64,
    steps: usize,
}

impl Grid {
    pub fn new(horizon: f64, steps: usize) -> Result<Self> {
        if !horizon.is_finite() || horizon <= 0.0 {
            return Err(FhjError::InvalidParameter(format!(
                "grid horizon must be finite and positive, got {horizon}"
            )));
        }
        if steps < 1 {
            return Err(FhjError::InvalidParameter(
                "grid needs at least one step".into(),
            ));
        }
        Ok(Self { horizon, steps })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Number of steps N; the grid has N + 1 nodes.
    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn node_count(&self) -> usize {
        self.steps + 1
    }

    pub fn step(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    pub fn t(&self, index: usize) -> f64 {
        if index == self.steps {
            self.horizon
        } else {
            index as f64 * self.step()
        }
    }

    /// Node closest to time `t` (clamped to the grid).
    pub fn nearest_index(&self, t: f64) -> usize {
        let raw = (t / self.step()).round();
        if raw <= 0.0 {
            0
        } else {
            (raw as usize).min(self.steps)
        }
    }
}
