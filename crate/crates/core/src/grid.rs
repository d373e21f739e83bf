use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

/// Uniform time discretization of `[t_start, t_end]` into `n_steps` steps.
///
/// Knots are always computed by index so that `knot(n_steps) == t_end`
/// exactly and no rounding drift accumulates across steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    t_start: f64,
    t_end: f64,
    n_steps: usize,
}

impl TimeGrid {
    pub fn new(t_start: f64, t_end: f64, n_steps: usize) -> Result<Self> {
        if !(t_start.is_finite() && t_end.is_finite()) {
            return Err(CoreError::Precondition("time grid bounds must be finite".into()));
        }
        if t_start < 0.0 {
            return Err(CoreError::Precondition("t_start must be >= 0".into()));
        }
        if n_steps == 0 {
            return Err(CoreError::Precondition("n_steps must be >= 1".into()));
        }
        if t_end <= t_start {
            return Err(CoreError::Precondition("t_end must exceed t_start".into()));
        }
        Ok(Self { t_start, t_end, n_steps })
    }

    /// Grid over `[0, horizon]` with `n_steps` steps.
    pub fn over_horizon(horizon: f64, n_steps: usize) -> Result<Self> {
        Self::new(0.0, horizon, n_steps)
    }

    pub fn t_start(&self) -> f64 {
        self.t_start
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    /// Step size tau = (t_end - t_start) / n_steps.
    pub fn tau(&self) -> f64 {
        (self.t_end - self.t_start) / self.n_steps as f64
    }

    /// k-th knot. `knot(0) == t_start`, `knot(n_steps) == t_end` exactly.
    pub fn knot(&self, k: usize) -> f64 {
        debug_assert!(k <= self.n_steps);
        self.t_start + (self.t_end - self.t_start) * (k as f64 / self.n_steps as f64)
    }

    /// Grid with the same span and `factor` times as many steps.
    pub fn refined(&self, factor: usize) -> Result<Self> {
        Self::new(
            self.t_start,
            self.t_end,
            self.n_steps.checked_mul(factor).ok_or_else(|| {
                CoreError::Precondition("refined step count overflows".into())
            })?,
        )
    }
}
