use serde::{Deserialize, Serialize};

use crate::grid::TimeGrid;

/// Discretization scheme for the forward-backward system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    EulerMaruyama,
    Heun,
}

/// Backward-value policy for EM integration: reset evaluates the
/// nonlinearity at y = u_theta(X_k, t_k) each step, no-reset propagates the
/// integrated Y through it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResetPolicy {
    Reset,
    NoReset,
}

/// Simulated forward states, batch-major: `states[b, k, :]` is path b at
/// knot k, with k = 0..=n_steps. Heun simulations also record the predictor
/// states x_bar[b, k, :] of each step (k = 0..n_steps); the losses
/// re-evaluate drift and diffusion rows there, and for coupled problems the
/// predictor position is part of the frozen path, like the states
/// themselves.
#[derive(Debug, Clone)]
pub struct ForwardPaths {
    pub grid: TimeGrid,
    pub dim: usize,
    pub batch: usize,
    pub states: Vec<f64>,
    pub predictors: Option<Vec<f64>>,
}

impl ForwardPaths {
    pub fn state(&self, b: usize, k: usize) -> &[f64] {
        let start = (b * (self.grid.n_steps() + 1) + k) * self.dim;
        &self.states[start..start + self.dim]
    }

    pub fn predictor(&self, b: usize, k: usize) -> Option<&[f64]> {
        self.predictors.as_ref().map(|p| {
            let start = (b * self.grid.n_steps() + k) * self.dim;
            &p[start..start + self.dim]
        })
    }
}

/// Jointly simulated forward and backward paths.
#[derive(Debug, Clone)]
pub struct TrajectoryBatch {
    pub grid: TimeGrid,
    pub dim: usize,
    pub batch: usize,
    pub states: Vec<f64>,
    pub backward: Vec<f64>,
    pub predictors: Option<Vec<f64>>,
    pub scheme: Scheme,
    pub policy: ResetPolicy,
    pub increments_seed: u64,
}

impl TrajectoryBatch {
    pub fn state(&self, b: usize, k: usize) -> &[f64] {
        let start = (b * (self.grid.n_steps() + 1) + k) * self.dim;
        &self.states[start..start + self.dim]
    }

    pub fn backward_value(&self, b: usize, k: usize) -> f64 {
        self.backward[b * (self.grid.n_steps() + 1) + k]
    }

    pub fn forward_only(&self) -> ForwardPaths {
        ForwardPaths {
            grid: self.grid,
            dim: self.dim,
            batch: self.batch,
            states: self.states.clone(),
            predictors: self.predictors.clone(),
        }
    }
}
