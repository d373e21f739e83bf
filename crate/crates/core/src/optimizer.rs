use std::time::Instant;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::losses::{evaluate_loss, LossSpec};
use crate::model::ModelFamily;
use crate::problem::PdeProblem;
use crate::rng::{mix_seed, path_rng};

/// Adam with bias correction and a piecewise-constant learning-rate
/// schedule: entry (threshold, rate) applies while iteration < threshold;
/// past the last threshold the last rate holds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub schedule: Vec<(u64, f64)>,
    pub total_iters: u64,
    pub seed: u64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            schedule: vec![(10_000, 1e-3), (15_000, 1e-4), (20_000, 1e-5)],
            total_iters: 20_000,
            seed: 0,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        if self.schedule.is_empty() {
            return Err(CoreError::Precondition("schedule must not be empty".into()));
        }
        let mut prev = 0u64;
        for (i, (threshold, rate)) in self.schedule.iter().enumerate() {
            if *rate <= 0.0 {
                return Err(CoreError::Precondition("learning rates must be positive".into()));
            }
            if i > 0 && *threshold <= prev {
                return Err(CoreError::Precondition(
                    "schedule thresholds must be strictly increasing".into(),
                ));
            }
            prev = *threshold;
        }
        Ok(())
    }

    pub fn learning_rate(&self, iter: u64) -> f64 {
        for (threshold, rate) in &self.schedule {
            if iter < *threshold {
                return *rate;
            }
        }
        self.schedule.last().unwrap().1
    }
}

/// Adam state: first and second moment estimates with bias correction.
#[derive(Debug, Clone)]
pub struct Adam {
    cfg: AdamConfig,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    pub fn new(cfg: AdamConfig, param_dim: usize) -> Self {
        Self { cfg, m: vec![0.0; param_dim], v: vec![0.0; param_dim] }
    }

    /// One update of `theta` from `grad` at iteration `iter` (0-based).
    pub fn step(&mut self, theta: &mut [f64], grad: &[f64], iter: u64) {
        let lr = self.cfg.learning_rate(iter);
        let t = (iter + 1) as i32;
        let bc1 = 1.0 - self.cfg.beta1.powi(t);
        let bc2 = 1.0 - self.cfg.beta2.powi(t);
        for q in 0..theta.len() {
            let g = grad[q];
            self.m[q] = self.cfg.beta1 * self.m[q] + (1.0 - self.cfg.beta1) * g;
            self.v[q] = self.cfg.beta2 * self.v[q] + (1.0 - self.cfg.beta2) * g * g;
            let m_hat = self.m[q] / bc1;
            let v_hat = self.v[q] / bc2;
            theta[q] -= lr * m_hat / (v_hat.sqrt() + self.cfg.epsilon);
        }
    }
}

/// Record of one training run.
#[derive(Debug, Clone)]
pub struct TrainingTrace {
    pub losses: Vec<f64>,
    pub learning_rates: Vec<f64>,
    pub snapshots: Vec<(u64, f64)>,
    pub final_theta: Vec<f64>,
    pub wall_clock_secs: f64,
    pub abort_reason: Option<String>,
}

impl TrainingTrace {
    pub fn final_loss(&self) -> Option<f64> {
        self.losses.last().copied()
    }
}

/// Initial parameters theta_0 ~ N(0, 0.1^2), seeded.
pub fn init_theta(param_dim: usize, seed: u64) -> Vec<f64> {
    let mut rng = path_rng(mix_seed(seed, 0x7468_6574), 0);
    (0..param_dim).map(|_| 0.1 * rng.sample::<f64, _>(StandardNormal)).collect()
}

/// Train `model` parameters against the configured loss. Each iteration
/// draws fresh Gaussian increments from (spec.seed, iteration). A loss
/// blow-up aborts and returns the trace accumulated so far with the reason
/// recorded.
pub fn train(
    problem: &dyn PdeProblem,
    model: &dyn ModelFamily,
    theta0: &[f64],
    loss_spec: &LossSpec,
    adam: &AdamConfig,
    mut snapshot: Option<(u64, &mut dyn FnMut(&[f64]) -> Result<f64>)>,
) -> Result<TrainingTrace> {
    adam.validate()?;
    loss_spec.validate()?;
    let p = model.param_dim();
    if theta0.len() != p {
        return Err(CoreError::Precondition("theta0 length != param_dim".into()));
    }

    let start = Instant::now();
    let mut theta = theta0.to_vec();
    let mut adam_state = Adam::new(adam.clone(), p);
    let mut trace = TrainingTrace {
        losses: Vec::with_capacity(adam.total_iters as usize),
        learning_rates: Vec::with_capacity(adam.total_iters as usize),
        snapshots: Vec::new(),
        final_theta: theta.clone(),
        wall_clock_secs: 0.0,
        abort_reason: None,
    };

    for iter in 0..adam.total_iters {
        let mut spec = *loss_spec;
        spec.seed = mix_seed(loss_spec.seed, iter);
        let loss = match evaluate_loss(problem, model, &theta, &spec) {
            Ok(l) => l,
            Err(e) => {
                trace.abort_reason = Some(e.to_string());
                trace.final_theta = theta;
                trace.wall_clock_secs = start.elapsed().as_secs_f64();
                return Ok(trace);
            }
        };
        let lr = adam.learning_rate(iter);
        trace.losses.push(loss.value);
        trace.learning_rates.push(lr);

        adam_state.step(&mut theta, &loss.grad, iter);
        if theta.iter().any(|x| !x.is_finite()) {
            trace.abort_reason = Some(format!("parameters non-finite at iteration {iter}"));
            trace.final_theta = theta;
            trace.wall_clock_secs = start.elapsed().as_secs_f64();
            return Ok(trace);
        }

        if let Some((every, callback)) = snapshot.as_mut() {
            if *every > 0 && (iter + 1) % *every == 0 {
                let metric = callback(&theta)?;
                trace.snapshots.push((iter + 1, metric));
            }
        }
    }

    trace.final_theta = theta;
    trace.wall_clock_secs = start.elapsed().as_secs_f64();
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_lookup() {
        let cfg = AdamConfig::default();
        assert_eq!(cfg.learning_rate(0), 1e-3);
        assert_eq!(cfg.learning_rate(9_999), 1e-3);
        assert_eq!(cfg.learning_rate(10_000), 1e-4);
        assert_eq!(cfg.learning_rate(14_999), 1e-4);
        assert_eq!(cfg.learning_rate(15_000), 1e-5);
        assert_eq!(cfg.learning_rate(99_999), 1e-5);
    }

    #[test]
    fn schedule_validation() {
        let mut cfg = AdamConfig::default();
        cfg.schedule = vec![(10, 1e-3), (10, 1e-4)];
        assert!(cfg.validate().is_err());
        cfg.schedule = vec![(10, -1.0)];
        assert!(cfg.validate().is_err());
        cfg.schedule = vec![(10, 1e-3), (20, 1e-4)];
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn init_theta_deterministic() {
        assert_eq!(init_theta(8, 3), init_theta(8, 3));
        assert_ne!(init_theta(8, 3), init_theta(8, 4));
    }

    #[test]
    fn adam_solves_scalar_quadratic() {
        // L(theta) = (theta - 3)^2 with lr 1e-1 for 1000 iterations
        let cfg = AdamConfig {
            schedule: vec![(1000, 1e-1)],
            total_iters: 1000,
            ..AdamConfig::default()
        };
        let mut adam = Adam::new(cfg, 1);
        let mut theta = [0.0];
        for iter in 0..1000 {
            let grad = [2.0 * (theta[0] - 3.0)];
            adam.step(&mut theta, &grad, iter);
        }
        assert!((theta[0] - 3.0).abs() <= 1e-3, "theta = {}", theta[0]);
    }

    #[test]
    fn zero_gradient_leaves_theta_unchanged() {
        let mut adam = Adam::new(AdamConfig::default(), 3);
        let mut theta = [0.7, -1.1, 0.0];
        let before = theta;
        for iter in 0..50 {
            adam.step(&mut theta, &[0.0, 0.0, 0.0], iter);
        }
        assert_eq!(theta, before);
    }
}
