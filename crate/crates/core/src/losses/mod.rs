mod bias;
mod boundary;
mod pinns;
mod selfcons;

pub use bias::{bias_integrand, bias_oracle};
pub use boundary::boundary_penalty;
pub use pinns::{fit_spatial_normal, FittedNormal, PinnsSampling};
pub use selfcons::selfcons_loss_on_paths;
pub(crate) use selfcons::selfcons_path_defects;

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::grid::TimeGrid;
use crate::integrators::simulate_forward;
use crate::model::ModelFamily;
use crate::problem::PdeProblem;
use crate::rng::GaussianIncrements;
use crate::trajectory::{ResetPolicy, Scheme};

/// Training objective selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    /// One- or multi-step EM self-consistency, reset at segment starts.
    EmBsde,
    /// EM self-consistency propagating Y through h (no-reset variant).
    EmBsdeNoReset,
    /// One- or multi-step Heun self-consistency (always reset).
    HeunBsde,
    /// Squared PDE residual on points from a fitted spatial normal.
    Pinns,
    /// Squared PDE residual along forward SDE trajectories.
    FsPinns,
}

impl LossKind {
    pub fn is_self_consistency(self) -> bool {
        matches!(self, LossKind::EmBsde | LossKind::EmBsdeNoReset | LossKind::HeunBsde)
    }

    pub fn scheme(self) -> Option<Scheme> {
        match self {
            LossKind::EmBsde | LossKind::EmBsdeNoReset => Some(Scheme::EulerMaruyama),
            LossKind::HeunBsde => Some(Scheme::Heun),
            _ => None,
        }
    }

    pub fn reset_policy(self) -> ResetPolicy {
        match self {
            LossKind::EmBsdeNoReset => ResetPolicy::NoReset,
            _ => ResetPolicy::Reset,
        }
    }
}

/// Which loss to evaluate, at which resolution, on how many paths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossSpec {
    pub kind: LossKind,
    /// Skip length k: each self-consistency defect spans k base steps.
    pub skip: usize,
    pub grid: TimeGrid,
    pub batch: usize,
    /// Weight of the terminal-condition penalty (zeroth- and first-order).
    pub boundary_weight: f64,
    pub seed: u64,
}

impl LossSpec {
    pub fn validate(&self) -> Result<()> {
        if self.skip == 0 || self.skip > self.grid.n_steps() {
            return Err(CoreError::Precondition(format!(
                "skip length {} outside 1..={}",
                self.skip,
                self.grid.n_steps()
            )));
        }
        if self.batch == 0 {
            return Err(CoreError::Precondition("batch must be >= 1".into()));
        }
        if self.boundary_weight < 0.0 {
            return Err(CoreError::Precondition("boundary_weight must be >= 0".into()));
        }
        Ok(())
    }
}

/// Loss value with its analytic parameter gradient and per-segment
/// mean-squared defect diagnostics.
#[derive(Debug, Clone)]
pub struct LossValue {
    pub value: f64,
    pub grad: Vec<f64>,
    pub diagnostics: Vec<f64>,
}

impl LossValue {
    pub fn zero(param_dim: usize) -> Self {
        Self { value: 0.0, grad: vec![0.0; param_dim], diagnostics: Vec::new() }
    }

    pub fn add_scaled(&mut self, other: &LossValue, weight: f64) {
        self.value += weight * other.value;
        for (g, o) in self.grad.iter_mut().zip(&other.grad) {
            *g += weight * o;
        }
    }
}

/// Evaluate the configured training objective at `theta`, including the
/// weighted boundary penalty on the method's own terminal samples.
pub fn evaluate_loss(
    problem: &dyn PdeProblem,
    model: &dyn ModelFamily,
    theta: &[f64],
    spec: &LossSpec,
) -> Result<LossValue> {
    spec.validate()?;
    match spec.kind {
        LossKind::EmBsde | LossKind::EmBsdeNoReset | LossKind::HeunBsde => {
            let scheme = spec.kind.scheme().unwrap();
            let policy = spec.kind.reset_policy();
            let increments = GaussianIncrements::generate(
                spec.seed,
                spec.batch,
                spec.grid.n_steps(),
                problem.noise_dim(),
            );
            let driver = driver_model(problem, model, theta);
            let paths = simulate_forward(
                problem,
                Some((driver.0, driver.1)),
                spec.grid,
                &increments,
                scheme,
            )?;
            let mut out =
                selfcons_loss_on_paths(problem, model, theta, &paths, &increments, scheme, policy, spec.skip)?;
            if spec.boundary_weight > 0.0 {
                let terminal = terminal_samples(&paths);
                let bp = boundary_penalty(problem, model, theta, &terminal, problem.dim())?;
                out.add_scaled(&bp, spec.boundary_weight);
            }
            Ok(out)
        }
        LossKind::Pinns => pinns::pinns_loss(problem, model, theta, spec, PinnsSampling::FittedNormal),
        LossKind::FsPinns => pinns::pinns_loss(problem, model, theta, spec, PinnsSampling::ForwardSde),
    }
}

/// Model that drives coupled forward dynamics during loss evaluation.
/// Uncoupled problems ignore it; coupled ones use the candidate itself
/// (whose forward-path dependence on theta is treated as frozen by the
/// gradient, matching the loss's stop-gradient convention).
fn driver_model<'a>(
    _problem: &dyn PdeProblem,
    model: &'a dyn ModelFamily,
    theta: &'a [f64],
) -> (&'a dyn ModelFamily, &'a [f64]) {
    (model, theta)
}

pub(crate) fn terminal_samples(paths: &crate::trajectory::ForwardPaths) -> Vec<f64> {
    let n = paths.grid.n_steps();
    let d = paths.dim;
    let mut out = vec![0.0; paths.batch * d];
    for b in 0..paths.batch {
        out[b * d..(b + 1) * d].copy_from_slice(paths.state(b, n));
    }
    out
}
