mod em;
mod heun;
mod strong;

pub use em::{em_backward, em_forward};
pub use heun::{heun_augmented, heun_forward};
pub(crate) use heun::{heun_step, AugmentedScratch};
pub use strong::{log_log_slope, strong_error, StrongErrorReport};

use crate::error::Result;
use crate::grid::TimeGrid;
use crate::model::ModelFamily;
use crate::problem::PdeProblem;
use crate::rng::GaussianIncrements;
use crate::trajectory::{ForwardPaths, Scheme};

/// Forward state paths under either scheme. Uncoupled problems need no
/// model; coupled ones ride the joint recursion (dynamics driven by the
/// propagated backward value) and record the state component.
pub fn simulate_forward(
    problem: &dyn PdeProblem,
    model: Option<(&dyn ModelFamily, &[f64])>,
    grid: TimeGrid,
    increments: &GaussianIncrements,
    scheme: Scheme,
) -> Result<ForwardPaths> {
    if problem.is_coupled() {
        let (model, theta) = model.ok_or_else(|| {
            crate::error::CoreError::Precondition(
                "coupled problems need a model to drive the forward dynamics".into(),
            )
        })?;
        let traj = match scheme {
            Scheme::EulerMaruyama => em_backward(
                problem,
                model,
                theta,
                grid,
                increments,
                crate::trajectory::ResetPolicy::NoReset,
            )?,
            Scheme::Heun => heun_augmented(problem, model, theta, grid, increments)?,
        };
        Ok(traj.forward_only())
    } else {
        match scheme {
            Scheme::EulerMaruyama => em_forward(problem, grid, increments),
            Scheme::Heun => heun_forward(problem, grid, increments),
        }
    }
}

pub(crate) fn check_finite(x: &[f64], step: usize, path: usize) -> Result<()> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(crate::error::CoreError::BlowUp { step, path })
    }
}
