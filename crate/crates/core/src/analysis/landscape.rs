use crate::error::{CoreError, Result};
use crate::grid::TimeGrid;
use crate::integrators::simulate_forward;
use crate::losses::selfcons_loss_on_paths;
use crate::model::ModelFamily;
use crate::problem::PdeProblem;
use crate::rng::GaussianIncrements;
use crate::trajectory::Scheme;

/// One point of the loss-landscape sweep.
#[derive(Debug, Clone, Copy)]
pub struct LandscapeRow {
    pub scheme: Scheme,
    pub tau: f64,
    pub theta: f64,
    pub loss: f64,
}

/// Full-horizon one-step loss L_{scheme,tau}(theta) for every theta on the
/// grid and every tau in the list. For uncoupled problems the forward paths
/// are simulated once per tau and shared across the whole theta grid
/// (common random numbers), so the landscape's argmin is not washed out by
/// independent Monte-Carlo noise per point.
pub fn landscape_sweep(
    problem: &dyn PdeProblem,
    model: &dyn ModelFamily,
    theta_grid: &[f64],
    scheme: Scheme,
    tau_list: &[f64],
    n_paths: usize,
    seed: u64,
) -> Result<Vec<LandscapeRow>> {
    if model.param_dim() != 1 {
        return Err(CoreError::Precondition(
            "landscape sweep expects a one-parameter model family".into(),
        ));
    }
    if theta_grid.is_empty() || tau_list.is_empty() {
        return Err(CoreError::Precondition("empty theta grid or tau list".into()));
    }
    let horizon = problem.horizon();
    let mut rows = Vec::with_capacity(theta_grid.len() * tau_list.len());
    for (ti, &tau) in tau_list.iter().enumerate() {
        let n_steps = (horizon / tau).round() as usize;
        if n_steps == 0 || (n_steps as f64 * tau - horizon).abs() > 1e-9 {
            return Err(CoreError::Precondition(format!(
                "tau {tau} does not evenly divide the horizon {horizon}"
            )));
        }
        let grid = TimeGrid::over_horizon(horizon, n_steps)?;
        let incr = GaussianIncrements::generate(
            crate::rng::mix_seed(seed, ti as u64),
            n_paths,
            n_steps,
            problem.noise_dim(),
        );
        if problem.is_coupled() {
            for &theta in theta_grid {
                let th = [theta];
                let paths = simulate_forward(problem, Some((model, &th[..])), grid, &incr, scheme)?;
                let loss = selfcons_loss_on_paths(
                    problem,
                    model,
                    &th,
                    &paths,
                    &incr,
                    scheme,
                    crate::trajectory::ResetPolicy::Reset,
                    1,
                )?;
                rows.push(LandscapeRow { scheme, tau, theta, loss: loss.value });
            }
        } else {
            let paths = simulate_forward(problem, None, grid, &incr, scheme)?;
            for &theta in theta_grid {
                let th = [theta];
                let loss = selfcons_loss_on_paths(
                    problem,
                    model,
                    &th,
                    &paths,
                    &incr,
                    scheme,
                    crate::trajectory::ResetPolicy::Reset,
                    1,
                )?;
                rows.push(LandscapeRow { scheme, tau, theta, loss: loss.value });
            }
        }
    }
    Ok(rows)
}

/// theta of the smallest loss among the rows with the given tau.
pub fn landscape_argmin(rows: &[LandscapeRow], tau: f64) -> Option<f64> {
    rows.iter()
        .filter(|r| r.tau == tau)
        .min_by(|a, b| a.loss.partial_cmp(&b.loss).unwrap())
        .map(|r| r.theta)
}
