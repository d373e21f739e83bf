use crate::error::{CoreError, Result};
use crate::grid::TimeGrid;
use crate::model::ModelFamily;
use crate::problem::PdeProblem;
use crate::rng::GaussianIncrements;
use crate::trajectory::Scheme;

use super::simulate_forward;

/// Monte-Carlo strong-error estimate of a scheme against its own refinement
/// on the shared Brownian path:
/// (E[max_k |X_coarse(t_k) - X_fine(t_k)|^2])^(1/2) over the coarse knots.
#[derive(Debug, Clone, Copy)]
pub struct StrongErrorReport {
    pub max_path_error: f64,
    pub n_paths: usize,
    pub tau_coarse: f64,
}

pub fn strong_error(
    problem: &dyn PdeProblem,
    model: Option<(&dyn ModelFamily, &[f64])>,
    scheme: Scheme,
    grid_coarse: TimeGrid,
    refinement_factor: usize,
    n_paths: usize,
    seed: u64,
) -> Result<StrongErrorReport> {
    if refinement_factor < 2 || !refinement_factor.is_power_of_two() {
        return Err(CoreError::Precondition(
            "refinement_factor must be a power of two >= 2".into(),
        ));
    }
    if n_paths == 0 {
        return Err(CoreError::Precondition("n_paths must be >= 1".into()));
    }
    let grid_fine = grid_coarse.refined(refinement_factor)?;
    let m = problem.noise_dim();
    let fine_incr =
        GaussianIncrements::generate(seed, n_paths, grid_fine.n_steps(), m);
    let coarse_incr = fine_incr.coarsen(refinement_factor);

    let fine = simulate_forward(problem, model, grid_fine, &fine_incr, scheme)?;
    let coarse = simulate_forward(problem, model, grid_coarse, &coarse_incr, scheme)?;

    let d = problem.dim();
    let n = grid_coarse.n_steps();
    let mut acc = 0.0;
    for b in 0..n_paths {
        let mut worst = 0.0f64;
        for k in 0..=n {
            let xc = coarse.state(b, k);
            let xf = fine.state(b, k * refinement_factor);
            let err: f64 = xc.iter().zip(xf).map(|(a, c)| (a - c) * (a - c)).sum();
            worst = worst.max(err);
        }
        acc += worst;
        let _ = d;
    }
    Ok(StrongErrorReport {
        max_path_error: (acc / n_paths as f64).sqrt(),
        n_paths,
        tau_coarse: grid_coarse.tau(),
    })
}

/// Least-squares slope of log(err) against log(tau); used by the
/// convergence-order checks.
pub fn log_log_slope(taus: &[f64], errors: &[f64]) -> f64 {
    assert_eq!(taus.len(), errors.len());
    let n = taus.len() as f64;
    let xs: Vec<f64> = taus.iter().map(|v| v.ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|v| v.max(1e-300).ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (x, y) in xs.iter().zip(&ys) {
        num += (x - mx) * (y - my);
        den += (x - mx) * (x - mx);
    }
    num / den
}
