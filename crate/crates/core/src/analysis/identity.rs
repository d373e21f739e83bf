use rayon::prelude::*;

use crate::error::Result;
use crate::grid::TimeGrid;
use crate::integrators::simulate_forward;
use crate::losses::selfcons_path_defects;
use crate::model::ModelFamily;
use crate::problem::PdeProblem;
use crate::residual::residual;
use crate::rng::GaussianIncrements;
use crate::trajectory::{ResetPolicy, Scheme};

/// Full-horizon accumulation identity estimates on shared Heun paths:
/// `lhs` is the squared full-span Heun defect / T^2 (the discrete
/// full-horizon loss), `rhs` the squared path quadrature of the residual
/// ((1/T) int R dt)^2, and `fs_pinns` the path quadrature of R^2.
#[derive(Debug, Clone, Copy)]
pub struct IdentityCheck {
    pub lhs: f64,
    pub lhs_se: f64,
    pub rhs: f64,
    pub rhs_se: f64,
    pub fs_pinns: f64,
    pub fs_pinns_se: f64,
}

pub fn bsde_identity_check(
    problem: &dyn PdeProblem,
    model: &dyn ModelFamily,
    theta: &[f64],
    grid: TimeGrid,
    n_paths: usize,
    seed: u64,
) -> Result<IdentityCheck> {
    let n = grid.n_steps();
    let incr = GaussianIncrements::generate(seed, n_paths, n, problem.noise_dim());
    let driver: Option<(&dyn ModelFamily, &[f64])> =
        if problem.is_coupled() { Some((model, theta)) } else { None };
    let paths = simulate_forward(problem, driver, grid, &incr, Scheme::Heun)?;

    // full-horizon defect per path (single segment: skip = N)
    let defects = selfcons_path_defects(
        problem,
        model,
        theta,
        &paths,
        &incr,
        Scheme::Heun,
        ResetPolicy::Reset,
        n,
    )?;

    let quads: Result<Vec<(f64, f64)>> = (0..n_paths)
        .into_par_iter()
        .map(|b| {
            let mut sum_r = 0.0;
            let mut sum_r2 = 0.0;
            for k in 0..n {
                let r = residual(problem, model, theta, paths.state(b, k), grid.knot(k))?;
                sum_r += r;
                sum_r2 += r * r;
            }
            Ok((sum_r / n as f64, sum_r2 / n as f64))
        })
        .collect();
    let quads = quads?;

    let mut lhs_vals = Vec::with_capacity(n_paths);
    let mut rhs_vals = Vec::with_capacity(n_paths);
    let mut fs_vals = Vec::with_capacity(n_paths);
    for b in 0..n_paths {
        let (defect, delta) = defects[b][0];
        lhs_vals.push((defect / delta) * (defect / delta));
        rhs_vals.push(quads[b].0 * quads[b].0);
        fs_vals.push(quads[b].1);
    }
    let (lhs, lhs_se) = mean_se(&lhs_vals);
    let (rhs, rhs_se) = mean_se(&rhs_vals);
    let (fs_pinns, fs_pinns_se) = mean_se(&fs_vals);
    Ok(IdentityCheck { lhs, lhs_se, rhs, rhs_se, fs_pinns, fs_pinns_se })
}

fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, (var / n).sqrt())
}
