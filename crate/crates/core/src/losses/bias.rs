use rayon::prelude::*;

use crate::error::{CoreError, Result};
use crate::grid::TimeGrid;
use crate::integrators::em_forward;
use crate::model::ModelFamily;
use crate::problem::{gram, PdeProblem};
use crate::rng::GaussianIncrements;

/// Pointwise bias integrand 1/2 Tr[(H(x, t) hess u_theta(x, t))^2], the
/// term the EM one-step loss retains in its tau -> 0 limit. For coupled
/// problems H is evaluated at y = u_theta(x, t).
pub fn bias_integrand(
    problem: &dyn PdeProblem,
    model: &dyn ModelFamily,
    theta: &[f64],
    x: &[f64],
    t: f64,
) -> f64 {
    let d = problem.dim();
    let m = problem.noise_dim();
    let mut g = vec![0.0; d * m];
    let mut hmat = vec![0.0; d * d];
    let mut hess = vec![0.0; d * d];
    let mut prod = vec![0.0; d * d];
    let u = model.value(theta, x, t);
    problem.diffusion(x, t, u, &mut g);
    gram(&g, d, m, &mut hmat);
    model.hess_x(theta, x, t, &mut hess);
    for i in 0..d {
        for j in 0..d {
            let mut v = 0.0;
            for l in 0..d {
                v += hmat[i * d + l] * hess[l * d + j];
            }
            prod[i * d + j] = v;
        }
    }
    let mut tr_sq = 0.0;
    for i in 0..d {
        for j in 0..d {
            tr_sq += prod[i * d + j] * prod[j * d + i];
        }
    }
    0.5 * tr_sq
}

/// Monte-Carlo estimate of the discretization-bias functional
/// (1/2T) int_0^T E Tr[(H(X_t, t) hess u_theta(X_t, t))^2] dt
/// along EM forward paths (left Riemann sum over the grid knots).
pub fn bias_oracle(
    problem: &dyn PdeProblem,
    model: &dyn ModelFamily,
    theta: &[f64],
    grid: TimeGrid,
    n_paths: usize,
    seed: u64,
) -> Result<f64> {
    if problem.is_coupled() {
        return Err(CoreError::Precondition("bias oracle requires an uncoupled problem".into()));
    }
    if n_paths == 0 {
        return Err(CoreError::Precondition("n_paths must be >= 1".into()));
    }
    let d = problem.dim();
    let m = problem.noise_dim();
    let n = grid.n_steps();
    let increments = GaussianIncrements::generate(seed, n_paths, n, m);
    let paths = em_forward(problem, grid, &increments)?;

    // per-path partials collected in batch order, then folded serially so
    // the result is independent of the parallel schedule
    let partials: Vec<f64> = (0..n_paths)
        .into_par_iter()
        .map_init(
            || (vec![0.0; d * m], vec![0.0; d * d], vec![0.0; d * d], vec![0.0; d * d]),
            |(g, hmat, hess, prod), b| {
                let mut acc = 0.0;
                for k in 0..n {
                    let t = grid.knot(k);
                    let x = paths.state(b, k);
                    problem.diffusion(x, t, 0.0, g);
                    gram(g, d, m, hmat);
                    model.hess_x(theta, x, t, hess);
                    // M = H hess; Tr(M^2) = sum_ij M_ij M_ji
                    for i in 0..d {
                        for j in 0..d {
                            let mut v = 0.0;
                            for l in 0..d {
                                v += hmat[i * d + l] * hess[l * d + j];
                            }
                            prod[i * d + j] = v;
                        }
                    }
                    let mut tr_sq = 0.0;
                    for i in 0..d {
                        for j in 0..d {
                            tr_sq += prod[i * d + j] * prod[j * d + i];
                        }
                    }
                    acc += 0.5 * tr_sq;
                }
                acc
            },
        )
        .collect();
    let total: f64 = partials.iter().sum();

    let value = total / (n_paths as f64 * n as f64);
    if !value.is_finite() {
        return Err(CoreError::NonFinite { term: "bias_oracle", t: grid.t_end() });
    }
    Ok(value)
}
