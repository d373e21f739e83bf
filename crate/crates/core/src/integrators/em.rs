use rayon::prelude::*;

use crate::error::{CoreError, Result};
use crate::grid::TimeGrid;
use crate::model::ModelFamily;
use crate::problem::{matvec, PdeProblem};
use crate::rng::GaussianIncrements;
use crate::trajectory::{ForwardPaths, ResetPolicy, Scheme, TrajectoryBatch};

use super::check_finite;

fn check_shapes(problem: &dyn PdeProblem, grid: &TimeGrid, incr: &GaussianIncrements) -> Result<()> {
    if incr.steps() < grid.n_steps() {
        return Err(CoreError::Precondition(format!(
            "increments cover {} steps, grid needs {}",
            incr.steps(),
            grid.n_steps()
        )));
    }
    if incr.channels() != problem.noise_dim() {
        return Err(CoreError::Precondition("increment channels != noise dimension".into()));
    }
    Ok(())
}

/// Euler-Maruyama forward recursion
/// X_{k+1} = X_k + f(X_k, t_k) tau + sqrt(tau) g(X_k, t_k) w_k.
/// Rejects coupled problems: their diffusion reads Y, which a pure forward
/// pass does not carry.
pub fn em_forward(
    problem: &dyn PdeProblem,
    grid: TimeGrid,
    increments: &GaussianIncrements,
) -> Result<ForwardPaths> {
    if problem.is_coupled() {
        return Err(CoreError::Precondition(
            "em_forward does not accept coupled problems; use the joint pipeline".into(),
        ));
    }
    check_shapes(problem, &grid, increments)?;
    let d = problem.dim();
    let m = problem.noise_dim();
    let n = grid.n_steps();
    let batch = increments.batch();
    let tau = grid.tau();
    let sqrt_tau = tau.sqrt();

    let mut states = vec![0.0; batch * (n + 1) * d];
    let result: Result<Vec<()>> = states
        .par_chunks_mut((n + 1) * d)
        .enumerate()
        .map(|(b, path)| {
            path[..d].copy_from_slice(problem.initial_state());
            let mut f = vec![0.0; d];
            let mut g = vec![0.0; d * m];
            let mut gw = vec![0.0; d];
            for k in 0..n {
                let t = grid.knot(k);
                let (head, tail) = path.split_at_mut((k + 1) * d);
                let x = &head[k * d..];
                problem.drift(x, t, &mut f);
                problem.diffusion(x, t, 0.0, &mut g);
                matvec(&g, d, m, increments.w(b, k), &mut gw);
                let x_next = &mut tail[..d];
                for i in 0..d {
                    x_next[i] = x[i] + f[i] * tau + gw[i] * sqrt_tau;
                }
                check_finite(x_next, k + 1, b)?;
            }
            Ok(())
        })
        .collect();
    result?;
    Ok(ForwardPaths { grid, dim: d, batch, states, predictors: None })
}

/// Jointly integrated EM forward-backward recursion. The returned backward
/// path accumulates the policy's increments:
/// reset evaluates h (and, for coupled diffusions, g) at y = u_theta(X_k, t_k),
/// no-reset at the propagated value. Coupled forward dynamics always ride a
/// propagated backward value regardless of policy.
pub fn em_backward(
    problem: &dyn PdeProblem,
    model: &dyn ModelFamily,
    theta: &[f64],
    grid: TimeGrid,
    increments: &GaussianIncrements,
    policy: ResetPolicy,
) -> Result<TrajectoryBatch> {
    check_shapes(problem, &grid, increments)?;
    let d = problem.dim();
    let m = problem.noise_dim();
    let n = grid.n_steps();
    let batch = increments.batch();
    let tau = grid.tau();
    let sqrt_tau = tau.sqrt();

    let mut states = vec![0.0; batch * (n + 1) * d];
    let mut backward = vec![0.0; batch * (n + 1)];
    let result: Result<Vec<()>> = states
        .par_chunks_mut((n + 1) * d)
        .zip(backward.par_chunks_mut(n + 1))
        .enumerate()
        .map(|(b, (path, ys))| {
            path[..d].copy_from_slice(problem.initial_state());
            let y0 = model.value(theta, problem.initial_state(), grid.knot(0));
            ys[0] = y0;
            let mut y_dyn = y0; // drives coupled forward dynamics
            let mut f = vec![0.0; d];
            let mut g = vec![0.0; d * m];
            let mut gw = vec![0.0; d];
            let mut grad = vec![0.0; d];
            for k in 0..n {
                let t = grid.knot(k);
                let (head, tail) = path.split_at_mut((k + 1) * d);
                let x = &head[k * d..];

                model.grad_x(theta, x, t, &mut grad);
                let u_here = model.value(theta, x, t);
                let y_slot = match policy {
                    ResetPolicy::Reset => u_here,
                    ResetPolicy::NoReset => ys[k],
                };

                // backward increment with the policy's y in h and g
                problem.diffusion(x, t, y_slot, &mut g);
                matvec(&g, d, m, increments.w(b, k), &mut gw);
                let h_val = problem.nonlinearity(x, t, y_slot, &grad);
                let diff: f64 = grad.iter().zip(&gw).map(|(a, b)| a * b).sum();
                ys[k + 1] = ys[k] + h_val * tau + diff * sqrt_tau;
                if !ys[k + 1].is_finite() {
                    return Err(CoreError::BlowUp { step: k + 1, path: b });
                }

                // forward update; coupled diffusion sees the propagated value
                if problem.is_coupled() {
                    let h_dyn = problem.nonlinearity(x, t, y_dyn, &grad);
                    problem.diffusion(x, t, y_dyn, &mut g);
                    matvec(&g, d, m, increments.w(b, k), &mut gw);
                    let diff_dyn: f64 = grad.iter().zip(&gw).map(|(a, b)| a * b).sum();
                    problem.drift(x, t, &mut f);
                    let x_next = &mut tail[..d];
                    for i in 0..d {
                        x_next[i] = x[i] + f[i] * tau + gw[i] * sqrt_tau;
                    }
                    y_dyn += h_dyn * tau + diff_dyn * sqrt_tau;
                    check_finite(x_next, k + 1, b)?;
                    if !y_dyn.is_finite() {
                        return Err(CoreError::BlowUp { step: k + 1, path: b });
                    }
                } else {
                    problem.drift(x, t, &mut f);
                    let x_next = &mut tail[..d];
                    for i in 0..d {
                        x_next[i] = x[i] + f[i] * tau + gw[i] * sqrt_tau;
                    }
                    check_finite(x_next, k + 1, b)?;
                }
            }
            Ok(())
        })
        .collect();
    result?;
    Ok(TrajectoryBatch {
        grid,
        dim: d,
        batch,
        states,
        backward,
        predictors: None,
        scheme: Scheme::EulerMaruyama,
        policy,
        increments_seed: increments.seed(),
    })
}
