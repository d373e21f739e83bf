use rayon::prelude::*;

use crate::error::{CoreError, Result};
use crate::grid::TimeGrid;
use crate::model::ModelFamily;
use crate::problem::{gram, matvec, trace_product, PdeProblem};
use crate::rng::GaussianIncrements;
use crate::trajectory::{ForwardPaths, ResetPolicy, Scheme, TrajectoryBatch};

use super::check_finite;

/// Stochastic Heun (predictor-corrector) recursion for the forward state of
/// an uncoupled problem; converges to the Stratonovich solution.
pub fn heun_forward(
    problem: &dyn PdeProblem,
    grid: TimeGrid,
    increments: &GaussianIncrements,
) -> Result<ForwardPaths> {
    if problem.is_coupled() {
        return Err(CoreError::Precondition(
            "heun_forward does not accept coupled problems; use heun_augmented".into(),
        ));
    }
    let d = problem.dim();
    let m = problem.noise_dim();
    let n = grid.n_steps();
    let batch = increments.batch();
    if increments.steps() < n || increments.channels() != m {
        return Err(CoreError::Precondition("increments incompatible with grid".into()));
    }
    let tau = grid.tau();
    let sqrt_tau = tau.sqrt();

    let mut states = vec![0.0; batch * (n + 1) * d];
    let mut predictors = vec![0.0; batch * n * d];
    let result: Result<Vec<()>> = states
        .par_chunks_mut((n + 1) * d)
        .zip(predictors.par_chunks_mut(n * d))
        .enumerate()
        .map(|(b, (path, preds))| {
            path[..d].copy_from_slice(problem.initial_state());
            let mut f0 = vec![0.0; d];
            let mut f1 = vec![0.0; d];
            let mut g = vec![0.0; d * m];
            let mut gw0 = vec![0.0; d];
            let mut gw1 = vec![0.0; d];
            for k in 0..n {
                let t = grid.knot(k);
                let t1 = grid.knot(k + 1);
                let w = increments.w(b, k);
                let (head, tail) = path.split_at_mut((k + 1) * d);
                let x = &head[k * d..];
                let pred = &mut preds[k * d..(k + 1) * d];

                problem.drift(x, t, &mut f0);
                problem.diffusion(x, t, 0.0, &mut g);
                matvec(&g, d, m, w, &mut gw0);
                for i in 0..d {
                    pred[i] = x[i] + f0[i] * tau + gw0[i] * sqrt_tau;
                }
                problem.drift(pred, t1, &mut f1);
                problem.diffusion(pred, t1, 0.0, &mut g);
                matvec(&g, d, m, w, &mut gw1);

                let x_next = &mut tail[..d];
                for i in 0..d {
                    x_next[i] =
                        x[i] + 0.5 * (f0[i] + f1[i]) * tau + 0.5 * (gw0[i] + gw1[i]) * sqrt_tau;
                }
                check_finite(x_next, k + 1, b)?;
            }
            Ok(())
        })
        .collect();
    result?;
    Ok(ForwardPaths { grid, dim: d, batch, states, predictors: Some(predictors) })
}

/// Stochastic Heun recursion on the augmented state Z = (X, Y): the drift of
/// the Y component is h_theta - 1/2 Tr(H hess u_theta) and its diffusion row
/// is grad u_theta^T g, with the nonlinearity always evaluated at
/// y = u_theta(x, t) and coupled diffusions reading the augmented Y.
pub fn heun_augmented(
    problem: &dyn PdeProblem,
    model: &dyn ModelFamily,
    theta: &[f64],
    grid: TimeGrid,
    increments: &GaussianIncrements,
) -> Result<TrajectoryBatch> {
    let d = problem.dim();
    let m = problem.noise_dim();
    let n = grid.n_steps();
    let batch = increments.batch();
    if increments.steps() < n || increments.channels() != m {
        return Err(CoreError::Precondition("increments incompatible with grid".into()));
    }
    let tau = grid.tau();
    let sqrt_tau = tau.sqrt();

    let mut states = vec![0.0; batch * (n + 1) * d];
    let mut backward = vec![0.0; batch * (n + 1)];
    let mut predictors = vec![0.0; batch * n * d];
    let result: Result<Vec<()>> = states
        .par_chunks_mut((n + 1) * d)
        .zip(backward.par_chunks_mut(n + 1))
        .zip(predictors.par_chunks_mut(n * d))
        .enumerate()
        .map(|(b, ((path, ys), preds))| {
            path[..d].copy_from_slice(problem.initial_state());
            ys[0] = model.value(theta, problem.initial_state(), grid.knot(0));
            let mut scratch = AugmentedScratch::new(d, m);
            for k in 0..n {
                let t = grid.knot(k);
                let t1 = grid.knot(k + 1);
                let w = increments.w(b, k);
                let (head, tail) = path.split_at_mut((k + 1) * d);
                let x = &head[k * d..];

                let (y_next, _y_pred) =
                    heun_step(problem, model, theta, x, ys[k], t, t1, tau, sqrt_tau, w, &mut scratch);
                let x_next = &mut tail[..d];
                x_next.copy_from_slice(&scratch.x_next);
                preds[k * d..(k + 1) * d].copy_from_slice(&scratch.x_pred);
                ys[k + 1] = y_next;
                check_finite(x_next, k + 1, b)?;
                if !ys[k + 1].is_finite() {
                    return Err(CoreError::BlowUp { step: k + 1, path: b });
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
        predictors: Some(predictors),
        scheme: Scheme::Heun,
        policy: ResetPolicy::Reset,
        increments_seed: increments.seed(),
    })
}

pub(crate) struct AugmentedScratch {
    pub f0: Vec<f64>,
    pub f1: Vec<f64>,
    pub g: Vec<f64>,
    pub gw0: Vec<f64>,
    pub gw1: Vec<f64>,
    pub grad: Vec<f64>,
    pub hess: Vec<f64>,
    pub h_mat: Vec<f64>,
    pub x_pred: Vec<f64>,
    pub x_next: Vec<f64>,
}

impl AugmentedScratch {
    pub fn new(d: usize, m: usize) -> Self {
        Self {
            f0: vec![0.0; d],
            f1: vec![0.0; d],
            g: vec![0.0; d * m],
            gw0: vec![0.0; d],
            gw1: vec![0.0; d],
            grad: vec![0.0; d],
            hess: vec![0.0; d * d],
            h_mat: vec![0.0; d * d],
            x_pred: vec![0.0; d],
            x_next: vec![0.0; d],
        }
    }
}

/// One augmented Heun step from (x, y) at time t, writing the corrector and
/// predictor states into the scratch buffers and returning
/// (y_next, y_pred). Shared by the integrator and the one-step loss
/// pipelines so trajectory and loss arithmetic agree bit for bit.
#[allow(clippy::too_many_arguments)]
pub(crate) fn heun_step(
    problem: &dyn PdeProblem,
    model: &dyn ModelFamily,
    theta: &[f64],
    x: &[f64],
    y: f64,
    t: f64,
    t1: f64,
    tau: f64,
    sqrt_tau: f64,
    w: &[f64],
    s: &mut AugmentedScratch,
) -> (f64, f64) {
    let d = problem.dim();
    let m = problem.noise_dim();

    // F, G at the current state
    problem.drift(x, t, &mut s.f0);
    problem.diffusion(x, t, y, &mut s.g);
    matvec(&s.g, d, m, w, &mut s.gw0);
    model.grad_x(theta, x, t, &mut s.grad);
    model.hess_x(theta, x, t, &mut s.hess);
    gram(&s.g, d, m, &mut s.h_mat);
    let u_here = model.value(theta, x, t);
    let h0 = problem.nonlinearity(x, t, u_here, &s.grad);
    let fy0 = h0 - 0.5 * trace_product(&s.h_mat, &s.hess);
    let mut gyw0 = 0.0;
    for i in 0..d {
        gyw0 += s.grad[i] * s.gw0[i];
    }

    // predictor
    for i in 0..d {
        s.x_pred[i] = x[i] + s.f0[i] * tau + s.gw0[i] * sqrt_tau;
    }
    let y_pred = y + fy0 * tau + gyw0 * sqrt_tau;

    // F, G at the predicted state
    problem.drift(&s.x_pred, t1, &mut s.f1);
    problem.diffusion(&s.x_pred, t1, y_pred, &mut s.g);
    matvec(&s.g, d, m, w, &mut s.gw1);
    model.grad_x(theta, &s.x_pred, t1, &mut s.grad);
    model.hess_x(theta, &s.x_pred, t1, &mut s.hess);
    gram(&s.g, d, m, &mut s.h_mat);
    let u_pred = model.value(theta, &s.x_pred, t1);
    let h1 = problem.nonlinearity(&s.x_pred, t1, u_pred, &s.grad);
    let fy1 = h1 - 0.5 * trace_product(&s.h_mat, &s.hess);
    let mut gyw1 = 0.0;
    for i in 0..d {
        gyw1 += s.grad[i] * s.gw1[i];
    }

    // corrector
    for i in 0..d {
        s.x_next[i] =
            x[i] + 0.5 * (s.f0[i] + s.f1[i]) * tau + 0.5 * (s.gw0[i] + s.gw1[i]) * sqrt_tau;
    }
    let y_next = y + 0.5 * (fy0 + fy1) * tau + 0.5 * (gyw0 + gyw1) * sqrt_tau;

    (y_next, y_pred)
}
