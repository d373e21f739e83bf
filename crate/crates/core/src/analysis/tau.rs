use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{CoreError, Result};
use crate::integrators::{heun_step, AugmentedScratch};
use crate::losses::bias_integrand;
use crate::model::ModelFamily;
use crate::problem::{matvec, PdeProblem};
use crate::residual::residual;
use crate::rng::path_rng;
use crate::trajectory::Scheme;

/// One row of the step-size scaling study at a fixed (x, t).
#[derive(Debug, Clone, Copy)]
pub struct TauScalingRow {
    pub tau: f64,
    pub value: f64,
    pub std_error: f64,
    /// R[u_theta]^2 at the start point: the Heun limit.
    pub analytic_residual_sq: f64,
    /// R^2 + 1/2 Tr[(H hess u)^2]: the EM limit.
    pub analytic_em_limit: f64,
}

/// tau^-2-normalized one-step self-consistency loss at a fixed point,
/// estimated over `n_mc` independent Gaussian increments.
/// Returns (mean, standard error).
#[allow(clippy::too_many_arguments)]
pub fn onestep_point_loss(
    problem: &dyn PdeProblem,
    model: &dyn ModelFamily,
    theta: &[f64],
    x: &[f64],
    t: f64,
    tau: f64,
    scheme: Scheme,
    n_mc: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if n_mc == 0 {
        return Err(CoreError::Precondition("n_mc must be >= 1".into()));
    }
    if tau <= 0.0 || t + tau > problem.horizon() + 1e-12 {
        return Err(CoreError::Precondition("tau must be positive with t + tau <= T".into()));
    }
    let d = problem.dim();
    let m = problem.noise_dim();
    let sqrt_tau = tau.sqrt();
    let inv_tau_sq = 1.0 / (tau * tau);
    let t1 = t + tau;

    let chunk = 4096usize;
    let n_chunks = n_mc.div_ceil(chunk);
    let partials: Result<Vec<(f64, f64)>> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = path_rng(seed, c as u64);
            let lo = c * chunk;
            let hi = (lo + chunk).min(n_mc);
            let mut w = vec![0.0; m];
            let mut acc = 0.0;
            let mut acc_sq = 0.0;
            match scheme {
                Scheme::EulerMaruyama => {
                    let mut f = vec![0.0; d];
                    let mut g = vec![0.0; d * m];
                    let mut gw = vec![0.0; d];
                    let mut z = vec![0.0; d];
                    let mut xn = vec![0.0; d];
                    let u0 = model.value(theta, x, t);
                    model.grad_x(theta, x, t, &mut z);
                    problem.drift(x, t, &mut f);
                    problem.diffusion(x, t, u0, &mut g);
                    let h0 = problem.nonlinearity(x, t, u0, &z);
                    for _ in lo..hi {
                        for v in w.iter_mut() {
                            *v = rng.sample(StandardNormal);
                        }
                        matvec(&g, d, m, &w, &mut gw);
                        for i in 0..d {
                            xn[i] = x[i] + f[i] * tau + gw[i] * sqrt_tau;
                        }
                        let zgw: f64 = z.iter().zip(&gw).map(|(a, b)| a * b).sum();
                        let defect =
                            model.value(theta, &xn, t1) - u0 - h0 * tau - zgw * sqrt_tau;
                        let v = defect * defect * inv_tau_sq;
                        acc += v;
                        acc_sq += v * v;
                    }
                }
                Scheme::Heun => {
                    let mut scratch = AugmentedScratch::new(d, m);
                    let y0 = model.value(theta, x, t);
                    for _ in lo..hi {
                        for v in w.iter_mut() {
                            *v = rng.sample(StandardNormal);
                        }
                        let (y_next, _) = heun_step(
                            problem, model, theta, x, y0, t, t1, tau, sqrt_tau, &w,
                            &mut scratch,
                        );
                        let defect = model.value(theta, &scratch.x_next, t1) - y_next;
                        let v = defect * defect * inv_tau_sq;
                        acc += v;
                        acc_sq += v * v;
                    }
                }
            }
            if !(acc.is_finite() && acc_sq.is_finite()) {
                return Err(CoreError::NonFinite { term: "onestep_point_loss", t });
            }
            Ok((acc, acc_sq))
        })
        .collect();
    let partials = partials?;
    let (sum, sum_sq) = partials.iter().fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    let n = n_mc as f64;
    let mean = sum / n;
    let var = (sum_sq / n - mean * mean).max(0.0);
    Ok((mean, (var / n).sqrt()))
}

/// Step-size scaling rows of the normalized one-step loss at (x, t),
/// alongside the analytic limits R^2 (Heun) and R^2 + bias (EM).
#[allow(clippy::too_many_arguments)]
pub fn tau_scaling_study(
    problem: &dyn PdeProblem,
    model: &dyn ModelFamily,
    theta: &[f64],
    scheme: Scheme,
    tau_list: &[f64],
    n_mc: usize,
    seed: u64,
    x: &[f64],
    t: f64,
) -> Result<Vec<TauScalingRow>> {
    let r = residual(problem, model, theta, x, t)?;
    let half_tr = bias_integrand(problem, model, theta, x, t);
    let r_sq = r * r;
    let mut rows = Vec::with_capacity(tau_list.len());
    for (i, &tau) in tau_list.iter().enumerate() {
        let (value, std_error) = onestep_point_loss(
            problem,
            model,
            theta,
            x,
            t,
            tau,
            scheme,
            n_mc,
            crate::rng::mix_seed(seed, i as u64),
        )?;
        rows.push(TauScalingRow {
            tau,
            value,
            std_error,
            analytic_residual_sq: r_sq,
            analytic_em_limit: r_sq + half_tr,
        });
    }
    Ok(rows)
}
