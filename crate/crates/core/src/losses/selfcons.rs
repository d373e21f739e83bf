use rayon::prelude::*;

use crate::error::{CoreError, Result};
use crate::grid::TimeGrid;
use crate::model::ModelFamily;
use crate::problem::{gram, matvec, trace_product, PdeProblem};
use crate::rng::GaussianIncrements;
use crate::trajectory::{ForwardPaths, ResetPolicy, Scheme};

use super::LossValue;

/// Self-consistency loss over pre-simulated forward paths: squared k-step
/// defects u(X_f, t_f) - u(X_s, t_s) - sum of backward increments,
/// normalized by (t_f - t_s)^2, averaged over all segment starts i*k and
/// the batch. The gradient is the exact derivative of this function of
/// theta at frozen paths; for uncoupled problems the paths do not depend on
/// theta, so it is the full loss gradient.
#[allow(clippy::too_many_arguments)]
pub fn selfcons_loss_on_paths(
    problem: &dyn PdeProblem,
    model: &dyn ModelFamily,
    theta: &[f64],
    paths: &ForwardPaths,
    increments: &GaussianIncrements,
    scheme: Scheme,
    policy: ResetPolicy,
    skip: usize,
) -> Result<LossValue> {
    let grid = paths.grid;
    let n = grid.n_steps();
    if skip == 0 || skip > n {
        return Err(CoreError::Precondition(format!("skip {skip} outside 1..={n}")));
    }
    if increments.batch() < paths.batch || increments.steps() < n {
        return Err(CoreError::Precondition("increments smaller than path batch".into()));
    }
    let p = model.param_dim();
    let n_seg = (n - 1) / skip + 1;

    let partials: Result<Vec<PathPartial>> = (0..paths.batch)
        .into_par_iter()
        .map_init(
            || Scratch::new(problem.dim(), problem.noise_dim(), p),
            |s, b| path_contribution(problem, model, theta, paths, increments, scheme, policy, skip, b, s),
        )
        .collect();
    let partials = partials?;

    let mut value = 0.0;
    let mut grad = vec![0.0; p];
    let mut diagnostics = vec![0.0; n_seg];
    for part in &partials {
        value += part.loss;
        for (g, v) in grad.iter_mut().zip(&part.grad) {
            *g += v;
        }
        for (d, v) in diagnostics.iter_mut().zip(&part.diag) {
            *d += v;
        }
    }
    let scale = 1.0 / (n_seg as f64 * paths.batch as f64);
    value *= scale;
    for g in grad.iter_mut() {
        *g *= scale;
    }
    for d in diagnostics.iter_mut() {
        *d /= paths.batch as f64;
    }
    if !value.is_finite() {
        return Err(CoreError::NonFinite { term: "self_consistency_loss", t: grid.t_end() });
    }
    Ok(LossValue { value, grad, diagnostics })
}

/// Per-path, per-segment raw defects (u-difference minus increment sum) and
/// the segment spans, for estimators that need path-level statistics rather
/// than the averaged loss.
#[allow(clippy::too_many_arguments)]
pub(crate) fn selfcons_path_defects(
    problem: &dyn PdeProblem,
    model: &dyn ModelFamily,
    theta: &[f64],
    paths: &ForwardPaths,
    increments: &GaussianIncrements,
    scheme: Scheme,
    policy: ResetPolicy,
    skip: usize,
) -> Result<Vec<Vec<(f64, f64)>>> {
    let grid = paths.grid;
    let n = grid.n_steps();
    if skip == 0 || skip > n {
        return Err(CoreError::Precondition(format!("skip {skip} outside 1..={n}")));
    }
    let p = model.param_dim();
    (0..paths.batch)
        .into_par_iter()
        .map_init(
            || Scratch::new(problem.dim(), problem.noise_dim(), p),
            |s, b| {
                let tau = grid.tau();
                let sqrt_tau = tau.sqrt();
                let x0 = paths.state(b, 0);
                let mut y_ctx = model.value(theta, x0, grid.knot(0));
                model.value_dtheta(theta, x0, grid.knot(0), &mut s.jy);
                let mut out = Vec::with_capacity((n - 1) / skip + 1);
                for seg_start in (0..n).step_by(skip) {
                    let seg_end = (seg_start + skip).min(n);
                    let t_s = grid.knot(seg_start);
                    let t_e = grid.knot(seg_end);
                    let x_s = paths.state(b, seg_start);
                    let x_e = paths.state(b, seg_end);
                    if scheme == Scheme::Heun || policy == ResetPolicy::Reset {
                        y_ctx = model.value(theta, x_s, t_s);
                        model.value_dtheta(theta, x_s, t_s, &mut s.jy);
                    }
                    let mut incr_sum = 0.0;
                    for k in seg_start..seg_end {
                        let t = grid.knot(k);
                        let t1 = grid.knot(k + 1);
                        let x = paths.state(b, k);
                        let w = increments.w(b, k);
                        let incr = match scheme {
                            Scheme::EulerMaruyama => {
                                em_increment(problem, model, theta, x, t, w, tau, sqrt_tau, y_ctx, s)
                            }
                            Scheme::Heun => {
                                let x_pred = paths.predictor(b, k).ok_or_else(|| {
                                    CoreError::Precondition(
                                        "Heun loss needs paths simulated with the Heun scheme"
                                            .into(),
                                    )
                                })?;
                                heun_increment(
                                    problem, model, theta, x, x_pred, t, t1, w, tau, sqrt_tau,
                                    y_ctx, s,
                                )
                            }
                        };
                        if !incr.is_finite() {
                            return Err(CoreError::BlowUp { step: k + 1, path: b });
                        }
                        y_ctx += incr;
                        incr_sum += incr;
                        for q in 0..p {
                            s.jy[q] += s.jincr[q];
                        }
                    }
                    let defect = model.value(theta, x_e, t_e)
                        - model.value(theta, x_s, t_s)
                        - incr_sum;
                    out.push((defect, t_e - t_s));
                }
                Ok(out)
            },
        )
        .collect()
}

struct PathPartial {
    loss: f64,
    grad: Vec<f64>,
    diag: Vec<f64>,
}

struct Scratch {
    // spatial buffers
    z: Vec<f64>,
    z1: Vec<f64>,
    hess: Vec<f64>,
    hmat: Vec<f64>,
    g: Vec<f64>,
    gw: Vec<f64>,
    gw1: Vec<f64>,
    hz: Vec<f64>,
    dgdy: Vec<f64>,
    dgdyw: Vec<f64>,
    // parameter buffers
    dgd_h: Vec<f64>,
    dgd_g: Vec<f64>,
    du_a: Vec<f64>,
    du_b: Vec<f64>,
    dtr: Vec<f64>,
    jy: Vec<f64>,
    jpred: Vec<f64>,
    jincr: Vec<f64>,
    jsum: Vec<f64>,
    dfy0: Vec<f64>,
    dgyw0: Vec<f64>,
    du_seg: Vec<f64>,
}

impl Scratch {
    fn new(d: usize, m: usize, p: usize) -> Self {
        Self {
            z: vec![0.0; d],
            z1: vec![0.0; d],
            hess: vec![0.0; d * d],
            hmat: vec![0.0; d * d],
            g: vec![0.0; d * m],
            gw: vec![0.0; d],
            gw1: vec![0.0; d],
            hz: vec![0.0; d],
            dgdy: vec![0.0; d * m],
            dgdyw: vec![0.0; d],
            dgd_h: vec![0.0; p],
            dgd_g: vec![0.0; p],
            du_a: vec![0.0; p],
            du_b: vec![0.0; p],
            dtr: vec![0.0; p],
            jy: vec![0.0; p],
            jpred: vec![0.0; p],
            jincr: vec![0.0; p],
            jsum: vec![0.0; p],
            dfy0: vec![0.0; p],
            dgyw0: vec![0.0; p],
            du_seg: vec![0.0; p],
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// d/dy Tr(g(y) g(y)^T hess) = 2 sum_ij (dg g^T)_ij hess_ij for symmetric hess.
fn gram_dy_trace(g: &[f64], dgdy: &[f64], hess: &[f64], d: usize, m: usize) -> f64 {
    let mut acc = 0.0;
    for i in 0..d {
        for j in 0..d {
            let mut cross = 0.0;
            for c in 0..m {
                cross += dgdy[i * m + c] * g[j * m + c];
            }
            acc += cross * hess[i * d + j];
        }
    }
    2.0 * acc
}

#[allow(clippy::too_many_arguments)]
fn path_contribution(
    problem: &dyn PdeProblem,
    model: &dyn ModelFamily,
    theta: &[f64],
    paths: &ForwardPaths,
    increments: &GaussianIncrements,
    scheme: Scheme,
    policy: ResetPolicy,
    skip: usize,
    b: usize,
    s: &mut Scratch,
) -> Result<PathPartial> {
    let grid: TimeGrid = paths.grid;
    let n = grid.n_steps();
    let p = model.param_dim();
    let tau = grid.tau();
    let sqrt_tau = tau.sqrt();
    let n_seg = (n - 1) / skip + 1;

    let mut loss = 0.0;
    let mut grad = vec![0.0; p];
    let mut diag = vec![0.0; n_seg];

    // running backward context; overwritten at segment starts unless the EM
    // no-reset policy is in force
    let x0 = paths.state(b, 0);
    let mut y_ctx = model.value(theta, x0, grid.knot(0));
    model.value_dtheta(theta, x0, grid.knot(0), &mut s.jy);

    for (seg_idx, seg_start) in (0..n).step_by(skip).enumerate() {
        let seg_end = (seg_start + skip).min(n);
        let t_s = grid.knot(seg_start);
        let t_e = grid.knot(seg_end);
        let x_s = paths.state(b, seg_start);
        let x_e = paths.state(b, seg_end);

        let resets = scheme == Scheme::Heun || policy == ResetPolicy::Reset;
        if resets {
            y_ctx = model.value(theta, x_s, t_s);
            model.value_dtheta(theta, x_s, t_s, &mut s.jy);
        }

        let mut incr_sum = 0.0;
        s.jsum.fill(0.0);
        for k in seg_start..seg_end {
            let t = grid.knot(k);
            let t1 = grid.knot(k + 1);
            let x = paths.state(b, k);
            let w = increments.w(b, k);
            let incr = match scheme {
                Scheme::EulerMaruyama => {
                    em_increment(problem, model, theta, x, t, w, tau, sqrt_tau, y_ctx, s)
                }
                Scheme::Heun => {
                    let x_pred = paths.predictor(b, k).ok_or_else(|| {
                        CoreError::Precondition(
                            "Heun loss needs paths simulated with the Heun scheme".into(),
                        )
                    })?;
                    heun_increment(
                        problem, model, theta, x, x_pred, t, t1, w, tau, sqrt_tau, y_ctx, s,
                    )
                }
            };
            if !incr.is_finite() {
                return Err(CoreError::BlowUp { step: k + 1, path: b });
            }
            y_ctx += incr;
            incr_sum += incr;
            for q in 0..p {
                s.jy[q] += s.jincr[q];
                s.jsum[q] += s.jincr[q];
            }
        }

        let u_e = model.value(theta, x_e, t_e);
        let u_s = model.value(theta, x_s, t_s);
        let defect = u_e - u_s - incr_sum;
        let delta = t_e - t_s;
        let inv_delta_sq = 1.0 / (delta * delta);
        let contrib = defect * defect * inv_delta_sq;
        loss += contrib;
        diag[seg_idx] = contrib;

        model.value_dtheta(theta, x_e, t_e, &mut s.du_a);
        model.value_dtheta(theta, x_s, t_s, &mut s.du_seg);
        let w2 = 2.0 * defect * inv_delta_sq;
        for q in 0..p {
            grad[q] += w2 * (s.du_a[q] - s.du_seg[q] - s.jsum[q]);
        }
    }
    Ok(PathPartial { loss, grad, diag })
}

/// EM backward increment h tau + sqrt(tau) z^T g w, with h (and, for coupled
/// diffusions, g) evaluated at the active backward context, plus its exact
/// theta-derivative through u, grad u, and the context jacobian.
#[allow(clippy::too_many_arguments)]
fn em_increment(
    problem: &dyn PdeProblem,
    model: &dyn ModelFamily,
    theta: &[f64],
    x: &[f64],
    t: f64,
    w: &[f64],
    tau: f64,
    sqrt_tau: f64,
    y_ctx: f64,
    s: &mut Scratch,
) -> f64 {
    let d = problem.dim();
    let m = problem.noise_dim();
    let p = model.param_dim();

    model.grad_x(theta, x, t, &mut s.z);
    problem.diffusion(x, t, y_ctx, &mut s.g);
    matvec(&s.g, d, m, w, &mut s.gw);
    let h = problem.nonlinearity(x, t, y_ctx, &s.z);
    let h_y = problem.nonlinearity_dy(x, t, y_ctx, &s.z);
    problem.nonlinearity_dz(x, t, y_ctx, &s.z, &mut s.hz);
    let incr = h * tau + dot(&s.z, &s.gw) * sqrt_tau;

    model.grad_dot_dtheta(theta, x, t, &s.hz, &mut s.dgd_h);
    model.grad_dot_dtheta(theta, x, t, &s.gw, &mut s.dgd_g);
    let zdgw = if problem.is_coupled() {
        problem.diffusion_dy(x, t, y_ctx, &mut s.dgdy);
        matvec(&s.dgdy, d, m, w, &mut s.dgdyw);
        dot(&s.z, &s.dgdyw)
    } else {
        0.0
    };
    for q in 0..p {
        s.jincr[q] =
            tau * (h_y * s.jy[q] + s.dgd_h[q]) + sqrt_tau * (s.dgd_g[q] + zdgw * s.jy[q]);
    }
    incr
}

/// Heun backward increment: the y-component of the predictor-corrector step
/// on the augmented state, 1/2 (F_y0 + F_y1) tau + 1/2 (G_y0 + G_y1) w
/// sqrt(tau), where F_y = h_theta - 1/2 Tr(H hess u_theta) and G_y w =
/// grad u_theta^T g w; h is always evaluated at y = u_theta (reset), while
/// coupled diffusions read the propagated augmented value. Also fills the
/// exact theta-derivative.
#[allow(clippy::too_many_arguments)]
fn heun_increment(
    problem: &dyn PdeProblem,
    model: &dyn ModelFamily,
    theta: &[f64],
    x: &[f64],
    x_pred: &[f64],
    t: f64,
    t1: f64,
    w: &[f64],
    tau: f64,
    sqrt_tau: f64,
    y_ctx: f64,
    s: &mut Scratch,
) -> f64 {
    let d = problem.dim();
    let m = problem.noise_dim();
    let p = model.param_dim();
    let coupled = problem.is_coupled();

    // point 0: current state
    let u0 = model.value(theta, x, t);
    model.grad_x(theta, x, t, &mut s.z);
    model.hess_x(theta, x, t, &mut s.hess);
    problem.diffusion(x, t, y_ctx, &mut s.g);
    gram(&s.g, d, m, &mut s.hmat);
    matvec(&s.g, d, m, w, &mut s.gw);
    let h0 = problem.nonlinearity(x, t, u0, &s.z);
    let fy0 = h0 - 0.5 * trace_product(&s.hmat, &s.hess);
    let gyw0 = dot(&s.z, &s.gw);

    model.value_dtheta(theta, x, t, &mut s.du_a);
    model.trace_hess_dtheta(theta, x, t, &s.hmat, &mut s.dtr);
    let h_y0 = problem.nonlinearity_dy(x, t, u0, &s.z);
    problem.nonlinearity_dz(x, t, u0, &s.z, &mut s.hz);
    model.grad_dot_dtheta(theta, x, t, &s.hz, &mut s.dgd_h);
    model.grad_dot_dtheta(theta, x, t, &s.gw, &mut s.dgd_g);
    let (tr_dy0, zdgw0) = if coupled {
        problem.diffusion_dy(x, t, y_ctx, &mut s.dgdy);
        let tr_dy = gram_dy_trace(&s.g, &s.dgdy, &s.hess, d, m);
        matvec(&s.dgdy, d, m, w, &mut s.dgdyw);
        (tr_dy, dot(&s.z, &s.dgdyw))
    } else {
        (0.0, 0.0)
    };
    for q in 0..p {
        s.dfy0[q] = h_y0 * s.du_a[q] + s.dgd_h[q] - 0.5 * s.dtr[q] - 0.5 * tr_dy0 * s.jy[q];
        s.dgyw0[q] = s.dgd_g[q] + zdgw0 * s.jy[q];
    }

    // predictor y; the predictor position comes from the simulated path
    let y_pred = y_ctx + fy0 * tau + gyw0 * sqrt_tau;
    for q in 0..p {
        s.jpred[q] = s.jy[q] + tau * s.dfy0[q] + sqrt_tau * s.dgyw0[q];
    }

    // point 1: predicted state
    let u1 = model.value(theta, x_pred, t1);
    model.grad_x(theta, x_pred, t1, &mut s.z1);
    model.hess_x(theta, x_pred, t1, &mut s.hess);
    problem.diffusion(x_pred, t1, y_pred, &mut s.g);
    gram(&s.g, d, m, &mut s.hmat);
    matvec(&s.g, d, m, w, &mut s.gw1);
    let h1 = problem.nonlinearity(x_pred, t1, u1, &s.z1);
    let fy1 = h1 - 0.5 * trace_product(&s.hmat, &s.hess);
    let gyw1 = dot(&s.z1, &s.gw1);

    model.value_dtheta(theta, x_pred, t1, &mut s.du_b);
    model.trace_hess_dtheta(theta, x_pred, t1, &s.hmat, &mut s.dtr);
    let h_y1 = problem.nonlinearity_dy(x_pred, t1, u1, &s.z1);
    problem.nonlinearity_dz(x_pred, t1, u1, &s.z1, &mut s.hz);
    model.grad_dot_dtheta(theta, x_pred, t1, &s.hz, &mut s.dgd_h);
    model.grad_dot_dtheta(theta, x_pred, t1, &s.gw1, &mut s.dgd_g);
    let (tr_dy1, zdgw1) = if coupled {
        problem.diffusion_dy(x_pred, t1, y_pred, &mut s.dgdy);
        let tr_dy = gram_dy_trace(&s.g, &s.dgdy, &s.hess, d, m);
        matvec(&s.dgdy, d, m, w, &mut s.dgdyw);
        (tr_dy, dot(&s.z1, &s.dgdyw))
    } else {
        (0.0, 0.0)
    };

    let incr = 0.5 * (fy0 + fy1) * tau + 0.5 * (gyw0 + gyw1) * sqrt_tau;
    for q in 0..p {
        let dfy1 = h_y1 * s.du_b[q] + s.dgd_h[q] - 0.5 * s.dtr[q] - 0.5 * tr_dy1 * s.jpred[q];
        let dgyw1 = s.dgd_g[q] + zdgw1 * s.jpred[q];
        s.jincr[q] = 0.5 * tau * (s.dfy0[q] + dfy1) + 0.5 * sqrt_tau * (s.dgyw0[q] + dgyw1);
    }
    incr
}
