use crate::error::{CoreError, Result};
use crate::model::ModelFamily;
use crate::problem::{gram, trace_product, PdeProblem};

/// PDE residual R[u_theta](x, t) =
///   du/dt + 1/2 Tr(H hess u) + <f, grad u> - h(x, t, u, grad u).
///
/// Each term is checked for finiteness so a blow-up reports which piece of
/// the operator produced it.
pub fn residual(
    problem: &dyn PdeProblem,
    model: &dyn ModelFamily,
    theta: &[f64],
    x: &[f64],
    t: f64,
) -> Result<f64> {
    let d = problem.dim();
    let m = problem.noise_dim();
    debug_assert_eq!(model.dim(), d);

    let u = model.value(theta, x, t);
    if !u.is_finite() {
        return Err(CoreError::NonFinite { term: "value", t });
    }
    let du_dt = model.time_deriv(theta, x, t);
    if !du_dt.is_finite() {
        return Err(CoreError::NonFinite { term: "time_deriv", t });
    }

    let mut grad = vec![0.0; d];
    model.grad_x(theta, x, t, &mut grad);
    let mut hess = vec![0.0; d * d];
    model.hess_x(theta, x, t, &mut hess);

    let mut g = vec![0.0; d * m];
    problem.diffusion(x, t, u, &mut g);
    let mut h_mat = vec![0.0; d * d];
    gram(&g, d, m, &mut h_mat);

    let trace_term = 0.5 * trace_product(&h_mat, &hess);
    if !trace_term.is_finite() {
        return Err(CoreError::NonFinite { term: "diffusion_trace", t });
    }

    let mut f = vec![0.0; d];
    problem.drift(x, t, &mut f);
    let drift_term: f64 = f.iter().zip(&grad).map(|(a, b)| a * b).sum();
    if !drift_term.is_finite() {
        return Err(CoreError::NonFinite { term: "drift_inner_product", t });
    }

    let h_val = problem.nonlinearity(x, t, u, &grad);
    if !h_val.is_finite() {
        return Err(CoreError::NonFinite { term: "nonlinearity", t });
    }

    let r = du_dt + trace_term + drift_term - h_val;
    if !r.is_finite() {
        return Err(CoreError::NonFinite { term: "residual", t });
    }
    Ok(r)
}

/// d(R[u_theta])/d(theta), assembled from the model's parameter derivatives.
/// The diffusion is evaluated with y = u_theta, so the y-dependence of H in
/// coupled problems flows through the chain rule as well.
pub fn residual_dtheta(
    problem: &dyn PdeProblem,
    model: &dyn ModelFamily,
    theta: &[f64],
    x: &[f64],
    t: f64,
    out: &mut [f64],
) -> Result<f64> {
    let d = problem.dim();
    let m = problem.noise_dim();
    let p = model.param_dim();
    debug_assert_eq!(out.len(), p);

    let u = model.value(theta, x, t);
    let mut grad = vec![0.0; d];
    model.grad_x(theta, x, t, &mut grad);
    let mut hess = vec![0.0; d * d];
    model.hess_x(theta, x, t, &mut hess);

    let mut g = vec![0.0; d * m];
    problem.diffusion(x, t, u, &mut g);
    let mut h_mat = vec![0.0; d * d];
    gram(&g, d, m, &mut h_mat);
    let mut f = vec![0.0; d];
    problem.drift(x, t, &mut f);

    let h_val = problem.nonlinearity(x, t, u, &grad);
    let h_dy = problem.nonlinearity_dy(x, t, u, &grad);
    let mut h_dz = vec![0.0; d];
    problem.nonlinearity_dz(x, t, u, &grad, &mut h_dz);

    let r = model.time_deriv(theta, x, t) + 0.5 * trace_product(&h_mat, &hess)
        + f.iter().zip(&grad).map(|(a, b)| a * b).sum::<f64>()
        - h_val;
    if !r.is_finite() {
        return Err(CoreError::NonFinite { term: "residual", t });
    }

    let mut du = vec![0.0; p];
    model.value_dtheta(theta, x, t, &mut du);
    let mut ddt = vec![0.0; p];
    model.time_deriv_dtheta(theta, x, t, &mut ddt);
    let mut dgrad = vec![0.0; p * d];
    model.grad_x_dtheta(theta, x, t, &mut dgrad);
    let mut dtr = vec![0.0; p];
    model.trace_hess_dtheta(theta, x, t, &h_mat, &mut dtr);

    // coupled problems: H = g g^T with g depending on y = u_theta
    let coupled_tr: Option<f64> = if problem.is_coupled() {
        let mut dg = vec![0.0; d * m];
        problem.diffusion_dy(x, t, u, &mut dg);
        // d/dy Tr(g g^T hess) = 2 Tr(dg g^T hess) for symmetric hess
        let mut cross = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                let mut acc = 0.0;
                for c in 0..m {
                    acc += dg[i * m + c] * g[j * m + c];
                }
                cross[i * d + j] = acc;
            }
        }
        let mut acc = 0.0;
        for i in 0..d {
            for j in 0..d {
                acc += (cross[i * d + j] + cross[j * d + i]) * hess[i * d + j];
            }
        }
        Some(0.5 * acc)
    } else {
        None
    };

    for q in 0..p {
        let mut v = ddt[q] + 0.5 * dtr[q];
        let gq = &dgrad[q * d..(q + 1) * d];
        v += f.iter().zip(gq).map(|(a, b)| a * b).sum::<f64>();
        v -= h_dy * du[q] + h_dz.iter().zip(gq).map(|(a, b)| a * b).sum::<f64>();
        if let Some(c) = coupled_tr {
            v += c * du[q];
        }
        out[q] = v;
    }
    Ok(r)
}
