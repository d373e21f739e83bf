use crate::error::{CoreError, Result};
use crate::model::ModelFamily;
use crate::problem::PdeProblem;

use super::LossValue;

/// Terminal-condition penalty with zeroth- and first-order terms:
/// E[(u_theta(x, T) - phi(x))^2] + E[|grad u_theta(x, T) - grad phi(x)|^2]
/// over the supplied terminal samples (row-major n x d).
pub fn boundary_penalty(
    problem: &dyn PdeProblem,
    model: &dyn ModelFamily,
    theta: &[f64],
    terminal_samples: &[f64],
    dim: usize,
) -> Result<LossValue> {
    if terminal_samples.is_empty() {
        return Err(CoreError::Precondition("boundary penalty needs terminal samples".into()));
    }
    if terminal_samples.len() % dim != 0 {
        return Err(CoreError::Precondition("terminal sample buffer not a multiple of d".into()));
    }
    let n = terminal_samples.len() / dim;
    let p = model.param_dim();
    let t_end = problem.horizon();

    let mut value = 0.0;
    let mut grad = vec![0.0; p];
    let mut gu = vec![0.0; dim];
    let mut gphi = vec![0.0; dim];
    let mut du = vec![0.0; p];
    let mut dgrad = vec![0.0; p * dim];
    for idx in 0..n {
        let x = &terminal_samples[idx * dim..(idx + 1) * dim];
        let u = model.value(theta, x, t_end);
        let phi = problem.terminal(x);
        model.grad_x(theta, x, t_end, &mut gu);
        problem.terminal_grad(x, &mut gphi);

        let diff0 = u - phi;
        let mut diff1_sq = 0.0;
        for i in 0..dim {
            let dv = gu[i] - gphi[i];
            diff1_sq += dv * dv;
        }
        value += diff0 * diff0 + diff1_sq;

        model.value_dtheta(theta, x, t_end, &mut du);
        model.grad_x_dtheta(theta, x, t_end, &mut dgrad);
        for q in 0..p {
            let mut v = 2.0 * diff0 * du[q];
            let row = &dgrad[q * dim..(q + 1) * dim];
            for i in 0..dim {
                v += 2.0 * (gu[i] - gphi[i]) * row[i];
            }
            grad[q] += v;
        }
    }
    let scale = 1.0 / n as f64;
    value *= scale;
    for g in grad.iter_mut() {
        *g *= scale;
    }
    if !value.is_finite() {
        return Err(CoreError::NonFinite { term: "boundary_penalty", t: t_end });
    }
    Ok(LossValue { value, grad, diagnostics: vec![value] })
}
