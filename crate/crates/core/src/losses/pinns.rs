use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{CoreError, Result};
use crate::integrators::simulate_forward;
use crate::model::{ModelFamily, ScaledExact};
use crate::problem::PdeProblem;
use crate::residual::residual_dtheta;
use crate::rng::{mix_seed, path_rng, GaussianIncrements};
use crate::trajectory::Scheme;

use super::{boundary_penalty, terminal_samples, LossSpec, LossValue};

const FIT_PATHS: usize = 1000;
const FIT_SEED_SALT: u64 = 0x5049_4e4e;
const SAMPLE_SEED_SALT: u64 = 0x434f_4c4c;

/// How PINNs collocation points are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PinnsSampling {
    /// Diagonal Gaussian fitted per spatial dimension to pre-simulated
    /// forward trajectories pooled over all knots; t uniform on [0, T].
    FittedNormal,
    /// Points taken directly from freshly simulated forward trajectories.
    ForwardSde,
}

/// Diagonal Gaussian over the spatial dimensions.
#[derive(Debug, Clone)]
pub struct FittedNormal {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl FittedNormal {
    fn sample(&self, rng: &mut impl Rng, out: &mut [f64]) {
        for i in 0..out.len() {
            let z: f64 = rng.sample(StandardNormal);
            out[i] = self.mean[i] + self.std[i] * z;
        }
    }
}

/// Fit diagonal Gaussians to the spatial marginals of EM forward paths:
/// one pooled over every knot, one over the terminal knot only.
pub fn fit_spatial_normal(
    problem: &dyn PdeProblem,
    driver: Option<(&dyn ModelFamily, &[f64])>,
    grid: crate::grid::TimeGrid,
    n_fit_paths: usize,
    seed: u64,
) -> Result<(FittedNormal, FittedNormal)> {
    let d = problem.dim();
    let incr = GaussianIncrements::generate(seed, n_fit_paths, grid.n_steps(), problem.noise_dim());
    let paths = simulate_forward(problem, driver, grid, &incr, Scheme::EulerMaruyama)?;
    let n = grid.n_steps();

    let fit = |knots: &mut dyn Iterator<Item = usize>| -> Result<FittedNormal> {
        let mut mean = vec![0.0; d];
        let mut m2 = vec![0.0; d];
        let mut count = 0.0;
        for k in knots {
            for b in 0..n_fit_paths {
                let x = paths.state(b, k);
                count += 1.0;
                for i in 0..d {
                    let delta = x[i] - mean[i];
                    mean[i] += delta / count;
                    m2[i] += delta * (x[i] - mean[i]);
                }
            }
        }
        let mut std = vec![0.0; d];
        for i in 0..d {
            let var = m2[i] / count;
            if !var.is_finite() || var <= 0.0 {
                return Err(CoreError::FitError(format!(
                    "degenerate variance {var} in dimension {i}"
                )));
            }
            std[i] = var.sqrt();
        }
        Ok(FittedNormal { mean, std })
    };

    let pooled = fit(&mut (0..=n))?;
    let terminal = fit(&mut std::iter::once(n))?;
    Ok((pooled, terminal))
}

/// PINNs / FS-PINNs objective: mean squared PDE residual over the
/// collocation set plus the weighted boundary penalty, with the analytic
/// parameter gradient. Coupled problems sample their forward SDE with the
/// exact solution driving the diffusion, mirroring the reference protocol.
pub fn pinns_loss(
    problem: &dyn PdeProblem,
    model: &dyn ModelFamily,
    theta: &[f64],
    spec: &LossSpec,
    sampling: PinnsSampling,
) -> Result<LossValue> {
    let d = problem.dim();
    let p = model.param_dim();
    let grid = spec.grid;

    let exact_driver: Option<ScaledExact> = if problem.is_coupled() {
        let field = problem.exact_smooth().ok_or_else(|| {
            CoreError::MissingReference(format!(
                "{}: coupled PINNs sampling needs an exact solution",
                problem.name()
            ))
        })?;
        Some(ScaledExact::new(field))
    } else {
        None
    };
    let one = [1.0];
    let driver: Option<(&dyn ModelFamily, &[f64])> =
        exact_driver.as_ref().map(|m| (m as &dyn ModelFamily, &one[..]));

    // collocation set: (x, t) pairs flattened; terminal samples for the penalty
    let n_colloc = spec.batch * grid.n_steps();
    let mut points = vec![0.0; n_colloc * (d + 1)];
    let terminal: Vec<f64>;
    match sampling {
        PinnsSampling::ForwardSde => {
            let incr = GaussianIncrements::generate(
                spec.seed,
                spec.batch,
                grid.n_steps(),
                problem.noise_dim(),
            );
            let paths = simulate_forward(problem, driver, grid, &incr, Scheme::EulerMaruyama)?;
            let mut idx = 0;
            for b in 0..spec.batch {
                for k in 0..grid.n_steps() {
                    let x = paths.state(b, k);
                    points[idx * (d + 1)..idx * (d + 1) + d].copy_from_slice(x);
                    points[idx * (d + 1) + d] = grid.knot(k);
                    idx += 1;
                }
            }
            terminal = terminal_samples(&paths);
        }
        PinnsSampling::FittedNormal => {
            let (pooled, term_fit) = fit_spatial_normal(
                problem,
                driver,
                grid,
                FIT_PATHS,
                mix_seed(spec.seed, FIT_SEED_SALT),
            )?;
            let mut rng = path_rng(mix_seed(spec.seed, SAMPLE_SEED_SALT), 0);
            for idx in 0..n_colloc {
                let row = &mut points[idx * (d + 1)..(idx + 1) * (d + 1)];
                pooled.sample(&mut rng, &mut row[..d]);
                row[d] = grid.t_start() + rng.gen::<f64>() * (grid.t_end() - grid.t_start());
            }
            let mut term = vec![0.0; spec.batch * d];
            for b in 0..spec.batch {
                term_fit.sample(&mut rng, &mut term[b * d..(b + 1) * d]);
            }
            terminal = term;
        }
    }

    // mean squared residual and its gradient, reduced in point order
    let chunk = 256usize;
    let n_chunks = n_colloc.div_ceil(chunk);
    let partials: Result<Vec<(f64, Vec<f64>)>> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let lo = c * chunk;
            let hi = (lo + chunk).min(n_colloc);
            let mut dres = vec![0.0; p];
            let mut gacc = vec![0.0; p];
            let mut acc = 0.0;
            for idx in lo..hi {
                let row = &points[idx * (d + 1)..(idx + 1) * (d + 1)];
                let r = residual_dtheta(problem, model, theta, &row[..d], row[d], &mut dres)?;
                acc += r * r;
                for q in 0..p {
                    gacc[q] += 2.0 * r * dres[q];
                }
            }
            Ok((acc, gacc))
        })
        .collect();
    let partials = partials?;

    let mut value = 0.0;
    let mut grad = vec![0.0; p];
    for (v, g) in &partials {
        value += v;
        for (a, b) in grad.iter_mut().zip(g) {
            *a += b;
        }
    }
    let scale = 1.0 / n_colloc as f64;
    value *= scale;
    for g in grad.iter_mut() {
        *g *= scale;
    }
    let residual_part = value;

    let mut out = LossValue { value, grad, diagnostics: vec![residual_part] };
    if spec.boundary_weight > 0.0 {
        let bp = boundary_penalty(problem, model, theta, &terminal, d)?;
        out.add_scaled(&bp, spec.boundary_weight);
        out.diagnostics.push(bp.value);
    }
    if !out.value.is_finite() {
        return Err(CoreError::NonFinite { term: "pinns_loss", t: grid.t_end() });
    }
    Ok(out)
}
