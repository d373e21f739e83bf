use crate::error::{CoreError, Result};
use crate::grid::TimeGrid;
use crate::integrators::simulate_forward;
use crate::metrics::rl2;
use crate::model::{ModelFamily, ScaledExact};
use crate::pde::{HjbProblem, HjbReferenceCache};
use crate::problem::PdeProblem;
use crate::rng::GaussianIncrements;
use crate::trajectory::Scheme;

/// Reference solution values along evaluation points.
pub trait SolutionReference: Sync {
    fn value(&self, x: &[f64], t: f64) -> Result<f64>;
    /// Squared standard error of the reference at this point (0 for exact).
    fn variance_hint(&self, _x: &[f64], _t: f64) -> f64 {
        0.0
    }
}

/// Closed-form reference from the problem's exact solution.
pub struct ExactReference<'a>(pub &'a dyn PdeProblem);

impl SolutionReference for ExactReference<'_> {
    fn value(&self, x: &[f64], t: f64) -> Result<f64> {
        let mut grad = vec![0.0; self.0.dim()];
        self.0
            .exact_solution(x, t, &mut grad)
            .ok_or_else(|| CoreError::MissingReference(self.0.name().into()))
    }
}

/// Cached Monte-Carlo reference for the HJB benchmark.
pub struct HjbMcReference<'a> {
    pub problem: &'a HjbProblem,
    pub cache: &'a HjbReferenceCache,
    pub n_mc: usize,
    pub seed: u64,
}

impl SolutionReference for HjbMcReference<'_> {
    fn value(&self, x: &[f64], t: f64) -> Result<f64> {
        Ok(self.cache.get_or_compute(self.problem, x, t, self.n_mc, self.seed)?.value)
    }

    fn variance_hint(&self, x: &[f64], t: f64) -> f64 {
        self.cache
            .get_or_compute(self.problem, x, t, self.n_mc, self.seed)
            .map(|e| e.std_error * e.std_error)
            .unwrap_or(0.0)
    }
}

/// Relative L2 error of the model along evaluation trajectories.
#[derive(Debug, Clone)]
pub struct Rl2Evaluation {
    /// RL2 pooled over every step of every evaluation path.
    pub overall: f64,
    /// RL2 per knot, across paths.
    pub per_step: Vec<f64>,
    /// sqrt(sum of reference variance hints / sum ref^2): the level below
    /// which differences are indistinguishable from reference noise.
    pub noise_floor: f64,
}

/// Evaluate u_theta against a reference along `n_eval_paths` forward SDE
/// trajectories on the grid knots (terminal knot excluded unless
/// `include_terminal`). Coupled problems simulate the evaluation paths with
/// the exact solution driving the diffusion.
#[allow(clippy::too_many_arguments)]
pub fn evaluate_rl2(
    problem: &dyn PdeProblem,
    model: &dyn ModelFamily,
    theta: &[f64],
    reference: &dyn SolutionReference,
    n_eval_paths: usize,
    grid: TimeGrid,
    seed: u64,
    include_terminal: bool,
) -> Result<Rl2Evaluation> {
    if n_eval_paths == 0 {
        return Err(CoreError::Precondition("n_eval_paths must be >= 1".into()));
    }
    let incr =
        GaussianIncrements::generate(seed, n_eval_paths, grid.n_steps(), problem.noise_dim());
    let exact_driver: Option<ScaledExact> = if problem.is_coupled() {
        Some(ScaledExact::new(problem.exact_smooth().ok_or_else(|| {
            CoreError::MissingReference(format!(
                "{}: coupled evaluation needs an exact solution",
                problem.name()
            ))
        })?))
    } else {
        None
    };
    let one = [1.0];
    let driver: Option<(&dyn ModelFamily, &[f64])> =
        exact_driver.as_ref().map(|m| (m as &dyn ModelFamily, &one[..]));
    let paths = simulate_forward(problem, driver, grid, &incr, Scheme::EulerMaruyama)?;

    let n = grid.n_steps();
    let last_knot = if include_terminal { n } else { n - 1 };
    let mut refs = Vec::with_capacity(n_eval_paths * (last_knot + 1));
    let mut preds = Vec::with_capacity(refs.capacity());
    let mut var_total = 0.0;
    let mut per_step = Vec::with_capacity(last_knot + 1);
    for k in 0..=last_knot {
        let t = grid.knot(k);
        let mut step_refs = Vec::with_capacity(n_eval_paths);
        let mut step_preds = Vec::with_capacity(n_eval_paths);
        for b in 0..n_eval_paths {
            let x = paths.state(b, k);
            let r = reference.value(x, t)?;
            let p = model.value(theta, x, t);
            var_total += reference.variance_hint(x, t);
            step_refs.push(r);
            step_preds.push(p);
            refs.push(r);
            preds.push(p);
        }
        per_step.push(rl2(&step_refs, &step_preds)?);
    }
    let overall = rl2(&refs, &preds)?;
    let ref_sq: f64 = refs.iter().map(|r| r * r).sum();
    Ok(Rl2Evaluation { overall, per_step, noise_floor: (var_total / ref_sq).sqrt() })
}
