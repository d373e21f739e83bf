use crate::error::Result;
use crate::grid::TimeGrid;
use crate::losses::{LossKind, LossSpec};
use crate::model::ModelFamily;
use crate::optimizer::{init_theta, train, AdamConfig, TrainingTrace};
use crate::problem::PdeProblem;
use crate::rng::mix_seed;

use super::{evaluate_rl2, SolutionReference};

/// Shared training configuration for sweep runs.
#[derive(Debug, Clone)]
pub struct TrainSetup {
    pub batch: usize,
    pub boundary_weight: f64,
    pub adam: AdamConfig,
    pub n_eval_paths: usize,
    pub eval_seed: u64,
}

impl Default for TrainSetup {
    fn default() -> Self {
        Self {
            batch: 64,
            boundary_weight: 1.0,
            adam: AdamConfig::default(),
            n_eval_paths: 5,
            eval_seed: 9999,
        }
    }
}

/// One sweep run: trains fresh parameters and evaluates the final RL2.
#[derive(Debug, Clone)]
pub struct SkipSweepRow {
    pub kind: LossKind,
    pub skip: usize,
    pub n_steps: usize,
    pub seed: u64,
    pub rl2: Option<f64>,
    pub final_loss: Option<f64>,
    pub wall_clock_secs: f64,
    pub status: String,
}

/// Train from a fresh seeded initialization and evaluate the final RL2
/// against the reference along evaluation trajectories.
#[allow(clippy::too_many_arguments)]
pub fn train_and_eval(
    problem: &dyn PdeProblem,
    model: &dyn ModelFamily,
    reference: &dyn SolutionReference,
    kind: LossKind,
    skip: usize,
    n_steps: usize,
    seed: u64,
    setup: &TrainSetup,
) -> Result<(TrainingTrace, Option<f64>)> {
    let grid = TimeGrid::over_horizon(problem.horizon(), n_steps)?;
    let spec = LossSpec {
        kind,
        skip,
        grid,
        batch: setup.batch,
        boundary_weight: setup.boundary_weight,
        seed: mix_seed(seed, 0x6c6f_7373),
    };
    let mut adam = setup.adam.clone();
    adam.seed = seed;
    let theta0 = init_theta(model.param_dim(), seed);
    let trace = train(problem, model, &theta0, &spec, &adam, None)?;
    if trace.abort_reason.is_some() {
        return Ok((trace, None));
    }
    let eval = evaluate_rl2(
        problem,
        model,
        &trace.final_theta,
        reference,
        setup.n_eval_paths,
        grid,
        setup.eval_seed,
        false,
    )?;
    Ok((trace, Some(eval.overall)))
}

/// Skip-length sweep: a fresh training run per (skip k, N, seed) with the
/// final RL2 recorded per run; failures are kept as rows with the reason.
#[allow(clippy::too_many_arguments)]
pub fn skip_sweep(
    problem: &dyn PdeProblem,
    model: &dyn ModelFamily,
    reference: &dyn SolutionReference,
    kind: LossKind,
    k_list: &[usize],
    n_list: &[usize],
    seeds: &[u64],
    setup: &TrainSetup,
) -> Result<Vec<SkipSweepRow>> {
    let mut rows = Vec::new();
    for &n_steps in n_list {
        for &k in k_list {
            if k > n_steps {
                continue;
            }
            for &seed in seeds {
                let row = match train_and_eval(
                    problem, model, reference, kind, k, n_steps, seed, setup,
                ) {
                    Ok((trace, rl2)) => SkipSweepRow {
                        kind,
                        skip: k,
                        n_steps,
                        seed,
                        rl2,
                        final_loss: trace.final_loss(),
                        wall_clock_secs: trace.wall_clock_secs,
                        status: trace
                            .abort_reason
                            .unwrap_or_else(|| "ok".to_string()),
                    },
                    Err(e) => SkipSweepRow {
                        kind,
                        skip: k,
                        n_steps,
                        seed,
                        rl2: None,
                        final_loss: None,
                        wall_clock_secs: 0.0,
                        status: e.to_string(),
                    },
                };
                rows.push(row);
            }
        }
    }
    Ok(rows)
}
