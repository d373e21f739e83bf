use std::path::Path;
use std::time::Instant;

use serde::Serialize;

use fbsde_core::analysis::evaluate_rl2;
use fbsde_core::grid::TimeGrid;
use fbsde_core::losses::LossSpec;
use fbsde_core::optimizer::{init_theta, train};
use fbsde_core::pde::HjbProblem;
use fbsde_core::rng::mix_seed;

use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};
use crate::report::{write_csv, write_json, Cell, Metadata, Table};
use crate::setup::{
    build_model, build_problem, build_reference, init_threads, load_hjb_cache, save_hjb_cache,
};

#[derive(Debug, Serialize)]
struct TrainExtra {
    final_rl2: Option<f64>,
    final_loss: Option<f64>,
    final_theta: Vec<f64>,
    abort_reason: Option<String>,
    train_wall_clock_secs: f64,
}

/// Train the configured model against the configured loss, recording the
/// per-iteration loss curve and periodic RL2 snapshots.
pub fn cmd_train(cfg: &ExperimentConfig, out_dir: &Path) -> Result<()> {
    init_threads(cfg.threads);
    let started = Instant::now();
    let problem = build_problem(cfg)?;
    let model = build_model(cfg, problem.as_ref())?;
    let grid = TimeGrid::over_horizon(problem.horizon(), cfg.loss.n_steps)
        .map_err(|e| CliError::Config(e.to_string()))?;

    let hjb_for_ref = HjbProblem::with_params(
        cfg.problem.dim,
        cfg.problem.sigma.unwrap_or(2.0f64.sqrt()),
        cfg.problem.horizon.unwrap_or(1.0),
    );
    let cache = load_hjb_cache(out_dir);
    let reference = build_reference(cfg, problem.as_ref(), Some((&hjb_for_ref, &cache)))?;

    let spec = LossSpec {
        kind: cfg.loss.kind,
        skip: cfg.loss.skip,
        grid,
        batch: cfg.loss.batch,
        boundary_weight: cfg.loss.boundary_weight,
        seed: mix_seed(cfg.seed, 0x6c6f_7373),
    };
    let adam = cfg.optimizer.to_adam(cfg.seed);
    let theta0 = init_theta(model.param_dim(), cfg.seed);

    let eval_grid = match cfg.eval.n_steps {
        Some(n) => TimeGrid::over_horizon(problem.horizon(), n)
            .map_err(|e| CliError::Config(e.to_string()))?,
        None => grid,
    };
    let mut snapshot_fn = |theta: &[f64]| {
        evaluate_rl2(
            problem.as_ref(),
            model.as_ref(),
            theta,
            reference.as_dyn(),
            cfg.eval.n_paths,
            eval_grid,
            cfg.eval.seed,
            cfg.eval.include_terminal,
        )
        .map(|e| e.overall)
    };
    let snapshot = if cfg.optimizer.snapshot_every > 0 {
        Some((cfg.optimizer.snapshot_every, &mut snapshot_fn as &mut dyn FnMut(&[f64]) -> fbsde_core::Result<f64>))
    } else {
        None
    };

    let trace = train(problem.as_ref(), model.as_ref(), &theta0, &spec, &adam, snapshot)?;

    let mut table = Table::new(vec!["iter", "loss", "learning_rate", "rl2"]);
    let mut snaps = trace.snapshots.iter().peekable();
    for (i, (loss, lr)) in trace.losses.iter().zip(&trace.learning_rates).enumerate() {
        let iter = (i + 1) as u64;
        let rl2 = match snaps.peek() {
            Some((at, v)) if *at == iter => {
                let v = *v;
                snaps.next();
                Cell::F(v)
            }
            _ => Cell::Empty,
        };
        table.push(vec![Cell::U(iter), Cell::F(*loss), Cell::F(*lr), rl2]);
    }
    write_csv(out_dir, "train", &table)?;

    let final_rl2 = if trace.abort_reason.is_none() {
        Some(
            evaluate_rl2(
                problem.as_ref(),
                model.as_ref(),
                &trace.final_theta,
                reference.as_dyn(),
                cfg.eval.n_paths,
                eval_grid,
                cfg.eval.seed,
                cfg.eval.include_terminal,
            )?
            .overall,
        )
    } else {
        None
    };

    save_hjb_cache(out_dir, &cache)?;
    let meta = Metadata {
        command: "train",
        version: env!("CARGO_PKG_VERSION"),
        config: cfg,
        wall_clock_secs: started.elapsed().as_secs_f64(),
        extra: Some(TrainExtra {
            final_rl2,
            final_loss: trace.final_loss(),
            final_theta: trace.final_theta.clone(),
            abort_reason: trace.abort_reason.clone(),
            train_wall_clock_secs: trace.wall_clock_secs,
        }),
    };
    write_json(out_dir, "train_meta", &meta)?;
    if let Some(reason) = trace.abort_reason {
        return Err(CliError::BlowUp(reason));
    }
    Ok(())
}
