use std::path::Path;
use std::time::Instant;

use serde::Serialize;

use fbsde_core::analysis::evaluate_rl2;
use fbsde_core::grid::TimeGrid;
use fbsde_core::pde::HjbProblem;

use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};
use crate::report::{write_csv, write_json, Cell, Metadata, Table};
use crate::setup::{
    build_model, build_problem, build_reference, init_threads, load_hjb_cache, save_hjb_cache,
};

#[derive(Debug, Serialize)]
struct EvalExtra {
    rl2_overall: f64,
    noise_floor: f64,
    theta: Vec<f64>,
}

/// Evaluate a model against the reference along forward trajectories. The
/// parameters come from a prior `train_meta.json` in the output directory
/// when present; otherwise theta = 1 for scaled_exact (the exact solution)
/// or a zero vector.
pub fn cmd_eval(cfg: &ExperimentConfig, out_dir: &Path) -> Result<()> {
    init_threads(cfg.threads);
    let started = Instant::now();
    let problem = build_problem(cfg)?;
    let model = build_model(cfg, problem.as_ref())?;
    let n_steps = cfg.eval.n_steps.unwrap_or(cfg.loss.n_steps);
    let grid = TimeGrid::over_horizon(problem.horizon(), n_steps)
        .map_err(|e| CliError::Config(e.to_string()))?;

    let theta: Vec<f64> = match load_trained_theta(out_dir, model.param_dim()) {
        Some(theta) => theta,
        None if cfg.model.family == "scaled_exact" => vec![1.0],
        None => vec![0.0; model.param_dim()],
    };

    let hjb_for_ref = HjbProblem::with_params(
        cfg.problem.dim,
        cfg.problem.sigma.unwrap_or(2.0f64.sqrt()),
        cfg.problem.horizon.unwrap_or(1.0),
    );
    let cache = load_hjb_cache(out_dir);
    let reference = build_reference(cfg, problem.as_ref(), Some((&hjb_for_ref, &cache)))?;

    let eval = evaluate_rl2(
        problem.as_ref(),
        model.as_ref(),
        &theta,
        reference.as_dyn(),
        cfg.eval.n_paths,
        grid,
        cfg.eval.seed,
        cfg.eval.include_terminal,
    )?;

    let mut table = Table::new(vec!["step", "t", "rl2_step", "rl2_overall"]);
    for (k, v) in eval.per_step.iter().enumerate() {
        table.push(vec![
            Cell::U(k as u64),
            Cell::F(grid.knot(k)),
            Cell::F(*v),
            Cell::F(eval.overall),
        ]);
    }
    write_csv(out_dir, "eval", &table)?;
    save_hjb_cache(out_dir, &cache)?;
    let meta = Metadata {
        command: "eval",
        version: env!("CARGO_PKG_VERSION"),
        config: cfg,
        wall_clock_secs: started.elapsed().as_secs_f64(),
        extra: Some(EvalExtra {
            rl2_overall: eval.overall,
            noise_floor: eval.noise_floor,
            theta,
        }),
    };
    write_json(out_dir, "eval_meta", &meta)?;
    Ok(())
}

fn load_trained_theta(out_dir: &Path, param_dim: usize) -> Option<Vec<f64>> {
    let text = std::fs::read_to_string(out_dir.join("train_meta.json")).ok()?;
    let value: serde_json::Value = serde_json::from_str(&text).ok()?;
    let theta: Vec<f64> = value
        .get("extra")?
        .get("final_theta")?
        .as_array()?
        .iter()
        .filter_map(|v| v.as_f64())
        .collect();
    (theta.len() == param_dim).then_some(theta)
}
