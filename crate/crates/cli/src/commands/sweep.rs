use std::path::Path;
use std::time::Instant;

use fbsde_core::analysis::{skip_sweep, TrainSetup};
use fbsde_core::pde::HjbProblem;

use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};
use crate::report::{write_csv, write_json, Cell, Metadata, Table};
use crate::setup::{
    build_model, build_problem, build_reference, init_threads, load_hjb_cache, save_hjb_cache,
};

/// Skip-length sweep: train a fresh model per (loss kind, k, N, seed) and
/// record the final RL2 per run. Failed runs keep their row with the
/// failure reason; the command errors only if every run failed.
pub fn cmd_sweep(cfg: &ExperimentConfig, out_dir: &Path) -> Result<()> {
    init_threads(cfg.threads);
    let started = Instant::now();
    let problem = build_problem(cfg)?;
    let model = build_model(cfg, problem.as_ref())?;

    let hjb_for_ref = HjbProblem::with_params(
        cfg.problem.dim,
        cfg.problem.sigma.unwrap_or(2.0f64.sqrt()),
        cfg.problem.horizon.unwrap_or(1.0),
    );
    let cache = load_hjb_cache(out_dir);
    let reference = build_reference(cfg, problem.as_ref(), Some((&hjb_for_ref, &cache)))?;

    let setup = TrainSetup {
        batch: cfg.loss.batch,
        boundary_weight: cfg.loss.boundary_weight,
        adam: cfg.optimizer.to_adam(cfg.seed),
        n_eval_paths: cfg.eval.n_paths,
        eval_seed: cfg.eval.seed,
    };

    let mut table =
        Table::new(vec!["kind", "k", "n_steps", "seed", "rl2", "final_loss", "status"]);
    let mut n_ok = 0usize;
    let mut n_total = 0usize;
    for kind in &cfg.sweep.kinds {
        let rows = skip_sweep(
            problem.as_ref(),
            model.as_ref(),
            reference.as_dyn(),
            *kind,
            &cfg.sweep.k_list,
            &cfg.sweep.n_list,
            &cfg.sweep.seeds,
            &setup,
        )?;
        for r in rows {
            n_total += 1;
            if r.rl2.is_some() {
                n_ok += 1;
            }
            table.push(vec![
                Cell::S(format!("{:?}", r.kind)),
                Cell::U(r.skip as u64),
                Cell::U(r.n_steps as u64),
                Cell::U(r.seed),
                r.rl2.map(Cell::F).unwrap_or(Cell::Empty),
                r.final_loss.map(Cell::F).unwrap_or(Cell::Empty),
                Cell::S(r.status),
            ]);
        }
    }
    write_csv(out_dir, "sweep", &table)?;
    save_hjb_cache(out_dir, &cache)?;
    let meta = Metadata::<'_, serde_json::Value> {
        command: "sweep",
        version: env!("CARGO_PKG_VERSION"),
        config: cfg,
        wall_clock_secs: started.elapsed().as_secs_f64(),
        extra: Some(serde_json::json!({ "runs_ok": n_ok, "runs_total": n_total })),
    };
    write_json(out_dir, "sweep_meta", &meta)?;
    if n_total > 0 && n_ok == 0 {
        return Err(CliError::BlowUp("every sweep run failed".into()));
    }
    Ok(())
}
