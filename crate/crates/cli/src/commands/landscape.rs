use std::path::Path;
use std::time::Instant;

use fbsde_core::analysis::landscape_sweep;
use fbsde_core::pde::scaled_exact_model;
use fbsde_core::trajectory::Scheme;

use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};
use crate::report::{write_csv, write_json, Cell, Metadata, Table};
use crate::setup::{build_problem, init_threads};

/// Loss-landscape sweep over the scaling parameter of the exact solution,
/// under both schemes at their configured step sizes.
pub fn cmd_landscape(cfg: &ExperimentConfig, out_dir: &Path) -> Result<()> {
    init_threads(cfg.threads);
    let started = Instant::now();
    let problem = build_problem(cfg)?;
    if !problem.has_exact() {
        return Err(CliError::Config(format!(
            "landscape sweep needs an exact solution; '{}' has none",
            cfg.problem.name
        )));
    }
    let model = scaled_exact_model(&cfg.problem.name, problem.dim())
        .map_err(|e| CliError::Config(e.to_string()))?;

    let ls = &cfg.landscape;
    let theta_grid: Vec<f64> = (0..ls.points)
        .map(|i| {
            ls.theta_min + (ls.theta_max - ls.theta_min) * i as f64 / (ls.points - 1) as f64
        })
        .collect();

    let mut table = Table::new(vec!["scheme", "tau", "theta", "loss"]);
    for (scheme, taus) in
        [(Scheme::EulerMaruyama, &ls.em_tau), (Scheme::Heun, &ls.heun_tau)]
    {
        let rows = landscape_sweep(
            problem.as_ref(),
            &model,
            &theta_grid,
            scheme,
            taus,
            ls.n_paths,
            cfg.seed,
        )?;
        for r in rows {
            table.push(vec![
                Cell::S(format!("{:?}", r.scheme)),
                Cell::F(r.tau),
                Cell::F(r.theta),
                Cell::F(r.loss),
            ]);
        }
    }
    write_csv(out_dir, "landscape", &table)?;
    let meta = Metadata::<'_, serde_json::Value> {
        command: "landscape",
        version: env!("CARGO_PKG_VERSION"),
        config: cfg,
        wall_clock_secs: started.elapsed().as_secs_f64(),
        extra: None,
    };
    write_json(out_dir, "landscape_meta", &meta)?;
    Ok(())
}
