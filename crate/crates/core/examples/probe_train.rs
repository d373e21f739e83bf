// timing + convergence probe with RL2 snapshots
use fbsde_core::analysis::{evaluate_rl2, ExactReference, TrainSetup};
use fbsde_core::grid::TimeGrid;
use fbsde_core::losses::{LossKind, LossSpec};
use fbsde_core::model::{FeatureLinear, ModelFamily};
use fbsde_core::optimizer::{init_theta, train, AdamConfig};
use fbsde_core::pde::BsbProblem;
use fbsde_core::rng::mix_seed;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let d: usize = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(1);
    let iters: u64 = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(20000);
    let kind = match args.get(3).map(|s| s.as_str()).unwrap_or("heun") {
        "em" => LossKind::EmBsde,
        "em_nr" => LossKind::EmBsdeNoReset,
        _ => LossKind::HeunBsde,
    };
    let seed: u64 = args.get(4).map(|s| s.parse().unwrap()).unwrap_or(0);
    let problem = BsbProblem::new(d);
    let model = FeatureLinear::new(d, 1.0);
    let setup = TrainSetup::default();
    let grid = TimeGrid::over_horizon(1.0, 50).unwrap();
    let spec = LossSpec {
        kind, skip: 1, grid, batch: 64, boundary_weight: 1.0,
        seed: mix_seed(seed, 0x6c6f_7373),
    };
    let adam = AdamConfig {
        schedule: vec![(iters / 2, 1e-3), (iters * 3 / 4, 1e-4), (iters, 1e-5)],
        total_iters: iters,
        seed,
        ..AdamConfig::default()
    };
    let theta0 = init_theta(model.param_dim(), seed);
    let reference = ExactReference(&problem);
    let mut snap = |theta: &[f64]| {
        evaluate_rl2(&problem, &model, theta, &reference, setup.n_eval_paths, grid,
                     setup.eval_seed, false).map(|e| e.overall)
    };
    let every = (iters / 10).max(1);
    let t0 = std::time::Instant::now();
    let trace = train(&problem, &model, &theta0, &spec, &adam, Some((every, &mut snap))).unwrap();
    for (it, rl2) in &trace.snapshots {
        println!("iter {it}: rl2 {rl2:.6}");
    }
    println!(
        "d={d} {:?} iters={iters} seed={seed}: final_loss={:?} wall={:.2}s",
        kind, trace.final_loss(), t0.elapsed().as_secs_f64()
    );
}
