// skip-length sweep probe on 1D BSB
use fbsde_core::analysis::{skip_sweep, ExactReference, TrainSetup};
use fbsde_core::losses::LossKind;
use fbsde_core::model::FeatureLinear;
use fbsde_core::optimizer::AdamConfig;
use fbsde_core::pde::BsbProblem;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let kind = match args.get(1).map(|s| s.as_str()).unwrap_or("em") {
        "heun" => LossKind::HeunBsde,
        _ => LossKind::EmBsde,
    };
    let iters: u64 = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(8000);
    let problem = BsbProblem::new(1);
    let model = FeatureLinear::new(1, 1.0);
    let reference = ExactReference(&problem);
    let mut setup = TrainSetup::default();
    setup.adam = AdamConfig {
        schedule: vec![(iters / 2, 1e-3), (iters * 3 / 4, 1e-4), (iters, 1e-5)],
        total_iters: iters,
        ..AdamConfig::default()
    };
    let rows = skip_sweep(
        &problem, &model, &reference, kind,
        &[1, 5, 10, 25, 50], &[50], &[0, 1, 2], &setup,
    )
    .unwrap();
    for r in &rows {
        println!("{:?} k={} N={} seed={}: rl2={:?} ({})", r.kind, r.skip, r.n_steps, r.seed, r.rl2, r.status);
    }
}
