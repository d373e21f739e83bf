//! Integrator oracle tests: exact substitutions, Monte-Carlo laws, scheme
//! equivalences, and strong-convergence behavior.

mod common;

use common::{BrownianProblem, ExpOdeProblem, StaticProblem};
use fbsde_core::grid::TimeGrid;
use fbsde_core::integrators::{
    em_backward, em_forward, heun_augmented, heun_forward, log_log_slope, strong_error,
};
use fbsde_core::model::{FeatureLinear, ModelFamily};
use fbsde_core::pde::{scaled_exact_model, BsbProblem, BzProblem, HjbProblem};
use fbsde_core::problem::PdeProblem;
use fbsde_core::rng::GaussianIncrements;
use fbsde_core::trajectory::{ResetPolicy, Scheme};

#[test]
fn em_forward_no_dynamics_stays_at_x0() {
    let problem = StaticProblem::new(3);
    let grid = TimeGrid::over_horizon(1.0, 10).unwrap();
    let incr = GaussianIncrements::generate(1, 4, 10, 3);
    let paths = em_forward(&problem, grid, &incr).unwrap();
    for b in 0..4 {
        for k in 0..=10 {
            assert_eq!(paths.state(b, k), problem.initial_state());
        }
    }
}

#[test]
fn em_forward_single_step_is_scaled_increment() {
    let problem = BrownianProblem::new(2);
    let grid = TimeGrid::over_horizon(1.0, 4).unwrap();
    let incr = GaussianIncrements::generate(5, 8, 4, 2);
    let paths = em_forward(&problem, grid, &incr).unwrap();
    let sqrt_tau = 0.5;
    for b in 0..8 {
        let w = incr.w(b, 0);
        let x1 = paths.state(b, 1);
        for i in 0..2 {
            assert!((x1[i] - sqrt_tau * w[i]).abs() < 1e-15);
        }
    }
}

#[test]
fn em_forward_terminal_covariance_matches_brownian_law() {
    let d = 2;
    let problem = BrownianProblem::new(d);
    let n = 20;
    let batch = 100_000;
    let grid = TimeGrid::over_horizon(1.0, n).unwrap();
    let incr = GaussianIncrements::generate(17, batch, n, d);
    let paths = em_forward(&problem, grid, &incr).unwrap();
    // sample covariance of X_N should be T * I within 2% Frobenius-relative
    let mut mean = vec![0.0; d];
    for b in 0..batch {
        for (i, v) in paths.state(b, n).iter().enumerate() {
            mean[i] += v;
        }
    }
    for v in mean.iter_mut() {
        *v /= batch as f64;
    }
    let mut cov = vec![0.0; d * d];
    for b in 0..batch {
        let x = paths.state(b, n);
        for i in 0..d {
            for j in 0..d {
                cov[i * d + j] += (x[i] - mean[i]) * (x[j] - mean[j]);
            }
        }
    }
    for v in cov.iter_mut() {
        *v /= batch as f64;
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..d {
        for j in 0..d {
            let target = if i == j { 1.0 } else { 0.0 };
            num += (cov[i * d + j] - target) * (cov[i * d + j] - target);
            den += target * target;
        }
    }
    let rel = (num / den).sqrt();
    assert!(rel <= 0.02, "covariance off by {rel}");
}

#[test]
fn em_forward_rejects_coupled_problems() {
    let problem = BzProblem::new(2);
    let grid = TimeGrid::over_horizon(1.0, 4).unwrap();
    let incr = GaussianIncrements::generate(1, 2, 4, 2);
    assert!(em_forward(&problem, grid, &incr).is_err());
}

#[test]
fn em_backward_constant_when_all_increments_vanish() {
    // h = 0 and grad u = 0 keep Y at its initial value
    let problem = StaticProblem::new(2);
    let model = FeatureLinear::new(2, 1.0);
    let mut theta = vec![0.0; model.param_dim()];
    theta[0] = 0.7; // constant feature only
    let grid = TimeGrid::over_horizon(1.0, 6).unwrap();
    let incr = GaussianIncrements::generate(3, 4, 6, 2);
    let traj = em_backward(&problem, &model, &theta, grid, &incr, ResetPolicy::Reset).unwrap();
    for b in 0..4 {
        for k in 0..=6 {
            assert_eq!(traj.backward_value(b, k), 0.7);
        }
    }
}

#[test]
fn em_backward_first_step_matches_hand_formula_on_bsb() {
    let problem = BsbProblem::new(2);
    let model = scaled_exact_model("bsb", 2).unwrap();
    let theta = [1.0];
    let n = 5;
    let grid = TimeGrid::over_horizon(1.0, n).unwrap();
    let incr = GaussianIncrements::generate(11, 3, n, 2);
    let traj = em_backward(&problem, &model, &theta, grid, &incr, ResetPolicy::Reset).unwrap();
    let tau = grid.tau();
    let x0 = problem.initial_state();
    let mut z = vec![0.0; 2];
    model.grad_x(&theta, x0, 0.0, &mut z);
    let u0 = model.value(&theta, x0, 0.0);
    let h = problem.nonlinearity(x0, 0.0, u0, &z);
    for b in 0..3 {
        let w = incr.w(b, 0);
        // g = sigma diag(x): z^T g w = sum_i z_i sigma x0_i w_i
        let diff: f64 = (0..2).map(|i| z[i] * 0.4 * x0[i] * w[i]).sum();
        let expected = h * tau + diff * tau.sqrt();
        let got = traj.backward_value(b, 1) - traj.backward_value(b, 0);
        assert!((got - expected).abs() < 1e-12, "path {b}: {got} vs {expected}");
        assert!((traj.backward_value(b, 0) - u0).abs() < 1e-15);
    }
}

#[test]
fn reset_and_no_reset_agree_on_first_step() {
    let problem = BsbProblem::new(2);
    let model = scaled_exact_model("bsb", 2).unwrap();
    let theta = [0.9];
    let grid = TimeGrid::over_horizon(1.0, 1).unwrap();
    let incr = GaussianIncrements::generate(13, 6, 1, 2);
    let a = em_backward(&problem, &model, &theta, grid, &incr, ResetPolicy::Reset).unwrap();
    let b = em_backward(&problem, &model, &theta, grid, &incr, ResetPolicy::NoReset).unwrap();
    for p in 0..6 {
        assert_eq!(a.backward_value(p, 1), b.backward_value(p, 1));
    }
}

#[test]
fn heun_deterministic_ode_reaches_e_with_second_order_error() {
    let problem = ExpOdeProblem;
    let model = FeatureLinear::new(1, 1.0);
    let theta = vec![0.0; model.param_dim()];
    let e = std::f64::consts::E;

    let mut taus = Vec::new();
    let mut errs = Vec::new();
    for &n in &[25usize, 50, 100, 200] {
        let grid = TimeGrid::over_horizon(1.0, n).unwrap();
        let incr = GaussianIncrements::generate(1, 1, n, 1);
        let traj = heun_augmented(&problem, &model, &theta, grid, &incr).unwrap();
        let err = (traj.state(0, n)[0] - e).abs();
        if n == 100 {
            assert!(err <= 1e-3, "N=100 error {err}");
        }
        taus.push(grid.tau());
        errs.push(err);
    }
    let slope = log_log_slope(&taus, &errs);
    assert!((1.8..=2.2).contains(&slope), "trapezoidal slope {slope}");
}

#[test]
fn constant_diffusion_makes_em_and_heun_identical_bitwise() {
    // g constant and f = 0: predictor and corrector diffusion agree, so the
    // forward paths coincide exactly
    let problem = HjbProblem::new(3);
    let grid = TimeGrid::over_horizon(1.0, 25).unwrap();
    let incr = GaussianIncrements::generate(29, 16, 25, 3);
    let em = em_forward(&problem, grid, &incr).unwrap();
    let heun = heun_forward(&problem, grid, &incr).unwrap();
    assert_eq!(em.states, heun.states);
}

#[test]
fn theta_does_not_change_forward_paths_for_uncoupled() {
    let problem = BsbProblem::new(2);
    let model = scaled_exact_model("bsb", 2).unwrap();
    let grid = TimeGrid::over_horizon(1.0, 10).unwrap();
    let incr = GaussianIncrements::generate(31, 4, 10, 2);
    let a = em_backward(&problem, &model, &[0.5], grid, &incr, ResetPolicy::Reset).unwrap();
    let b = em_backward(&problem, &model, &[1.5], grid, &incr, ResetPolicy::Reset).unwrap();
    assert_eq!(a.states, b.states);
    let fwd = em_forward(&problem, grid, &incr).unwrap();
    assert_eq!(a.states, fwd.states);
}

#[test]
fn strong_error_zero_for_additive_noise() {
    let problem = BrownianProblem::new(2);
    let grid = TimeGrid::over_horizon(1.0, 8).unwrap();
    for scheme in [Scheme::EulerMaruyama, Scheme::Heun] {
        let report = strong_error(&problem, None, scheme, grid, 4, 200, 3).unwrap();
        assert!(report.max_path_error <= 1e-12, "{scheme:?}: {}", report.max_path_error);
    }
}

#[test]
fn strong_error_em_halving_ratio_on_bsb() {
    let problem = BsbProblem::new(1);
    let coarse = TimeGrid::over_horizon(1.0, 32).unwrap();
    let halved = TimeGrid::over_horizon(1.0, 64).unwrap();
    let e1 = strong_error(&problem, None, Scheme::EulerMaruyama, coarse, 16, 2000, 7)
        .unwrap()
        .max_path_error;
    let e2 = strong_error(&problem, None, Scheme::EulerMaruyama, halved, 16, 2000, 7)
        .unwrap()
        .max_path_error;
    let ratio = e1 / e2;
    assert!((1.2..=2.2).contains(&ratio), "ratio {ratio}");
}

#[test]
fn strong_error_bz_heun_decreases_under_refinement() {
    let problem = BzProblem::new(2);
    let model = scaled_exact_model("bz", 2).unwrap();
    let theta = [1.0];
    let mut prev = f64::INFINITY;
    for &n in &[8usize, 16, 32] {
        let grid = TimeGrid::over_horizon(1.0, n).unwrap();
        let err = strong_error(
            &problem,
            Some((&model as &dyn ModelFamily, &theta[..])),
            Scheme::Heun,
            grid,
            8,
            1000,
            11,
        )
        .unwrap()
        .max_path_error;
        assert!(err < prev, "error {err} did not decrease from {prev}");
        prev = err;
    }
}

#[test]
fn strong_error_rejects_bad_refinement() {
    let problem = BsbProblem::new(1);
    let grid = TimeGrid::over_horizon(1.0, 8).unwrap();
    assert!(strong_error(&problem, None, Scheme::EulerMaruyama, grid, 3, 10, 1).is_err());
    assert!(strong_error(&problem, None, Scheme::EulerMaruyama, grid, 4, 0, 1).is_err());
}

#[test]
fn blow_up_reports_step_index() {
    struct Exploding;
    impl PdeProblem for Exploding {
        fn name(&self) -> &'static str {
            "exploding"
        }
        fn dim(&self) -> usize {
            1
        }
        fn horizon(&self) -> f64 {
            1.0
        }
        fn initial_state(&self) -> &[f64] {
            &[1.0]
        }
        fn drift(&self, x: &[f64], _t: f64, out: &mut [f64]) {
            out[0] = x[0] * x[0] * x[0] * 1e6;
        }
        fn diffusion(&self, _x: &[f64], _t: f64, _y: f64, out: &mut [f64]) {
            out[0] = 0.0;
        }
        fn nonlinearity(&self, _x: &[f64], _t: f64, _y: f64, _z: &[f64]) -> f64 {
            0.0
        }
        fn nonlinearity_dy(&self, _x: &[f64], _t: f64, _y: f64, _z: &[f64]) -> f64 {
            0.0
        }
        fn nonlinearity_dz(&self, _x: &[f64], _t: f64, _y: f64, _z: &[f64], out: &mut [f64]) {
            out.fill(0.0);
        }
        fn terminal(&self, _x: &[f64]) -> f64 {
            0.0
        }
        fn terminal_grad(&self, _x: &[f64], out: &mut [f64]) {
            out.fill(0.0);
        }
        fn exact_solution(&self, _x: &[f64], _t: f64, _grad: &mut [f64]) -> Option<f64> {
            None
        }
        fn has_exact(&self) -> bool {
            false
        }
    }
    let grid = TimeGrid::over_horizon(1.0, 50).unwrap();
    let incr = GaussianIncrements::generate(1, 1, 50, 1);
    let err = em_forward(&Exploding, grid, &incr).unwrap_err();
    match err {
        fbsde_core::CoreError::BlowUp { step, path } => {
            assert!(step >= 1);
            assert_eq!(path, 0);
        }
        other => panic!("unexpected error {other:?}"),
    }
}

#[test]
fn bz_heun_augmented_tracks_exact_solution() {
    // at theta = 1 the augmented Y should stay near u*(X_t, t)
    let problem = BzProblem::new(3);
    let model = scaled_exact_model("bz", 3).unwrap();
    let theta = [1.0];
    let grid = TimeGrid::over_horizon(1.0, 100).unwrap();
    let incr = GaussianIncrements::generate(41, 32, 100, 3);
    let traj = heun_augmented(&problem, &model, &theta, grid, &incr).unwrap();
    let mut worst = 0.0f64;
    for b in 0..32 {
        for k in 0..=100 {
            let mut grad = vec![0.0; 3];
            let u = problem.exact_solution(traj.state(b, k), grid.knot(k), &mut grad).unwrap();
            worst = worst.max((traj.backward_value(b, k) - u).abs());
        }
    }
    // scale of u is ~0.3; the discrete Y should track it within a few percent
    assert!(worst <= 0.05, "worst deviation {worst}");
}
