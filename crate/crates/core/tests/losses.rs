//! Loss oracle tests: closed-form limits, gradient correctness against
//! finite differences, degeneracies, and the bias oracle.

mod common;

use common::{close_rel, StaticProblem};
use fbsde_core::analysis::onestep_point_loss;
use fbsde_core::grid::TimeGrid;
use fbsde_core::integrators::simulate_forward;
use fbsde_core::losses::{
    bias_oracle, boundary_penalty, evaluate_loss, selfcons_loss_on_paths, LossKind, LossSpec,
};
use fbsde_core::model::{FeatureLinear, ModelFamily};
use fbsde_core::pde::{scaled_exact_model, BsbProblem, BzProblem, Lqr1dProblem};
use fbsde_core::problem::{OffsetNonlinearity, PdeProblem};
use fbsde_core::rng::GaussianIncrements;
use fbsde_core::trajectory::{ResetPolicy, Scheme};

fn spec(kind: LossKind, skip: usize, n: usize, batch: usize, seed: u64) -> LossSpec {
    LossSpec {
        kind,
        skip,
        grid: TimeGrid::over_horizon(1.0, n).unwrap(),
        batch,
        boundary_weight: 0.0,
        seed,
    }
}

#[test]
fn em_loss_zero_without_dynamics_and_constant_model() {
    let problem = StaticProblem::new(2);
    let model = FeatureLinear::new(2, 1.0);
    let mut theta = vec![0.0; model.param_dim()];
    theta[0] = 1.3;
    for kind in [LossKind::EmBsde, LossKind::EmBsdeNoReset, LossKind::HeunBsde] {
        let out = evaluate_loss(&problem, &model, &theta, &spec(kind, 1, 8, 4, 1)).unwrap();
        assert_eq!(out.value, 0.0, "{kind:?}");
        assert!(out.grad.iter().all(|g| *g == 0.0));
    }
}

#[test]
fn multistep_zero_without_dynamics_for_all_skips() {
    let problem = StaticProblem::new(2);
    let model = FeatureLinear::new(2, 1.0);
    let mut theta = vec![0.0; model.param_dim()];
    theta[0] = -0.4;
    for k in [1usize, 2, 3, 8] {
        let out =
            evaluate_loss(&problem, &model, &theta, &spec(LossKind::EmBsde, k, 8, 4, 1)).unwrap();
        assert_eq!(out.value, 0.0, "k={k}");
    }
}

/// The tau^-2-normalized one-step EM expectation on the default LQR at
/// theta = 1 equals 2 sigma^4 a(0)^2 = 8 for every tau (the quadratic value
/// function makes the expansion exact), up to Monte-Carlo error.
#[test]
fn lqr_em_normalized_onestep_limit_is_eight() {
    let problem = Lqr1dProblem::default();
    let model = scaled_exact_model("lqr1d", 1).unwrap();
    for &tau in &[1e-1, 1e-3] {
        let (value, se) = onestep_point_loss(
            &problem,
            &model,
            &[1.0],
            &[0.0],
            0.0,
            tau,
            Scheme::EulerMaruyama,
            200_000,
            5,
        )
        .unwrap();
        assert!((value - 8.0).abs() <= 4.0 * se.max(0.02), "tau={tau}: {value} +- {se}");
    }
}

/// Same point, Heun scheme: the quadratic solution is integrated exactly,
/// so the normalized loss sits at the f64 noise floor.
#[test]
fn lqr_heun_normalized_onestep_vanishes() {
    let problem = Lqr1dProblem::default();
    let model = scaled_exact_model("lqr1d", 1).unwrap();
    for &tau in &[5e-1, 5e-2] {
        let (value, _) = onestep_point_loss(
            &problem,
            &model,
            &[1.0],
            &[0.0],
            0.0,
            tau,
            Scheme::Heun,
            50_000,
            5,
        )
        .unwrap();
        assert!(value <= 1e-12, "tau={tau}: {value}");
    }
}

/// g = 0 and a constant-residual construction: the normalized Heun loss is
/// exactly c^2 (deterministic dynamics, constant defect c tau per step).
#[test]
fn heun_deterministic_constant_residual_gives_c_squared() {
    let base = StaticProblem::new(1);
    let c = 0.7;
    let problem = OffsetNonlinearity { inner: &base, offset: c };
    let model = FeatureLinear::new(1, 1.0);
    let theta = vec![0.0; model.param_dim()];
    let (value, _) =
        onestep_point_loss(&problem, &model, &theta, &[0.5], 0.0, 0.25, Scheme::Heun, 100, 1)
            .unwrap();
    assert!((value - c * c).abs() < 1e-12, "{value}");
}

/// EM one-step loss at the exact BSB solution approximates the bias
/// functional, not zero.
#[test]
fn bsb_em_loss_at_truth_matches_bias_oracle_not_zero() {
    let problem = BsbProblem::new(1);
    let model = scaled_exact_model("bsb", 1).unwrap();
    let theta = [1.0];
    let grid = TimeGrid::over_horizon(1.0, 50).unwrap();
    let sp = LossSpec {
        kind: LossKind::EmBsde,
        skip: 1,
        grid,
        batch: 20_000,
        boundary_weight: 0.0,
        seed: 3,
    };
    let loss = evaluate_loss(&problem, &model, &theta, &sp).unwrap();
    let bias = bias_oracle(&problem, &model, &theta, grid, 20_000, 4).unwrap();
    assert!(loss.value > 0.5 * bias, "loss {} vs bias {}", loss.value, bias);
    assert!(close_rel(loss.value, bias, 0.25), "loss {} vs bias {}", loss.value, bias);
}

#[test]
fn bias_oracle_zero_for_affine_model() {
    let problem = BsbProblem::new(2);
    let model = FeatureLinear::new(2, 1.0);
    // only coordinate features: hessian identically zero
    let mut theta = vec![0.0; model.param_dim()];
    theta[2 * 4] = 0.8;
    theta[3 * 4 + 1] = -0.3;
    let grid = TimeGrid::over_horizon(1.0, 10).unwrap();
    let b = bias_oracle(&problem, &model, &theta, grid, 500, 1).unwrap();
    assert_eq!(b, 0.0);
}

#[test]
fn bias_oracle_exact_on_lqr() {
    // H = 2, hess = 2a(t) = 2: integrand = 8 regardless of the path
    let problem = Lqr1dProblem::default();
    let model = scaled_exact_model("lqr1d", 1).unwrap();
    let grid = TimeGrid::over_horizon(1.0, 20).unwrap();
    let b = bias_oracle(&problem, &model, &[1.0], grid, 100, 1).unwrap();
    assert!((b - 8.0).abs() < 1e-12);
}

#[test]
fn bias_oracle_rejects_coupled() {
    let problem = BzProblem::new(2);
    let model = scaled_exact_model("bz", 2).unwrap();
    let grid = TimeGrid::over_horizon(1.0, 10).unwrap();
    assert!(bias_oracle(&problem, &model, &[1.0], grid, 10, 1).is_err());
}

/// Analytic gradients match central finite differences for every loss kind
/// on uncoupled problems (paths do not depend on theta there).
#[test]
fn loss_gradients_match_finite_differences_uncoupled() {
    let problems: Vec<(Box<dyn PdeProblem>, usize)> =
        vec![(Box::new(BsbProblem::new(2)), 2), (Box::new(Lqr1dProblem::default()), 1)];
    for (problem, d) in &problems {
        let model = FeatureLinear::new(*d, 1.0);
        let p = model.param_dim();
        for kind in [
            LossKind::EmBsde,
            LossKind::EmBsdeNoReset,
            LossKind::HeunBsde,
            LossKind::FsPinns,
            LossKind::Pinns,
        ] {
            for trial in 0..4 {
                let theta = common::random_theta(p, 100 + trial);
                let mut sp = spec(kind, 1, 10, 8, 7 + trial);
                sp.boundary_weight = 0.5;
                let base = evaluate_loss(problem.as_ref(), &model, &theta, &sp).unwrap();
                let h = 1e-6;
                for q in (0..p).step_by(5) {
                    let mut tp = theta.clone();
                    tp[q] += h;
                    let up = evaluate_loss(problem.as_ref(), &model, &tp, &sp).unwrap().value;
                    tp[q] -= 2.0 * h;
                    let dn = evaluate_loss(problem.as_ref(), &model, &tp, &sp).unwrap().value;
                    let fd = (up - dn) / (2.0 * h);
                    assert!(
                        close_rel(base.grad[q], fd, 1e-5),
                        "{:?} {} grad[{q}] = {} vs fd {}",
                        kind,
                        problem.name(),
                        base.grad[q],
                        fd
                    );
                }
            }
        }
    }
}

/// Multi-step gradients: skip > 1 exercises the within-segment propagation.
#[test]
fn multistep_gradients_match_finite_differences() {
    let problem = BsbProblem::new(1);
    let model = FeatureLinear::new(1, 1.0);
    let p = model.param_dim();
    for kind in [LossKind::EmBsde, LossKind::EmBsdeNoReset, LossKind::HeunBsde] {
        for &k in &[3usize, 10] {
            let theta = common::random_theta(p, 55);
            let sp = spec(kind, k, 10, 6, 9);
            let base = evaluate_loss(&problem, &model, &theta, &sp).unwrap();
            let h = 1e-6;
            for q in (0..p).step_by(3) {
                let mut tp = theta.clone();
                tp[q] += h;
                let up = evaluate_loss(&problem, &model, &tp, &sp).unwrap().value;
                tp[q] -= 2.0 * h;
                let dn = evaluate_loss(&problem, &model, &tp, &sp).unwrap().value;
                let fd = (up - dn) / (2.0 * h);
                assert!(
                    close_rel(base.grad[q], fd, 1e-5),
                    "{kind:?} k={k} grad[{q}] = {} vs fd {}",
                    base.grad[q],
                    fd
                );
            }
        }
    }
}

/// Coupled problem: the gradient is exact for the loss at frozen forward
/// paths, so the finite-difference check runs on the path-frozen stage.
#[test]
fn coupled_bz_gradients_match_frozen_path_finite_differences() {
    let problem = BzProblem::new(2);
    let model = FeatureLinear::new(2, 1.0);
    let p = model.param_dim();
    let theta = common::random_theta(p, 77);
    let grid = TimeGrid::over_horizon(1.0, 8).unwrap();
    let incr = GaussianIncrements::generate(21, 6, 8, 2);
    for (kind, skip) in [
        (LossKind::EmBsde, 1usize),
        (LossKind::EmBsdeNoReset, 1),
        (LossKind::HeunBsde, 1),
        (LossKind::EmBsde, 4),
        (LossKind::HeunBsde, 4),
    ] {
        let scheme = kind.scheme().unwrap();
        let policy = kind.reset_policy();
        let paths =
            simulate_forward(&problem, Some((&model, &theta[..])), grid, &incr, scheme).unwrap();
        let eval = |th: &[f64]| {
            selfcons_loss_on_paths(&problem, &model, th, &paths, &incr, scheme, policy, skip)
                .unwrap()
                .value
        };
        let base =
            selfcons_loss_on_paths(&problem, &model, &theta, &paths, &incr, scheme, policy, skip)
                .unwrap();
        let h = 1e-6;
        for q in (0..p).step_by(4) {
            let mut tp = theta.clone();
            tp[q] += h;
            let up = eval(&tp);
            tp[q] -= 2.0 * h;
            let dn = eval(&tp);
            let fd = (up - dn) / (2.0 * h);
            assert!(
                close_rel(base.grad[q], fd, 1e-5),
                "{kind:?} skip={skip} grad[{q}] = {} vs fd {}",
                base.grad[q],
                fd
            );
        }
    }
}

/// Skip length 1 must agree with the one-step loss bit for bit on shared
/// seeds; the segment machinery degenerates to the per-step sum.
#[test]
fn skip_degeneracy_bitwise() {
    let problem = BsbProblem::new(2);
    let model = FeatureLinear::new(2, 1.0);
    let theta = common::random_theta(model.param_dim(), 13);
    let grid = TimeGrid::over_horizon(1.0, 12).unwrap();
    let incr = GaussianIncrements::generate(17, 8, 12, 2);
    for scheme in [Scheme::EulerMaruyama, Scheme::Heun] {
        let paths = simulate_forward(&problem, None, grid, &incr, scheme).unwrap();
        let one = selfcons_loss_on_paths(
            &problem, &model, &theta, &paths, &incr, scheme, ResetPolicy::Reset, 1,
        )
        .unwrap();
        let multi = selfcons_loss_on_paths(
            &problem, &model, &theta, &paths, &incr, scheme, ResetPolicy::Reset, 1,
        )
        .unwrap();
        assert_eq!(one.value.to_bits(), multi.value.to_bits());
        assert_eq!(one.grad, multi.grad);
        assert_eq!(one.diagnostics.len(), 12);
    }
}

#[test]
fn multistep_segment_structure_and_truncation() {
    // N = 5, k = 2: segments [0,2], [2,4], [4,5] with the last span tau
    let problem = BsbProblem::new(1);
    let model = scaled_exact_model("bsb", 1).unwrap();
    let theta = [1.1];
    let grid = TimeGrid::over_horizon(1.0, 5).unwrap();
    let incr = GaussianIncrements::generate(3, 4, 5, 1);
    let paths = simulate_forward(&problem, None, grid, &incr, Scheme::EulerMaruyama).unwrap();
    let out = selfcons_loss_on_paths(
        &problem,
        &model,
        &theta,
        &paths,
        &incr,
        Scheme::EulerMaruyama,
        ResetPolicy::Reset,
        2,
    )
    .unwrap();
    assert_eq!(out.diagnostics.len(), 3);
    // full horizon: a single segment
    let full = selfcons_loss_on_paths(
        &problem,
        &model,
        &theta,
        &paths,
        &incr,
        Scheme::EulerMaruyama,
        ResetPolicy::Reset,
        5,
    )
    .unwrap();
    assert_eq!(full.diagnostics.len(), 1);
}

#[test]
fn boundary_penalty_offset_and_exact_cases() {
    let problem = BsbProblem::new(2);
    let model = FeatureLinear::new(2, 1.0);
    // u = 1 + |x|^2 at t = T: offset of exactly 1 from phi, equal gradients
    let mut theta = vec![0.0; model.param_dim()];
    theta[0] = 1.0; // constant * (T-t)^0
    theta[4] = 1.0; // |x|^2 * (T-t)^0
    let samples = vec![0.3, -0.4, 1.2, 0.9, 0.0, 2.0];
    let out = boundary_penalty(&problem, &model, &theta, &samples, 2).unwrap();
    assert!((out.value - 1.0).abs() < 1e-12);

    // exact BSB solution: penalty at machine precision
    let exact = scaled_exact_model("bsb", 2).unwrap();
    let out = boundary_penalty(&problem, &exact, &[1.0], &samples, 2).unwrap();
    assert!(out.value <= 1e-10, "{}", out.value);

    // empty sample set is a precondition error
    assert!(boundary_penalty(&problem, &model, &theta, &[], 2).is_err());
}

#[test]
fn pinns_loss_zero_at_exact_solution() {
    let problem = BsbProblem::new(2);
    let model = scaled_exact_model("bsb", 2).unwrap();
    for kind in [LossKind::Pinns, LossKind::FsPinns] {
        let out = evaluate_loss(&problem, &model, &[1.0], &spec(kind, 1, 10, 16, 2)).unwrap();
        assert!(out.value <= 1e-12, "{kind:?}: {}", out.value);
    }
}

#[test]
fn fs_pinns_constant_residual_is_c_squared() {
    let base = BsbProblem::new(1);
    let c = 0.9;
    let problem = OffsetNonlinearity { inner: &base, offset: c };
    let model = scaled_exact_model("bsb", 1).unwrap();
    let out = evaluate_loss(&problem, &model, &[1.0], &spec(LossKind::FsPinns, 1, 10, 16, 2))
        .unwrap();
    assert!((out.value - c * c).abs() < 1e-12, "{}", out.value);
}

/// FS-PINNs on a miscalibrated BSB model agrees with a dense quadrature of
/// the squared residual along independently simulated paths.
#[test]
fn fs_pinns_cross_checked_against_dense_quadrature() {
    let problem = BsbProblem::new(1);
    let model = scaled_exact_model("bsb", 1).unwrap();
    let theta = [1.1];
    let n = 50;
    let batch = 4000;
    let out = evaluate_loss(
        &problem,
        &model,
        &theta,
        &spec(LossKind::FsPinns, 1, n, batch, 77),
    )
    .unwrap();
    // independent quadrature oracle on fresh paths
    let grid = TimeGrid::over_horizon(1.0, 2 * n).unwrap();
    let incr = GaussianIncrements::generate(123, batch, 2 * n, 1);
    let paths = simulate_forward(&problem, None, grid, &incr, Scheme::EulerMaruyama).unwrap();
    let mut acc = 0.0;
    for b in 0..batch {
        for k in 0..2 * n {
            let r = fbsde_core::residual::residual(
                &problem,
                &model,
                &theta,
                paths.state(b, k),
                grid.knot(k),
            )
            .unwrap();
            acc += r * r;
        }
    }
    let oracle = acc / (batch * 2 * n) as f64;
    assert!(close_rel(out.value, oracle, 0.05), "{} vs {}", out.value, oracle);
}

#[test]
fn loss_spec_validation() {
    let problem = BsbProblem::new(1);
    let model = FeatureLinear::new(1, 1.0);
    let theta = vec![0.0; model.param_dim()];
    let mut sp = spec(LossKind::EmBsde, 11, 10, 4, 1); // skip > N
    assert!(evaluate_loss(&problem, &model, &theta, &sp).is_err());
    sp.skip = 0;
    assert!(evaluate_loss(&problem, &model, &theta, &sp).is_err());
}
