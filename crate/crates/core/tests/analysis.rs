//! Analysis-layer oracle tests: tau scaling, landscape argmins, RL2
//! evaluation, and the accumulation identity.

mod common;

use common::close_rel;
use fbsde_core::analysis::{
    bsde_identity_check, evaluate_rl2, landscape_argmin, landscape_sweep, tau_scaling_study,
    ExactReference, HjbMcReference,
};
use fbsde_core::grid::TimeGrid;
use fbsde_core::model::{ModelFamily, ScaledExact, SmoothFn};
use fbsde_core::pde::{
    hjb_reference, scaled_exact_model, BsbProblem, HjbProblem, HjbReferenceCache, Lqr1dProblem,
};
use fbsde_core::problem::{OffsetNonlinearity, PdeProblem};
use fbsde_core::trajectory::Scheme;

#[test]
fn tau_scaling_em_plateaus_at_analytic_bias_on_lqr() {
    let problem = Lqr1dProblem::default();
    let model = scaled_exact_model("lqr1d", 1).unwrap();
    let rows = tau_scaling_study(
        &problem,
        &model,
        &[1.0],
        Scheme::EulerMaruyama,
        &[1e-1, 1e-2],
        100_000,
        3,
        &[0.0],
        0.0,
    )
    .unwrap();
    for row in &rows {
        // sigma = sqrt(2) squares to 2 + 1 ulp, hence the tolerance
        assert!((row.analytic_em_limit - 8.0).abs() < 1e-12);
        assert_eq!(row.analytic_residual_sq, 0.0);
        assert!(
            (row.value - 8.0).abs() <= 4.0 * row.std_error.max(0.02),
            "tau {}: {} +- {}",
            row.tau,
            row.value,
            row.std_error
        );
    }
}

#[test]
fn tau_scaling_em_minus_heun_converges_to_bias_off_truth() {
    // off the exact solution both limits are nonzero; the difference is the
    // bias term
    let problem = Lqr1dProblem::default();
    let model = scaled_exact_model("lqr1d", 1).unwrap();
    let theta = [1.2];
    let x = [0.7];
    let em = tau_scaling_study(
        &problem,
        &model,
        &theta,
        Scheme::EulerMaruyama,
        &[1e-2, 1e-3],
        400_000,
        5,
        &x,
        0.0,
    )
    .unwrap();
    let heun = tau_scaling_study(
        &problem,
        &model,
        &theta,
        Scheme::Heun,
        &[1e-2, 1e-3],
        400_000,
        6,
        &x,
        0.0,
    )
    .unwrap();
    // analytic bias = em_limit - residual_sq, state-independent here
    let analytic_bias = em[0].analytic_em_limit - em[0].analytic_residual_sq;
    assert!((analytic_bias - 8.0 * 1.2 * 1.2).abs() < 1e-12);
    let last = em.len() - 1;
    let diff = em[last].value - heun[last].value;
    let tol = 3.0 * (em[last].std_error.powi(2) + heun[last].std_error.powi(2)).sqrt();
    assert!(
        (diff - analytic_bias).abs() <= tol.max(0.03 * analytic_bias),
        "diff {diff} vs analytic {analytic_bias} (tol {tol})"
    );
}

#[test]
fn heun_limit_matches_residual_squared_for_zero_diffusion() {
    // g = 0: both schemes' normalized one-step losses converge to R^2
    let base = common::StaticProblem::new(1);
    let problem = OffsetNonlinearity { inner: &base, offset: 1.3 };
    let model = fbsde_core::FeatureLinear::new(1, 1.0);
    let theta = vec![0.0; model.param_dim()];
    for scheme in [Scheme::EulerMaruyama, Scheme::Heun] {
        let rows = tau_scaling_study(
            &problem, &model, &theta, scheme, &[1e-1, 1e-2], 100, 1, &[0.2], 0.0,
        )
        .unwrap();
        for row in &rows {
            assert!((row.value - 1.69).abs() < 1e-12, "{scheme:?}: {}", row.value);
            assert_eq!(row.analytic_residual_sq, row.analytic_em_limit);
        }
    }
}

#[test]
fn landscape_heun_argmin_at_truth_em_displaced() {
    let problem = Lqr1dProblem::default();
    let model = scaled_exact_model("lqr1d", 1).unwrap();
    let theta_grid: Vec<f64> = (0..=40).map(|i| 0.5 + i as f64 * 0.025).collect();
    let heun = landscape_sweep(
        &problem,
        &model,
        &theta_grid,
        Scheme::Heun,
        &[1e-1, 5e-2],
        400,
        11,
    )
    .unwrap();
    for &tau in &[1e-1, 5e-2] {
        let am = landscape_argmin(&heun, tau).unwrap();
        assert!((am - 1.0).abs() < 0.026, "Heun argmin {am} at tau {tau}");
    }
    let em = landscape_sweep(
        &problem,
        &model,
        &theta_grid,
        Scheme::EulerMaruyama,
        &[1e-2],
        400,
        11,
    )
    .unwrap();
    let am = landscape_argmin(&em, 1e-2).unwrap();
    assert!((am - 1.0).abs() > 0.075, "EM argmin {am} should be displaced");
    assert_eq!(em.len(), theta_grid.len());
}

#[test]
fn rl2_of_exact_solution_is_machine_zero() {
    for (name, dim) in [("bsb", 1), ("bsb", 10), ("bz", 3), ("lqr1d", 1)] {
        let problem = fbsde_core::pde::problem_by_name(name, dim).unwrap();
        let model = scaled_exact_model(name, dim).unwrap();
        let grid = TimeGrid::over_horizon(1.0, 50).unwrap();
        let reference = ExactReference(problem.as_ref());
        let eval =
            evaluate_rl2(problem.as_ref(), &model, &[1.0], &reference, 5, grid, 1234, false)
                .unwrap();
        assert!(eval.overall <= 1e-10, "{name} d={dim}: rl2 {}", eval.overall);
        assert_eq!(eval.per_step.len(), 50);
    }
}

#[test]
fn rl2_of_uniformly_scaled_model_is_the_scale_offset() {
    let problem = BsbProblem::new(2);
    let model = scaled_exact_model("bsb", 2).unwrap();
    let grid = TimeGrid::over_horizon(1.0, 50).unwrap();
    let reference = ExactReference(&problem);
    let eval = evaluate_rl2(&problem, &model, &[1.1], &reference, 5, grid, 77, false).unwrap();
    assert!((eval.overall - 0.1).abs() <= 0.02, "rl2 {}", eval.overall);
}

#[test]
fn rl2_per_step_includes_terminal_when_asked() {
    let problem = BsbProblem::new(1);
    let model = scaled_exact_model("bsb", 1).unwrap();
    let grid = TimeGrid::over_horizon(1.0, 10).unwrap();
    let reference = ExactReference(&problem);
    let eval = evaluate_rl2(&problem, &model, &[1.0], &reference, 3, grid, 5, true).unwrap();
    assert_eq!(eval.per_step.len(), 11);
}

#[test]
fn hjb_mc_reference_self_consistency_within_noise() {
    // two independent-seed MC references along shared eval paths agree
    // within 3 pooled standard errors
    let problem = HjbProblem::new(2);
    let n_mc = 20_000;
    let grid = TimeGrid::over_horizon(1.0, 10).unwrap();
    let incr = fbsde_core::GaussianIncrements::generate(5, 3, 10, 2);
    let paths =
        fbsde_core::integrators::em_forward(&problem, grid, &incr).unwrap();
    let mut refs_a = Vec::new();
    let mut refs_b = Vec::new();
    let mut var = 0.0;
    for b in 0..3 {
        for k in 0..10 {
            let x = paths.state(b, k);
            let t = grid.knot(k);
            let a = hjb_reference(&problem, x, t, n_mc, 100).unwrap();
            let c = hjb_reference(&problem, x, t, n_mc, 200).unwrap();
            refs_a.push(a.value);
            refs_b.push(c.value);
            var += a.std_error.powi(2) + c.std_error.powi(2);
        }
    }
    let rl2 = fbsde_core::metrics::rl2(&refs_a, &refs_b).unwrap();
    let denom: f64 = refs_a.iter().map(|v| v * v).sum();
    let floor = (var / denom).sqrt();
    assert!(rl2 <= 3.0 * floor, "rl2 {rl2} vs floor {floor}");
}

#[test]
fn hjb_cached_reference_usable_for_rl2() {
    let problem = HjbProblem::new(1);
    let cache = HjbReferenceCache::new();
    let grid = TimeGrid::over_horizon(1.0, 5).unwrap();
    // sanity: an affine-in-terminal model is far from the solution; rl2 > 0
    let model = fbsde_core::FeatureLinear::new(1, 1.0);
    let theta = vec![0.0; model.param_dim()];
    let reference =
        HjbMcReference { problem: &problem, cache: &cache, n_mc: 5_000, seed: 7 };
    let eval = evaluate_rl2(&problem, &model, &theta, &reference, 2, grid, 3, false).unwrap();
    assert!(eval.overall > 0.5);
    assert!(cache.len() > 0);
}

#[test]
fn identity_exact_solution_has_vanishing_sides() {
    let problem = BsbProblem::new(1);
    let model = scaled_exact_model("bsb", 1).unwrap();
    let grid = TimeGrid::over_horizon(1.0, 100).unwrap();
    let out = bsde_identity_check(&problem, &model, &[1.0], grid, 200, 3).unwrap();
    // the full-horizon defect keeps an O(tau) discretization residue even
    // at the exact solution; the quadrature side is exactly zero
    assert!(out.lhs <= 1e-5, "lhs {}", out.lhs);
    assert!(out.rhs <= 1e-20, "rhs {}", out.rhs);
}

#[test]
fn identity_constant_residual_gives_c_squared() {
    let base = BsbProblem::new(1);
    let c = 0.8;
    let problem = OffsetNonlinearity { inner: &base, offset: c };
    let model = scaled_exact_model("bsb", 1).unwrap();
    let grid = TimeGrid::over_horizon(1.0, 400).unwrap();
    let out = bsde_identity_check(&problem, &model, &[1.0], grid, 1000, 9).unwrap();
    assert!((out.rhs - c * c).abs() < 1e-12, "rhs {} should be exactly c^2", out.rhs);
    assert!((out.lhs - c * c).abs() / (c * c) <= 0.10, "lhs {} vs {}", out.lhs, c * c);
}

#[test]
fn identity_random_theta_lhs_close_to_rhs_and_jensen_holds() {
    let problem = BsbProblem::new(1);
    let family = fbsde_core::FeatureLinear::new(1, 1.0);
    let grid = TimeGrid::over_horizon(1.0, 400).unwrap();
    for trial in 0..5 {
        let theta = common::random_theta(family.param_dim(), 400 + trial);
        let out = bsde_identity_check(&problem, &family, &theta, grid, 1000, 31 + trial).unwrap();
        let rel = (out.lhs - out.rhs).abs() / out.rhs.max(1e-6);
        assert!(rel <= 0.15, "trial {trial}: lhs {} rhs {} rel {rel}", out.lhs, out.rhs);
        // Jensen: squared path-mean <= path-mean of squares, up to MC noise
        let slack = 3.0 * (out.lhs_se.powi(2) + out.fs_pinns_se.powi(2)).sqrt();
        assert!(
            out.lhs <= out.fs_pinns + slack,
            "trial {trial}: Jensen violated: {} > {}",
            out.lhs,
            out.fs_pinns
        );
    }
}

#[test]
fn scaled_exact_base_field_consistency() {
    // the ScaledExact wrapper and the problem's exact_solution agree
    let problem = BsbProblem::new(3);
    let model = scaled_exact_model("bsb", 3).unwrap();
    let x = [0.4, -0.9, 1.3];
    let mut grad = [0.0; 3];
    let u = problem.exact_solution(&x, 0.3, &mut grad).unwrap();
    assert!(close_rel(model.value(&[1.0], &x, 0.3), u, 1e-14));
    let field: &dyn SmoothFn = model.base();
    assert!(close_rel(field.value(&x, 0.3), u, 1e-14));
    let sm: ScaledExact = model.clone();
    let mut g2 = [0.0; 3];
    sm.grad_x(&[1.0], &x, 0.3, &mut g2);
    for i in 0..3 {
        assert!(close_rel(g2[i], grad[i], 1e-14));
    }
}
