#![allow(dead_code)]

use fbsde_core::model::ModelFamily;
use fbsde_core::problem::PdeProblem;
use fbsde_core::rng::path_rng;
use rand::Rng;
use rand_distr::StandardNormal;

/// Relative agreement with an absolute floor of 1: |a - b| <= tol * max(|a|, |b|, 1).
pub fn close_rel(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

/// Central finite difference of a scalar function.
pub fn central_diff(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (f(x + h) - f(x - h)) / (2.0 * h)
}

/// Random probe points: x ~ N(0, 1) per coordinate (shifted off the origin a
/// little), t uniform in [0, T].
pub fn probe_points(dim: usize, horizon: f64, count: usize, seed: u64) -> Vec<(Vec<f64>, f64)> {
    let mut rng = path_rng(seed, 0);
    (0..count)
        .map(|_| {
            let x: Vec<f64> =
                (0..dim).map(|_| 0.3 + rng.sample::<f64, _>(StandardNormal)).collect();
            let t = rng.gen::<f64>() * horizon;
            (x, t)
        })
        .collect()
}

pub fn random_theta(p: usize, seed: u64) -> Vec<f64> {
    let mut rng = path_rng(seed, 1);
    (0..p).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

/// Check every model derivative against central finite differences at the
/// probe points (step 1e-5, relative error <= 1e-6).
pub fn check_model_derivatives(
    model: &dyn ModelFamily,
    theta: &[f64],
    probes: &[(Vec<f64>, f64)],
) {
    let d = model.dim();
    let p = model.param_dim();
    let h = 1e-5;
    let tol = 1e-6;
    for (x, t) in probes {
        // spatial gradient
        let mut grad = vec![0.0; d];
        model.grad_x(theta, x, *t, &mut grad);
        for i in 0..d {
            let fd = central_diff(
                |v| {
                    let mut xp = x.clone();
                    xp[i] = v;
                    model.value(theta, &xp, *t)
                },
                x[i],
                h,
            );
            assert!(close_rel(grad[i], fd, tol), "grad[{i}] {} vs fd {}", grad[i], fd);
        }
        // Hessian symmetric + matches fd of gradient
        let mut hess = vec![0.0; d * d];
        model.hess_x(theta, x, *t, &mut hess);
        for i in 0..d {
            for j in 0..d {
                assert!(
                    (hess[i * d + j] - hess[j * d + i]).abs() <= 1e-12,
                    "hessian asymmetric"
                );
                let fd = central_diff(
                    |v| {
                        let mut xp = x.clone();
                        xp[j] = v;
                        let mut g = vec![0.0; d];
                        model.grad_x(theta, &xp, *t, &mut g);
                        g[i]
                    },
                    x[j],
                    h,
                );
                assert!(close_rel(hess[i * d + j], fd, tol), "hess[{i},{j}]");
            }
        }
        // time derivative
        let dt = model.time_deriv(theta, x, *t);
        let t_safe = t.clamp(2.0 * h, 1.0 - 2.0 * h);
        let dt_fd = central_diff(|v| model.value(theta, x, v), t_safe, h);
        let dt_at = model.time_deriv(theta, x, t_safe);
        assert!(close_rel(dt_at, dt_fd, tol), "time_deriv {dt_at} vs {dt_fd}");
        let _ = dt;
        // parameter derivatives
        let mut du = vec![0.0; p];
        model.value_dtheta(theta, x, *t, &mut du);
        let mut dgrad = vec![0.0; p * d];
        model.grad_x_dtheta(theta, x, *t, &mut dgrad);
        let mut dhess = vec![0.0; p * d * d];
        model.hess_x_dtheta(theta, x, *t, &mut dhess);
        let mut ddt = vec![0.0; p];
        model.time_deriv_dtheta(theta, x, *t, &mut ddt);
        for q in 0..p {
            let fd_u = central_diff(
                |v| {
                    let mut th = theta.to_vec();
                    th[q] = v;
                    model.value(&th, x, *t)
                },
                theta[q],
                h,
            );
            assert!(close_rel(du[q], fd_u, tol), "du[{q}]");
            let fd_dt = central_diff(
                |v| {
                    let mut th = theta.to_vec();
                    th[q] = v;
                    model.time_deriv(&th, x, *t)
                },
                theta[q],
                h,
            );
            assert!(close_rel(ddt[q], fd_dt, tol), "ddt[{q}]");
            for i in 0..d {
                let fd_g = central_diff(
                    |v| {
                        let mut th = theta.to_vec();
                        th[q] = v;
                        let mut g = vec![0.0; d];
                        model.grad_x(&th, x, *t, &mut g);
                        g[i]
                    },
                    theta[q],
                    h,
                );
                assert!(close_rel(dgrad[q * d + i], fd_g, tol), "dgrad[{q},{i}]");
            }
            for ij in 0..d * d {
                let fd_h = central_diff(
                    |v| {
                        let mut th = theta.to_vec();
                        th[q] = v;
                        let mut hm = vec![0.0; d * d];
                        model.hess_x(&th, x, *t, &mut hm);
                        hm[ij]
                    },
                    theta[q],
                    h,
                );
                assert!(close_rel(dhess[q * d * d + ij], fd_h, tol), "dhess[{q},{ij}]");
            }
        }
    }
}

/// Check the terminal gradient against finite differences of the terminal
/// condition at the probe points.
pub fn check_terminal_grad(problem: &dyn PdeProblem, probes: &[(Vec<f64>, f64)]) {
    let d = problem.dim();
    let h = 1e-5;
    for (x, _) in probes {
        let mut grad = vec![0.0; d];
        problem.terminal_grad(x, &mut grad);
        for i in 0..d {
            let fd = central_diff(
                |v| {
                    let mut xp = x.clone();
                    xp[i] = v;
                    problem.terminal(&xp)
                },
                x[i],
                h,
            );
            assert!(close_rel(grad[i], fd, 1e-6), "terminal grad[{i}] {} vs {}", grad[i], fd);
        }
    }
}

// --- tiny synthetic problems for integrator edge cases ---

/// f = 0, g = 0, h = 0: no dynamics at all.
pub struct StaticProblem {
    pub dim: usize,
    pub x0: Vec<f64>,
}

impl StaticProblem {
    pub fn new(dim: usize) -> Self {
        Self { dim, x0: vec![0.5; dim] }
    }
}

impl PdeProblem for StaticProblem {
    fn name(&self) -> &'static str {
        "static"
    }
    fn dim(&self) -> usize {
        self.dim
    }
    fn horizon(&self) -> f64 {
        1.0
    }
    fn initial_state(&self) -> &[f64] {
        &self.x0
    }
    fn drift(&self, _x: &[f64], _t: f64, out: &mut [f64]) {
        out.fill(0.0);
    }
    fn diffusion(&self, _x: &[f64], _t: f64, _y: f64, out: &mut [f64]) {
        out.fill(0.0);
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

/// f = 0, g = I: pure Brownian motion.
pub struct BrownianProblem {
    pub dim: usize,
    pub x0: Vec<f64>,
}

impl BrownianProblem {
    pub fn new(dim: usize) -> Self {
        Self { dim, x0: vec![0.0; dim] }
    }
}

impl PdeProblem for BrownianProblem {
    fn name(&self) -> &'static str {
        "brownian"
    }
    fn dim(&self) -> usize {
        self.dim
    }
    fn horizon(&self) -> f64 {
        1.0
    }
    fn initial_state(&self) -> &[f64] {
        &self.x0
    }
    fn drift(&self, _x: &[f64], _t: f64, out: &mut [f64]) {
        out.fill(0.0);
    }
    fn diffusion(&self, _x: &[f64], _t: f64, _y: f64, out: &mut [f64]) {
        out.fill(0.0);
        for i in 0..self.dim {
            out[i * self.dim + i] = 1.0;
        }
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
    fn terminal(&self, x: &[f64]) -> f64 {
        x.iter().sum()
    }
    fn terminal_grad(&self, _x: &[f64], out: &mut [f64]) {
        out.fill(1.0);
    }
    fn exact_solution(&self, _x: &[f64], _t: f64, _grad: &mut [f64]) -> Option<f64> {
        None
    }
    fn has_exact(&self) -> bool {
        false
    }
}

/// Deterministic scalar exponential: dx/dt = x, g = 0, x0 = 1.
pub struct ExpOdeProblem;

impl PdeProblem for ExpOdeProblem {
    fn name(&self) -> &'static str {
        "exp_ode"
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
        out[0] = x[0];
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
    fn terminal(&self, x: &[f64]) -> f64 {
        x[0]
    }
    fn terminal_grad(&self, _x: &[f64], out: &mut [f64]) {
        out[0] = 1.0;
    }
    fn exact_solution(&self, _x: &[f64], _t: f64, _grad: &mut [f64]) -> Option<f64> {
        None
    }
    fn has_exact(&self) -> bool {
        false
    }
}
