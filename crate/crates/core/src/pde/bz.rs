use std::f64::consts::FRAC_PI_2;

use crate::model::SmoothFn;
use crate::problem::PdeProblem;

/// Coupled forward-backward benchmark adapted from Bender & Zhang: the
/// forward diffusion scales with the backward value, dX = sigma Y dB.
/// Parameters r = 0.1, sigma = 0.3, D = 0.1, T = 1, X_0 = (pi/2, ...),
/// terminal phi(x) = D sum_j sin(x_j) and exact solution
/// u(x, t) = exp(-r (T - t)) D sum_j sin(x_j).
///
/// The nonlinearity is h(x, t, y, z) = r y - (sigma^2 / 2) e^{-3r(T-t)} S(x)^3
/// with S(x) = D sum_j sin(x_j), the unique choice for which the stated
/// exact solution annihilates the residual.
#[derive(Debug, Clone)]
pub struct BzProblem {
    dim: usize,
    rate: f64,
    sigma: f64,
    dcoef: f64,
    horizon: f64,
    x0: Vec<f64>,
}

impl BzProblem {
    pub fn new(dim: usize) -> Self {
        Self::with_params(dim, 0.1, 0.3, 0.1, 1.0)
    }

    pub fn with_params(dim: usize, rate: f64, sigma: f64, dcoef: f64, horizon: f64) -> Self {
        Self { dim, rate, sigma, dcoef, horizon, x0: vec![FRAC_PI_2; dim] }
    }

    pub fn with_x0(mut self, x0: Vec<f64>) -> Self {
        assert_eq!(x0.len(), self.dim);
        self.x0 = x0;
        self
    }

    fn sine_sum(&self, x: &[f64]) -> f64 {
        self.dcoef * x.iter().map(|v| v.sin()).sum::<f64>()
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }
}

impl PdeProblem for BzProblem {
    fn name(&self) -> &'static str {
        "bz"
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn horizon(&self) -> f64 {
        self.horizon
    }

    fn initial_state(&self) -> &[f64] {
        &self.x0
    }

    fn is_coupled(&self) -> bool {
        true
    }

    fn drift(&self, _x: &[f64], _t: f64, out: &mut [f64]) {
        out.fill(0.0);
    }

    fn diffusion(&self, _x: &[f64], _t: f64, y: f64, out: &mut [f64]) {
        out.fill(0.0);
        for i in 0..self.dim {
            out[i * self.dim + i] = self.sigma * y;
        }
    }

    fn diffusion_dy(&self, _x: &[f64], _t: f64, _y: f64, out: &mut [f64]) {
        out.fill(0.0);
        for i in 0..self.dim {
            out[i * self.dim + i] = self.sigma;
        }
    }

    fn nonlinearity(&self, x: &[f64], t: f64, y: f64, _z: &[f64]) -> f64 {
        let s = self.sine_sum(x);
        let decay = (-3.0 * self.rate * (self.horizon - t)).exp();
        self.rate * y - 0.5 * self.sigma * self.sigma * decay * s * s * s
    }

    fn nonlinearity_dy(&self, _x: &[f64], _t: f64, _y: f64, _z: &[f64]) -> f64 {
        self.rate
    }

    fn nonlinearity_dz(&self, _x: &[f64], _t: f64, _y: f64, _z: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }

    fn terminal(&self, x: &[f64]) -> f64 {
        self.sine_sum(x)
    }

    fn terminal_grad(&self, x: &[f64], out: &mut [f64]) {
        for (o, v) in out.iter_mut().zip(x) {
            *o = self.dcoef * v.cos();
        }
    }

    fn exact_solution(&self, x: &[f64], t: f64, grad: &mut [f64]) -> Option<f64> {
        let e = (-self.rate * (self.horizon - t)).exp();
        for (g, v) in grad.iter_mut().zip(x) {
            *g = e * self.dcoef * v.cos();
        }
        Some(e * self.sine_sum(x))
    }

    fn has_exact(&self) -> bool {
        true
    }

    fn exact_smooth(&self) -> Option<std::sync::Arc<dyn crate::model::SmoothFn>> {
        Some(std::sync::Arc::new(BzExact::new(self.dim)))
    }
}

/// Exact Bender-Zhang solution as a smooth field.
#[derive(Debug, Clone)]
pub struct BzExact {
    dim: usize,
    rate: f64,
    dcoef: f64,
    horizon: f64,
}

impl BzExact {
    pub fn new(dim: usize) -> Self {
        let p = BzProblem::new(dim);
        Self { dim, rate: p.rate, dcoef: p.dcoef, horizon: p.horizon }
    }
}

impl SmoothFn for BzExact {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: &[f64], t: f64) -> f64 {
        (-self.rate * (self.horizon - t)).exp()
            * self.dcoef
            * x.iter().map(|v| v.sin()).sum::<f64>()
    }

    fn grad(&self, x: &[f64], t: f64, out: &mut [f64]) {
        let e = (-self.rate * (self.horizon - t)).exp();
        for (o, v) in out.iter_mut().zip(x) {
            *o = e * self.dcoef * v.cos();
        }
    }

    fn hess(&self, x: &[f64], t: f64, out: &mut [f64]) {
        let e = (-self.rate * (self.horizon - t)).exp();
        out.fill(0.0);
        for i in 0..self.dim {
            out[i * self.dim + i] = -e * self.dcoef * x[i].sin();
        }
    }

    fn time_deriv(&self, x: &[f64], t: f64) -> f64 {
        self.rate * self.value(x, t)
    }
}
