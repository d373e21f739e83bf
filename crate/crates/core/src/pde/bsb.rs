use crate::model::SmoothFn;
use crate::problem::PdeProblem;

/// Black-Scholes-Barenblatt benchmark: dX = sigma diag(X) dB,
/// h(x, t, y, z) = r (y - z^T x), phi(x) = |x|^2, with sigma = 0.4,
/// r = 0.05, T = 1, X_0 = (1, 0.5, 1, 0.5, ...). Closed-form solution
/// u(x, t) = exp((r + sigma^2)(T - t)) |x|^2.
#[derive(Debug, Clone)]
pub struct BsbProblem {
    dim: usize,
    sigma: f64,
    rate: f64,
    horizon: f64,
    x0: Vec<f64>,
}

pub fn bsb_initial_state(dim: usize) -> Vec<f64> {
    (0..dim).map(|i| if i % 2 == 0 { 1.0 } else { 0.5 }).collect()
}

impl BsbProblem {
    pub fn new(dim: usize) -> Self {
        Self::with_params(dim, 0.4, 0.05, 1.0)
    }

    pub fn with_params(dim: usize, sigma: f64, rate: f64, horizon: f64) -> Self {
        Self { dim, sigma, rate, horizon, x0: bsb_initial_state(dim) }
    }

    pub fn with_x0(mut self, x0: Vec<f64>) -> Self {
        assert_eq!(x0.len(), self.dim);
        self.x0 = x0;
        self
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }
}

impl PdeProblem for BsbProblem {
    fn name(&self) -> &'static str {
        "bsb"
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

    fn drift(&self, _x: &[f64], _t: f64, out: &mut [f64]) {
        out.fill(0.0);
    }

    fn diffusion(&self, x: &[f64], _t: f64, _y: f64, out: &mut [f64]) {
        out.fill(0.0);
        for i in 0..self.dim {
            out[i * self.dim + i] = self.sigma * x[i];
        }
    }

    fn nonlinearity(&self, x: &[f64], _t: f64, y: f64, z: &[f64]) -> f64 {
        let zx: f64 = z.iter().zip(x).map(|(a, b)| a * b).sum();
        self.rate * (y - zx)
    }

    fn nonlinearity_dy(&self, _x: &[f64], _t: f64, _y: f64, _z: &[f64]) -> f64 {
        self.rate
    }

    fn nonlinearity_dz(&self, x: &[f64], _t: f64, _y: f64, _z: &[f64], out: &mut [f64]) {
        for (o, v) in out.iter_mut().zip(x) {
            *o = -self.rate * v;
        }
    }

    fn terminal(&self, x: &[f64]) -> f64 {
        x.iter().map(|v| v * v).sum()
    }

    fn terminal_grad(&self, x: &[f64], out: &mut [f64]) {
        for (o, v) in out.iter_mut().zip(x) {
            *o = 2.0 * v;
        }
    }

    fn exact_solution(&self, x: &[f64], t: f64, grad: &mut [f64]) -> Option<f64> {
        let e = ((self.rate + self.sigma * self.sigma) * (self.horizon - t)).exp();
        for (g, v) in grad.iter_mut().zip(x) {
            *g = 2.0 * e * v;
        }
        Some(e * x.iter().map(|v| v * v).sum::<f64>())
    }

    fn has_exact(&self) -> bool {
        true
    }

    fn exact_smooth(&self) -> Option<std::sync::Arc<dyn crate::model::SmoothFn>> {
        Some(std::sync::Arc::new(BsbExact::new(self.dim)))
    }
}

/// Exact BSB solution as a smooth field.
#[derive(Debug, Clone)]
pub struct BsbExact {
    dim: usize,
    alpha: f64,
    horizon: f64,
}

impl BsbExact {
    pub fn new(dim: usize) -> Self {
        let p = BsbProblem::new(dim);
        Self { dim, alpha: p.rate + p.sigma * p.sigma, horizon: p.horizon }
    }
}

impl SmoothFn for BsbExact {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: &[f64], t: f64) -> f64 {
        (self.alpha * (self.horizon - t)).exp() * x.iter().map(|v| v * v).sum::<f64>()
    }

    fn grad(&self, x: &[f64], t: f64, out: &mut [f64]) {
        let e = (self.alpha * (self.horizon - t)).exp();
        for (o, v) in out.iter_mut().zip(x) {
            *o = 2.0 * e * v;
        }
    }

    fn hess(&self, _x: &[f64], t: f64, out: &mut [f64]) {
        let e = (self.alpha * (self.horizon - t)).exp();
        out.fill(0.0);
        for i in 0..self.dim {
            out[i * self.dim + i] = 2.0 * e;
        }
    }

    fn time_deriv(&self, x: &[f64], t: f64) -> f64 {
        -self.alpha * self.value(x, t)
    }
}
