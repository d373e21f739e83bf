use crate::model::SmoothFn;
use crate::problem::PdeProblem;

/// One-dimensional linear-quadratic-regulator HJB instance used for the
/// loss-landscape studies: f = 0, g = sigma,
/// h(x, t, y, z) = z^2 / (4 r_c) - q x^2, phi(x) = q_T x^2.
///
/// The value function is u(x, t) = a(t) x^2 + c(t) with the Riccati ODE
/// a'(t) = a^2 / r_c - q, a(T) = q_T, and c'(t) = -sigma^2 a(t), c(T) = 0.
/// With the defaults q = r_c = q_T = 1 the Riccati solution is constant,
/// a(t) = 1, c(t) = sigma^2 (T - t).
#[derive(Debug, Clone)]
pub struct Lqr1dProblem {
    sigma: f64,
    q: f64,
    r_c: f64,
    q_terminal: f64,
    horizon: f64,
    x0: [f64; 1],
}

impl Default for Lqr1dProblem {
    fn default() -> Self {
        Self::with_params(2.0f64.sqrt(), 1.0, 1.0, 1.0, 1.0)
    }
}

impl Lqr1dProblem {
    pub fn with_params(sigma: f64, q: f64, r_c: f64, q_terminal: f64, horizon: f64) -> Self {
        assert!(q > 0.0 && r_c > 0.0 && q_terminal >= 0.0);
        Self { sigma, q, r_c, q_terminal, horizon, x0: [0.0] }
    }

    pub fn with_x0(mut self, x0: f64) -> Self {
        self.x0 = [x0];
        self
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Riccati coefficient a(t) in closed form. Writing s = (T - t) / r_c
    /// and omega = sqrt(q r_c), the solution of a' = a^2/r_c - q, a(T) = q_T
    /// is the Moebius combination
    ///   a(t) = omega (q_T cosh(omega s) + omega sinh(omega s))
    ///        / (omega cosh(omega s) + q_T sinh(omega s)),
    /// which degenerates to the constant a = omega when q_T = omega.
    pub fn riccati_a(&self, t: f64) -> f64 {
        let omega = (self.q * self.r_c).sqrt();
        if self.q_terminal == omega {
            return omega;
        }
        let s = (self.horizon - t) / self.r_c;
        let (sh, ch) = ((omega * s).sinh(), (omega * s).cosh());
        omega * (self.q_terminal * ch + omega * sh) / (omega * ch + self.q_terminal * sh)
    }

    /// da/dt of the closed form; equals a^2/r_c - q.
    pub fn riccati_a_dot(&self, t: f64) -> f64 {
        let a = self.riccati_a(t);
        a * a / self.r_c - self.q
    }

    /// Offset c(t) = sigma^2 r_c ln((omega cosh(omega s) + q_T sinh(omega s)) / omega),
    /// s = (T - t)/r_c; reduces to sigma^2 (T - t) in the degenerate case.
    pub fn offset_c(&self, t: f64) -> f64 {
        let omega = (self.q * self.r_c).sqrt();
        if self.q_terminal == omega {
            return self.sigma * self.sigma * omega * (self.horizon - t);
        }
        let s = (self.horizon - t) / self.r_c;
        let (sh, ch) = ((omega * s).sinh(), (omega * s).cosh());
        self.sigma * self.sigma * self.r_c * ((omega * ch + self.q_terminal * sh) / omega).ln()
    }

    pub fn offset_c_dot(&self, t: f64) -> f64 {
        -self.sigma * self.sigma * self.riccati_a(t)
    }
}

impl PdeProblem for Lqr1dProblem {
    fn name(&self) -> &'static str {
        "lqr1d"
    }

    fn dim(&self) -> usize {
        1
    }

    fn horizon(&self) -> f64 {
        self.horizon
    }

    fn initial_state(&self) -> &[f64] {
        &self.x0
    }

    fn drift(&self, _x: &[f64], _t: f64, out: &mut [f64]) {
        out[0] = 0.0;
    }

    fn diffusion(&self, _x: &[f64], _t: f64, _y: f64, out: &mut [f64]) {
        out[0] = self.sigma;
    }

    fn nonlinearity(&self, x: &[f64], _t: f64, _y: f64, z: &[f64]) -> f64 {
        z[0] * z[0] / (4.0 * self.r_c) - self.q * x[0] * x[0]
    }

    fn nonlinearity_dy(&self, _x: &[f64], _t: f64, _y: f64, _z: &[f64]) -> f64 {
        0.0
    }

    fn nonlinearity_dz(&self, _x: &[f64], _t: f64, _y: f64, z: &[f64], out: &mut [f64]) {
        out[0] = z[0] / (2.0 * self.r_c);
    }

    fn terminal(&self, x: &[f64]) -> f64 {
        self.q_terminal * x[0] * x[0]
    }

    fn terminal_grad(&self, x: &[f64], out: &mut [f64]) {
        out[0] = 2.0 * self.q_terminal * x[0];
    }

    fn exact_solution(&self, x: &[f64], t: f64, grad: &mut [f64]) -> Option<f64> {
        let a = self.riccati_a(t);
        grad[0] = 2.0 * a * x[0];
        Some(a * x[0] * x[0] + self.offset_c(t))
    }

    fn has_exact(&self) -> bool {
        true
    }

    fn exact_smooth(&self) -> Option<std::sync::Arc<dyn crate::model::SmoothFn>> {
        Some(std::sync::Arc::new(LqrExact::new(self.clone())))
    }
}

/// Exact LQR value function as a smooth field.
#[derive(Debug, Clone)]
pub struct LqrExact {
    problem: Lqr1dProblem,
}

impl LqrExact {
    pub fn new(problem: Lqr1dProblem) -> Self {
        Self { problem }
    }
}

impl SmoothFn for LqrExact {
    fn dim(&self) -> usize {
        1
    }

    fn value(&self, x: &[f64], t: f64) -> f64 {
        self.problem.riccati_a(t) * x[0] * x[0] + self.problem.offset_c(t)
    }

    fn grad(&self, x: &[f64], t: f64, out: &mut [f64]) {
        out[0] = 2.0 * self.problem.riccati_a(t) * x[0];
    }

    fn hess(&self, _x: &[f64], t: f64, out: &mut [f64]) {
        out[0] = 2.0 * self.problem.riccati_a(t);
    }

    fn time_deriv(&self, x: &[f64], t: f64) -> f64 {
        self.problem.riccati_a_dot(t) * x[0] * x[0] + self.problem.offset_c_dot(t)
    }
}
