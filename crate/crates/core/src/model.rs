use std::sync::Arc;

/// Parametric candidate solution u_theta(x, t) with closed-form spatial and
/// temporal derivatives, plus the derivative of each of those quantities in
/// the parameters. All built-in families are linear in theta, but the
/// interface does not assume it.
pub trait ModelFamily: Sync {
    fn param_dim(&self) -> usize;
    fn dim(&self) -> usize;

    fn value(&self, theta: &[f64], x: &[f64], t: f64) -> f64;

    /// grad_x u, length d.
    fn grad_x(&self, theta: &[f64], x: &[f64], t: f64, out: &mut [f64]);

    /// hess_x u, row-major d x d (symmetric).
    fn hess_x(&self, theta: &[f64], x: &[f64], t: f64, out: &mut [f64]);

    fn time_deriv(&self, theta: &[f64], x: &[f64], t: f64) -> f64;

    /// d(u)/d(theta), length P.
    fn value_dtheta(&self, theta: &[f64], x: &[f64], t: f64, out: &mut [f64]);

    /// d(grad_x u)/d(theta), row-major P x d (row p = gradient of du/dtheta_p).
    fn grad_x_dtheta(&self, theta: &[f64], x: &[f64], t: f64, out: &mut [f64]);

    /// d(hess_x u)/d(theta), row-major P x d x d.
    fn hess_x_dtheta(&self, theta: &[f64], x: &[f64], t: f64, out: &mut [f64]);

    /// d(du/dt)/d(theta), length P.
    fn time_deriv_dtheta(&self, theta: &[f64], x: &[f64], t: f64, out: &mut [f64]);

    /// d(Tr(A hess_x u))/d(theta) for a fixed row-major d x d matrix `a`.
    /// Default goes through the full parameter Hessian; families override
    /// with a direct contraction.
    fn trace_hess_dtheta(&self, theta: &[f64], x: &[f64], t: f64, a: &[f64], out: &mut [f64]) {
        let p = self.param_dim();
        let d = self.dim();
        let mut full = vec![0.0; p * d * d];
        self.hess_x_dtheta(theta, x, t, &mut full);
        for q in 0..p {
            let block = &full[q * d * d..(q + 1) * d * d];
            out[q] = a.iter().zip(block).map(|(u, v)| u * v).sum();
        }
    }

    /// d(<grad_x u, v>)/d(theta) for a fixed vector `v`: the contraction the
    /// loss pipelines need, O(P) for the built-in families.
    fn grad_dot_dtheta(&self, theta: &[f64], x: &[f64], t: f64, v: &[f64], out: &mut [f64]) {
        let p = self.param_dim();
        let d = self.dim();
        let mut full = vec![0.0; p * d];
        self.grad_x_dtheta(theta, x, t, &mut full);
        for q in 0..p {
            out[q] = full[q * d..(q + 1) * d].iter().zip(v).map(|(a, b)| a * b).sum();
        }
    }
}

/// Smooth closed-form scalar field with all derivatives the losses need;
/// used to wrap exact PDE solutions.
pub trait SmoothFn: Sync + Send {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64], t: f64) -> f64;
    fn grad(&self, x: &[f64], t: f64, out: &mut [f64]);
    fn hess(&self, x: &[f64], t: f64, out: &mut [f64]);
    fn time_deriv(&self, x: &[f64], t: f64) -> f64;
}

/// One-parameter family u_theta = theta * u*(x, t) around a known exact
/// solution; drives the loss-landscape studies.
#[derive(Clone)]
pub struct ScaledExact {
    inner: Arc<dyn SmoothFn>,
}

impl ScaledExact {
    pub fn new(inner: Arc<dyn SmoothFn>) -> Self {
        Self { inner }
    }

    pub fn base(&self) -> &dyn SmoothFn {
        self.inner.as_ref()
    }
}

impl ModelFamily for ScaledExact {
    fn param_dim(&self) -> usize {
        1
    }

    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn value(&self, theta: &[f64], x: &[f64], t: f64) -> f64 {
        theta[0] * self.inner.value(x, t)
    }

    fn grad_x(&self, theta: &[f64], x: &[f64], t: f64, out: &mut [f64]) {
        self.inner.grad(x, t, out);
        for v in out.iter_mut() {
            *v *= theta[0];
        }
    }

    fn hess_x(&self, theta: &[f64], x: &[f64], t: f64, out: &mut [f64]) {
        self.inner.hess(x, t, out);
        for v in out.iter_mut() {
            *v *= theta[0];
        }
    }

    fn time_deriv(&self, theta: &[f64], x: &[f64], t: f64) -> f64 {
        theta[0] * self.inner.time_deriv(x, t)
    }

    fn value_dtheta(&self, _theta: &[f64], x: &[f64], t: f64, out: &mut [f64]) {
        out[0] = self.inner.value(x, t);
    }

    fn grad_x_dtheta(&self, _theta: &[f64], x: &[f64], t: f64, out: &mut [f64]) {
        self.inner.grad(x, t, out);
    }

    fn hess_x_dtheta(&self, _theta: &[f64], x: &[f64], t: f64, out: &mut [f64]) {
        self.inner.hess(x, t, out);
    }

    fn time_deriv_dtheta(&self, _theta: &[f64], x: &[f64], t: f64, out: &mut [f64]) {
        out[0] = self.inner.time_deriv(x, t);
    }

    fn trace_hess_dtheta(&self, _theta: &[f64], x: &[f64], t: f64, a: &[f64], out: &mut [f64]) {
        let d = self.dim();
        let mut stack = [0.0; 144];
        if d * d <= stack.len() {
            let h = &mut stack[..d * d];
            self.inner.hess(x, t, h);
            out[0] = a.iter().zip(h.iter()).map(|(u, v)| u * v).sum();
        } else {
            let mut h = vec![0.0; d * d];
            self.inner.hess(x, t, &mut h);
            out[0] = a.iter().zip(&h).map(|(u, v)| u * v).sum();
        }
    }

    fn grad_dot_dtheta(&self, _theta: &[f64], x: &[f64], t: f64, v: &[f64], out: &mut [f64]) {
        let d = self.dim();
        let mut stack = [0.0; 16];
        if d <= stack.len() {
            let g = &mut stack[..d];
            self.inner.grad(x, t, g);
            out[0] = g.iter().zip(v).map(|(a, b)| a * b).sum();
        } else {
            let mut g = vec![0.0; d];
            self.inner.grad(x, t, &mut g);
            out[0] = g.iter().zip(v).map(|(a, b)| a * b).sum();
        }
    }
}

/// Linear-in-parameters family over a fixed feature map: the spatial basis
/// {1, |x|^2, x_1, ..., x_d, sum_j sin(x_j)} crossed with the temporal basis
/// {1, (T-t), (T-t)^2, (T-t)^3}. Parameter layout is base-major: feature
/// (i, j) sits at index i * 4 + j.
#[derive(Debug, Clone)]
pub struct FeatureLinear {
    dim: usize,
    horizon: f64,
}

pub const TEMPORAL_DEGREE: usize = 4;

impl FeatureLinear {
    pub fn new(dim: usize, horizon: f64) -> Self {
        assert!(dim >= 1 && horizon > 0.0);
        Self { dim, horizon }
    }

    fn n_base(&self) -> usize {
        self.dim + 3
    }

    /// w_i = sum_j theta_ij s^j for base feature i (Horner in s = T - t).
    #[inline]
    fn horner(theta: &[f64], i: usize, s: f64) -> f64 {
        let th = &theta[i * TEMPORAL_DEGREE..(i + 1) * TEMPORAL_DEGREE];
        ((th[3] * s + th[2]) * s + th[1]) * s + th[0]
    }

    /// d/dt of the temporal polynomial for base feature i.
    #[inline]
    fn horner_dot(theta: &[f64], i: usize, s: f64) -> f64 {
        let th = &theta[i * TEMPORAL_DEGREE..(i + 1) * TEMPORAL_DEGREE];
        -((3.0 * th[3] * s + 2.0 * th[2]) * s + th[1])
    }

    fn spow(&self, t: f64) -> [f64; TEMPORAL_DEGREE] {
        let s = self.horizon - t;
        [1.0, s, s * s, s * s * s]
    }
}

impl ModelFamily for FeatureLinear {
    fn param_dim(&self) -> usize {
        self.n_base() * TEMPORAL_DEGREE
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, theta: &[f64], x: &[f64], t: f64) -> f64 {
        let s = self.horizon - t;
        let d = self.dim;
        let mut acc = Self::horner(theta, 0, s);
        acc += Self::horner(theta, 1, s) * x.iter().map(|v| v * v).sum::<f64>();
        for (j, &xj) in x.iter().enumerate() {
            acc += Self::horner(theta, 2 + j, s) * xj;
        }
        acc + Self::horner(theta, 2 + d, s) * x.iter().map(|v| v.sin()).sum::<f64>()
    }

    fn grad_x(&self, theta: &[f64], x: &[f64], t: f64, out: &mut [f64]) {
        let s = self.horizon - t;
        let w_norm = Self::horner(theta, 1, s);
        let w_sin = Self::horner(theta, 2 + self.dim, s);
        for j in 0..self.dim {
            out[j] = 2.0 * w_norm * x[j] + Self::horner(theta, 2 + j, s) + w_sin * x[j].cos();
        }
    }

    fn hess_x(&self, theta: &[f64], x: &[f64], t: f64, out: &mut [f64]) {
        let s = self.horizon - t;
        let w_norm = Self::horner(theta, 1, s);
        let w_sin = Self::horner(theta, 2 + self.dim, s);
        out.fill(0.0);
        for j in 0..self.dim {
            out[j * self.dim + j] = 2.0 * w_norm - w_sin * x[j].sin();
        }
    }

    fn time_deriv(&self, theta: &[f64], x: &[f64], t: f64) -> f64 {
        let s = self.horizon - t;
        let d = self.dim;
        let mut acc = Self::horner_dot(theta, 0, s);
        acc += Self::horner_dot(theta, 1, s) * x.iter().map(|v| v * v).sum::<f64>();
        for (j, &xj) in x.iter().enumerate() {
            acc += Self::horner_dot(theta, 2 + j, s) * xj;
        }
        acc + Self::horner_dot(theta, 2 + d, s) * x.iter().map(|v| v.sin()).sum::<f64>()
    }

    fn value_dtheta(&self, _theta: &[f64], x: &[f64], t: f64, out: &mut [f64]) {
        let d = self.dim;
        let sp = self.spow(t);
        let normsq: f64 = x.iter().map(|v| v * v).sum();
        let sumsin: f64 = x.iter().map(|v| v.sin()).sum();
        for (j, s) in sp.iter().enumerate() {
            out[j] = *s;
            out[TEMPORAL_DEGREE + j] = normsq * s;
            for k in 0..d {
                out[(2 + k) * TEMPORAL_DEGREE + j] = x[k] * s;
            }
            out[(2 + d) * TEMPORAL_DEGREE + j] = sumsin * s;
        }
    }

    fn grad_x_dtheta(&self, _theta: &[f64], x: &[f64], t: f64, out: &mut [f64]) {
        let d = self.dim;
        let sp = self.spow(t);
        out.fill(0.0);
        // base 1 has zero gradient; |x|^2 -> 2x; coords -> e_j; sum sin -> cos
        for (j, s) in sp.iter().enumerate() {
            for k in 0..d {
                out[(1 * TEMPORAL_DEGREE + j) * d + k] = 2.0 * x[k] * s;
                out[((2 + k) * TEMPORAL_DEGREE + j) * d + k] = *s;
                out[((2 + d) * TEMPORAL_DEGREE + j) * d + k] = x[k].cos() * s;
            }
        }
    }

    fn hess_x_dtheta(&self, _theta: &[f64], x: &[f64], t: f64, out: &mut [f64]) {
        let d = self.dim;
        let sp = self.spow(t);
        out.fill(0.0);
        for (j, s) in sp.iter().enumerate() {
            for k in 0..d {
                out[(1 * TEMPORAL_DEGREE + j) * d * d + k * d + k] = 2.0 * s;
                out[((2 + d) * TEMPORAL_DEGREE + j) * d * d + k * d + k] = -x[k].sin() * s;
            }
        }
    }

    fn time_deriv_dtheta(&self, _theta: &[f64], x: &[f64], t: f64, out: &mut [f64]) {
        let d = self.dim;
        let s = self.horizon - t;
        let dsp = [0.0, -1.0, -2.0 * s, -3.0 * s * s];
        let normsq: f64 = x.iter().map(|v| v * v).sum();
        let sumsin: f64 = x.iter().map(|v| v.sin()).sum();
        for (j, ds) in dsp.iter().enumerate() {
            out[j] = *ds;
            out[TEMPORAL_DEGREE + j] = normsq * ds;
            for k in 0..d {
                out[(2 + k) * TEMPORAL_DEGREE + j] = x[k] * ds;
            }
            out[(2 + d) * TEMPORAL_DEGREE + j] = sumsin * ds;
        }
    }

    fn trace_hess_dtheta(&self, _theta: &[f64], x: &[f64], t: f64, a: &[f64], out: &mut [f64]) {
        let d = self.dim;
        let sp = self.spow(t);
        out.fill(0.0);
        let tr_a: f64 = (0..d).map(|k| a[k * d + k]).sum();
        let tr_a_sin: f64 = (0..d).map(|k| -a[k * d + k] * x[k].sin()).sum();
        for (j, s) in sp.iter().enumerate() {
            out[1 * TEMPORAL_DEGREE + j] = 2.0 * tr_a * s;
            out[(2 + d) * TEMPORAL_DEGREE + j] = tr_a_sin * s;
        }
    }

    fn grad_dot_dtheta(&self, _theta: &[f64], x: &[f64], t: f64, v: &[f64], out: &mut [f64]) {
        let d = self.dim;
        let sp = self.spow(t);
        out.fill(0.0);
        let xv: f64 = x.iter().zip(v).map(|(a, b)| a * b).sum();
        let cv: f64 = x.iter().zip(v).map(|(a, b)| a.cos() * b).sum();
        for (j, s) in sp.iter().enumerate() {
            out[1 * TEMPORAL_DEGREE + j] = 2.0 * xv * s;
            for k in 0..d {
                out[(2 + k) * TEMPORAL_DEGREE + j] = v[k] * s;
            }
            out[(2 + d) * TEMPORAL_DEGREE + j] = cv * s;
        }
    }
}
