/// A parabolic terminal-value problem and its forward-backward SDE data.
///
/// The PDE residual reads
///   R[u] = du/dt + 1/2 Tr(H hess u) + <f, grad u> - h(x, t, u, grad u)
/// with H = g g^T, terminal condition u(x, T) = phi(x), and the forward
/// process dX = f dt + g dB started at `initial_state`.
///
/// `diffusion` receives the backward value `y` so that coupled problems
/// (forward diffusion reading Y, as in the Bender-Zhang benchmark) fit the
/// same interface; uncoupled problems simply ignore it.
pub trait PdeProblem: Sync {
    fn name(&self) -> &'static str;

    /// Spatial dimension d.
    fn dim(&self) -> usize;

    /// Number of noise channels m (m = d for all built-in problems).
    fn noise_dim(&self) -> usize {
        self.dim()
    }

    /// Terminal time T.
    fn horizon(&self) -> f64;

    /// Initial state x0 (point mass).
    fn initial_state(&self) -> &[f64];

    /// Whether the forward dynamics read the backward value Y.
    fn is_coupled(&self) -> bool {
        false
    }

    /// Drift f(x, t), written into `out` (length d).
    fn drift(&self, x: &[f64], t: f64, out: &mut [f64]);

    /// Diffusion g(x, t[, y]), written row-major into `out` (d x m).
    fn diffusion(&self, x: &[f64], t: f64, y: f64, out: &mut [f64]);

    /// dg/dy for coupled problems, row-major d x m; zero by default.
    fn diffusion_dy(&self, _x: &[f64], _t: f64, _y: f64, out: &mut [f64]) {
        out.fill(0.0);
    }

    /// Nonlinearity h(x, t, y, z).
    fn nonlinearity(&self, x: &[f64], t: f64, y: f64, z: &[f64]) -> f64;

    /// dh/dy.
    fn nonlinearity_dy(&self, x: &[f64], t: f64, y: f64, z: &[f64]) -> f64;

    /// dh/dz, written into `out` (length d).
    fn nonlinearity_dz(&self, x: &[f64], t: f64, y: f64, z: &[f64], out: &mut [f64]);

    /// Terminal condition phi(x).
    fn terminal(&self, x: &[f64]) -> f64;

    /// Terminal gradient grad phi(x), written into `out` (length d).
    fn terminal_grad(&self, x: &[f64], out: &mut [f64]);

    /// Closed-form solution u*(x, t) and its spatial gradient, when known.
    /// Returns the value and fills `grad`; `None` when only a Monte-Carlo
    /// reference exists (HJB).
    fn exact_solution(&self, x: &[f64], t: f64, grad: &mut [f64]) -> Option<f64>;

    fn has_exact(&self) -> bool;

    /// Exact solution as a smooth field with all higher derivatives; used to
    /// drive forward sampling on coupled problems and to build ScaledExact
    /// models.
    fn exact_smooth(&self) -> Option<std::sync::Arc<dyn crate::model::SmoothFn>> {
        None
    }
}

/// Wrapper shifting the nonlinearity by a constant: h -> h - offset, so the
/// residual of any candidate becomes R[u] + offset. Wrapping a problem whose
/// exact solution is known produces a model with exactly constant residual,
/// the construction behind the accumulation-identity checks.
pub struct OffsetNonlinearity<'a> {
    pub inner: &'a dyn PdeProblem,
    pub offset: f64,
}

impl<'a> PdeProblem for OffsetNonlinearity<'a> {
    fn name(&self) -> &'static str {
        "offset"
    }

    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn noise_dim(&self) -> usize {
        self.inner.noise_dim()
    }

    fn horizon(&self) -> f64 {
        self.inner.horizon()
    }

    fn initial_state(&self) -> &[f64] {
        self.inner.initial_state()
    }

    fn is_coupled(&self) -> bool {
        self.inner.is_coupled()
    }

    fn drift(&self, x: &[f64], t: f64, out: &mut [f64]) {
        self.inner.drift(x, t, out);
    }

    fn diffusion(&self, x: &[f64], t: f64, y: f64, out: &mut [f64]) {
        self.inner.diffusion(x, t, y, out);
    }

    fn diffusion_dy(&self, x: &[f64], t: f64, y: f64, out: &mut [f64]) {
        self.inner.diffusion_dy(x, t, y, out);
    }

    fn nonlinearity(&self, x: &[f64], t: f64, y: f64, z: &[f64]) -> f64 {
        self.inner.nonlinearity(x, t, y, z) - self.offset
    }

    fn nonlinearity_dy(&self, x: &[f64], t: f64, y: f64, z: &[f64]) -> f64 {
        self.inner.nonlinearity_dy(x, t, y, z)
    }

    fn nonlinearity_dz(&self, x: &[f64], t: f64, y: f64, z: &[f64], out: &mut [f64]) {
        self.inner.nonlinearity_dz(x, t, y, z, out);
    }

    fn terminal(&self, x: &[f64]) -> f64 {
        self.inner.terminal(x)
    }

    fn terminal_grad(&self, x: &[f64], out: &mut [f64]) {
        self.inner.terminal_grad(x, out);
    }

    fn exact_solution(&self, x: &[f64], t: f64, grad: &mut [f64]) -> Option<f64> {
        self.inner.exact_solution(x, t, grad)
    }

    fn has_exact(&self) -> bool {
        self.inner.has_exact()
    }

    fn exact_smooth(&self) -> Option<std::sync::Arc<dyn crate::model::SmoothFn>> {
        self.inner.exact_smooth()
    }
}

/// H = g g^T, row-major d x d, from a row-major d x m diffusion.
pub fn gram(g: &[f64], dim: usize, channels: usize, out: &mut [f64]) {
    debug_assert_eq!(g.len(), dim * channels);
    debug_assert_eq!(out.len(), dim * dim);
    for i in 0..dim {
        for j in 0..dim {
            let mut acc = 0.0;
            for c in 0..channels {
                acc += g[i * channels + c] * g[j * channels + c];
            }
            out[i * dim + j] = acc;
        }
    }
}

/// Matrix-vector product out = g w for a row-major d x m matrix.
pub fn matvec(g: &[f64], dim: usize, channels: usize, w: &[f64], out: &mut [f64]) {
    debug_assert_eq!(w.len(), channels);
    for i in 0..dim {
        let row = &g[i * channels..(i + 1) * channels];
        out[i] = row.iter().zip(w).map(|(a, b)| a * b).sum();
    }
}

/// Frobenius inner product Tr(A^T B) of two row-major d x d matrices;
/// equals Tr(A B) when either argument is symmetric.
pub fn trace_product(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
