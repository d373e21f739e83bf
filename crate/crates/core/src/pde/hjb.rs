use std::collections::HashMap;
use std::sync::Mutex;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{CoreError, Result};
use crate::problem::PdeProblem;
use crate::rng::path_rng;

/// Hamilton-Jacobi-Bellman benchmark: dX = sigma dB, dY = |Z|^2 dt + sigma Z^T dB
/// with sigma = sqrt(2), T = 1, X_0 = 0 and terminal
/// phi(x) = ln(0.5 (1 + |x|^2)). No closed-form solution; the reference is
/// the log-transform Monte-Carlo formula `hjb_reference`.
#[derive(Debug, Clone)]
pub struct HjbProblem {
    dim: usize,
    sigma: f64,
    horizon: f64,
    x0: Vec<f64>,
}

impl HjbProblem {
    pub fn new(dim: usize) -> Self {
        Self { dim, sigma: 2.0f64.sqrt(), horizon: 1.0, x0: vec![0.0; dim] }
    }

    pub fn with_params(dim: usize, sigma: f64, horizon: f64) -> Self {
        Self { dim, sigma, horizon, x0: vec![0.0; dim] }
    }

    pub fn with_x0(mut self, x0: Vec<f64>) -> Self {
        assert_eq!(x0.len(), self.dim);
        self.x0 = x0;
        self
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }
}

impl PdeProblem for HjbProblem {
    fn name(&self) -> &'static str {
        "hjb"
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

    fn diffusion(&self, _x: &[f64], _t: f64, _y: f64, out: &mut [f64]) {
        out.fill(0.0);
        for i in 0..self.dim {
            out[i * self.dim + i] = self.sigma;
        }
    }

    fn nonlinearity(&self, _x: &[f64], _t: f64, _y: f64, z: &[f64]) -> f64 {
        z.iter().map(|v| v * v).sum()
    }

    fn nonlinearity_dy(&self, _x: &[f64], _t: f64, _y: f64, _z: &[f64]) -> f64 {
        0.0
    }

    fn nonlinearity_dz(&self, _x: &[f64], _t: f64, _y: f64, z: &[f64], out: &mut [f64]) {
        for (o, v) in out.iter_mut().zip(z) {
            *o = 2.0 * v;
        }
    }

    fn terminal(&self, x: &[f64]) -> f64 {
        let nsq: f64 = x.iter().map(|v| v * v).sum();
        (0.5 * (1.0 + nsq)).ln()
    }

    fn terminal_grad(&self, x: &[f64], out: &mut [f64]) {
        let nsq: f64 = x.iter().map(|v| v * v).sum();
        let scale = 2.0 / (1.0 + nsq);
        for (o, v) in out.iter_mut().zip(x) {
            *o = scale * v;
        }
    }

    fn exact_solution(&self, _x: &[f64], _t: f64, _grad: &mut [f64]) -> Option<f64> {
        None
    }

    fn has_exact(&self) -> bool {
        false
    }
}

/// Monte-Carlo value and its standard error.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct McEstimate {
    pub value: f64,
    pub std_error: f64,
}

/// Log-transform reference u(x, t) = -ln E[exp(-phi(x + sqrt(2(T-t)) xi))],
/// xi ~ N(0, I_d), estimated with `n_mc` draws. The standard error is the
/// delta-method propagation through the outer logarithm.
pub fn hjb_reference(
    problem: &HjbProblem,
    x: &[f64],
    t: f64,
    n_mc: usize,
    seed: u64,
) -> Result<McEstimate> {
    if n_mc == 0 {
        return Err(CoreError::Precondition("n_mc must be >= 1".into()));
    }
    let remaining = problem.horizon() - t;
    if remaining < 0.0 {
        return Err(CoreError::Precondition("t beyond horizon".into()));
    }
    if remaining == 0.0 {
        return Ok(McEstimate { value: problem.terminal(x), std_error: 0.0 });
    }
    let scale = (problem.sigma() * problem.sigma() * remaining).sqrt();
    let d = problem.dim();

    let chunk = 4096usize;
    let n_chunks = n_mc.div_ceil(chunk);
    let partials: Vec<(f64, f64)> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = path_rng(seed, c as u64);
            let lo = c * chunk;
            let hi = (lo + chunk).min(n_mc);
            let mut probe = vec![0.0; d];
            let mut acc = 0.0;
            let mut acc_sq = 0.0;
            for _ in lo..hi {
                for (p, xi) in probe.iter_mut().zip(x) {
                    let z: f64 = rng.sample(StandardNormal);
                    *p = xi + scale * z;
                }
                let v = (-problem.terminal(&probe)).exp();
                acc += v;
                acc_sq += v * v;
            }
            (acc, acc_sq)
        })
        .collect();
    let (sum, sum_sq) =
        partials.iter().fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));

    let n = n_mc as f64;
    let mean = sum / n;
    if !(mean.is_finite() && mean > 0.0) {
        return Err(CoreError::NonFinite { term: "hjb_reference_mean", t });
    }
    let var = (sum_sq / n - mean * mean).max(0.0);
    let se_mean = (var / n).sqrt();
    Ok(McEstimate { value: -mean.ln(), std_error: se_mean / mean })
}

/// Persistent cache of HJB reference values keyed by (x, t, n_mc, seed) so
/// repeated evaluations are deterministic and cheap. The key encodes the
/// exact f64 bits of every coordinate.
#[derive(Debug, Default)]
pub struct HjbReferenceCache {
    entries: Mutex<HashMap<String, McEstimate>>,
}

pub fn reference_key(x: &[f64], t: f64, n_mc: usize, seed: u64) -> String {
    use std::fmt::Write;
    let mut key = String::with_capacity(20 + 17 * x.len());
    for v in x {
        let _ = write!(key, "{:016x}-", v.to_bits());
    }
    let _ = write!(key, "t{:016x}-n{}-s{}", t.to_bits(), n_mc, seed);
    key
}

impl HjbReferenceCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_entries(entries: HashMap<String, McEstimate>) -> Self {
        Self { entries: Mutex::new(entries) }
    }

    pub fn get_or_compute(
        &self,
        problem: &HjbProblem,
        x: &[f64],
        t: f64,
        n_mc: usize,
        seed: u64,
    ) -> Result<McEstimate> {
        let key = reference_key(x, t, n_mc, seed);
        if let Some(hit) = self.entries.lock().unwrap().get(&key) {
            return Ok(*hit);
        }
        let est = hjb_reference(problem, x, t, n_mc, seed)?;
        self.entries.lock().unwrap().insert(key, est);
        Ok(est)
    }

    pub fn snapshot(&self) -> HashMap<String, McEstimate> {
        self.entries.lock().unwrap().clone()
    }

    pub fn len(&self) -> usize {
        self.entries.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
