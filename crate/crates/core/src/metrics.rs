use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{CoreError, Result};
use crate::rng::path_rng;

/// Relative L2 error sqrt(sum (ref - pred)^2 / sum ref^2).
pub fn rl2(reference: &[f64], predicted: &[f64]) -> Result<f64> {
    if reference.len() != predicted.len() {
        return Err(CoreError::Precondition(format!(
            "rl2 length mismatch: {} vs {}",
            reference.len(),
            predicted.len()
        )));
    }
    if reference.is_empty() {
        return Err(CoreError::Precondition("rl2 needs at least one point".into()));
    }
    let denom: f64 = reference.iter().map(|r| r * r).sum();
    if denom == 0.0 {
        return Err(CoreError::Precondition("rl2 reference is identically zero".into()));
    }
    let num: f64 = reference
        .iter()
        .zip(predicted)
        .map(|(r, p)| (r - p) * (r - p))
        .sum();
    Ok((num / denom).sqrt())
}

/// Monte-Carlo check of the Gaussian quadratic-form variance identity
/// E (Tr Q - w^T Q w)^2 = 2 ||Q||_F^2 for symmetric Q.
#[derive(Debug, Clone, Copy)]
pub struct QuadformCheck {
    pub mc_estimate: f64,
    pub analytic: f64,
    pub std_error: f64,
}

pub fn gaussian_quadform_variance_check(
    q: &[f64],
    dim: usize,
    n_samples: usize,
    seed: u64,
) -> Result<QuadformCheck> {
    if q.len() != dim * dim {
        return Err(CoreError::Precondition("Q must be d x d".into()));
    }
    if n_samples == 0 {
        return Err(CoreError::Precondition("n_samples must be >= 1".into()));
    }
    let scale = q.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    for i in 0..dim {
        for j in (i + 1)..dim {
            if (q[i * dim + j] - q[j * dim + i]).abs() > 1e-12 * scale {
                return Err(CoreError::Precondition(format!(
                    "Q must be symmetric (entries ({i},{j}) and ({j},{i}) differ)"
                )));
            }
        }
    }
    let trace: f64 = (0..dim).map(|i| q[i * dim + i]).sum();
    let frob_sq: f64 = q.iter().map(|v| v * v).sum();
    let analytic = 2.0 * frob_sq;

    // per-chunk substreams keep the estimate independent of thread count
    let chunk = 8192usize;
    let n_chunks = n_samples.div_ceil(chunk);
    let partials: Vec<(f64, f64)> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = path_rng(seed, c as u64);
            let lo = c * chunk;
            let hi = (lo + chunk).min(n_samples);
            let mut w = vec![0.0; dim];
            let mut acc = 0.0;
            let mut acc_sq = 0.0;
            for _ in lo..hi {
                for v in w.iter_mut() {
                    *v = rng.sample(StandardNormal);
                }
                let mut quad = 0.0;
                for i in 0..dim {
                    let row = &q[i * dim..(i + 1) * dim];
                    let dot: f64 = row.iter().zip(&w).map(|(a, b)| a * b).sum();
                    quad += w[i] * dot;
                }
                let v = (trace - quad) * (trace - quad);
                acc += v;
                acc_sq += v * v;
            }
            (acc, acc_sq)
        })
        .collect();
    let (sum, sum_sq) =
        partials.iter().fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));

    let n = n_samples as f64;
    let mean = sum / n;
    let var = (sum_sq / n - mean * mean).max(0.0);
    Ok(QuadformCheck { mc_estimate: mean, analytic, std_error: (var / n).sqrt() })
}
