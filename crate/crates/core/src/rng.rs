use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// SplitMix64 finalizer; used to derive independent seeds from (seed, index)
/// pairs without correlation between nearby indices.
pub fn mix_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// RNG for path `b` of the batch: a dedicated ChaCha stream so that the
/// draws of path `b` do not depend on the batch size.
pub fn path_rng(seed: u64, path: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path);
    rng
}

/// Standard-normal increments w_k ~ N(0, I_m) driving a batch of discrete
/// paths. Fully determined by `(seed, batch, steps, channels)`; path `b`
/// draws from its own substream, so growing the batch appends new paths
/// without reshuffling existing ones.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianIncrements {
    seed: u64,
    batch: usize,
    steps: usize,
    channels: usize,
    values: Vec<f64>,
}

impl GaussianIncrements {
    pub fn generate(seed: u64, batch: usize, steps: usize, channels: usize) -> Self {
        let mut values = vec![0.0; batch * steps * channels];
        for (b, chunk) in values.chunks_mut(steps * channels).enumerate() {
            let mut rng = path_rng(seed, b as u64);
            for v in chunk.iter_mut() {
                *v = rng.sample(StandardNormal);
            }
        }
        Self { seed, batch, steps, channels, values }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn batch(&self) -> usize {
        self.batch
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    /// Increment vector w_k for path `b`, step `k` (length = channels).
    pub fn w(&self, b: usize, k: usize) -> &[f64] {
        let start = (b * self.steps + k) * self.channels;
        &self.values[start..start + self.channels]
    }

    /// Coarsened increments over blocks of `factor` fine steps on the same
    /// Brownian path: w_coarse = sum(w_fine) / sqrt(factor).
    pub fn coarsen(&self, factor: usize) -> GaussianIncrements {
        assert!(factor >= 1 && self.steps % factor == 0);
        let steps = self.steps / factor;
        let scale = 1.0 / (factor as f64).sqrt();
        let mut values = vec![0.0; self.batch * steps * self.channels];
        for b in 0..self.batch {
            for k in 0..steps {
                for c in 0..self.channels {
                    let mut acc = 0.0;
                    for j in 0..factor {
                        acc += self.w(b, k * factor + j)[c];
                    }
                    values[(b * steps + k) * self.channels + c] = acc * scale;
                }
            }
        }
        GaussianIncrements { seed: self.seed, batch: self.batch, steps, channels: self.channels, values }
    }
}
