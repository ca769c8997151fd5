//! Reproducible random number streams and norm-weighted index sampling.
//!
//! Every randomized component in this crate draws from an [`RngStream`]
//! addressed by `(master_seed, stream_id)`. Streams are cheap to derive, and
//! the mapping from address to draw sequence is pinned by the constants in
//! this file, so any trial of any experiment can be replayed bit-for-bit
//! without storing generator state.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SamplingError {
    #[error("all weights are zero; the distribution has empty support")]
    AllZeroWeights,
    #[error("weight {value} at index {index} is negative or non-finite")]
    BadWeight { index: usize, value: f64 },
}

/// splitmix64 step: advances `state` by the golden-gamma constant and returns
/// a mixed output. Used only to expand seeds into xoshiro state.
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

const GOLDEN_GAMMA: u64 = 0x9e3779b97f4a7c15;

/// A splittable pseudorandom stream: xoshiro256** seeded via splitmix64 from
/// `(master_seed, stream_id)`.
///
/// Integer and uniform draws are computed with exact integer/IEEE arithmetic
/// only, so identical addresses produce bit-identical sequences on every
/// platform. Gaussian draws additionally go through `ln`/`sqrt`; `sqrt` is
/// correctly rounded everywhere, and any two runs against the same libm are
/// byte-identical.
#[derive(Debug, Clone)]
pub struct RngStream {
    master_seed: u64,
    stream_id: u64,
    state: [u64; 4],
    gaussian_spare: Option<f64>,
}

impl RngStream {
    pub fn new(master_seed: u64, stream_id: u64) -> Self {
        let mut sm = master_seed.wrapping_add(stream_id.wrapping_mul(GOLDEN_GAMMA));
        let mut state = [0u64; 4];
        for s in &mut state {
            *s = splitmix64(&mut sm);
        }
        // xoshiro must not start from the all-zero state; unreachable for
        // splitmix output in practice, but cheap to guard.
        if state == [0, 0, 0, 0] {
            state[0] = GOLDEN_GAMMA;
        }
        Self {
            master_seed,
            stream_id,
            state,
            gaussian_spare: None,
        }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// xoshiro256** step.
    pub fn next_u64(&mut self) -> u64 {
        let s = &mut self.state;
        let result = s[1].wrapping_mul(5).rotate_left(7).wrapping_mul(9);
        let t = s[1] << 17;
        s[2] ^= s[0];
        s[3] ^= s[1];
        s[1] ^= s[2];
        s[0] ^= s[3];
        s[2] ^= t;
        s[3] = s[3].rotate_left(45);
        result
    }

    /// Uniform draw in `[0, 1)` using the top 53 bits.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal draw via the Marsaglia polar method; the rejected
    /// second value of each accepted pair is cached.
    pub fn next_gaussian(&mut self) -> f64 {
        if let Some(g) = self.gaussian_spare.take() {
            return g;
        }
        loop {
            let u = 2.0 * self.next_f64() - 1.0;
            let v = 2.0 * self.next_f64() - 1.0;
            let s = u * u + v * v;
            if s > 0.0 && s < 1.0 {
                let f = (-2.0 * s.ln() / s).sqrt();
                self.gaussian_spare = Some(v * f);
                return u * f;
            }
        }
    }
}

/// Derives the substream for one addressed unit of work (a trial, a matrix
/// fill, ...) of the experiment keyed by `master_seed`.
pub fn derive_stream(master_seed: u64, stream_id: u64) -> RngStream {
    RngStream::new(master_seed, stream_id)
}

/// Discrete distribution over `0..weights.len()` with probabilities
/// proportional to the weights. Zero-weight indices are excluded from the
/// support and are never returned by [`DiscreteDistribution::sample`].
#[derive(Debug, Clone)]
pub struct DiscreteDistribution {
    weights: Vec<f64>,
    cumulative: Vec<f64>,
    support: Vec<usize>,
    total: f64,
}

impl DiscreteDistribution {
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    /// Probability assigned to index `i`.
    pub fn probability(&self, i: usize) -> f64 {
        self.weights[i] / self.total
    }

    /// Inverse-CDF sampling by binary search on the cumulative sums. On the
    /// (measure-zero) event that the scaled uniform lands exactly on a
    /// boundary, the tie resolves toward the smaller index.
    pub fn sample(&self, rng: &mut RngStream) -> usize {
        let t = rng.next_f64() * self.total;
        let idx = self.cumulative.partition_point(|&c| c <= t);
        if idx >= self.weights.len() {
            // t == total after rounding; clamp to the last supported index.
            *self.support.last().expect("support is non-empty")
        } else {
            idx
        }
    }
}

/// Builds the sampling distribution from nonnegative weights (typically
/// squared column or row norms).
pub fn build_distribution(weights: &[f64]) -> Result<DiscreteDistribution, SamplingError> {
    let mut cumulative = Vec::with_capacity(weights.len());
    let mut support = Vec::new();
    let mut acc = 0.0;
    for (i, &w) in weights.iter().enumerate() {
        if !w.is_finite() || w < 0.0 {
            return Err(SamplingError::BadWeight { index: i, value: w });
        }
        if w > 0.0 {
            support.push(i);
        }
        acc += w;
        cumulative.push(acc);
    }
    if support.is_empty() || acc <= 0.0 {
        return Err(SamplingError::AllZeroWeights);
    }
    Ok(DiscreteDistribution {
        weights: weights.to_vec(),
        cumulative,
        support,
        total: acc,
    })
}
