//! Monte-Carlo law of `Σₖ λₖ Wₖ` with `Wₖ` i.i.d. `χ²_p`.
//!
//! Draws are produced in fixed-size chunks; chunk `c` uses a ChaCha8 stream
//! keyed by `(seed, c)`, so the sample does not depend on how chunks are
//! scheduled across threads. All draws for a given `(seed, mc, #λ, p)` share
//! the same underlying chi-square variates, which makes the quantile
//! positively homogeneous in `λ` and monotone in the level.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::ChiSquared;

use crate::error::{Error, Result};

const CHUNK: usize = 4096;

/// Smallest admissible Monte-Carlo sample size.
pub const MIN_MC: usize = 1000;

/// Default Monte-Carlo sample size for null quantiles.
pub const DEFAULT_MC: usize = 200_000;

fn validate(lambdas: &[f64], p: usize, mc: usize) -> Result<()> {
    if p == 0 {
        return Err(Error::InvalidArgument("chi-square degrees of freedom must be >= 1".into()));
    }
    if mc < MIN_MC {
        return Err(Error::InvalidArgument(format!(
            "need at least {MIN_MC} Monte-Carlo draws, got {mc}"
        )));
    }
    if let Some(l) = lambdas.iter().find(|l| !(**l >= 0.0 && l.is_finite())) {
        return Err(Error::InvalidArgument(format!("weights must be finite and >= 0, got {l}")));
    }
    Ok(())
}

fn fill_chunk(out: &mut [f64], chunk: usize, lambdas: &[f64], dist: &ChiSquared<f64>, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk as u64);
    for v in out.iter_mut() {
        let mut s = 0.0;
        for &l in lambdas {
            let w: f64 = rng.sample(dist);
            s += l * w;
        }
        *v = s;
    }
}

/// Raw draws in counter order.
pub fn weighted_chisq_draws(lambdas: &[f64], p: usize, mc: usize, seed: u64) -> Result<Vec<f64>> {
    validate(lambdas, p, mc)?;
    let mut draws = vec![0.0; mc];
    if lambdas.iter().all(|&l| l == 0.0) {
        return Ok(draws);
    }
    let dist = ChiSquared::new(p as f64).expect("p >= 1");
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        draws
            .par_chunks_mut(CHUNK)
            .enumerate()
            .for_each(|(c, out)| fill_chunk(out, c, lambdas, &dist, seed));
    }
    #[cfg(not(feature = "parallel"))]
    for (c, out) in draws.chunks_mut(CHUNK).enumerate() {
        fill_chunk(out, c, lambdas, &dist, seed);
    }
    Ok(draws)
}

/// A sorted Monte-Carlo sample from the weighted chi-square law.
#[derive(Debug, Clone)]
pub struct NullSample {
    sorted: Vec<f64>,
}

impl NullSample {
    pub fn new(lambdas: &[f64], p: usize, mc: usize, seed: u64) -> Result<Self> {
        let mut sorted = weighted_chisq_draws(lambdas, p, mc, seed)?;
        sorted.sort_by(f64::total_cmp);
        Ok(Self { sorted })
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn sorted(&self) -> &[f64] {
        &self.sorted
    }

    /// Empirical `1 − α` quantile (inverse of the empirical CDF); `α = 1`
    /// gives `0`, the lower end of the support.
    pub fn upper_quantile(&self, alpha: f64) -> Result<f64> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::InvalidArgument(format!("alpha must lie in (0, 1], got {alpha}")));
        }
        if alpha == 1.0 {
            return Ok(0.0);
        }
        let m = self.sorted.len();
        let k = ((1.0 - alpha) * m as f64).ceil() as usize;
        Ok(self.sorted[k.clamp(1, m) - 1])
    }

    /// Fraction of draws at or above `statistic`.
    pub fn exceedance(&self, statistic: f64) -> f64 {
        let below = self.sorted.partition_point(|&v| v < statistic);
        (self.sorted.len() - below) as f64 / self.sorted.len() as f64
    }
}

/// `1 − α` quantile of `Σ λₖ Wₖ`, `Wₖ ~ χ²_p`, from `mc` seeded draws.
pub fn weighted_chisq_quantile(
    lambdas: &[f64],
    p: usize,
    alpha: f64,
    mc: usize,
    seed: u64,
) -> Result<f64> {
    NullSample::new(lambdas, p, mc, seed)?.upper_quantile(alpha)
}
