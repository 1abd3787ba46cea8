//! Seeded random draws. ChaCha8 stream seeded from a u64; normal deviates by
//! the Ziggurat sampler in `rand_distr`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::StatsError;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_normal(n: i64, seed: u64) -> Result<Vec<f64>, StatsError> {
    if n < 1 {
        return Err(StatsError::BadN(n));
    }
    let mut r = rng(seed);
    Ok((0..n).map(|_| r.sample(StandardNormal)).collect())
}
