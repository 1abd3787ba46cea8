//! Quartiles, moments and transforms.

use super::{need, StatsError};

/// Linear-interpolation percentile of an ascending slice: index
/// h = (n-1)p, value x[⌊h⌋] + (h-⌊h⌋)(x[⌈h⌉]-x[⌊h⌋]).
pub fn percentile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Minimum, 25th, 50th, 75th percentiles and maximum.
pub fn quartiles(xs: &[f64]) -> Result<[f64; 5], StatsError> {
    need(xs, 4)?;
    let mut s = xs.to_vec();
    s.sort_by(f64::total_cmp);
    Ok([
        s[0],
        percentile_sorted(&s, 0.25),
        percentile_sorted(&s, 0.5),
        percentile_sorted(&s, 0.75),
        s[s.len() - 1],
    ])
}

pub fn mean(xs: &[f64]) -> Result<f64, StatsError> {
    if xs.is_empty() {
        return Err(StatsError::Empty);
    }
    Ok(xs.iter().sum::<f64>() / xs.len() as f64)
}

/// Sample variance with the n-1 denominator.
pub fn variance(xs: &[f64]) -> Result<f64, StatsError> {
    need(xs, 2)?;
    let m = mean(xs)?;
    Ok(xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64)
}

pub fn log_transform(xs: &[f64]) -> Result<Vec<f64>, StatsError> {
    if xs.is_empty() {
        return Err(StatsError::Empty);
    }
    if xs.iter().any(|&x| x <= 0.0) {
        return Err(StatsError::NonPositive);
    }
    Ok(xs.iter().map(|x| x.ln()).collect())
}
