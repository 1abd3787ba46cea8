//! Distribution functions.

use statrs::function::beta::beta_reg;
use statrs::function::erf::erfc;

/// Two-sided tail probability P(|T| ≥ |t|) for Student's t with `df`
/// degrees of freedom, via the regularized incomplete beta function.
pub fn t_two_sided(t: f64, df: f64) -> f64 {
    if t == 0.0 {
        return 1.0;
    }
    if !t.is_finite() {
        return 0.0;
    }
    beta_reg(df / 2.0, 0.5, df / (df + t * t)).clamp(0.0, 1.0)
}

/// Two-sided tail probability for a standard normal deviate.
pub fn normal_two_sided(z: f64) -> f64 {
    erfc(z.abs() / std::f64::consts::SQRT_2).clamp(0.0, 1.0)
}
