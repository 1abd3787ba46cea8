//! Hypothesis tests, multiple-comparison correction and odds ratios.

use super::descriptive::{mean, variance};
use super::dist::{normal_two_sided, t_two_sided};
use super::{need, StatsError};

/// Largest sample size for which Mann-Whitney p-values are exact.
pub const MW_EXACT_MAX: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WelchResult {
    pub t: f64,
    pub df: f64,
    pub p_value: f64,
}

fn same_len(x: &[f64], y: &[f64]) -> Result<(), StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    Ok(())
}

/// Pearson r with a two-sided p-value from t = r√((n-2)/(1-r²)).
pub fn pearson(x: &[f64], y: &[f64]) -> Result<TestResult, StatsError> {
    same_len(x, y)?;
    need(x, 3)?;
    let (mx, my) = (mean(x)?, mean(y)?);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(StatsError::ZeroVariance);
    }
    let r = (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0);
    let df = (x.len() - 2) as f64;
    let p = if r.abs() == 1.0 {
        0.0
    } else {
        t_two_sided(r * (df / (1.0 - r * r)).sqrt(), df)
    };
    Ok(TestResult {
        statistic: r,
        p_value: p,
    })
}

/// 1-based ranks with ties sharing their mean rank.
pub fn midranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Number of ways to arrange n x's and m y's with exactly u (x > y) pairs,
/// for every u in 0..=n·m.
pub fn mw_counts(n: usize, m: usize) -> Vec<u64> {
    // table[i][j] holds the count vector for (i, j)
    let mut table: Vec<Vec<Vec<u64>>> = vec![vec![Vec::new(); m + 1]; n + 1];
    for i in 0..=n {
        for j in 0..=m {
            let mut c = vec![0u64; i * j + 1];
            if i == 0 || j == 0 {
                c[0] = 1;
            } else {
                // the largest element is either an x (beats all j y's) or a y
                for (u, slot) in c.iter_mut().enumerate() {
                    if u >= j {
                        *slot += table[i - 1][j].get(u - j).copied().unwrap_or(0);
                    }
                    *slot += table[i][j - 1].get(u).copied().unwrap_or(0);
                }
            }
            table[i][j] = c;
        }
    }
    std::mem::take(&mut table[n][m])
}

/// Mann-Whitney U test, two-sided. U is min(U_x, U_y).
pub fn mann_whitney(x: &[f64], y: &[f64]) -> Result<TestResult, StatsError> {
    if x.is_empty() || y.is_empty() {
        return Err(StatsError::Empty);
    }
    let (n, m) = (x.len(), y.len());
    let pooled: Vec<f64> = x.iter().chain(y).copied().collect();
    let ranks = midranks(&pooled);
    let r1: f64 = ranks[..n].iter().sum();
    let ux = r1 - (n * (n + 1)) as f64 / 2.0;
    let uy = (n * m) as f64 - ux;
    let u = ux.min(uy);

    let mut sorted = pooled.clone();
    sorted.sort_by(f64::total_cmp);
    let mut tie_term = 0.0;
    let mut has_ties = false;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j + 1 < sorted.len() && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        if t > 1.0 {
            has_ties = true;
            tie_term += t * t * t - t;
        }
        i = j + 1;
    }

    let p = if n.max(m) <= MW_EXACT_MAX && !has_ties {
        let counts = mw_counts(n, m);
        let total: u64 = counts.iter().sum();
        let tail: u64 = counts[..=u as usize].iter().sum();
        ((2 * tail) as f64 / total as f64).min(1.0)
    } else {
        let big_n = (n + m) as f64;
        let mu = (n * m) as f64 / 2.0;
        let var = (n * m) as f64 / 12.0 * ((big_n + 1.0) - tie_term / (big_n * (big_n - 1.0)));
        if var <= 0.0 {
            1.0
        } else {
            let z = ((u - mu).abs() - 0.5).max(0.0) / var.sqrt();
            normal_two_sided(z)
        }
    };
    Ok(TestResult {
        statistic: u,
        p_value: p,
    })
}

/// Welch's unequal-variance t-test with Welch–Satterthwaite degrees of freedom.
pub fn welch_t_test(x: &[f64], y: &[f64]) -> Result<WelchResult, StatsError> {
    need(x, 2)?;
    need(y, 2)?;
    let (vx, vy) = (variance(x)? / x.len() as f64, variance(y)? / y.len() as f64);
    if vx == 0.0 && vy == 0.0 {
        return Err(StatsError::ZeroVariance);
    }
    let t = (mean(x)? - mean(y)?) / (vx + vy).sqrt();
    let df = (vx + vy).powi(2) / (vx * vx / (x.len() - 1) as f64 + vy * vy / (y.len() - 1) as f64);
    Ok(WelchResult {
        t,
        df,
        p_value: t_two_sided(t, df),
    })
}

/// Holm step-down adjusted p-values, in input order.
pub fn holm_correct(pvals: &[f64]) -> Result<Vec<f64>, StatsError> {
    if let Some(&bad) = pvals.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(StatsError::OutOfRange(bad));
    }
    let m = pvals.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| pvals[a].total_cmp(&pvals[b]));
    let mut out = vec![0.0; m];
    let mut running = 0.0f64;
    for (rank, &i) in order.iter().enumerate() {
        let adj = ((m - rank) as f64 * pvals[i]).min(1.0);
        running = running.max(adj);
        out[i] = running;
    }
    Ok(out)
}

/// Haldane-smoothed odds ratio of one category between two groups with the
/// given totals.
pub fn odds_ratio_one(a: f64, b: f64, total_a: f64, total_b: f64) -> f64 {
    ((a + 0.5) / (total_a - a + 0.5)) / ((b + 0.5) / (total_b - b + 0.5))
}

/// Per-category odds ratios; the group totals are the sums of the counts.
pub fn odds_ratio(a: &[f64], b: &[f64]) -> Result<Vec<f64>, StatsError> {
    same_len(a, b)?;
    let (ta, tb): (f64, f64) = (a.iter().sum(), b.iter().sum());
    if ta <= 0.0 || tb <= 0.0 {
        return Err(StatsError::ZeroTotal);
    }
    Ok(a.iter().zip(b).map(|(x, y)| odds_ratio_one(*x, *y, ta, tb)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn pearson_perfect() {
        assert_eq!(pearson(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]).unwrap().statistic, 1.0);
        assert_eq!(pearson(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap().statistic, -1.0);
        assert_eq!(
            pearson(&[1.0, 1.0, 1.0], &[3.0, 2.0, 1.0]).unwrap_err(),
            StatsError::ZeroVariance
        );
        assert_eq!(
            pearson(&[1.0, 2.0], &[3.0, 2.0]).unwrap_err(),
            StatsError::TooFew { need: 3, got: 2 }
        );
        assert!(matches!(
            pearson(&[1.0, 2.0, 3.0], &[3.0, 2.0]),
            Err(StatsError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn mann_whitney_separated() {
        let r = mann_whitney(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_value, 0.1);
        let same = mann_whitney(&[1.0, 2.0, 3.0, 4.0], &[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert!(same.p_value >= 0.99);
        assert_eq!(mann_whitney(&[], &[1.0]).unwrap_err(), StatsError::Empty);
    }

    #[test]
    fn counts_sum_to_binomial() {
        let c = mw_counts(3, 3);
        assert_eq!(c.iter().sum::<u64>(), 20);
        assert_eq!(c, vec![1, 1, 2, 3, 3, 3, 3, 2, 1, 1]);
    }

    #[test]
    fn welch_cases() {
        let same = welch_t_test(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(same.t, 0.0);
        assert_eq!(same.p_value, 1.0);
        let shifted = welch_t_test(&[1.0, 2.0, 3.0], &[101.0, 102.0, 103.0]).unwrap();
        assert!(shifted.p_value < 0.01);
        // equal variances and sizes: df = 2(n-1)
        assert!((shifted.df - 4.0).abs() < 1e-12);
    }

    #[test]
    fn holm_cases() {
        assert_eq!(holm_correct(&[0.01, 0.04, 0.03]).unwrap(), vec![0.03, 0.06, 0.06]);
        assert_eq!(holm_correct(&[0.0, 0.0]).unwrap(), vec![0.0, 0.0]);
        assert_eq!(holm_correct(&[0.3]).unwrap(), vec![0.3]);
        assert_eq!(holm_correct(&[1.2]).unwrap_err(), StatsError::OutOfRange(1.2));
    }

    #[test]
    fn odds_ratios() {
        assert_eq!(odds_ratio(&[3.0, 4.0], &[3.0, 4.0]).unwrap(), vec![1.0, 1.0]);
        let r = odds_ratio(&[9.0, 1.0], &[1.0, 9.0]).unwrap();
        assert!(r[0] > 1.0 && r[1] < 1.0);
        assert!((r[0] * r[1] - 1.0).abs() < 1e-9);
        assert_eq!(odds_ratio(&[0.0], &[1.0]).unwrap_err(), StatsError::ZeroTotal);
    }

    proptest! {
        #[test]
        fn holm_bounds(ps in proptest::collection::vec(0.0f64..=1.0, 1..20)) {
            let adj = holm_correct(&ps).unwrap();
            let mut order: Vec<usize> = (0..ps.len()).collect();
            order.sort_by(|&a, &b| ps[a].total_cmp(&ps[b]));
            for w in order.windows(2) {
                prop_assert!(adj[w[0]] <= adj[w[1]]);
            }
            for (a, p) in adj.iter().zip(&ps) {
                prop_assert!(a >= p && *a <= 1.0);
            }
        }

        #[test]
        fn ranks_sum(xs in proptest::collection::vec(0i32..5, 1..20)) {
            let v: Vec<f64> = xs.iter().map(|x| *x as f64).collect();
            let r = midranks(&v);
            let n = v.len() as f64;
            prop_assert!((r.iter().sum::<f64>() - n * (n + 1.0) / 2.0).abs() < 1e-9);
        }
    }
}
