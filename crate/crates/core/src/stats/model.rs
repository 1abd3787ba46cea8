//! Logistic and linear models on standardized features, and stratified
//! k-fold cross-validation.

use rand::seq::SliceRandom;

use super::random::rng;
use super::StatsError;
use crate::value::{Collection, Column, ModelKind, ModelRef};

pub const LOGISTIC_EPOCHS: usize = 500;
pub const LOGISTIC_RATE: f64 = 0.5;
pub const LOGISTIC_L2: f64 = 1e-4;

/// Row-major numeric feature matrix.
pub struct Features {
    pub names: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Features {
    pub fn from_collection(c: &Collection) -> Result<Features, StatsError> {
        if c.width() == 0 {
            return Err(StatsError::EmptyFeatures);
        }
        let mut rows = vec![Vec::with_capacity(c.width()); c.rows()];
        let mut names = Vec::new();
        for (name, col) in c.columns() {
            let Column::Numeric(xs) = col else {
                return Err(StatsError::TypeMismatch(format!(
                    "feature column '{name}' is not numeric"
                )));
            };
            for (row, x) in rows.iter_mut().zip(xs) {
                row.push(*x);
            }
            names.push(name.to_string());
        }
        Ok(Features { names, rows })
    }

    fn subset(&self, idx: &[usize]) -> Features {
        Features {
            names: self.names.clone(),
            rows: idx.iter().map(|&i| self.rows[i].clone()).collect(),
        }
    }
}

fn standardize(f: &Features) -> (Vec<f64>, Vec<f64>, Vec<Vec<f64>>) {
    let d = f.names.len();
    let n = f.rows.len().max(1) as f64;
    let mut means = vec![0.0; d];
    for r in &f.rows {
        for j in 0..d {
            means[j] += r[j] / n;
        }
    }
    let mut scales = vec![0.0; d];
    for r in &f.rows {
        for j in 0..d {
            scales[j] += (r[j] - means[j]).powi(2) / n;
        }
    }
    for s in scales.iter_mut() {
        *s = if *s > 0.0 { s.sqrt() } else { 1.0 };
    }
    let z = f
        .rows
        .iter()
        .map(|r| (0..d).map(|j| (r[j] - means[j]) / scales[j]).collect())
        .collect();
    (means, scales, z)
}

fn softmax(scores: &mut [f64]) {
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for s in scores.iter_mut() {
        *s = (*s - max).exp();
        sum += *s;
    }
    for s in scores.iter_mut() {
        *s /= sum;
    }
}

/// Multinomial logistic regression by full-batch gradient descent.
pub fn train_logistic(f: &Features, labels: &[String], seed: u64) -> Result<ModelRef, StatsError> {
    if f.names.is_empty() {
        return Err(StatsError::EmptyFeatures);
    }
    if labels.len() != f.rows.len() {
        return Err(StatsError::LengthMismatch {
            left: f.rows.len(),
            right: labels.len(),
        });
    }
    let mut classes: Vec<String> = labels.to_vec();
    classes.sort();
    classes.dedup();
    if classes.len() < 2 {
        return Err(StatsError::SingleClass);
    }
    let y: Vec<usize> = labels
        .iter()
        .map(|l| classes.binary_search(l).expect("label comes from classes"))
        .collect();
    let (means, scales, z) = standardize(f);
    let (k, d, n) = (classes.len(), f.names.len(), z.len() as f64);
    let mut w = vec![vec![0.0; d]; k];
    let mut b = vec![0.0; k];
    let mut probs = vec![0.0; k];
    for _ in 0..LOGISTIC_EPOCHS {
        let mut gw = vec![vec![0.0; d]; k];
        let mut gb = vec![0.0; k];
        for (row, &yi) in z.iter().zip(&y) {
            for c in 0..k {
                probs[c] = b[c] + w[c].iter().zip(row).map(|(a, x)| a * x).sum::<f64>();
            }
            softmax(&mut probs);
            for c in 0..k {
                let err = probs[c] - if c == yi { 1.0 } else { 0.0 };
                gb[c] += err / n;
                for j in 0..d {
                    gw[c][j] += err * row[j] / n;
                }
            }
        }
        for c in 0..k {
            b[c] -= LOGISTIC_RATE * gb[c];
            for j in 0..d {
                w[c][j] -= LOGISTIC_RATE * (gw[c][j] + LOGISTIC_L2 * w[c][j]);
            }
        }
    }
    Ok(ModelRef {
        kind: ModelKind::LogisticClassifier,
        feature_names: f.names.clone(),
        classes,
        weights: w,
        bias: b,
        means,
        scales,
        trained: true,
        seed,
    })
}

/// Ordinary least squares on standardized features.
pub fn train_linear(f: &Features, target: &[f64], seed: u64) -> Result<ModelRef, StatsError> {
    if f.names.is_empty() {
        return Err(StatsError::EmptyFeatures);
    }
    if target.len() != f.rows.len() {
        return Err(StatsError::LengthMismatch {
            left: f.rows.len(),
            right: target.len(),
        });
    }
    if target.len() < 2 {
        return Err(StatsError::TooFew {
            need: 2,
            got: target.len(),
        });
    }
    let (means, scales, z) = standardize(f);
    let d = f.names.len();
    let ybar = target.iter().sum::<f64>() / target.len() as f64;
    // normal equations (ZᵀZ + εI) w = Zᵀ(y - ȳ)
    let mut a = vec![vec![0.0; d + 1]; d];
    for (row, y) in z.iter().zip(target) {
        for i in 0..d {
            for j in 0..d {
                a[i][j] += row[i] * row[j];
            }
            a[i][d] += row[i] * (y - ybar);
        }
    }
    for (i, r) in a.iter_mut().enumerate() {
        r[i] += 1e-9;
    }
    let w = solve(a).ok_or(StatsError::ZeroVariance)?;
    Ok(ModelRef {
        kind: ModelKind::LinearRegressor,
        feature_names: f.names.clone(),
        classes: Vec::new(),
        weights: vec![w],
        bias: vec![ybar],
        means,
        scales,
        trained: true,
        seed,
    })
}

/// Gaussian elimination with partial pivoting on an augmented matrix.
fn solve(mut a: Vec<Vec<f64>>) -> Option<Vec<f64>> {
    let d = a.len();
    for col in 0..d {
        let pivot = (col..d).max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))?;
        if a[pivot][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, pivot);
        let p = a[col].clone();
        for (r, row) in a.iter_mut().enumerate() {
            if r != col {
                let factor = row[col] / p[col];
                for (x, y) in row.iter_mut().zip(&p).skip(col) {
                    *x -= factor * y;
                }
            }
        }
    }
    Some((0..d).map(|i| a[i][d] / a[i][i]).collect())
}

fn scores(m: &ModelRef, row: &[f64]) -> Vec<f64> {
    let z: Vec<f64> = row
        .iter()
        .zip(m.means.iter().zip(&m.scales))
        .map(|(x, (mu, s))| (x - mu) / s)
        .collect();
    m.weights
        .iter()
        .zip(&m.bias)
        .map(|(w, b)| b + w.iter().zip(&z).map(|(a, x)| a * x).sum::<f64>())
        .collect()
}

pub fn predict_class(m: &ModelRef, row: &[f64]) -> Result<String, StatsError> {
    if !m.trained || m.kind != ModelKind::LogisticClassifier {
        return Err(StatsError::TypeMismatch("the model is not a trained classifier".into()));
    }
    let s = scores(m, row);
    let best = (0..s.len()).fold(0, |best, c| if s[c] > s[best] { c } else { best });
    Ok(m.classes[best].clone())
}

pub fn predict_value(m: &ModelRef, row: &[f64]) -> Result<f64, StatsError> {
    if !m.trained || m.kind != ModelKind::LinearRegressor {
        return Err(StatsError::TypeMismatch("the model is not a trained regressor".into()));
    }
    Ok(scores(m, row)[0])
}

pub fn accuracy(m: &ModelRef, f: &Features, labels: &[String]) -> Result<f64, StatsError> {
    if labels.is_empty() {
        return Err(StatsError::Empty);
    }
    let mut hits = 0usize;
    for (row, label) in f.rows.iter().zip(labels) {
        if predict_class(m, row)? == *label {
            hits += 1;
        }
    }
    Ok(hits as f64 / labels.len() as f64)
}

/// Fold number for every row: each class is shuffled with the seeded
/// generator and dealt round-robin, continuing the deal across classes.
pub fn stratified_folds(labels: &[String], folds: usize, seed: u64) -> Vec<usize> {
    let mut classes: Vec<&String> = labels.iter().collect();
    classes.sort();
    classes.dedup();
    let mut r = rng(seed);
    let mut assignment = vec![0; labels.len()];
    let mut deal = 0;
    for class in classes {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == *class).collect();
        idx.shuffle(&mut r);
        for i in idx {
            assignment[i] = deal % folds;
            deal += 1;
        }
    }
    assignment
}

/// Stratified k-fold accuracy of a logistic classifier.
pub fn cross_validate(f: &Features, labels: &[String], folds: i64, seed: u64) -> Result<Vec<f64>, StatsError> {
    if folds < 2 || folds as usize > labels.len() {
        return Err(StatsError::BadFolds {
            folds,
            rows: labels.len(),
        });
    }
    if labels.len() != f.rows.len() {
        return Err(StatsError::LengthMismatch {
            left: f.rows.len(),
            right: labels.len(),
        });
    }
    let k = folds as usize;
    let assignment = stratified_folds(labels, k, seed);
    let mut out = Vec::with_capacity(k);
    for fold in 0..k {
        let (test, train): (Vec<usize>, Vec<usize>) = (0..labels.len()).partition(|&i| assignment[i] == fold);
        let pick = |idx: &[usize]| idx.iter().map(|&i| labels[i].clone()).collect::<Vec<_>>();
        let model = train_logistic(&f.subset(&train), &pick(&train), seed)?;
        out.push(accuracy(&model, &f.subset(&test), &pick(&test))?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    /// Two clusters around (0,0) and (6,6) with jitter below 1.
    fn clusters(n: usize, seed: u64) -> (Features, Vec<String>) {
        let mut r = rng(seed);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..n {
            let class = i % 2;
            let c = class as f64 * 6.0;
            rows.push(vec![c + r.random_range(-1.0..1.0), c + r.random_range(-1.0..1.0)]);
            labels.push(format!("c{class}"));
        }
        (
            Features {
                names: vec!["a".into(), "b".into()],
                rows,
            },
            labels,
        )
    }

    /// Held-out oracle: nearest cluster centre.
    fn oracle(row: &[f64]) -> String {
        if row[0] + row[1] > 6.0 { "c1" } else { "c0" }.to_string()
    }

    #[test]
    fn separable_training_accuracy() {
        let (f, labels) = clusters(40, 3);
        for (row, l) in f.rows.iter().zip(&labels) {
            assert_eq!(oracle(row), *l);
        }
        let m = train_logistic(&f, &labels, 0).unwrap();
        assert_eq!(accuracy(&m, &f, &labels).unwrap(), 1.0);
        // a feature increasing with class-1 membership gets a positive weight
        assert!(m.weights[1][0] > 0.0 && m.weights[1][1] > 0.0);
    }

    #[test]
    fn degenerate_inputs() {
        let (f, _) = clusters(4, 1);
        let same = vec!["x".to_string(); 4];
        assert_eq!(train_logistic(&f, &same, 0).unwrap_err(), StatsError::SingleClass);
        let empty = Features {
            names: vec![],
            rows: vec![vec![]; 4],
        };
        assert_eq!(
            train_logistic(&empty, &["a".into(), "b".into(), "a".into(), "b".into()], 0).unwrap_err(),
            StatsError::EmptyFeatures
        );
    }

    #[test]
    fn cv_separable() {
        let (f, labels) = clusters(40, 9);
        assert_eq!(cross_validate(&f, &labels, 5, 13).unwrap(), vec![1.0; 5]);
        assert_eq!(
            cross_validate(&f, &labels, 41, 13).unwrap_err(),
            StatsError::BadFolds { folds: 41, rows: 40 }
        );
    }

    #[test]
    fn cv_shuffled_labels_near_chance() {
        let mut total = 0.0;
        let seeds = 10;
        for seed in 0..seeds {
            let (f, mut labels) = clusters(60, 100 + seed);
            labels.shuffle(&mut rng(seed));
            let scores = cross_validate(&f, &labels, 5, seed).unwrap();
            total += scores.iter().sum::<f64>() / scores.len() as f64;
        }
        let mean = total / seeds as f64;
        assert!((mean - 0.5).abs() <= 0.15, "{mean}");
    }

    #[test]
    fn folds_are_stratified() {
        let labels: Vec<String> = (0..30).map(|i| format!("c{}", i % 3)).collect();
        let a = stratified_folds(&labels, 5, 4);
        for fold in 0..5 {
            for class in ["c0", "c1", "c2"] {
                let n = (0..30).filter(|&i| a[i] == fold && labels[i] == class).count();
                assert_eq!(n, 2);
            }
        }
        assert_eq!(a, stratified_folds(&labels, 5, 4));
    }

    #[test]
    fn linear_recovers_slope() {
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
        let y: Vec<f64> = (0..10).map(|i| 3.0 * i as f64 + 1.0).collect();
        let f = Features {
            names: vec!["x".into()],
            rows,
        };
        let m = train_linear(&f, &y, 0).unwrap();
        assert!((predict_value(&m, &[20.0]).unwrap() - 61.0).abs() < 1e-6);
    }
}
