//! Gaussian naive Bayes.
//!
//! Variance smoothing is relative: every per-class variance gets
//! `var_smoothing` times the largest overall feature variance added, the
//! same convention as scikit-learn. When every feature is constant the
//! smoothing constant itself is used so that variances stay positive.

use std::f64::consts::PI;

use super::{Parameters, CLASSES};

pub(super) fn fit(x: &[Vec<f64>], y: &[usize], w: &[f64], var_smoothing: f64, width: usize) -> Parameters {
    let mut mass = [0.0; CLASSES];
    let mut means = vec![vec![0.0; width]; CLASSES];
    for ((xi, &c), &wi) in x.iter().zip(y).zip(w) {
        mass[c] += wi;
        for (m, v) in means[c].iter_mut().zip(xi) {
            *m += wi * v;
        }
    }
    for c in 0..CLASSES {
        if mass[c] > 0.0 {
            means[c].iter_mut().for_each(|m| *m /= mass[c]);
        }
    }
    let mut variances = vec![vec![0.0; width]; CLASSES];
    for ((xi, &c), &wi) in x.iter().zip(y).zip(w) {
        for ((s, v), m) in variances[c].iter_mut().zip(xi).zip(&means[c]) {
            *s += wi * (v - m) * (v - m);
        }
    }
    let total: f64 = mass.iter().sum();
    let epsilon = match var_smoothing * largest_variance(x, w, total, width) {
        e if e > 0.0 => e,
        _ => var_smoothing,
    };
    for c in 0..CLASSES {
        for s in &mut variances[c] {
            *s = if mass[c] > 0.0 { *s / mass[c] + epsilon } else { 1.0 };
        }
    }
    let priors = mass.iter().map(|m| m / total).collect();
    Parameters::Gaussian { means, variances, priors }
}

fn largest_variance(x: &[Vec<f64>], w: &[f64], total: f64, width: usize) -> f64 {
    if total <= 0.0 {
        return 0.0;
    }
    (0..width)
        .map(|f| {
            let mean = x.iter().zip(w).map(|(xi, wi)| wi * xi[f]).sum::<f64>() / total;
            x.iter().zip(w).map(|(xi, wi)| wi * (xi[f] - mean).powi(2)).sum::<f64>() / total
        })
        .fold(0.0, f64::max)
}

pub(super) fn probabilities(means: &[Vec<f64>], variances: &[Vec<f64>], priors: &[f64], x: &[f64]) -> [f64; CLASSES] {
    let log_joint: Vec<f64> = (0..CLASSES)
        .map(|c| {
            if priors[c] <= 0.0 {
                return f64::NEG_INFINITY;
            }
            let ll: f64 = x
                .iter()
                .zip(&means[c])
                .zip(&variances[c])
                .map(|((v, m), s)| -0.5 * (2.0 * PI * s).ln() - (v - m) * (v - m) / (2.0 * s))
                .sum();
            priors[c].ln() + ll
        })
        .collect();
    let max = log_joint.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    std::array::from_fn(|c| if log_joint[c].is_finite() { (log_joint[c] - max).exp() } else { 0.0 })
}
