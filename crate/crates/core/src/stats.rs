//! Sample statistics, normal fits and power-law fits.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance; 0 for fewer than two values.
pub fn variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64
}

/// Mean with its standard error; the error is absent for a single value.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: Option<f64>,
    pub count: usize,
}

impl Estimate {
    pub fn from_samples(xs: &[f64]) -> Option<Self> {
        if xs.is_empty() {
            return None;
        }
        let stderr = (xs.len() >= 2).then(|| (variance(xs) / xs.len() as f64).sqrt());
        Some(Self {
            mean: mean(xs),
            stderr,
            count: xs.len(),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianFit {
    pub mean: f64,
    pub variance: f64,
    pub sample_count: usize,
    pub standard_error_mean: f64,
    /// Kolmogorov-Smirnov distance to the fitted normal; absent when the
    /// variance vanishes.
    pub ks_statistic: Option<f64>,
}

/// Moment-matched normal with a KS goodness-of-fit statistic.
pub fn fit_gaussian(samples: &[f64]) -> Result<GaussianFit> {
    if samples.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "a Gaussian fit needs at least 2 samples, got {}",
            samples.len()
        )));
    }
    let m = mean(samples);
    let v = variance(samples);
    let n = samples.len();
    let ks_statistic = if v > 0.0 {
        let normal =
            Normal::new(m, v.sqrt()).map_err(|e| Error::NumericalFailure(e.to_string()))?;
        Some(ks_statistic(samples, |x| normal.cdf(x)))
    } else {
        None
    };
    Ok(GaussianFit {
        mean: m,
        variance: v,
        sample_count: n,
        standard_error_mean: (v / n as f64).sqrt(),
        ks_statistic,
    })
}

/// One-sample KS distance `sup |F_n(x) - F(x)|`.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted.iter().enumerate().fold(0.0, |acc, (i, &x)| {
        let f = cdf(x);
        acc.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n)
    })
}

/// Asymptotic critical value of the one-sample KS statistic at level
/// `alpha`, `sqrt(-ln(alpha / 2) / 2) / sqrt(n)`.
pub fn ks_critical(n: usize, alpha: f64) -> f64 {
    (-(alpha / 2.0).ln() / 2.0).sqrt() / (n as f64).sqrt()
}

/// Least-squares slope and intercept of `y` against `x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Option<(f64, f64)> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let mx = mean(x);
    let my = mean(y);
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

/// Exponent `p` of `y ~ x^p` by a log-log least-squares fit over the positive
/// points.
pub fn power_law_exponent(x: &[f64], y: &[f64]) -> Option<f64> {
    let (lx, ly): (Vec<f64>, Vec<f64>) = x
        .iter()
        .zip(y)
        .filter(|(a, b)| **a > 0.0 && **b > 0.0)
        .map(|(a, b)| (a.ln(), b.ln()))
        .unzip();
    linear_fit(&lx, &ly).map(|(slope, _)| slope)
}
