//! Small statistics toolbox for the Monte Carlo experiments:
//! Kolmogorov-Smirnov tests and summary estimates.

use crate::{Error, Result};
use statrs::distribution::{ContinuousCDF, Normal};

/// Point estimate with standard error from a Monte Carlo sample.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct McEstimate {
    pub estimate: f64,
    pub stderr: f64,
    pub n: usize,
}

impl McEstimate {
    /// Binomial proportion estimate from a hit count.
    pub fn from_hits(hits: usize, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::domain("empty sample"));
        }
        let p = hits as f64 / n as f64;
        Ok(McEstimate {
            estimate: p,
            stderr: (p * (1.0 - p) / n as f64).sqrt(),
            n,
        })
    }

    /// Mean and standard error of a real-valued sample.
    pub fn from_samples(xs: &[f64]) -> Result<Self> {
        if xs.is_empty() {
            return Err(Error::domain("empty sample"));
        }
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0).max(1.0);
        Ok(McEstimate {
            estimate: mean,
            stderr: (var / n).sqrt(),
            n: xs.len(),
        })
    }
}

/// One-sample Kolmogorov-Smirnov distance of the sample to the standard
/// normal distribution.
pub fn ks_distance_normal(samples: &[f64]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::domain("empty sample"));
    }
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut xs = samples.to_vec();
    xs.sort_by(|a, b| a.partial_cmp(b).expect("non-NaN samples"));
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let cdf = normal.cdf(x);
        let lo = i as f64 / n;
        let hi = (i + 1) as f64 / n;
        d = d.max((cdf - lo).abs()).max((hi - cdf).abs());
    }
    Ok(d)
}

/// Two-sample Kolmogorov-Smirnov statistic and its asymptotic p-value
/// (Kolmogorov distribution with the Stephens small-sample correction).
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<(f64, f64)> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::domain("need at least two observations per sample"));
    }
    let mut xs = a.to_vec();
    let mut ys = b.to_vec();
    xs.sort_by(|u, v| u.partial_cmp(v).expect("non-NaN samples"));
    ys.sort_by(|u, v| u.partial_cmp(v).expect("non-NaN samples"));
    let (n, m) = (xs.len(), ys.len());
    let mut i = 0;
    let mut j = 0;
    let mut d: f64 = 0.0;
    while i < n && j < m {
        let t = xs[i].min(ys[j]);
        while i < n && xs[i] <= t {
            i += 1;
        }
        while j < m && ys[j] <= t {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let en = ((n * m) as f64 / (n + m) as f64).sqrt();
    let lambda = (en + 0.12 + 0.11 / en) * d;
    Ok((d, kolmogorov_q(lambda)))
}

/// Tail function Q(lambda) of the Kolmogorov distribution:
/// `Q(lambda) = 2 sum_{k>=1} (-1)^(k-1) exp(-2 k^2 lambda^2)`.
pub fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=100 {
        let term = (-2.0 * (k as f64) * (k as f64) * lambda * lambda).exp();
        sum += sign * term;
        sign = -sign;
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}
