//! Kolmogorov–Smirnov tests, bootstrap helpers and a few distribution functions.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::rng::{uniform01, StreamKey};

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Standard normal quantile, `p ∈ (0, 1)`.
pub fn normal_quantile(p: f64) -> f64 {
    Normal::standard().inverse_cdf(p)
}

/// `E|Z|^3` for a standard normal `Z`.
pub const NORMAL_ABS_THIRD_MOMENT: f64 = 1.595_769_121_605_730_7; // 2·sqrt(2/π)

/// Root-mean-square of the Kolmogorov limit law, `sqrt(π²/12)`: the scale of
/// the Monte Carlo fluctuation of `sqrt(n)·D` under the null.
pub const KOLMOGOROV_RMS: f64 = 0.906_899_682_117_108_9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    pub n: usize,
    /// Second sample size for two-sample tests.
    pub m: Option<usize>,
    pub p_value: f64,
}

impl KsResult {
    pub fn rejects(&self, alpha: f64) -> bool {
        self.p_value < alpha
    }

    pub fn effective_size(&self) -> f64 {
        match self.m {
            Some(m) => (self.n * m) as f64 / (self.n + m) as f64,
            None => self.n as f64,
        }
    }
}

/// Survival function of the Kolmogorov distribution,
/// `Q(λ) = 2 Σ_{k≥1} (-1)^{k-1} exp(-2k²λ²)`.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 1.18 {
        // Jacobi theta form converges fast for small λ
        let pi2 = std::f64::consts::PI.powi(2);
        let y = (-pi2 / (8.0 * lambda * lambda)).exp();
        let mut s = 0.0;
        let mut k = 1.0f64;
        loop {
            let t = y.powf(k * k);
            s += t;
            if t < 1e-17 {
                break;
            }
            k += 2.0;
        }
        (1.0 - (2.0 * std::f64::consts::PI).sqrt() / lambda * s).clamp(0.0, 1.0)
    } else {
        let mut s = 0.0;
        for k in 1..=100 {
            let kf = f64::from(k);
            let t = (-2.0 * kf * kf * lambda * lambda).exp();
            s += if k % 2 == 1 { t } else { -t };
            if t < 1e-17 {
                break;
            }
        }
        (2.0 * s).clamp(0.0, 1.0)
    }
}

/// Asymptotic p-value with Stephens' finite-size correction.
pub fn ks_p_value(d: f64, effective_n: f64) -> f64 {
    let sn = effective_n.sqrt();
    kolmogorov_sf((sn + 0.12 + 0.11 / sn) * d)
}

fn sorted(xs: &[f64]) -> Result<Vec<f64>> {
    if xs.is_empty() {
        return Err(Error::EmptySample);
    }
    if xs.iter().any(|x| x.is_nan()) {
        return Err(Error::InvalidArgument("NaN in sample".into()));
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// One-sample KS test of `a` against a continuous CDF.
pub fn ks_one_sample<F: Fn(f64) -> f64>(a: &[f64], cdf: F) -> Result<KsResult> {
    let v = sorted(a)?;
    let n = v.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in v.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i + 1) as f64 / n - f).max(f - i as f64 / n);
    }
    Ok(KsResult { statistic: d, n: v.len(), m: None, p_value: ks_p_value(d, n) })
}

/// Two-sample KS test; ties are stepped over jointly.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsResult> {
    let x = sorted(a)?;
    let y = sorted(b)?;
    let (n, m) = (x.len(), y.len());
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < n && j < m {
        let t = x[i].min(y[j]);
        while i < n && x[i] <= t {
            i += 1;
        }
        while j < m && y[j] <= t {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let ne = (n * m) as f64 / (n + m) as f64;
    Ok(KsResult { statistic: d, n, m: Some(m), p_value: ks_p_value(d, ne) })
}

/// Indices of one bootstrap resample of `n` items.
pub fn resample_indices(n: usize, key: StreamKey) -> Vec<usize> {
    let mut rng = key.rng();
    (0..n).map(|_| ((uniform01(&mut rng) * n as f64) as usize).min(n - 1)).collect()
}

/// `replicates` bootstrap values of `stat`; replicate `b` resamples with `key.derive(b)`.
pub fn bootstrap<F>(n: usize, replicates: usize, key: StreamKey, stat: F) -> Vec<f64>
where
    F: Fn(&[usize]) -> f64 + Sync,
{
    (0..replicates as u64)
        .into_par_iter()
        .map(|b| stat(&resample_indices(n, key.derive(b))))
        .collect()
}

/// Linear-interpolated empirical quantile of an unsorted sample.
pub fn quantile(xs: &[f64], q: f64) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (pos - lo as f64) * (v[hi] - v[lo])
}

/// Percentile bootstrap interval `[q_{(1-level)/2}, q_{(1+level)/2}]`.
pub fn percentile_interval(replicates: &[f64], level: f64) -> (f64, f64) {
    let tail = 0.5 * (1.0 - level);
    (quantile(replicates, tail), quantile(replicates, 1.0 - tail))
}

/// `k`-sigma band for the number of rejections out of `reps` at rate `p`,
/// as a rate interval.
pub fn binomial_band(reps: usize, p: f64, k: f64) -> (f64, f64) {
    let sd = (p * (1.0 - p) / reps as f64).sqrt();
    ((p - k * sd).max(0.0), (p + k * sd).min(1.0))
}

/// Box–Muller-free standard normal draw through `rand_distr`.
pub fn standard_normal<R: rand_core::RngCore>(rng: &mut R) -> f64 {
    use rand_distr::{Distribution, StandardNormal};
    StandardNormal.sample(rng)
}
