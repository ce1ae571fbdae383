//! Running extremes of `(W_∞ - W_n)/sqrt(m2^n log n)` against the random
//! level `sqrt(2 v² W_∞(2))`.

use serde::{Deserialize, Serialize};

use crate::engine::TrajectoryRecord;
use crate::error::{Error, Result};
use crate::model::DiscreteLaw;
use crate::rng::StreamKey;
use crate::stats::{self, KsResult};

/// Fewest surviving scans a band report accepts.
pub const MIN_SCANS: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LilScan {
    /// Levels `2..=N`.
    pub levels: Vec<u32>,
    pub r: Vec<f64>,
    pub running_max: Vec<f64>,
    pub running_min: Vec<f64>,
    /// `sqrt(2 v² W_{N+R}(2))`
    pub normalizer: f64,
    pub survived: bool,
    pub proxy_level: u32,
}

impl LilScan {
    pub fn horizon(&self) -> u32 {
        *self.levels.last().expect("scan covers at least level 2")
    }

    /// Running max at level `n` (`2 ≤ n ≤ N`).
    pub fn max_at(&self, n: u32) -> f64 {
        self.running_max[(n - 2) as usize]
    }

    pub fn min_at(&self, n: u32) -> f64 {
        self.running_min[(n - 2) as usize]
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,R_n,M_n,min_n,B\n");
        for (i, n) in self.levels.iter().enumerate() {
            out.push_str(&format!(
                "{n},{},{},{},{}\n",
                self.r[i], self.running_max[i], self.running_min[i], self.normalizer
            ));
        }
        out
    }
}

/// Scan from raw martingale values: `w1[n]` for `n ≤ horizon`, and the proxies
/// `w_inf`, `w2_inf`.
#[allow(clippy::too_many_arguments)]
pub fn lil_scan_values(
    w1: &[f64],
    w_inf: f64,
    w2_inf: f64,
    v2: f64,
    m2: f64,
    horizon: u32,
    proxy_level: u32,
    survived: bool,
) -> Result<LilScan> {
    if horizon < 2 {
        return Err(Error::InvalidArgument("scan horizon must be at least 2".into()));
    }
    if w1.len() <= horizon as usize {
        return Err(Error::InsufficientDepth { need: horizon, have: w1.len().saturating_sub(1) as u32 });
    }
    let log_m2 = m2.ln();
    let levels: Vec<u32> = (2..=horizon).collect();
    let r: Vec<f64> = levels
        .iter()
        .map(|&n| {
            let nf = f64::from(n);
            (w_inf - w1[n as usize]) / (0.5 * (nf * log_m2 + nf.ln().ln())).exp()
        })
        .collect();
    let mut running_max = Vec::with_capacity(r.len());
    let mut running_min = Vec::with_capacity(r.len());
    let (mut hi, mut lo) = (f64::NEG_INFINITY, f64::INFINITY);
    for &x in &r {
        hi = hi.max(x);
        lo = lo.min(x);
        running_max.push(hi);
        running_min.push(lo);
    }
    Ok(LilScan {
        levels,
        r,
        running_max,
        running_min,
        normalizer: (2.0 * v2 * w2_inf).max(0.0).sqrt(),
        survived,
        proxy_level,
    })
}

/// Scan of one trajectory over `2..=N`, with `W_∞` and `W_∞(2)` proxied at `N + R`.
pub fn lil_scan(traj: &TrajectoryRecord, v2: f64, m2: f64, horizon: u32, proxy_depth: u32) -> Result<LilScan> {
    let deep = horizon + proxy_depth;
    traj.require_depth(deep)?;
    let w1: Vec<f64> = traj.levels.iter().map(|l| l.w1).collect();
    lil_scan_values(&w1, traj.w1(deep), traj.w2(deep), v2, m2, horizon, deep, traj.survived)
}

/// Galton–Watson scan from offspring counts alone, `W_n = Z_n / m^n`.
/// Individual `i` of generation `n` draws its offspring count from
/// `tree.derive(n).derive(i)`, the stream the embedding uses, so the two
/// scans see the same tree.
pub fn gw_lil_scan(
    pmf: &[f64],
    horizon: u32,
    tree: StreamKey,
    proxy_depth: u32,
    cap: usize,
) -> Result<LilScan> {
    let law = DiscreteLaw::new(pmf.to_vec())?;
    let m = law.mean();
    if m <= 1.0 {
        return Err(Error::InvalidModel(format!("offspring mean {m} must exceed 1")));
    }
    let (w1, survived) = gw_martingale_path(&law, horizon + proxy_depth, tree, cap)?;
    let deep = horizon + proxy_depth;
    let w_inf = w1[deep as usize];
    // m(2) = 1/m and s²/(m(m-1)) for the limit variance
    let v2 = law.variance() / (m * (m - 1.0));
    lil_scan_values(&w1, w_inf, w_inf, v2, 1.0 / m, horizon, deep, survived)
}

/// `Z_n / m^n` for `n = 0..=depth` and whether `Z_depth > 0`.
pub fn gw_martingale_path(law: &DiscreteLaw, depth: u32, tree: StreamKey, cap: usize) -> Result<(Vec<f64>, bool)> {
    let m = law.mean();
    let mut z: usize = 1;
    let mut w = vec![1.0];
    for n in 0..depth {
        let level_key = tree.derive(u64::from(n));
        let mut next = 0usize;
        for i in 0..z {
            next += law.sample(&mut level_key.derive(i as u64).rng());
            if next > cap {
                return Err(Error::PopulationCapExceeded { level: n + 1, count: next, cap });
            }
        }
        z = next;
        w.push(z as f64 / m.powi(n as i32 + 1));
    }
    Ok((w, z > 0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LilBandReport {
    pub band: (f64, f64),
    pub scans: usize,
    pub surviving: usize,
    pub horizon: u32,
    pub midpoint: u32,
    /// Fraction of surviving scans with `M_N / B` in the band.
    pub max_in_band: f64,
    /// Fraction with `-min_N / B` in the band.
    pub min_in_band: f64,
    /// Fraction with `M_N ≥ M_{N/2}`; 1 by construction.
    pub max_monotone: f64,
    pub min_monotone: f64,
    pub mean_max_growth: f64,
    pub mean_min_growth: f64,
    /// Two-sample KS of `{M_N/B}` against `{-min_N/B}`.
    pub symmetry: KsResult,
}

pub fn lil_band_report(scans: &[LilScan], band: (f64, f64)) -> Result<LilBandReport> {
    let alive: Vec<&LilScan> = scans.iter().filter(|s| s.survived && s.normalizer > 0.0).collect();
    if alive.len() < MIN_SCANS {
        return Err(Error::DegenerateSample(format!("{} surviving scans; need {MIN_SCANS}", alive.len())));
    }
    let horizon = alive[0].horizon();
    if alive.iter().any(|s| s.horizon() != horizon) {
        return Err(Error::InvalidArgument("scans have different horizons".into()));
    }
    let mid = (horizon / 2).max(2);
    let k = alive.len() as f64;
    let in_band = |x: f64| band.0 <= x && x <= band.1;
    let max_ratio: Vec<f64> = alive.iter().map(|s| s.max_at(horizon) / s.normalizer).collect();
    let min_ratio: Vec<f64> = alive.iter().map(|s| -s.min_at(horizon) / s.normalizer).collect();
    let frac = |v: &[f64]| v.iter().filter(|&&x| in_band(x)).count() as f64 / k;
    Ok(LilBandReport {
        band,
        scans: scans.len(),
        surviving: alive.len(),
        horizon,
        midpoint: mid,
        max_in_band: frac(&max_ratio),
        min_in_band: frac(&min_ratio),
        max_monotone: alive.iter().filter(|s| s.max_at(horizon) >= s.max_at(mid)).count() as f64 / k,
        min_monotone: alive.iter().filter(|s| s.min_at(horizon) <= s.min_at(mid)).count() as f64 / k,
        mean_max_growth: alive.iter().map(|s| s.max_at(horizon) - s.max_at(mid)).sum::<f64>() / k,
        mean_min_growth: alive.iter().map(|s| s.min_at(mid) - s.min_at(horizon)).sum::<f64>() / k,
        symmetry: stats::ks_two_sample(&max_ratio, &min_ratio)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{simulate_trajectory, LevelSummary, DEFAULT_POPULATION_CAP};
    use crate::model::{Atom, OffspringModel};

    #[test]
    fn hand_substitution() {
        // W_∞ - W_2 = 0.05, m2 = 2/3 → 0.05 / sqrt((4/9) log 2)
        let w1 = [1.0, 1.1, 0.95];
        let s = lil_scan_values(&w1, 1.0, 1.0, 1.0 / 3.0, 2.0 / 3.0, 2, 2, true).unwrap();
        assert!((s.r[0] - 0.090_084).abs() < 1e-6, "{}", s.r[0]);
        assert!((s.r[0] - 0.05 / ((4.0 / 9.0) * 2f64.ln()).sqrt()).abs() < 1e-14);
    }

    #[test]
    fn extinct_tree_is_degenerate() {
        let dead = OffspringModel::tabulated(vec![Atom { prob: 1.0, displacements: vec![] }], None).unwrap();
        let t = simulate_trajectory(&dead, 12, StreamKey::from_seed(1), DEFAULT_POPULATION_CAP).unwrap();
        let s = lil_scan(&t, 1.0, 0.5, 8, 4).unwrap();
        assert!(s.r.iter().all(|&x| x == 0.0));
        assert_eq!(s.normalizer, 0.0);
        assert!(!s.survived);
    }

    #[test]
    fn running_extremes_are_monotone() {
        let model = OffspringModel::binary_gaussian(0.25).unwrap();
        let t = simulate_trajectory(&model, 14, StreamKey::from_seed(2), DEFAULT_POPULATION_CAP).unwrap();
        let s = lil_scan(&t, 0.4, 0.642, 10, 4).unwrap();
        assert!(s.running_max.windows(2).all(|w| w[0] <= w[1]));
        assert!(s.running_min.windows(2).all(|w| w[0] >= w[1]));
        assert!(s.r.iter().all(|x| x.is_finite()));
        assert!(s.to_csv().starts_with("n,R_n,M_n,min_n,B\n2,"));
    }

    #[test]
    fn insufficient_depth() {
        let lv = |n| LevelSummary { n, w1: 1.0, w2: 1.0, pop: 1, sup_weight: 1.0 };
        let t = TrajectoryRecord { seed: 0, survived: true, levels: (0..5).map(lv).collect() };
        assert_eq!(lil_scan(&t, 1.0, 0.5, 3, 2), Err(Error::InsufficientDepth { need: 5, have: 4 }));
    }

    #[test]
    fn gw_scan_matches_embedding() {
        let pmf = [0.0, 0.5, 0.5];
        let model = OffspringModel::galton_watson(pmf.to_vec()).unwrap();
        for seed in 0..5 {
            let key = StreamKey::from_seed(seed);
            let t = simulate_trajectory(&model, 18, key, DEFAULT_POPULATION_CAP).unwrap();
            let a = lil_scan(&t, 1.0 / 3.0, 2.0 / 3.0, 12, 6).unwrap();
            let b = gw_lil_scan(&pmf, 12, key, 6, DEFAULT_POPULATION_CAP).unwrap();
            assert!((a.normalizer - b.normalizer).abs() <= 1e-12 * a.normalizer);
            for (x, y) in a.r.iter().zip(&b.r) {
                assert!((x - y).abs() <= 1e-10 * (1.0 + x.abs()), "{x} vs {y}");
            }
        }
    }

    #[test]
    fn gw_normalizer_uses_one_third() {
        let s = gw_lil_scan(&[0.0, 0.5, 0.5], 6, StreamKey::from_seed(3), 4, DEFAULT_POPULATION_CAP).unwrap();
        let (w, _) = gw_martingale_path(&DiscreteLaw::new(vec![0.0, 0.5, 0.5]).unwrap(), 10, StreamKey::from_seed(3), DEFAULT_POPULATION_CAP)
            .unwrap();
        assert!((s.normalizer - (2.0 / 3.0 * w[10]).sqrt()).abs() < 1e-14);
    }

    #[test]
    fn deterministic_single_child_has_flat_scan() {
        let s = gw_lil_scan(&[0.0, 1.0], 6, StreamKey::from_seed(4), 4, DEFAULT_POPULATION_CAP);
        // mean 1 is not supercritical
        assert!(matches!(s, Err(Error::InvalidModel(_))));
        let (w, alive) = gw_martingale_path(&DiscreteLaw::new(vec![0.0, 1.0]).unwrap(), 10, StreamKey::from_seed(4), DEFAULT_POPULATION_CAP)
            .unwrap();
        assert!(alive);
        let s = lil_scan_values(&w, w[10], w[10], 0.0, 0.5, 6, 10, true).unwrap();
        assert!(s.r.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn band_report_counts() {
        let model = OffspringModel::galton_watson(vec![0.0, 0.5, 0.5]).unwrap();
        let scans: Vec<LilScan> = (0..60)
            .map(|i| {
                let t = simulate_trajectory(&model, 16, StreamKey::from_seed(5).derive(i), DEFAULT_POPULATION_CAP).unwrap();
                lil_scan(&t, 1.0 / 3.0, 2.0 / 3.0, 10, 6).unwrap()
            })
            .collect();
        let all = lil_band_report(&scans, (f64::NEG_INFINITY, f64::INFINITY)).unwrap();
        assert_eq!(all.max_in_band, 1.0);
        assert_eq!(all.max_monotone, 1.0);
        assert_eq!(all.min_monotone, 1.0);
        assert!(all.mean_max_growth >= 0.0 && all.mean_min_growth >= 0.0);
        assert!(lil_band_report(&scans[..10], (0.2, 2.0)).is_err());
    }
}
