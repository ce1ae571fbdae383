//! Berry–Esseen bounds for sums of independent summands (finitely or
//! infinitely many), and the truncated summands
//! `Z^{(u)}_{n,r} = Y_u (W_r^{(u)} - 1) 1{e^{an} Y_u |W_r^{(u)} - 1| ≤ 1}`
//! of a frozen generation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::{generation_at, subtree_pair, Generation};
use crate::error::{Error, Result};
use crate::model::OffspringModel;
use crate::moments::MomentSet;
use crate::rng::StreamKey;
use crate::stats::{self, KsResult, KOLMOGOROV_RMS};
use crate::sum::NeumaierSum;

/// Default Berry–Esseen constant; an engineering choice, not a proven value
/// for this setting.
pub const DEFAULT_C: f64 = 0.56;

/// `C Σρ_i / (Σσ_i²)^{3/2}` over paired variances and third absolute moments.
pub fn be_bound<I, J>(variances: I, rhos: J, c: f64) -> Result<f64>
where
    I: IntoIterator<Item = f64>,
    J: IntoIterator<Item = f64>,
{
    let s2: NeumaierSum = variances.into_iter().collect();
    let mut rho = NeumaierSum::new();
    for r in rhos {
        if r < 0.0 || r.is_nan() {
            return Err(Error::InvalidArgument(format!("third absolute moment {r} is negative")));
        }
        rho += r;
    }
    let s2 = s2.value();
    if !(s2 > 0.0) || !s2.is_finite() {
        return Err(Error::ZeroVariance);
    }
    Ok(c * rho.value() / s2.powf(1.5))
}

/// [`be_bound`] over an infinite sequence `term(i) = (σ_i², ρ_i)`, `i ≥ 1`.
/// Summation stops once both running sums have been stable to `tol`
/// (relative) for 10 consecutive terms; `DivergentThirdMoments` if that does
/// not happen within `max_terms`.
pub fn be_bound_series<F>(term: F, c: f64, tol: f64, max_terms: usize) -> Result<f64>
where
    F: Fn(usize) -> (f64, f64),
{
    const STABLE_RUN: usize = 10;
    let mut s2 = NeumaierSum::new();
    let mut rho = NeumaierSum::new();
    let mut stable = 0;
    for i in 1..=max_terms {
        let (v, r) = term(i);
        if r < 0.0 || v < 0.0 {
            return Err(Error::InvalidArgument(format!("term {i} has a negative moment")));
        }
        s2 += v;
        rho += r;
        let small = v <= tol * s2.value().abs() && r <= tol * rho.value().abs();
        stable = if small { stable + 1 } else { 0 };
        if stable >= STABLE_RUN {
            let s2 = s2.value();
            if !(s2 > 0.0) {
                return Err(Error::ZeroVariance);
            }
            return Ok(c * rho.value() / s2.powf(1.5));
        }
    }
    Err(Error::DivergentThirdMoments { iterations: max_terms })
}

/// Conditional moments of one truncated summand.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummandMoments {
    pub weight: f64,
    pub mean: f64,
    pub second: f64,
    pub third_abs: f64,
    pub second_untruncated: f64,
    pub third_abs_untruncated: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncatedSummandStats {
    pub n: u32,
    pub r: u32,
    pub k: usize,
    /// `e^{an} = m2^{-n/2}`
    pub scale: f64,
    pub summands: Vec<SummandMoments>,
    pub sum_second: f64,
    pub sum_third_abs: f64,
    /// `Σ_u (E Z² - (E Z)²)`: the conditional variance of the centered sum.
    pub sum_variance: f64,
    pub sum_second_untruncated: f64,
    pub sum_third_abs_untruncated: f64,
    /// `Σ_u Y_u²`
    pub sum_weight_sq: f64,
}

/// `k` i.i.d. draws of `W_r - 1` on streams `key.derive(j)`.
fn increments(model: &OffspringModel, r: u32, k: usize, key: StreamKey, cap: usize) -> Result<Vec<f64>> {
    (0..k as u64)
        .into_par_iter()
        .map(|j| subtree_pair(model, r, r, key.derive(j), cap).map(|(w, _)| w - 1.0))
        .collect()
}

/// Conditional moments of every `Z^{(u)}_{n,r}` given the frozen generation,
/// estimated from `k` depth-`r` subtrees shared by all individuals.
pub fn truncated_stats(
    g: &Generation,
    model: &OffspringModel,
    ms: &MomentSet,
    r: u32,
    k: usize,
    key: StreamKey,
    cap: usize,
) -> Result<TruncatedSummandStats> {
    if g.is_extinct() {
        return Err(Error::ExtinctTree { level: g.level() });
    }
    if k == 0 {
        return Err(Error::InvalidArgument("k must be positive".into()));
    }
    let mut d = increments(model, r, k, key.derive_tag("moments"), cap)?;
    d.sort_by(|a, b| a.abs().total_cmp(&b.abs()));
    // prefix sums of d, d², |d|³ in order of |d|
    let mut p1 = vec![0.0; k + 1];
    let mut p2 = vec![0.0; k + 1];
    let mut p3 = vec![0.0; k + 1];
    let (mut s1, mut s2, mut s3) = (NeumaierSum::new(), NeumaierSum::new(), NeumaierSum::new());
    for (i, x) in d.iter().enumerate() {
        s1 += *x;
        s2 += x * x;
        s3 += x.abs().powi(3);
        p1[i + 1] = s1.value();
        p2[i + 1] = s2.value();
        p3[i + 1] = s3.value();
    }
    let kf = k as f64;
    let scale = (-0.5 * f64::from(g.level()) * ms.m2.ln()).exp();
    let summands: Vec<SummandMoments> = g
        .positions()
        .iter()
        .map(|&s| {
            let y = (-s).exp();
            let limit = 1.0 / (scale * y);
            let kept = d.partition_point(|x| x.abs() <= limit);
            SummandMoments {
                weight: y,
                mean: y * p1[kept] / kf,
                second: y * y * p2[kept] / kf,
                third_abs: y.powi(3) * p3[kept] / kf,
                second_untruncated: y * y * p2[k] / kf,
                third_abs_untruncated: y.powi(3) * p3[k] / kf,
            }
        })
        .collect();
    let total = |f: fn(&SummandMoments) -> f64| summands.iter().map(f).collect::<NeumaierSum>().value();
    Ok(TruncatedSummandStats {
        n: g.level(),
        r,
        k,
        scale,
        sum_second: total(|m| m.second),
        sum_third_abs: total(|m| m.third_abs),
        sum_variance: total(|m| m.second - m.mean * m.mean),
        sum_second_untruncated: total(|m| m.second_untruncated),
        sum_third_abs_untruncated: total(|m| m.third_abs_untruncated),
        sum_weight_sq: total(|m| m.weight * m.weight),
        summands,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceRatio {
    pub tree: u64,
    pub n: u32,
    /// `e^{2an} Var[V_{n,r} | F_n]`
    pub estimate: f64,
    /// `W_deep(2) Var W_r`
    pub target: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceLimitReport {
    pub levels: Vec<u32>,
    pub r: u32,
    pub k: usize,
    pub proxy_level: u32,
    pub band: (f64, f64),
    pub trees: usize,
    pub extinct_skipped: usize,
    pub ratios: Vec<VarianceRatio>,
    /// Fraction of trees with the ratio in `band`, per level.
    pub in_band: Vec<f64>,
    /// Median `|ratio - 1|` per level.
    pub median_abs_deviation: Vec<f64>,
}

/// For each of `trees` surviving trees, estimates `e^{2an} Var[V_{n,r}|F_n]`
/// at every level in `levels` and compares it with `W_{N+R}(2) Var W_r`,
/// `N = max(levels)`.
#[allow(clippy::too_many_arguments)]
pub fn conditional_variance_limit_check(
    model: &OffspringModel,
    ms: &MomentSet,
    levels: &[u32],
    r: u32,
    k: usize,
    trees: usize,
    proxy_depth: u32,
    band: (f64, f64),
    root: StreamKey,
    cap: usize,
) -> Result<VarianceLimitReport> {
    if r == 0 {
        return Err(Error::InvalidArgument("r must be at least 1: W_0 = 1 gives zero summands".into()));
    }
    let top = *levels.iter().max().ok_or_else(|| Error::InvalidArgument("no levels".into()))?;
    let deep = top + proxy_depth;
    let log_m2 = ms.m2.ln();
    let var_wr = ms.var_wr(r);
    let mut ratios = Vec::new();
    let mut extinct_skipped = 0;
    let mut found = 0;
    let mut i = 0u64;
    while found < trees {
        if i >= 100 * trees.max(1) as u64 {
            return Err(Error::DegenerateSample(format!("only {found} of {trees} trees survived to level {deep}")));
        }
        let key = root.derive(i);
        let mut frozen: Vec<Generation> = Vec::new();
        let mut w2_deep = 0.0;
        crate::engine::grow(model, deep, key, cap, |g| {
            if levels.contains(&g.level()) {
                frozen.push(g.clone());
            }
            if g.level() == deep {
                w2_deep = g.squared_weight_ratio(log_m2);
            }
        })?;
        if w2_deep == 0.0 {
            extinct_skipped += 1;
            i += 1;
            continue;
        }
        for g in &frozen {
            let st = truncated_stats(g, model, ms, r, k, key.derive_tag("variance").derive(u64::from(g.level())), cap)?;
            let estimate = st.scale * st.scale * st.sum_variance;
            let target = w2_deep * var_wr;
            ratios.push(VarianceRatio { tree: i, n: g.level(), estimate, target, ratio: estimate / target });
        }
        found += 1;
        i += 1;
    }
    let mut in_band = Vec::new();
    let mut median_abs_deviation = Vec::new();
    for &n in levels {
        let at: Vec<f64> = ratios.iter().filter(|v| v.n == n).map(|v| v.ratio).collect();
        in_band.push(at.iter().filter(|&&x| band.0 <= x && x <= band.1).count() as f64 / at.len() as f64);
        let dev: Vec<f64> = at.iter().map(|x| (x - 1.0).abs()).collect();
        median_abs_deviation.push(stats::quantile(&dev, 0.5));
    }
    Ok(VarianceLimitReport {
        levels: levels.to_vec(),
        r,
        k,
        proxy_level: deep,
        band,
        trees,
        extinct_skipped,
        ratios,
        in_band,
        median_abs_deviation,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BerryEsseenReport {
    pub n: u32,
    pub r: u32,
    pub population: usize,
    pub c: f64,
    /// `8C Σ E|Z - EZ|³ / Var^{3/2}`
    pub bound: f64,
    /// Same with uncentered third moments `Σ E|Z|³`.
    pub bound_uncentered: f64,
    pub ks: KsResult,
    /// Monte Carlo scale of the KS statistic, `sqrt(π²/12)/sqrt(samples)`.
    pub ks_se: f64,
    /// `Var[V_{n,r}|F_n] / (Σ Y_u² Var W_r)`.
    pub var_ratio: f64,
    pub pass: bool,
}

/// Berry–Esseen bound for the centered truncated sum `V_{n,r}` of a frozen
/// generation, and the KS distance of `samples` fresh realizations of
/// `V_{n,r} / sqrt(Var[V_{n,r}|F_n])` from the standard normal.
#[allow(clippy::too_many_arguments)]
pub fn conditional_be_report(
    g: &Generation,
    model: &OffspringModel,
    ms: &MomentSet,
    r: u32,
    k: usize,
    samples: usize,
    c: f64,
    key: StreamKey,
    cap: usize,
) -> Result<BerryEsseenReport> {
    let st = truncated_stats(g, model, ms, r, k, key, cap)?;
    if !(st.sum_variance > 0.0) {
        return Err(Error::ZeroVariance);
    }
    // centered third moments need the raw draws: E|Y(d)1{..} - μ_u|³
    let d = increments(model, r, k, key.derive_tag("moments"), cap)?;
    let kf = k as f64;
    let centered_third: f64 = st
        .summands
        .par_iter()
        .map(|m| {
            let limit = 1.0 / (st.scale * m.weight);
            let acc: NeumaierSum = d
                .iter()
                .map(|&x| {
                    let z = if x.abs() <= limit { m.weight * x } else { 0.0 };
                    (z - m.mean).abs().powi(3)
                })
                .collect();
            acc.value() / kf
        })
        .collect::<Vec<f64>>()
        .into_iter()
        .collect::<NeumaierSum>()
        .value();
    let sd = st.sum_variance.sqrt();
    let bound = 8.0 * be_bound([st.sum_variance], [centered_third], c)?;
    let bound_uncentered = 8.0 * be_bound([st.sum_variance], [st.sum_third_abs], c)?;
    let fresh = key.derive_tag("fresh");
    let draws: Vec<f64> = (0..samples as u64)
        .into_par_iter()
        .map(|l| {
            let mut v = NeumaierSum::new();
            for (u, m) in st.summands.iter().enumerate() {
                let (w, _) = subtree_pair(model, r, r, fresh.derive(u as u64).derive(l), cap)?;
                let x = w - 1.0;
                let z = if st.scale * m.weight * x.abs() <= 1.0 { m.weight * x } else { 0.0 };
                v += z - m.mean;
            }
            Ok(v.value() / sd)
        })
        .collect::<Result<_>>()?;
    let ks = stats::ks_one_sample(&draws, stats::normal_cdf)?;
    let ks_se = KOLMOGOROV_RMS / (samples as f64).sqrt();
    Ok(BerryEsseenReport {
        n: g.level(),
        r,
        population: g.len(),
        c,
        bound,
        bound_uncentered,
        pass: ks.statistic <= bound + 3.0 * ks_se,
        ks,
        ks_se,
        var_ratio: st.sum_variance / (st.sum_weight_sq * ms.var_wr(r)),
    })
}

/// [`conditional_be_report`] for the first `trees` trees surviving to the
/// deepest of `levels`, each frozen at every level.
#[allow(clippy::too_many_arguments)]
pub fn be_suite(
    model: &OffspringModel,
    ms: &MomentSet,
    levels: &[u32],
    r: u32,
    k: usize,
    samples: usize,
    trees: usize,
    c: f64,
    root: StreamKey,
    cap: usize,
) -> Result<Vec<BerryEsseenReport>> {
    let top = *levels.iter().max().ok_or_else(|| Error::InvalidArgument("no levels".into()))?;
    let mut out = Vec::new();
    let mut found = 0;
    let mut i = 0u64;
    while found < trees {
        if i >= 100 * trees.max(1) as u64 {
            return Err(Error::DegenerateSample(format!("only {found} of {trees} trees survived to level {top}")));
        }
        let key = root.derive(i);
        i += 1;
        if generation_at(model, top, key, cap)?.is_extinct() {
            continue;
        }
        for &n in levels {
            let g = generation_at(model, n, key, cap)?;
            out.push(conditional_be_report(&g, model, ms, r, k, samples, c, key.derive_tag("be").derive(u64::from(n)), cap)?);
        }
        found += 1;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::DEFAULT_POPULATION_CAP;
    use crate::stats::NORMAL_ABS_THIRD_MOMENT;
    use proptest::prelude::*;

    fn gw() -> OffspringModel {
        OffspringModel::galton_watson(vec![0.0, 0.5, 0.5]).unwrap()
    }

    #[test]
    fn single_gaussian_summand() {
        let b = be_bound([1.0], [NORMAL_ABS_THIRD_MOMENT], DEFAULT_C).unwrap();
        assert!((b - DEFAULT_C * 1.59577).abs() < 1e-5);
    }

    #[test]
    fn iid_summands() {
        let n = 25;
        let b = be_bound(vec![1.0; n], vec![3.0; n], 0.5).unwrap();
        assert!((b - 0.5 * 3.0 / 5.0).abs() < 1e-15);
    }

    #[test]
    fn geometric_gaussian_series() {
        let q = 2f64.powf(-1.5);
        // Σσ² = 1, Σρ = E|Z|³ q/(1-q)
        let oracle = NORMAL_ABS_THIRD_MOMENT * q / (1.0 - q);
        let b = be_bound_series(|i| (0.5f64.powi(i as i32), NORMAL_ABS_THIRD_MOMENT * q.powi(i as i32)), 1.0, 1e-17, 10_000)
            .unwrap();
        assert!((b - oracle).abs() < 1e-14, "{b} vs {oracle}");
        assert!((oracle - 0.872_755).abs() < 1e-6);
    }

    #[test]
    fn series_errors() {
        assert_eq!(be_bound_series(|_| (1.0, 1.0), 1.0, 1e-12, 500), Err(Error::DivergentThirdMoments { iterations: 500 }));
        assert_eq!(be_bound([0.0, 0.0], [1.0, 1.0], 1.0), Err(Error::ZeroVariance));
        assert_eq!(be_bound_series(|_| (0.0, 0.0), 1.0, 1e-12, 500), Err(Error::ZeroVariance));
    }

    proptest! {
        #[test]
        fn bound_is_scale_free(vs in prop::collection::vec(0.01f64..5.0, 1..20), c in 0.1f64..10.0) {
            let rhos: Vec<f64> = vs.iter().map(|v| 1.7 * v.powf(1.5)).collect();
            let a = be_bound(vs.clone(), rhos.clone(), 0.56).unwrap();
            let b = be_bound(vs.iter().map(|v| v * c * c), rhos.iter().map(|r| r * c.powi(3)), 0.56).unwrap();
            prop_assert!((a - b).abs() <= 1e-10 * a);
        }

        #[test]
        fn bound_monotone_and_linear(vs in prop::collection::vec(0.01f64..5.0, 2..20), bump in 0.0f64..3.0) {
            let rhos: Vec<f64> = vs.iter().map(|v| v * 2.0).collect();
            let a = be_bound(vs.clone(), rhos.clone(), 0.56).unwrap();
            let mut more = vs.clone();
            more[0] += bump;
            prop_assert!(be_bound(more, rhos.clone(), 0.56).unwrap() <= a * (1.0 + 1e-12));
            let mut r2 = rhos.clone();
            r2[1] *= 2.0;
            let b = be_bound(vs.clone(), r2, 0.56).unwrap();
            let extra = be_bound(vs.clone(), [0.0, rhos[1]], 0.56).unwrap();
            prop_assert!((b - a - extra).abs() <= 1e-10 * b);
        }
    }

    #[test]
    fn inactive_truncation_matches_var_wr() {
        // GW at n = 10: e^{an} Y_u = 1.5^{-5} ≈ 0.13 and |W_2 - 1| ≤ 1, so no summand is cut
        let model = gw();
        let ms = MomentSet::from_model(&model).unwrap();
        let g = generation_at(&model, 10, StreamKey::from_seed(1), DEFAULT_POPULATION_CAP).unwrap();
        let st = truncated_stats(&g, &model, &ms, 2, 20_000, StreamKey::from_seed(2), DEFAULT_POPULATION_CAP).unwrap();
        assert_eq!(st.sum_second, st.sum_second_untruncated);
        let expect = st.sum_weight_sq * ms.var_wr(2);
        // E (W_2 - 1)² estimated from 20000 draws: relative SE < 2%
        assert!((st.sum_second / expect - 1.0).abs() < 0.06, "{} vs {expect}", st.sum_second);
        // all weights equal: per-individual stats identical
        let first = st.summands[0];
        assert!(st.summands.iter().all(|m| (m.second - first.second).abs() <= 1e-12 * first.second));
        assert!((st.sum_second - g.len() as f64 * first.second).abs() <= 1e-9 * st.sum_second);
    }

    #[test]
    fn truncated_never_exceeds_untruncated() {
        let model = OffspringModel::binary_gaussian(0.25).unwrap();
        let ms = MomentSet::from_model(&model).unwrap();
        let g = generation_at(&model, 3, StreamKey::from_seed(3), DEFAULT_POPULATION_CAP).unwrap();
        let st = truncated_stats(&g, &model, &ms, 3, 4000, StreamKey::from_seed(4), DEFAULT_POPULATION_CAP).unwrap();
        for m in &st.summands {
            assert!(m.second <= m.second_untruncated);
            assert!(m.third_abs <= m.third_abs_untruncated);
            assert!(m.second >= 0.0 && m.third_abs >= 0.0);
        }
        assert!(st.sum_second < st.sum_second_untruncated, "truncation should bite at n = 3");
    }

    #[test]
    fn extinct_generation_errors() {
        let model = gw();
        let ms = MomentSet::from_model(&model).unwrap();
        let g = Generation::from_positions(4, vec![]);
        assert_eq!(
            truncated_stats(&g, &model, &ms, 2, 10, StreamKey::from_seed(5), DEFAULT_POPULATION_CAP),
            Err(Error::ExtinctTree { level: 4 })
        );
    }

    #[test]
    fn variance_check_requires_positive_r() {
        let model = gw();
        let ms = MomentSet::from_model(&model).unwrap();
        let err = conditional_variance_limit_check(&model, &ms, &[4], 0, 10, 1, 2, (0.8, 1.2), StreamKey::from_seed(6), DEFAULT_POPULATION_CAP);
        assert!(matches!(err, Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn variance_ratio_small_run() {
        let model = gw();
        let ms = MomentSet::from_model(&model).unwrap();
        let rep = conditional_variance_limit_check(&model, &ms, &[6, 10], 2, 4000, 10, 8, (0.8, 1.2), StreamKey::from_seed(7), DEFAULT_POPULATION_CAP)
            .unwrap();
        assert_eq!(rep.ratios.len(), 20);
        assert!(rep.ratios.iter().all(|v| v.ratio > 0.0 && v.ratio.is_finite()));
    }

    #[test]
    fn be_report_on_gw_tree() {
        let model = gw();
        let ms = MomentSet::from_model(&model).unwrap();
        let g = generation_at(&model, 8, StreamKey::from_seed(8), DEFAULT_POPULATION_CAP).unwrap();
        let rep = conditional_be_report(&g, &model, &ms, 3, 4000, 1000, DEFAULT_C, StreamKey::from_seed(9), DEFAULT_POPULATION_CAP)
            .unwrap();
        assert!(rep.bound > 0.0 && rep.bound_uncentered > 0.0);
        assert!(rep.pass, "{rep:?}");
        assert!((rep.var_ratio - 1.0).abs() < 0.1);
    }
}
