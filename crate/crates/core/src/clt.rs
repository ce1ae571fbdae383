//! Finite-window checks of the tail central limit theorem: covariance of the
//! normalized tail, the Gaussian scale-mixture marginal, conditional
//! normality given a frozen generation, and the log-partition version.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::{conditional_resample, generation_at, simulate_trees, TrajectoryRecord};
use crate::error::{Error, Result};
use crate::model::OffspringModel;
use crate::moments::MomentSet;
use crate::rng::StreamKey;
use crate::stats::{self, KsResult};
use crate::sum::NeumaierSum;

/// Fewest surviving entries a marginal KS test will run on.
pub const MIN_SURVIVORS: usize = 100;

/// `M × d` matrix of normalized tails `(W_∞ - W_{n+r}) / m2^{(n+r)/2}`,
/// `r = 0..d`, with `W_∞` proxied by `W_{n+d-1+R}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailSampleMatrix {
    pub n: u32,
    pub d: u32,
    pub proxy_depth: u32,
    pub rows: Vec<Vec<f64>>,
    /// `W_{n+d-1+R}(2)` per tree.
    pub w2: Vec<f64>,
    pub survived: Vec<bool>,
}

impl TailSampleMatrix {
    pub fn from_trajectories(
        trajectories: &[TrajectoryRecord],
        m2: f64,
        n: u32,
        d: u32,
        proxy_depth: u32,
    ) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidArgument("window d must be positive".into()));
        }
        let deep = n + d - 1 + proxy_depth;
        let half_log = 0.5 * m2.ln();
        let mut rows = Vec::with_capacity(trajectories.len());
        let mut w2 = Vec::with_capacity(trajectories.len());
        let mut survived = Vec::with_capacity(trajectories.len());
        for t in trajectories {
            t.require_depth(deep)?;
            let w_inf = t.w1(deep);
            rows.push(
                (0..d)
                    .map(|r| (w_inf - t.w1(n + r)) / (f64::from(n + r) * half_log).exp())
                    .collect(),
            );
            w2.push(t.w2(deep));
            survived.push(t.survived);
        }
        Ok(TailSampleMatrix { n, d, proxy_depth, rows, w2, survived })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column(&self, r: usize) -> Vec<f64> {
        self.rows.iter().map(|row| row[r]).collect()
    }

    pub fn survivors(&self) -> usize {
        self.survived.iter().filter(|&&s| s).count()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("tree");
        for r in 0..self.d {
            out.push_str(&format!(",U{r}"));
        }
        out.push_str(",W2_proxy,survived\n");
        for (i, row) in self.rows.iter().enumerate() {
            out.push_str(&i.to_string());
            for x in row {
                out.push_str(&format!(",{x}"));
            }
            out.push_str(&format!(",{},{}\n", self.w2[i], u8::from(self.survived[i])));
        }
        out
    }
}

/// Simulates `count` trees (tree `i` on `root.derive(i)`) deep enough for an
/// `n, d, R` window.
#[allow(clippy::too_many_arguments)]
pub fn tail_vector_sample(
    model: &OffspringModel,
    ms: &MomentSet,
    n: u32,
    d: u32,
    proxy_depth: u32,
    count: usize,
    root: StreamKey,
    cap: usize,
) -> Result<TailSampleMatrix> {
    if d == 0 {
        return Err(Error::InvalidArgument("window d must be positive".into()));
    }
    let trees = simulate_trees(model, n + d - 1 + proxy_depth, root, count, cap)?;
    TailSampleMatrix::from_trajectories(&trees, ms.m2, n, d, proxy_depth)
}

/// Sample covariance matrix of the rows selected by `idx` (all rows if `None`).
pub fn covariance_matrix(rows: &[Vec<f64>], idx: Option<&[usize]>) -> Vec<Vec<f64>> {
    let all: Vec<usize>;
    let idx = match idx {
        Some(i) => i,
        None => {
            all = (0..rows.len()).collect();
            &all
        }
    };
    let d = rows.first().map_or(0, Vec::len);
    let m = idx.len() as f64;
    let mut mean = vec![NeumaierSum::new(); d];
    for &i in idx {
        for (acc, x) in mean.iter_mut().zip(&rows[i]) {
            *acc += *x;
        }
    }
    let mean: Vec<f64> = mean.iter().map(|s| s.value() / m).collect();
    let mut cov = vec![vec![0.0; d]; d];
    for r in 0..d {
        for s in r..d {
            let mut acc = NeumaierSum::new();
            for &i in idx {
                acc += (rows[i][r] - mean[r]) * (rows[i][s] - mean[s]);
            }
            cov[r][s] = acc.value() / (m - 1.0);
            cov[s][r] = cov[r][s];
        }
    }
    cov
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovEntry {
    pub r: u32,
    pub s: u32,
    pub empirical: f64,
    pub target: f64,
    /// Exact covariance of the proxied columns, `target·(1 - m2^{deep-n-max(r,s)})`.
    pub proxy_target: f64,
    pub se: f64,
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovarianceReport {
    pub n: u32,
    pub m: usize,
    pub entries: Vec<CovEntry>,
    pub max_abs_z: f64,
    pub z_limit: f64,
    pub pass: bool,
}

impl CovarianceReport {
    pub fn entry(&self, r: u32, s: u32) -> Option<&CovEntry> {
        let (r, s) = (r.min(s), r.max(s));
        self.entries.iter().find(|e| e.r == r && e.s == s)
    }
}

/// Compares the window covariance with `v² m2^{|r-s|/2}`; standard errors
/// come from `replicates` bootstrap resamples of the rows.
pub fn covariance_test(
    ts: &TailSampleMatrix,
    v2: f64,
    m2: f64,
    replicates: usize,
    key: StreamKey,
) -> Result<CovarianceReport> {
    covariance_test_rows(&ts.rows, ts.n, ts.d - 1 + ts.proxy_depth, v2, m2, replicates, key)
}

/// [`covariance_test`] on a bare matrix; `proxy_span` is the distance from
/// column 0 to the proxy level (use `u32::MAX` for exact limits).
pub fn covariance_test_rows(
    rows: &[Vec<f64>],
    n: u32,
    proxy_span: u32,
    v2: f64,
    m2: f64,
    replicates: usize,
    key: StreamKey,
) -> Result<CovarianceReport> {
    const Z_LIMIT: f64 = 4.0;
    if rows.len() < 2 {
        return Err(Error::EmptySample);
    }
    if replicates < 2 {
        return Err(Error::InvalidArgument("need at least two bootstrap replicates".into()));
    }
    let d = rows[0].len();
    let emp = covariance_matrix(rows, None);
    let boot: Vec<Vec<Vec<f64>>> = (0..replicates as u64)
        .into_par_iter()
        .map(|b| covariance_matrix(rows, Some(&stats::resample_indices(rows.len(), key.derive(b)))))
        .collect();
    let mut entries = Vec::new();
    for r in 0..d {
        for s in r..d {
            let reps: Vec<f64> = boot.iter().map(|c| c[r][s]).collect();
            let se = crate::sum::sample_variance(&reps).unwrap_or(0.0).sqrt();
            let target = v2 * m2.powf(0.5 * (s - r) as f64);
            let remaining = i64::from(proxy_span) - s as i64;
            let proxy_target = if proxy_span == u32::MAX {
                target
            } else {
                target * (1.0 - m2.powi(remaining.clamp(0, i64::from(i32::MAX)) as i32))
            };
            let z = if se > 0.0 { (emp[r][s] - target) / se } else if emp[r][s] == target { 0.0 } else { f64::INFINITY };
            entries.push(CovEntry { r: r as u32, s: s as u32, empirical: emp[r][s], target, proxy_target, se, z });
        }
    }
    let max_abs_z = entries.iter().map(|e| e.z.abs()).fold(0.0, f64::max);
    Ok(CovarianceReport { n, m: rows.len(), entries, max_abs_z, z_limit: Z_LIMIT, pass: max_abs_z <= Z_LIMIT })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgreementEntry {
    pub r: u32,
    pub s: u32,
    pub difference: f64,
    pub z: f64,
}

/// Entrywise comparison of two covariance reports taken at different `n`.
pub fn covariance_agreement(a: &CovarianceReport, b: &CovarianceReport) -> (Vec<AgreementEntry>, bool) {
    let entries: Vec<AgreementEntry> = a
        .entries
        .iter()
        .filter_map(|ea| {
            let eb = b.entry(ea.r, ea.s)?;
            let se = (ea.se * ea.se + eb.se * eb.se).sqrt();
            let difference = ea.empirical - eb.empirical;
            Some(AgreementEntry { r: ea.r, s: ea.s, difference, z: if se > 0.0 { difference / se } else { 0.0 } })
        })
        .collect();
    let pass = entries.len() == a.entries.len() && entries.iter().all(|e| e.z.abs() <= 4.0);
    (entries, pass)
}

/// Two-sample KS of a normalized tail column against `sqrt(v² w2)·Z` built
/// from independent `W_∞(2)` proxies. `survived` marks trees alive at the
/// proxy level; extinct trees keep their (zero) entries, as the mixture
/// has the matching atom.
pub fn mixture_marginal_test(
    column: &[f64],
    survived: &[bool],
    w2_samples: &[f64],
    v2: f64,
    key: StreamKey,
) -> Result<KsResult> {
    let alive = survived.iter().filter(|&&s| s).count();
    let alive_w2 = w2_samples.iter().filter(|&&w| w > 0.0).count();
    if alive < MIN_SURVIVORS || alive_w2 < MIN_SURVIVORS {
        return Err(Error::DegenerateSample(format!(
            "{alive} surviving tail entries and {alive_w2} positive W(2) proxies; need {MIN_SURVIVORS}"
        )));
    }
    let synth = synthesize_mixture(w2_samples, v2, key);
    stats::ks_two_sample(column, &synth)
}

/// `sqrt(v² w)·Z_i` for each `w`, with `Z_i` drawn from `key.derive(i)`.
pub fn synthesize_mixture(w: &[f64], v2: f64, key: StreamKey) -> Vec<f64> {
    w.iter()
        .enumerate()
        .map(|(i, &w)| (v2 * w).max(0.0).sqrt() * stats::standard_normal(&mut key.derive(i as u64).rng()))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionalTree {
    pub tree: u64,
    pub population: usize,
    /// `v² m2^{-n} Σ_u Y_u²`
    pub conditional_variance: f64,
    pub sample_mean: f64,
    pub sample_variance: f64,
    pub ks: KsResult,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionalReport {
    pub n: u32,
    pub r: u32,
    pub k: usize,
    pub alpha: f64,
    pub per_tree_alpha: f64,
    /// Variance factor `1 - m2^R` carried by the depth-`R` proxy.
    pub proxy_factor: f64,
    pub extinct_skipped: usize,
    pub trees: Vec<ConditionalTree>,
    pub passed: usize,
}

/// Freezes the first `trees` surviving trees at level `n` and KS-tests `k`
/// conditional resamples of each against `N(0, v² m2^{-n} Σ Y_u²)`, with a
/// Bonferroni-corrected level `alpha / trees`.
#[allow(clippy::too_many_arguments)]
pub fn conditional_normality_test(
    model: &OffspringModel,
    ms: &MomentSet,
    n: u32,
    r: u32,
    proxy_depth: u32,
    k: usize,
    trees: usize,
    alpha: f64,
    root: StreamKey,
    cap: usize,
) -> Result<ConditionalReport> {
    let max_attempts = 100 * trees.max(1) as u64;
    let log_m2 = ms.m2.ln();
    let per_tree_alpha = alpha / trees as f64;
    let mut out = Vec::with_capacity(trees);
    let mut extinct_skipped = 0;
    let mut i = 0u64;
    while out.len() < trees {
        if i >= max_attempts {
            return Err(Error::DegenerateSample(format!(
                "only {} of {trees} trees survived to level {n} in {max_attempts} attempts",
                out.len()
            )));
        }
        let key = root.derive(i);
        let g = generation_at(model, n, key, cap)?;
        if g.is_extinct() {
            extinct_skipped += 1;
            i += 1;
            continue;
        }
        let var = ms.v2 * g.squared_weight_ratio(log_m2);
        let samples = conditional_resample(&g, model, ms, r, proxy_depth, k, key, cap)?;
        let sd = var.sqrt();
        let ks = stats::ks_one_sample(&samples, |x| stats::normal_cdf(x / sd))?;
        out.push(ConditionalTree {
            tree: i,
            population: g.len(),
            conditional_variance: var,
            sample_mean: crate::sum::mean(&samples).unwrap_or(0.0),
            sample_variance: crate::sum::sample_variance(&samples).unwrap_or(0.0),
            pass: !ks.rejects(per_tree_alpha),
            ks,
        });
        i += 1;
    }
    let passed = out.iter().filter(|t| t.pass).count();
    Ok(ConditionalReport {
        n,
        r,
        k,
        alpha,
        per_tree_alpha,
        proxy_factor: 1.0 - ms.m2.powi(proxy_depth as i32),
        extinct_skipped,
        trees: out,
        passed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogCltReport {
    pub n: u32,
    pub ks: KsResult,
    pub extinct_excluded: usize,
    /// Set when the model can die out: the sample is conditioned on survival,
    /// which lies outside the certain-survival hypothesis of the log version.
    pub conditioned_on_survival: bool,
    /// Sample standard deviation of the linear-minus-log paired difference.
    pub slutsky_difference_sd: f64,
}

/// Two-sample KS of `(log W_∞ - log W_n)/m2^{n/2}` against
/// `sqrt(v² w2/w1²)·Z` from independent trees (`root.derive_tag("mixture")`).
#[allow(clippy::too_many_arguments)]
pub fn log_clt_test(
    model: &OffspringModel,
    ms: &MomentSet,
    n: u32,
    proxy_depth: u32,
    count: usize,
    root: StreamKey,
    cap: usize,
) -> Result<LogCltReport> {
    let deep = n + proxy_depth;
    let scale = (0.5 * f64::from(n) * ms.m2.ln()).exp();
    let trees = simulate_trees(model, deep, root, count, cap)?;
    let mut log_tail = Vec::new();
    let mut diffs = Vec::new();
    for t in trees.iter().filter(|t| t.survived) {
        let (wn, wd) = (t.w1(n), t.w1(deep));
        let log_v = (wd.ln() - wn.ln()) / scale;
        log_tail.push(log_v);
        diffs.push((wd - wn) / (wn * scale) - log_v);
    }
    let extinct_excluded = count - log_tail.len();
    let other = simulate_trees(model, deep, root.derive_tag("mixture"), count, cap)?;
    let ratio: Vec<f64> = other
        .iter()
        .filter(|t| t.survived)
        .map(|t| t.w2(deep) / (t.w1(deep) * t.w1(deep)))
        .collect();
    if log_tail.len() < MIN_SURVIVORS || ratio.len() < MIN_SURVIVORS {
        return Err(Error::DegenerateSample(format!(
            "{} and {} surviving trees; need {MIN_SURVIVORS}",
            log_tail.len(),
            ratio.len()
        )));
    }
    let synth = synthesize_mixture(&ratio, ms.v2, root.derive_tag("normals"));
    Ok(LogCltReport {
        n,
        ks: stats::ks_two_sample(&log_tail, &synth)?,
        extinct_excluded,
        conditioned_on_survival: model.can_go_extinct(),
        slutsky_difference_sd: crate::sum::sample_variance(&diffs).unwrap_or(0.0).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{Generation, DEFAULT_POPULATION_CAP};
    use crate::model::Atom;

    fn gw() -> OffspringModel {
        OffspringModel::galton_watson(vec![0.0, 0.5, 0.5]).unwrap()
    }

    /// Rows with covariance `v² m2^{|r-s|/2}`: AR(1) with coefficient sqrt(m2).
    fn synthetic_rows(m: usize, d: usize, v2: f64, m2: f64, key: StreamKey) -> Vec<Vec<f64>> {
        let rho = m2.sqrt();
        (0..m as u64)
            .map(|i| {
                let mut rng = key.derive(i).rng();
                let mut row = Vec::with_capacity(d);
                let mut x = stats::standard_normal(&mut rng);
                row.push(x);
                for _ in 1..d {
                    x = rho * x + (1.0 - rho * rho).sqrt() * stats::standard_normal(&mut rng);
                    row.push(x);
                }
                row.into_iter().map(|x| x * v2.sqrt()).collect()
            })
            .collect()
    }

    #[test]
    fn covariance_target_example() {
        let rows = synthetic_rows(4000, 4, 1.0 / 3.0, 2.0 / 3.0, StreamKey::from_seed(1));
        let rep = covariance_test_rows(&rows, 0, u32::MAX, 1.0 / 3.0, 2.0 / 3.0, 200, StreamKey::from_seed(2)).unwrap();
        assert!((rep.entry(0, 2).unwrap().target - 2.0 / 9.0).abs() < 1e-15);
        assert!((rep.entry(1, 1).unwrap().target - 1.0 / 3.0).abs() < 1e-15);
        assert!(rep.pass, "max |z| = {}", rep.max_abs_z);
    }

    #[test]
    fn covariance_test_rejects_wrong_target() {
        let rows = synthetic_rows(4000, 3, 0.5, 0.25, StreamKey::from_seed(3));
        let rep = covariance_test_rows(&rows, 0, u32::MAX, 1.0 / 3.0, 2.0 / 3.0, 200, StreamKey::from_seed(4)).unwrap();
        assert!(!rep.pass);
    }

    #[test]
    fn covariance_matrix_hand_example() {
        let rows = vec![vec![1.0, 2.0], vec![3.0, 6.0], vec![5.0, 4.0]];
        let c = covariance_matrix(&rows, None);
        assert_eq!(c[0][0], 4.0);
        assert_eq!(c[1][1], 4.0);
        assert_eq!(c[0][1], 2.0);
    }

    #[test]
    fn matrix_from_hand_trajectory() {
        use crate::engine::LevelSummary;
        let lv = |n, w| LevelSummary { n, w1: w, w2: w, pop: 1, sup_weight: 1.0 };
        let t = TrajectoryRecord { seed: 0, survived: true, levels: vec![lv(0, 1.0), lv(1, 1.2), lv(2, 0.9), lv(3, 1.0)] };
        let ts = TailSampleMatrix::from_trajectories(&[t], 0.25, 1, 2, 0).unwrap();
        // proxy level 1 + 2 - 1 + 0 = 2
        assert_eq!(ts.rows[0], vec![(0.9 - 1.2) / 0.5, 0.0]);
        assert!(TailSampleMatrix::from_trajectories(&[], 0.25, 1, 0, 0).is_err());
    }

    #[test]
    fn tail_columns_are_centered() {
        let model = gw();
        let ms = MomentSet::from_model(&model).unwrap();
        let ts = tail_vector_sample(&model, &ms, 2, 1, 8, 4000, StreamKey::from_seed(5), DEFAULT_POPULATION_CAP).unwrap();
        let col = ts.column(0);
        let mean = crate::sum::mean(&col).unwrap();
        let se = (crate::sum::sample_variance(&col).unwrap() / col.len() as f64).sqrt();
        assert!(mean.abs() < 4.0 * se, "mean {mean}, se {se}");
        assert!(ts.to_csv().starts_with("tree,U0,W2_proxy,survived\n0,"));
    }

    #[test]
    fn mixture_self_test() {
        // a fresh synthesis of the mixture against itself
        let w: Vec<f64> = (0..3000).map(|i| 0.5 + (i % 7) as f64 / 7.0).collect();
        let col = synthesize_mixture(&w, 1.0 / 3.0, StreamKey::from_seed(6));
        let ks = mixture_marginal_test(&col, &vec![true; col.len()], &w, 1.0 / 3.0, StreamKey::from_seed(7)).unwrap();
        assert!(ks.p_value > 0.001, "{ks:?}");
    }

    #[test]
    fn mixture_rejects_all_extinct() {
        let err = mixture_marginal_test(&[0.0; 500], &[false; 500], &[0.0; 500], 1.0, StreamKey::from_seed(8));
        assert!(matches!(err, Err(Error::DegenerateSample(_))));
    }

    #[test]
    fn conditional_variance_gw_two_ways() {
        // every Y_u = m^{-n}: v² m2^{-n} Σ Y_u² = v² · pop · m^{-2n} · m^{n} = v² W_n
        let model = gw();
        let ms = MomentSet::from_model(&model).unwrap();
        let g = generation_at(&model, 6, StreamKey::from_seed(9), DEFAULT_POPULATION_CAP).unwrap();
        let a = ms.v2 * g.squared_weight_ratio(ms.m2.ln());
        let b = ms.v2 * g.len() as f64 / 1.5f64.powi(6);
        assert!((a - b).abs() < 1e-12 * b);
    }

    #[test]
    fn conditional_single_ancestor() {
        // n = 0: samples follow (W_∞ - W_r)/m2^{r/2}, variance v²(1 - m2^R)
        let model = gw();
        let ms = MomentSet::from_model(&model).unwrap();
        let s = conditional_resample(&Generation::ancestor(), &model, &ms, 2, 10, 6000, StreamKey::from_seed(10), DEFAULT_POPULATION_CAP)
            .unwrap();
        let mean = crate::sum::mean(&s).unwrap();
        let var = crate::sum::sample_variance(&s).unwrap();
        let target = ms.v2 * (1.0 - ms.m2.powi(10));
        assert!(mean.abs() < 4.0 * (var / 6000.0).sqrt());
        let reps = stats::bootstrap(s.len(), 300, StreamKey::from_seed(11), |idx| {
            let xs: Vec<f64> = idx.iter().map(|&i| s[i]).collect();
            crate::sum::sample_variance(&xs).unwrap()
        });
        let (lo, hi) = stats::percentile_interval(&reps, 0.999);
        assert!(lo <= target && target <= hi, "{target} not in ({lo}, {hi})");
    }

    #[test]
    fn conditional_normality_small_run() {
        let model = OffspringModel::binary_gaussian(0.25).unwrap();
        let ms = MomentSet::from_model(&model).unwrap();
        let rep = conditional_normality_test(&model, &ms, 6, 0, 8, 400, 3, 0.05, StreamKey::from_seed(12), DEFAULT_POPULATION_CAP)
            .unwrap();
        assert_eq!(rep.trees.len(), 3);
        assert_eq!(rep.extinct_skipped, 0);
        assert!((rep.per_tree_alpha - 0.05 / 3.0).abs() < 1e-15);
        for t in &rep.trees {
            assert!(t.sample_mean.abs() < 4.0 * (t.sample_variance / 400.0).sqrt());
        }
    }

    #[test]
    fn conditional_normality_needs_survivors() {
        let dead = OffspringModel::tabulated(vec![Atom { prob: 1.0, displacements: vec![] }], None).unwrap();
        let ms = MomentSet { m2: 0.5, m2_prime: -1.0, sigma2: 0.0, v2: 0.0, a: 0.5 * 2f64.ln(), renewal: crate::moments::RenewalConstant::NonArithmetic { c_a: 1.0 } };
        let err = conditional_normality_test(&dead, &ms, 2, 0, 2, 10, 1, 0.05, StreamKey::from_seed(13), DEFAULT_POPULATION_CAP);
        assert!(matches!(err, Err(Error::DegenerateSample(_))));
    }

    #[test]
    fn log_clt_runs_unconditionally_for_binary_gaussian() {
        let model = OffspringModel::binary_gaussian(0.25).unwrap();
        let ms = MomentSet::from_model(&model).unwrap();
        let rep = log_clt_test(&model, &ms, 3, 6, 400, StreamKey::from_seed(14), DEFAULT_POPULATION_CAP).unwrap();
        assert!(!rep.conditioned_on_survival);
        assert_eq!(rep.extinct_excluded, 0);
        assert!(rep.slutsky_difference_sd.is_finite());
    }

    #[test]
    fn slutsky_difference_shrinks() {
        let model = gw();
        let ms = MomentSet::from_model(&model).unwrap();
        let a = log_clt_test(&model, &ms, 2, 10, 1500, StreamKey::from_seed(15), DEFAULT_POPULATION_CAP).unwrap();
        let b = log_clt_test(&model, &ms, 10, 10, 1500, StreamKey::from_seed(15), DEFAULT_POPULATION_CAP).unwrap();
        assert!(b.slutsky_difference_sd < a.slutsky_difference_sd, "{} vs {}", a.slutsky_difference_sd, b.slutsky_difference_sd);
    }
}
