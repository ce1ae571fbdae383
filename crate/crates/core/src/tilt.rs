//! The associated random walk, the renewal function
//! `V(x) = Σ_n e^{an} P(S_n - an ≤ log x)` and the tail integral
//! `∫_{[x,∞)} y^{-2} dV(y)`.
//!
//! Direct simulation of the associated walk makes `V` a sum of rare events
//! (`e^{an}` times a large-deviation probability). The default estimator
//! samples increments from the squared tilt
//! `Q(dx) = E[Σ e^{-2X_i} δ_{X_i}(dx)] / m(2)` instead. Under `Q` the path
//! likelihood ratio is `m(2)^n e^{S_n}`, so with `D_n = S_n - an`
//!
//! ```text
//! e^{an} P(D_n ≤ y)          = E_Q[e^{D_n}  1{D_n ≤ y}]
//! e^{an} E[e^{-2D_n}; D_n ≥ y] = E_Q[e^{-D_n} 1{D_n ≥ y}]
//! ```
//!
//! and `D_n` drifts upwards at rate `1/c_a` under `Q`.

use rand_core::RngCore;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ModelKind, OffspringModel};
use crate::moments::{MomentSet, RenewalConstant};
use crate::rng::{uniform01, StreamKey};
use crate::sum::NeumaierSum;

/// Slack for lattice comparisons `D_n ≤ y`: on an arithmetic walk `D_n` and
/// `y` are both multiples of the span, accumulated with rounding.
pub const LATTICE_EPS: f64 = 1e-9;

/// Last-term share of the estimate above which truncation is flagged.
pub const TRUNCATION_SHARE: f64 = 0.01;

const PATH_BLOCK: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TiltedWalkSpec {
    /// Increments are sampled exactly (weight 1) rather than by weighted atoms.
    pub closed_form: bool,
    /// `E S_1 = -m'(1)`.
    pub drift: f64,
    /// `a = -½ log m(2)`.
    pub a: f64,
    pub span: Option<f64>,
}

impl TiltedWalkSpec {
    pub fn new(model: &OffspringModel) -> Result<Self> {
        Ok(TiltedWalkSpec {
            closed_form: !matches!(model.kind(), ModelKind::Tabulated { .. }),
            drift: -model.laplace_derivative(1.0)?,
            a: -0.5 * model.laplace_transform(2.0).ln(),
            span: model.arithmetic_span(),
        })
    }
}

fn gaussian<R: RngCore + ?Sized>(rng: &mut R, mean: f64, var: f64) -> f64 {
    let z: f64 = StandardNormal.sample(&mut *rng);
    mean + var.sqrt() * z
}

/// Picks a point of one realization with probability `∝ e^{-θ X_i}`;
/// returns it with weight `Σ_j e^{-θ X_j} / norm`. An empty realization
/// yields the weight-0 sentinel `(0, 0)`.
fn weighted_point<R: RngCore + ?Sized>(xs: &[f64], theta: f64, norm: f64, rng: &mut R) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let w: Vec<f64> = xs.iter().map(|x| (-theta * x).exp()).collect();
    let total: f64 = w.iter().sum();
    let mut u = uniform01(rng) * total;
    for (x, wi) in xs.iter().zip(&w) {
        if u < *wi {
            return (*x, total / norm);
        }
        u -= wi;
    }
    (*xs.last().expect("non-empty"), total / norm)
}

fn tilted_draw<R: RngCore + ?Sized>(model: &OffspringModel, theta: f64, norm: f64, rng: &mut R) -> (f64, f64) {
    match model.kind() {
        ModelKind::GaltonWatsonEmbedding { log_m, .. } => (*log_m, 1.0),
        // exponential tilt of N(μ, τ²) by e^{-θx} is N(μ - θτ², τ²)
        ModelKind::BinaryGaussian { tau2, mu } | ModelKind::PoissonGaussian { tau2, mu, .. } => {
            (gaussian(rng, mu - theta * tau2, *tau2), 1.0)
        }
        ModelKind::Tabulated { .. } => {
            let mut xs = Vec::new();
            model.sample_offspring(rng, &mut xs);
            weighted_point(&xs, theta, norm, rng)
        }
    }
}

/// One increment of the associated walk: a draw from
/// `Σ̄_1(dx) = E[Σ e^{-X_i} δ_{X_i}(dx)]` as `(value, weight)`, `E weight = 1`.
pub fn tilted_increment<R: RngCore + ?Sized>(model: &OffspringModel, rng: &mut R) -> (f64, f64) {
    tilted_draw(model, 1.0, 1.0, rng)
}

/// One increment under the squared tilt `E[Σ e^{-2X_i} δ_{X_i}] / m(2)`.
pub fn squared_tilt_increment<R: RngCore + ?Sized>(model: &OffspringModel, m2: f64, rng: &mut R) -> (f64, f64) {
    tilted_draw(model, 2.0, m2, rng)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    /// Importance sampling under the squared tilt.
    #[default]
    SquaredTilt,
    /// Literal associated walk with `e^{an}` weights.
    Associated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    Renewal,
    TailIntegral,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenewalEstimate {
    pub quantity: Quantity,
    pub estimator: Estimator,
    pub log_x: Vec<f64>,
    pub values: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub n_max: u32,
    pub paths: usize,
    /// Contribution of the `n_max` term.
    pub last_terms: Vec<f64>,
    /// Geometric extrapolation of the omitted terms from the last two; `None`
    /// when the last terms are not decaying.
    pub remainder: Vec<Option<f64>>,
    pub truncation_warning: Vec<bool>,
}

impl RenewalEstimate {
    pub fn x(&self) -> Vec<f64> {
        self.log_x.iter().map(|l| l.exp()).collect()
    }

    pub fn to_csv(&self, target: Option<&[f64]>) -> String {
        let mut out = String::from("x,log_x,estimate,stderr,ratio_to_asymptote\n");
        for (i, l) in self.log_x.iter().enumerate() {
            let ratio = target.map_or(String::new(), |t| (self.values[i] / t[i]).to_string());
            out.push_str(&format!("{},{l},{},{},{ratio}\n", l.exp(), self.values[i], self.std_errors[i]));
        }
        out
    }
}

struct Block {
    count: f64,
    sum: Vec<NeumaierSum>,
    // Welford mean and centered sum of squares per grid point
    mean: Vec<f64>,
    m2: Vec<f64>,
    // term_sum[n][j]
    terms: Vec<Vec<NeumaierSum>>,
}

fn run_block(
    model: &OffspringModel,
    ms: &MomentSet,
    log_x: &[f64],
    n_max: u32,
    quantity: Quantity,
    estimator: Estimator,
    key: StreamKey,
    paths: std::ops::Range<usize>,
) -> Block {
    let g = log_x.len();
    let mut block = Block {
        count: 0.0,
        sum: vec![NeumaierSum::new(); g],
        mean: vec![0.0; g],
        m2: vec![0.0; g],
        terms: vec![vec![NeumaierSum::new(); g]; n_max as usize + 1],
    };
    let mut contrib = vec![0.0; g];
    for p in paths {
        let mut rng = key.derive(p as u64).rng();
        let mut d = 0.0; // D_n = S_n - an
        let mut w = 1.0; // product of step weights
        contrib.iter_mut().for_each(|c| *c = 0.0);
        for n in 0..=n_max {
            if n > 0 {
                let (x, wi) = match estimator {
                    Estimator::SquaredTilt => squared_tilt_increment(model, ms.m2, &mut rng),
                    Estimator::Associated => tilted_increment(model, &mut rng),
                };
                d += x - ms.a;
                w *= wi;
            }
            if w == 0.0 {
                break;
            }
            let nf = f64::from(n);
            for (j, &y) in log_x.iter().enumerate() {
                let slack = LATTICE_EPS * (1.0 + y.abs());
                let t = match (quantity, estimator) {
                    (Quantity::Renewal, Estimator::SquaredTilt) if d <= y + slack => w * d.exp(),
                    (Quantity::Renewal, Estimator::Associated) if d <= y + slack => w * (ms.a * nf).exp(),
                    (Quantity::TailIntegral, Estimator::SquaredTilt) if d >= y - slack => w * (-d).exp(),
                    (Quantity::TailIntegral, Estimator::Associated) if d >= y - slack => w * (ms.a * nf - 2.0 * d).exp(),
                    _ => 0.0,
                };
                if t != 0.0 {
                    contrib[j] += t;
                    block.terms[n as usize][j] += t;
                }
            }
        }
        block.count += 1.0;
        for j in 0..g {
            block.sum[j] += contrib[j];
            let delta = contrib[j] - block.mean[j];
            block.mean[j] += delta / block.count;
            block.m2[j] += delta * (contrib[j] - block.mean[j]);
        }
    }
    block
}

#[allow(clippy::too_many_arguments)]
fn estimate_series(
    model: &OffspringModel,
    ms: &MomentSet,
    log_x: &[f64],
    n_max: u32,
    paths: usize,
    key: StreamKey,
    quantity: Quantity,
    estimator: Estimator,
) -> Result<RenewalEstimate> {
    if paths == 0 {
        return Err(Error::InvalidArgument("paths must be positive".into()));
    }
    if log_x.is_empty() || log_x.iter().any(|l| !l.is_finite()) {
        return Err(Error::InvalidArgument("x grid must be non-empty and finite".into()));
    }
    if !(ms.c_a() > 0.0) {
        return Err(Error::Domain(format!(
            "renewal series needs -m'(2)/m(2) > -log m(2)/2 (c_a = {})",
            ms.c_a()
        )));
    }
    let blocks: Vec<Block> = (0..paths.div_ceil(PATH_BLOCK))
        .into_par_iter()
        .map(|b| {
            let lo = b * PATH_BLOCK;
            run_block(model, ms, log_x, n_max, quantity, estimator, key, lo..(lo + PATH_BLOCK).min(paths))
        })
        .collect();
    let g = log_x.len();
    let p = paths as f64;
    let mut sum = vec![NeumaierSum::new(); g];
    let (mut count, mut mean, mut m2) = (0.0, vec![0.0; g], vec![0.0; g]);
    let mut terms = vec![vec![NeumaierSum::new(); g]; n_max as usize + 1];
    for b in blocks {
        let total = count + b.count;
        for j in 0..g {
            sum[j] = sum[j] + b.sum[j];
            // pairwise merge of centered moments
            let delta = b.mean[j] - mean[j];
            m2[j] += b.m2[j] + delta * delta * count * b.count / total;
            mean[j] += delta * b.count / total;
        }
        count = total;
        for (acc, bt) in terms.iter_mut().zip(b.terms) {
            for j in 0..g {
                acc[j] = acc[j] + bt[j];
            }
        }
    }
    let values: Vec<f64> = sum.iter().map(|s| s.value() / p).collect();
    let std_errors: Vec<f64> = (0..g)
        .map(|j| {
            if paths < 2 {
                return f64::NAN;
            }
            (m2[j] / (p - 1.0) / p).sqrt()
        })
        .collect();
    let last_terms: Vec<f64> = (0..g).map(|j| terms[n_max as usize][j].value() / p).collect();
    let remainder: Vec<Option<f64>> = (0..g)
        .map(|j| {
            if n_max == 0 {
                return None;
            }
            let prev = terms[n_max as usize - 1][j].value() / p;
            let last = last_terms[j];
            if last == 0.0 {
                return Some(0.0);
            }
            let q = last / prev;
            (q > 0.0 && q < 1.0).then(|| last * q / (1.0 - q))
        })
        .collect();
    let truncation_warning = (0..g).map(|j| last_terms[j] > TRUNCATION_SHARE * values[j]).collect();
    Ok(RenewalEstimate {
        quantity,
        estimator,
        log_x: log_x.to_vec(),
        values,
        std_errors,
        n_max,
        paths,
        last_terms,
        remainder,
        truncation_warning,
    })
}

/// `V̂(x)` at `x = e^{log_x[j]}` from `paths` tilted paths of `n_max` steps;
/// path `p` uses stream `key.derive(p)`.
#[allow(clippy::too_many_arguments)]
pub fn renewal_v(
    model: &OffspringModel,
    ms: &MomentSet,
    log_x: &[f64],
    n_max: u32,
    paths: usize,
    key: StreamKey,
    estimator: Estimator,
) -> Result<RenewalEstimate> {
    estimate_series(model, ms, log_x, n_max, paths, key, Quantity::Renewal, estimator)
}

/// Estimates of `∫_{[x,∞)} y^{-2} dV(y) = Σ_n e^{an} E[e^{-2D_n}; D_n ≥ log x]`.
#[allow(clippy::too_many_arguments)]
pub fn tail_integral(
    model: &OffspringModel,
    ms: &MomentSet,
    log_x: &[f64],
    n_max: u32,
    paths: usize,
    key: StreamKey,
    estimator: Estimator,
) -> Result<RenewalEstimate> {
    estimate_series(model, ms, log_x, n_max, paths, key, Quantity::TailIntegral, estimator)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    NonArithmetic,
    Arithmetic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticPoint {
    pub log_x: f64,
    pub estimate: f64,
    pub std_error: f64,
    pub target: f64,
    pub ratio: f64,
    pub relative_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticsReport {
    pub regime: Regime,
    pub quantity: Quantity,
    /// `c_a` or `d_a`.
    pub constant: f64,
    pub points: Vec<AsymptoticPoint>,
}

impl AsymptoticsReport {
    pub fn max_relative_error(&self) -> f64 {
        self.points.iter().map(|p| p.relative_error).fold(0.0, f64::max)
    }
}

/// Compares an estimate with `c_a x` (or `c_a/x` for the tail integral); in
/// the arithmetic regime with `d_a` on lattice points `x = e^{λ_a n}`.
pub fn asymptotics_check(est: &RenewalEstimate, ms: &MomentSet, regime: Regime) -> Result<AsymptoticsReport> {
    let constant = match (regime, ms.renewal) {
        (Regime::NonArithmetic, RenewalConstant::NonArithmetic { c_a }) => c_a,
        (Regime::Arithmetic, RenewalConstant::Arithmetic { span, d_a, .. }) => {
            for &l in &est.log_x {
                let k = l / span;
                if (k - k.round()).abs() > 1e-6 {
                    return Err(Error::InvalidArgument(format!("log x = {l} is not on the lattice of span {span}")));
                }
            }
            d_a
        }
        (r, c) => {
            return Err(Error::RegimeMismatch(format!("requested {r:?} but the model's walk is {c:?}")));
        }
    };
    let points = est
        .log_x
        .iter()
        .enumerate()
        .map(|(j, &l)| {
            let target = match est.quantity {
                Quantity::Renewal => constant * l.exp(),
                Quantity::TailIntegral => constant * (-l).exp(),
            };
            let ratio = est.values[j] / target;
            AsymptoticPoint {
                log_x: l,
                estimate: est.values[j],
                std_error: est.std_errors[j],
                target,
                ratio,
                relative_error: (ratio - 1.0).abs(),
            }
        })
        .collect();
    Ok(AsymptoticsReport { regime, quantity: est.quantity, constant, points })
}

/// `V(e^{λk})` truncated at `n_max` when the squared-tilt walk is the
/// deterministic lattice walk of span `λ` (Galton–Watson embedding):
/// `Σ_{j=0}^{min(k, n_max)} e^{λj}`.
pub fn lattice_renewal_exact(span: f64, k: u32, n_max: u32) -> f64 {
    (0..=k.min(n_max)).map(|j| (span * f64::from(j)).exp()).sum::<NeumaierSum>().value()
}

/// Tail-integral counterpart of [`lattice_renewal_exact`]:
/// `Σ_{j=k}^{n_max} e^{-λj}`.
pub fn lattice_tail_exact(span: f64, k: u32, n_max: u32) -> f64 {
    (k..=n_max).map(|j| (-span * f64::from(j)).exp()).sum::<NeumaierSum>().value()
}
