//! Offspring/displacement laws of the branching random walk.
//!
//! An [`OffspringModel`] is one realization law of the point process
//! `Σ_{i≤J} δ_{X_i}`: it samples `(X_1, …, X_J)` and knows the Laplace
//! transform `m(θ) = E Σ e^{-θ X_i}` of its intensity in closed form.
//! Gaussian kinds derive their displacement mean from the normalization
//! `m(1) = 1`, so they can never be built unnormalized.

use std::collections::BTreeMap;
use std::fmt;

use rand::Rng;
use rand_core::RngCore;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::uniform01;
use crate::sum::{compensated_sum, NeumaierSum};

/// Tolerance on `m(1) = 1`.
pub const NORMALIZATION_TOL: f64 = 1e-12;
/// Grid size for the monotonicity check of `r ↦ m(r)^{1/r}` on `[1, 2]`.
pub const MONOTONICITY_GRID: usize = 101;
/// Slack allowed between successive grid values of `m(r)^{1/r}`.
pub const MONOTONICITY_SLACK: f64 = 1e-10;

/// A finite discrete law on `{0, 1, …, K}` sampled by inversion.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteLaw {
    probs: Vec<f64>,
    cumulative: Vec<f64>,
}

impl DiscreteLaw {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidModel("empty probability vector".into()));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::InvalidModel("probabilities must be finite and non-negative".into()));
        }
        let total = compensated_sum(probs.iter().copied());
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidModel(format!("probabilities sum to {total}, not 1")));
        }
        let mut acc = NeumaierSum::new();
        let mut cumulative: Vec<f64> = probs
            .iter()
            .map(|&p| {
                acc += p;
                acc.value() / total
            })
            .collect();
        *cumulative.last_mut().unwrap() = 1.0;
        Ok(DiscreteLaw { probs, cumulative })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    #[inline]
    pub fn sample<R: RngCore + ?Sized>(&self, rng: &mut R) -> usize {
        let u = uniform01(rng);
        // small supports: a linear scan beats binary search
        self.cumulative
            .iter()
            .position(|&c| u < c)
            .unwrap_or(self.cumulative.len() - 1)
    }

    pub fn mean(&self) -> f64 {
        compensated_sum(self.probs.iter().enumerate().map(|(k, p)| k as f64 * p))
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        compensated_sum(self.probs.iter().enumerate().map(|(k, p)| (k as f64 - m).powi(2) * p))
    }
}

/// One atom of a tabulated point process: with probability `prob` the
/// offspring displacements are exactly `displacements` (so `J` is its length).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub prob: f64,
    pub displacements: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelKind {
    /// Galton–Watson genealogy with every displacement equal to `log m`.
    GaltonWatsonEmbedding { offspring: DiscreteLaw, log_m: f64 },
    /// Two children, i.i.d. `N(μ, τ²)` displacements, `μ = log 2 + τ²/2`.
    BinaryGaussian { tau2: f64, mu: f64 },
    /// `Poisson(λ)` children, i.i.d. `N(μ, τ²)` displacements, `μ = log λ + τ²/2`.
    PoissonGaussian { lambda: f64, tau2: f64, mu: f64, poisson: Poisson<f64> },
    /// Finite list of atoms.
    Tabulated { atoms: Vec<Atom>, law: DiscreteLaw },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KindName {
    GaltonWatsonEmbedding,
    BinaryGaussian,
    PoissonGaussian,
    Tabulated,
}

impl fmt::Display for KindName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            KindName::GaltonWatsonEmbedding => "GaltonWatsonEmbedding",
            KindName::BinaryGaussian => "BinaryGaussian",
            KindName::PoissonGaussian => "PoissonGaussian",
            KindName::Tabulated => "Tabulated",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for KindName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "GaltonWatsonEmbedding" => Ok(KindName::GaltonWatsonEmbedding),
            "BinaryGaussian" => Ok(KindName::BinaryGaussian),
            "PoissonGaussian" => Ok(KindName::PoissonGaussian),
            "Tabulated" => Ok(KindName::Tabulated),
            other => Err(Error::InvalidModel(format!("unknown model kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OffspringModel {
    kind: ModelKind,
    arithmetic_span: Option<f64>,
}

impl OffspringModel {
    /// Galton–Watson embedding for the offspring pmf `(p_0, …, p_K)`.
    pub fn galton_watson(pmf: Vec<f64>) -> Result<Self> {
        let offspring = DiscreteLaw::new(pmf)?;
        let m = offspring.mean();
        if m <= 0.0 {
            return Err(Error::InvalidModel("offspring mean must be positive".into()));
        }
        let log_m = m.ln();
        // S_n - a n = n·(log m)/2 lives on a lattice of span (log m)/2
        let arithmetic_span = (log_m > 0.0).then_some(0.5 * log_m);
        Ok(OffspringModel { kind: ModelKind::GaltonWatsonEmbedding { offspring, log_m }, arithmetic_span })
    }

    pub fn binary_gaussian(tau2: f64) -> Result<Self> {
        check_tau2(tau2)?;
        let mu = 2f64.ln() + 0.5 * tau2;
        Ok(OffspringModel { kind: ModelKind::BinaryGaussian { tau2, mu }, arithmetic_span: None })
    }

    pub fn poisson_gaussian(lambda: f64, tau2: f64) -> Result<Self> {
        check_tau2(tau2)?;
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::InvalidModel(format!("Poisson mean must be positive, got {lambda}")));
        }
        let poisson = Poisson::new(lambda).map_err(|e| Error::InvalidModel(e.to_string()))?;
        let mu = lambda.ln() + 0.5 * tau2;
        Ok(OffspringModel { kind: ModelKind::PoissonGaussian { lambda, tau2, mu, poisson }, arithmetic_span: None })
    }

    /// Tabulated point process. `arithmetic_span` declares the lattice span
    /// of the associated walk `S_n - a n` when it is arithmetic.
    pub fn tabulated(atoms: Vec<Atom>, arithmetic_span: Option<f64>) -> Result<Self> {
        if atoms.iter().any(|a| a.displacements.iter().any(|x| !x.is_finite())) {
            return Err(Error::InvalidModel("displacements must be finite".into()));
        }
        if let Some(span) = arithmetic_span {
            if !(span.is_finite() && span > 0.0) {
                return Err(Error::InvalidModel(format!("arithmetic span must be positive, got {span}")));
            }
        }
        let law = DiscreteLaw::new(atoms.iter().map(|a| a.prob).collect())?;
        Ok(OffspringModel { kind: ModelKind::Tabulated { atoms, law }, arithmetic_span })
    }

    /// Tabulated model shifted by `log m(1)` so that `m(1) = 1`.
    pub fn tabulated_normalized(mut atoms: Vec<Atom>, arithmetic_span: Option<f64>) -> Result<Self> {
        let raw = Self::tabulated(atoms.clone(), None)?;
        let m1 = raw.laplace_transform(1.0);
        if !(m1.is_finite() && m1 > 0.0) {
            return Err(Error::InvalidModel(format!("cannot normalize: m(1) = {m1}")));
        }
        let shift = m1.ln();
        for a in &mut atoms {
            for x in &mut a.displacements {
                *x += shift;
            }
        }
        Self::tabulated(atoms, arithmetic_span)
    }

    pub fn kind(&self) -> &ModelKind {
        &self.kind
    }

    pub fn kind_name(&self) -> KindName {
        match self.kind {
            ModelKind::GaltonWatsonEmbedding { .. } => KindName::GaltonWatsonEmbedding,
            ModelKind::BinaryGaussian { .. } => KindName::BinaryGaussian,
            ModelKind::PoissonGaussian { .. } => KindName::PoissonGaussian,
            ModelKind::Tabulated { .. } => KindName::Tabulated,
        }
    }

    /// Span `λ_a` of the lattice of `S_n - a n`, if the associated walk is arithmetic.
    pub fn arithmetic_span(&self) -> Option<f64> {
        self.arithmetic_span
    }

    /// Offspring law of the embedded Galton–Watson process, if any.
    pub fn galton_watson_law(&self) -> Option<&DiscreteLaw> {
        match &self.kind {
            ModelKind::GaltonWatsonEmbedding { offspring, .. } => Some(offspring),
            _ => None,
        }
    }

    /// `E J`.
    pub fn mean_offspring(&self) -> f64 {
        match &self.kind {
            ModelKind::GaltonWatsonEmbedding { offspring, .. } => offspring.mean(),
            ModelKind::BinaryGaussian { .. } => 2.0,
            ModelKind::PoissonGaussian { lambda, .. } => *lambda,
            ModelKind::Tabulated { atoms, .. } => {
                compensated_sum(atoms.iter().map(|a| a.prob * a.displacements.len() as f64))
            }
        }
    }

    /// Whether `P(J = 0) > 0`.
    pub fn can_go_extinct(&self) -> bool {
        match &self.kind {
            ModelKind::GaltonWatsonEmbedding { offspring, .. } => offspring.probs()[0] > 0.0,
            ModelKind::BinaryGaussian { .. } => false,
            ModelKind::PoissonGaussian { .. } => true,
            ModelKind::Tabulated { atoms, .. } => atoms.iter().any(|a| a.prob > 0.0 && a.displacements.is_empty()),
        }
    }

    /// `m(θ) = E Σ e^{-θ X_i}`; `+∞` outside the domain.
    pub fn laplace_transform(&self, theta: f64) -> f64 {
        match &self.kind {
            ModelKind::GaltonWatsonEmbedding { offspring, log_m } => offspring.mean() * (-theta * log_m).exp(),
            ModelKind::BinaryGaussian { tau2, mu } => 2.0 * gaussian_mgf(theta, *mu, *tau2),
            ModelKind::PoissonGaussian { lambda, tau2, mu, .. } => lambda * gaussian_mgf(theta, *mu, *tau2),
            ModelKind::Tabulated { atoms, .. } => compensated_sum(
                atoms
                    .iter()
                    .flat_map(|a| a.displacements.iter().map(move |x| a.prob * (-theta * x).exp())),
            ),
        }
    }

    /// `m'(θ)`. Closed form for the built-in kinds; Richardson-extrapolated
    /// central differences for tabulated models.
    pub fn laplace_derivative(&self, theta: f64) -> Result<f64> {
        let m = self.laplace_transform(theta);
        if !m.is_finite() {
            return Err(Error::Domain(format!("m({theta}) is infinite")));
        }
        Ok(match &self.kind {
            ModelKind::GaltonWatsonEmbedding { log_m, .. } => -log_m * m,
            ModelKind::BinaryGaussian { tau2, mu } | ModelKind::PoissonGaussian { tau2, mu, .. } => {
                m * (-mu + theta * tau2)
            }
            ModelKind::Tabulated { .. } => richardson_derivative(|t| self.laplace_transform(t), theta, 1e-2),
        })
    }

    /// `E[W_1(1)^2]` where `W_1(1) = Σ e^{-X_i}`.
    fn w1_second_moment(&self) -> f64 {
        match &self.kind {
            ModelKind::GaltonWatsonEmbedding { offspring, log_m } => {
                let ej2 = offspring.variance() + offspring.mean().powi(2);
                ej2 * (-2.0 * log_m).exp()
            }
            // two i.i.d. children with E e^{-X} = 1/2
            ModelKind::BinaryGaussian { .. } => self.laplace_transform(2.0) + 0.5,
            // compound Poisson: E W² = λ E Y² + (λ E Y)²
            ModelKind::PoissonGaussian { .. } => self.laplace_transform(2.0) + self.laplace_transform(1.0).powi(2),
            ModelKind::Tabulated { atoms, .. } => compensated_sum(atoms.iter().map(|a| {
                let w = compensated_sum(a.displacements.iter().map(|x| (-x).exp()));
                a.prob * w * w
            })),
        }
    }

    /// `σ² = Var W_1(1)`.
    pub fn sigma2(&self) -> Result<f64> {
        let m2 = self.laplace_transform(2.0);
        if !m2.is_finite() {
            return Err(Error::InfiniteVariance { m2 });
        }
        let v = match &self.kind {
            ModelKind::GaltonWatsonEmbedding { offspring, log_m } => offspring.variance() * (-2.0 * log_m).exp(),
            ModelKind::BinaryGaussian { .. } => m2 - 0.5,
            ModelKind::PoissonGaussian { .. } => m2,
            ModelKind::Tabulated { .. } => self.w1_second_moment() - self.laplace_transform(1.0).powi(2),
        };
        Ok(v.max(0.0))
    }

    /// `E[W_1(2) log⁺ W_1(2)]` when it is computable exactly (finite supports).
    fn w2_log_moment(&self) -> Option<f64> {
        let m2 = self.laplace_transform(2.0);
        let xlogx = |w: f64| if w > 1.0 { w * w.ln() } else { 0.0 };
        match &self.kind {
            ModelKind::GaltonWatsonEmbedding { offspring, log_m } => {
                let unit = (-2.0 * log_m).exp() / m2;
                Some(compensated_sum(
                    offspring.probs().iter().enumerate().map(|(k, p)| p * xlogx(k as f64 * unit)),
                ))
            }
            ModelKind::Tabulated { atoms, .. } => Some(compensated_sum(atoms.iter().map(|a| {
                let w = compensated_sum(a.displacements.iter().map(|x| (-2.0 * x).exp())) / m2;
                a.prob * xlogx(w)
            }))),
            _ => None,
        }
    }

    /// Appends one realization `(X_1, …, X_J)` to `out`; returns `J`.
    #[inline]
    pub fn sample_offspring<R: RngCore + ?Sized>(&self, rng: &mut R, out: &mut Vec<f64>) -> usize {
        match &self.kind {
            ModelKind::GaltonWatsonEmbedding { offspring, log_m } => {
                let j = offspring.sample(rng);
                out.extend(std::iter::repeat_n(*log_m, j));
                j
            }
            ModelKind::BinaryGaussian { tau2, mu } => {
                let sd = tau2.sqrt();
                for _ in 0..2 {
                    let z: f64 = StandardNormal.sample(&mut *rng);
                    out.push(mu + sd * z);
                }
                2
            }
            ModelKind::PoissonGaussian { tau2, mu, poisson, .. } => {
                let j = poisson.sample(&mut *rng) as usize;
                let sd = tau2.sqrt();
                for _ in 0..j {
                    let z: f64 = rng.sample(StandardNormal);
                    out.push(mu + sd * z);
                }
                j
            }
            ModelKind::Tabulated { atoms, law } => {
                let a = &atoms[law.sample(rng)];
                out.extend_from_slice(&a.displacements);
                a.displacements.len()
            }
        }
    }

    /// Hypothesis checks for the limit theorems, with numeric margins.
    pub fn check_conditions(&self) -> ConditionReport {
        let mut checks = Vec::with_capacity(7);
        let mean_j = self.mean_offspring();
        checks.push(ConditionCheck::compare(
            Condition::Supercritical,
            mean_j > 1.0,
            mean_j,
            1.0,
            "E J > 1",
        ));

        let m1 = self.laplace_transform(1.0);
        checks.push(ConditionCheck::compare(
            Condition::Normalized,
            (m1 - 1.0).abs() <= NORMALIZATION_TOL,
            m1,
            1.0,
            "m(1) = 1",
        ));

        let m2 = self.laplace_transform(2.0);
        checks.push(ConditionCheck::compare(Condition::SecondMomentContraction, m2 < 1.0, m2, 1.0, "m(2) < 1"));

        let sigma2 = self.sigma2();
        checks.push(match sigma2 {
            Ok(s) => ConditionCheck::compare(Condition::FiniteVariance, s.is_finite(), s, f64::INFINITY, "σ² < ∞"),
            Err(_) => ConditionCheck::compare(Condition::FiniteVariance, false, f64::INFINITY, f64::INFINITY, "σ² < ∞"),
        });

        checks.push(match self.w2_log_moment() {
            Some(v) if m2.is_finite() => ConditionCheck::compare(
                Condition::LogMoment,
                v.is_finite(),
                v,
                f64::INFINITY,
                "E W_1(2) log⁺ W_1(2) < ∞ (exact finite sum)",
            ),
            Some(_) => ConditionCheck::unknown(Condition::LogMoment, "m(2) is infinite"),
            None if m2.is_finite() => ConditionCheck {
                condition: Condition::LogMoment,
                outcome: Outcome::Pass,
                lhs: f64::NAN,
                rhs: f64::INFINITY,
                detail: "Gaussian displacements: W_1(2) has moments of every order".into(),
            },
            None => ConditionCheck::unknown(Condition::LogMoment, "m(2) is infinite"),
        });

        let (mono_ok, worst_step) = self.root_monotonicity();
        checks.push(ConditionCheck::compare(
            Condition::RootDecreasing,
            mono_ok,
            worst_step,
            MONOTONICITY_SLACK,
            "r ↦ m(r)^{1/r} finite and decreasing on [1, 2]",
        ));

        checks.push(match self.laplace_derivative(2.0) {
            Ok(dm2) if m2 > 0.0 && m2.is_finite() => {
                let lhs = -m2.ln() / 2.0;
                let rhs = -dm2 / m2;
                ConditionCheck::compare(Condition::RenewalDrift, lhs < rhs, lhs, rhs, "-log m(2)/2 < -m'(2)/m(2)")
            }
            _ => ConditionCheck::compare(Condition::RenewalDrift, false, f64::NAN, f64::NAN, "m(2) not finite"),
        });

        ConditionReport { checks }
    }

    fn root_monotonicity(&self) -> (bool, f64) {
        let n = MONOTONICITY_GRID;
        let vals: Vec<f64> = (0..n)
            .map(|i| {
                let r = 1.0 + i as f64 / (n - 1) as f64;
                self.laplace_transform(r).powf(1.0 / r)
            })
            .collect();
        if vals.iter().any(|v| !v.is_finite()) {
            return (false, f64::INFINITY);
        }
        let worst = vals.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
        (worst <= MONOTONICITY_SLACK, worst)
    }

    /// Flat `key = value` entries (without the `model.` prefix).
    pub fn to_entries(&self) -> Vec<(String, String)> {
        let mut out = vec![("kind".to_string(), self.kind_name().to_string())];
        match &self.kind {
            ModelKind::GaltonWatsonEmbedding { offspring, .. } => {
                let pmf = offspring
                    .probs()
                    .iter()
                    .enumerate()
                    .map(|(k, p)| format!("{k}:{p}"))
                    .collect::<Vec<_>>()
                    .join(",");
                out.push(("gw_pmf".into(), pmf));
            }
            ModelKind::BinaryGaussian { tau2, .. } => out.push(("tau2".into(), tau2.to_string())),
            ModelKind::PoissonGaussian { lambda, tau2, .. } => {
                out.push(("lambda".into(), lambda.to_string()));
                out.push(("tau2".into(), tau2.to_string()));
            }
            ModelKind::Tabulated { atoms, .. } => {
                out.push(("atoms".into(), format_atoms(atoms)));
                if let Some(span) = self.arithmetic_span {
                    out.push(("arithmetic_span".into(), span.to_string()));
                }
            }
        }
        out
    }

    /// Inverse of [`to_entries`](Self::to_entries). Unknown keys are rejected.
    pub fn from_entries(entries: &BTreeMap<String, String>) -> Result<Self> {
        let kind: KindName = entries
            .get("kind")
            .ok_or_else(|| Error::InvalidModel("missing model.kind".into()))?
            .parse()?;
        let allowed: &[&str] = match kind {
            KindName::GaltonWatsonEmbedding => &["kind", "gw_pmf"],
            KindName::BinaryGaussian => &["kind", "tau2"],
            KindName::PoissonGaussian => &["kind", "lambda", "tau2"],
            KindName::Tabulated => &["kind", "atoms", "arithmetic_span", "normalize"],
        };
        if let Some(k) = entries.keys().find(|k| !allowed.contains(&k.as_str())) {
            return Err(Error::InvalidModel(format!("key model.{k} is not valid for kind {kind}")));
        }
        let get = |k: &str| {
            entries
                .get(k)
                .ok_or_else(|| Error::InvalidModel(format!("missing model.{k} for kind {kind}")))
        };
        let num = |k: &str| -> Result<f64> {
            get(k)?
                .trim()
                .parse::<f64>()
                .map_err(|e| Error::InvalidModel(format!("model.{k}: {e}")))
        };
        match kind {
            KindName::GaltonWatsonEmbedding => Self::galton_watson(parse_pmf(get("gw_pmf")?)?),
            KindName::BinaryGaussian => Self::binary_gaussian(num("tau2")?),
            KindName::PoissonGaussian => Self::poisson_gaussian(num("lambda")?, num("tau2")?),
            KindName::Tabulated => {
                let atoms = parse_atoms(get("atoms")?)?;
                let span = entries.contains_key("arithmetic_span").then(|| num("arithmetic_span")).transpose()?;
                let normalize = match entries.get("normalize").map(|s| s.trim()) {
                    None | Some("false") => false,
                    Some("true") => true,
                    Some(other) => return Err(Error::InvalidModel(format!("model.normalize: `{other}`"))),
                };
                if normalize {
                    Self::tabulated_normalized(atoms, span)
                } else {
                    Self::tabulated(atoms, span)
                }
            }
        }
    }
}

fn check_tau2(tau2: f64) -> Result<()> {
    if tau2.is_finite() && tau2 >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidModel(format!("tau2 must be finite and non-negative, got {tau2}")))
    }
}

/// `E e^{-θX}` for `X ~ N(μ, τ²)`.
#[inline]
fn gaussian_mgf(theta: f64, mu: f64, tau2: f64) -> f64 {
    (-theta * mu + 0.5 * theta * theta * tau2).exp()
}

/// Two rounds of Richardson extrapolation on central differences.
fn richardson_derivative<F: Fn(f64) -> f64>(f: F, x: f64, h: f64) -> f64 {
    let d = |h: f64| (f(x + h) - f(x - h)) / (2.0 * h);
    let (d1, d2, d3) = (d(h), d(h / 2.0), d(h / 4.0));
    let r1 = (4.0 * d2 - d1) / 3.0;
    let r2 = (4.0 * d3 - d2) / 3.0;
    (16.0 * r2 - r1) / 15.0
}

/// `"0:0.25,1:0.25,2:0.5"`; missing indices have probability zero.
pub fn parse_pmf(s: &str) -> Result<Vec<f64>> {
    let mut pmf: Vec<f64> = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (k, p) = part
            .split_once(':')
            .ok_or_else(|| Error::InvalidModel(format!("pmf entry `{part}` is not `k:p`")))?;
        let k: usize = k.trim().parse().map_err(|e| Error::InvalidModel(format!("pmf index `{k}`: {e}")))?;
        let p: f64 = p.trim().parse().map_err(|e| Error::InvalidModel(format!("pmf probability `{p}`: {e}")))?;
        if pmf.len() <= k {
            pmf.resize(k + 1, 0.0);
        }
        if pmf[k] != 0.0 {
            return Err(Error::InvalidModel(format!("pmf index {k} given twice")));
        }
        pmf[k] = p;
    }
    if pmf.is_empty() {
        return Err(Error::InvalidModel("empty pmf".into()));
    }
    Ok(pmf)
}

/// `"0.5:0.1 0.7; 0.5:"` — atoms separated by `;`, each `prob:x_1 x_2 …`.
pub fn parse_atoms(s: &str) -> Result<Vec<Atom>> {
    s.split(';')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|part| {
            let (p, xs) = part
                .split_once(':')
                .ok_or_else(|| Error::InvalidModel(format!("atom `{part}` is not `prob:x1 x2 ...`")))?;
            let prob = p.trim().parse().map_err(|e| Error::InvalidModel(format!("atom probability `{p}`: {e}")))?;
            let displacements = xs
                .split_whitespace()
                .map(|x| x.parse().map_err(|e| Error::InvalidModel(format!("displacement `{x}`: {e}"))))
                .collect::<Result<Vec<f64>>>()?;
            Ok(Atom { prob, displacements })
        })
        .collect()
}

pub fn format_atoms(atoms: &[Atom]) -> String {
    atoms
        .iter()
        .map(|a| {
            let xs: Vec<String> = a.displacements.iter().map(|x| x.to_string()).collect();
            format!("{}:{}", a.prob, xs.join(" "))
        })
        .collect::<Vec<_>>()
        .join("; ")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Condition {
    Supercritical,
    /// (i) `m(1) = 1`
    Normalized,
    /// (ii) `m(2) < 1`
    SecondMomentContraction,
    /// (iii) `σ² < ∞`
    FiniteVariance,
    /// (iv) `E W_1(2) log⁺ W_1(2) < ∞`
    LogMoment,
    /// (v) `r ↦ m(r)^{1/r}` decreasing on `[1, 2]`
    RootDecreasing,
    /// (vi) `-log m(2)/2 < -m'(2)/m(2)`
    RenewalDrift,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Outcome {
    Pass,
    Fail,
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionCheck {
    pub condition: Condition,
    pub outcome: Outcome,
    pub lhs: f64,
    pub rhs: f64,
    pub detail: String,
}

impl ConditionCheck {
    fn compare(condition: Condition, ok: bool, lhs: f64, rhs: f64, detail: &str) -> Self {
        ConditionCheck {
            condition,
            outcome: if ok { Outcome::Pass } else { Outcome::Fail },
            lhs,
            rhs,
            detail: detail.to_string(),
        }
    }

    fn unknown(condition: Condition, detail: &str) -> Self {
        ConditionCheck { condition, outcome: Outcome::Unknown, lhs: f64::NAN, rhs: f64::NAN, detail: detail.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub checks: Vec<ConditionCheck>,
}

impl ConditionReport {
    pub fn get(&self, c: Condition) -> &ConditionCheck {
        self.checks.iter().find(|k| k.condition == c).expect("every condition is reported")
    }

    pub fn passes(&self, c: Condition) -> bool {
        self.get(c).outcome == Outcome::Pass
    }

    /// Conditions (i)–(iii): enough for the CLT family.
    pub fn clt_ready(&self) -> bool {
        [Condition::Normalized, Condition::SecondMomentContraction, Condition::FiniteVariance]
            .into_iter()
            .all(|c| self.passes(c))
    }

    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.outcome == Outcome::Pass)
    }

    /// Failed conditions as human-readable lines.
    pub fn failures(&self) -> Vec<String> {
        self.checks
            .iter()
            .filter(|c| c.outcome != Outcome::Pass)
            .map(|c| format!("{:?} ({}): lhs = {}, rhs = {}", c.condition, c.detail, c.lhs, c.rhs))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::StreamKey;

    fn gw15() -> OffspringModel {
        OffspringModel::galton_watson(vec![0.0, 0.5, 0.5]).unwrap()
    }

    #[test]
    fn galton_watson_transform_is_power_of_mean() {
        let m = gw15();
        assert!((m.laplace_transform(1.0) - 1.0).abs() < 1e-15);
        assert!((m.laplace_transform(2.0) - 2.0 / 3.0).abs() < 1e-15);
        let d = m.laplace_derivative(2.0).unwrap();
        assert!((d - (-(1.5f64).ln() / 1.5)).abs() < 1e-15);
        assert!((d + 0.270310).abs() < 1e-6);
        assert_eq!(m.arithmetic_span(), Some(0.5 * 1.5f64.ln()));
    }

    #[test]
    fn binary_gaussian_closed_forms() {
        let m = OffspringModel::binary_gaussian(0.25).unwrap();
        assert!((m.laplace_transform(1.0) - 1.0).abs() < 1e-15);
        assert!((m.laplace_transform(2.0) - 0.642013).abs() < 1e-6);
        assert!((m.laplace_derivative(2.0).unwrap() + 0.204255).abs() < 1e-6);
        assert!((m.sigma2().unwrap() - 0.142013).abs() < 1e-6);
    }

    #[test]
    fn binary_gaussian_transform_matches_quadrature() {
        // oracle: 2 ∫ e^{-2x} φ_{μ,τ²}(x) dx by the trapezoid rule
        let tau2: f64 = 0.25;
        let mu = 2f64.ln() + tau2 / 2.0;
        let sd = tau2.sqrt();
        let (lo, hi, n) = (mu - 12.0 * sd, mu + 12.0 * sd, 200_000);
        let h = (hi - lo) / n as f64;
        let f = |x: f64| {
            let z = (x - mu) / sd;
            2.0 * (-2.0 * x).exp() * (-0.5 * z * z).exp() / (sd * (2.0 * std::f64::consts::PI).sqrt())
        };
        let q = h * ((1..n).map(|i| f(lo + i as f64 * h)).sum::<f64>() + 0.5 * (f(lo) + f(hi)));
        let m = OffspringModel::binary_gaussian(tau2).unwrap();
        assert!((q - m.laplace_transform(2.0)).abs() < 1e-10);
    }

    #[test]
    fn derivative_matches_finite_differences() {
        let models = [
            gw15(),
            OffspringModel::binary_gaussian(0.25).unwrap(),
            OffspringModel::poisson_gaussian(3.0, 0.4).unwrap(),
        ];
        for m in &models {
            for theta in [1.0, 1.5, 2.0] {
                let h = 1e-5;
                let fd = (m.laplace_transform(theta + h) - m.laplace_transform(theta - h)) / (2.0 * h);
                let d = m.laplace_derivative(theta).unwrap();
                assert!(((fd - d) / d).abs() < 1e-6, "{:?} θ={theta}: {fd} vs {d}", m.kind_name());
            }
        }
    }

    #[test]
    fn tabulated_derivative_matches_exact_sum() {
        let atoms = vec![
            Atom { prob: 0.3, displacements: vec![0.1, 1.3] },
            Atom { prob: 0.7, displacements: vec![0.4, 0.9, 2.0] },
        ];
        let m = OffspringModel::tabulated_normalized(atoms, None).unwrap();
        assert!((m.laplace_transform(1.0) - 1.0).abs() < NORMALIZATION_TOL);
        let ModelKind::Tabulated { atoms, .. } = m.kind() else { unreachable!() };
        for theta in [1.0, 2.0] {
            let exact: f64 = atoms
                .iter()
                .flat_map(|a| a.displacements.iter().map(move |x| -a.prob * x * (-theta * x).exp()))
                .sum();
            let d = m.laplace_derivative(theta).unwrap();
            assert!((d - exact).abs() < 1e-10 * exact.abs(), "{d} vs {exact}");
        }
    }

    #[test]
    fn sigma2_examples() {
        assert!((gw15().sigma2().unwrap() - 1.0 / 9.0).abs() < 1e-15);
        let det = OffspringModel::tabulated(vec![Atom { prob: 1.0, displacements: vec![0.0] }], None).unwrap();
        assert_eq!(det.sigma2().unwrap(), 0.0);
        let pg = OffspringModel::poisson_gaussian(2.0, 0.3).unwrap();
        assert!((pg.sigma2().unwrap() - pg.laplace_transform(2.0)).abs() < 1e-15);
    }

    #[test]
    fn conditions_binary_gaussian() {
        let r = OffspringModel::binary_gaussian(0.25).unwrap().check_conditions();
        assert!(r.all_pass(), "{:?}", r.failures());
        let drift = r.get(Condition::RenewalDrift);
        assert!((drift.lhs - 0.22157).abs() < 1e-5);
        assert!((drift.rhs - 0.31815).abs() < 1e-5);

        let r = OffspringModel::binary_gaussian(0.8).unwrap().check_conditions();
        assert!(!r.passes(Condition::SecondMomentContraction));
        assert!((r.get(Condition::SecondMomentContraction).lhs - 0.8f64.exp() / 2.0).abs() < 1e-12);
    }

    #[test]
    fn conditions_galton_watson() {
        let r = gw15().check_conditions();
        assert!(r.all_pass(), "{:?}", r.failures());
        let drift = r.get(Condition::RenewalDrift);
        assert!((drift.lhs - 0.20273).abs() < 1e-5);
        assert!((drift.rhs - 0.40546).abs() < 1e-5);
    }

    #[test]
    fn sampling_examples() {
        let mut rng = StreamKey::from_seed(5).rng();
        let mut out = Vec::new();
        for _ in 0..100 {
            out.clear();
            gw15().sample_offspring(&mut rng, &mut out);
            assert!(out.iter().all(|&x| x == 1.5f64.ln()));
            out.clear();
            assert_eq!(OffspringModel::binary_gaussian(0.25).unwrap().sample_offspring(&mut rng, &mut out), 2);
            assert_eq!(out.len(), 2);
        }
        let dead = OffspringModel::tabulated(vec![Atom { prob: 1.0, displacements: vec![] }], None).unwrap();
        out.clear();
        assert_eq!(dead.sample_offspring(&mut rng, &mut out), 0);
        assert!(out.is_empty());
    }

    #[test]
    fn gw_first_generation_weight_is_count_over_mean() {
        let m = gw15();
        let mut rng = StreamKey::from_seed(9).rng();
        let mut out = Vec::new();
        for _ in 0..1000 {
            out.clear();
            let j = m.sample_offspring(&mut rng, &mut out);
            let w1: f64 = out.iter().map(|x| (-x).exp()).sum();
            assert!((w1 - j as f64 / 1.5).abs() < 1e-15);
        }
    }

    #[test]
    fn config_entries_round_trip() {
        let models = [
            gw15(),
            OffspringModel::binary_gaussian(0.25).unwrap(),
            OffspringModel::poisson_gaussian(2.5, 0.1).unwrap(),
            OffspringModel::tabulated(
                vec![
                    Atom { prob: 0.25, displacements: vec![] },
                    Atom { prob: 0.75, displacements: vec![0.5, -0.125] },
                ],
                Some(0.5),
            )
            .unwrap(),
        ];
        for m in models {
            let map: BTreeMap<String, String> = m.to_entries().into_iter().collect();
            assert_eq!(OffspringModel::from_entries(&map).unwrap(), m);
        }
    }

    #[test]
    fn rejects_bad_entries() {
        let mut map = BTreeMap::new();
        map.insert("kind".to_string(), "BinaryGaussian".to_string());
        map.insert("gw_pmf".to_string(), "1:1".to_string());
        assert!(OffspringModel::from_entries(&map).is_err());
        assert!(parse_pmf("0:0.5,0:0.5").is_err());
        assert!(OffspringModel::galton_watson(vec![0.5, 0.6]).is_err());
    }
}
