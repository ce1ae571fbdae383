//! Exact second-moment structure of the martingale and its tail process.
//!
//! Every function here is a closed form; these are the oracles the
//! simulation suites are checked against.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::OffspringModel;

/// A pair of level offsets `(r, s)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CovQuery {
    pub r: u32,
    pub s: u32,
}

impl CovQuery {
    pub fn new(r: u32, s: u32) -> Self {
        CovQuery { r, s }
    }

    fn max(self) -> i32 {
        self.r.max(self.s) as i32
    }

    fn gap(self) -> f64 {
        f64::from(self.r.abs_diff(self.s))
    }
}

fn check_m2(m2: f64) -> Result<()> {
    if m2 > 0.0 && m2 < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("m(2) = {m2} is outside (0, 1)")))
    }
}

/// `Var W_r = σ²(1 + m2 + … + m2^{r-1}) = σ²(1 - m2^r)/(1 - m2)`.
pub fn var_wr(sigma2: f64, m2: f64, r: u32) -> Result<f64> {
    check_m2(m2)?;
    Ok(sigma2 * (1.0 - m2.powi(r as i32)) / (1.0 - m2))
}

/// `Var W_∞ = σ²/(1 - m2)`.
pub fn var_winf(sigma2: f64, m2: f64) -> Result<f64> {
    check_m2(m2)?;
    Ok(sigma2 / (1.0 - m2))
}

/// `Var[W_{r+1} - W_r] = σ² m2^r`.
pub fn var_increment(sigma2: f64, m2: f64, r: u32) -> Result<f64> {
    check_m2(m2)?;
    Ok(sigma2 * m2.powi(r as i32))
}

/// `Cov(W_∞ - W_r, W_∞ - W_s) = v² m2^{max(r, s)}`.
pub fn cov_tail(v2: f64, m2: f64, q: CovQuery) -> Result<f64> {
    check_m2(m2)?;
    Ok(v2 * m2.powi(q.max()))
}

/// Stationary correlation of the limiting AR(1) sequence: `m2^{|r-s|/2}`.
pub fn ou_cov(m2: f64, q: CovQuery) -> Result<f64> {
    check_m2(m2)?;
    Ok(m2.powf(0.5 * q.gap()))
}

/// Covariance of the normalized tails
/// `(W_∞ - W_{n+r})/m2^{(n+r)/2}` and `(W_∞ - W_{n+s})/m2^{(n+s)/2}`:
/// exactly `v² m2^{|r-s|/2}` at every level `n`.
pub fn normalized_tail_cov(v2: f64, m2: f64, n: u32, q: CovQuery) -> Result<f64> {
    check_m2(m2)?;
    let r = n + q.r;
    let s = n + q.s;
    // cov_tail's exponent and the normalization are combined before
    // exponentiating, so large n cannot underflow
    let log_raw = f64::from(r.max(s)) * m2.ln();
    let log_norm = 0.5 * (f64::from(r) + f64::from(s)) * m2.ln();
    Ok(v2 * (log_raw - log_norm).exp())
}

/// Renewal constant of the associated walk.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "regime", rename_all = "snake_case")]
pub enum RenewalConstant {
    NonArithmetic { c_a: f64 },
    Arithmetic { span: f64, c_a: f64, d_a: f64 },
}

impl RenewalConstant {
    pub fn c_a(&self) -> f64 {
        match *self {
            RenewalConstant::NonArithmetic { c_a } | RenewalConstant::Arithmetic { c_a, .. } => c_a,
        }
    }
}

/// Derived constants of a model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentSet {
    pub m2: f64,
    /// Left derivative `m'(2)`.
    pub m2_prime: f64,
    pub sigma2: f64,
    /// `v² = Var W_∞(1) = σ²/(1 - m(2))`.
    pub v2: f64,
    /// `a = -½ log m(2)`.
    pub a: f64,
    pub renewal: RenewalConstant,
}

impl MomentSet {
    pub fn from_model(model: &OffspringModel) -> Result<Self> {
        let m2 = model.laplace_transform(2.0);
        check_m2(m2)?;
        let m2_prime = model.laplace_derivative(2.0)?;
        let sigma2 = model.sigma2()?;
        let v2 = sigma2 / (1.0 - m2);
        let a = -0.5 * m2.ln();
        // c_a^{-1} = e^{2a}(-m'(2)) - a = -m'(2)/m(2) + log m(2)/2
        let c_a = 1.0 / (-m2_prime / m2 - a);
        let renewal = match model.arithmetic_span() {
            Some(span) => RenewalConstant::Arithmetic { span, c_a, d_a: span * c_a / (1.0 - (-span).exp()) },
            None => RenewalConstant::NonArithmetic { c_a },
        };
        Ok(MomentSet { m2, m2_prime, sigma2, v2, a, renewal })
    }

    pub fn c_a(&self) -> f64 {
        self.renewal.c_a()
    }

    pub fn var_wr(&self, r: u32) -> f64 {
        var_wr(self.sigma2, self.m2, r).expect("m2 validated at construction")
    }

    pub fn cov_tail(&self, q: CovQuery) -> f64 {
        cov_tail(self.v2, self.m2, q).expect("m2 validated at construction")
    }

    pub fn normalized_tail_cov(&self, n: u32, q: CovQuery) -> f64 {
        normalized_tail_cov(self.v2, self.m2, n, q).expect("m2 validated at construction")
    }

    /// Smallest proxy depth `R` with `m2^{R/2} ≤ eps`, i.e. truncation
    /// standard deviation at most `eps` times the tail scale.
    pub fn proxy_depth(&self, eps: f64) -> u32 {
        proxy_depth(self.m2, eps)
    }
}

/// Smallest `R ≥ 0` with `m2^{R/2} ≤ eps`.
pub fn proxy_depth(m2: f64, eps: f64) -> u32 {
    assert!(m2 > 0.0 && m2 < 1.0 && eps > 0.0);
    if eps >= 1.0 {
        return 0;
    }
    let r = (2.0 * eps.ln() / m2.ln()).ceil().max(0.0) as u32;
    // guard the ceil against rounding just below an integer
    if m2.powf(0.5 * f64::from(r)) > eps * (1.0 + 1e-12) {
        r + 1
    } else {
        r
    }
}
