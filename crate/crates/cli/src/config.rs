//! Run configuration: a flat `key = value` format with optional `[model]`
//! and `[params]` sections, `#` comments, and dotted keys (`model.kind`)
//! as an alternative to sections.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use biggins_core::model::{Condition, Outcome};
use biggins_core::{MomentSet, OffspringModel};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid configuration: {}", .0.join("; "))]
    Validation(Vec<String>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Experiment {
    #[serde(rename = "conditions")]
    Conditions,
    #[serde(rename = "moments")]
    Moments,
    #[serde(rename = "simulate")]
    Simulate,
    #[serde(rename = "clt-cov")]
    CltCov,
    #[serde(rename = "clt-mixture")]
    CltMixture,
    #[serde(rename = "clt-conditional")]
    CltConditional,
    #[serde(rename = "clt-log")]
    CltLog,
    #[serde(rename = "lil")]
    Lil,
    #[serde(rename = "renewal")]
    Renewal,
    #[serde(rename = "tail-integral")]
    TailIntegral,
    #[serde(rename = "berry-esseen")]
    BerryEsseen,
}

impl Experiment {
    pub const ALL: [Experiment; 11] = [
        Experiment::Conditions,
        Experiment::Moments,
        Experiment::Simulate,
        Experiment::CltCov,
        Experiment::CltMixture,
        Experiment::CltConditional,
        Experiment::CltLog,
        Experiment::Lil,
        Experiment::Renewal,
        Experiment::TailIntegral,
        Experiment::BerryEsseen,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Conditions => "conditions",
            Experiment::Moments => "moments",
            Experiment::Simulate => "simulate",
            Experiment::CltCov => "clt-cov",
            Experiment::CltMixture => "clt-mixture",
            Experiment::CltConditional => "clt-conditional",
            Experiment::CltLog => "clt-log",
            Experiment::Lil => "lil",
            Experiment::Renewal => "renewal",
            Experiment::TailIntegral => "tail-integral",
            Experiment::BerryEsseen => "berry-esseen",
        }
    }

    /// Parameter keys the experiment accepts.
    fn params(self) -> &'static [&'static str] {
        match self {
            Experiment::Conditions | Experiment::Moments => &[],
            Experiment::Simulate => &["M", "N", "boot"],
            Experiment::CltCov => &["levels", "d", "R", "eps", "M", "boot"],
            Experiment::CltMixture => &["n", "R", "eps", "M", "reps", "alpha"],
            Experiment::CltConditional => &["n", "r", "R", "eps", "K", "trees", "alpha", "min_pass"],
            Experiment::CltLog => &["n", "R", "eps", "M"],
            Experiment::Lil => &["N", "R", "eps", "M", "band", "alpha"],
            Experiment::Renewal | Experiment::TailIntegral => {
                &["x_grid", "lattice", "n_max", "paths", "estimator", "tol"]
            }
            Experiment::BerryEsseen => &[
                "levels", "r", "K", "samples", "trees", "c", "var_levels", "var_trees", "var_band", "R", "eps",
            ],
        }
    }

    /// Model conditions the experiment relies on.
    fn requires(self) -> &'static [Condition] {
        const CLT: &[Condition] =
            &[Condition::Normalized, Condition::SecondMomentContraction, Condition::FiniteVariance];
        const RENEWAL: &[Condition] = &[
            Condition::Normalized,
            Condition::SecondMomentContraction,
            Condition::FiniteVariance,
            Condition::RenewalDrift,
        ];
        match self {
            Experiment::Conditions => &[],
            Experiment::Renewal | Experiment::TailIntegral => RENEWAL,
            _ => CLT,
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Experiment::ALL.into_iter().find(|e| e.name() == s).ok_or_else(|| {
            let names: Vec<&str> = Experiment::ALL.iter().map(|e| e.name()).collect();
            format!("unknown experiment `{s}` (expected one of {})", names.join(", "))
        })
    }
}

fn condition_label(c: Condition) -> &'static str {
    match c {
        Condition::Supercritical => "(supercritical) E J > 1",
        Condition::Normalized => "(i) m(1) = 1",
        Condition::SecondMomentContraction => "(ii) m(2) < 1",
        Condition::FiniteVariance => "(iii) σ² < ∞",
        Condition::LogMoment => "(iv) E W_1(2) log⁺ W_1(2) < ∞",
        Condition::RootDecreasing => "(v) m(r)^{1/r} decreasing",
        Condition::RenewalDrift => "(vi) -log m(2)/2 < -m'(2)/m(2)",
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorChoice {
    SquaredTilt,
    Associated,
}

/// Parameters resolved against the experiment's defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub n: u32,
    pub d: u32,
    /// Proxy depth `R`; `None` picks the smallest `R` with `m2^{R/2} ≤ eps`.
    pub proxy_depth: Option<u32>,
    pub eps: f64,
    pub horizon: u32,
    pub count: usize,
    pub k: usize,
    pub paths: usize,
    pub n_max: u32,
    pub x_grid: Vec<f64>,
    pub lattice: Vec<u32>,
    pub band: (f64, f64),
    pub r: u32,
    pub levels: Vec<u32>,
    pub boot: usize,
    pub reps: usize,
    pub alpha: f64,
    pub trees: usize,
    pub samples: usize,
    pub c: f64,
    pub estimator: EstimatorChoice,
    pub tol: f64,
    pub var_levels: Vec<u32>,
    pub var_trees: usize,
    pub var_band: (f64, f64),
    pub min_pass: usize,
}

impl Params {
    fn defaults(e: Experiment) -> Params {
        let mut p = Params {
            n: 8,
            d: 4,
            proxy_depth: None,
            eps: 0.1,
            horizon: 5,
            count: 20_000,
            k: 2000,
            paths: 1_000_000,
            n_max: 80,
            x_grid: vec![6.0, 8.0, 10.0],
            lattice: Vec::new(),
            band: (0.2, 2.0),
            r: 0,
            levels: vec![8],
            boot: 1000,
            reps: 1,
            alpha: 0.05,
            trees: 20,
            samples: 2000,
            c: biggins_core::bede::DEFAULT_C,
            estimator: EstimatorChoice::SquaredTilt,
            tol: 0.10,
            var_levels: vec![12],
            var_trees: 100,
            var_band: (0.8, 1.2),
            min_pass: 18,
        };
        match e {
            Experiment::CltCov => p.boot = 500,
            Experiment::CltMixture | Experiment::CltLog => p.count = 10_000,
            Experiment::Lil => {
                p.horizon = 20;
                p.count = 200;
                p.alpha = 0.01;
            }
            Experiment::TailIntegral => {
                p.tol = 0.15;
                p.x_grid = vec![6.0, 8.0];
            }
            Experiment::BerryEsseen => {
                p.levels = vec![4, 8];
                p.r = 3;
                p.trees = 50;
            }
            _ => {}
        }
        p
    }

    /// Proxy depth for a model with second moment `m2`.
    pub fn proxy_depth_for(&self, m2: f64) -> u32 {
        self.proxy_depth.unwrap_or_else(|| biggins_core::moments::proxy_depth(m2, self.eps))
    }
}

/// A parsed and validated configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub seed: u64,
    pub workers: usize,
    pub out: Option<String>,
    pub cap: usize,
    /// Model section as written, without the `model.` prefix.
    pub model_entries: BTreeMap<String, String>,
    /// Parameter section as written.
    pub param_entries: BTreeMap<String, String>,
    pub model: OffspringModel,
    pub params: Params,
}

const TOP_KEYS: &[&str] = &["experiment", "seed", "workers", "out", "cap"];
const MODEL_KEYS: &[&str] = &["kind", "tau2", "lambda", "gw_pmf", "atoms", "arithmetic_span", "normalize"];

/// Key/value pairs in file order, keyed by full dotted name.
fn parse_entries(text: &str) -> Result<BTreeMap<String, (usize, String)>, ConfigError> {
    let mut section: Option<String> = None;
    let mut out: BTreeMap<String, (usize, String)> = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let err = |message: String| ConfigError::Parse { line, message };
        let content = strip_comment(raw).map_err(err)?;
        let content = content.trim();
        if content.is_empty() {
            continue;
        }
        if let Some(rest) = content.strip_prefix('[') {
            let name = rest.strip_suffix(']').ok_or_else(|| err("unterminated section header".into()))?.trim();
            if name != "model" && name != "params" {
                return Err(err(format!("unknown section [{name}]")));
            }
            section = Some(name.to_string());
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| err(format!("expected `key = value`, got `{content}`")))?;
        let key = key.trim();
        if key.is_empty() || !key.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.') {
            return Err(err(format!("invalid key `{key}`")));
        }
        let full = match &section {
            Some(s) if key.contains('.') => return Err(err(format!("dotted key `{key}` inside section [{s}]"))),
            Some(s) => format!("{s}.{key}"),
            None => key.to_string(),
        };
        let value = unquote(value.trim()).map_err(err)?;
        let known = match full.split_once('.') {
            None => TOP_KEYS.contains(&full.as_str()),
            Some(("model", k)) => MODEL_KEYS.contains(&k),
            Some(("params", _)) => true,
            Some(_) => false,
        };
        if !known {
            return Err(err(format!("unknown key `{full}`")));
        }
        if let Some((first, _)) = out.get(&full) {
            return Err(err(format!("duplicate key `{full}` (first set on line {first})")));
        }
        out.insert(full, (line, value));
    }
    Ok(out)
}

/// Drops a trailing `#` comment that is not inside double quotes.
fn strip_comment(line: &str) -> Result<&str, String> {
    let mut quoted = false;
    for (i, c) in line.char_indices() {
        match c {
            '"' => quoted = !quoted,
            '#' if !quoted => return Ok(&line[..i]),
            _ => {}
        }
    }
    if quoted {
        return Err("unterminated string".into());
    }
    Ok(line)
}

fn unquote(v: &str) -> Result<String, String> {
    match v.strip_prefix('"') {
        Some(rest) => {
            let inner = rest.strip_suffix('"').ok_or("unterminated string")?;
            if inner.contains('"') {
                return Err(format!("stray quote in `{v}`"));
            }
            Ok(inner.to_string())
        }
        None if v.contains('"') => Err(format!("stray quote in `{v}`")),
        None => Ok(v.to_string()),
    }
}

fn quote_if_needed(v: &str) -> String {
    let plain = !v.is_empty() && v.chars().all(|c| c.is_ascii_alphanumeric() || "._-+/".contains(c));
    if plain {
        v.to_string()
    } else {
        format!("\"{v}\"")
    }
}

fn parse_num<T: FromStr>(key: &str, v: &str, errors: &mut Vec<String>) -> Option<T>
where
    T::Err: fmt::Display,
{
    match v.trim().parse::<T>() {
        Ok(x) => Some(x),
        Err(e) => {
            errors.push(format!("{key} = `{v}`: {e}"));
            None
        }
    }
}

fn parse_list<T: FromStr>(key: &str, v: &str, errors: &mut Vec<String>) -> Option<Vec<T>>
where
    T::Err: fmt::Display,
{
    let mut out = Vec::new();
    for part in v.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        out.push(parse_num(key, part, errors)?);
    }
    if out.is_empty() {
        errors.push(format!("{key} must list at least one value"));
        return None;
    }
    Some(out)
}

fn parse_band(key: &str, v: &str, errors: &mut Vec<String>) -> Option<(f64, f64)> {
    let xs: Vec<f64> = parse_list(key, v, errors)?;
    match xs[..] {
        [lo, hi] if lo < hi => Some((lo, hi)),
        _ => {
            errors.push(format!("{key} must be two increasing numbers `lo, hi`"));
            None
        }
    }
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

fn resolve_params(e: Experiment, entries: &BTreeMap<String, String>, errors: &mut Vec<String>) -> Params {
    let mut p = Params::defaults(e);
    let mut min_pass_given = false;
    for (k, v) in entries {
        if !e.params().contains(&k.as_str()) {
            errors.push(format!("params.{k} is not a parameter of {e}"));
            continue;
        }
        let e = &mut *errors;
        match k.as_str() {
            "n" => set(&mut p.n, parse_num(k, v, e)),
            "d" => set(&mut p.d, parse_num(k, v, e)),
            "R" => p.proxy_depth = parse_num(k, v, e).or(p.proxy_depth),
            "eps" => set(&mut p.eps, parse_num(k, v, e)),
            "N" => set(&mut p.horizon, parse_num(k, v, e)),
            "M" => set(&mut p.count, parse_num(k, v, e)),
            "K" => set(&mut p.k, parse_num(k, v, e)),
            "paths" => set(&mut p.paths, parse_num(k, v, e)),
            "n_max" => set(&mut p.n_max, parse_num(k, v, e)),
            "x_grid" => set(&mut p.x_grid, parse_list(k, v, e)),
            "lattice" => set(&mut p.lattice, parse_list(k, v, e)),
            "band" => set(&mut p.band, parse_band(k, v, e)),
            "r" => set(&mut p.r, parse_num(k, v, e)),
            "levels" => set(&mut p.levels, parse_list(k, v, e)),
            "boot" => set(&mut p.boot, parse_num(k, v, e)),
            "reps" => set(&mut p.reps, parse_num(k, v, e)),
            "alpha" => set(&mut p.alpha, parse_num(k, v, e)),
            "trees" => set(&mut p.trees, parse_num(k, v, e)),
            "samples" => set(&mut p.samples, parse_num(k, v, e)),
            "c" => set(&mut p.c, parse_num(k, v, e)),
            "tol" => set(&mut p.tol, parse_num(k, v, e)),
            "var_levels" => set(&mut p.var_levels, parse_list(k, v, e)),
            "var_trees" => set(&mut p.var_trees, parse_num(k, v, e)),
            "var_band" => set(&mut p.var_band, parse_band(k, v, e)),
            "min_pass" => {
                min_pass_given = true;
                set(&mut p.min_pass, parse_num(k, v, e));
            }
            "estimator" => match v.as_str() {
                "squared-tilt" => p.estimator = EstimatorChoice::SquaredTilt,
                "associated" => p.estimator = EstimatorChoice::Associated,
                _ => e.push(format!("estimator = `{v}`: expected squared-tilt or associated")),
            },
            _ => unreachable!("key list and match arms agree"),
        }
    }
    if !min_pass_given {
        p.min_pass = (0.9 * p.trees as f64).ceil() as usize;
    }
    if entries.contains_key("x_grid") && entries.contains_key("lattice") {
        errors.push("x_grid and lattice are mutually exclusive".into());
    }
    let positive = [
        ("M", p.count),
        ("K", p.k),
        ("paths", p.paths),
        ("boot", p.boot),
        ("reps", p.reps),
        ("trees", p.trees),
        ("samples", p.samples),
        ("var_trees", p.var_trees),
    ];
    for (name, v) in positive {
        if v == 0 && e.params().contains(&name) {
            errors.push(format!("{name} must be positive"));
        }
    }
    let positive_u32 = [("d", p.d), ("N", p.horizon), ("n_max", p.n_max)];
    for (name, v) in positive_u32 {
        if v == 0 && e.params().contains(&name) {
            errors.push(format!("{name} must be positive"));
        }
    }
    if !(p.alpha > 0.0 && p.alpha < 1.0) {
        errors.push(format!("alpha = {} must lie in (0, 1)", p.alpha));
    }
    if !(p.eps > 0.0 && p.eps < 1.0) {
        errors.push(format!("eps = {} must lie in (0, 1)", p.eps));
    }
    if !(p.c > 0.0) || !(p.tol > 0.0) {
        errors.push("c and tol must be positive".into());
    }
    if e == Experiment::BerryEsseen && p.r == 0 {
        errors.push("berry-esseen needs r ≥ 1: W_0 = 1 gives zero summands".into());
    }
    if e == Experiment::Simulate && p.count < 2 {
        errors.push("simulate needs M ≥ 2".into());
    }
    if e == Experiment::CltConditional && p.min_pass > p.trees {
        errors.push(format!("min_pass = {} exceeds trees = {}", p.min_pass, p.trees));
    }
    if e == Experiment::Lil && p.horizon < 2 {
        errors.push("lil needs N ≥ 2".into());
    }
    p
}

/// Parses and validates a configuration. `experiment` (from the command line)
/// overrides a missing `experiment` key and must agree with a present one.
pub fn parse_config(text: &str, experiment: Option<Experiment>) -> Result<RunConfig, ConfigError> {
    let entries = parse_entries(text)?;
    let mut errors = Vec::new();
    let mut model_entries = BTreeMap::new();
    let mut param_entries = BTreeMap::new();
    for (k, (_, v)) in &entries {
        if let Some(m) = k.strip_prefix("model.") {
            model_entries.insert(m.to_string(), v.clone());
        } else if let Some(p) = k.strip_prefix("params.") {
            param_entries.insert(p.to_string(), v.clone());
        }
    }
    let top = |k: &str| entries.get(k).map(|(_, v)| v.as_str());
    let experiment = match (top("experiment").map(str::parse::<Experiment>), experiment) {
        (Some(Err(e)), _) => return Err(ConfigError::Validation(vec![e])),
        (Some(Ok(a)), Some(b)) if a != b => {
            return Err(ConfigError::Validation(vec![format!(
                "config names experiment {a} but {b} was requested"
            )]))
        }
        (Some(Ok(a)), _) => a,
        (None, Some(b)) => b,
        (None, None) => return Err(ConfigError::Validation(vec!["no experiment given".into()])),
    };
    let seed = top("seed").and_then(|v| parse_num("seed", v, &mut errors)).unwrap_or(0);
    let workers = top("workers").and_then(|v| parse_num("workers", v, &mut errors)).unwrap_or(1);
    if workers == 0 {
        errors.push("workers must be positive".into());
    }
    let cap = top("cap")
        .and_then(|v| parse_num("cap", v, &mut errors))
        .unwrap_or(biggins_core::DEFAULT_POPULATION_CAP);
    if cap == 0 {
        errors.push("cap must be positive".into());
    }
    let params = resolve_params(experiment, &param_entries, &mut errors);
    let model = match OffspringModel::from_entries(&model_entries) {
        Ok(m) => Some(m),
        Err(e) => {
            errors.push(e.to_string());
            None
        }
    };
    if let Some(model) = &model {
        let report = model.check_conditions();
        for &c in experiment.requires() {
            let check = report.get(c);
            if check.outcome != Outcome::Pass {
                errors.push(format!(
                    "model fails check {} required by {experiment}: lhs = {}, rhs = {}",
                    condition_label(c),
                    check.lhs,
                    check.rhs
                ));
            }
        }
        if errors.is_empty() && experiment != Experiment::Conditions {
            match MomentSet::from_model(model) {
                Ok(_) => check_model_params(experiment, model, &params, &mut errors),
                Err(e) => errors.push(e.to_string()),
            }
        }
    }
    if !errors.is_empty() {
        return Err(ConfigError::Validation(errors));
    }
    Ok(RunConfig {
        experiment,
        seed,
        workers,
        out: top("out").map(str::to_string),
        cap,
        model_entries,
        param_entries,
        model: model.expect("no errors means the model parsed"),
        params,
    })
}

fn check_model_params(e: Experiment, model: &OffspringModel, p: &Params, errors: &mut Vec<String>) {
    let renewal = matches!(e, Experiment::Renewal | Experiment::TailIntegral);
    if renewal && !p.lattice.is_empty() && model.arithmetic_span().is_none() {
        errors.push("lattice points need an arithmetic model; use x_grid".into());
    }
}

impl RunConfig {
    /// Canonical text: top-level keys, then `[model]`, then `[params]` with
    /// keys sorted. Parsing it gives back an equal config.
    pub fn to_text(&self) -> String {
        self.render(true)
    }

    /// Canonical text without `workers`, which never changes results.
    pub fn content_text(&self) -> String {
        self.render(false)
    }

    fn render(&self, with_workers: bool) -> String {
        let mut s = format!("experiment = {}\nseed = {}\n", self.experiment, self.seed);
        if with_workers {
            s.push_str(&format!("workers = {}\n", self.workers));
        }
        s.push_str(&format!("cap = {}\n", self.cap));
        if let Some(out) = &self.out {
            s.push_str(&format!("out = {}\n", quote_if_needed(out)));
        }
        s.push_str("\n[model]\n");
        for (k, v) in &self.model_entries {
            s.push_str(&format!("{k} = {}\n", quote_if_needed(v)));
        }
        if !self.param_entries.is_empty() {
            s.push_str("\n[params]\n");
            for (k, v) in &self.param_entries {
                s.push_str(&format!("{k} = {}\n", quote_if_needed(v)));
            }
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "experiment = clt-cov\nmodel.kind = BinaryGaussian\nmodel.tau2 = 0.25\n";

    #[test]
    fn minimal_config_parses() {
        let c = parse_config(MINIMAL, None).unwrap();
        assert_eq!(c.experiment, Experiment::CltCov);
        assert_eq!(c.seed, 0);
        assert_eq!(c.workers, 1);
        assert_eq!(c.params.d, 4);
        assert_eq!(c.params.boot, 500);
    }

    #[test]
    fn sections_and_dotted_keys_agree() {
        let sectioned = "# comment\nexperiment = clt-cov\n\n[model]\nkind = BinaryGaussian  # trailing\ntau2 = 0.25\n";
        assert_eq!(parse_config(sectioned, None).unwrap(), parse_config(MINIMAL, None).unwrap());
    }

    #[test]
    fn large_tau2_fails_check_ii() {
        let text = "experiment = clt-cov\nmodel.kind = BinaryGaussian\nmodel.tau2 = 0.8\n";
        let Err(ConfigError::Validation(errs)) = parse_config(text, None) else { panic!("expected a validation error") };
        assert!(errs.iter().any(|e| e.contains("(ii)")), "{errs:?}");
    }

    #[test]
    fn duplicate_key_reports_line() {
        let text = "experiment = moments\n[model]\nkind = BinaryGaussian\ntau2 = 0.25\n\nmodel.tau2 = 0.3\n";
        // dotted key after a section header is inside the section
        assert!(matches!(parse_config(text, None), Err(ConfigError::Parse { line: 6, .. })));
        let text = "experiment = moments\nmodel.kind = BinaryGaussian\nmodel.tau2 = 0.25\n[model]\ntau2 = 0.3\n";
        assert_eq!(
            parse_config(text, None),
            Err(ConfigError::Parse { line: 5, message: "duplicate key `model.tau2` (first set on line 3)".into() })
        );
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = format!("{MINIMAL}colour = blue\n");
        assert!(matches!(parse_config(&text, None), Err(ConfigError::Parse { line: 4, .. })));
        let text = format!("{MINIMAL}[params]\nK = 10\n");
        let Err(ConfigError::Validation(errs)) = parse_config(&text, None) else { panic!() };
        assert!(errs[0].contains("params.K"));
        let text = format!("{MINIMAL}[extra]\n");
        assert!(matches!(parse_config(&text, None), Err(ConfigError::Parse { line: 4, .. })));
    }

    #[test]
    fn experiment_argument_must_agree() {
        assert!(parse_config(MINIMAL, Some(Experiment::Lil)).is_err());
        let c = parse_config("model.kind = BinaryGaussian\nmodel.tau2 = 0.25\n", Some(Experiment::Moments)).unwrap();
        assert_eq!(c.experiment, Experiment::Moments);
        assert!(parse_config("model.kind = BinaryGaussian\nmodel.tau2 = 0.25\n", None).is_err());
    }

    #[test]
    fn quoted_values_and_comments() {
        let text = "experiment = moments\nmodel.kind = GaltonWatsonEmbedding\nmodel.gw_pmf = \"0:0,1:0.5,2:0.5\" # p1 = p2\n";
        let c = parse_config(text, None).unwrap();
        assert_eq!(c.model_entries["gw_pmf"], "0:0,1:0.5,2:0.5");
        assert!(matches!(parse_config("experiment = \"moments\n", None), Err(ConfigError::Parse { line: 1, .. })));
    }

    #[test]
    fn round_trip_is_identity() {
        let text = "experiment = renewal\nseed = 42\nworkers = 3\nout = \"runs/a b\"\n[model]\nkind = BinaryGaussian\ntau2 = 0.25\n[params]\nx_grid = 6, 8, 10\nn_max = 120\n";
        let c = parse_config(text, None).unwrap();
        let canon = c.to_text();
        let again = parse_config(&canon, None).unwrap();
        assert_eq!(again, c);
        assert_eq!(again.to_text(), canon);
        assert_eq!(c.params.x_grid, vec![6.0, 8.0, 10.0]);
        assert!(!c.content_text().contains("workers"));
    }

    #[test]
    fn counts_must_be_positive() {
        let text = format!("{MINIMAL}[params]\nM = 0\n");
        let Err(ConfigError::Validation(errs)) = parse_config(&text, None) else { panic!() };
        assert!(errs.iter().any(|e| e.contains("M must be positive")));
    }

    #[test]
    fn lattice_needs_arithmetic_model() {
        let text = "experiment = renewal\nmodel.kind = BinaryGaussian\nmodel.tau2 = 0.25\nparams.lattice = 10,20\n";
        assert!(matches!(parse_config(text, None), Err(ConfigError::Validation(_))));
        let text = "experiment = renewal\nmodel.kind = GaltonWatsonEmbedding\nmodel.gw_pmf = \"0:0,1:0.5,2:0.5\"\nparams.lattice = 10,20\n";
        assert_eq!(parse_config(text, None).unwrap().params.lattice, vec![10, 20]);
    }
}
