use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const SCHEMA: u32 = 1;

/// One pass/fail check inside a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub name: String,
    pub statistic: f64,
    pub target: f64,
    pub tolerance: f64,
    pub pass: bool,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub detail: String,
}

impl TestResult {
    pub fn new(name: impl Into<String>, statistic: f64, target: f64, tolerance: f64, pass: bool) -> Self {
        TestResult { name: name.into(), statistic, target, tolerance, pass, detail: String::new() }
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = detail.into();
        self
    }

    /// Passes when `|statistic - target| ≤ tolerance`.
    pub fn within(name: impl Into<String>, statistic: f64, target: f64, tolerance: f64) -> Self {
        let pass = (statistic - target).abs() <= tolerance;
        TestResult::new(name, statistic, target, tolerance, pass)
    }

    /// Passes when `statistic ≥ target`.
    pub fn at_least(name: impl Into<String>, statistic: f64, target: f64) -> Self {
        TestResult::new(name, statistic, target, 0.0, statistic >= target)
    }

    /// Passes when `statistic ≤ target`.
    pub fn at_most(name: impl Into<String>, statistic: f64, target: f64) -> Self {
        TestResult::new(name, statistic, target, 0.0, statistic <= target)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub schema: u32,
    pub experiment: String,
    /// Canonical text of the fully resolved configuration.
    pub config: String,
    /// Git-style blob hash (`sha256("blob <len>\0" ‖ text)`) of the
    /// configuration without `workers`.
    pub config_hash: String,
    pub seed: u64,
    pub workers: usize,
    pub wall_clock_seconds: f64,
    pub statistics: serde_json::Value,
    pub tests: Vec<TestResult>,
    pub raw_files: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub pass: bool,
}

impl ExperimentReport {
    /// The part of the report that must not depend on scheduling.
    pub fn statistics_section(&self) -> serde_json::Value {
        serde_json::json!({
            "config_hash": self.config_hash,
            "statistics": self.statistics,
            "tests": self.tests,
            "error": self.error,
            "pass": self.pass,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }
}

pub fn content_hash(text: &str) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", text.len()).as_bytes());
    h.update(text.as_bytes());
    hex::encode(h.finalize())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_is_stable_and_sensitive() {
        let a = content_hash("experiment = moments\n");
        assert_eq!(a.len(), 64);
        assert_eq!(a, content_hash("experiment = moments\n"));
        assert_ne!(a, content_hash("experiment = moments \n"));
        // empty blob under the header convention
        let mut h = Sha256::new();
        h.update(b"blob 0\0");
        assert_eq!(content_hash(""), hex::encode(h.finalize()));
    }

    #[test]
    fn test_result_helpers() {
        assert!(TestResult::within("a", 1.05, 1.0, 0.1).pass);
        assert!(!TestResult::within("a", 1.2, 1.0, 0.1).pass);
        assert!(TestResult::at_least("b", 0.95, 0.9).pass);
        assert!(!TestResult::at_most("c", 0.95, 0.9).pass);
        assert!(!TestResult::within("nan", f64::NAN, 1.0, 0.1).pass);
    }
}
