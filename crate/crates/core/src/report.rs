//! Named numerical checks and their JSON form.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub name: String,
    pub residual: f64,
    pub threshold: f64,
    pub mask: String,
    pub pass: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl CheckReport {
    /// Passes iff `residual ≤ threshold`; a NaN residual fails.
    pub fn new(name: impl Into<String>, residual: f64, threshold: f64, mask: impl Into<String>) -> Self {
        CheckReport {
            name: name.into(),
            residual,
            threshold,
            mask: mask.into(),
            pass: residual <= threshold,
            note: None,
        }
    }

    /// Lower bound `value ≥ min`, stored as the shortfall `max(0, min − value)` against 0.
    pub fn at_least(name: impl Into<String>, value: f64, min: f64, mask: impl Into<String>) -> Self {
        let shortfall = if value.is_nan() { f64::NAN } else { (min - value).max(0.0) };
        let mut r = CheckReport::new(name, shortfall, 0.0, mask);
        r.note = Some(format!("value {value:.3e}, required at least {min:.3e}"));
        r
    }

    /// Boolean fact; residual 0 or 1 against threshold 0.
    pub fn flag(name: impl Into<String>, ok: bool, mask: impl Into<String>) -> Self {
        CheckReport::new(name, if ok { 0.0 } else { 1.0 }, 0.0, mask)
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        let note = note.into();
        self.note = Some(match self.note.take() {
            Some(old) => format!("{old}; {note}"),
            None => note,
        });
        self
    }
}

/// Checks produced by one suite.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: String,
    pub checks: Vec<CheckReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl SuiteReport {
    pub fn new(suite: impl Into<String>) -> Self {
        SuiteReport { suite: suite.into(), checks: Vec::new(), note: None, error: None }
    }

    pub fn push(&mut self, check: CheckReport) {
        self.checks.push(check);
    }

    pub fn extend(&mut self, checks: impl IntoIterator<Item = CheckReport>) {
        self.checks.extend(checks);
    }

    pub fn pass(&self) -> bool {
        self.error.is_none() && self.checks.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckReport> {
        self.checks.iter().filter(|c| !c.pass)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pass_flag_follows_threshold() {
        assert!(CheckReport::new("a", 1e-10, 1e-9, "all").pass);
        assert!(!CheckReport::new("a", 1e-8, 1e-9, "all").pass);
        assert!(!CheckReport::new("a", f64::NAN, 1e-9, "all").pass);
        assert!(CheckReport::at_least("b", 0.5, 1e-6, "all").pass);
        assert!(!CheckReport::at_least("b", 1e-7, 1e-6, "all").pass);
    }

    #[test]
    fn serializes_without_empty_note() {
        let json = serde_json::to_string(&CheckReport::new("a", 0.0, 1.0, "m")).unwrap();
        assert!(!json.contains("note"));
        assert!(json.contains("\"residual\""));
    }
}
