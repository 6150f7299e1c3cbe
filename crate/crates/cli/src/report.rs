use std::time::Instant;

use hnn_core::builtins::{builtin, BUILTINS};
use hnn_core::fock::estimate_dim;
use hnn_core::report::SuiteReport;
use hnn_core::suites::{run_suites, RunOptions, Suite};
use serde::Serialize;

use crate::config::{Problem, RunConfig};
use crate::error::Result;

#[derive(Debug, Clone, Serialize)]
pub struct SuiteTiming {
    pub suite: String,
    pub seconds: f64,
}

/// Full run report. Everything except `timing` is deterministic in the config.
#[derive(Debug, Clone, Serialize)]
pub struct ReportDocument {
    pub config: RunConfig,
    pub suites: Vec<SuiteReport>,
    pub pass: bool,
    pub timing: Vec<SuiteTiming>,
}

impl ReportDocument {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// One line per check, then per-suite errors.
    pub fn summary(&self) -> String {
        let mut out = String::new();
        for s in &self.suites {
            if let Some(e) = &s.error {
                out.push_str(&format!("FAIL  {:<12} error: {e}\n", s.suite));
                continue;
            }
            if s.checks.is_empty() {
                out.push_str(&format!("SKIP  {:<12} {}\n", s.suite, s.note.as_deref().unwrap_or("no checks")));
            }
            for c in &s.checks {
                let tag = if c.pass { "pass" } else { "FAIL" };
                out.push_str(&format!("{tag}  {:<12} {:<58} {:>10.3e} <= {:.0e}  [{}]\n", s.suite, c.name, c.residual, c.threshold, c.mask));
            }
        }
        out.push_str(if self.pass { "overall: PASS\n" } else { "overall: FAIL\n" });
        out
    }
}

/// Runs each enabled suite separately so timings can be recorded.
pub fn run(problem: &Problem) -> ReportDocument {
    let opts = problem.config.options();
    let mut suites = Vec::new();
    let mut timing = Vec::new();
    // jv and homotopy share one operator build.
    let (shared, single): (Vec<_>, Vec<_>) =
        opts.suites.iter().copied().partition(|s| matches!(s, Suite::Jv | Suite::Homotopy));
    let mut groups: Vec<Vec<_>> = single.into_iter().map(|s| vec![s]).collect();
    if !shared.is_empty() {
        groups.push(shared);
    }
    for g in groups {
        let start = Instant::now();
        let part = RunOptions { suites: g, ..opts.clone() };
        let reports = run_suites(&problem.input, problem.group.as_ref(), &part);
        let secs = start.elapsed().as_secs_f64();
        for r in &reports {
            timing.push(SuiteTiming { suite: r.suite.clone(), seconds: secs / reports.len() as f64 });
        }
        suites.extend(reports);
    }
    let rank = |name: &str| Suite::ALL.iter().position(|s| s.name() == name);
    suites.sort_by_key(|r| rank(&r.suite));
    timing.sort_by_key(|t| rank(&t.suite));
    let pass = suites.iter().all(|s| s.pass());
    ReportDocument { config: problem.config.clone(), suites, pass, timing }
}

#[derive(Debug, Clone, Serialize)]
pub struct BuiltinDescriptor {
    pub name: &'static str,
    pub description: &'static str,
    pub dim_a: usize,
    pub dim_b: usize,
    pub fock_dim_l1: usize,
    pub default_l: usize,
}

pub fn list_builtins() -> Result<Vec<BuiltinDescriptor>> {
    BUILTINS
        .iter()
        .map(|b| {
            let input = builtin(b.name)?;
            let (da, db) = (input.a().dim(), input.b().dim());
            Ok(BuiltinDescriptor {
                name: b.name,
                description: b.description,
                dim_a: da,
                dim_b: db,
                fock_dim_l1: estimate_dim(da, db, 1),
                default_l: b.default_l,
            })
        })
        .collect()
}
