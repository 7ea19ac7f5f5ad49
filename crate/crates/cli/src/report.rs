use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::time::Duration;

use fforge::residual::ResidualReport;
use serde::Serialize;
use serde_json::Value;

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

/// Everything a command measured, with a verdict per check.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub command: String,
    pub parameters: BTreeMap<String, Value>,
    pub residuals: BTreeMap<String, f64>,
    pub checks: Vec<Check>,
    pub timings_ms: BTreeMap<String, f64>,
    pub verdict: String,
    /// Free-form lines shown before the checks.
    #[serde(skip)]
    pub notes: Vec<String>,
}

impl RunReport {
    pub fn new(command: &str) -> Self {
        Self {
            command: command.to_string(),
            parameters: BTreeMap::new(),
            residuals: BTreeMap::new(),
            checks: Vec::new(),
            timings_ms: BTreeMap::new(),
            verdict: "pass".into(),
            notes: Vec::new(),
        }
    }

    pub fn param(&mut self, name: &str, value: impl Into<Value>) {
        self.parameters.insert(name.to_string(), value.into());
    }

    pub fn note(&mut self, line: impl Into<String>) {
        self.notes.push(line.into());
    }

    /// A residual magnitude that must not exceed `tolerance`.
    pub fn check(&mut self, name: &str, value: f64, tolerance: f64, detail: Option<String>) {
        let pass = value <= tolerance;
        self.residuals.insert(name.to_string(), value);
        self.checks.push(Check { name: name.to_string(), value, tolerance, pass, detail });
        if !pass {
            self.verdict = "fail".into();
        }
    }

    /// An exact series identity: passes only when identically zero.
    pub fn exact(&mut self, name: &str, report: &ResidualReport) {
        // A tiny nonzero rational may round to 0.0; keep it visible.
        let value = if report.is_zero() { 0.0 } else { report.max_abs.max(f64::MIN_POSITIVE) };
        self.check(name, value, 0.0, Some(report.summary()));
    }

    pub fn flag(&mut self, name: &str, ok: bool, detail: Option<String>) {
        self.check(name, if ok { 0.0 } else { 1.0 }, 0.0, detail);
    }

    pub fn time(&mut self, name: &str, elapsed: Duration) {
        self.timings_ms.insert(name.to_string(), elapsed.as_secs_f64() * 1e3);
    }

    pub fn passed(&self) -> bool {
        self.verdict == "pass"
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for line in &self.notes {
            let _ = writeln!(out, "{line}");
        }
        for c in &self.checks {
            let status = if c.pass { "PASS" } else { "FAIL" };
            let _ = write!(out, "{status}  {:<28} {:>11.3e}  (tol {:.1e})", c.name, c.value, c.tolerance);
            if let Some(d) = &c.detail {
                let _ = write!(out, "  {d}");
            }
            out.push('\n');
        }
        for (name, ms) in &self.timings_ms {
            let _ = writeln!(out, "time  {name}: {ms:.1} ms");
        }
        let _ = writeln!(out, "verdict: {}", self.verdict);
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports always serialize")
    }
}
