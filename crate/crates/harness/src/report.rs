//! Run reports. Every checked quantity is stored with its bound and verdict;
//! timings live in their own map so reports can be compared without them.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use crate::config::RunConfig;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    AtMost,
    AtLeast,
    Below,
    Above,
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub relation: Relation,
    pub bound: f64,
    pub passed: bool,
}

impl Check {
    pub fn new(name: impl Into<String>, value: f64, relation: Relation, bound: f64) -> Self {
        let passed = match relation {
            Relation::AtMost => value <= bound,
            Relation::AtLeast => value >= bound,
            Relation::Below => value < bound,
            Relation::Above => value > bound,
        };
        Self { name: name.into(), value, relation, bound, passed }
    }

    pub fn at_most(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self::new(name, value, Relation::AtMost, bound)
    }

    pub fn at_least(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self::new(name, value, Relation::AtLeast, bound)
    }

    /// A yes/no condition, recorded as `1 ≥ 1` or `0 ≥ 1`.
    pub fn holds(name: impl Into<String>, ok: bool) -> Self {
        Self::at_least(name, if ok { 1.0 } else { 0.0 }, 1.0)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteResult {
    pub name: String,
    pub passed: bool,
    pub checks: Vec<Check>,
    pub diagnostics: Vec<String>,
    /// Suite-specific measurements (fit reports, per-level tables).
    pub data: Value,
}

impl SuiteResult {
    pub fn new(name: &str) -> Self {
        Self { name: name.into(), passed: true, checks: Vec::new(), diagnostics: Vec::new(), data: Value::Null }
    }

    pub fn check(&mut self, c: Check) {
        if !c.passed {
            self.diagnostics.push(format!("{} = {} violates {:?} {}", c.name, c.value, c.relation, c.bound));
        }
        self.passed &= c.passed;
        self.checks.push(c);
    }

    /// Records a failure that prevented the suite from measuring anything.
    pub fn fail(&mut self, msg: impl Into<String>) {
        self.passed = false;
        self.diagnostics.push(msg.into());
    }

    pub fn failed(name: &str, msg: impl Into<String>) -> Self {
        let mut r = Self::new(name);
        r.fail(msg);
        r
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GridSummary {
    pub dim: usize,
    pub shape: [usize; 2],
    pub h: f64,
    pub origin: [f64; 2],
    pub pairs: usize,
    pub exterior_couplings: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveSummary {
    pub converged: bool,
    pub polished: bool,
    pub iters: usize,
    pub final_gap: f64,
    pub seminorm_term: f64,
    pub exterior_term: f64,
    pub fidelity_term: f64,
    pub total_energy: f64,
    pub tail_bound: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub schema_version: u32,
    pub command: String,
    pub config: RunConfig,
    pub grid: Option<GridSummary>,
    pub solve: Option<SolveSummary>,
    pub suites: Vec<SuiteResult>,
    pub passed: bool,
    /// File names relative to the output directory.
    pub artifacts: Vec<String>,
    pub timings: BTreeMap<String, f64>,
}

impl Report {
    pub fn new(command: &str, config: &RunConfig) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            command: command.into(),
            config: config.clone(),
            grid: None,
            solve: None,
            suites: Vec::new(),
            passed: true,
            artifacts: Vec::new(),
            timings: BTreeMap::new(),
        }
    }

    pub fn push(&mut self, suite: SuiteResult) {
        self.passed &= suite.passed;
        self.suites.push(suite);
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// JSON with the timings map emptied, for determinism comparisons.
    pub fn to_json_without_timings(&self) -> String {
        let mut r = self.clone();
        r.timings.clear();
        r.to_json()
    }

    pub fn write(&mut self, dir: &Path, name: &str) -> std::io::Result<()> {
        self.artifacts.push(name.into());
        std::fs::write(dir.join(name), self.to_json() + "\n")
    }
}
