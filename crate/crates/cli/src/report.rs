//! Task reports and their CSV side tables.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use oscgeo::conditions::{ConditionReport, Rule, Verdict};
use serde::{Deserialize, Serialize};
use serde_json::Value;

/// Bumped on any breaking change of the report layout.
pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// The shipped JSON Schema for [`Report`].
pub const REPORT_SCHEMA: &str = include_str!("../schema/report.schema.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Report {
    pub schema_version: u32,
    pub id: String,
    pub task: String,
    pub object: String,
    pub object_label: String,
    pub inputs: Value,
    pub residuals: BTreeMap<String, f64>,
    pub thresholds: BTreeMap<String, f64>,
    pub rule: Option<Rule>,
    pub verdict: Option<Verdict>,
    pub expected: Option<Verdict>,
    pub diagnostics: BTreeMap<String, Value>,
    /// Wall-clock time of the task; the only field that varies between identical runs.
    pub wall_ms: u64,
}

impl Report {
    pub fn matches_expectation(&self) -> bool {
        match self.expected {
            Some(e) => self.verdict == Some(e),
            None => true,
        }
    }
}

/// Residuals, thresholds, verdict and diagnostics produced by a task body.
#[derive(Debug, Clone, Default)]
pub struct Findings {
    pub residuals: BTreeMap<String, f64>,
    pub thresholds: BTreeMap<String, f64>,
    pub rule: Option<Rule>,
    pub verdict: Option<Verdict>,
    pub diagnostics: BTreeMap<String, Value>,
    pub tables: Vec<Table>,
}

impl Findings {
    pub fn residual(mut self, k: &str, v: f64) -> Self {
        self.residuals.insert(k.into(), v);
        self
    }

    pub fn diag(mut self, k: &str, v: impl Serialize) -> Self {
        self.diagnostics.insert(k.into(), serde_json::to_value(v).unwrap_or(Value::Null));
        self
    }

    pub fn table(mut self, t: Table) -> Self {
        self.tables.push(t);
        self
    }
}

impl From<ConditionReport> for Findings {
    fn from(r: ConditionReport) -> Self {
        let mut diagnostics: BTreeMap<String, Value> =
            r.diagnostics.iter().map(|(k, v)| (k.clone(), serde_json::to_value(v).unwrap_or(Value::Null))).collect();
        diagnostics.insert("verifier".into(), Value::from(r.verifier));
        diagnostics.insert("points".into(), serde_json::to_value(&r.points).unwrap_or(Value::Null));
        Findings {
            residuals: r.residuals,
            thresholds: r.thresholds,
            rule: Some(r.rule),
            verdict: Some(r.verdict),
            diagnostics,
            tables: Vec::new(),
        }
    }
}

/// A plot-ready numeric table written as `<task id>.<name>.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Table {
        Table { name: name.into(), header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn write<W: Write>(&self, w: W) -> csv::Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(&self.header)?;
        for r in &self.rows {
            out.write_record(r.iter().map(|v| v.to_string()))?;
        }
        out.flush()?;
        Ok(())
    }
}

pub fn report_path(dir: &Path, id: &str) -> PathBuf {
    dir.join(format!("{id}.json"))
}

pub fn table_path(dir: &Path, id: &str, table: &str) -> PathBuf {
    dir.join(format!("{id}.{table}.csv"))
}

pub fn to_json(r: &Report) -> String {
    let mut s = serde_json::to_string_pretty(r).expect("reports serialize");
    s.push('\n');
    s
}
