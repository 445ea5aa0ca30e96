//! Scenario files: declared objects, an ordered task list and output settings.

use std::collections::BTreeMap;

use oscgeo::conditions::Verdict;
use oscgeo::osclab::DecayMode;
use oscgeo::poly::Monomial;
use oscgeo::MetricSpec;
use serde::{Deserialize, Serialize};

pub const SCENARIO_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub version: u32,
    pub objects: BTreeMap<String, ObjectSpec>,
    pub tasks: Vec<Task>,
    pub output: Output,
    /// Seed for randomized placements; tasks without randomness ignore it.
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ObjectSpec {
    Metric(MetricSpec),
    Phase(PhaseSpec),
}

/// Phases are library names, polynomials in `(x₁, x₂, t, y₁, y₂)`, or distance phases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PhaseSpec {
    Named { name: String },
    Polynomial { terms: Vec<Monomial>, label: String },
    Distance { metric: MetricSpec, epsilon: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Output {
    pub dir: String,
    pub formats: Vec<Format>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Task {
    pub id: String,
    pub object: String,
    pub task: TaskKind,
    /// Thresholds behind the verdict; verdict-bearing tasks must list every one.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub tolerances: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expect: Option<Verdict>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "run", content = "params", rename_all = "snake_case")]
pub enum TaskKind {
    Curvature(CurvatureParams),
    Geodesic(GeodesicParams),
    JacobiTaylor(JacobiParams),
    CheckBourgain(BourgainParams),
    ContactOrder(ContactParams),
    CheckChaotic(ChaoticParams),
    Wolff(WolffParams),
    PhaseMetric(PhaseMetricParams),
    OscDecay(DecayParams),
    Tubes(TubeParams),
}

impl TaskKind {
    pub fn name(&self) -> &'static str {
        match self {
            TaskKind::Curvature(_) => "curvature",
            TaskKind::Geodesic(_) => "geodesic",
            TaskKind::JacobiTaylor(_) => "jacobi_taylor",
            TaskKind::CheckBourgain(_) => "check_bourgain",
            TaskKind::ContactOrder(_) => "contact_order",
            TaskKind::CheckChaotic(_) => "check_chaotic",
            TaskKind::Wolff(_) => "wolff",
            TaskKind::PhaseMetric(_) => "phase_metric",
            TaskKind::OscDecay(_) => "osc_decay",
            TaskKind::Tubes(_) => "tubes",
        }
    }

    /// Tolerance names a verdict-bearing task needs; empty for experiments.
    pub fn tolerance_keys(&self) -> &'static [&'static str] {
        match self {
            TaskKind::CheckBourgain(_) => &["tau_hold", "tau_fail"],
            TaskKind::ContactOrder(_) => &["rank_tol"],
            TaskKind::CheckChaotic(_) => &["tau_c"],
            TaskKind::Wolff(_) => &["lower"],
            TaskKind::PhaseMetric(_) => &["tol"],
            _ => &[],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurvatureParams {
    pub point: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeodesicParams {
    pub point: Vec<f64>,
    /// Shoot to this endpoint; otherwise integrate from `direction` over `length`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub direction: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub length: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JacobiParams {
    pub point: Vec<f64>,
    pub direction: Vec<f64>,
    pub epsilon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BourgainParams {
    pub point: Vec<f64>,
    pub y0: Vec<f64>,
    /// Required for metric objects: the distance phase uses `(y0, ε)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContactParams {
    pub point: Vec<f64>,
    pub y0: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default = "default_kmax")]
    pub kmax: usize,
}

fn default_kmax() -> usize {
    6
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChaoticParams {
    pub point: Vec<f64>,
    #[serde(default = "default_directions")]
    pub directions: usize,
}

fn default_directions() -> usize {
    64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WolffParams {
    #[serde(default = "zero2")]
    pub v: Vec<f64>,
    #[serde(default = "zero2")]
    pub xi: Vec<f64>,
    #[serde(default = "one")]
    pub half: f64,
}

fn zero2() -> Vec<f64> {
    vec![0.0, 0.0]
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseMetricParams {
    pub point: Vec<f64>,
    #[serde(default = "default_grid")]
    pub grid: usize,
}

fn default_grid() -> usize {
    21
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecayParams {
    pub mode: DecayMode,
    #[serde(rename = "Ns")]
    pub ns: Vec<f64>,
    /// Pointwise evaluation point; defaults to `(0, …, 0, 0.3)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub point: Option<Vec<f64>>,
    /// Cells per axis for `L^p` mode.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TubeParams {
    pub deltas: Vec<f64>,
    /// Number of tubes per δ.
    pub count: usize,
    /// λ-truncation for geodesic tubes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
}
