//! Machine-readable reports. Each carries the effective configuration it
//! was produced with and can be read back by `validate`.

use serde::{Deserialize, Serialize};

use gridform_core::simulator::Scenario;
use gridform_core::spectral::Complex64;

use crate::schema::{ControllerSpec, DisturbanceSpec, EquivalentSpec, SchemaMode};

pub const METRICS_KIND: &str = "metrics";
pub const ANALYSIS_KIND: &str = "analysis";
pub const COMPARE_KIND: &str = "compare";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectiveConfig {
    pub scenario: String,
    pub schema_mode: String,
    pub overrides: Vec<String>,
    pub nodes: usize,
    pub flow_model: String,
    pub dt: f64,
    pub t_end: f64,
    pub decimate: usize,
    pub settling_band: f64,
    pub controllers: Vec<ControllerSpec>,
    pub disturbances: Vec<DisturbanceSpec>,
}

impl EffectiveConfig {
    pub fn new(
        scenario_path: &str,
        mode: SchemaMode,
        overrides: Vec<String>,
        sc: &Scenario,
        settling_band: f64,
    ) -> Self {
        EffectiveConfig {
            scenario: scenario_path.to_string(),
            schema_mode: mode.name().to_string(),
            overrides,
            nodes: sc.graph.node_count(),
            flow_model: sc.flow_model.name().to_string(),
            dt: sc.dt,
            t_end: sc.t_end,
            decimate: sc.decimate,
            settling_band,
            controllers: sc.controllers.iter().map(ControllerSpec::from_config).collect(),
            disturbances: sc
                .disturbances
                .iter()
                .map(|d| DisturbanceSpec {
                    t_start: d.t_start,
                    node: d.node,
                    delta_p: d.delta_p,
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeMetrics {
    pub node: usize,
    pub rocof_max: f64,
    pub omega_overshoot: f64,
    pub settling_time: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub kind: String,
    pub config: EffectiveConfig,
    pub samples: usize,
    pub t_final: f64,
    pub rocof_max: f64,
    pub omega_avg_final: f64,
    pub theta_avg_ramp_rate: f64,
    pub nodes: Vec<NodeMetrics>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexValue {
    pub re: f64,
    pub im: f64,
}

impl From<Complex64> for ComplexValue {
    fn from(c: Complex64) -> Self {
        ComplexValue { re: c.re, im: c.im }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeEntry {
    pub eta: ComplexValue,
    pub lambda: f64,
    pub lambda_index: usize,
    pub class: String,
    pub repeated: bool,
    pub pivot_residual: f64,
    pub quadratic_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verification {
    pub tol: f64,
    pub max_pivot_residual: f64,
    pub max_quadratic_residual: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteadyStateEntry {
    /// Net injected disturbance per node once every step is active.
    pub p_d: Vec<f64>,
    pub omega: f64,
    pub theta_offsets: Vec<f64>,
    pub theta_avg_slope: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub kind: String,
    pub config: EffectiveConfig,
    pub tuning: EquivalentSpec,
    /// True when line conductances were present and left out of the analysis.
    pub conductance_ignored: bool,
    pub laplacian_eigenvalues: Vec<f64>,
    pub lambda2: f64,
    pub lambda_max: f64,
    pub modes: Vec<ModeEntry>,
    pub eta2: ComplexValue,
    pub damping: String,
    pub oscillatory: bool,
    pub d_crit: f64,
    pub rocof_per_unit_step: f64,
    pub voltage_modes: Vec<f64>,
    pub verification: Verification,
    pub steady_state: Option<SteadyStateEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunEntry {
    pub label: String,
    pub controller: ControllerSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentEntry {
    pub component: String,
    pub max_abs: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairEntry {
    pub a: String,
    pub b: String,
    pub max_deviation: f64,
    pub components: Vec<ComponentEntry>,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub kind: String,
    pub config: EffectiveConfig,
    pub tol: f64,
    pub equivalent: EquivalentSpec,
    pub runs: Vec<RunEntry>,
    pub pairs: Vec<PairEntry>,
    pub passed: bool,
}
