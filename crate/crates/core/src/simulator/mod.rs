//! Time-domain simulation of converter networks.
//!
//! All nodes are integrated together with fixed-step classical RK4. Power
//! flows are re-evaluated at every stage from that stage's angles and voltage
//! magnitudes, so the coupling is exact within the step.

mod integrator;
mod metrics;

use std::fmt;

use thiserror::Error;

use crate::controllers::{ControllerConfig, ControllerError, InitialCondition, NodeState};
use crate::network::{
    ac_power_flow, build_laplacian, dc_power_flow, BusVoltages, NetworkError, NetworkGraph,
    PowerFlows, QSignConvention, SusceptanceLaplacian,
};

pub use integrator::rk4_step;
pub use metrics::{
    compare_trajectories, compute_metrics, Component, ComponentDeviation, DeviationReport,
    Metrics,
};

pub const DEFAULT_DT: f64 = 1e-3;
pub const DEFAULT_T_END: f64 = 10.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid scenario: {}", .0.join("; "))]
    InvalidScenario(Vec<String>),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error("node {node}: {source}")]
    Controller {
        node: usize,
        #[source]
        source: ControllerError,
    },
    #[error("DC link collapse at t={t} on node {node} (v_dc = {v_dc})")]
    DcLinkCollapse { t: f64, node: usize, v_dc: f64 },
    #[error("voltage collapse at t={t} on node {node} (vm = {vm})")]
    VoltageCollapse { t: f64, node: usize, vm: f64 },
    #[error("non-finite state at step {step} (t={t})")]
    NonFinite { step: usize, t: f64 },
    #[error("trajectory has {len} samples, need at least {needed}")]
    TooShort { len: usize, needed: usize },
    #[error("trajectories are on different time grids: {0}")]
    GridMismatch(String),
}

impl SimError {
    /// True for failures of the numerics rather than of the input.
    pub fn is_runtime(&self) -> bool {
        matches!(
            self,
            SimError::DcLinkCollapse { .. } | SimError::VoltageCollapse { .. } | SimError::NonFinite { .. }
        )
    }
}

/// Network power-flow model used to couple the nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FlowModel {
    AcLiteral,
    AcStandard,
    #[default]
    DcLinear,
}

impl FlowModel {
    pub fn name(self) -> &'static str {
        match self {
            FlowModel::AcLiteral => "ac-literal",
            FlowModel::AcStandard => "ac-standard",
            FlowModel::DcLinear => "dc-linear",
        }
    }
}

impl fmt::Display for FlowModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Step increase of the power extracted at `node` from `t_start` on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Disturbance {
    pub t_start: f64,
    pub node: usize,
    pub delta_p: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub graph: NetworkGraph,
    pub controllers: Vec<ControllerConfig>,
    pub flow_model: FlowModel,
    pub disturbances: Vec<Disturbance>,
    pub t_end: f64,
    pub dt: f64,
    /// Record every `decimate`-th step (1 records all).
    pub decimate: usize,
    /// Empty, or one entry per node.
    pub initial_state: Vec<InitialCondition>,
}

impl Scenario {
    pub fn new(graph: NetworkGraph, controllers: Vec<ControllerConfig>) -> Self {
        Scenario {
            graph,
            controllers,
            flow_model: FlowModel::default(),
            disturbances: Vec::new(),
            t_end: DEFAULT_T_END,
            dt: DEFAULT_DT,
            decimate: 1,
            initial_state: Vec::new(),
        }
    }

    /// Every invariant violation, each naming the offending field.
    pub fn validate(&self) -> Vec<String> {
        let mut errs: Vec<String> = crate::network::validate_graph(&self.graph)
            .iter()
            .map(|d| format!("network: {d}"))
            .collect();
        let n = self.graph.node_count();
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            errs.push(format!("simulation.dt must be > 0, got {}", self.dt));
        }
        if !(self.t_end.is_finite() && self.t_end >= self.dt) {
            errs.push(format!(
                "simulation.t_end must be >= dt ({}), got {}",
                self.dt, self.t_end
            ));
        }
        if self.decimate == 0 {
            errs.push("simulation.decimate must be >= 1".into());
        }
        if self.controllers.len() != n {
            errs.push(format!(
                "controllers: expected {n} entries (one per node), got {}",
                self.controllers.len()
            ));
        }
        for (k, c) in self.controllers.iter().enumerate() {
            if let Err(e) = c.validate() {
                errs.push(format!("controllers[{k}].{e}"));
            }
        }
        for (i, d) in self.disturbances.iter().enumerate() {
            if !(d.t_start >= 0.0 && d.t_start.is_finite()) {
                errs.push(format!("disturbances[{i}].t_start must be >= 0, got {}", d.t_start));
            }
            if d.node >= n {
                errs.push(format!("disturbances[{i}].node {} out of range [0, {n})", d.node));
            }
            if !d.delta_p.is_finite() {
                errs.push(format!("disturbances[{i}].delta_p must be finite"));
            }
        }
        if !self.initial_state.is_empty() && self.initial_state.len() != n {
            errs.push(format!(
                "initial_state: expected {n} entries, got {}",
                self.initial_state.len()
            ));
        }
        errs
    }

    /// Net extra extraction at each node at time `t`.
    pub fn disturbance_at(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.graph.node_count()];
        let slack = 1e-9 * self.dt;
        for d in &self.disturbances {
            if t >= d.t_start - slack {
                out[d.node] += d.delta_p;
            }
        }
        out
    }

    pub fn step_count(&self) -> usize {
        ((self.t_end / self.dt).round() as usize).max(1)
    }
}

/// Recorded simulation output.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// `states[sample][node]`.
    pub states: Vec<Vec<NodeState>>,
    /// Network flows (without disturbances) at each sample.
    pub flows: Vec<PowerFlows>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn node_count(&self) -> usize {
        self.states.first().map_or(0, Vec::len)
    }

    pub fn omega(&self, node: usize) -> Vec<f64> {
        self.states.iter().map(|s| s[node].omega).collect()
    }

    pub fn theta(&self, node: usize) -> Vec<f64> {
        self.states.iter().map(|s| s[node].theta).collect()
    }

    pub fn vm(&self, node: usize) -> Vec<f64> {
        self.states.iter().map(|s| s[node].vm).collect()
    }

    pub fn theta_avg(&self) -> Vec<f64> {
        self.states
            .iter()
            .map(|s| s.iter().map(|x| x.theta).sum::<f64>() / s.len() as f64)
            .collect()
    }

    pub fn omega_avg(&self) -> Vec<f64> {
        self.states
            .iter()
            .map(|s| s.iter().map(|x| x.omega).sum::<f64>() / s.len() as f64)
            .collect()
    }

    pub fn final_state(&self) -> &[NodeState] {
        self.states.last().map_or(&[], Vec::as_slice)
    }
}

/// A validated scenario prepared for integration.
pub struct Simulation<'a> {
    scenario: &'a Scenario,
    lap: SusceptanceLaplacian,
    offsets: Vec<usize>,
    dim: usize,
}

impl<'a> Simulation<'a> {
    pub fn new(scenario: &'a Scenario) -> Result<Self, SimError> {
        let errs = scenario.validate();
        if !errs.is_empty() {
            return Err(SimError::InvalidScenario(errs));
        }
        let lap = build_laplacian(&scenario.graph)?;
        let mut offsets = Vec::with_capacity(scenario.controllers.len());
        let mut dim = 0;
        for c in &scenario.controllers {
            offsets.push(dim);
            dim += c.state_len();
        }
        Ok(Simulation {
            scenario,
            lap,
            offsets,
            dim,
        })
    }

    pub fn laplacian(&self) -> &SusceptanceLaplacian {
        &self.lap
    }

    /// Length of the packed system state.
    pub fn dim(&self) -> usize {
        self.dim
    }

    fn slice<'x>(&self, x: &'x [f64], node: usize) -> &'x [f64] {
        let start = self.offsets[node];
        &x[start..start + self.scenario.controllers[node].state_len()]
    }

    pub fn node_states(&self, x: &[f64]) -> Vec<NodeState> {
        self.scenario
            .controllers
            .iter()
            .enumerate()
            .map(|(k, c)| c.unpack(self.slice(x, k)))
            .collect()
    }

    fn flows_at(&self, t: f64, theta: Vec<f64>, vm: Vec<f64>) -> Result<PowerFlows, SimError> {
        if let Some((node, &v)) = vm.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
            return Err(SimError::VoltageCollapse { t, node, vm: v });
        }
        let flows = match self.scenario.flow_model {
            FlowModel::DcLinear => dc_power_flow(&self.lap, &theta, &vm)?,
            FlowModel::AcStandard => ac_power_flow(
                &self.scenario.graph,
                &BusVoltages { theta, vm },
                QSignConvention::Standard,
            )?,
            FlowModel::AcLiteral => ac_power_flow(
                &self.scenario.graph,
                &BusVoltages { theta, vm },
                QSignConvention::Literal,
            )?,
        };
        Ok(flows)
    }

    /// Network flows for a set of node states.
    pub fn flows(&self, t: f64, states: &[NodeState]) -> Result<PowerFlows, SimError> {
        self.flows_at(
            t,
            states.iter().map(|s| s.theta).collect(),
            states.iter().map(|s| s.vm).collect(),
        )
    }

    /// Packed initial state, with filter states initialized consistently.
    pub fn initial_state(&self) -> Result<Vec<f64>, SimError> {
        let sc = self.scenario;
        let n = sc.controllers.len();
        let default_init = InitialCondition::default();
        let init = |k: usize| sc.initial_state.get(k).unwrap_or(&default_init);
        let theta: Vec<f64> = (0..n).map(|k| init(k).theta.unwrap_or(0.0)).collect();
        let vm: Vec<f64> = (0..n).map(|k| sc.controllers[k].initial_vm(init(k))).collect();
        let flows = self.flows_at(0.0, theta, vm)?;
        let mut x = vec![0.0; self.dim];
        for (k, c) in sc.controllers.iter().enumerate() {
            let state = c
                .initial_state(init(k), flows.p[k], flows.q[k])
                .map_err(|source| SimError::Controller { node: k, source })?;
            let start = self.offsets[k];
            c.pack(&state, &mut x[start..start + c.state_len()])
                .map_err(|source| SimError::Controller { node: k, source })?;
        }
        Ok(x)
    }

    /// System derivative at time `t`.
    pub fn rhs(&self, t: f64, x: &[f64], dx: &mut [f64]) -> Result<(), SimError> {
        let states = self.node_states(x);
        let flows = self.flows(t, &states)?;
        let extra = self.scenario.disturbance_at(t);
        for (k, c) in self.scenario.controllers.iter().enumerate() {
            let rates = c
                .derivative(&states[k], flows.p[k] + extra[k], flows.q[k])
                .map_err(|source| match source {
                    ControllerError::DcLinkCollapse { v_dc } => SimError::DcLinkCollapse { t, node: k, v_dc },
                    source => SimError::Controller { node: k, source },
                })?;
            let start = self.offsets[k];
            c.pack_rates(&rates, &mut dx[start..start + c.state_len()]);
        }
        Ok(())
    }

    /// One RK4 step from `(t, x)`.
    pub fn step(&self, t: f64, x: &[f64], dt: f64) -> Result<Vec<f64>, SimError> {
        rk4_step(|t, x, dx| self.rhs(t, x, dx), t, x, dt)
    }

    fn check_state(&self, step: usize, t: f64, x: &[f64]) -> Result<Vec<NodeState>, SimError> {
        if x.iter().any(|v| !v.is_finite()) {
            return Err(SimError::NonFinite { step, t });
        }
        let states = self.node_states(x);
        for (node, s) in states.iter().enumerate() {
            if let Some(v_dc) = s.v_dc {
                if !(v_dc > 0.0) {
                    return Err(SimError::DcLinkCollapse { t, node, v_dc });
                }
            }
        }
        Ok(states)
    }

    /// Integrates from 0 to `t_end`.
    pub fn run(&self) -> Result<Trajectory, SimError> {
        let sc = self.scenario;
        let steps = sc.step_count();
        let mut x = self.initial_state()?;
        let capacity = steps / sc.decimate + 1;
        let mut traj = Trajectory {
            times: Vec::with_capacity(capacity),
            states: Vec::with_capacity(capacity),
            flows: Vec::with_capacity(capacity),
        };
        let record = |traj: &mut Trajectory, t: f64, states: Vec<NodeState>| -> Result<(), SimError> {
            traj.flows.push(self.flows(t, &states)?);
            traj.times.push(t);
            traj.states.push(states);
            Ok(())
        };
        let states = self.check_state(0, 0.0, &x)?;
        record(&mut traj, 0.0, states)?;
        for k in 0..steps {
            let t = k as f64 * sc.dt;
            x = self.step(t, &x, sc.dt)?;
            let t_next = (k + 1) as f64 * sc.dt;
            let states = self.check_state(k + 1, t_next, &x)?;
            if (k + 1) % sc.decimate == 0 {
                record(&mut traj, t_next, states)?;
            }
        }
        Ok(traj)
    }
}

/// Validates and integrates `scenario`.
pub fn run_scenario(scenario: &Scenario) -> Result<Trajectory, SimError> {
    Simulation::new(scenario)?.run()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::controllers::{
        ControllerForm, DroopParams, MatchingParams, NativeParams, VsmParams,
    };
    use crate::network::{Line, DEFAULT_OMEGA0};
    use approx::assert_abs_diff_eq;

    fn vsm(m: f64, d: f64, form: ControllerForm) -> ControllerConfig {
        ControllerConfig::new(
            NativeParams::Vsm(VsmParams {
                r_q: 0.2,
                ..VsmParams::new(m, d)
            }),
            form,
        )
    }

    fn single_node(dt: f64, t_end: f64) -> Scenario {
        let graph = NetworkGraph::new(1, vec![], DEFAULT_OMEGA0).unwrap();
        Scenario {
            disturbances: vec![Disturbance {
                t_start: 0.0,
                node: 0,
                delta_p: -1.0,
            }],
            dt,
            t_end,
            ..Scenario::new(graph, vec![vsm(2.0, 20.0, ControllerForm::Reduced)])
        }
    }

    #[test]
    fn trivial_operating_point_is_stationary() {
        for form in [ControllerForm::Full, ControllerForm::Reduced] {
            for flow in [FlowModel::DcLinear, FlowModel::AcStandard] {
                let sc = Scenario {
                    flow_model: flow,
                    t_end: 1.0,
                    ..Scenario::new(NetworkGraph::ring(4, 1.0).unwrap(), vec![vsm(2.0, 20.0, form); 4])
                };
                let traj = run_scenario(&sc).unwrap();
                for s in traj.states.iter().flatten() {
                    assert_eq!((s.theta, s.omega), (0.0, 0.0));
                    assert_abs_diff_eq!(s.vm, 1.0, epsilon = 1e-15);
                }
            }
        }
    }

    #[test]
    fn single_node_step_matches_closed_form() {
        let traj = run_scenario(&single_node(1e-3, 0.2)).unwrap();
        let last = traj.final_state()[0].omega;
        let exact = 0.05 * (1.0 - (-10.0f64 * 0.2).exp());
        assert_abs_diff_eq!(exact, 0.043_233_235, epsilon = 1e-8);
        assert_abs_diff_eq!(last, exact, epsilon = 1e-6);
        assert_eq!(traj.len(), 201);
    }

    #[test]
    fn runs_are_deterministic() {
        let sc = Scenario {
            disturbances: vec![Disturbance {
                t_start: 0.1,
                node: 2,
                delta_p: 0.3,
            }],
            flow_model: FlowModel::AcStandard,
            t_end: 0.5,
            ..Scenario::new(NetworkGraph::ring(4, 2.0).unwrap(), vec![vsm(2.0, 20.0, ControllerForm::Full); 4])
        };
        assert_eq!(run_scenario(&sc).unwrap(), run_scenario(&sc).unwrap());
    }

    #[test]
    fn lossless_linear_flows_balance() {
        let sc = Scenario {
            disturbances: vec![Disturbance {
                t_start: 0.0,
                node: 1,
                delta_p: 0.5,
            }],
            t_end: 2.0,
            ..Scenario::new(NetworkGraph::star(5, 1.5).unwrap(), vec![vsm(1.0, 4.0, ControllerForm::Reduced); 5])
        };
        let traj = run_scenario(&sc).unwrap();
        for f in &traj.flows {
            assert!(f.p.iter().sum::<f64>().abs() < 1e-10);
        }
    }

    #[test]
    fn decimation_keeps_uniform_spacing() {
        let sc = Scenario {
            decimate: 10,
            ..single_node(1e-3, 0.1)
        };
        let traj = run_scenario(&sc).unwrap();
        assert_eq!(traj.len(), 11);
        for w in traj.times.windows(2) {
            assert_abs_diff_eq!(w[1] - w[0], 0.01, epsilon = 1e-15);
        }
    }

    #[test]
    fn validation_names_fields() {
        let mut sc = single_node(0.0, 1.0);
        sc.disturbances[0].node = 3;
        sc.controllers.push(vsm(1.0, 1.0, ControllerForm::Full));
        let errs = sc.validate();
        assert!(errs.iter().any(|e| e.starts_with("simulation.dt")));
        assert!(errs.iter().any(|e| e.starts_with("disturbances[0].node")));
        assert!(errs.iter().any(|e| e.starts_with("controllers: expected 1")));
        assert!(matches!(run_scenario(&sc), Err(SimError::InvalidScenario(_))));
    }

    #[test]
    fn matching_link_collapse_is_reported() {
        let mt = MatchingParams::new(0.08, 0.04, 0.8);
        let graph = NetworkGraph::new(2, vec![Line::lossless(0, 1, 1.0)], DEFAULT_OMEGA0).unwrap();
        let sc = Scenario {
            disturbances: vec![Disturbance {
                t_start: 0.0,
                node: 0,
                delta_p: 5.0,
            }],
            t_end: 5.0,
            ..Scenario::new(graph, vec![ControllerConfig::new(NativeParams::Matching(mt), ControllerForm::Full); 2])
        };
        let err = run_scenario(&sc).unwrap_err();
        assert!(matches!(err, SimError::DcLinkCollapse { node: 0, .. }), "{err}");
        assert!(err.is_runtime());
        assert!(err.to_string().starts_with("DC link collapse at t="));
    }

    #[test]
    fn droop_full_matches_reduced() {
        let dr = DroopParams {
            r_q: 0.1,
            ..DroopParams::new(0.05, 0.1)
        };
        let make = |form| Scenario {
            disturbances: vec![Disturbance {
                t_start: 0.0,
                node: 0,
                delta_p: 0.2,
            }],
            t_end: 1.0,
            ..Scenario::new(NetworkGraph::path(3, 1.0).unwrap(), vec![ControllerConfig::new(NativeParams::Droop(dr), form); 3])
        };
        let a = run_scenario(&make(ControllerForm::Full)).unwrap();
        let b = run_scenario(&make(ControllerForm::Reduced)).unwrap();
        let report = compare_trajectories(&a, &b, &Component::ALL, 1e-9).unwrap();
        assert!(report.passed, "{report:?}");
    }
}
