//! Network graph, susceptance Laplacian and power-flow evaluation.
//!
//! Lines are modelled as series admittances with conductance `g ≥ 0` and
//! susceptance magnitude `b > 0`, all in per-unit. Angles are the dq-frame
//! angles of the bus voltage phasors.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

/// Row sums of a Laplacian must vanish to this absolute tolerance.
pub const ROW_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetworkError {
    #[error("invalid network graph: {}", join_diagnostics(.0))]
    InvalidGraph(Vec<GraphDiagnostic>),
    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("non-positive voltage magnitude {value} at node {node}")]
    NonPositiveVoltage { node: usize, value: f64 },
}

fn join_diagnostics(diags: &[GraphDiagnostic]) -> String {
    diags
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

/// One violated graph invariant.
#[derive(Debug, Clone, PartialEq)]
pub enum GraphDiagnostic {
    Empty,
    NodeOutOfRange { edge: usize, node: usize, n: usize },
    SelfLoop { edge: usize, node: usize },
    DuplicateEdge { from: usize, to: usize },
    NonPositiveSusceptance { from: usize, to: usize, b: f64 },
    NegativeConductance { from: usize, to: usize, g: f64 },
    NonFiniteParameter { from: usize, to: usize },
    Disconnected { components: Vec<Vec<usize>> },
}

impl fmt::Display for GraphDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GraphDiagnostic::Empty => write!(f, "network has no nodes"),
            GraphDiagnostic::NodeOutOfRange { edge, node, n } => {
                write!(f, "edge #{edge} references node {node} outside [0, {n})")
            }
            GraphDiagnostic::SelfLoop { edge, node } => {
                write!(f, "edge #{edge} is a self-loop on node {node}")
            }
            GraphDiagnostic::DuplicateEdge { from, to } => {
                write!(f, "duplicate edge ({from},{to})")
            }
            GraphDiagnostic::NonPositiveSusceptance { from, to, b } => {
                write!(f, "nonpositive susceptance on ({from},{to}): b = {b}")
            }
            GraphDiagnostic::NegativeConductance { from, to, g } => {
                write!(f, "negative conductance on ({from},{to}): g = {g}")
            }
            GraphDiagnostic::NonFiniteParameter { from, to } => {
                write!(f, "non-finite line parameter on ({from},{to})")
            }
            GraphDiagnostic::Disconnected { components } => {
                let parts = components
                    .iter()
                    .map(|c| {
                        let ids = c.iter().map(ToString::to_string).collect::<Vec<_>>();
                        format!("{{{}}}", ids.join(","))
                    })
                    .collect::<Vec<_>>();
                write!(f, "disconnected: components {}", parts.join(","))
            }
        }
    }
}

/// A transmission line between two buses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Line {
    pub from: usize,
    pub to: usize,
    /// Series conductance, per-unit.
    pub g: f64,
    /// Series susceptance magnitude, per-unit.
    pub b: f64,
}

impl Line {
    pub fn lossless(from: usize, to: usize, b: f64) -> Self {
        Line { from, to, g: 0.0, b }
    }
}

/// Weighted, undirected power network.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkGraph {
    n: usize,
    lines: Vec<Line>,
    omega0: f64,
}

impl NetworkGraph {
    /// Builds a graph and rejects it if any invariant is violated.
    pub fn new(n: usize, lines: Vec<Line>, omega0: f64) -> Result<Self, NetworkError> {
        let graph = NetworkGraph { n, lines, omega0 };
        let diags = validate_graph(&graph);
        if diags.is_empty() {
            Ok(graph)
        } else {
            Err(NetworkError::InvalidGraph(diags))
        }
    }

    /// Builds a graph without validation. Use [`validate_graph`] to inspect it.
    pub fn new_unchecked(n: usize, lines: Vec<Line>, omega0: f64) -> Self {
        NetworkGraph { n, lines, omega0 }
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn lines(&self) -> &[Line] {
        &self.lines
    }

    /// Nominal angular frequency of the dq frame (rad/s).
    pub fn omega0(&self) -> f64 {
        self.omega0
    }

    pub fn is_lossless(&self) -> bool {
        self.lines.iter().all(|l| l.g == 0.0)
    }

    /// Path graph 0-1-...-(n-1) with uniform susceptance.
    pub fn path(n: usize, b: f64) -> Result<Self, NetworkError> {
        let lines = (1..n).map(|k| Line::lossless(k - 1, k, b)).collect();
        Self::new(n, lines, DEFAULT_OMEGA0)
    }

    /// Cycle graph with uniform susceptance (n ≥ 3).
    pub fn ring(n: usize, b: f64) -> Result<Self, NetworkError> {
        let mut lines: Vec<Line> = (1..n).map(|k| Line::lossless(k - 1, k, b)).collect();
        if n >= 3 {
            lines.push(Line::lossless(n - 1, 0, b));
        }
        Self::new(n, lines, DEFAULT_OMEGA0)
    }

    /// Complete graph with uniform susceptance.
    pub fn complete(n: usize, b: f64) -> Result<Self, NetworkError> {
        let mut lines = Vec::new();
        for k in 0..n {
            for l in (k + 1)..n {
                lines.push(Line::lossless(k, l, b));
            }
        }
        Self::new(n, lines, DEFAULT_OMEGA0)
    }

    /// Star graph centred on node 0.
    pub fn star(n: usize, b: f64) -> Result<Self, NetworkError> {
        let lines = (1..n).map(|k| Line::lossless(0, k, b)).collect();
        Self::new(n, lines, DEFAULT_OMEGA0)
    }
}

/// 50 Hz system.
pub const DEFAULT_OMEGA0: f64 = 2.0 * std::f64::consts::PI * 50.0;

/// Lists every invariant violation of `graph`; empty means valid.
pub fn validate_graph(graph: &NetworkGraph) -> Vec<GraphDiagnostic> {
    let mut diags = Vec::new();
    let n = graph.n;
    if n == 0 {
        diags.push(GraphDiagnostic::Empty);
        return diags;
    }

    let mut seen = HashMap::new();
    let mut structurally_ok = true;
    for (idx, line) in graph.lines.iter().enumerate() {
        for node in [line.from, line.to] {
            if node >= n {
                diags.push(GraphDiagnostic::NodeOutOfRange { edge: idx, node, n });
                structurally_ok = false;
            }
        }
        if line.from == line.to {
            diags.push(GraphDiagnostic::SelfLoop {
                edge: idx,
                node: line.from,
            });
        }
        let key = (line.from.min(line.to), line.from.max(line.to));
        if seen.insert(key, idx).is_some() {
            diags.push(GraphDiagnostic::DuplicateEdge {
                from: line.from,
                to: line.to,
            });
        }
        if !line.b.is_finite() || !line.g.is_finite() {
            diags.push(GraphDiagnostic::NonFiniteParameter {
                from: line.from,
                to: line.to,
            });
            continue;
        }
        if line.b <= 0.0 {
            diags.push(GraphDiagnostic::NonPositiveSusceptance {
                from: line.from,
                to: line.to,
                b: line.b,
            });
        }
        if line.g < 0.0 {
            diags.push(GraphDiagnostic::NegativeConductance {
                from: line.from,
                to: line.to,
                g: line.g,
            });
        }
    }

    if structurally_ok {
        let components = connected_components(n, &graph.lines);
        if components.len() > 1 {
            diags.push(GraphDiagnostic::Disconnected { components });
        }
    }
    diags
}

fn connected_components(n: usize, lines: &[Line]) -> Vec<Vec<usize>> {
    let mut adjacency = vec![Vec::new(); n];
    for line in lines {
        adjacency[line.from].push(line.to);
        adjacency[line.to].push(line.from);
    }
    let mut label = vec![usize::MAX; n];
    let mut components = Vec::new();
    for start in 0..n {
        if label[start] != usize::MAX {
            continue;
        }
        let id = components.len();
        let mut members = BTreeSet::new();
        let mut stack = vec![start];
        label[start] = id;
        while let Some(k) = stack.pop() {
            members.insert(k);
            for &l in &adjacency[k] {
                if label[l] == usize::MAX {
                    label[l] = id;
                    stack.push(l);
                }
            }
        }
        components.push(members.into_iter().collect());
    }
    components
}

/// Dense symmetric Laplacian of line susceptances.
#[derive(Debug, Clone, PartialEq)]
pub struct SusceptanceLaplacian {
    matrix: DMatrix<f64>,
}

impl SusceptanceLaplacian {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Largest absolute row sum.
    pub fn max_row_sum(&self) -> f64 {
        self.matrix
            .row_iter()
            .map(|r| r.sum().abs())
            .fold(0.0, f64::max)
    }

    /// `L_B · x`.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>, NetworkError> {
        if x.len() != self.dim() {
            return Err(NetworkError::DimensionMismatch {
                what: "laplacian operand",
                expected: self.dim(),
                got: x.len(),
            });
        }
        let v = DVector::from_column_slice(x);
        Ok((&self.matrix * v).iter().copied().collect())
    }
}

/// Assembles `L_B` with off-diagonals `-b_kl` and zero row sums.
pub fn build_laplacian(graph: &NetworkGraph) -> Result<SusceptanceLaplacian, NetworkError> {
    let diags = validate_graph(graph);
    if !diags.is_empty() {
        return Err(NetworkError::InvalidGraph(diags));
    }
    let n = graph.n;
    let mut matrix = DMatrix::zeros(n, n);
    for line in &graph.lines {
        let (k, l, b) = (line.from, line.to, line.b);
        matrix[(k, l)] -= b;
        matrix[(l, k)] -= b;
        matrix[(k, k)] += b;
        matrix[(l, l)] += b;
    }
    Ok(SusceptanceLaplacian { matrix })
}

/// Bus angles (rad) and voltage magnitudes (pu).
#[derive(Debug, Clone, PartialEq)]
pub struct BusVoltages {
    pub theta: Vec<f64>,
    pub vm: Vec<f64>,
}

impl BusVoltages {
    pub fn new(theta: Vec<f64>, vm: Vec<f64>) -> Result<Self, NetworkError> {
        if theta.len() != vm.len() {
            return Err(NetworkError::DimensionMismatch {
                what: "voltage magnitudes",
                expected: theta.len(),
                got: vm.len(),
            });
        }
        if let Some((node, &value)) = vm.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
            return Err(NetworkError::NonPositiveVoltage { node, value });
        }
        Ok(BusVoltages { theta, vm })
    }

    /// Flat start: all angles zero, all magnitudes one.
    pub fn flat(n: usize) -> Self {
        BusVoltages {
            theta: vec![0.0; n],
            vm: vec![1.0; n],
        }
    }
}

/// Sign convention for the reactive-power row of the nonlinear flow.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum QSignConvention {
    /// Literal `+B cos` reactive term summed over line parameters.
    Literal,
    /// Branch flows of series admittances (`G sin - B cos` with self terms).
    /// Zero at the flat operating point and linearizes to `L_B · Vm`.
    #[default]
    Standard,
}

/// Active and reactive power leaving each bus.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerFlows {
    pub p: Vec<f64>,
    pub q: Vec<f64>,
}

/// Nonlinear AC power flow.
pub fn ac_power_flow(
    graph: &NetworkGraph,
    v: &BusVoltages,
    convention: QSignConvention,
) -> Result<PowerFlows, NetworkError> {
    let n = graph.n;
    for (what, len) in [("bus angles", v.theta.len()), ("voltage magnitudes", v.vm.len())] {
        if len != n {
            return Err(NetworkError::DimensionMismatch {
                what,
                expected: n,
                got: len,
            });
        }
    }
    let mut p = vec![0.0; n];
    let mut q = vec![0.0; n];
    for line in &graph.lines {
        // Each line contributes to both of its terminal buses.
        for (k, l) in [(line.from, line.to), (line.to, line.from)] {
            let (vk, vl) = (v.vm[k], v.vm[l]);
            let delta = v.theta[k] - v.theta[l];
            let (s, c) = delta.sin_cos();
            let vkvl = vk * vl;
            match convention {
                QSignConvention::Literal => {
                    p[k] += vkvl * (line.g * c + line.b * s);
                    q[k] += vkvl * (line.g * s + line.b * c);
                }
                QSignConvention::Standard => {
                    p[k] += line.g * (vk * vk - vkvl * c) + line.b * vkvl * s;
                    q[k] += line.b * (vk * vk - vkvl * c) - line.g * vkvl * s;
                }
            }
        }
    }
    Ok(PowerFlows { p, q })
}

/// Linearized (DC) power flow: `P = L_B θ`, `Q = L_B Vm`.
pub fn dc_power_flow(
    lap: &SusceptanceLaplacian,
    theta: &[f64],
    vm: &[f64],
) -> Result<PowerFlows, NetworkError> {
    Ok(PowerFlows {
        p: lap.apply(theta)?,
        q: lap.apply(vm)?,
    })
}
