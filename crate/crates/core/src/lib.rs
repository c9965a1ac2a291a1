//! Grid-forming converter networks under VSM, droop and matching control.
//!
//! - [`network`]: graph, susceptance Laplacian, AC and linearized power flow.
//! - [`controllers`]: nodal dynamics of each family in full and reduced form,
//!   and the map to equivalent inertia/damping.
//! - [`simulator`]: coupled RK4 simulation, transient metrics, trajectory comparison.
//! - [`spectral`]: modes of the linearized network, average/difference
//!   coordinates, steady-state and tuning predictions.

pub mod controllers;
pub mod network;
pub mod simulator;
pub mod spectral;

pub use controllers::{
    ControllerConfig, ControllerFamily, ControllerForm, DroopParams, EquivalentParams,
    InitialCondition, MatchingParams, NativeParams, NodeState, VsmParams,
};
pub use network::{Line, NetworkGraph, QSignConvention};
pub use simulator::{Disturbance, FlowModel, Scenario, Trajectory};
