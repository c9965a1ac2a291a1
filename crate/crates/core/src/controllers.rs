//! Nodal dynamics of the three grid-forming controllers.
//!
//! Every family has a *full* form, which integrates the measurement filters
//! (or the DC-link capacitor) as they are implemented on the converter, and a
//! *reduced* form, which is the second-order swing equation
//!
//! ```text
//! dθ/dt = ω
//! M dω/dt = -D ω + P* - P
//! τ_f dVm/dt = R_q (Q* - Q) + (Vm* - Vm)
//! ```
//!
//! with family-specific equivalent inertia `M` and damping `D`
//! (see [`map_to_equivalent`]).
//!
//! Frequencies are deviations from the nominal dq-frame speed, so `ω = 0`
//! is nominal. `P` and `Q` passed to the derivative functions are the power
//! leaving the node, including any extraction disturbance.

use std::fmt;

use thiserror::Error;

/// Relative tolerance used when checking equivalent-parameter round trips.
pub const ROUND_TRIP_RTOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ControllerError {
    #[error("{field} = {value} violates {requirement}")]
    InvalidParameter {
        field: &'static str,
        value: f64,
        requirement: &'static str,
    },
    #[error("{form} state is missing `{field}`")]
    MissingState {
        field: &'static str,
        form: &'static str,
    },
    #[error("DC link collapse: v_dc = {v_dc}")]
    DcLinkCollapse { v_dc: f64 },
    #[error("inconsistent initial state: {0}")]
    InconsistentInitialState(String),
    #[error("underdetermined inversion: {0}")]
    Underdetermined(String),
    #[error("overdetermined inversion: {0}")]
    Overdetermined(String),
    #[error("target not realizable: {0}")]
    Unrealizable(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ControllerFamily {
    Vsm,
    Droop,
    Matching,
}

impl ControllerFamily {
    pub const ALL: [ControllerFamily; 3] = [Self::Vsm, Self::Droop, Self::Matching];

    pub fn name(self) -> &'static str {
        match self {
            Self::Vsm => "vsm",
            Self::Droop => "droop",
            Self::Matching => "matching",
        }
    }
}

impl fmt::Display for ControllerFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ControllerForm {
    Full,
    Reduced,
}

impl ControllerForm {
    pub fn name(self) -> &'static str {
        match self {
            Self::Full => "full",
            Self::Reduced => "reduced",
        }
    }
}

impl fmt::Display for ControllerForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Virtual synchronous machine gains and setpoints.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VsmParams {
    pub m: f64,
    pub d: f64,
    pub tau_f: f64,
    pub r_q: f64,
    pub p_star: f64,
    pub q_star: f64,
    pub vm_star: f64,
    /// Integrate an active-power low-pass filter with time constant `tau_f`
    /// in the full form instead of using the instantaneous power.
    pub active_power_filter: bool,
}

impl VsmParams {
    pub fn new(m: f64, d: f64) -> Self {
        VsmParams {
            m,
            d,
            tau_f: 0.1,
            r_q: 0.0,
            p_star: 0.0,
            q_star: 0.0,
            vm_star: 1.0,
            active_power_filter: false,
        }
    }
}

/// Droop gains. One filter time constant is shared by the P and Q filters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DroopParams {
    /// Active droop gain (rad/s per pu).
    pub r_p: f64,
    pub tau_f: f64,
    pub r_q: f64,
    pub p_star: f64,
    pub q_star: f64,
    pub vm_star: f64,
}

impl DroopParams {
    pub fn new(r_p: f64, tau_f: f64) -> Self {
        DroopParams {
            r_p,
            tau_f,
            r_q: 0.0,
            p_star: 0.0,
            q_star: 0.0,
            vm_star: 1.0,
        }
    }
}

/// Matching control gains and DC-link parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchingParams {
    /// DC-link capacitance (pu·s).
    pub c_dc: f64,
    pub v_dc_star: f64,
    /// Frequency per unit of DC-voltage error (rad/s per pu).
    pub k_theta: f64,
    /// DC current per unit of DC-voltage error.
    pub k_dc: f64,
    pub i_dc_star: f64,
    pub tau_f: f64,
    pub r_q: f64,
    pub q_star: f64,
    pub vm_star: f64,
}

impl MatchingParams {
    pub fn new(c_dc: f64, k_theta: f64, k_dc: f64) -> Self {
        MatchingParams {
            c_dc,
            v_dc_star: 1.0,
            k_theta,
            k_dc,
            i_dc_star: 0.0,
            tau_f: 0.1,
            r_q: 0.0,
            q_star: 0.0,
            vm_star: 1.0,
        }
    }
}

/// Swing-equation parameters shared by all reduced forms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquivalentParams {
    pub m: f64,
    pub d: f64,
    pub p_star: f64,
    pub q_star: f64,
    pub vm_star: f64,
    pub tau_f: f64,
    pub r_q: f64,
}

impl EquivalentParams {
    pub fn validate(&self) -> Result<(), ControllerError> {
        positive("m", self.m)?;
        positive("d", self.d)?;
        positive("tau_f", self.tau_f)?;
        non_negative("r_q", self.r_q)?;
        finite("p_star", self.p_star)?;
        finite("q_star", self.q_star)?;
        positive("vm_star", self.vm_star)
    }

    /// True when every field agrees with `other` to relative tolerance `rtol`.
    pub fn approx_eq(&self, other: &EquivalentParams, rtol: f64) -> bool {
        let close = |a: f64, b: f64| (a - b).abs() <= rtol * a.abs().max(b.abs()).max(f64::MIN_POSITIVE);
        close(self.m, other.m)
            && close(self.d, other.d)
            && close(self.p_star, other.p_star)
            && close(self.q_star, other.q_star)
            && close(self.vm_star, other.vm_star)
            && close(self.tau_f, other.tau_f)
            && close(self.r_q, other.r_q)
    }
}

fn positive(field: &'static str, value: f64) -> Result<(), ControllerError> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(ControllerError::InvalidParameter {
            field,
            value,
            requirement: "> 0",
        })
    }
}

fn non_negative(field: &'static str, value: f64) -> Result<(), ControllerError> {
    if value >= 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(ControllerError::InvalidParameter {
            field,
            value,
            requirement: ">= 0",
        })
    }
}

fn finite(field: &'static str, value: f64) -> Result<(), ControllerError> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(ControllerError::InvalidParameter {
            field,
            value,
            requirement: "finite",
        })
    }
}

/// Native parameters of one of the three families.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NativeParams {
    Vsm(VsmParams),
    Droop(DroopParams),
    Matching(MatchingParams),
}

impl NativeParams {
    pub fn family(&self) -> ControllerFamily {
        match self {
            NativeParams::Vsm(_) => ControllerFamily::Vsm,
            NativeParams::Droop(_) => ControllerFamily::Droop,
            NativeParams::Matching(_) => ControllerFamily::Matching,
        }
    }

    pub fn validate(&self) -> Result<(), ControllerError> {
        match self {
            NativeParams::Vsm(p) => {
                positive("m", p.m)?;
                positive("d", p.d)?;
                positive("tau_f", p.tau_f)?;
                non_negative("r_q", p.r_q)?;
                finite("p_star", p.p_star)?;
                finite("q_star", p.q_star)?;
                positive("vm_star", p.vm_star)
            }
            NativeParams::Droop(p) => {
                positive("r_p", p.r_p)?;
                positive("tau_f", p.tau_f)?;
                non_negative("r_q", p.r_q)?;
                finite("p_star", p.p_star)?;
                finite("q_star", p.q_star)?;
                positive("vm_star", p.vm_star)
            }
            NativeParams::Matching(p) => {
                positive("c_dc", p.c_dc)?;
                positive("v_dc_star", p.v_dc_star)?;
                positive("k_theta", p.k_theta)?;
                positive("k_dc", p.k_dc)?;
                finite("i_dc_star", p.i_dc_star)?;
                positive("tau_f", p.tau_f)?;
                non_negative("r_q", p.r_q)?;
                finite("q_star", p.q_star)?;
                positive("vm_star", p.vm_star)
            }
        }
    }

    fn voltage_loop(&self) -> VoltageLoop {
        match *self {
            NativeParams::Vsm(p) => VoltageLoop::new(p.tau_f, p.r_q, p.q_star, p.vm_star),
            NativeParams::Droop(p) => VoltageLoop::new(p.tau_f, p.r_q, p.q_star, p.vm_star),
            NativeParams::Matching(p) => VoltageLoop::new(p.tau_f, p.r_q, p.q_star, p.vm_star),
        }
    }
}

/// Equivalent inertia and damping of a native parameter set.
pub fn map_to_equivalent(params: &NativeParams) -> EquivalentParams {
    match *params {
        NativeParams::Vsm(p) => EquivalentParams {
            m: p.m,
            d: p.d,
            p_star: p.p_star,
            q_star: p.q_star,
            vm_star: p.vm_star,
            tau_f: p.tau_f,
            r_q: p.r_q,
        },
        NativeParams::Droop(p) => EquivalentParams {
            m: p.tau_f / p.r_p,
            d: 1.0 / p.r_p,
            p_star: p.p_star,
            q_star: p.q_star,
            vm_star: p.vm_star,
            tau_f: p.tau_f,
            r_q: p.r_q,
        },
        NativeParams::Matching(p) => EquivalentParams {
            m: p.c_dc * p.v_dc_star / p.k_theta,
            d: p.k_dc * p.v_dc_star / p.k_theta,
            p_star: p.v_dc_star * p.i_dc_star,
            q_star: p.q_star,
            vm_star: p.vm_star,
            tau_f: p.tau_f,
            r_q: p.r_q,
        },
    }
}

/// Native parameters that are not determined by the equivalent target.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct FixedNative {
    /// Required for matching.
    pub c_dc: Option<f64>,
    /// Matching only; defaults to 1 pu.
    pub v_dc_star: Option<f64>,
    /// VSM only.
    pub active_power_filter: bool,
}

/// Native gains of `family` whose equivalent parameters reproduce `target`.
pub fn invert_equivalent(
    target: &EquivalentParams,
    family: ControllerFamily,
    fixed: &FixedNative,
) -> Result<NativeParams, ControllerError> {
    target.validate()?;
    let native = match family {
        ControllerFamily::Vsm => {
            if fixed.c_dc.is_some() || fixed.v_dc_star.is_some() {
                return Err(ControllerError::Overdetermined(
                    "vsm takes no DC-link parameters".into(),
                ));
            }
            NativeParams::Vsm(VsmParams {
                m: target.m,
                d: target.d,
                tau_f: target.tau_f,
                r_q: target.r_q,
                p_star: target.p_star,
                q_star: target.q_star,
                vm_star: target.vm_star,
                active_power_filter: fixed.active_power_filter,
            })
        }
        ControllerFamily::Droop => {
            if fixed.c_dc.is_some() || fixed.v_dc_star.is_some() || fixed.active_power_filter {
                return Err(ControllerError::Overdetermined(
                    "droop is fully determined by (M, D, tau_f)".into(),
                ));
            }
            let implied_tau = target.m / target.d;
            if (implied_tau - target.tau_f).abs() > ROUND_TRIP_RTOL * target.tau_f {
                return Err(ControllerError::Unrealizable(format!(
                    "τ_f must equal M/D for droop (M/D = {implied_tau}, tau_f = {})",
                    target.tau_f
                )));
            }
            NativeParams::Droop(DroopParams {
                r_p: 1.0 / target.d,
                tau_f: target.tau_f,
                r_q: target.r_q,
                p_star: target.p_star,
                q_star: target.q_star,
                vm_star: target.vm_star,
            })
        }
        ControllerFamily::Matching => {
            if fixed.active_power_filter {
                return Err(ControllerError::Overdetermined(
                    "matching has no active-power filter".into(),
                ));
            }
            let c_dc = fixed.c_dc.ok_or_else(|| {
                ControllerError::Underdetermined("matching needs a fixed c_dc".into())
            })?;
            let v_dc_star = fixed.v_dc_star.unwrap_or(1.0);
            positive("c_dc", c_dc)?;
            positive("v_dc_star", v_dc_star)?;
            let k_theta = c_dc * v_dc_star / target.m;
            NativeParams::Matching(MatchingParams {
                c_dc,
                v_dc_star,
                k_theta,
                k_dc: target.d * k_theta / v_dc_star,
                i_dc_star: target.p_star / v_dc_star,
                tau_f: target.tau_f,
                r_q: target.r_q,
                q_star: target.q_star,
                vm_star: target.vm_star,
            })
        }
    };
    let back = map_to_equivalent(&native);
    if !back.approx_eq(target, ROUND_TRIP_RTOL) {
        return Err(ControllerError::Unrealizable(format!(
            "round trip drifted: {back:?} vs {target:?}"
        )));
    }
    Ok(native)
}

/// Per-node state. Fields that are not part of a controller form are `None`.
///
/// `omega` and `vm` are always populated: they are either integrated states or
/// algebraic outputs of the filter / DC-link states.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeState {
    pub theta: f64,
    pub omega: f64,
    pub vm: f64,
    pub p_filt: Option<f64>,
    pub q_filt: Option<f64>,
    pub v_dc: Option<f64>,
}

impl NodeState {
    /// Reduced-form state with no filter or DC-link entries.
    pub fn reduced(theta: f64, omega: f64, vm: f64) -> Self {
        NodeState {
            theta,
            omega,
            vm,
            p_filt: None,
            q_filt: None,
            v_dc: None,
        }
    }
}

/// Time derivatives of a [`NodeState`]. For algebraic outputs the rate is the
/// one implied by the underlying state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeRates {
    pub theta: f64,
    pub omega: f64,
    pub vm: f64,
    pub p_filt: Option<f64>,
    pub q_filt: Option<f64>,
    pub v_dc: Option<f64>,
}

#[derive(Debug, Clone, Copy)]
struct VoltageLoop {
    tau_f: f64,
    r_q: f64,
    q_star: f64,
    vm_star: f64,
}

impl VoltageLoop {
    fn new(tau_f: f64, r_q: f64, q_star: f64, vm_star: f64) -> Self {
        VoltageLoop {
            tau_f,
            r_q,
            q_star,
            vm_star,
        }
    }

    fn vm_from_filter(&self, q_filt: f64) -> f64 {
        self.vm_star + self.r_q * (self.q_star - q_filt)
    }

    /// (dQ̃/dt, implied dVm/dt)
    fn filter_rates(&self, q_filt: f64, q: f64) -> (f64, f64) {
        let dq = (q - q_filt) / self.tau_f;
        (dq, -self.r_q * dq)
    }

    fn reduced_rate(&self, vm: f64, q: f64) -> f64 {
        (self.r_q * (self.q_star - q) + (self.vm_star - vm)) / self.tau_f
    }
}

fn require(value: Option<f64>, field: &'static str, form: &'static str) -> Result<f64, ControllerError> {
    value.ok_or(ControllerError::MissingState { field, form })
}

/// Full VSM: swing equation on the (optionally filtered) active power and a
/// reactive-power filter driving the voltage magnitude.
pub fn vsm_full_derivative(
    s: &NodeState,
    params: &VsmParams,
    p: f64,
    q: f64,
) -> Result<NodeRates, ControllerError> {
    const FORM: &str = "vsm full";
    let vl = VoltageLoop::new(params.tau_f, params.r_q, params.q_star, params.vm_star);
    let q_filt = require(s.q_filt, "q_filt", FORM)?;
    let (dq_filt, dvm) = vl.filter_rates(q_filt, q);
    let (p_meas, dp_filt) = if params.active_power_filter {
        let p_filt = require(s.p_filt, "p_filt", FORM)?;
        (p_filt, Some((p - p_filt) / params.tau_f))
    } else {
        (p, None)
    };
    Ok(NodeRates {
        theta: s.omega,
        omega: (-params.d * s.omega + params.p_star - p_meas) / params.m,
        vm: dvm,
        p_filt: dp_filt,
        q_filt: Some(dq_filt),
        v_dc: None,
    })
}

/// Reduced swing dynamics shared by every family.
pub fn vsm_reduced_derivative(s: &NodeState, eq: &EquivalentParams, p: f64, q: f64) -> NodeRates {
    let vl = VoltageLoop::new(eq.tau_f, eq.r_q, eq.q_star, eq.vm_star);
    NodeRates {
        theta: s.omega,
        omega: (-eq.d * s.omega + eq.p_star - p) / eq.m,
        vm: vl.reduced_rate(s.vm, q),
        p_filt: None,
        q_filt: None,
        v_dc: None,
    }
}

/// Full droop: ω is proportional to the filtered active-power error.
pub fn droop_full_derivative(
    s: &NodeState,
    params: &DroopParams,
    p: f64,
    q: f64,
) -> Result<NodeRates, ControllerError> {
    const FORM: &str = "droop full";
    let vl = VoltageLoop::new(params.tau_f, params.r_q, params.q_star, params.vm_star);
    let p_filt = require(s.p_filt, "p_filt", FORM)?;
    let q_filt = require(s.q_filt, "q_filt", FORM)?;
    let omega = params.r_p * (params.p_star - p_filt);
    let dp_filt = (p - p_filt) / params.tau_f;
    let (dq_filt, dvm) = vl.filter_rates(q_filt, q);
    Ok(NodeRates {
        theta: omega,
        omega: -params.r_p * dp_filt,
        vm: dvm,
        p_filt: Some(dp_filt),
        q_filt: Some(dq_filt),
        v_dc: None,
    })
}

pub fn droop_reduced_derivative(s: &NodeState, params: &DroopParams, p: f64, q: f64) -> NodeRates {
    vsm_reduced_derivative(s, &map_to_equivalent(&NativeParams::Droop(*params)), p, q)
}

/// Full matching control: ω follows the DC-link voltage, which is charged by a
/// proportional DC current controller and discharged by the AC power.
pub fn matching_full_derivative(
    s: &NodeState,
    params: &MatchingParams,
    p: f64,
    q: f64,
) -> Result<NodeRates, ControllerError> {
    const FORM: &str = "matching full";
    let vl = VoltageLoop::new(params.tau_f, params.r_q, params.q_star, params.vm_star);
    let v_dc = require(s.v_dc, "v_dc", FORM)?;
    let q_filt = require(s.q_filt, "q_filt", FORM)?;
    if !(v_dc > 0.0) {
        return Err(ControllerError::DcLinkCollapse { v_dc });
    }
    let omega = params.k_theta * (v_dc - params.v_dc_star);
    let i_dc = params.i_dc_star + params.k_dc * (params.v_dc_star - v_dc);
    let dv_dc = (i_dc - p / v_dc) / params.c_dc;
    let (dq_filt, dvm) = vl.filter_rates(q_filt, q);
    Ok(NodeRates {
        theta: omega,
        omega: params.k_theta * dv_dc,
        vm: dvm,
        p_filt: None,
        q_filt: Some(dq_filt),
        v_dc: Some(dv_dc),
    })
}

/// Reduced matching: swing equation with `V_dc*/V_dc` taken as one.
/// The DC-link voltage rate is reported as implied by `ω = K_θ (V_dc - V_dc*)`.
pub fn matching_reduced_derivative(
    s: &NodeState,
    params: &MatchingParams,
    p: f64,
    q: f64,
) -> NodeRates {
    let mut rates = vsm_reduced_derivative(s, &map_to_equivalent(&NativeParams::Matching(*params)), p, q);
    rates.v_dc = Some(rates.omega / params.k_theta);
    rates
}

/// Optional initial-condition overrides for one node.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct InitialCondition {
    pub theta: Option<f64>,
    pub omega: Option<f64>,
    pub vm: Option<f64>,
    pub p_filt: Option<f64>,
    pub q_filt: Option<f64>,
    pub v_dc: Option<f64>,
}

/// A node's controller: family parameters plus the form to integrate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerConfig {
    pub params: NativeParams,
    pub form: ControllerForm,
}

fn agree(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0)
}

impl ControllerConfig {
    pub fn new(params: NativeParams, form: ControllerForm) -> Self {
        ControllerConfig { params, form }
    }

    pub fn family(&self) -> ControllerFamily {
        self.params.family()
    }

    pub fn equivalent(&self) -> EquivalentParams {
        map_to_equivalent(&self.params)
    }

    pub fn validate(&self) -> Result<(), ControllerError> {
        self.params.validate()
    }

    /// Node derivative for this family and form.
    pub fn derivative(&self, s: &NodeState, p: f64, q: f64) -> Result<NodeRates, ControllerError> {
        match (self.params, self.form) {
            (NativeParams::Vsm(v), ControllerForm::Full) => vsm_full_derivative(s, &v, p, q),
            (NativeParams::Vsm(_), ControllerForm::Reduced) => {
                Ok(vsm_reduced_derivative(s, &self.equivalent(), p, q))
            }
            (NativeParams::Droop(dr), ControllerForm::Full) => droop_full_derivative(s, &dr, p, q),
            (NativeParams::Droop(dr), ControllerForm::Reduced) => {
                Ok(droop_reduced_derivative(s, &dr, p, q))
            }
            (NativeParams::Matching(mt), ControllerForm::Full) => {
                matching_full_derivative(s, &mt, p, q)
            }
            (NativeParams::Matching(mt), ControllerForm::Reduced) => {
                Ok(matching_reduced_derivative(s, &mt, p, q))
            }
        }
    }

    /// Number of integrated state variables.
    pub fn state_len(&self) -> usize {
        match (self.params, self.form) {
            (NativeParams::Vsm(v), ControllerForm::Full) if v.active_power_filter => 4,
            _ => 3,
        }
    }

    /// Writes the integrated states of `s` into `out` (length [`Self::state_len`]).
    pub fn pack(&self, s: &NodeState, out: &mut [f64]) -> Result<(), ControllerError> {
        let form = "packed";
        out[0] = s.theta;
        match (self.params, self.form) {
            (_, ControllerForm::Reduced) => {
                out[1] = s.omega;
                out[2] = s.vm;
            }
            (NativeParams::Vsm(v), ControllerForm::Full) => {
                out[1] = s.omega;
                out[2] = require(s.q_filt, "q_filt", form)?;
                if v.active_power_filter {
                    out[3] = require(s.p_filt, "p_filt", form)?;
                }
            }
            (NativeParams::Droop(_), ControllerForm::Full) => {
                out[1] = require(s.p_filt, "p_filt", form)?;
                out[2] = require(s.q_filt, "q_filt", form)?;
            }
            (NativeParams::Matching(_), ControllerForm::Full) => {
                out[1] = require(s.v_dc, "v_dc", form)?;
                out[2] = require(s.q_filt, "q_filt", form)?;
            }
        }
        Ok(())
    }

    /// Same layout as [`Self::pack`], for rates.
    pub fn pack_rates(&self, r: &NodeRates, out: &mut [f64]) {
        out[0] = r.theta;
        match (self.params, self.form) {
            (_, ControllerForm::Reduced) => {
                out[1] = r.omega;
                out[2] = r.vm;
            }
            (NativeParams::Vsm(v), ControllerForm::Full) => {
                out[1] = r.omega;
                out[2] = r.q_filt.unwrap_or(0.0);
                if v.active_power_filter {
                    out[3] = r.p_filt.unwrap_or(0.0);
                }
            }
            (NativeParams::Droop(_), ControllerForm::Full) => {
                out[1] = r.p_filt.unwrap_or(0.0);
                out[2] = r.q_filt.unwrap_or(0.0);
            }
            (NativeParams::Matching(_), ControllerForm::Full) => {
                out[1] = r.v_dc.unwrap_or(0.0);
                out[2] = r.q_filt.unwrap_or(0.0);
            }
        }
    }

    /// Rebuilds a full [`NodeState`] from integrated states, evaluating the
    /// algebraic outputs.
    pub fn unpack(&self, x: &[f64]) -> NodeState {
        let vl = self.params.voltage_loop();
        match (self.params, self.form) {
            (NativeParams::Matching(mt), ControllerForm::Reduced) => NodeState {
                v_dc: Some(mt.v_dc_star + x[1] / mt.k_theta),
                ..NodeState::reduced(x[0], x[1], x[2])
            },
            (_, ControllerForm::Reduced) => NodeState::reduced(x[0], x[1], x[2]),
            (NativeParams::Vsm(v), ControllerForm::Full) => NodeState {
                theta: x[0],
                omega: x[1],
                vm: vl.vm_from_filter(x[2]),
                p_filt: v.active_power_filter.then(|| x[3]),
                q_filt: Some(x[2]),
                v_dc: None,
            },
            (NativeParams::Droop(dr), ControllerForm::Full) => NodeState {
                theta: x[0],
                omega: dr.r_p * (dr.p_star - x[1]),
                vm: vl.vm_from_filter(x[2]),
                p_filt: Some(x[1]),
                q_filt: Some(x[2]),
                v_dc: None,
            },
            (NativeParams::Matching(mt), ControllerForm::Full) => NodeState {
                theta: x[0],
                omega: mt.k_theta * (x[1] - mt.v_dc_star),
                vm: vl.vm_from_filter(x[2]),
                p_filt: None,
                q_filt: Some(x[2]),
                v_dc: Some(x[1]),
            },
        }
    }

    /// Voltage magnitude at t = 0, needed to evaluate the initial power flow.
    pub fn initial_vm(&self, init: &InitialCondition) -> f64 {
        let vl = self.params.voltage_loop();
        match (self.form, init.q_filt) {
            (ControllerForm::Full, Some(q_filt)) => vl.vm_from_filter(q_filt),
            _ => init.vm.unwrap_or(vl.vm_star),
        }
    }

    /// Consistent initial state from overrides and the instantaneous power
    /// flow `(p, q)` at t = 0.
    ///
    /// Filter states not given explicitly are chosen so that the algebraic
    /// outputs match the requested `ω` and `Vm` (zero deviation by default).
    /// The VSM active-power filter starts at the instantaneous flow.
    pub fn initial_state(
        &self,
        init: &InitialCondition,
        p: f64,
        q: f64,
    ) -> Result<NodeState, ControllerError> {
        self.validate()?;
        let vl = self.params.voltage_loop();
        let theta = init.theta.unwrap_or(0.0);
        let vm = self.initial_vm(init);
        if !(vm > 0.0) {
            return Err(ControllerError::InconsistentInitialState(format!(
                "vm must be > 0, got {vm}"
            )));
        }

        let q_filt = match self.form {
            ControllerForm::Reduced => {
                if init.q_filt.is_some() || init.p_filt.is_some() {
                    return Err(ControllerError::InconsistentInitialState(
                        "reduced forms have no filter states".into(),
                    ));
                }
                None
            }
            ControllerForm::Full => Some(match init.q_filt {
                Some(qf) => {
                    if let Some(v) = init.vm {
                        if !agree(v, vm) {
                            return Err(ControllerError::InconsistentInitialState(format!(
                                "vm = {v} disagrees with q_filt (implies vm = {vm})"
                            )));
                        }
                    }
                    qf
                }
                None if vl.r_q > 0.0 => vl.q_star - (vm - vl.vm_star) / vl.r_q,
                None => {
                    if !agree(vm, vl.vm_star) {
                        return Err(ControllerError::InconsistentInitialState(
                            "with r_q = 0 the full form pins vm to vm_star".into(),
                        ));
                    }
                    q
                }
            }),
        };

        let mut state = NodeState {
            theta,
            omega: init.omega.unwrap_or(0.0),
            vm,
            p_filt: None,
            q_filt,
            v_dc: None,
        };

        match (self.params, self.form) {
            (NativeParams::Vsm(v), form) => {
                if init.v_dc.is_some() {
                    return Err(ControllerError::InconsistentInitialState(
                        "vsm has no DC link".into(),
                    ));
                }
                if form == ControllerForm::Full && v.active_power_filter {
                    state.p_filt = Some(init.p_filt.unwrap_or(p));
                } else if init.p_filt.is_some() {
                    return Err(ControllerError::InconsistentInitialState(
                        "p_filt given but the active-power filter is disabled".into(),
                    ));
                }
            }
            (NativeParams::Droop(dr), ControllerForm::Full) => {
                let p_filt = match (init.p_filt, init.omega) {
                    (Some(pf), Some(w)) if !agree(w, dr.r_p * (dr.p_star - pf)) => {
                        return Err(ControllerError::InconsistentInitialState(format!(
                            "omega = {w} disagrees with p_filt = {pf}"
                        )));
                    }
                    (Some(pf), _) => pf,
                    (None, w) => dr.p_star - w.unwrap_or(0.0) / dr.r_p,
                };
                state.p_filt = Some(p_filt);
                state.omega = dr.r_p * (dr.p_star - p_filt);
            }
            (NativeParams::Droop(_), ControllerForm::Reduced) => {
                if init.v_dc.is_some() {
                    return Err(ControllerError::InconsistentInitialState(
                        "droop has no DC link".into(),
                    ));
                }
            }
            (NativeParams::Matching(mt), _) => {
                let v_dc = match (init.v_dc, init.omega) {
                    (Some(v), Some(w)) if !agree(w, mt.k_theta * (v - mt.v_dc_star)) => {
                        return Err(ControllerError::InconsistentInitialState(format!(
                            "omega = {w} disagrees with v_dc = {v}"
                        )));
                    }
                    (Some(v), _) => v,
                    (None, w) => mt.v_dc_star + w.unwrap_or(0.0) / mt.k_theta,
                };
                if !(v_dc > 0.0) {
                    return Err(ControllerError::DcLinkCollapse { v_dc });
                }
                state.v_dc = Some(v_dc);
                state.omega = mt.k_theta * (v_dc - mt.v_dc_star);
                if init.p_filt.is_some() {
                    return Err(ControllerError::InconsistentInitialState(
                        "matching has no active-power filter".into(),
                    ));
                }
            }
        }
        Ok(state)
    }
}
