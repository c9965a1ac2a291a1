//! Scenario file schema and its conversion into core types.

use std::fmt;
use std::path::Path;

use serde::de::{self, MapAccess, SeqAccess, Visitor};
use serde::{Deserialize, Deserializer, Serialize};

use gridform_core::controllers::{
    ControllerConfig, ControllerFamily, ControllerForm, DroopParams, EquivalentParams,
    InitialCondition, MatchingParams, NativeParams, VsmParams,
};
use gridform_core::network::{Line, NetworkGraph, DEFAULT_OMEGA0};
use gridform_core::simulator::{Disturbance, FlowModel, Scenario, DEFAULT_DT, DEFAULT_T_END};

use crate::error::CliError;

pub const DEFAULT_SETTLING_BAND: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchemaMode {
    Strict,
    Lenient,
}

impl SchemaMode {
    pub fn name(self) -> &'static str {
        match self {
            SchemaMode::Strict => "strict",
            SchemaMode::Lenient => "lenient",
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
pub struct ScenarioFile {
    pub network: NetworkSpec,
    pub controllers: ControllersSpec,
    #[serde(default)]
    pub simulation: SimulationSpec,
    #[serde(default)]
    pub disturbances: Vec<DisturbanceSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub initial_state: Vec<InitialStateSpec>,
    #[serde(default)]
    pub outputs: OutputsSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub compare: Option<CompareSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
}

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
pub struct NetworkSpec {
    pub nodes: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega0: Option<f64>,
    #[serde(default)]
    pub edges: Vec<EdgeSpec>,
}

#[derive(Debug, Clone, Copy, Deserialize, Serialize)]
pub struct EdgeSpec {
    pub from: usize,
    pub to: usize,
    pub b: f64,
    #[serde(default)]
    pub g: f64,
}

/// One controller; which fields apply depends on `family`.
#[derive(Debug, Clone, Default, PartialEq, Deserialize, Serialize)]
pub struct ControllerSpec {
    pub family: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub form: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub active_power_filter: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_dc: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v_dc_star: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_theta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_dc: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub i_dc_star: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_star: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_f: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_q: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_star: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vm_star: Option<f64>,
}

/// Either one entry per node or `{"uniform": {...}}` applied to every node.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum ControllersSpec {
    PerNode(Vec<ControllerSpec>),
    Uniform { uniform: ControllerSpec },
}

impl Default for ControllersSpec {
    fn default() -> Self {
        ControllersSpec::PerNode(Vec::new())
    }
}

// Hand-written so that unknown keys inside entries stay visible to the
// ignored-key tracker, which buffered untagged enums would hide.
impl<'de> Deserialize<'de> for ControllersSpec {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct SpecVisitor;

        impl<'de> Visitor<'de> for SpecVisitor {
            type Value = ControllersSpec;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("an array of controllers or {\"uniform\": controller}")
            }

            fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> Result<Self::Value, A::Error> {
                let mut out = Vec::new();
                while let Some(c) = seq.next_element()? {
                    out.push(c);
                }
                Ok(ControllersSpec::PerNode(out))
            }

            fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> Result<Self::Value, A::Error> {
                let mut uniform = None;
                while let Some(key) = map.next_key::<String>()? {
                    if key != "uniform" {
                        return Err(de::Error::unknown_field(&key, &["uniform"]));
                    }
                    if uniform.is_some() {
                        return Err(de::Error::duplicate_field("uniform"));
                    }
                    uniform = Some(map.next_value()?);
                }
                uniform
                    .map(|uniform| ControllersSpec::Uniform { uniform })
                    .ok_or_else(|| de::Error::missing_field("uniform"))
            }
        }

        deserializer.deserialize_any(SpecVisitor)
    }
}

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
pub struct SimulationSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_end: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flow_model: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decimate: Option<usize>,
    /// Relative band for settling time.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub settling_band: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize, Serialize)]
pub struct DisturbanceSpec {
    #[serde(default)]
    pub t_start: f64,
    pub node: usize,
    pub delta_p: f64,
}

#[derive(Debug, Clone, Copy, Default, Deserialize, Serialize)]
pub struct InitialStateSpec {
    pub theta: Option<f64>,
    pub omega: Option<f64>,
    pub vm: Option<f64>,
    pub p_filt: Option<f64>,
    pub q_filt: Option<f64>,
    pub v_dc: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
pub struct OutputsSpec {
    pub trajectory: Option<String>,
    pub metrics: Option<String>,
    pub compare: Option<String>,
    pub analysis: Option<String>,
    pub sweep: Option<String>,
}

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
pub struct CompareSpec {
    /// Target equivalent parameters; taken from the controllers when absent.
    pub equivalent: Option<EquivalentSpec>,
    pub families: Option<Vec<String>>,
    pub tol: Option<f64>,
    pub matching: Option<MatchingFixedSpec>,
    pub vsm_active_filter: Option<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize, Serialize)]
pub struct EquivalentSpec {
    pub m: f64,
    pub d: f64,
    #[serde(default = "default_tau_f")]
    pub tau_f: f64,
    #[serde(default)]
    pub r_q: f64,
    #[serde(default)]
    pub p_star: f64,
    #[serde(default)]
    pub q_star: f64,
    #[serde(default = "one")]
    pub vm_star: f64,
}

fn default_tau_f() -> f64 {
    0.1
}

fn one() -> f64 {
    1.0
}

impl From<EquivalentSpec> for EquivalentParams {
    fn from(s: EquivalentSpec) -> Self {
        EquivalentParams {
            m: s.m,
            d: s.d,
            p_star: s.p_star,
            q_star: s.q_star,
            vm_star: s.vm_star,
            tau_f: s.tau_f,
            r_q: s.r_q,
        }
    }
}

impl From<EquivalentParams> for EquivalentSpec {
    fn from(e: EquivalentParams) -> Self {
        EquivalentSpec {
            m: e.m,
            d: e.d,
            tau_f: e.tau_f,
            r_q: e.r_q,
            p_star: e.p_star,
            q_star: e.q_star,
            vm_star: e.vm_star,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, Deserialize, Serialize)]
pub struct MatchingFixedSpec {
    pub c_dc: Option<f64>,
    pub v_dc_star: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
pub struct SweepSpec {
    pub param: Option<String>,
    pub values: Option<Vec<f64>>,
}

/// Renders a key path as `controllers[1].tau_p`.
fn render_path(path: &serde_ignored::Path) -> String {
    use serde_ignored::Path as P;
    match path {
        P::Root => String::new(),
        P::Seq { parent, index } => format!("{}[{index}]", render_path(parent)),
        P::Map { parent, key } => {
            let head = render_path(parent);
            if head.is_empty() {
                key.clone()
            } else {
                format!("{head}.{key}")
            }
        }
        P::Some { parent } | P::NewtypeStruct { parent } | P::NewtypeVariant { parent } => {
            render_path(parent)
        }
    }
}

/// Parsed document plus the keys the schema did not recognize.
#[derive(Debug, Clone)]
pub struct Parsed<T> {
    pub value: T,
    pub unknown_keys: Vec<String>,
}

pub fn parse_json<T: for<'de> Deserialize<'de>>(text: &str) -> Result<Parsed<T>, CliError> {
    let mut unknown_keys = Vec::new();
    let mut de = serde_json::Deserializer::from_str(text);
    let value: T = serde_ignored::deserialize(&mut de, |path| unknown_keys.push(render_path(&path)))
        .map_err(|e| {
            if e.is_syntax() || e.is_eof() {
                CliError::Parse(e.to_string())
            } else {
                CliError::Schema(vec![e.to_string()])
            }
        })?;
    de.end().map_err(|e| CliError::Parse(e.to_string()))?;
    Ok(Parsed { value, unknown_keys })
}

/// Applies the strict/lenient policy to unknown or inapplicable keys.
pub fn enforce_keys(keys: &[String], mode: SchemaMode) -> Result<(), CliError> {
    if keys.is_empty() {
        return Ok(());
    }
    match mode {
        SchemaMode::Strict => Err(CliError::Schema(
            keys.iter()
                .map(|k| format!("unknown key `{k}` (use --lenient to ignore)"))
                .collect(),
        )),
        SchemaMode::Lenient => {
            for k in keys {
                eprintln!("warning: ignoring unknown key `{k}`");
            }
            Ok(())
        }
    }
}

pub fn read_to_string(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))
}

pub fn load_scenario_file(path: &Path, mode: SchemaMode) -> Result<ScenarioFile, CliError> {
    let text = read_to_string(path)?;
    let parsed: Parsed<ScenarioFile> = parse_json(&text)?;
    let mut keys = parsed.unknown_keys;
    keys.extend(parsed.value.inapplicable_keys());
    enforce_keys(&keys, mode)?;
    Ok(parsed.value)
}

pub fn parse_family(s: &str) -> Option<ControllerFamily> {
    match s {
        "vsm" => Some(ControllerFamily::Vsm),
        "droop" => Some(ControllerFamily::Droop),
        "matching" => Some(ControllerFamily::Matching),
        _ => None,
    }
}

pub fn parse_form(s: &str) -> Option<ControllerForm> {
    match s {
        "full" => Some(ControllerForm::Full),
        "reduced" => Some(ControllerForm::Reduced),
        _ => None,
    }
}

pub fn parse_flow_model(s: &str) -> Option<FlowModel> {
    match s {
        "dc-linear" => Some(FlowModel::DcLinear),
        "ac-standard" => Some(FlowModel::AcStandard),
        "ac-literal" => Some(FlowModel::AcLiteral),
        _ => None,
    }
}

impl ControllerSpec {
    /// Names of set fields that the entry's family does not use.
    fn inapplicable(&self) -> Vec<&'static str> {
        let set: [(&'static str, bool); 11] = [
            ("m", self.m.is_some()),
            ("d", self.d.is_some()),
            ("active_power_filter", self.active_power_filter.is_some()),
            ("r_p", self.r_p.is_some()),
            ("c_dc", self.c_dc.is_some()),
            ("v_dc_star", self.v_dc_star.is_some()),
            ("k_theta", self.k_theta.is_some()),
            ("k_dc", self.k_dc.is_some()),
            ("i_dc_star", self.i_dc_star.is_some()),
            ("p_star", self.p_star.is_some()),
            ("tau_f", self.tau_f.is_some()),
        ];
        let allowed: &[&str] = match parse_family(&self.family) {
            Some(ControllerFamily::Vsm) => &["m", "d", "active_power_filter", "p_star", "tau_f"],
            Some(ControllerFamily::Droop) => &["r_p", "p_star", "tau_f"],
            Some(ControllerFamily::Matching) => &["c_dc", "v_dc_star", "k_theta", "k_dc", "i_dc_star", "tau_f"],
            None => return Vec::new(),
        };
        set.iter()
            .filter(|(name, present)| *present && !allowed.contains(name))
            .map(|(name, _)| *name)
            .collect()
    }

    /// Core controller; errors name fields relative to `at`.
    pub fn to_config(&self, at: &str) -> Result<ControllerConfig, Vec<String>> {
        let mut errs = Vec::new();
        let family = parse_family(&self.family);
        if family.is_none() {
            errs.push(format!(
                "{at}.family must be one of vsm, droop, matching, got \"{}\"",
                self.family
            ));
        }
        let form = match self.form.as_deref() {
            None => Some(ControllerForm::Full),
            Some(f) => parse_form(f),
        };
        if form.is_none() {
            errs.push(format!(
                "{at}.form must be full or reduced, got \"{}\"",
                self.form.as_deref().unwrap_or_default()
            ));
        }
        let mut need = |name: &str, v: Option<f64>| -> f64 {
            v.unwrap_or_else(|| {
                errs.push(format!("{at}.{name} is required for {}", self.family));
                f64::NAN
            })
        };
        let params = match family {
            Some(ControllerFamily::Vsm) => {
                let base = VsmParams::new(need("m", self.m), need("d", self.d));
                Some(NativeParams::Vsm(VsmParams {
                    tau_f: self.tau_f.unwrap_or(base.tau_f),
                    r_q: self.r_q.unwrap_or(base.r_q),
                    p_star: self.p_star.unwrap_or(base.p_star),
                    q_star: self.q_star.unwrap_or(base.q_star),
                    vm_star: self.vm_star.unwrap_or(base.vm_star),
                    active_power_filter: self.active_power_filter.unwrap_or(false),
                    ..base
                }))
            }
            Some(ControllerFamily::Droop) => {
                let base = DroopParams::new(need("r_p", self.r_p), need("tau_f", self.tau_f));
                Some(NativeParams::Droop(DroopParams {
                    r_q: self.r_q.unwrap_or(base.r_q),
                    p_star: self.p_star.unwrap_or(base.p_star),
                    q_star: self.q_star.unwrap_or(base.q_star),
                    vm_star: self.vm_star.unwrap_or(base.vm_star),
                    ..base
                }))
            }
            Some(ControllerFamily::Matching) => {
                let base = MatchingParams::new(
                    need("c_dc", self.c_dc),
                    need("k_theta", self.k_theta),
                    need("k_dc", self.k_dc),
                );
                Some(NativeParams::Matching(MatchingParams {
                    v_dc_star: self.v_dc_star.unwrap_or(base.v_dc_star),
                    i_dc_star: self.i_dc_star.unwrap_or(base.i_dc_star),
                    tau_f: self.tau_f.unwrap_or(base.tau_f),
                    r_q: self.r_q.unwrap_or(base.r_q),
                    q_star: self.q_star.unwrap_or(base.q_star),
                    vm_star: self.vm_star.unwrap_or(base.vm_star),
                    ..base
                }))
            }
            None => None,
        };
        match (params, form) {
            (Some(params), Some(form)) if errs.is_empty() => Ok(ControllerConfig::new(params, form)),
            _ => Err(errs),
        }
    }

    /// Schema entry reproducing `config`.
    pub fn from_config(config: &ControllerConfig) -> Self {
        let form = Some(config.form.to_string());
        match config.params {
            NativeParams::Vsm(v) => ControllerSpec {
                family: "vsm".into(),
                form,
                m: Some(v.m),
                d: Some(v.d),
                active_power_filter: Some(v.active_power_filter),
                p_star: Some(v.p_star),
                tau_f: Some(v.tau_f),
                r_q: Some(v.r_q),
                q_star: Some(v.q_star),
                vm_star: Some(v.vm_star),
                ..Default::default()
            },
            NativeParams::Droop(p) => ControllerSpec {
                family: "droop".into(),
                form,
                r_p: Some(p.r_p),
                p_star: Some(p.p_star),
                tau_f: Some(p.tau_f),
                r_q: Some(p.r_q),
                q_star: Some(p.q_star),
                vm_star: Some(p.vm_star),
                ..Default::default()
            },
            NativeParams::Matching(p) => ControllerSpec {
                family: "matching".into(),
                form,
                c_dc: Some(p.c_dc),
                v_dc_star: Some(p.v_dc_star),
                k_theta: Some(p.k_theta),
                k_dc: Some(p.k_dc),
                i_dc_star: Some(p.i_dc_star),
                tau_f: Some(p.tau_f),
                r_q: Some(p.r_q),
                q_star: Some(p.q_star),
                vm_star: Some(p.vm_star),
                ..Default::default()
            },
        }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub dt: Option<f64>,
    pub t_end: Option<f64>,
    pub decimate: Option<usize>,
    pub flow_model: Option<String>,
}

impl Overrides {
    /// `name=value` for every override given, in a fixed order.
    pub fn describe(&self) -> Vec<String> {
        let mut out = Vec::new();
        if let Some(v) = self.dt {
            out.push(format!("dt={v}"));
        }
        if let Some(v) = self.t_end {
            out.push(format!("t_end={v}"));
        }
        if let Some(v) = self.decimate {
            out.push(format!("decimate={v}"));
        }
        if let Some(v) = &self.flow_model {
            out.push(format!("flow_model={v}"));
        }
        out
    }
}

impl ScenarioFile {
    fn controller_entries(&self) -> Vec<(String, &ControllerSpec)> {
        match &self.controllers {
            ControllersSpec::PerNode(list) => list
                .iter()
                .enumerate()
                .map(|(k, c)| (format!("controllers[{k}]"), c))
                .collect(),
            ControllersSpec::Uniform { uniform } => (0..self.network.nodes)
                .map(|_| ("controllers.uniform".to_string(), uniform))
                .collect(),
        }
    }

    /// Controller fields set on a family that does not use them.
    pub fn inapplicable_keys(&self) -> Vec<String> {
        let entries: Vec<(String, &ControllerSpec)> = match &self.controllers {
            ControllersSpec::PerNode(_) => self.controller_entries(),
            ControllersSpec::Uniform { uniform } => vec![("controllers.uniform".into(), uniform)],
        };
        entries
            .iter()
            .flat_map(|(at, c)| c.inapplicable().into_iter().map(move |f| format!("{at}.{f}")))
            .collect()
    }

    pub fn apply(&mut self, o: &Overrides) {
        if o.dt.is_some() {
            self.simulation.dt = o.dt;
        }
        if o.t_end.is_some() {
            self.simulation.t_end = o.t_end;
        }
        if o.decimate.is_some() {
            self.simulation.decimate = o.decimate;
        }
        if o.flow_model.is_some() {
            self.simulation.flow_model = o.flow_model.clone();
        }
    }

    pub fn settling_band(&self) -> f64 {
        self.simulation.settling_band.unwrap_or(DEFAULT_SETTLING_BAND)
    }

    /// Core scenario, or every validation failure with the field it concerns.
    pub fn to_scenario(&self) -> Result<Scenario, CliError> {
        let mut errs = Vec::new();
        let omega0 = self.network.omega0.unwrap_or(DEFAULT_OMEGA0);
        if !(omega0 > 0.0 && omega0.is_finite()) {
            errs.push(format!("network.omega0 must be > 0, got {omega0}"));
        }
        let lines = self
            .network
            .edges
            .iter()
            .map(|e| Line {
                from: e.from,
                to: e.to,
                g: e.g,
                b: e.b,
            })
            .collect();
        let graph = NetworkGraph::new_unchecked(self.network.nodes, lines, omega0);

        let mut controllers = Vec::new();
        for (at, spec) in self.controller_entries() {
            match spec.to_config(&at) {
                Ok(c) => controllers.push(c),
                Err(e) => errs.extend(e),
            }
        }
        if let Some(b) = self.simulation.settling_band {
            if !(b > 0.0 && b < 1.0) {
                errs.push(format!("simulation.settling_band must be in (0, 1), got {b}"));
            }
        }
        let flow_model = match self.simulation.flow_model.as_deref() {
            None => FlowModel::default(),
            Some(s) => parse_flow_model(s).unwrap_or_else(|| {
                errs.push(format!(
                    "simulation.flow_model must be one of dc-linear, ac-standard, ac-literal, got \"{s}\""
                ));
                FlowModel::default()
            }),
        };
        if !errs.is_empty() {
            return Err(CliError::Validation(errs));
        }

        let scenario = Scenario {
            flow_model,
            disturbances: self
                .disturbances
                .iter()
                .map(|d| Disturbance {
                    t_start: d.t_start,
                    node: d.node,
                    delta_p: d.delta_p,
                })
                .collect(),
            t_end: self.simulation.t_end.unwrap_or(DEFAULT_T_END),
            dt: self.simulation.dt.unwrap_or(DEFAULT_DT),
            decimate: self.simulation.decimate.unwrap_or(1),
            initial_state: self
                .initial_state
                .iter()
                .map(|s| InitialCondition {
                    theta: s.theta,
                    omega: s.omega,
                    vm: s.vm,
                    p_filt: s.p_filt,
                    q_filt: s.q_filt,
                    v_dc: s.v_dc,
                })
                .collect(),
            ..Scenario::new(graph, controllers)
        };
        let errs = scenario.validate();
        if !errs.is_empty() {
            return Err(CliError::Validation(errs));
        }
        Ok(scenario)
    }
}
