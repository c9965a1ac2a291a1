use gridform_core::controllers::{
    invert_equivalent, ControllerConfig, ControllerFamily, ControllerForm, EquivalentParams,
    FixedNative, NativeParams,
};
use gridform_core::simulator::{compare_trajectories, run_scenario, Component, Scenario};
use gridform_core::spectral::common_tuning;

use crate::commands::{spectral_error, Loaded};
use crate::error::CliError;
use crate::output::{resolve, write_json};
use crate::report::{CompareReport, ComponentEntry, PairEntry, RunEntry, COMPARE_KIND};
use crate::schema::{parse_family, parse_form, ControllerSpec, EquivalentSpec};
use crate::CompareArgs;

pub const DEFAULT_TOL: f64 = 1e-10;

/// A `family[:form]` label.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Variant {
    pub family: ControllerFamily,
    pub form: ControllerForm,
}

impl Variant {
    pub fn parse(s: &str) -> Result<Self, CliError> {
        let (fam, form) = match s.split_once(':') {
            Some((f, form)) => (f, Some(form)),
            None => (s, None),
        };
        let family = parse_family(fam.trim()).ok_or_else(|| {
            CliError::invalid(format!("families: unknown family \"{fam}\" (expected vsm, droop or matching)"))
        })?;
        let form = match form {
            None => ControllerForm::Reduced,
            Some(f) => parse_form(f.trim())
                .ok_or_else(|| CliError::invalid(format!("families: unknown form \"{f}\" (expected full or reduced)")))?,
        };
        Ok(Variant { family, form })
    }

    pub fn label(&self) -> String {
        format!("{}:{}", self.family, self.form)
    }
}

/// Values for the parameters that the equivalent map leaves free.
fn fixed_for(loaded: &Loaded, family: ControllerFamily) -> FixedNative {
    let spec = loaded.file.compare.as_ref();
    match family {
        ControllerFamily::Matching => {
            let declared = spec.and_then(|c| c.matching);
            // fall back to the scenario's own DC link if it has one
            let existing = loaded.scenario.controllers.iter().find_map(|c| match c.params {
                NativeParams::Matching(p) => Some(p),
                _ => None,
            });
            FixedNative {
                c_dc: declared.and_then(|m| m.c_dc).or(existing.map(|p| p.c_dc)),
                v_dc_star: declared.and_then(|m| m.v_dc_star).or(existing.map(|p| p.v_dc_star)),
                active_power_filter: false,
            }
        }
        ControllerFamily::Vsm => FixedNative {
            active_power_filter: spec.and_then(|c| c.vsm_active_filter).unwrap_or(false),
            ..Default::default()
        },
        ControllerFamily::Droop => FixedNative::default(),
    }
}

pub fn target_equivalent(loaded: &Loaded) -> Result<EquivalentParams, CliError> {
    match loaded.file.compare.as_ref().and_then(|c| c.equivalent) {
        Some(e) => Ok(e.into()),
        None => common_tuning(&loaded.scenario.controllers).map_err(spectral_error),
    }
}

pub fn run(args: &CompareArgs) -> Result<(), CliError> {
    let loaded = Loaded::from_args(&args.common)?;
    let spec = loaded.file.compare.clone().unwrap_or_default();
    let names: Vec<String> = args
        .families
        .clone()
        .or(spec.families)
        .unwrap_or_default()
        .into_iter()
        .filter(|s| !s.trim().is_empty())
        .collect();
    if names.is_empty() {
        return Err(CliError::invalid(
            "families: at least one family is required (--families or compare.families)",
        ));
    }
    let variants = names.iter().map(|s| Variant::parse(s)).collect::<Result<Vec<_>, _>>()?;
    let tol = args.tol.or(spec.tol).unwrap_or(DEFAULT_TOL);
    if !(tol >= 0.0) {
        return Err(CliError::invalid(format!("tol must be >= 0, got {tol}")));
    }
    let target = target_equivalent(&loaded)?;

    let mut runs = Vec::new();
    let mut configs = Vec::new();
    for v in &variants {
        let native = invert_equivalent(&target, v.family, &fixed_for(&loaded, v.family))
            .map_err(|e| CliError::invalid(format!("{} cannot realize the target: {e}", v.label())))?;
        let config = ControllerConfig::new(native, v.form);
        runs.push(RunEntry {
            label: v.label(),
            controller: ControllerSpec::from_config(&config),
        });
        configs.push(config);
    }

    let n = loaded.scenario.graph.node_count();
    let mut trajectories = Vec::new();
    for config in &configs {
        let sc = Scenario {
            controllers: vec![*config; n],
            ..loaded.scenario.clone()
        };
        trajectories.push(run_scenario(&sc)?);
    }

    let mut pairs = Vec::new();
    for i in 0..variants.len() {
        for j in (i + 1)..variants.len() {
            let r = compare_trajectories(&trajectories[i], &trajectories[j], &Component::ALL, tol)?;
            pairs.push(PairEntry {
                a: runs[i].label.clone(),
                b: runs[j].label.clone(),
                max_deviation: r.max_deviation,
                components: r
                    .components
                    .iter()
                    .map(|c| ComponentEntry {
                        component: c.component.name().to_string(),
                        max_abs: c.max_abs,
                    })
                    .collect(),
                passed: r.passed,
            });
        }
    }
    let report = CompareReport {
        kind: COMPARE_KIND.to_string(),
        passed: pairs.iter().all(|p| p.passed),
        config: loaded.config,
        tol,
        equivalent: EquivalentSpec::from(target),
        runs,
        pairs,
    };
    let path = resolve(&loaded.out, loaded.file.outputs.compare.as_deref(), "compare.json");
    write_json(&path, &report)?;
    print!("{}", compare_text(&report));
    eprintln!("wrote {}", path.display());
    Ok(())
}

pub fn compare_text(r: &CompareReport) -> String {
    let e = &r.equivalent;
    let mut out = format!(
        "equivalent: M = {}, D = {}, tau_f = {}, R_q = {}\n",
        e.m, e.d, e.tau_f, e.r_q
    );
    for run in &r.runs {
        out += &format!("run {}\n", run.label);
    }
    let width = r
        .pairs
        .iter()
        .map(|p| p.a.len() + p.b.len() + 4)
        .max()
        .unwrap_or(4)
        .max(4);
    out += &format!("{:<width$}  {:>12}  result (tol {:e})\n", "pair", "max_dev", r.tol);
    for p in &r.pairs {
        let name = format!("{} vs {}", p.a, p.b);
        let verdict = if p.passed { "PASS" } else { "FAIL" };
        out += &format!("{name:<width$}  {:>12.4e}  {verdict}\n", p.max_deviation);
    }
    out
}
