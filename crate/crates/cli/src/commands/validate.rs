use gridform_core::simulator::Simulation;
use serde::Deserialize;

use crate::error::CliError;
use crate::report::{AnalysisReport, CompareReport, MetricsReport, ANALYSIS_KIND, COMPARE_KIND, METRICS_KIND};
use crate::schema::{enforce_keys, parse_json, read_to_string, ScenarioFile};
use crate::ValidateArgs;

#[derive(Deserialize)]
struct KindProbe {
    kind: Option<String>,
}

fn check_report<T: for<'de> Deserialize<'de>>(text: &str, args: &ValidateArgs) -> Result<T, CliError> {
    let parsed = parse_json::<T>(text)?;
    enforce_keys(&parsed.unknown_keys, args.schema.mode())?;
    Ok(parsed.value)
}

fn finite(name: &str, values: impl IntoIterator<Item = f64>) -> Result<(), CliError> {
    match values.into_iter().find(|v| !v.is_finite()) {
        Some(v) => Err(CliError::invalid(format!("{name} contains non-finite value {v}"))),
        None => Ok(()),
    }
}

pub fn run(args: &ValidateArgs) -> Result<(), CliError> {
    let text = read_to_string(&args.file)?;
    let probe: KindProbe = serde_json::from_str(&text).map_err(|e| CliError::Parse(e.to_string()))?;
    let summary = match probe.kind.as_deref() {
        None => {
            let parsed = parse_json::<ScenarioFile>(&text)?;
            let mut keys = parsed.unknown_keys;
            keys.extend(parsed.value.inapplicable_keys());
            enforce_keys(&keys, args.schema.mode())?;
            let scenario = parsed.value.to_scenario()?;
            // catches initial states that contradict the controller equations
            Simulation::new(&scenario)?.initial_state()?;
            format!(
                "valid scenario: {} nodes, {} edges, {} controllers, flow model {}",
                scenario.graph.node_count(),
                scenario.graph.lines().len(),
                scenario.controllers.len(),
                scenario.flow_model.name()
            )
        }
        Some(METRICS_KIND) => {
            let r: MetricsReport = check_report(&text, args)?;
            if r.nodes.len() != r.config.nodes {
                return Err(CliError::invalid(format!(
                    "nodes: {} entries for {} nodes",
                    r.nodes.len(),
                    r.config.nodes
                )));
            }
            finite("nodes.rocof_max", r.nodes.iter().map(|n| n.rocof_max))?;
            format!("valid metrics report: {} nodes, {} samples", r.nodes.len(), r.samples)
        }
        Some(ANALYSIS_KIND) => {
            let r: AnalysisReport = check_report(&text, args)?;
            if r.modes.len() != 2 * r.laplacian_eigenvalues.len() {
                return Err(CliError::invalid(format!(
                    "modes: {} entries for {} Laplacian eigenvalues",
                    r.modes.len(),
                    r.laplacian_eigenvalues.len()
                )));
            }
            finite("modes.eta", r.modes.iter().flat_map(|m| [m.eta.re, m.eta.im]))?;
            format!("valid analysis report: {} modes", r.modes.len())
        }
        Some(COMPARE_KIND) => {
            let r: CompareReport = check_report(&text, args)?;
            let k = r.runs.len();
            if r.pairs.len() != k * k.saturating_sub(1) / 2 {
                return Err(CliError::invalid(format!("pairs: {} entries for {k} runs", r.pairs.len())));
            }
            format!("valid compare report: {k} runs, {} pairs", r.pairs.len())
        }
        Some(other) => return Err(CliError::Schema(vec![format!("unknown report kind \"{other}\"")])),
    };
    println!("{summary}");
    Ok(())
}
