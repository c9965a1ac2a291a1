use gridform_core::simulator::{compute_metrics, run_scenario, Metrics, SimError, Trajectory};

use crate::commands::Loaded;
use crate::error::CliError;
use crate::output::{resolve, trajectory_csv, write_atomic, write_json};
use crate::report::{EffectiveConfig, MetricsReport, NodeMetrics, METRICS_KIND};
use crate::CommonArgs;

pub fn metrics_of(traj: &Trajectory, band: f64) -> Result<Metrics, CliError> {
    compute_metrics(traj, band).map_err(|e| match e {
        SimError::TooShort { len, needed } => CliError::invalid(format!(
            "simulation records {len} samples, metrics need at least {needed}; lower simulation.decimate or raise simulation.t_end"
        )),
        e => e.into(),
    })
}

pub fn metrics_report(config: EffectiveConfig, traj: &Trajectory, m: &Metrics) -> MetricsReport {
    MetricsReport {
        kind: METRICS_KIND.to_string(),
        config,
        samples: traj.len(),
        t_final: *traj.times.last().unwrap_or(&0.0),
        rocof_max: m.rocof_max.iter().copied().fold(0.0, f64::max),
        omega_avg_final: m.omega_avg_final,
        theta_avg_ramp_rate: m.theta_avg_ramp_rate,
        nodes: (0..m.rocof_max.len())
            .map(|node| NodeMetrics {
                node,
                rocof_max: m.rocof_max[node],
                omega_overshoot: m.omega_overshoot[node],
                settling_time: m.settling_time[node],
            })
            .collect(),
    }
}

/// Flat `key = value` summary.
pub fn metrics_text(r: &MetricsReport) -> String {
    let mut lines = vec![
        format!("scenario = {}", r.config.scenario),
        format!("flow_model = {}", r.config.flow_model),
        format!("dt = {}", r.config.dt),
        format!("t_end = {}", r.config.t_end),
        format!("samples = {}", r.samples),
        format!("rocof_max = {}", r.rocof_max),
        format!("omega_avg_final = {}", r.omega_avg_final),
        format!("theta_avg_ramp_rate = {}", r.theta_avg_ramp_rate),
    ];
    for n in &r.nodes {
        lines.push(format!("node{}.rocof_max = {}", n.node, n.rocof_max));
        lines.push(format!("node{}.omega_overshoot = {}", n.node, n.omega_overshoot));
        let settle = n.settling_time.map(|t| t.to_string()).unwrap_or_else(|| "none".into());
        lines.push(format!("node{}.settling_time = {settle}", n.node));
    }
    lines.join("\n") + "\n"
}

pub fn run(args: &CommonArgs) -> Result<(), CliError> {
    let loaded = Loaded::from_args(args)?;
    let traj = run_scenario(&loaded.scenario)?;
    let metrics = metrics_of(&traj, loaded.file.settling_band())?;
    let report = metrics_report(loaded.config, &traj, &metrics);

    let outputs = &loaded.file.outputs;
    let csv_path = resolve(&loaded.out, outputs.trajectory.as_deref(), "trajectory.csv");
    let json_path = resolve(&loaded.out, outputs.metrics.as_deref(), "metrics.json");
    write_atomic(&csv_path, &trajectory_csv(&traj)?)?;
    write_json(&json_path, &report)?;

    print!("{}", metrics_text(&report));
    eprintln!("wrote {} and {}", csv_path.display(), json_path.display());
    Ok(())
}
