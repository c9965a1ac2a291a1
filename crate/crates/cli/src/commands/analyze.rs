use gridform_core::network::build_laplacian;
use gridform_core::spectral::{
    assemble_larger_laplacian, common_tuning, laplacian_spectrum, closed_form_modes,
    predict_disturbance_steady_state, tuning_from_modes, verify_modes, voltage_mode_spectrum,
};

use crate::commands::{spectral_error, Loaded};
use crate::error::CliError;
use crate::output::{resolve, write_json};
use crate::report::{
    AnalysisReport, ModeEntry, SteadyStateEntry, Verification, ANALYSIS_KIND,
};
use crate::schema::EquivalentSpec;
use crate::CommonArgs;

/// Singularity threshold for each reported mode.
pub const VERIFY_TOL: f64 = 1e-9;

pub fn analysis_report(loaded: &Loaded) -> Result<AnalysisReport, CliError> {
    let sc = &loaded.scenario;
    let eq = common_tuning(&sc.controllers).map_err(spectral_error)?;
    let lap = build_laplacian(&sc.graph).map_err(|e| CliError::invalid(e.to_string()))?;
    let lambdas = laplacian_spectrum(&lap).map_err(spectral_error)?;
    let modes = closed_form_modes(&lambdas, eq.m, eq.d).map_err(spectral_error)?;
    let larger = assemble_larger_laplacian(&lap, eq.m, eq.d).map_err(spectral_error)?;
    let check = verify_modes(&larger, &modes, VERIFY_TOL).map_err(spectral_error)?;
    let tuning = tuning_from_modes(&modes);
    let voltage_modes = voltage_mode_spectrum(&lap, eq.r_q, eq.tau_f).map_err(spectral_error)?;

    let steady_state = if sc.disturbances.is_empty() {
        None
    } else {
        let mut p_d = vec![0.0; sc.graph.node_count()];
        for d in &sc.disturbances {
            p_d[d.node] -= d.delta_p;
        }
        let ss = predict_disturbance_steady_state(&lap, eq.d, &p_d).map_err(spectral_error)?;
        Some(SteadyStateEntry {
            p_d,
            omega: ss.omega,
            theta_offsets: ss.theta_offsets,
            theta_avg_slope: ss.theta_avg_slope,
        })
    };

    Ok(AnalysisReport {
        kind: ANALYSIS_KIND.to_string(),
        config: loaded.config.clone(),
        tuning: EquivalentSpec::from(eq),
        conductance_ignored: !sc.graph.is_lossless(),
        laplacian_eigenvalues: modes.lambdas.clone(),
        lambda2: tuning.lambda2,
        lambda_max: tuning.lambda_max,
        modes: modes
            .modes
            .iter()
            .zip(&check.residuals)
            .map(|(md, r)| ModeEntry {
                eta: md.eta.into(),
                lambda: md.lambda,
                lambda_index: md.lambda_index,
                class: md.class.name().to_string(),
                repeated: md.repeated,
                pivot_residual: r.pivot_residual,
                quadratic_residual: r.quadratic_residual,
            })
            .collect(),
        eta2: tuning.eta2.into(),
        damping: tuning.damping.name().to_string(),
        oscillatory: tuning.oscillatory(),
        d_crit: tuning.d_crit,
        rocof_per_unit_step: tuning.rocof_per_unit_step,
        voltage_modes,
        verification: Verification {
            tol: check.tol,
            max_pivot_residual: check.max_pivot_residual(),
            max_quadratic_residual: check.max_quadratic_residual(),
            passed: check.passed(),
        },
        steady_state,
    })
}

pub fn analysis_text(r: &AnalysisReport) -> String {
    let t = &r.tuning;
    let mut out = format!(
        "tuning: m = {}, d = {}, tau_f = {}, R_q = {}\n\
         lambda2 = {:.6}, lambda_max = {:.6}, d_crit = {:.6}, damping = {}\n\
         eta2 = {:.6} {:+.6}i\n\n",
        t.m, t.d, t.tau_f, t.r_q, r.lambda2, r.lambda_max, r.d_crit, r.damping, r.eta2.re, r.eta2.im
    );
    out += &format!(
        "{:>3}  {:>12}  {:>13}  {:>13}  {:<14}  {:>9}  {:>9}\n",
        "#", "lambda", "eta.re", "eta.im", "class", "pivot", "quadratic"
    );
    for (i, m) in r.modes.iter().enumerate() {
        let class = if m.repeated { format!("{} (x2)", m.class) } else { m.class.clone() };
        out += &format!(
            "{i:>3}  {:>12.6}  {:>13.6}  {:>13.6}  {class:<14}  {:>9.1e}  {:>9.1e}\n",
            m.lambda, m.eta.re, m.eta.im, m.pivot_residual, m.quadratic_residual
        );
    }
    let v: Vec<String> = r.voltage_modes.iter().map(|x| format!("{x:.6}")).collect();
    out += &format!("\nvoltage modes: {}\n", v.join(", "));
    out += &format!(
        "verification: max pivot residual {:.2e} (tol {:.0e}) {}\n",
        r.verification.max_pivot_residual,
        r.verification.tol,
        if r.verification.passed { "ok" } else { "FAILED" }
    );
    if let Some(ss) = &r.steady_state {
        let offs: Vec<String> = ss.theta_offsets.iter().map(|x| format!("{x:.6}")).collect();
        out += &format!(
            "steady state: omega = {:.6e}, theta offsets = [{}]\n",
            ss.omega,
            offs.join(", ")
        );
    }
    out
}

pub fn run(args: &CommonArgs) -> Result<(), CliError> {
    let loaded = Loaded::from_args(args)?;
    let report = analysis_report(&loaded)?;
    if report.conductance_ignored {
        eprintln!("warning: line conductances are ignored by the linearized analysis");
    }
    let path = resolve(&loaded.out, loaded.file.outputs.analysis.as_deref(), "analysis.json");
    write_json(&path, &report)?;
    print!("{}", analysis_text(&report));
    eprintln!("wrote {}", path.display());
    if !report.verification.passed {
        return Err(CliError::Runtime(format!(
            "mode verification failed: max pivot residual {:e} exceeds {:e}",
            report.verification.max_pivot_residual, report.verification.tol
        )));
    }
    Ok(())
}
