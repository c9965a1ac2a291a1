use rayon::prelude::*;
use serde::Serialize;

use gridform_core::controllers::{ControllerConfig, NativeParams};
use gridform_core::network::build_laplacian;
use gridform_core::simulator::{run_scenario, Scenario};
use gridform_core::spectral::{common_tuning, tuning_report, DampingRegime};

use crate::commands::simulate::metrics_of;
use crate::commands::{spectral_error, Loaded};
use crate::error::CliError;
use crate::output::{resolve, write_atomic};
use crate::SweepArgs;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    D,
    M,
    KTheta,
    KDc,
    Rp,
    TauF,
}

impl SweepParam {
    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "d" => Some(Self::D),
            "m" => Some(Self::M),
            "k_theta" => Some(Self::KTheta),
            "k_dc" => Some(Self::KDc),
            "r_p" => Some(Self::Rp),
            "tau_f" => Some(Self::TauF),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::D => "d",
            Self::M => "m",
            Self::KTheta => "K_theta",
            Self::KDc => "K_dc",
            Self::Rp => "R_p",
            Self::TauF => "tau_f",
        }
    }

    /// `config` with the parameter set, or `None` if its family lacks it.
    pub fn apply(self, config: &ControllerConfig, value: f64) -> Option<ControllerConfig> {
        let mut params = config.params;
        match (self, &mut params) {
            (Self::D, NativeParams::Vsm(v)) => v.d = value,
            (Self::M, NativeParams::Vsm(v)) => v.m = value,
            (Self::KTheta, NativeParams::Matching(p)) => p.k_theta = value,
            (Self::KDc, NativeParams::Matching(p)) => p.k_dc = value,
            (Self::Rp, NativeParams::Droop(p)) => p.r_p = value,
            (Self::TauF, NativeParams::Vsm(v)) => v.tau_f = value,
            (Self::TauF, NativeParams::Droop(p)) => p.tau_f = value,
            (Self::TauF, NativeParams::Matching(p)) => p.tau_f = value,
            _ => return None,
        }
        Some(ControllerConfig::new(params, config.form))
    }
}

/// Parses `start:stop:count` into evenly spaced values, both ends included.
pub fn parse_range(s: &str) -> Result<Vec<f64>, CliError> {
    let bad = || CliError::invalid(format!("--range must be start:stop:count, got \"{s}\""));
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(bad());
    }
    let start: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let stop: f64 = parts[1].trim().parse().map_err(|_| bad())?;
    let count: usize = parts[2].trim().parse().map_err(|_| bad())?;
    Ok(match count {
        0 => Vec::new(),
        1 => vec![start],
        _ => (0..count)
            .map(|i| start + (stop - start) * i as f64 / (count - 1) as f64)
            .collect(),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub param: &'static str,
    pub value: f64,
    pub m: f64,
    pub d: f64,
    pub eta2_re: Option<f64>,
    pub eta2_im: Option<f64>,
    pub damping: Option<&'static str>,
    /// `true`, `boundary` or `false`.
    pub oscillatory: Option<&'static str>,
    pub d_crit: Option<f64>,
    pub rocof_max: Option<f64>,
    pub settling_time: Option<f64>,
    pub status: String,
}

fn point(base: &Scenario, param: SweepParam, value: f64, band: f64) -> Result<SweepRow, CliError> {
    let controllers = base
        .controllers
        .iter()
        .enumerate()
        .map(|(k, c)| {
            param.apply(c, value).ok_or_else(|| {
                CliError::invalid(format!(
                    "sweep parameter {} does not apply to controllers[{k}] ({})",
                    param.name(),
                    c.family()
                ))
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let sc = Scenario {
        controllers,
        ..base.clone()
    };
    let errs = sc.validate();
    if !errs.is_empty() {
        return Err(CliError::Validation(
            errs.into_iter().map(|e| format!("{} = {value}: {e}", param.name())).collect(),
        ));
    }

    let eq = sc.controllers[0].equivalent();
    let mut row = SweepRow {
        param: param.name(),
        value,
        m: eq.m,
        d: eq.d,
        eta2_re: None,
        eta2_im: None,
        damping: None,
        oscillatory: None,
        d_crit: None,
        rocof_max: None,
        settling_time: None,
        status: "ok".into(),
    };
    if let Ok(common) = common_tuning(&sc.controllers) {
        let lap = build_laplacian(&sc.graph).map_err(|e| CliError::invalid(e.to_string()))?;
        let t = tuning_report(&lap, common.m, common.d).map_err(spectral_error)?;
        row.eta2_re = Some(t.eta2.re);
        row.eta2_im = Some(t.eta2.im);
        row.damping = Some(t.damping.name());
        row.oscillatory = Some(match t.damping {
            DampingRegime::Oscillatory => "true",
            DampingRegime::Critical => "boundary",
            DampingRegime::Overdamped => "false",
        });
        row.d_crit = Some(t.d_crit);
    }
    match run_scenario(&sc) {
        Ok(traj) => {
            let m = metrics_of(&traj, band)?;
            row.rocof_max = Some(m.rocof_max.iter().copied().fold(0.0, f64::max));
            row.settling_time = m
                .settling_time
                .iter()
                .try_fold(0.0f64, |acc, s| s.map(|s| acc.max(s)));
        }
        Err(e) if e.is_runtime() => row.status = e.to_string(),
        Err(e) => return Err(e.into()),
    }
    Ok(row)
}

pub fn sweep_csv(rows: &[SweepRow]) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| CliError::Output(e.to_string()))?;
    }
    w.into_inner().map_err(|e| CliError::Output(e.to_string()))
}

pub fn run(args: &SweepArgs) -> Result<(), CliError> {
    let loaded = Loaded::from_args(&args.common)?;
    let spec = loaded.file.sweep.clone().unwrap_or_default();
    let name = args
        .param
        .clone()
        .or(spec.param)
        .ok_or_else(|| CliError::invalid("sweep: --param (or sweep.param) is required"))?;
    let param = SweepParam::parse(&name).ok_or_else(|| {
        CliError::invalid(format!(
            "sweep: unknown parameter \"{name}\" (expected d, m, K_theta, K_dc, R_p or tau_f)"
        ))
    })?;
    let values = match (&args.values, &args.range) {
        (Some(v), _) => v.clone(),
        (None, Some(r)) => parse_range(r)?,
        (None, None) => spec.values.unwrap_or_default(),
    };
    if values.is_empty() {
        return Err(CliError::invalid("sweep: the value range is empty"));
    }
    let band = loaded.file.settling_band();

    // inapplicable parameters are input errors, so check them before simulating
    for (k, c) in loaded.scenario.controllers.iter().enumerate() {
        if param.apply(c, values[0]).is_none() {
            return Err(CliError::invalid(format!(
                "sweep parameter {} does not apply to controllers[{k}] ({})",
                param.name(),
                c.family()
            )));
        }
    }
    let rows = values
        .par_iter()
        .map(|&v| point(&loaded.scenario, param, v, band))
        .collect::<Result<Vec<_>, _>>()?;

    let path = resolve(&loaded.out, loaded.file.outputs.sweep.as_deref(), "sweep.csv");
    let bytes = sweep_csv(&rows)?;
    write_atomic(&path, &bytes)?;
    print!("{}", String::from_utf8_lossy(&bytes));
    eprintln!("wrote {}", path.display());

    let failed: Vec<String> = rows
        .iter()
        .filter(|r| r.status != "ok")
        .map(|r| format!("{} = {}: {}", r.param, r.value, r.status))
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Runtime(failed.join("; ")))
    }
}
