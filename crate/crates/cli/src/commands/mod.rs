pub mod analyze;
pub mod compare;
pub mod simulate;
pub mod sweep;
pub mod validate;

use std::path::PathBuf;

use gridform_core::simulator::Scenario;
use gridform_core::spectral::SpectralError;

use crate::error::CliError;
use crate::report::EffectiveConfig;
use crate::schema::{load_scenario_file, ScenarioFile};
use crate::CommonArgs;

/// A scenario loaded with command-line overrides applied.
pub struct Loaded {
    pub file: ScenarioFile,
    pub scenario: Scenario,
    pub config: EffectiveConfig,
    pub out: PathBuf,
}

impl Loaded {
    pub fn from_args(args: &CommonArgs) -> Result<Self, CliError> {
        let mode = args.schema.mode();
        let mut file = load_scenario_file(&args.scenario, mode)?;
        let overrides = args.overrides();
        file.apply(&overrides);
        let scenario = file.to_scenario()?;
        let config = EffectiveConfig::new(
            &args.scenario.display().to_string(),
            mode,
            overrides.describe(),
            &scenario,
            file.settling_band(),
        );
        Ok(Loaded {
            file,
            scenario,
            config,
            out: args.out.clone(),
        })
    }
}

pub fn spectral_error(e: SpectralError) -> CliError {
    match e {
        SpectralError::NotConverged { .. } | SpectralError::ModeResidual { .. } => CliError::Runtime(e.to_string()),
        e => CliError::invalid(e.to_string()),
    }
}
