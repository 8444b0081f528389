pub mod fit;
pub mod simulate;
pub mod soc;
pub mod sweep;
pub mod validate;

use std::path::Path;

use celldyn::models::{ModelParams, RbfInput};
use celldyn::plant::{truth_fast, truth_relaxing, truth_scheduled, truth_static};

use crate::config::RunConfig;
use crate::CliError;

/// Resolves a truth selector to a parameter set.
pub fn truth_model(cfg: &RunConfig) -> Result<ModelParams, CliError> {
    let cell = cfg.cell()?;
    match cfg.str("simulate", "truth") {
        "relaxing" => Ok(ModelParams::FilterState(truth_relaxing())),
        "fast" => Ok(ModelParams::FilterState(truth_fast())),
        "static" => Ok(ModelParams::Combined(truth_static())),
        "scheduled" => Ok(ModelParams::Scheduled(truth_scheduled(&cell))),
        "file" => {
            let path = cfg.str("simulate", "truth_file");
            if path.is_empty() {
                return Err(CliError::Config(
                    "simulate.truth = file needs simulate.truth_file".into(),
                ));
            }
            Ok(celldyn::io::read_params_json(Path::new(path))?)
        }
        other => Err(CliError::Config(format!(
            "simulate.truth: unknown selector {other:?} (relaxing, fast, static, scheduled, file)"
        ))),
    }
}

/// Wraps a raw io failure with the path it happened on.
pub fn io_err(path: &Path, source: std::io::Error) -> CliError {
    CliError::Lib(celldyn::Error::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Parses the network input layout from its comma-separated names.
pub fn rbf_layout(cfg: &RunConfig) -> Result<Vec<RbfInput>, CliError> {
    cfg.str("fit", "rbf_inputs")
        .split(',')
        .map(|name| match name.trim() {
            "prev_voltage" => Ok(RbfInput::PrevVoltage),
            "soc" => Ok(RbfInput::Soc),
            "current" => Ok(RbfInput::Current),
            "prev_current" => Ok(RbfInput::PrevCurrent),
            other => Err(CliError::Config(format!(
                "fit.rbf_inputs: unknown input {other:?}"
            ))),
        })
        .collect()
}
