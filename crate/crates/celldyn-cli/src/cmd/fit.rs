//! `fit`: dispatch one model family's identification over a record.

use std::path::Path;

use serde::Serialize;

use celldyn::ident::{
    ekf_identify, fit_combined, fit_scheduled, train_rbf, RbfTrainConfig, ScheduleFitConfig,
    WeightEkfConfig,
};
use celldyn::io::{read_params_json, read_trace_csv, sha256_file, write_json, write_params_json};
use celldyn::models::{FilterStateParams, ModelParams};

use crate::config::RunConfig;
use crate::CliError;

/// Structured fit summary written next to the parameter file.
#[derive(Serialize)]
struct FitReport {
    family: String,
    config_sha256: String,
    trace_sha256: String,
    samples: usize,
    /// Final residual or innovation rms, volts.
    residual_rms_v: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pass_rms_v: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    condition: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    rows_used: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    rows_excluded: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    covariance_diag: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    stable: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pole_radius: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    bin_innovation_rms_v: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    bin_sample_counts: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    n_kernels: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    weights_only: Option<bool>,
}

impl FitReport {
    fn new(family: &str, config_sha256: &str, trace_sha256: &str, samples: usize) -> Self {
        FitReport {
            family: family.to_string(),
            config_sha256: config_sha256.to_string(),
            trace_sha256: trace_sha256.to_string(),
            samples,
            residual_rms_v: 0.0,
            pass_rms_v: None,
            condition: None,
            rows_used: None,
            rows_excluded: None,
            covariance_diag: None,
            stable: None,
            pole_radius: None,
            bin_innovation_rms_v: None,
            bin_sample_counts: None,
            n_kernels: None,
            weights_only: None,
        }
    }
}

/// A plausible resting start for weight identification: slow stable poles,
/// a mid-range open-circuit curve, everything rate-dependent at zero.
fn neutral_init() -> FilterStateParams {
    FilterStateParams::from_weights([
        0.0, 0.9, 0.0, 0.9, 0.05, 3.6, 0.0, -0.1, 0.5, 0.6, 0.0, 0.0,
    ])
}

fn initial_weights(cfg: &RunConfig) -> Result<FilterStateParams, CliError> {
    match cfg.str("fit", "init") {
        "neutral" => Ok(neutral_init()),
        "file" => {
            let path = cfg.str("fit", "init_file");
            if path.is_empty() {
                return Err(CliError::Config("fit.init = file needs fit.init_file".into()));
            }
            match read_params_json(Path::new(path))? {
                ModelParams::FilterState(w) => Ok(w),
                _ => Err(CliError::Config(format!(
                    "fit.init_file {path:?} does not hold a filter_state parameter set"
                ))),
            }
        }
        other => Err(CliError::Config(format!(
            "fit.init: expected neutral or file, got {other:?}"
        ))),
    }
}

fn ekf_config(cfg: &RunConfig) -> Result<WeightEkfConfig, CliError> {
    let out = WeightEkfConfig {
        passes: cfg.usize("fit", "ekf_passes")?,
        meas_noise_r: cfg.f64("fit", "ekf_r")?,
        blowup_limit: cfg.f64("fit", "ekf_blowup_limit")?,
        ..WeightEkfConfig::default()
    };
    out.validate()?;
    Ok(out)
}

pub fn rbf_config(cfg: &RunConfig, n_kernels: usize) -> Result<RbfTrainConfig, CliError> {
    let out = RbfTrainConfig {
        n_kernels,
        input_layout: super::rbf_layout(cfg)?,
        passes: cfg.usize("fit", "rbf_passes")?,
        meas_noise_r: cfg.f64("fit", "rbf_r")?,
        width_scale: cfg.f64("fit", "rbf_width_scale")?,
        weights_only: cfg.bool("fit", "rbf_weights_only")?,
        ..RbfTrainConfig::default()
    };
    out.validate()?;
    Ok(out)
}

pub fn run(cfg: &RunConfig, out: &Path, config_sha: &str) -> Result<(), CliError> {
    let cell = cfg.cell()?;
    let trace_path = Path::new(cfg.str("fit", "trace"));
    let trace = read_trace_csv(trace_path)?;
    let trace_sha = sha256_file(trace_path)?;
    let soc0 = cfg.f64("fit", "soc0")?;
    let family = cfg.str("fit", "family");
    let mut report = FitReport::new(family, config_sha, &trace_sha, trace.len());
    let params = match family {
        "combined" => {
            let fit = fit_combined(&trace, &cell, soc0)?;
            report.residual_rms_v = fit.residual_rms_v;
            report.condition = Some(fit.condition);
            report.rows_used = Some(fit.rows_used);
            report.rows_excluded = Some(fit.rows_excluded);
            ModelParams::Combined(fit.params)
        }
        "filter_state" => {
            let fit = ekf_identify(&trace, &cell, soc0, &initial_weights(cfg)?, &ekf_config(cfg)?)?;
            report.residual_rms_v = fit.innovation_rms_v;
            report.pass_rms_v = Some(fit.pass_rms_v.clone());
            report.covariance_diag = Some(fit.covariance.diagonal().iter().cloned().collect());
            report.stable = Some(fit.params.is_stable());
            report.pole_radius = Some(fit.params.pole_radius());
            ModelParams::FilterState(fit.params)
        }
        "rbf" => {
            let n = cfg.usize("fit", "rbf_kernels")?;
            let fit = train_rbf(&trace, &cell, soc0, &rbf_config(cfg, n)?)?;
            report.residual_rms_v = fit.train_rms_v;
            report.pass_rms_v = Some(fit.pass_rms_v.clone());
            report.n_kernels = Some(n);
            report.weights_only = Some(cfg.bool("fit", "rbf_weights_only")?);
            ModelParams::Rbf(fit.params)
        }
        "scheduled" => {
            let mut edges = cfg.f64_list("fit", "schedule_edges_a")?;
            edges.push(f64::INFINITY);
            let sched_cfg = ScheduleFitConfig {
                edges,
                ekf: ekf_config(cfg)?,
            };
            let fit = fit_scheduled(&trace, &cell, soc0, &initial_weights(cfg)?, &sched_cfg)?;
            let worst = fit
                .bin_innovation_rms_v
                .iter()
                .cloned()
                .fold(0.0f64, f64::max);
            report.residual_rms_v = worst;
            report.bin_innovation_rms_v = Some(fit.bin_innovation_rms_v.clone());
            report.bin_sample_counts = Some(fit.bin_sample_counts.clone());
            ModelParams::Scheduled(fit.params)
        }
        other => {
            return Err(CliError::Config(format!(
                "fit.family: unknown family {other:?} (combined, filter_state, rbf, scheduled)"
            )))
        }
    };
    write_params_json(&out.join("params.json"), &params)?;
    write_json(&out.join("fit_report.json"), &report)?;
    println!(
        "fit: {family} on {} samples, residual rms {:.3} mV",
        trace.len(),
        report.residual_rms_v * 1e3
    );
    Ok(())
}
