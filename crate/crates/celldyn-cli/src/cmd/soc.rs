//! `soc`: closed-loop charge tracking from a record and a fitted model.

use std::path::Path;

use serde::Serialize;

use celldyn::estimate::{soc_ekf_run, soc_summary, SocEkfConfig};
use celldyn::io::{read_params_json, read_soc_csv, read_trace_csv, write_estimates_csv, write_json};

use crate::config::RunConfig;
use crate::CliError;

#[derive(Serialize)]
struct SocReport {
    config_sha256: String,
    samples: usize,
    final_soc: f64,
    final_sigma: f64,
    skipped_updates: usize,
    clamp_events: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    rms_soc_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    max_abs_soc_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    final_soc_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    coverage_3sigma: Option<f64>,
}

fn ekf_config(cfg: &RunConfig, soc0: f64) -> Result<SocEkfConfig, CliError> {
    let r_meas = match cfg.str("soc", "r_meas") {
        "auto" => cfg.sensor()?.voltage_noise_variance(),
        text => text.parse::<f64>().map_err(|_| {
            CliError::Config(format!("soc.r_meas: expected auto or a number, got {text:?}"))
        })?,
    };
    let q_filter = cfg.f64("soc", "q_filter")?;
    let p0_filter = cfg.f64("soc", "p0_filter")?;
    let out = SocEkfConfig {
        q_proc: [cfg.f64("soc", "q_soc")?, q_filter, q_filter, q_filter],
        r_meas,
        x0: [soc0, 0.0, 0.0, 0.0],
        p0: [cfg.f64("soc", "p0_soc")?, p0_filter, p0_filter, p0_filter],
        blowup_limit: cfg.f64("soc", "blowup_limit")?,
    };
    out.validate()?;
    Ok(out)
}

pub fn run(cfg: &RunConfig, out: &Path, config_sha: &str) -> Result<(), CliError> {
    let cell = cfg.cell()?;
    let params = read_params_json(Path::new(cfg.str("soc", "params")))?;
    let trace = read_trace_csv(Path::new(cfg.str("soc", "trace")))?;
    let soc0 = cfg.f64("soc", "soc0")?;
    let ekf_cfg = ekf_config(cfg, soc0)?;

    let run = soc_ekf_run(&trace, &params, &cell, &ekf_cfg)?;
    let times: Vec<f64> = trace.samples().iter().map(|s| s.time_s).collect();
    write_estimates_csv(&out.join("soc.csv"), &times, &run.estimates)?;

    let last = run.estimates.last();
    let mut report = SocReport {
        config_sha256: config_sha.to_string(),
        samples: run.estimates.len(),
        final_soc: last.map_or(f64::NAN, |e| e.soc),
        final_sigma: last.map_or(f64::NAN, |e| e.sigma),
        skipped_updates: run.skipped_updates,
        clamp_events: run.clamp_events,
        rms_soc_error: None,
        max_abs_soc_error: None,
        final_soc_error: None,
        coverage_3sigma: None,
    };

    let truth_path = cfg.str("soc", "truth_soc");
    if !truth_path.is_empty() {
        let truth: Vec<f64> = read_soc_csv(Path::new(truth_path))?
            .into_iter()
            .map(|(_, soc)| soc)
            .collect();
        let summary = soc_summary(&run.estimates, &truth)?;
        report.rms_soc_error = Some(summary.rms_soc_error);
        report.max_abs_soc_error = Some(summary.max_abs_soc_error);
        report.final_soc_error = Some(summary.final_soc_error);
        report.coverage_3sigma = Some(summary.coverage_3sigma);
        println!(
            "soc: {} samples, final {:.4} (sigma {:.4}), rms error {:.4}",
            report.samples, report.final_soc, report.final_sigma, summary.rms_soc_error
        );
    } else {
        println!(
            "soc: {} samples, final {:.4} (sigma {:.4})",
            report.samples, report.final_soc, report.final_sigma
        );
    }
    write_json(&out.join("soc_summary.json"), &report)?;
    Ok(())
}
