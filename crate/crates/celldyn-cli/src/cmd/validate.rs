//! `validate`: replay a fitted model over a record and score the residuals.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use serde::Serialize;

use celldyn::io::{read_params_json, read_trace_csv, sha256_file, write_json};
use celldyn::metrics::{metrics_report, MetricsReport};
use celldyn::models::{simulate, SimInit};

use crate::config::RunConfig;
use crate::CliError;

#[derive(Serialize)]
struct ValidateReport {
    config_sha256: String,
    #[serde(flatten)]
    metrics: MetricsReport,
}

fn write_columns(path: &Path, header: &str, rows: &[Vec<f64>]) -> Result<(), CliError> {
    let mut text = String::with_capacity(rows.len() * 24 + header.len() + 1);
    text.push_str(header);
    text.push('\n');
    for row in rows {
        let mut first = true;
        for v in row {
            if !first {
                text.push(',');
            }
            text.push_str(&format!("{v}"));
            first = false;
        }
        text.push('\n');
    }
    let mut f = fs::File::create(path).map_err(|e| super::io_err(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| super::io_err(path, e))?;
    Ok(())
}

pub fn run(cfg: &RunConfig, out: &Path, config_sha: &str) -> Result<(), CliError> {
    let cell = cfg.cell()?;
    let params_path = Path::new(cfg.str("validate", "params"));
    let params = read_params_json(params_path)?;
    let param_sha = sha256_file(params_path)?;
    let trace = read_trace_csv(Path::new(cfg.str("validate", "trace")))?;
    let soc0 = cfg.f64("validate", "soc0")?;

    let predicted = simulate(&params, &trace, &cell, &SimInit::at_soc(soc0))?;
    let metrics = metrics_report(&trace, &predicted, &cell, params.family(), &param_sha)?;

    let overlay: Vec<Vec<f64>> = trace
        .samples()
        .iter()
        .zip(&predicted)
        .map(|(s, p)| vec![s.time_s, s.voltage_v, *p])
        .collect();
    let residuals: Vec<Vec<f64>> = trace
        .samples()
        .iter()
        .zip(&predicted)
        .map(|(s, p)| vec![s.time_s, s.voltage_v - p])
        .collect();
    write_columns(&out.join("overlay.csv"), "time_s,v_true,v_pred", &overlay)?;
    write_columns(&out.join("residuals.csv"), "time_s,residual_v", &residuals)?;
    println!(
        "validate: {} over {} samples, rms {:.3} mV, worst {:.3} mV",
        metrics.family, metrics.samples, metrics.rms_mv, metrics.max_abs_mv
    );
    write_json(
        &out.join("metrics.json"),
        &ValidateReport {
            config_sha256: config_sha.to_string(),
            metrics,
        },
    )?;
    Ok(())
}
