//! `sweep-kernels`: retrain the kernel network at several sizes and score
//! each one on a held-out record.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use serde::Serialize;

use celldyn::ident::train_rbf;
use celldyn::io::{read_trace_csv, write_json, write_params_json};
use celldyn::models::{simulate, ModelParams, SimInit};
use celldyn::{CellParams, Trace};

use crate::config::RunConfig;
use crate::CliError;

#[derive(Serialize)]
struct SweepRow {
    n_kernels: usize,
    train_rms_mv: f64,
    rms_mv: f64,
}

#[derive(Serialize)]
struct SweepReport {
    config_sha256: String,
    train_samples: usize,
    validate_samples: usize,
    rows: Vec<SweepRow>,
}

fn score_one(
    cfg: &RunConfig,
    cell: &CellParams,
    train: &Trace,
    validate: &Trace,
    soc0: f64,
    n: usize,
) -> Result<(ModelParams, SweepRow), CliError> {
    let fit = train_rbf(train, cell, soc0, &super::fit::rbf_config(cfg, n)?)?;
    let params = ModelParams::Rbf(fit.params);
    let predicted = simulate(&params, validate, cell, &SimInit::at_soc(soc0))?;
    let mut acc = 0.0;
    for (s, p) in validate.samples().iter().zip(&predicted) {
        let r = s.voltage_v - p;
        acc += r * r;
    }
    let rms_mv = (acc / predicted.len().max(1) as f64).sqrt() * 1e3;
    let row = SweepRow {
        n_kernels: n,
        train_rms_mv: fit.train_rms_v * 1e3,
        rms_mv,
    };
    Ok((params, row))
}

pub fn run(cfg: &RunConfig, out: &Path, config_sha: &str) -> Result<(), CliError> {
    let cell = cfg.cell()?;
    let sizes = cfg.usize_list("sweep", "kernels")?;
    if sizes.is_empty() {
        return Err(CliError::Config("sweep.kernels: need at least one size".into()));
    }
    let train = read_trace_csv(Path::new(cfg.str("sweep", "train")))?;
    let validate = read_trace_csv(Path::new(cfg.str("sweep", "validate")))?;
    let soc0 = cfg.f64("sweep", "soc0")?;

    // Sizes are independent, so fan them out; results come back in list order.
    let (cell_ref, train_ref, validate_ref) = (&cell, &train, &validate);
    let results: Vec<Result<(ModelParams, SweepRow), CliError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = sizes
            .iter()
            .map(|&n| {
                scope.spawn(move || score_one(cfg, cell_ref, train_ref, validate_ref, soc0, n))
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });

    let mut rows = Vec::with_capacity(sizes.len());
    for result in results {
        let (params, row) = result?;
        write_params_json(&out.join(format!("params_n{}.json", row.n_kernels)), &params)?;
        rows.push(row);
    }

    let csv_path = out.join("sweep.csv");
    let mut text = String::from("n_kernels,rms_mv\n");
    for row in &rows {
        text.push_str(&format!("{},{}\n", row.n_kernels, row.rms_mv));
    }
    let mut f = fs::File::create(&csv_path).map_err(|e| super::io_err(&csv_path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| super::io_err(&csv_path, e))?;

    for row in &rows {
        println!("sweep: n={:<4} validation rms {:.4} mV", row.n_kernels, row.rms_mv);
    }
    write_json(
        &out.join("sweep_report.json"),
        &SweepReport {
            config_sha256: config_sha.to_string(),
            train_samples: train.len(),
            validate_samples: validate.len(),
            rows,
        },
    )?;
    Ok(())
}
