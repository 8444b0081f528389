//! `simulate`: generate a profile, replay the reference cell, apply the
//! sensor, and write the record plus the exact charge series.

use std::path::Path;

use celldyn::io::{write_params_json, write_soc_csv, write_trace_csv};
use celldyn::plant::{
    apply_sensor, gen_constant_profile, gen_drive_cycle, gen_pulse_profile, plant_simulate,
    ProfileKind, ProfileSpec,
};

use crate::config::RunConfig;
use crate::CliError;

fn profile_spec(cfg: &RunConfig) -> Result<ProfileSpec, CliError> {
    let kind = match cfg.str("simulate", "profile") {
        "pulse" => ProfileKind::Pulse,
        "drive_cycle" => ProfileKind::DriveCycle,
        "constant" => ProfileKind::Constant,
        "rest" => ProfileKind::Rest,
        other => {
            return Err(CliError::Config(format!(
                "simulate.profile: unknown kind {other:?} (pulse, drive_cycle, constant, rest)"
            )))
        }
    };
    Ok(ProfileSpec {
        kind,
        rate_c: cfg.f64("simulate", "rate_c")?,
        pulse_s: cfg.f64("simulate", "pulse_s")?,
        rest_s: cfg.f64("simulate", "rest_s")?,
        soc_hi: cfg.f64("simulate", "soc_hi")?,
        soc_lo: cfg.f64("simulate", "soc_lo")?,
        duration_s: cfg.f64("simulate", "duration_s")?,
    })
}

pub fn run(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let cell = cfg.cell()?;
    let spec = profile_spec(cfg)?;
    let seed = cfg.seed()?;
    let currents = match spec.kind {
        ProfileKind::Pulse => gen_pulse_profile(&spec, &cell)?,
        ProfileKind::DriveCycle => gen_drive_cycle(&spec, &cell, seed)?,
        ProfileKind::Constant | ProfileKind::Rest => gen_constant_profile(&spec, &cell)?,
    };
    let truth = super::truth_model(cfg)?;
    let soc0 = cfg.f64("simulate", "soc0")?;
    let run = plant_simulate(&cell, &truth, soc0, &currents)?;
    let measured = match cfg.str("simulate", "sensor") {
        "noisy" => apply_sensor(&run.trace, &cfg.sensor()?, seed.wrapping_add(1))?,
        "ideal" => run.trace.clone(),
        other => {
            return Err(CliError::Config(format!(
                "simulate.sensor: expected noisy or ideal, got {other:?}"
            )))
        }
    };
    write_trace_csv(&out.join("trace.csv"), &measured)?;
    let times: Vec<f64> = measured.samples().iter().map(|s| s.time_s).collect();
    let soc: Vec<f64> = run.soc.iter().map(|s| s.0).collect();
    write_soc_csv(&out.join("truth_soc.csv"), &times, &soc)?;
    write_params_json(&out.join("truth_params.json"), &truth)?;
    println!(
        "simulate: {} samples, soc {:.3} -> {:.3}, {} clamp events",
        measured.len(),
        soc.first().unwrap(),
        soc.last().unwrap(),
        run.clamp_events
    );
    Ok(())
}
