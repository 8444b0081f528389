//! Flat `key = value` run configuration with one section per concern.
//!
//! Every key the program understands is declared in [`REGISTRY`] together
//! with its default, so a run needs only the keys it wants to change.
//! Unknown keys are rejected outright; the fully resolved table is echoed
//! into the output directory of every run.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use celldyn::cell::CellParams;
use celldyn::plant::SensorConfig;

use crate::CliError;

/// Every key, as `(section, key, default)`.
pub const REGISTRY: &[(&str, &str, &str)] = &[
    ("cell", "capacity_ah", "8"),
    ("cell", "eta_discharge", "1"),
    ("cell", "eta_charge", "0.995"),
    ("cell", "v_high", "4.2"),
    ("cell", "v_low", "3.0"),
    ("cell", "peukert_n", "1"),
    ("cell", "peukert_cp", "8"),
    ("cell", "sample_period_s", "1"),
    ("sensor", "v_noise_sigma_v", "0.001"),
    ("sensor", "i_noise_sigma_a", "0.1"),
    ("sensor", "i_bias_a", "0"),
    ("sensor", "adc_bits", "10"),
    ("sensor", "adc_fullscale_v", "5"),
    ("simulate", "profile", "pulse"),
    ("simulate", "rate_c", "1"),
    ("simulate", "pulse_s", "60"),
    ("simulate", "rest_s", "300"),
    ("simulate", "soc_hi", "0.95"),
    ("simulate", "soc_lo", "0.35"),
    ("simulate", "duration_s", "600"),
    ("simulate", "soc0", "0.95"),
    ("simulate", "truth", "relaxing"),
    ("simulate", "truth_file", ""),
    ("simulate", "sensor", "noisy"),
    ("simulate", "seed", "0"),
    ("fit", "family", "filter_state"),
    ("fit", "trace", "trace.csv"),
    ("fit", "soc0", "0.95"),
    ("fit", "init", "neutral"),
    ("fit", "init_file", ""),
    ("fit", "ekf_passes", "3"),
    ("fit", "ekf_r", "0.5"),
    ("fit", "ekf_blowup_limit", "1e6"),
    ("fit", "rbf_kernels", "25"),
    ("fit", "rbf_passes", "3"),
    ("fit", "rbf_r", "1e-4"),
    ("fit", "rbf_weights_only", "false"),
    ("fit", "rbf_width_scale", "1"),
    ("fit", "rbf_inputs", "prev_voltage,soc,current"),
    ("fit", "schedule_edges_a", "12,24"),
    ("validate", "params", "params.json"),
    ("validate", "trace", "trace.csv"),
    ("validate", "soc0", "0.95"),
    ("soc", "params", "params.json"),
    ("soc", "trace", "trace.csv"),
    ("soc", "truth_soc", ""),
    ("soc", "soc0", "1"),
    ("soc", "r_meas", "auto"),
    ("soc", "q_soc", "1e-8"),
    ("soc", "q_filter", "1e-6"),
    ("soc", "p0_soc", "0.1"),
    ("soc", "p0_filter", "1e-4"),
    ("soc", "blowup_limit", "1e6"),
    ("sweep", "kernels", "10,25,50,100"),
    ("sweep", "train", "trace.csv"),
    ("sweep", "validate", "trace.csv"),
    ("sweep", "soc0", "0.9"),
];

/// Fully resolved configuration: defaults, then file, then overrides.
#[derive(Debug, Clone)]
pub struct RunConfig {
    values: BTreeMap<(String, String), String>,
}

fn known(section: &str, key: &str) -> bool {
    REGISTRY.iter().any(|(s, k, _)| *s == section && *k == key)
}

impl RunConfig {
    pub fn resolve(
        file_text: Option<&str>,
        overrides: &[String],
        seed: Option<u64>,
    ) -> Result<Self, CliError> {
        let mut values: BTreeMap<(String, String), String> = REGISTRY
            .iter()
            .map(|(s, k, d)| ((s.to_string(), k.to_string()), d.to_string()))
            .collect();
        if let Some(text) = file_text {
            let mut section = String::new();
            for (idx, raw) in text.lines().enumerate() {
                let line = raw.trim();
                if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
                    continue;
                }
                if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                    section = name.trim().to_string();
                    continue;
                }
                let (key, value) = line.split_once('=').ok_or_else(|| {
                    CliError::Config(format!("line {}: expected key = value", idx + 1))
                })?;
                let key = key.trim();
                if section.is_empty() {
                    return Err(CliError::Config(format!(
                        "line {}: key {key:?} appears before any [section]",
                        idx + 1
                    )));
                }
                if !known(&section, key) {
                    return Err(CliError::Config(format!(
                        "unknown key {section}.{key}"
                    )));
                }
                values.insert((section.clone(), key.to_string()), value.trim().to_string());
            }
        }
        for item in overrides {
            let (path, value) = item.split_once('=').ok_or_else(|| {
                CliError::Config(format!("override {item:?}: expected section.key=value"))
            })?;
            let (section, key) = path.trim().split_once('.').ok_or_else(|| {
                CliError::Config(format!("override {item:?}: expected section.key=value"))
            })?;
            if !known(section, key) {
                return Err(CliError::Config(format!("unknown key {section}.{key}")));
            }
            values.insert(
                (section.to_string(), key.to_string()),
                value.trim().to_string(),
            );
        }
        if let Some(seed) = seed {
            values.insert(("simulate".into(), "seed".into()), seed.to_string());
        }
        Ok(RunConfig { values })
    }

    fn raw(&self, section: &str, key: &str) -> &str {
        self.values
            .get(&(section.to_string(), key.to_string()))
            .expect("every known key is resolved")
    }

    pub fn str(&self, section: &str, key: &str) -> &str {
        self.raw(section, key)
    }

    pub fn f64(&self, section: &str, key: &str) -> Result<f64, CliError> {
        self.raw(section, key).parse().map_err(|_| {
            CliError::Config(format!(
                "{section}.{key}: expected a number, got {:?}",
                self.raw(section, key)
            ))
        })
    }

    pub fn u64(&self, section: &str, key: &str) -> Result<u64, CliError> {
        self.raw(section, key).parse().map_err(|_| {
            CliError::Config(format!(
                "{section}.{key}: expected an integer, got {:?}",
                self.raw(section, key)
            ))
        })
    }

    pub fn usize(&self, section: &str, key: &str) -> Result<usize, CliError> {
        self.raw(section, key).parse().map_err(|_| {
            CliError::Config(format!(
                "{section}.{key}: expected a count, got {:?}",
                self.raw(section, key)
            ))
        })
    }

    pub fn bool(&self, section: &str, key: &str) -> Result<bool, CliError> {
        match self.raw(section, key) {
            "true" => Ok(true),
            "false" => Ok(false),
            other => Err(CliError::Config(format!(
                "{section}.{key}: expected true or false, got {other:?}"
            ))),
        }
    }

    pub fn f64_list(&self, section: &str, key: &str) -> Result<Vec<f64>, CliError> {
        self.raw(section, key)
            .split(',')
            .map(|p| {
                p.trim().parse().map_err(|_| {
                    CliError::Config(format!(
                        "{section}.{key}: expected comma-separated numbers, got {:?}",
                        self.raw(section, key)
                    ))
                })
            })
            .collect()
    }

    pub fn usize_list(&self, section: &str, key: &str) -> Result<Vec<usize>, CliError> {
        self.raw(section, key)
            .split(',')
            .map(|p| {
                p.trim().parse().map_err(|_| {
                    CliError::Config(format!(
                        "{section}.{key}: expected comma-separated counts, got {:?}",
                        self.raw(section, key)
                    ))
                })
            })
            .collect()
    }

    pub fn cell(&self) -> Result<CellParams, CliError> {
        let cell = CellParams {
            capacity_ah: self.f64("cell", "capacity_ah")?,
            eta_discharge: self.f64("cell", "eta_discharge")?,
            eta_charge: self.f64("cell", "eta_charge")?,
            v_high: self.f64("cell", "v_high")?,
            v_low: self.f64("cell", "v_low")?,
            peukert_n: self.f64("cell", "peukert_n")?,
            peukert_cp: self.f64("cell", "peukert_cp")?,
            sample_period_h: self.f64("cell", "sample_period_s")? / 3600.0,
        };
        cell.validate()?;
        Ok(cell)
    }

    pub fn sensor(&self) -> Result<SensorConfig, CliError> {
        let sensor = SensorConfig {
            v_noise_sigma_v: self.f64("sensor", "v_noise_sigma_v")?,
            i_noise_sigma_a: self.f64("sensor", "i_noise_sigma_a")?,
            i_bias_a: self.f64("sensor", "i_bias_a")?,
            adc_bits: self.u64("sensor", "adc_bits")? as u32,
            adc_fullscale_v: self.f64("sensor", "adc_fullscale_v")?,
        };
        sensor.validate()?;
        Ok(sensor)
    }

    pub fn seed(&self) -> Result<u64, CliError> {
        self.u64("simulate", "seed")
    }

    /// The canonical text form: sorted sections, sorted keys.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let mut current = "";
        for ((section, key), value) in &self.values {
            if section != current {
                if !out.is_empty() {
                    out.push('\n');
                }
                let _ = writeln!(out, "[{section}]");
                current = section;
            }
            let _ = writeln!(out, "{key} = {value}");
        }
        out
    }

    /// Writes the resolved table into the run directory and returns its
    /// digest, which reports embed for provenance.
    pub fn echo(&self, out_dir: &Path) -> Result<String, CliError> {
        let path = out_dir.join("config.resolved.cfg");
        std::fs::write(&path, self.render())
            .map_err(|e| CliError::Lib(celldyn::Error::Io {
                path: path.display().to_string(),
                source: e,
            }))?;
        Ok(celldyn::io::sha256_file(&path)?)
    }
}
