// Temporary tuning probe, removed before release.

use celldyn::cell::CellParams;
use celldyn::ident::{train_rbf, train_rbf_from, RbfTrainConfig};
use celldyn::models::{rbf_output, simulate, ModelParams, RbfInput, RbfParams, SimInit};
use celldyn::plant::{
    apply_sensor, gen_drive_cycle, plant_simulate, truth_fast, ProfileSpec, SensorConfig,
};
use celldyn::trace::{Sample, Trace};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

fn one_kernel_truth() -> RbfParams {
    RbfParams {
        n_kernels: 1,
        centers: vec![vec![0.3]],
        widths: vec![0.6],
        weights: vec![-0.4, 3.8],
        input_layout: vec![RbfInput::Current],
        input_norm: vec![(-10.0, 10.0)],
    }
}

fn current_only_trace(truth: &RbfParams, n: usize, seed: u64) -> Trace {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let samples = (0..n)
        .map(|k| {
            let i = rng.gen_range(-10.0..10.0);
            Sample { time_s: k as f64, current_a: i, voltage_v: rbf_output(truth, &[i]).unwrap(), temp_c: None }
        })
        .collect();
    Trace::new(samples).unwrap()
}

#[test]
fn probe_single_kernel_perturbed_seed() {
    let cell = CellParams::default();
    let truth = one_kernel_truth();
    let trace = current_only_trace(&truth, 800, 5);
    for passes in [5usize, 15, 30] {
        let cfg = RbfTrainConfig {
            n_kernels: 1,
            input_layout: vec![RbfInput::Current],
            passes,
            ..RbfTrainConfig::default()
        };
        let mut seed = truth.clone();
        seed.centers[0][0] += 0.15;
        seed.widths[0] *= 1.3;
        seed.weights[0] = -0.1;
        seed.weights[1] = 3.6;
        let fit = train_rbf_from(&trace, &cell, 0.6, &cfg, seed).unwrap();
        println!(
            "passes={passes:>3} rms={:<12.3e} w={:+.4} t={:+.4} s={:.4} b={:.4}",
            fit.train_rms_v,
            fit.params.weights[0],
            fit.params.centers[0][0],
            fit.params.widths[0],
            fit.params.weights[1],
        );
    }
}

fn oracle_rms(fit: &RbfParams, cell: &CellParams, measured: &Trace, clean_v: &[f64], soc0: f64) -> f64 {
    let predicted =
        simulate(&ModelParams::Rbf(fit.clone()), measured, cell, &SimInit::at_soc(soc0)).unwrap();
    (predicted
        .iter()
        .zip(clean_v)
        .map(|(p, m)| (p - m) * (p - m))
        .sum::<f64>()
        / predicted.len() as f64)
        .sqrt()
}

#[test]
fn probe_sweep_trend_and_seeds() {
    let cell = CellParams::default();
    let truth = ModelParams::FilterState(truth_fast());
    let spec = ProfileSpec::drive_cycle();
    let layout4 = vec![RbfInput::PrevVoltage, RbfInput::Soc, RbfInput::Current, RbfInput::PrevCurrent];
    for profile_seed in [404u64, 505, 606] {
        let currents = gen_drive_cycle(&spec, &cell, profile_seed).unwrap();
        let run = plant_simulate(&cell, &truth, spec.soc_hi, &currents).unwrap();
        let measured = apply_sensor(&run.trace, &SensorConfig::default(), profile_seed).unwrap();
        let clean_v: Vec<f64> = run.trace.voltages().collect();
        let mut line = format!("seed={profile_seed}:");
        for n in [10usize, 25, 50, 100] {
            let cfg = RbfTrainConfig {
                n_kernels: n,
                input_layout: layout4.clone(),
                passes: 6,
                meas_noise_r: 1e-5,
                width_scale: 1.4,
                weights_only: true,
                ..RbfTrainConfig::default()
            };
            let fit = train_rbf(&measured, &cell, spec.soc_hi, &cfg).unwrap();
            let rms = oracle_rms(&fit.params, &cell, &measured, &clean_v, spec.soc_hi);
            line.push_str(&format!("  rms({n})={rms:.3e}"));
        }
        println!("{line}");
    }
}

#[test]
fn probe_two_stage() {
    let cell = CellParams::default();
    let truth = ModelParams::FilterState(truth_fast());
    let spec = ProfileSpec::drive_cycle();
    let currents = gen_drive_cycle(&spec, &cell, 404).unwrap();
    let run = plant_simulate(&cell, &truth, spec.soc_hi, &currents).unwrap();
    let measured = apply_sensor(&run.trace, &SensorConfig::default(), 404).unwrap();
    let clean_v: Vec<f64> = run.trace.voltages().collect();
    let layout4 = vec![RbfInput::PrevVoltage, RbfInput::Soc, RbfInput::Current, RbfInput::PrevCurrent];
    let wo_cfg = RbfTrainConfig {
        n_kernels: 100,
        input_layout: layout4.clone(),
        passes: 6,
        meas_noise_r: 1e-5,
        width_scale: 1.4,
        weights_only: true,
        ..RbfTrainConfig::default()
    };
    let stage1 = train_rbf(&measured, &cell, spec.soc_hi, &wo_cfg).unwrap();
    println!(
        "stage1 wo: train={:.3e} oracle_fb={:.3e}",
        stage1.train_rms_v,
        oracle_rms(&stage1.params, &cell, &measured, &clean_v, spec.soc_hi)
    );
    for (p0c, p0s, passes, r) in [
        (1e-2, 1e-2, 2, 1e-4),
        (1e-2, 1e-2, 4, 1e-4),
        (1e-1, 3e-2, 4, 1e-4),
        (1e-3, 1e-3, 4, 1e-4),
    ] {
        let cfg = RbfTrainConfig {
            n_kernels: 100,
            input_layout: layout4.clone(),
            passes,
            meas_noise_r: r,
            p0_centers: p0c,
            p0_widths: p0s,
            width_scale: 1.4,
            weights_only: false,
            ..RbfTrainConfig::default()
        };
        let fit = train_rbf_from(&measured, &cell, spec.soc_hi, &cfg, stage1.params.clone()).unwrap();
        let rms = oracle_rms(&fit.params, &cell, &measured, &clean_v, spec.soc_hi);
        println!(
            "stage2 p0c={p0c:>6.0e} p0s={p0s:>6.0e} passes={passes} r={r:>6.0e} train={:<10.3e} oracle_fb={rms:.3e}",
            fit.train_rms_v
        );
    }
}

#[test]
fn probe_sweep_floor() {
    let cell = CellParams::default();
    let truth = ModelParams::FilterState(truth_fast());
    let spec = ProfileSpec::drive_cycle();
    let currents = gen_drive_cycle(&spec, &cell, 404).unwrap();
    let run = plant_simulate(&cell, &truth, spec.soc_hi, &currents).unwrap();
    let measured = apply_sensor(&run.trace, &SensorConfig::default(), 404).unwrap();
    let clean_v: Vec<f64> = run.trace.voltages().collect();
    let layout4 = vec![RbfInput::PrevVoltage, RbfInput::Soc, RbfInput::Current, RbfInput::PrevCurrent];
    println!("dataset {} samples, floor 1.41e-3", run.trace.len());
    for (n, wo, ws, passes, r) in [
        (100usize, true, 1.0, 6, 1e-4),
        (100, true, 0.7, 6, 1e-4),
        (100, true, 1.4, 6, 1e-4),
        (100, true, 2.0, 6, 1e-4),
        (100, true, 1.4, 12, 1e-4),
        (100, true, 1.4, 6, 1e-5),
        (100, true, 2.0, 6, 1e-5),
        (100, true, 2.0, 12, 1e-5),
        (100, false, 1.0, 6, 1e-4),
        (100, false, 1.4, 6, 1e-4),
    ] {
        let cfg = RbfTrainConfig {
            n_kernels: n,
            input_layout: layout4.clone(),
            passes,
            meas_noise_r: r,
            width_scale: ws,
            weights_only: wo,
            ..RbfTrainConfig::default()
        };
        let fit = train_rbf(&measured, &cell, spec.soc_hi, &cfg).unwrap();
        let rms = oracle_rms(&fit.params, &cell, &measured, &clean_v, spec.soc_hi);
        println!(
            "n={n:>4} wo={wo:<5} ws={ws:<4} passes={passes:>2} r={r:>6.0e} train={:<10.3e} oracle_fb={:<10.3e}",
            fit.train_rms_v, rms
        );
    }
}

#[test]
#[ignore]
fn probe_soc_coverage() {
    use celldyn::estimate::{soc_ekf_run, soc_summary, SocEkfConfig};
    use celldyn::plant::{gen_pulse_profile, plant_simulate, truth_relaxing, ProfileSpec};

    let cell = CellParams::default();
    let spec = ProfileSpec::pulses(1.0);
    let mut currents = gen_pulse_profile(&spec, &cell).unwrap();
    currents.truncate(6000);
    let truth = truth_relaxing();
    let model = celldyn::models::ModelParams::FilterState(truth.clone());
    let run = plant_simulate(&cell, &model, 0.9, &currents).unwrap();
    let sensor = celldyn::plant::SensorConfig::default();
    let r = sensor.voltage_noise_variance();
    for (qs, qf, rmul) in [
        (1e-8, 1e-6, 1.0),
        (1e-8, 1e-6, 4.0),
        (1e-8, 1e-6, 10.0),
        (1e-7, 1e-6, 4.0),
        (5e-7, 1e-6, 4.0),
        (1e-7, 1e-5, 4.0),
        (1e-8, 1e-5, 4.0),
        (1e-8, 1e-5, 10.0),
    ] {
        let mut covs = Vec::new();
        let mut rmses = Vec::new();
        for seed in 0..20u64 {
            let measured = celldyn::plant::apply_sensor(&run.trace, &sensor, seed).unwrap();
            let cfg = SocEkfConfig {
                q_proc: [qs, qf, qf, qf],
                r_meas: r * rmul,
                x0: [0.9, 0.0, 0.0, 0.0],
                p0: [1e-4, 1e-6, 1e-6, 1e-6],
                blowup_limit: 1e6,
            };
            let out = soc_ekf_run(&measured, &model, &cell, &cfg).unwrap();
            let reference: Vec<f64> = run.soc.iter().map(|s| s.0).collect();
            let s = soc_summary(&out.estimates, &reference).unwrap();
            covs.push(s.coverage_3sigma);
            rmses.push(s.rms_soc_error);
        }
        let total: f64 = covs.iter().sum::<f64>() / covs.len() as f64;
        let worst = covs.iter().cloned().fold(1.0f64, f64::min);
        let rms = rmses.iter().sum::<f64>() / rmses.len() as f64;
        println!("qs={qs:>8.1e} qf={qf:>8.1e} rmul={rmul:>4} mean_cov={total:.4} worst_cov={worst:.4} mean_rms={rms:.3e}");
    }
}

#[test]
#[ignore]
fn probe_soc_converge_and_bias() {
    use celldyn::estimate::{soc_ekf_run, SocEkfConfig};
    use celldyn::plant::{gen_pulse_profile, plant_simulate, truth_relaxing, ProfileSpec};
    use celldyn::soc_trajectory;

    let cell = CellParams::default();
    let spec = ProfileSpec::pulses(1.0);
    let mut currents = gen_pulse_profile(&spec, &cell).unwrap();
    currents.truncate(6000);
    let model = celldyn::models::ModelParams::FilterState(truth_relaxing());
    let run = plant_simulate(&cell, &model, 0.9, &currents).unwrap();
    let reference: Vec<f64> = run.soc.iter().map(|s| s.0).collect();
    let sensor = celldyn::plant::SensorConfig::default();
    let r = sensor.voltage_noise_variance() * 4.0;
    let measured = celldyn::plant::apply_sensor(&run.trace, &sensor, 7).unwrap();
    let cfg = SocEkfConfig {
        q_proc: [1e-7, 1e-6, 1e-6, 1e-6],
        r_meas: r,
        x0: [0.6, 0.0, 0.0, 0.0],
        p0: [1e-1, 1e-6, 1e-6, 1e-6],
        blowup_limit: 1e6,
    };
    let out = soc_ekf_run(&measured, &model, &cell, &cfg).unwrap();
    let n = out.estimates.len();
    let tenth = n / 10;
    let mut hit = None;
    for (k, (e, t)) in out.estimates.iter().zip(&reference).enumerate() {
        if hit.is_none() && (e.soc - t).abs() < 0.02 {
            hit = Some(k);
        }
    }
    let worst_after = out.estimates[tenth..]
        .iter()
        .zip(&reference[tenth..])
        .map(|(e, t)| (e.soc - t).abs())
        .fold(0.0f64, f64::max);
    println!("n={n} first_below_0.02_at={hit:?} tenth={tenth} worst_after_tenth={worst_after:.4}");

    // Biased sensor: closed loop vs raw integration of measured current.
    let biased = celldyn::plant::SensorConfig {
        i_bias_a: 0.16,
        ..Default::default()
    };
    let measured_b = celldyn::plant::apply_sensor(&run.trace, &biased, 11).unwrap();
    let cfg_b = SocEkfConfig {
        x0: [0.9, 0.0, 0.0, 0.0],
        q_proc: [1e-7, 1e-6, 1e-6, 1e-6],
        r_meas: r,
        p0: [1e-4, 1e-6, 1e-6, 1e-6],
        blowup_limit: 1e6,
    };
    let closed = soc_ekf_run(&measured_b, &model, &cell, &cfg_b).unwrap();
    let open = soc_trajectory(&measured_b, celldyn::Soc(0.9), &cell);
    let closed_final = (closed.estimates.last().unwrap().soc - reference.last().unwrap()).abs();
    let open_final = (open.last().unwrap().0 - reference.last().unwrap()).abs();
    println!("final err closed={closed_final:.5} open={open_final:.5}");
}

fn rest_windows(currents: &[f64]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = None;
    for (k, &i) in currents.iter().enumerate() {
        if i == 0.0 {
            if start.is_none() {
                start = Some(k);
            }
        } else if let Some(s) = start.take() {
            out.push((s, k));
        }
    }
    if let Some(s) = start {
        out.push((s, currents.len()));
    }
    out
}

#[test]
#[ignore]
fn probe_ekf_recovery_and_relaxation() {
    use celldyn::ident::{ekf_identify, fit_combined, WeightEkfConfig};
    use celldyn::models::{simulate, ModelParams, SimInit};
    use celldyn::plant::{gen_pulse_profile, plant_simulate, truth_relaxing, ProfileSpec};

    let cell = CellParams::default();
    let spec = ProfileSpec::pulses(1.0);
    let mut currents = gen_pulse_profile(&spec, &cell).unwrap();
    currents.truncate(20000);
    let truth = truth_relaxing();
    let model = ModelParams::FilterState(truth.clone());
    let run = plant_simulate(&cell, &model, spec.soc_hi, &currents).unwrap();

    // Plant relaxation amplitude per rest window.
    let v: Vec<f64> = run.trace.voltages().collect();
    let wins = rest_windows(&currents);
    let mut amps: Vec<f64> = Vec::new();
    for &(s, e) in &wins {
        let w = &v[s..e];
        let hi = w.iter().cloned().fold(f64::MIN, f64::max);
        let lo = w.iter().cloned().fold(f64::MAX, f64::min);
        amps.push(hi - lo);
    }
    let min_amp = amps.iter().cloned().fold(f64::MAX, f64::min);
    println!("rest windows: {}, plant relaxation amplitude min={:.2} mV", wins.len(), min_amp * 1e3);

    // Warm-started weight recovery on the noiseless record.
    let mut init = truth.clone();
    init.w[6] *= 0.4;
    init.w[7] = -0.1;
    init.w[9] = 0.6;
    init.w[10] = 0.0;
    init.w[11] = 0.0;
    let t0 = std::time::Instant::now();
    let fit = ekf_identify(&run.trace, &cell, spec.soc_hi, &init, &WeightEkfConfig::default()).unwrap();
    println!("ekf_identify: {:?}, innovation rms {:.4} mV", t0.elapsed(), fit.innovation_rms_v * 1e3);

    // Held-out pulse trace at a different rate.
    let spec_h = ProfileSpec::pulses(0.5);
    let cur_h = gen_pulse_profile(&spec_h, &cell).unwrap();
    let run_h = plant_simulate(&cell, &model, spec_h.soc_hi, &cur_h).unwrap();
    let pred_fit = simulate(&ModelParams::FilterState(fit.params.clone()), &run_h.trace, &cell, &SimInit::at_soc(spec_h.soc_hi)).unwrap();
    let vh: Vec<f64> = run_h.trace.voltages().collect();
    let rms_fit = rms_of(&vh, &pred_fit);
    println!("held-out validation rms: fitted {:.4} mV (truth 0)", rms_fit * 1e3);

    // Neutral-start fit for the relaxation comparison.
    let neutral = celldyn::models::FilterStateParams::from_weights([
        0.0, 0.9, 0.0, 0.9, 0.05, 3.6, 0.0, -0.1, 0.5, 0.6, 0.0, 0.0,
    ]);
    let t1 = std::time::Instant::now();
    let fit_n = ekf_identify(&run.trace, &cell, spec.soc_hi, &neutral, &WeightEkfConfig::default()).unwrap();
    println!("neutral ekf_identify: {:?}, innovation rms {:.4} mV", t1.elapsed(), fit_n.innovation_rms_v * 1e3);
    let comb = fit_combined(&run.trace, &cell, spec.soc_hi).unwrap();
    let pred_fs = simulate(&ModelParams::FilterState(fit_n.params.clone()), &run.trace, &cell, &SimInit::at_soc(spec.soc_hi)).unwrap();
    let pred_cb = simulate(&ModelParams::Combined(comb.params.clone()), &run.trace, &cell, &SimInit::at_soc(spec.soc_hi)).unwrap();
    let mut fs_amp_min = f64::MAX;
    let mut cb_const = true;
    let mut acc_fs = 0.0;
    let mut acc_cb = 0.0;
    let mut cnt = 0usize;
    for &(s, e) in &wins {
        let wf = &pred_fs[s..e];
        let hi = wf.iter().cloned().fold(f64::MIN, f64::max);
        let lo = wf.iter().cloned().fold(f64::MAX, f64::min);
        fs_amp_min = fs_amp_min.min(hi - lo);
        let wc = &pred_cb[s..e];
        if wc.iter().any(|&x| x != wc[0]) {
            cb_const = false;
        }
        for k in s..e {
            acc_fs += (v[k] - pred_fs[k]).powi(2);
            acc_cb += (v[k] - pred_cb[k]).powi(2);
            cnt += 1;
        }
    }
    println!(
        "fitted fs rest amplitude min={:.2} mV, combined const={cb_const}, rest rms fs={:.3} mV cb={:.3} mV",
        fs_amp_min * 1e3,
        (acc_fs / cnt as f64).sqrt() * 1e3,
        (acc_cb / cnt as f64).sqrt() * 1e3
    );
}

fn rms_of(a: &[f64], b: &[f64]) -> f64 {
    let acc: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (acc / a.len() as f64).sqrt()
}
