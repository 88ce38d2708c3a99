//! Command implementations shared by the binary and the integration tests.

use std::path::{Path, PathBuf};

use nucsense::bloch::{integrate_bloch, BlochOptions, BlochState, PulseMode};
use nucsense::dsp::{decompose, extract_trace, harmonic_spectrum, RawRecord, Spectrum};
use nucsense::experiments::{artifacts::format_float, run_named, ExperimentConfig};
use nucsense::quantum::{run_train, SimConfig};
use nucsense::spin::Waveform;
use nucsense::{Error, Result};

use crate::config::{SimEngine, SimulateConfig};
use crate::manifest::{now_ms, RunManifest};

/// Outcome the binary turns into an exit code.
pub struct CommandOutcome {
    pub manifest_path: PathBuf,
    /// Set when --strict should make the exit code nonzero.
    pub flagged: bool,
}

fn write_trace_csv(
    path: &Path,
    tau: f64,
    s: &[f64],
    s_d: &[f64],
    s_o: &[f64],
) -> Result<()> {
    let mut out = String::from("time_s,s,s_d,s_o\n");
    for j in 0..s.len() {
        out.push_str(&format!(
            "{},{},{},{}\n",
            format_float((j as f64 + 1.0) * tau),
            format_float(s[j]),
            format_float(s_d[j]),
            format_float(s_o[j])
        ));
    }
    std::fs::write(path, out)?;
    Ok(())
}

fn write_spectrum_csv(path: &Path, spec: &Spectrum) -> Result<()> {
    let mut out = String::from("frequency_hz,magnitude\n");
    for (f, m) in spec.freqs.iter().zip(&spec.mags) {
        out.push_str(&format!("{},{}\n", format_float(*f), format_float(*m)));
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Run the selected engine and write trace, spectrum, and manifest artifacts.
pub fn cmd_simulate(
    config_doc: serde_json::Value,
    cfg: &SimulateConfig,
    outdir: &Path,
) -> Result<CommandOutcome> {
    let started = now_ms();
    std::fs::create_dir_all(outdir)?;
    let train = cfg.train.build()?;
    let field = cfg.drive.build()?;
    let mut extra_outputs: Vec<PathBuf> = Vec::new();
    let trace: Vec<f64> = match cfg.engine {
        SimEngine::Quantum => {
            let sys = cfg.system.build(cfg.seed)?;
            let sim = SimConfig::new(
                cfg.k_dd,
                cfg.system.gamma_n * cfg.drive.amplitude,
                1,
                cfg.seed,
            )?;
            // The engine takes the unit waveform; amplitude rides in k_z.
            let unit = nucsense::spin::DriveField::new(1.0, field.waveform)?;
            run_train(&sys, &train, &unit, &sim)?.s
        }
        SimEngine::Bloch => {
            let rate = nucsense::bloch::rate_field(&field, cfg.system.gamma_n)?;
            let mode = cfg.pulse_mode.unwrap_or(if train.t_p > 0.0 {
                PulseMode::Finite
            } else {
                PulseMode::Delta
            });
            let traj = integrate_bloch(
                &train,
                &rate,
                BlochState::along_x(),
                train.n_pulses,
                &BlochOptions {
                    steps_per_period: cfg.steps_per_period,
                    mode,
                    sample_stride: cfg.sample_stride.unwrap_or(0),
                },
            )?;
            if cfg.sample_stride.is_some() {
                extra_outputs.push(outdir.join("trajectory.csv"));
                std::fs::write(outdir.join("trajectory.csv"), traj.trajectory_csv())?;
            }
            traj.strobo.s
        }
        SimEngine::Analytic => {
            let Waveform::Sine { frequency, .. } = field.waveform else {
                return Err(Error::invalid(
                    "drive",
                    "the analytic engine needs a sine drive",
                ));
            };
            (1..=train.n_pulses)
                .map(|j| {
                    let t = j as f64 * train.tau;
                    nucsense::bloch::analytic_resonant(
                        cfg.system.gamma_n,
                        cfg.drive.amplitude,
                        frequency,
                        t,
                    )
                    .1
                })
                .collect()
        }
        SimEngine::Aht => {
            let sys = cfg.system.build(cfg.seed)?;
            let frame =
                nucsense::aht::TogglingFrame::build(&train, &field, train.duration())?;
            extra_outputs.push(outdir.join("phasor.csv"));
            std::fs::write(outdir.join("phasor.csv"), frame.phasor_csv())?;
            let (trace, _warn) =
                nucsense::aht::aht_signal(&sys, &train, &field, train.duration())?;
            trace.s
        }
    };
    let (s_d, s_o) = decompose(&trace, train.tau, cfg.decompose_window)?;
    let spec = harmonic_spectrum(&s_o, train.tau)?;
    let trace_path = outdir.join("trace.csv");
    let spectrum_path = outdir.join("spectrum.csv");
    write_trace_csv(&trace_path, train.tau, &trace, &s_d, &s_o)?;
    write_spectrum_csv(&spectrum_path, &spec)?;
    let mut outputs = vec![trace_path, spectrum_path];
    outputs.append(&mut extra_outputs);
    let manifest_path = outdir.join("manifest.json");
    RunManifest::collect(&config_doc, cfg.seed, started, &outputs)?.write(&manifest_path)?;
    Ok(CommandOutcome {
        manifest_path,
        flagged: false,
    })
}

/// Delegate to an experiment recipe and write its artifacts plus a manifest.
pub fn cmd_experiment(
    name: &str,
    config_doc: serde_json::Value,
    cfg: &ExperimentConfig,
    outdir: &Path,
) -> Result<CommandOutcome> {
    let started = now_ms();
    std::fs::create_dir_all(outdir)?;
    let (_summary, flagged) = run_named(name, cfg, outdir)?;
    let stem = name.replace('-', "_");
    let files: Vec<PathBuf> = [
        format!("{stem}_config.json"),
        format!("{stem}_results.csv"),
        format!("{stem}_fit.json"),
        format!("{stem}_results_long.csv"),
    ]
    .iter()
    .map(|f| outdir.join(f))
    .collect();
    let manifest_path = outdir.join(format!("{stem}_manifest.json"));
    RunManifest::collect(&config_doc, cfg.seed, started, &files)?.write(&manifest_path)?;
    Ok(CommandOutcome {
        manifest_path,
        flagged,
    })
}

/// Standalone pipeline: container -> trace -> decay/oscillation -> spectrum.
pub fn cmd_process(raw_path: &Path, window: f64, outdir: &Path) -> Result<CommandOutcome> {
    let started = now_ms();
    std::fs::create_dir_all(outdir)?;
    let raw = RawRecord::read_from(std::fs::File::open(raw_path)?)?;
    let trace = extract_trace(&raw)?;
    let (s_d, s_o) = decompose(&trace.s, trace.dt, window)?;
    let spec = harmonic_spectrum(&s_o, trace.dt)?;
    let trace_path = outdir.join("trace.csv");
    let spectrum_path = outdir.join("spectrum.csv");
    write_trace_csv(&trace_path, trace.dt, &trace.s, &s_d, &s_o)?;
    write_spectrum_csv(&spectrum_path, &spec)?;
    let doc = serde_json::json!({
        "command": "process",
        "input": raw_path,
        "window_s": window,
    });
    let manifest_path = outdir.join("manifest.json");
    RunManifest::collect(&doc, 0, started, &[trace_path, spectrum_path])?.write(&manifest_path)?;
    Ok(CommandOutcome {
        manifest_path,
        flagged: false,
    })
}

