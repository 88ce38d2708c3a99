//! Scripted experiment recipes: resonance sweeps, resonance-vs-pulse-width
//! scaling, harmonic intensity scaling, duty-cycle redistribution, chirp
//! frequency response, and sensitivity estimation.
//!
//! Conventions shared by the runners: the secondary harmonic is read from the
//! magnitude trace's oscillatory part S_o; the primary harmonic is read from
//! the transverse quadrature trace (the phase channel), whose intensity is
//! linear in the drive amplitude. Every runner is a pure function of
//! (config, seed).

pub mod artifacts;
pub mod sensitivity;

use std::f64::consts::TAU;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bloch::{
    integrate_bloch, BlochOptions, BlochState, OffResonanceParams, PulseMode,
};
use crate::dsp::fit::{PeakFit, PeakShape};
use crate::dsp::spectrum::{decompose, harmonic_spectrum, Spectrum};
use crate::error::{Error, Result};
use crate::quantum::{resonance_sweep, SimConfig, SweepPoint};
use crate::spin::{resonance_frequency, sensor_bandwidth, DriveField, PulseTrain, SpinSystem};
use crate::util::{linspace, logspace, split_seed, stream_rng, uniform_angle};
use artifacts::Table;
use sensitivity::{fit_sensitivity, SensitivityResult};

/// Which dynamics engine an experiment uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Engine {
    Quantum,
    Bloch,
    Analytic,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TrainSpec {
    pub theta: f64,
    pub tau: f64,
    #[serde(default)]
    pub t_p: f64,
    /// Defaults to tau - t_p.
    #[serde(default)]
    pub t_acq: Option<f64>,
    pub n_pulses: usize,
}

impl TrainSpec {
    pub fn build(&self) -> Result<PulseTrain> {
        let t_acq = self.t_acq.unwrap_or(self.tau - self.t_p);
        PulseTrain::new(self.theta, self.tau, self.t_p, t_acq, self.n_pulses)
    }
}

/// Defaults describe a single carbon-13 spin (gamma in Hz/T) at a
/// hyperpolarization of 0.2%.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SystemSpec {
    #[serde(default = "default_n_spins")]
    pub n_spins: usize,
    #[serde(default = "default_median_j")]
    pub median_j: f64,
    #[serde(default = "default_gamma_n")]
    pub gamma_n: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
}

fn default_n_spins() -> usize {
    1
}

fn default_median_j() -> f64 {
    663.0
}

fn default_gamma_n() -> f64 {
    10.705e6
}

fn default_epsilon() -> f64 {
    0.002
}

impl Default for SystemSpec {
    fn default() -> Self {
        Self {
            n_spins: default_n_spins(),
            median_j: default_median_j(),
            gamma_n: default_gamma_n(),
            epsilon: default_epsilon(),
        }
    }
}

impl SystemSpec {
    pub fn build(&self, seed: u64) -> Result<SpinSystem> {
        if self.n_spins == 1 {
            SpinSystem::single(self.gamma_n, self.epsilon)
        } else {
            SpinSystem::random_network(self.n_spins, self.median_j, self.gamma_n, self.epsilon, seed)
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FrequencyGrid {
    pub f_lo: f64,
    pub f_hi: f64,
    pub n_points: usize,
}

impl FrequencyGrid {
    pub fn values(&self) -> Result<Vec<f64>> {
        if !(self.f_hi > self.f_lo) || self.n_points < 2 {
            return Err(Error::invalid("sweep", "need f_hi > f_lo and >= 2 points"));
        }
        Ok(linspace(self.f_lo, self.f_hi, self.n_points))
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AmplitudeGrid {
    pub b_lo: f64,
    pub b_hi: f64,
    pub n_points: usize,
}

impl AmplitudeGrid {
    pub fn values(&self) -> Result<Vec<f64>> {
        if !(self.b_lo > 0.0 && self.b_hi > self.b_lo) || self.n_points < 4 {
            return Err(Error::invalid(
                "amplitudes",
                "need 0 < b_lo < b_hi and >= 4 points",
            ));
        }
        Ok(logspace(self.b_lo, self.b_hi, self.n_points))
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ChirpSpec {
    pub f_ini: f64,
    pub span: f64,
    pub duration: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct StftSpec {
    pub window: f64,
    pub hop: f64,
}

/// One configuration drives every experiment; each runner checks that the
/// sections it needs are present.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub engine: Engine,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    pub train: TrainSpec,
    #[serde(default)]
    pub system: SystemSpec,
    /// Dipolar scale on the Frobenius-normalized coupling term, Hz.
    #[serde(default)]
    pub k_dd: f64,
    /// Drive amplitude in tesla.
    #[serde(default)]
    pub b_ac: f64,
    #[serde(default)]
    pub f_ac: Option<f64>,
    #[serde(default)]
    pub sweep: Option<FrequencyGrid>,
    #[serde(default)]
    pub chirp: Option<ChirpSpec>,
    #[serde(default)]
    pub amplitudes: Option<AmplitudeGrid>,
    #[serde(default)]
    pub duty_grid: Option<Vec<f64>>,
    #[serde(default)]
    pub tp_grid: Option<Vec<f64>>,
    #[serde(default)]
    pub record_duration: Option<f64>,
    #[serde(default)]
    pub noise_rms: f64,
    #[serde(default)]
    pub steps_per_period: Option<usize>,
    #[serde(default)]
    pub stft: Option<StftSpec>,
    /// Moving-average window for the decay/oscillation split, seconds.
    #[serde(default = "default_decompose_window")]
    pub decompose_window: f64,
}

fn default_replicates() -> usize {
    1
}

fn default_decompose_window() -> f64 {
    73e-3
}

impl ExperimentConfig {
    fn bloch_steps(&self) -> usize {
        self.steps_per_period.unwrap_or(400)
    }

    fn require<T: Copy>(&self, field: Option<T>, name: &str) -> Result<T> {
        field.ok_or_else(|| Error::invalid("config", format!("{name} section is required")))
    }
}

/// Largest magnitude over bins in [lo, hi].
pub fn band_max(spec: &Spectrum, lo: f64, hi: f64) -> f64 {
    spec.freqs
        .iter()
        .zip(&spec.mags)
        .filter(|(f, _)| **f >= lo && **f <= hi)
        .map(|(_, m)| *m)
        .fold(0.0, f64::max)
}

/// Amplitude-weighted mean frequency over [lo, hi].
pub fn band_centroid(spec: &Spectrum, lo: f64, hi: f64) -> f64 {
    let (mut wsum, mut fsum) = (0.0, 0.0);
    for (f, m) in spec.freqs.iter().zip(&spec.mags) {
        if *f >= lo && *f <= hi {
            wsum += m;
            fsum += f * m;
        }
    }
    fsum / wsum
}

/// How repeated shots are combined into one spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AveragingMode {
    /// Average the time-domain traces, then transform. Default for
    /// phase-aligned repeats.
    Coherent,
    /// Average the magnitude spectra. Required when the drive phase is
    /// randomized between shots (coherent averaging would cancel the signal).
    Magnitude,
}

/// Combine repeated oscillatory traces into an averaged spectrum.
pub fn combine_shots(shots: &[Vec<f64>], tau: f64, mode: AveragingMode) -> Result<Spectrum> {
    if shots.is_empty() {
        return Err(Error::invalid("shots", "need at least one trace"));
    }
    let n = shots[0].len();
    if shots.iter().any(|s| s.len() != n) {
        return Err(Error::invalid("shots", "traces differ in length"));
    }
    match mode {
        AveragingMode::Coherent => {
            let mean: Vec<f64> = (0..n)
                .map(|i| shots.iter().map(|s| s[i]).sum::<f64>() / shots.len() as f64)
                .collect();
            harmonic_spectrum(&mean, tau)
        }
        AveragingMode::Magnitude => {
            let specs: Vec<Spectrum> = shots
                .iter()
                .map(|s| harmonic_spectrum(s, tau))
                .collect::<Result<_>>()?;
            Ok(average_mags(specs))
        }
    }
}

/// Both engines' per-pulse channels for one run.
struct Channels {
    /// Oscillatory part of the transverse magnitude.
    s_o: Vec<f64>,
    /// Oscillatory part of the transverse quadrature (y component).
    quad_o: Vec<f64>,
    tau: f64,
}

impl Channels {
    fn magnitude_spectrum(&self) -> Result<Spectrum> {
        harmonic_spectrum(&self.s_o, self.tau)
    }

    fn quadrature_spectrum(&self) -> Result<Spectrum> {
        harmonic_spectrum(&self.quad_o, self.tau)
    }
}

fn bloch_channels(
    train: &PulseTrain,
    field: &DriveField,
    gamma_n: f64,
    steps: usize,
    window: f64,
) -> Result<Channels> {
    let rate = crate::bloch::rate_field(field, gamma_n)?;
    let mode = if train.t_p > 0.0 {
        PulseMode::Finite
    } else {
        PulseMode::Delta
    };
    let traj = integrate_bloch(
        train,
        &rate,
        BlochState::along_x(),
        train.n_pulses,
        &BlochOptions {
            steps_per_period: steps,
            mode,
            sample_stride: 0,
        },
    )?;
    let (_, s_o) = decompose(&traj.strobo.s, train.tau, window)?;
    let (_, quad_o) = decompose(&traj.strobo_y, train.tau, window)?;
    Ok(Channels {
        s_o,
        quad_o,
        tau: train.tau,
    })
}

fn analytic_channels(
    train: &PulseTrain,
    gamma_n: f64,
    b_ac: f64,
    f_ac: f64,
    window: f64,
) -> Result<Channels> {
    let params = OffResonanceParams::for_delta_pulses(train, gamma_n, b_ac, f_ac);
    let (ca, _sa) = (params.alpha.cos(), params.alpha.sin());
    let n = train.n_pulses;
    let mut s = Vec::with_capacity(n);
    let mut quad = Vec::with_capacity(n);
    for j in 1..=n {
        let t = j as f64 * train.tau;
        let (sv, _) = crate::bloch::analytic_offresonant(&params, gamma_n, b_ac, f_ac, t);
        s.push(sv);
        quad.push(ca * (TAU * params.q * t).sin() * (TAU * f_ac * t).cos());
    }
    let (_, s_o) = decompose(&s, train.tau, window)?;
    let (_, quad_o) = decompose(&quad, train.tau, window)?;
    Ok(Channels {
        s_o,
        quad_o,
        tau: train.tau,
    })
}

// ---------------------------------------------------------------------------
// Resonance sweep (integrated decay signal against drive frequency)
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct ResonanceSweepResult {
    pub points: Vec<SweepPoint>,
    /// Gaussian fit of the dip profile 1 - S/baseline; None if it failed.
    pub dip: Option<PeakFit>,
    pub f_res_predicted: f64,
    #[serde(skip)]
    pub table: Table,
}

/// Gaussian fit of a resonance dip; exposed for reuse by the linewidth study.
pub fn fit_dip_profile(freqs: &[f64], integrated: &[f64]) -> Result<PeakFit> {
    let baseline = integrated.iter().copied().fold(f64::MIN, f64::max);
    let dip: Vec<f64> = integrated.iter().map(|s| 1.0 - s / baseline).collect();
    crate::dsp::fit::fit_peak(freqs, &dip, PeakShape::Gaussian)
}

pub fn run_resonance_sweep(cfg: &ExperimentConfig) -> Result<ResonanceSweepResult> {
    let sweep = cfg.require(cfg.sweep, "sweep")?;
    let train = cfg.train.build()?;
    let freqs = sweep.values()?;
    let duration = cfg
        .record_duration
        .unwrap_or_else(|| train.duration())
        .min(train.duration());
    let k_z = cfg.system.gamma_n * cfg.b_ac;
    let points: Vec<SweepPoint> = match cfg.engine {
        Engine::Quantum => {
            let sys = cfg.system.build(split_seed(cfg.seed, &[1]))?;
            let sim = SimConfig::new(cfg.k_dd, k_z, cfg.replicates, cfg.seed)?;
            resonance_sweep(&sys, &train, &sim, &freqs, duration)?
        }
        Engine::Bloch => {
            let steps = cfg.bloch_steps();
            let jobs: Vec<(usize, usize)> = (0..freqs.len())
                .flat_map(|i| (0..cfg.replicates).map(move |c| (i, c)))
                .collect();
            let vals: Vec<Result<f64>> = jobs
                .par_iter()
                .map(|&(i, c)| {
                    let phi0 =
                        uniform_angle(split_seed(cfg.seed, &[0x7068, i as u64, c as u64]));
                    let field = DriveField::square(cfg.b_ac * cfg.system.gamma_n, freqs[i], phi0)?;
                    let n_periods = (duration / train.tau).round() as usize;
                    let traj = integrate_bloch(
                        &train,
                        &field,
                        BlochState::along_x(),
                        n_periods,
                        &BlochOptions {
                            steps_per_period: steps,
                            mode: if train.t_p > 0.0 {
                                PulseMode::Finite
                            } else {
                                PulseMode::Delta
                            },
                            sample_stride: 0,
                        },
                    )?;
                    let skip = (traj.strobo.len() / 100).max(1);
                    Ok(traj.strobo.integrated_tail(skip))
                })
                .collect();
            let mut per_freq: Vec<Vec<f64>> = vec![Vec::new(); freqs.len()];
            for (&(i, _), v) in jobs.iter().zip(vals) {
                per_freq[i].push(v?);
            }
            freqs
                .iter()
                .zip(per_freq)
                .map(|(&f, vs)| {
                    let n = vs.len() as f64;
                    let mean = vs.iter().sum::<f64>() / n;
                    let var = if vs.len() > 1 {
                        vs.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
                    } else {
                        0.0
                    };
                    SweepPoint {
                        frequency_hz: f,
                        integrated_signal: mean,
                        stderr_over_configs: (var / n).sqrt(),
                    }
                })
                .collect()
        }
        Engine::Analytic => {
            return Err(Error::invalid(
                "engine",
                "resonance-sweep needs the quantum or bloch engine",
            ))
        }
    };
    let integrated: Vec<f64> = points.iter().map(|p| p.integrated_signal).collect();
    let dip = fit_dip_profile(&freqs, &integrated).ok();
    let mut table = Table::new(&["frequency_hz", "integrated_signal", "stderr_over_configs"]);
    for p in &points {
        table.push(vec![
            p.frequency_hz,
            p.integrated_signal,
            p.stderr_over_configs,
        ]);
    }
    Ok(ResonanceSweepResult {
        points,
        dip,
        f_res_predicted: resonance_frequency(&train),
        table,
    })
}

// ---------------------------------------------------------------------------
// Resonance frequency against pulse width
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct FresVsTpPoint {
    pub t_p: f64,
    pub tau: f64,
    pub measured_hz: Option<f64>,
    pub predicted_hz: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct FresVsTpResult {
    pub rows: Vec<FresVsTpPoint>,
    #[serde(skip)]
    pub table: Table,
}

/// Locate the resonance for each pulse width by driving a chirp through the
/// band and halving the frequency at which the second-harmonic response of
/// S_o peaks; acquisition window and flip angle stay fixed.
pub fn run_fres_vs_tp(cfg: &ExperimentConfig) -> Result<FresVsTpResult> {
    if cfg.engine != Engine::Bloch {
        return Err(Error::invalid("engine", "fres-vs-tp needs the bloch engine"));
    }
    let tp_grid = cfg
        .tp_grid
        .clone()
        .ok_or_else(|| Error::invalid("config", "tp_grid section is required"))?;
    let t_acq = cfg
        .train
        .t_acq
        .unwrap_or(cfg.train.tau - cfg.train.t_p);
    let rows: Vec<Result<FresVsTpPoint>> = tp_grid
        .par_iter()
        .map(|&t_p| {
            let tau = t_p + t_acq;
            let train = PulseTrain::new(cfg.train.theta, tau, t_p, t_acq, cfg.train.n_pulses)?;
            let predicted = resonance_frequency(&train);
            let bw = sensor_bandwidth(&train);
            let sweep_time = cfg.record_duration.unwrap_or(4.0).min(train.duration());
            let n_periods = (sweep_time / tau).round() as usize;
            let chirp = DriveField::chirp(
                cfg.b_ac * cfg.system.gamma_n,
                0.55 * predicted,
                0.9 * predicted,
                sweep_time,
                0.0,
            )?;
            let short = PulseTrain::new(train.theta, tau, t_p, t_acq, n_periods)?;
            let ch = bloch_channels(&short, &chirp, 1.0, cfg.bloch_steps(), cfg.decompose_window)?;
            let spec = ch.magnitude_spectrum()?;
            // Second-harmonic search window, clear of the primary band and
            // clipped to the stroboscopic bandwidth.
            let lo = 1.55 * predicted;
            let hi = (2.4 * predicted).min(bw);
            let mut best = (f64::NAN, 0.0);
            for (f, m) in spec.freqs.iter().zip(&spec.mags) {
                if *f >= lo && *f <= hi && *m > best.1 {
                    best = (*f, *m);
                }
            }
            let measured = if best.1 > 0.0 { Some(best.0 / 2.0) } else { None };
            Ok(FresVsTpPoint {
                t_p,
                tau,
                measured_hz: measured,
                predicted_hz: predicted,
            })
        })
        .collect();
    let rows: Vec<FresVsTpPoint> = rows.into_iter().collect::<Result<_>>()?;
    let mut table = Table::new(&["t_p_s", "tau_s", "measured_f_res_hz", "predicted_f_res_hz"]);
    for r in &rows {
        table.push(vec![
            r.t_p,
            r.tau,
            r.measured_hz.unwrap_or(f64::NAN),
            r.predicted_hz,
        ]);
    }
    Ok(FresVsTpResult { rows, table })
}

// ---------------------------------------------------------------------------
// Harmonic intensity scaling
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct HarmonicScalingResult {
    pub amplitudes: Vec<f64>,
    pub h1: Vec<f64>,
    pub h2: Vec<f64>,
    /// (exponent, 95% half-width)
    pub exponent1: (f64, f64),
    pub exponent2: (f64, f64),
    #[serde(skip)]
    pub table: Table,
}

fn loglog_slope(x: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    if y.iter().any(|v| *v <= 0.0) {
        return Err(Error::DegenerateFit("non-positive harmonic magnitude".into()));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = lx
        .iter()
        .zip(&ly)
        .map(|(a, b)| (b - intercept - slope * a).powi(2))
        .sum();
    let dof = (lx.len().max(3) - 2) as f64;
    let se = (rss / dof / sxx).sqrt();
    Ok((slope, 2.0 * se))
}

/// Measure primary (quadrature channel) and secondary (magnitude channel)
/// harmonic intensities over a logarithmic amplitude grid and fit power-law
/// exponents.
pub fn run_harmonic_scaling(cfg: &ExperimentConfig) -> Result<HarmonicScalingResult> {
    let grid = cfg.require(cfg.amplitudes, "amplitudes")?;
    let amplitudes = grid.values()?;
    let train = cfg.train.build()?;
    let f_ac = cfg.require(cfg.f_ac, "f_ac")?;
    let f_res = resonance_frequency(&train);
    let q_hat = (f_res - f_ac).abs().max(10.0 / train.duration());
    let gamma = cfg.system.gamma_n;
    let rwa_limit = 0.1 * f_ac / gamma;
    if grid.b_hi > rwa_limit {
        return Err(Error::invalid(
            "amplitudes",
            format!("b_hi {} exceeds the rotating-wave regime bound {rwa_limit:.3e} T", grid.b_hi),
        ));
    }
    let results: Vec<Result<(f64, f64)>> = amplitudes
        .par_iter()
        .map(|&b| {
            let ch = match cfg.engine {
                Engine::Analytic => {
                    analytic_channels(&train, gamma, b, f_ac, cfg.decompose_window)?
                }
                Engine::Bloch => {
                    let field = DriveField::sine(b, f_ac, 0.4)?;
                    bloch_channels(&train, &field, gamma, cfg.bloch_steps(), cfg.decompose_window)?
                }
                Engine::Quantum => {
                    return Err(Error::invalid(
                        "engine",
                        "harmonic-scaling needs the analytic or bloch engine",
                    ))
                }
            };
            let qspec = ch.quadrature_spectrum()?;
            let mspec = ch.magnitude_spectrum()?;
            let h1 = band_max(&qspec, f_ac - 2.5 * q_hat, f_ac + 2.5 * q_hat);
            let h2 = band_max(
                &mspec,
                2.0 * f_ac - 6.0 * mspec.resolution,
                2.0 * f_ac + 6.0 * mspec.resolution,
            );
            Ok((h1, h2))
        })
        .collect();
    let mut h1 = Vec::with_capacity(amplitudes.len());
    let mut h2 = Vec::with_capacity(amplitudes.len());
    for r in results {
        let (a, b) = r?;
        h1.push(a);
        h2.push(b);
    }
    let exponent1 = loglog_slope(&amplitudes, &h1)?;
    let exponent2 = loglog_slope(&amplitudes, &h2)?;
    let mut table = Table::new(&["b_ac_tesla", "harmonic1_intensity", "harmonic2_intensity"]);
    for i in 0..amplitudes.len() {
        table.push(vec![amplitudes[i], h1[i], h2[i]]);
    }
    Ok(HarmonicScalingResult {
        amplitudes,
        h1,
        h2,
        exponent1,
        exponent2,
        table,
    })
}

// ---------------------------------------------------------------------------
// Duty-cycle study
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct DutyCyclePoint {
    pub duty: f64,
    pub t_p: f64,
    pub h1: f64,
    pub h2: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DutyCycleResult {
    pub rows: Vec<DutyCyclePoint>,
    #[serde(skip)]
    pub table: Table,
}

/// Second-to-first harmonic intensity ratio over a pulse duty-cycle grid at
/// fixed interpulse period; duty 0 is the delta-pulse baseline.
pub fn run_duty_cycle_study(cfg: &ExperimentConfig) -> Result<DutyCycleResult> {
    if cfg.engine != Engine::Bloch {
        return Err(Error::invalid("engine", "duty-cycle needs the bloch engine"));
    }
    let duty_grid = cfg
        .duty_grid
        .clone()
        .ok_or_else(|| Error::invalid("config", "duty_grid section is required"))?;
    let f_ac = cfg.require(cfg.f_ac, "f_ac")?;
    let rows: Vec<Result<DutyCyclePoint>> = duty_grid
        .par_iter()
        .map(|&duty| {
            if !(0.0..0.95).contains(&duty) {
                return Err(Error::invalid("duty_grid", format!("duty {duty} out of range")));
            }
            let t_p = duty * cfg.train.tau;
            let train = PulseTrain::new(
                cfg.train.theta,
                cfg.train.tau,
                t_p,
                cfg.train.tau - t_p,
                cfg.train.n_pulses,
            )?;
            let field = DriveField::sine(cfg.b_ac, f_ac, 0.4)?;
            let ch = bloch_channels(
                &train,
                &field,
                cfg.system.gamma_n,
                cfg.bloch_steps(),
                cfg.decompose_window,
            )?;
            let f_res = resonance_frequency(&train);
            let q_hat = (f_res - f_ac).abs().max(10.0 / train.duration());
            let qspec = ch.quadrature_spectrum()?;
            let mspec = ch.magnitude_spectrum()?;
            let h1 = band_max(&qspec, f_ac - 2.5 * q_hat, f_ac + 2.5 * q_hat);
            let h2 = band_max(
                &mspec,
                2.0 * f_ac - 6.0 * mspec.resolution,
                2.0 * f_ac + 6.0 * mspec.resolution,
            );
            Ok(DutyCyclePoint {
                duty,
                t_p,
                h1,
                h2,
                ratio: h2 / h1,
            })
        })
        .collect();
    let rows: Vec<DutyCyclePoint> = rows.into_iter().collect::<Result<_>>()?;
    let mut table = Table::new(&["duty_cycle", "t_p_s", "harmonic1", "harmonic2", "ratio_h2_h1"]);
    for r in &rows {
        table.push(vec![r.duty, r.t_p, r.h1, r.h2, r.ratio]);
    }
    Ok(DutyCycleResult { rows, table })
}

// ---------------------------------------------------------------------------
// Chirp frequency response
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct ChirpResponseResult {
    pub f_res: f64,
    /// Frequency of the primary-band response maximum (the cusp).
    pub primary_peak_hz: f64,
    pub primary_centroid_hz: f64,
    pub secondary_centroid_hz: f64,
    #[serde(skip)]
    pub table: Table,
    #[serde(skip)]
    pub primary: Spectrum,
    #[serde(skip)]
    pub secondary: Spectrum,
}

fn average_mags(specs: Vec<Spectrum>) -> Spectrum {
    let mut acc = specs[0].clone();
    for s in &specs[1..] {
        for (a, m) in acc.mags.iter_mut().zip(&s.mags) {
            *a += m;
        }
    }
    let n = specs.len() as f64;
    for a in acc.mags.iter_mut() {
        *a /= n;
    }
    acc
}

/// Box-smooth magnitudes over roughly `width` Hz.
pub fn smooth_spectrum(spec: &Spectrum, width: f64) -> Vec<f64> {
    let half = ((width / (2.0 * spec.resolution)).round() as usize).max(1);
    let n = spec.mags.len();
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half).min(n - 1);
            spec.mags[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64
        })
        .collect()
}

/// Sweep a chirp through the band and average the response spectra over
/// replicates (magnitude averaging: the drive phase is random per shot).
/// The primary response is read from the quadrature channel, the secondary
/// from the magnitude channel.
pub fn run_chirp_response(cfg: &ExperimentConfig) -> Result<ChirpResponseResult> {
    if cfg.engine != Engine::Bloch {
        return Err(Error::invalid("engine", "chirp-response needs the bloch engine"));
    }
    let chirp = cfg.require(cfg.chirp, "chirp")?;
    let train = cfg.train.build()?;
    let f_res = resonance_frequency(&train);
    if !(chirp.f_ini <= f_res && f_res <= chirp.f_ini + chirp.span) {
        return Err(Error::invalid(
            "chirp",
            format!("swept band must cover f_res = {f_res:.1} Hz"),
        ));
    }
    let specs: Vec<Result<(Spectrum, Spectrum)>> = (0..cfg.replicates)
        .into_par_iter()
        .map(|c| {
            let phi0 = uniform_angle(split_seed(cfg.seed, &[0x6368, c as u64]));
            let field = DriveField::chirp(
                cfg.b_ac * cfg.system.gamma_n,
                chirp.f_ini,
                chirp.span,
                chirp.duration,
                phi0,
            )?;
            let ch = bloch_channels(&train, &field, 1.0, cfg.bloch_steps(), cfg.decompose_window)?;
            Ok((ch.quadrature_spectrum()?, ch.magnitude_spectrum()?))
        })
        .collect();
    let mut quads = Vec::new();
    let mut mags = Vec::new();
    for s in specs {
        let (q, m) = s?;
        quads.push(q);
        mags.push(m);
    }
    let primary = average_mags(quads);
    let secondary = average_mags(mags);
    // Cusp: maximum of the smoothed primary response inside the swept band.
    let smoothed = smooth_spectrum(&primary, 10.0);
    let (mut peak_f, mut peak_m) = (f64::NAN, 0.0);
    let (mut c_w, mut c_fw) = (0.0, 0.0);
    for (i, f) in primary.freqs.iter().enumerate() {
        if *f >= chirp.f_ini && *f <= chirp.f_ini + chirp.span {
            if smoothed[i] > peak_m {
                peak_m = smoothed[i];
                peak_f = *f;
            }
            c_w += smoothed[i];
            c_fw += f * smoothed[i];
        }
    }
    let primary_centroid = c_fw / c_w;
    // Secondary band: above the swept band, around 2 f_res.
    let lo = (chirp.f_ini + chirp.span).max(1.5 * f_res);
    let hi = (2.5 * f_res).min(secondary.bandwidth);
    let secondary_centroid = band_centroid(&secondary, lo, hi);
    let mut table = Table::new(&["frequency_hz", "primary_response", "secondary_response"]);
    for i in 0..primary.freqs.len() {
        table.push(vec![primary.freqs[i], primary.mags[i], secondary.mags[i]]);
    }
    Ok(ChirpResponseResult {
        f_res,
        primary_peak_hz: peak_f,
        primary_centroid_hz: primary_centroid,
        secondary_centroid_hz: secondary_centroid,
        table,
        primary,
        secondary,
    })
}

// ---------------------------------------------------------------------------
// Sensitivity estimation
// ---------------------------------------------------------------------------

/// Measure first-harmonic response over an amplitude grid with additive
/// noise on the trace, then extrapolate the minimum detectable field.
pub fn run_sensitivity(cfg: &ExperimentConfig) -> Result<(SensitivityResult, Table)> {
    let grid = cfg.require(cfg.amplitudes, "amplitudes")?;
    let amplitudes = grid.values()?;
    if amplitudes.len() < 4 {
        return Err(Error::invalid("amplitudes", "need >= 4 points"));
    }
    let train = cfg.train.build()?;
    let f_ac = cfg.require(cfg.f_ac, "f_ac")?;
    let duration = train.duration();
    let gamma = cfg.system.gamma_n;
    let f_res = resonance_frequency(&train);
    let q_hat = (f_res - f_ac).abs().max(10.0 / duration);
    let mut signals = Vec::with_capacity(amplitudes.len());
    let mut noise_bands = Vec::with_capacity(amplitudes.len());
    for (i, &b) in amplitudes.iter().enumerate() {
        let mut ch = analytic_channels(&train, gamma, b, f_ac, cfg.decompose_window)?;
        if cfg.noise_rms > 0.0 {
            let mut rng = stream_rng(cfg.seed, &[0x736e, i as u64]);
            for v in ch.quad_o.iter_mut() {
                let g: f64 =
                    rand_distr::Distribution::sample(&rand_distr::StandardNormal, &mut rng);
                *v += cfg.noise_rms * g;
            }
        }
        let spec = ch.quadrature_spectrum()?;
        signals.push(band_max(&spec, f_ac - 2.5 * q_hat, f_ac + 2.5 * q_hat));
        // Noise floor from a signal-free band well above the harmonics.
        let nf_lo = (2.5 * f_ac).min(0.8 * spec.bandwidth);
        let nf_hi = 0.95 * spec.bandwidth;
        let band: Vec<f64> = spec
            .freqs
            .iter()
            .zip(&spec.mags)
            .filter(|(f, _)| **f >= nf_lo && **f <= nf_hi)
            .map(|(_, m)| *m)
            .collect();
        noise_bands.push(band.iter().sum::<f64>() / band.len().max(1) as f64);
    }
    let noise_floor = noise_bands.iter().sum::<f64>() / noise_bands.len() as f64;
    let result = fit_sensitivity(&amplitudes, &signals, noise_floor, duration, cfg.seed)?;
    let mut table = Table::new(&["b_ac_tesla", "harmonic1_intensity"]);
    for (b, s) in amplitudes.iter().zip(&signals) {
        table.push(vec![*b, *s]);
    }
    Ok((result, table))
}

// ---------------------------------------------------------------------------
// Named dispatch for the CLI
// ---------------------------------------------------------------------------

pub const EXPERIMENT_NAMES: [&str; 6] = [
    "resonance-sweep",
    "fres-vs-tp",
    "harmonic-scaling",
    "duty-cycle",
    "chirp-response",
    "sensitivity",
];

/// Run an experiment by name, write its four artifacts, and return
/// (fit summary JSON, any-flagged-failure).
pub fn run_named(
    name: &str,
    cfg: &ExperimentConfig,
    outdir: &Path,
) -> Result<(serde_json::Value, bool)> {
    let (summary, table, flagged) = match name {
        "resonance-sweep" => {
            let r = run_resonance_sweep(cfg)?;
            let flagged = r.dip.is_none();
            (serde_json::to_value(&r)?, r.table, flagged)
        }
        "fres-vs-tp" => {
            let r = run_fres_vs_tp(cfg)?;
            let flagged = r.rows.iter().any(|p| p.measured_hz.is_none());
            (serde_json::to_value(&r)?, r.table, flagged)
        }
        "harmonic-scaling" => {
            let r = run_harmonic_scaling(cfg)?;
            (serde_json::to_value(&r)?, r.table, false)
        }
        "duty-cycle" => {
            let r = run_duty_cycle_study(cfg)?;
            (serde_json::to_value(&r)?, r.table, false)
        }
        "chirp-response" => {
            let r = run_chirp_response(cfg)?;
            (serde_json::to_value(&r)?, r.table, false)
        }
        "sensitivity" => {
            let (r, table) = run_sensitivity(cfg)?;
            (serde_json::to_value(&r)?, table, false)
        }
        other => {
            return Err(Error::invalid(
                "experiment",
                format!(
                    "unknown experiment {other:?}; valid names: {}",
                    EXPERIMENT_NAMES.join(", ")
                ),
            ))
        }
    };
    artifacts::write_artifacts(outdir, &name.replace('-', "_"), cfg, &table, &summary)?;
    Ok((summary, flagged))
}
