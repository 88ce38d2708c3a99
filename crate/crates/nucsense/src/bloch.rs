//! Single-spin classical dynamics: finite-element Bloch integration under
//! pulse trains and arbitrary waveforms, plus the resonant and off-resonant
//! closed forms that serve as oracles.
//!
//! Between pulses the magnetization rotates about z by 2*pi*gamma_n*B(t)*dt
//! per step (midpoint-sampled, with steps split at waveform discontinuities);
//! pulses rotate about x, instantaneously in delta mode or as a continuous
//! Rabi rotation over the pulse width in finite mode.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spin::{resonance_frequency, DriveField, PulseTrain};
use crate::trace::MagnetometerTrace;

/// Effective transverse coupling of a delta-pulsed spin-lock to a resonant
/// sinusoidal drive, as a fraction of gamma_n*B_AC: sqrt(2)/pi.
///
/// Half of it is the usual rotating-wave factor; the rest is the staircase
/// average of the toggled drive over the four-pulse cycle.
pub const DELTA_PULSE_SINE_EFFICIENCY: f64 = std::f64::consts::SQRT_2 / std::f64::consts::PI;

/// Same coupling for a resonant square drive at its pure-phase alignment: 1/2.
pub const DELTA_PULSE_SQUARE_EFFICIENCY: f64 = 0.5;

/// Classical magnetization direction, dimensionless.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlochState {
    pub m: [f64; 3],
}

impl BlochState {
    pub fn new(m: [f64; 3]) -> Self {
        Self { m }
    }

    /// Along +x, the prepared spin-lock state.
    pub fn along_x() -> Self {
        Self { m: [1.0, 0.0, 0.0] }
    }

    /// In the x-y plane at `angle` from +x.
    pub fn in_plane(angle: f64) -> Self {
        Self {
            m: [angle.cos(), angle.sin(), 0.0],
        }
    }

    pub fn norm(&self) -> f64 {
        (self.m[0] * self.m[0] + self.m[1] * self.m[1] + self.m[2] * self.m[2]).sqrt()
    }

    pub fn transverse_magnitude(&self) -> f64 {
        (self.m[0] * self.m[0] + self.m[1] * self.m[1]).sqrt()
    }

    fn rot_z(&mut self, a: f64) {
        let (s, c) = a.sin_cos();
        let [x, y, z] = self.m;
        self.m = [c * x - s * y, s * x + c * y, z];
    }

    fn rot_x(&mut self, a: f64) {
        let (s, c) = a.sin_cos();
        let [x, y, z] = self.m;
        self.m = [x, c * y - s * z, s * y + c * z];
    }
}

/// How pulses are applied by the integrator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PulseMode {
    /// Instantaneous rotation by theta at each pulse instant.
    Delta,
    /// Rabi rotation at theta/t_p spread over the pulse width, with the drive
    /// still acting.
    Finite,
}

/// Full integration output: sampled trajectory plus the stroboscopic trace.
#[derive(Debug, Clone)]
pub struct BlochTrajectory {
    /// (t, m) samples, one per integration step boundary (decimated by
    /// `sample_stride` steps).
    pub samples: Vec<(f64, [f64; 3])>,
    /// Transverse magnitude after each pulse.
    pub strobo: MagnetometerTrace,
    /// y-component after each pulse: the quadrature channel that carries the
    /// drive's instantaneous phase.
    pub strobo_y: Vec<f64>,
    /// Max |norm(m) - 1| seen at pulse boundaries.
    pub norm_drift: f64,
}

impl BlochTrajectory {
    /// Trajectory export for Bloch-sphere rendering: t, m_x, m_y, m_z rows.
    pub fn trajectory_csv(&self) -> String {
        let mut out = String::from("t_s,m_x,m_y,m_z\n");
        for (t, m) in &self.samples {
            out.push_str(&format!("{},{},{},{}\n", t, m[0], m[1], m[2]));
        }
        out
    }
}

/// Options for [`integrate_bloch`].
#[derive(Debug, Clone, Copy)]
pub struct BlochOptions {
    pub steps_per_period: usize,
    pub mode: PulseMode,
    /// Keep every n-th step in `samples` (0 = stroboscopic only).
    pub sample_stride: usize,
}

impl Default for BlochOptions {
    fn default() -> Self {
        Self {
            steps_per_period: 2000,
            mode: PulseMode::Delta,
            sample_stride: 0,
        }
    }
}

/// Integrate the Bloch equations in the rotating frame over `n_periods` pulse
/// periods with `steps_per_period` finite elements each.
pub fn integrate_bloch(
    train: &PulseTrain,
    field: &DriveField,
    init: BlochState,
    n_periods: usize,
    opts: &BlochOptions,
) -> Result<BlochTrajectory> {
    if opts.steps_per_period < 100 {
        return Err(Error::invalid(
            "steps_per_period",
            "needs at least 100 steps per period",
        ));
    }
    if n_periods == 0 {
        return Err(Error::invalid("n_periods", "must be >= 1"));
    }
    let mut m = init;
    let mut samples = Vec::new();
    let mut strobo = Vec::with_capacity(n_periods);
    let mut strobo_y = Vec::with_capacity(n_periods);
    let mut norm_drift: f64 = 0.0;
    let mut step_count = 0usize;
    for j in 0..n_periods {
        let t0 = j as f64 * train.tau;
        let (free_start, free_len) = match opts.mode {
            PulseMode::Delta => (t0, train.tau),
            PulseMode::Finite => (t0, train.tau - train.t_p),
        };
        // Free evolution: z rotations only, steps split at square-wave flips.
        let n_free = opts.steps_per_period;
        substeps(
            &mut m,
            field,
            free_start,
            free_len,
            n_free,
            None,
            &mut samples,
            opts.sample_stride,
            &mut step_count,
        )?;
        // Pulse.
        match opts.mode {
            PulseMode::Delta => m.rot_x(train.theta),
            PulseMode::Finite => {
                let n_pulse = (opts.steps_per_period / 4).max(50);
                let x_rate = train.theta / train.t_p; // rad/s about x
                substeps(
                    &mut m,
                    field,
                    free_start + free_len,
                    train.t_p,
                    n_pulse,
                    Some(x_rate),
                    &mut samples,
                    opts.sample_stride,
                    &mut step_count,
                )?;
            }
        }
        strobo.push(m.transverse_magnitude());
        strobo_y.push(m.m[1]);
        norm_drift = norm_drift.max((m.norm() - 1.0).abs());
        if norm_drift > 1e-6 {
            return Err(Error::NumericalIntegrity {
                what: "bloch norm drift",
                value: norm_drift,
                limit: 1e-6,
            });
        }
    }
    Ok(BlochTrajectory {
        samples,
        strobo: MagnetometerTrace::new(strobo, train.tau),
        strobo_y,
        norm_drift,
    })
}

/// March `n` midpoint steps over [t0, t0+len], rotating about z by
/// 2 pi B(t) dt (B already includes gamma_n via the caller's field scale)
/// and optionally about x at `x_rate` rad/s. Splits steps at square flips.
#[allow(clippy::too_many_arguments)]
fn substeps(
    m: &mut BlochState,
    field: &DriveField,
    t0: f64,
    len: f64,
    n: usize,
    x_rate: Option<f64>,
    samples: &mut Vec<(f64, [f64; 3])>,
    stride: usize,
    step_count: &mut usize,
) -> Result<()> {
    if len <= 0.0 {
        return Ok(());
    }
    // Boundaries: uniform grid plus any waveform discontinuities.
    let mut bounds: Vec<f64> = (0..=n).map(|i| t0 + len * i as f64 / n as f64).collect();
    for f in field.square_flips(t0, t0 + len) {
        bounds.push(f);
    }
    bounds.sort_by(|a, b| a.partial_cmp(b).unwrap());
    bounds.dedup_by(|a, b| (*a - *b).abs() < 1e-18);
    for w in bounds.windows(2) {
        let (a, b) = (w[0], w[1]);
        let dt = b - a;
        if dt <= 0.0 {
            continue;
        }
        let bt = field.value(0.5 * (a + b))?;
        m.rot_z(TAU * bt * dt);
        if let Some(r) = x_rate {
            m.rot_x(r * dt);
        }
        *step_count += 1;
        if stride > 0 && *step_count % stride == 0 {
            samples.push((b, m.m));
        }
    }
    Ok(())
}

/// Gyromagnetic scaling helper: express a physical field (tesla) as the
/// rotation-rate field gamma_n * B in Hz that [`integrate_bloch`] expects.
pub fn rate_field(field: &DriveField, gamma_n: f64) -> Result<DriveField> {
    DriveField::new(field.amplitude * gamma_n, field.waveform)
}

/// Resonant closed-form rotating-frame trajectory and magnitude.
///
/// With nu = gamma_n * b_ac in Hz, returns
/// (cos(2 pi nu t), sin(2 pi nu t) sin(2 pi f t), sin(2 pi nu t) cos(2 pi f t))
/// and S = sqrt(c_x^2 + c_y^2).
pub fn analytic_resonant(gamma_n: f64, b_ac: f64, f_ac: f64, t: f64) -> ([f64; 3], f64) {
    let a = TAU * gamma_n * b_ac * t;
    let b = TAU * f_ac * t;
    let comps = [a.cos(), a.sin() * b.sin(), a.sin() * b.cos()];
    let s = (comps[0] * comps[0] + comps[1] * comps[1]).sqrt();
    (comps, s)
}

/// Rotating-wave parameters for an off-resonant drive.
///
/// All rates in Hz: `detuning` is f_eff - f_AC, `coupling` the effective
/// transverse rate; alpha = atan2(detuning, coupling) and Q = hypot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OffResonanceParams {
    pub alpha: f64,
    /// Precession rate about the tilted axis, Hz.
    pub q: f64,
    /// Effective quantization rate f_eff = theta/(2 pi tau) (delta pulses), Hz.
    pub omega_eff: f64,
}

impl OffResonanceParams {
    pub fn from_rates(omega_eff: f64, f_ac: f64, coupling: f64) -> Self {
        let detuning = omega_eff - f_ac;
        Self {
            alpha: detuning.atan2(coupling),
            q: (detuning * detuning + coupling * coupling).sqrt(),
            omega_eff,
        }
    }

    /// Parameters for a delta-pulsed train driven by a sinusoid at `f_ac`
    /// with amplitude `b_ac` tesla.
    pub fn for_delta_pulses(train: &PulseTrain, gamma_n: f64, b_ac: f64, f_ac: f64) -> Self {
        let coupling = DELTA_PULSE_SINE_EFFICIENCY * gamma_n * b_ac;
        let f_eff = resonance_frequency(train);
        let detuning = f_eff - f_ac;
        Self {
            alpha: detuning.atan2(coupling),
            q: (detuning * detuning + coupling * coupling).sqrt(),
            omega_eff: f_eff,
        }
    }
}

/// Off-resonant closed-form magnitude
/// S = sqrt((cos^2 a cos(2 pi Q t) + sin^2 a)^2
///        + cos^2 a sin^2(2 pi Q t) cos^2(2 pi f t)).
///
/// Warns (returns the flag) when the rotating-wave approximation is strained,
/// gamma_n * b_ac > 0.1 * f_ac.
pub fn analytic_offresonant(
    params: &OffResonanceParams,
    gamma_n: f64,
    b_ac: f64,
    f_ac: f64,
    t: f64,
) -> (f64, bool) {
    let rwa_strained = gamma_n * b_ac > 0.1 * f_ac;
    let (ca, sa) = (params.alpha.cos(), params.alpha.sin());
    let qt = TAU * params.q * t;
    let bt = TAU * f_ac * t;
    let ax = ca * ca * qt.cos() + sa * sa;
    let s = (ax * ax + ca * ca * qt.sin().powi(2) * bt.cos().powi(2)).sqrt();
    (s, rwa_strained)
}
