//! Exact piecewise-constant propagator simulation of the pulsed spin-lock
//! sequence on small dipolar networks.
//!
//! The evolution is factored per interval between switching events. The
//! secular dipolar term commutes with the collective I_z drive, so each
//! interval propagator splits exactly into a cached dipolar propagator and a
//! diagonal drive phase built from the waveform's exact time integral; no
//! sub-interval discretization is needed for any supported waveform.

use std::collections::HashMap;

use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::dsp::fit::{fit_peak, PeakShape};
use crate::error::{Error, Result};
use crate::operator::{Axis, OperatorMatrix};
use crate::spin::{
    collective_operator, dipolar_hamiltonian, resonance_frequency, DriveField, PulseTrain,
    SpinSystem, Waveform,
};
use crate::trace::MagnetometerTrace;
use crate::util::split_seed;

/// Propagators whose unitarity defect exceeds this are rejected.
pub const UNITARITY_TOL: f64 = 1e-8;

/// Coincident events closer than this merge into a single `Both` event.
pub const COALESCE_TOL: f64 = 1e-12;

/// What happens at a switching instant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    Pulse,
    SignFlip,
    Both,
}

/// One switching event at time `t`.
#[derive(Debug, Clone, Copy)]
pub struct SwitchEvent {
    pub t: f64,
    pub kind: EventKind,
}

/// The interval leading up to each event.
#[derive(Debug, Clone, Copy)]
pub struct Interval {
    /// Length in seconds.
    pub dt: f64,
    /// Bookkeeping sign s_j: +1 on the first interval, toggling at flips.
    pub sign: f64,
    /// Exact integral of the unit-amplitude waveform over the interval,
    /// in seconds. Drives the diagonal phase of the interval propagator.
    pub drive_weight: f64,
}

/// Merged, sorted switching schedule over `[0, duration]`.
#[derive(Debug, Clone)]
pub struct SwitchingSchedule {
    pub events: Vec<SwitchEvent>,
    pub intervals: Vec<Interval>,
    pub duration: f64,
}

/// Scales for the simulated Hamiltonian H = k_dd * Hdd/|Hdd| + k_z * w(t) * Iz.
///
/// `k_dd` multiplies the Frobenius-normalized dipolar term; `k_z` is the drive
/// scale in Hz (gamma_n * B_AC for a physical field of unit waveform).
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct SimConfig {
    pub k_dd: f64,
    pub k_z: f64,
    pub n_configs: usize,
    pub seed: u64,
}

impl SimConfig {
    pub fn new(k_dd: f64, k_z: f64, n_configs: usize, seed: u64) -> Result<Self> {
        if k_dd < 0.0 || k_z < 0.0 {
            return Err(Error::invalid("k_dd/k_z", "scales must be >= 0"));
        }
        if n_configs < 1 {
            return Err(Error::invalid("n_configs", "must be >= 1"));
        }
        Ok(Self {
            k_dd,
            k_z,
            n_configs,
            seed,
        })
    }
}

/// Merge pulses and square-wave sign flips into one ordered event list.
///
/// Sine and DC drives produce pulse events only; their drive action enters
/// through the exact per-interval waveform integral. Chirps are not supported
/// by this engine (the Bloch integrator handles them).
pub fn build_schedule(
    train: &PulseTrain,
    field: &DriveField,
    duration: f64,
) -> Result<SwitchingSchedule> {
    if let Waveform::Chirp { .. } = field.waveform {
        return Err(Error::UnsupportedWaveform(
            "chirp drives need the bloch engine or a piecewise schedule".into(),
        ));
    }
    if !(duration > 0.0) {
        return Err(Error::invalid("duration", "must be positive"));
    }
    let mut events: Vec<SwitchEvent> = Vec::new();
    let mut j = 1usize;
    loop {
        let t = j as f64 * train.tau;
        if t > duration * (1.0 + 1e-12) {
            break;
        }
        events.push(SwitchEvent {
            t,
            kind: EventKind::Pulse,
        });
        j += 1;
    }
    for t in field.square_flips(0.0, duration) {
        events.push(SwitchEvent {
            t,
            kind: EventKind::SignFlip,
        });
    }
    events.sort_by(|a, b| a.t.partial_cmp(&b.t).unwrap());
    // Coalesce coincident pulse + flip into Both.
    let mut merged: Vec<SwitchEvent> = Vec::with_capacity(events.len());
    for ev in events {
        match merged.last_mut() {
            Some(last) if (ev.t - last.t).abs() < COALESCE_TOL && last.kind != ev.kind => {
                last.kind = EventKind::Both;
            }
            _ => merged.push(ev),
        }
    }
    // Intervals between consecutive events, with spec-convention signs.
    let mut intervals = Vec::with_capacity(merged.len());
    let mut sign = 1.0;
    let mut t_prev = 0.0;
    for ev in &merged {
        let unit = DriveField::new(1.0, field.waveform).expect("unit field");
        intervals.push(Interval {
            dt: ev.t - t_prev,
            sign,
            drive_weight: unit.integral(t_prev, ev.t)?,
        });
        if matches!(ev.kind, EventKind::SignFlip | EventKind::Both) {
            sign = -sign;
        }
        t_prev = ev.t;
    }
    Ok(SwitchingSchedule {
        events: merged,
        intervals,
        duration,
    })
}

/// State and cached propagators for one spin-lock run.
struct Propagation {
    rho: OperatorMatrix,
    ix: OperatorMatrix,
    iy: OperatorMatrix,
    ix_eigen: crate::operator::HermitianEigen,
    pulse: OperatorMatrix,
    dd_eigen: Option<crate::operator::HermitianEigen>,
    dd_cache: HashMap<u64, OperatorMatrix>,
    /// I_z eigenvalue of each computational basis state.
    z_diag: Vec<f64>,
    k_z: f64,
}

impl Propagation {
    fn new(sys: &SpinSystem, theta: f64, cfg: &SimConfig) -> Result<Self> {
        let ix = collective_operator(sys, Axis::X)?;
        let iy = collective_operator(sys, Axis::Y)?;
        let ix_eigen = ix.eigh()?;
        let pulse = ix_eigen.propagator(theta / std::f64::consts::TAU);
        if pulse.unitarity_defect() > UNITARITY_TOL {
            return Err(Error::NumericalIntegrity {
                what: "pulse unitarity defect",
                value: pulse.unitarity_defect(),
                limit: UNITARITY_TOL,
            });
        }
        let dd_eigen = if cfg.k_dd > 0.0 && sys.n_spins() >= 2 {
            let h = dipolar_hamiltonian(sys)?;
            let norm = h.frobenius_norm();
            if norm == 0.0 {
                None
            } else {
                Some(h.scale(cfg.k_dd / norm).eigh()?)
            }
        } else {
            None
        };
        let n = sys.n_spins();
        let z_diag: Vec<f64> = (0..sys.dim())
            .map(|m| {
                let ups = (m as u64).count_ones() as i64;
                // Bit set = spin down in the kron ordering of pauli_half(Z).
                (n as i64 - 2 * ups) as f64 * 0.5
            })
            .collect();
        Ok(Self {
            rho: ix.clone(),
            ix,
            iy,
            ix_eigen,
            pulse,
            dd_eigen,
            dd_cache: HashMap::new(),
            z_diag,
            k_z: cfg.k_z,
        })
    }

    fn conjugate(&mut self, u: &OperatorMatrix) {
        self.rho = self.rho.conjugate_by(u);
    }

    fn evolve_interval(&mut self, iv: &Interval) -> Result<()> {
        if let Some(eig) = &self.dd_eigen {
            let key = iv.dt.to_bits();
            if let std::collections::hash_map::Entry::Vacant(slot) = self.dd_cache.entry(key) {
                let u = eig.propagator(iv.dt);
                let defect = u.unitarity_defect();
                if defect > UNITARITY_TOL {
                    return Err(Error::NumericalIntegrity {
                        what: "interval propagator unitarity defect",
                        value: defect,
                        limit: UNITARITY_TOL,
                    });
                }
                slot.insert(u);
            }
            let u = &self.dd_cache[&key];
            self.rho = self.rho.conjugate_by(u);
        }
        if self.k_z != 0.0 && iv.drive_weight != 0.0 {
            // Diagonal phase exp(-2 pi i k_z W Iz): rho_mn *= e^{-2 pi i k_z W (z_m - z_n)}
            let w = self.k_z * iv.drive_weight;
            let dim = self.z_diag.len();
            let phases: Vec<C64> = self
                .z_diag
                .iter()
                .map(|z| C64::from_polar(1.0, -std::f64::consts::TAU * w * z))
                .collect();
            let mut mat = self.rho.matrix().clone();
            for i in 0..dim {
                for k in 0..dim {
                    mat[(i, k)] *= phases[i] * phases[k].conj();
                }
            }
            self.rho = OperatorMatrix::from_matrix(mat);
        }
        Ok(())
    }

    fn apply_pulse(&mut self) {
        self.rho = self.rho.conjugate_by(&self.pulse);
    }

    fn transverse_magnitude(&self) -> f64 {
        let sx = self.ix.expectation(&self.rho);
        let sy = self.iy.expectation(&self.rho);
        (sx * sx + sy * sy).sqrt()
    }
}

/// Run the pulsed spin-lock sequence from rho(0) ~ I_x, recording the
/// transverse magnitude after every pulse, normalized to the first point.
pub fn run_pulsed_spinlock(
    sys: &SpinSystem,
    sched: &SwitchingSchedule,
    cfg: &SimConfig,
) -> Result<MagnetometerTrace> {
    let theta_from_events = sched
        .events
        .iter()
        .find(|e| matches!(e.kind, EventKind::Pulse | EventKind::Both))
        .map(|e| e.t);
    let tau = theta_from_events.unwrap_or(sched.duration);
    run_pulsed_spinlock_theta(sys, sched, cfg, std::f64::consts::FRAC_PI_2, tau)
}

/// As [`run_pulsed_spinlock`] with an explicit flip angle and sample spacing.
pub fn run_pulsed_spinlock_theta(
    sys: &SpinSystem,
    sched: &SwitchingSchedule,
    cfg: &SimConfig,
    theta: f64,
    tau: f64,
) -> Result<MagnetometerTrace> {
    let mut prop = Propagation::new(sys, theta, cfg)?;
    let mut s = Vec::new();
    for (ev, iv) in sched.events.iter().zip(&sched.intervals) {
        prop.evolve_interval(iv)?;
        if matches!(ev.kind, EventKind::Pulse | EventKind::Both) {
            prop.apply_pulse();
            s.push(prop.transverse_magnitude());
        }
    }
    if s.is_empty() {
        return Err(Error::invalid("schedule", "contains no pulse events"));
    }
    let norm = s[0];
    for v in &mut s {
        *v /= norm;
    }
    Ok(MagnetometerTrace::new(s, tau))
}

/// Convenience wrapper: build the schedule for `train` + `field` and run.
/// Trains with a nonzero pulse width take the finite-pulse path, where each
/// pulse is a Rabi window with the drive still acting.
pub fn run_train(
    sys: &SpinSystem,
    train: &PulseTrain,
    field: &DriveField,
    cfg: &SimConfig,
) -> Result<MagnetometerTrace> {
    if train.t_p > 0.0 {
        return run_train_finite(sys, train, field, cfg, 32);
    }
    let sched = build_schedule(train, field, train.duration())?;
    run_pulsed_spinlock_theta(sys, &sched, cfg, train.theta, train.tau)
}

/// Finite-pulse propagation: free evolution over tau - t_p, then the pulse
/// window split into `segments` symmetric second-order slices
/// exp(-i O dt/2) exp(-i (Hdd + drive) dt) exp(-i O dt/2) with O the Rabi
/// term theta/t_p along x. Doubling `segments` checks convergence.
pub fn run_train_finite(
    sys: &SpinSystem,
    train: &PulseTrain,
    field: &DriveField,
    cfg: &SimConfig,
    segments: usize,
) -> Result<MagnetometerTrace> {
    if train.t_p <= 0.0 {
        return Err(Error::invalid("t_p", "finite-pulse path needs t_p > 0"));
    }
    let m = segments.max(4);
    let mut prop = Propagation::new(sys, train.theta, cfg)?;
    // Half-slice x rotation: angle theta/(2m).
    let x_half = prop
        .ix_eigen
        .propagator(train.theta / (2.0 * m as f64) / std::f64::consts::TAU);
    let unit = DriveField::new(1.0, field.waveform)?;
    let free = train.tau - train.t_p;
    let delta = train.t_p / m as f64;
    let mut s = Vec::with_capacity(train.n_pulses);
    for j in 1..=train.n_pulses {
        let t0 = (j - 1) as f64 * train.tau;
        let pulse_start = t0 + free;
        if free > 0.0 {
            prop.evolve_interval(&Interval {
                dt: free,
                sign: 1.0,
                drive_weight: unit.integral(t0, pulse_start)?,
            })?;
        }
        for k in 0..m {
            let (a, b) = (
                pulse_start + k as f64 * delta,
                pulse_start + (k + 1) as f64 * delta,
            );
            prop.conjugate(&x_half);
            prop.evolve_interval(&Interval {
                dt: delta,
                sign: 1.0,
                drive_weight: unit.integral(a, b)?,
            })?;
            prop.conjugate(&x_half);
        }
        s.push(prop.transverse_magnitude());
    }
    let norm = s[0];
    for v in &mut s {
        *v /= norm;
    }
    Ok(MagnetometerTrace::new(s, train.tau))
}

/// One point of a resonance sweep.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct SweepPoint {
    pub frequency_hz: f64,
    pub integrated_signal: f64,
    pub stderr_over_configs: f64,
}

/// Sweep the drive frequency, averaging the integrated tail signal over
/// `cfg.n_configs` random network replicas with per-run random phase.
///
/// Multi-spin systems are redrawn per replica (preserving the input's median
/// coupling); single spins are reused with only the phase randomized.
pub fn resonance_sweep(
    sys: &SpinSystem,
    train: &PulseTrain,
    cfg: &SimConfig,
    freqs: &[f64],
    duration: f64,
) -> Result<Vec<SweepPoint>> {
    if freqs.is_empty() {
        return Err(Error::invalid("freqs", "sweep grid is empty"));
    }
    let median_j = sys.median_coupling();
    let replicas: Vec<SpinSystem> = (0..cfg.n_configs)
        .map(|c| {
            if sys.n_spins() == 1 {
                Ok(sys.clone())
            } else {
                SpinSystem::random_network(
                    sys.n_spins(),
                    median_j,
                    sys.gamma_n,
                    sys.epsilon,
                    split_seed(cfg.seed, &[0x6e65, c as u64]),
                )
            }
        })
        .collect::<Result<_>>()?;

    let jobs: Vec<(usize, usize)> = (0..freqs.len())
        .flat_map(|i| (0..cfg.n_configs).map(move |c| (i, c)))
        .collect();
    let results: Vec<Result<f64>> = jobs
        .par_iter()
        .map(|&(i, c)| {
            let phi0 = crate::util::uniform_angle(split_seed(cfg.seed, &[0x7068, i as u64, c as u64]));
            let field = DriveField::square(1.0, freqs[i], phi0)?;
            let sched = build_schedule(train, &field, duration)?;
            let trace = run_pulsed_spinlock_theta(&replicas[c], &sched, cfg, train.theta, train.tau)?;
            let skip = (trace.len() / 100).max(1).min(trace.len() - 1);
            Ok(trace.integrated_tail(skip))
        })
        .collect();

    let mut per_freq: Vec<Vec<f64>> = vec![Vec::new(); freqs.len()];
    for (&(i, _), r) in jobs.iter().zip(results) {
        per_freq[i].push(r?);
    }
    Ok(freqs
        .iter()
        .zip(per_freq)
        .map(|(&f, vals)| {
            let n = vals.len() as f64;
            let mean = vals.iter().sum::<f64>() / n;
            let var = if vals.len() > 1 {
                vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
            } else {
                0.0
            };
            SweepPoint {
                frequency_hz: f,
                integrated_signal: mean,
                stderr_over_configs: (var / n).sqrt(),
            }
        })
        .collect())
}

/// Linewidth of the resonance dip for one pulse count.
#[derive(Debug, Clone, serde::Serialize)]
pub struct LinewidthPoint {
    pub n_pulses: usize,
    /// FWHM of the Gaussian dip fit in Hz; None when the fit did not converge.
    pub fwhm_hz: Option<f64>,
    pub dip_center_hz: Option<f64>,
}

/// Sweep around the resonance for each pulse count and fit a Gaussian to the
/// dip profile 1 - S(f)/baseline, reporting the FWHM.
///
/// Counts must be multiples of 4 so the toggling cycle closes.
pub fn linewidth_vs_pulses(
    sys: &SpinSystem,
    train: &PulseTrain,
    cfg: &SimConfig,
    pulse_counts: &[usize],
    grid_points: usize,
) -> Result<Vec<LinewidthPoint>> {
    for &n in pulse_counts {
        if n == 0 || n % 4 != 0 {
            return Err(Error::invalid(
                "pulse_counts",
                format!("{n} is not a positive multiple of 4"),
            ));
        }
    }
    let f_res = resonance_frequency(train);
    let mut out = Vec::with_capacity(pulse_counts.len());
    for &n in pulse_counts {
        // Fourier-limited width shrinks as 1/(N tau); the grid must cover the
        // coupling-dominated width too.
        let fourier = 1.0 / (n as f64 * train.tau);
        let half_span = (6.0 * fourier).max(6.0 * cfg.k_dd).min(0.85 * f_res);
        let m = grid_points.max(9);
        let freqs: Vec<f64> = (0..m)
            .map(|i| f_res - half_span + 2.0 * half_span * i as f64 / (m - 1) as f64)
            .collect();
        let duration = n as f64 * train.tau;
        let sweep = resonance_sweep(sys, train, cfg, &freqs, duration)?;
        let baseline = sweep
            .iter()
            .map(|p| p.integrated_signal)
            .fold(f64::MIN, f64::max);
        let dip: Vec<f64> = sweep
            .iter()
            .map(|p| 1.0 - p.integrated_signal / baseline)
            .collect();
        match fit_peak(&freqs, &dip, PeakShape::Gaussian) {
            Ok(fit) => out.push(LinewidthPoint {
                n_pulses: n,
                fwhm_hz: Some(fit.fwhm),
                dip_center_hz: Some(fit.center),
            }),
            Err(_) => out.push(LinewidthPoint {
                n_pulses: n,
                fwhm_hz: None,
                dip_center_hz: None,
            }),
        }
    }
    Ok(out)
}
