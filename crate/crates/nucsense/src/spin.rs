//! Domain types for spin networks, pulse trains, and drive waveforms, plus the
//! operator constructors shared by every simulation engine.

use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator::{Axis, OperatorMatrix};

/// Largest supported network; 2^10 keeps propagator sweeps desk-scale.
pub const MAX_SPINS: usize = 10;

/// Flip angles within this distance of pi are rejected: the sequence does not
/// spin-lock there.
pub const THETA_PI_EXCLUSION: f64 = 1e-6;

/// A network of spin-1/2 nuclei with pairwise secular dipolar couplings.
///
/// Couplings are stored in Hz for ordered pairs `(k, l)` with `k < l`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpinSystem {
    n_spins: usize,
    couplings: BTreeMap<(usize, usize), f64>,
    /// Gyromagnetic ratio, Hz per tesla.
    pub gamma_n: f64,
    /// Initial polarization, dimensionless in (0, 1].
    pub epsilon: f64,
}

impl SpinSystem {
    pub fn new(
        n_spins: usize,
        couplings: BTreeMap<(usize, usize), f64>,
        gamma_n: f64,
        epsilon: f64,
    ) -> Result<Self> {
        if n_spins < 1 {
            return Err(Error::invalid("n_spins", "must be at least 1"));
        }
        if !(gamma_n > 0.0 && gamma_n.is_finite()) {
            return Err(Error::invalid("gamma_n", format!("{gamma_n} must be > 0")));
        }
        if !(epsilon > 0.0 && epsilon <= 1.0) {
            return Err(Error::invalid(
                "epsilon",
                format!("{epsilon} must lie in (0, 1]"),
            ));
        }
        for (&(k, l), &b) in &couplings {
            if k >= l || l >= n_spins {
                return Err(Error::invalid(
                    "couplings",
                    format!("pair ({k}, {l}) must satisfy k < l < n_spins"),
                ));
            }
            if !b.is_finite() {
                return Err(Error::invalid("couplings", format!("b[{k},{l}] not finite")));
            }
        }
        Ok(Self {
            n_spins,
            couplings,
            gamma_n,
            epsilon,
        })
    }

    /// A single spin with no couplings.
    pub fn single(gamma_n: f64, epsilon: f64) -> Result<Self> {
        Self::new(1, BTreeMap::new(), gamma_n, epsilon)
    }

    pub fn n_spins(&self) -> usize {
        self.n_spins
    }

    pub fn dim(&self) -> usize {
        1 << self.n_spins
    }

    pub fn couplings(&self) -> &BTreeMap<(usize, usize), f64> {
        &self.couplings
    }

    /// Median |b_kl| over stored pairs; zero when there are none.
    pub fn median_coupling(&self) -> f64 {
        if self.couplings.is_empty() {
            return 0.0;
        }
        let mut mags: Vec<f64> = self.couplings.values().map(|b| b.abs()).collect();
        mags.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = mags.len();
        if n % 2 == 1 {
            mags[n / 2]
        } else {
            0.5 * (mags[n / 2 - 1] + mags[n / 2])
        }
    }

    /// Draw a random network: positions uniform in a unit cube with a
    /// hard-core exclusion radius (nuclei sit on a lattice and cannot
    /// overlap), couplings with r^-3 dipolar scaling rescaled so the median
    /// |b_kl| equals `median_j`.
    pub fn random_network(
        n_spins: usize,
        median_j: f64,
        gamma_n: f64,
        epsilon: f64,
        seed: u64,
    ) -> Result<Self> {
        if n_spins < 2 {
            return Err(Error::EmptySystem {
                needed: 2,
                got: n_spins,
            });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let min_sep = 0.2f64;
        let mut pos: Vec<[f64; 3]> = Vec::with_capacity(n_spins);
        let mut attempts = 0usize;
        while pos.len() < n_spins {
            let cand = [rng.random::<f64>(), rng.random::<f64>(), rng.random::<f64>()];
            let ok = pos.iter().all(|p| {
                let d2: f64 = (0..3).map(|a| (p[a] - cand[a]).powi(2)).sum();
                d2 >= min_sep * min_sep
            });
            if ok {
                pos.push(cand);
            }
            attempts += 1;
            if attempts > 100_000 {
                return Err(Error::invalid(
                    "n_spins",
                    "could not place spins with the exclusion radius",
                ));
            }
        }
        let mut couplings = BTreeMap::new();
        for k in 0..n_spins {
            for l in (k + 1)..n_spins {
                let d2: f64 = (0..3).map(|a| (pos[k][a] - pos[l][a]).powi(2)).sum();
                // Angular factor (3 cos^2 beta - 1)/2 of the internuclear axis
                // against z.
                let cos_b2 = (pos[k][2] - pos[l][2]).powi(2) / d2;
                let ang = 0.5 * (3.0 * cos_b2 - 1.0);
                couplings.insert((k, l), ang / d2.powf(1.5));
            }
        }
        let mut sys = Self::new(n_spins, couplings, gamma_n, epsilon)?;
        let med = sys.median_coupling();
        if med > 0.0 {
            let scale = median_j / med;
            for b in sys.couplings.values_mut() {
                *b *= scale;
            }
        }
        Ok(sys)
    }
}

/// The flip-angle pulse train: `n_pulses` rotations by `theta` about x,
/// spaced `tau` apart, each of width `t_p`, with an acquisition window
/// `t_acq` in between.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PulseTrain {
    /// Flip angle in radians, in (0, 2pi) excluding pi.
    pub theta: f64,
    /// Interpulse period in seconds.
    pub tau: f64,
    /// Pulse width in seconds (zero in delta-pulse treatments).
    pub t_p: f64,
    /// Acquisition window in seconds.
    pub t_acq: f64,
    /// Number of pulses.
    pub n_pulses: usize,
}

impl PulseTrain {
    pub fn new(theta: f64, tau: f64, t_p: f64, t_acq: f64, n_pulses: usize) -> Result<Self> {
        if !(theta > 0.0 && theta < TAU) {
            return Err(Error::invalid(
                "theta",
                format!("{theta} rad must lie in (0, 2pi)"),
            ));
        }
        if (theta - PI).abs() < THETA_PI_EXCLUSION {
            return Err(Error::invalid(
                "theta",
                format!("{theta} rad is within {THETA_PI_EXCLUSION} of pi, where the sequence fails"),
            ));
        }
        if !(tau > 0.0) {
            return Err(Error::invalid("tau", "must be positive"));
        }
        if t_p < 0.0 || t_acq < 0.0 || t_p + t_acq > tau * (1.0 + 1e-12) {
            return Err(Error::invalid(
                "t_p/t_acq",
                format!("need t_p + t_acq <= tau, got {} + {} > {}", t_p, t_acq, tau),
            ));
        }
        if n_pulses < 1 {
            return Err(Error::invalid("n_pulses", "must be at least 1"));
        }
        Ok(Self {
            theta,
            tau,
            t_p,
            t_acq,
            n_pulses,
        })
    }

    /// Delta-pulse train: zero pulse width, acquisition filling the period.
    pub fn delta(theta: f64, tau: f64, n_pulses: usize) -> Result<Self> {
        Self::new(theta, tau, 0.0, tau, n_pulses)
    }

    pub fn duration(&self) -> f64 {
        self.n_pulses as f64 * self.tau
    }

    /// Pulse duty cycle t_p / tau.
    pub fn duty_cycle(&self) -> f64 {
        self.t_p / self.tau
    }
}

/// Drive waveform shape; the amplitude lives on [`DriveField`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Waveform {
    Dc,
    Sine { frequency: f64, phase: f64 },
    Square { frequency: f64, phase: f64 },
    Chirp {
        f_ini: f64,
        /// Swept span in Hz.
        span: f64,
        /// Sweep duration in seconds.
        duration: f64,
        phase: f64,
    },
}

/// The applied AC (or DC) field along z.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriveField {
    /// Amplitude in tesla.
    pub amplitude: f64,
    pub waveform: Waveform,
}

impl DriveField {
    pub fn new(amplitude: f64, waveform: Waveform) -> Result<Self> {
        if !(amplitude >= 0.0 && amplitude.is_finite()) {
            return Err(Error::invalid("amplitude", "must be finite and >= 0"));
        }
        match waveform {
            Waveform::Sine { frequency, .. } | Waveform::Square { frequency, .. } => {
                if !(frequency > 0.0) {
                    return Err(Error::invalid("frequency", "must be > 0 for AC drives"));
                }
            }
            Waveform::Chirp { span, duration, .. } => {
                if !(span > 0.0) {
                    return Err(Error::invalid("span", "chirp span must be > 0"));
                }
                if !(duration > 0.0) {
                    return Err(Error::invalid("duration", "chirp duration must be > 0"));
                }
            }
            Waveform::Dc => {}
        }
        Ok(Self { amplitude, waveform })
    }

    pub fn dc(amplitude: f64) -> Result<Self> {
        Self::new(amplitude, Waveform::Dc)
    }

    pub fn sine(amplitude: f64, frequency: f64, phase: f64) -> Result<Self> {
        Self::new(amplitude, Waveform::Sine { frequency, phase })
    }

    pub fn square(amplitude: f64, frequency: f64, phase: f64) -> Result<Self> {
        Self::new(amplitude, Waveform::Square { frequency, phase })
    }

    pub fn chirp(amplitude: f64, f_ini: f64, span: f64, duration: f64, phase: f64) -> Result<Self> {
        Self::new(
            amplitude,
            Waveform::Chirp {
                f_ini,
                span,
                duration,
                phase,
            },
        )
    }

    /// Accumulated waveform phase argument at time t (radians), for the
    /// oscillatory kinds. The chirp holds its final frequency past `duration`.
    fn phase_arg(&self, t: f64) -> f64 {
        match self.waveform {
            Waveform::Dc => 0.0,
            Waveform::Sine { frequency, phase } | Waveform::Square { frequency, phase } => {
                TAU * frequency * t + phase
            }
            Waveform::Chirp {
                f_ini,
                span,
                duration,
                phase,
            } => {
                if t <= duration {
                    TAU * (f_ini * t + 0.5 * span / duration * t * t) + phase
                } else {
                    let end = TAU * (f_ini * duration + 0.5 * span * duration);
                    end + TAU * (f_ini + span) * (t - duration) + phase
                }
            }
        }
    }

    /// Instantaneous frequency of the waveform at time t, in Hz.
    pub fn instantaneous_frequency(&self, t: f64) -> f64 {
        match self.waveform {
            Waveform::Dc => 0.0,
            Waveform::Sine { frequency, .. } | Waveform::Square { frequency, .. } => frequency,
            Waveform::Chirp {
                f_ini,
                span,
                duration,
                ..
            } => {
                if t <= duration {
                    f_ini + span / duration * t
                } else {
                    f_ini + span
                }
            }
        }
    }

    /// Field value B(t) in tesla. Errors on negative t.
    pub fn value(&self, t: f64) -> Result<f64> {
        if t < 0.0 {
            return Err(Error::Domain(format!("waveform time t = {t} < 0")));
        }
        let v = match self.waveform {
            Waveform::Dc => 1.0,
            Waveform::Sine { .. } | Waveform::Chirp { .. } => self.phase_arg(t).cos(),
            Waveform::Square { .. } => sign_nonzero(self.phase_arg(t).cos()),
        };
        Ok(self.amplitude * v)
    }

    /// Exact time integral of B(t) over [t0, t1], in tesla-seconds.
    ///
    /// Used by the propagator engine: the drive commutes with the secular
    /// dipolar term, so only this integral enters each interval propagator.
    pub fn integral(&self, t0: f64, t1: f64) -> Result<f64> {
        if t0 < 0.0 || t1 < t0 {
            return Err(Error::Domain(format!("bad integration range [{t0}, {t1}]")));
        }
        let v = match self.waveform {
            Waveform::Dc => t1 - t0,
            Waveform::Sine { frequency, .. } => {
                (self.phase_arg(t1).sin() - self.phase_arg(t0).sin()) / (TAU * frequency)
            }
            Waveform::Square { frequency, .. } => {
                // Piecewise-constant: split at the sign flips of cos.
                let mut acc = 0.0;
                let mut t = t0;
                loop {
                    let next = match next_square_flip(frequency, self.phase_arg(0.0), t) {
                        Some(f) if f < t1 => f,
                        _ => t1,
                    };
                    let mid = 0.5 * (t + next);
                    acc += sign_nonzero(self.phase_arg(mid).cos()) * (next - t);
                    if next >= t1 {
                        break;
                    }
                    t = next;
                }
                acc
            }
            Waveform::Chirp { .. } => {
                // No elementary antiderivative (Fresnel); adaptive midpoint
                // refinement, exact enough for the bloch engine's use.
                let mut n = 16usize;
                let mut prev = chirp_quad(self, t0, t1, n);
                loop {
                    n *= 2;
                    let cur = chirp_quad(self, t0, t1, n);
                    if (cur - prev).abs() <= 1e-14 * (1.0 + cur.abs()) || n >= 1 << 20 {
                        return Ok(self.amplitude * cur);
                    }
                    prev = cur;
                }
            }
        };
        Ok(match self.waveform {
            Waveform::Chirp { .. } => unreachable!(),
            _ => self.amplitude * v,
        })
    }

    /// Sign-flip instants of a square waveform in (t0, t1), sorted.
    pub fn square_flips(&self, t0: f64, t1: f64) -> Vec<f64> {
        let Waveform::Square { frequency, phase } = self.waveform else {
            return Vec::new();
        };
        let mut flips = Vec::new();
        // Zeros of cos(2 pi f t + phase): t = (pi/2 + k pi - phase) / (2 pi f)
        let mut k = ((TAU * frequency * t0 + phase) / PI - 0.5).ceil();
        loop {
            let t = (0.5 + k) * PI / (TAU * frequency) - phase / (TAU * frequency);
            if t >= t1 {
                break;
            }
            if t > t0 {
                flips.push(t);
            }
            k += 1.0;
        }
        flips
    }
}

fn sign_nonzero(x: f64) -> f64 {
    if x >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

fn next_square_flip(frequency: f64, phase: f64, after: f64) -> Option<f64> {
    let k = ((TAU * frequency * after + phase) / PI - 0.5).ceil();
    let t = (0.5 + k) * PI / (TAU * frequency) - phase / (TAU * frequency);
    let t = if t <= after {
        (0.5 + k + 1.0) * PI / (TAU * frequency) - phase / (TAU * frequency)
    } else {
        t
    };
    (t > after).then_some(t)
}

fn chirp_quad(field: &DriveField, t0: f64, t1: f64, n: usize) -> f64 {
    let dt = (t1 - t0) / n as f64;
    (0..n)
        .map(|i| {
            let tm = t0 + (i as f64 + 0.5) * dt;
            field.phase_arg(tm).cos() * dt
        })
        .sum()
}

/// Collective spin operator sum_k I_{k,axis} embedded in the 2^N space.
pub fn collective_operator(sys: &SpinSystem, axis: Axis) -> Result<OperatorMatrix> {
    if sys.n_spins() > MAX_SPINS {
        return Err(Error::DimensionGuard {
            n_spins: sys.n_spins(),
            limit: MAX_SPINS,
        });
    }
    let single = OperatorMatrix::pauli_half(axis);
    let mut total = OperatorMatrix::zeros(sys.dim());
    for k in 0..sys.n_spins() {
        total = total.add(&embed_single(sys.n_spins(), k, &single));
    }
    Ok(total)
}

/// Single-site operator on spin `site` tensor-padded with identities.
pub fn embed_single(n_spins: usize, site: usize, op: &OperatorMatrix) -> OperatorMatrix {
    let mut acc = OperatorMatrix::identity(1);
    for k in 0..n_spins {
        let factor = if k == site {
            op.clone()
        } else {
            OperatorMatrix::identity(2)
        };
        acc = acc.kron(&factor);
    }
    acc
}

/// Two-site product operator A_k B_l padded with identities.
pub fn embed_pair(
    n_spins: usize,
    k: usize,
    a: &OperatorMatrix,
    l: usize,
    b: &OperatorMatrix,
) -> OperatorMatrix {
    embed_single(n_spins, k, a).mul(&embed_single(n_spins, l, b))
}

/// Secular dipolar Hamiltonian sum_{k<l} b_kl (3 I_kz I_lz - I_k . I_l), Hz.
pub fn dipolar_hamiltonian(sys: &SpinSystem) -> Result<OperatorMatrix> {
    if sys.n_spins() < 2 {
        return Err(Error::EmptySystem {
            needed: 2,
            got: sys.n_spins(),
        });
    }
    if sys.n_spins() > MAX_SPINS {
        return Err(Error::DimensionGuard {
            n_spins: sys.n_spins(),
            limit: MAX_SPINS,
        });
    }
    let n = sys.n_spins();
    let (ix, iy, iz) = (
        OperatorMatrix::pauli_half(Axis::X),
        OperatorMatrix::pauli_half(Axis::Y),
        OperatorMatrix::pauli_half(Axis::Z),
    );
    let mut h = OperatorMatrix::zeros(sys.dim());
    for (&(k, l), &b) in sys.couplings() {
        let zz = embed_pair(n, k, &iz, l, &iz);
        let dot = embed_pair(n, k, &ix, l, &ix)
            .add(&embed_pair(n, k, &iy, l, &iy))
            .add(&zz);
        h = h.add(&zz.scale(3.0 * b).sub(&dot.scale(b)));
    }
    Ok(h)
}

/// Value of the drive waveform at time t (tesla). Thin wrapper kept for the
/// operation-level API; see [`DriveField::value`].
pub fn waveform_value(field: &DriveField, t: f64) -> Result<f64> {
    field.value(t)
}

/// Resonance condition f_res = theta / (2 pi tau).
pub fn resonance_frequency(train: &PulseTrain) -> f64 {
    train.theta / (TAU * train.tau)
}

/// Sensor bandwidth B = 1 / (2 tau), the Nyquist band of the stroboscopic trace.
pub fn sensor_bandwidth(train: &PulseTrain) -> f64 {
    1.0 / (2.0 * train.tau)
}

/// Magnus expansion parameter zeta = 2 pi J tau with J the median coupling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MagnusParameter {
    pub zeta: f64,
    /// Set when zeta >= 0.5: the leading-order average is suspect.
    pub beyond_validity: bool,
}

pub fn magnus_parameter(sys: &SpinSystem, train: &PulseTrain) -> Result<MagnusParameter> {
    if sys.n_spins() < 2 {
        return Err(Error::EmptySystem {
            needed: 2,
            got: sys.n_spins(),
        });
    }
    let zeta = TAU * sys.median_coupling() * train.tau;
    Ok(MagnusParameter {
        zeta,
        beyond_validity: zeta >= 0.5,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_spin(b: f64) -> SpinSystem {
        let mut c = BTreeMap::new();
        c.insert((0, 1), b);
        SpinSystem::new(2, c, 10.705e6, 0.002).unwrap()
    }

    #[test]
    fn collective_z_single_spin() {
        let sys = SpinSystem::single(10.705e6, 0.002).unwrap();
        let z = collective_operator(&sys, Axis::Z).unwrap();
        assert_eq!(z.matrix()[(0, 0)].re, 0.5);
        assert_eq!(z.matrix()[(1, 1)].re, -0.5);
    }

    #[test]
    fn collective_x_two_spins_spectrum() {
        let sys = two_spin(1.0);
        let x = collective_operator(&sys, Axis::X).unwrap();
        assert!(x.trace().norm() < 1e-14);
        let mut eigs = x.eigh().unwrap().eigenvalues;
        eigs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let expect = [-1.0, 0.0, 0.0, 1.0];
        for (e, x) in eigs.iter().zip(expect) {
            assert!((e - x).abs() < 1e-12, "got {eigs:?}");
        }
    }

    #[test]
    fn su2_commutation_up_to_six_spins() {
        for n in 1..=6 {
            let c: BTreeMap<(usize, usize), f64> =
                (1..n).map(|l| ((0, l), 100.0)).collect();
            let sys = SpinSystem::new(n, c, 10.705e6, 0.002).unwrap();
            let ix = collective_operator(&sys, Axis::X).unwrap();
            let iy = collective_operator(&sys, Axis::Y).unwrap();
            let iz = collective_operator(&sys, Axis::Z).unwrap();
            // [Ix, Iy] = i Iz
            let lhs = ix.commutator(&iy);
            let rhs = iz.scale(1.0).matrix().map(|v| v * num_complex::Complex64::i());
            let defect = lhs
                .sub(&OperatorMatrix::from_matrix(rhs))
                .max_abs();
            assert!(defect < 1e-12, "n = {n}: defect {defect:.2e}");
        }
    }

    #[test]
    fn dimension_guard_enforced() {
        let c: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        let sys = SpinSystem::new(11, c, 1.0, 0.5).unwrap();
        assert!(matches!(
            collective_operator(&sys, Axis::Z),
            Err(Error::DimensionGuard { .. })
        ));
    }

    #[test]
    fn dipolar_two_spin_eigenvalues() {
        // Oracle: diagonalize the 4x4 of 1 Hz * (3 IzIz - I.I) directly.
        let sys = two_spin(1.0);
        let h = dipolar_hamiltonian(&sys).unwrap();
        assert!(h.is_hermitian());
        assert!(h.trace().norm() < 1e-14);
        let mut eigs = h.eigh().unwrap().eigenvalues;
        eigs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let expect = [-1.0, 0.0, 0.5, 0.5];
        for (e, x) in eigs.iter().zip(expect) {
            assert!((e - x).abs() < 1e-12, "got {eigs:?}");
        }
    }

    #[test]
    fn dipolar_commutes_with_collective_z() {
        let sys = SpinSystem::random_network(4, 663.0, 10.705e6, 0.002, 7).unwrap();
        let h = dipolar_hamiltonian(&sys).unwrap();
        let iz = collective_operator(&sys, Axis::Z).unwrap();
        assert!(h.commutator(&iz).max_abs() < 1e-12);
    }

    #[test]
    fn dipolar_zero_couplings_is_zero() {
        let sys = two_spin(0.0);
        let h = dipolar_hamiltonian(&sys).unwrap();
        assert_eq!(h.max_abs(), 0.0);
    }

    #[test]
    fn waveform_trivia() {
        let sine = DriveField::sine(1.0, 1.0, 0.0).unwrap();
        assert!(sine.value(0.25).unwrap().abs() < 1e-15);
        let square = DriveField::square(1.0, 1.0, 0.0).unwrap();
        assert_eq!(square.value(0.1).unwrap(), 1.0);
        assert!(square.value(-1.0).is_err());
    }

    #[test]
    fn chirp_instantaneous_frequency_midsweep() {
        let chirp = DriveField::chirp(1.0, 1000.0, 3000.0, 20.0, 0.0).unwrap();
        assert!((chirp.instantaneous_frequency(10.0) - 2500.0).abs() < 1e-9);
        // Holds final frequency past the sweep.
        assert!((chirp.instantaneous_frequency(25.0) - 4000.0).abs() < 1e-9);
    }

    #[test]
    fn chirp_frequency_from_phase_differences() {
        let chirp = DriveField::chirp(1.0, 1000.0, 3000.0, 20.0, 0.3).unwrap();
        for &t in &[0.5, 5.0, 12.0, 19.5] {
            let dt = 1e-7;
            let dphi = chirp.phase_arg(t + dt) - chirp.phase_arg(t - dt);
            let f_num = dphi / (2.0 * dt) / TAU;
            let f_true = chirp.instantaneous_frequency(t);
            assert!(
                (f_num - f_true).abs() / f_true < 1e-3,
                "t = {t}: {f_num} vs {f_true}"
            );
        }
    }

    #[test]
    fn square_integral_matches_flip_accounting() {
        let square = DriveField::square(2.0, 137.0, 0.7).unwrap();
        // Compare against brute-force quadrature.
        let n = 400_000;
        let (t0, t1) = (0.0123, 0.0456);
        let dt = (t1 - t0) / n as f64;
        let brute: f64 = (0..n)
            .map(|i| square.value(t0 + (i as f64 + 0.5) * dt).unwrap() * dt)
            .sum();
        let exact = square.integral(t0, t1).unwrap();
        assert!((brute - exact).abs() < 1e-6, "{brute} vs {exact}");
    }

    #[test]
    fn resonance_and_bandwidth_numbers() {
        let train = PulseTrain::delta(PI / 2.0, 73e-6, 100).unwrap();
        assert!((resonance_frequency(&train) - 3424.657534).abs() < 1e-4);
        assert!((sensor_bandwidth(&train) - 6849.315068).abs() < 1e-4);
        let train2 = PulseTrain::delta(PI / 2.0, 86.6e-6, 100).unwrap();
        assert!((resonance_frequency(&train2) - 2886.0).abs() < 1.0);
        // Linear in theta: pi/3 gives 2/3 of the pi/2 value.
        let t3 = PulseTrain::delta(PI / 3.0, 73e-6, 100).unwrap();
        assert!(
            (resonance_frequency(&t3) / resonance_frequency(&train) - 2.0 / 3.0).abs() < 1e-12
        );
        // Doubling tau halves the bandwidth.
        let t4 = PulseTrain::delta(PI / 2.0, 146e-6, 100).unwrap();
        assert!((sensor_bandwidth(&t4) * 2.0 - sensor_bandwidth(&train)).abs() < 1e-9);
    }

    #[test]
    fn magnus_parameter_values() {
        let mut c = BTreeMap::new();
        c.insert((0, 1), 663.0);
        let sys = SpinSystem::new(2, c, 10.705e6, 0.002).unwrap();
        let train = PulseTrain::delta(PI / 2.0, 73e-6, 100).unwrap();
        let z = magnus_parameter(&sys, &train).unwrap();
        assert!((z.zeta - 0.30405).abs() < 1e-4);
        assert!(!z.beyond_validity);
        // Scales linearly with tau.
        let train2 = PulseTrain::delta(PI / 2.0, 146e-6, 100).unwrap();
        let z2 = magnus_parameter(&sys, &train2).unwrap();
        assert!((z2.zeta / z.zeta - 2.0).abs() < 1e-12);
        let sys0 = two_spin_zero();
        assert_eq!(magnus_parameter(&sys0, &train).unwrap().zeta, 0.0);
    }

    fn two_spin_zero() -> SpinSystem {
        let mut c = BTreeMap::new();
        c.insert((0, 1), 0.0);
        SpinSystem::new(2, c, 10.705e6, 0.002).unwrap()
    }

    #[test]
    fn theta_pi_rejected() {
        assert!(PulseTrain::delta(PI, 73e-6, 10).is_err());
        assert!(PulseTrain::delta(PI + 5e-7, 73e-6, 10).is_err());
        assert!(PulseTrain::delta(PI + 1e-3, 73e-6, 10).is_ok());
    }

    #[test]
    fn random_network_is_reproducible_and_normalized() {
        let a = SpinSystem::random_network(5, 663.0, 10.705e6, 0.002, 42).unwrap();
        let b = SpinSystem::random_network(5, 663.0, 10.705e6, 0.002, 42).unwrap();
        assert_eq!(a.couplings(), b.couplings());
        assert!((a.median_coupling() - 663.0).abs() < 1e-9);
        let c = SpinSystem::random_network(5, 663.0, 10.705e6, 0.002, 43).unwrap();
        assert_ne!(a.couplings(), c.couplings());
    }
}
