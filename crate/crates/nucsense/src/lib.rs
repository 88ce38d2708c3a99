//! Pulsed spin-lock nuclear magnetometry at desk scale.
//!
//! The crate simulates small dipolar-coupled spin networks under flip-angle
//! pulse trains with AC drive fields, three ways:
//!
//! - [`quantum`]: exact piecewise-constant propagators over switching events;
//! - [`aht`]: zeroth-order average Hamiltonians from toggling-frame phasors;
//! - [`bloch`]: single-spin finite-element Bloch integration plus resonant
//!   and off-resonant closed forms.
//!
//! [`dsp`] carries the acquisition pipeline (raw-record synthesis, FFT-peak
//! extraction, decay/oscillation split, harmonic spectra, aliasing, short-time
//! tracking, lineshape fits) and [`experiments`] scripts the full studies:
//! resonance sweeps, linewidth scaling, harmonic intensity laws, duty-cycle
//! redistribution, chirp response, and sensitivity extrapolation.

pub mod aht;
pub mod bloch;
pub mod dsp;
pub mod error;
pub mod experiments;
pub mod operator;
pub mod quantum;
pub mod spin;
pub mod trace;
pub mod util;

pub use error::{Error, Result};
pub use operator::{Axis, OperatorMatrix};
pub use spin::{
    collective_operator, dipolar_hamiltonian, magnus_parameter, resonance_frequency,
    sensor_bandwidth, waveform_value, DriveField, PulseTrain, SpinSystem, Waveform,
};
pub use trace::MagnetometerTrace;
