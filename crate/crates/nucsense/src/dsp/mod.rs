//! The acquisition-to-spectrum processing pipeline: raw-record synthesis and
//! extraction, decay/oscillation decomposition, harmonic spectra with
//! aliasing, short-time tracking, and lineshape fits.

pub mod fit;
pub mod record;
pub mod spectrum;

pub use fit::{fit_peak, PeakFit, PeakShape};
pub use record::{
    extract_trace, synthesize_compact, synthesize_raw, DecayModel, RawHeader, RawRecord,
    SynthesisConfig,
};
pub use spectrum::{
    alias_map, decompose, decompose_cutoff, decompose_points, harmonic_spectrum, stft_track,
    SpectralPeak, Spectrum, StftPoint,
};
