//! Raw induction records: per-window heterodyned samples, their binary
//! container, synthesis from rotating-frame trajectories, and the FFT-peak
//! extraction that turns windows back into a per-pulse trace.
//!
//! Container layout: magic `NSRW`, u32 LE header length, a JSON header
//! (sample_rate, f_het, tau, t_acq, n_windows, dtype), then the concatenated
//! float32 little-endian window payloads.

use std::f64::consts::TAU;
use std::io::{Read, Write};

use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trace::MagnetometerTrace;

pub const MAGIC: &[u8; 4] = b"NSRW";

/// Stretched-exponential decay envelope exp(-(t/T2')^stretch).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayModel {
    /// Rotating-frame lifetime T2' in seconds.
    pub t2_prime: f64,
    /// Stretch exponent, default 1/2.
    pub stretch: f64,
    /// Free induction decay time T2* in seconds; reference only.
    pub t2_star: f64,
}

impl DecayModel {
    pub fn new(t2_prime: f64, stretch: f64, t2_star: f64) -> Result<Self> {
        if !(t2_prime > 0.0) {
            return Err(Error::invalid("t2_prime", "must be positive"));
        }
        if !(stretch > 0.0 && stretch <= 2.0) {
            return Err(Error::invalid("stretch", "must lie in (0, 2]"));
        }
        Ok(Self {
            t2_prime,
            stretch,
            t2_star,
        })
    }

    /// The stretched-exponential envelope used throughout: exp(-(t/T2')^1/2)
    /// by default.
    pub fn envelope(&self, t: f64) -> f64 {
        (-(t / self.t2_prime).powf(self.stretch)).exp()
    }

    /// No decay (T2' effectively infinite).
    pub fn none() -> Self {
        Self {
            t2_prime: f64::MAX,
            stretch: 0.5,
            t2_star: f64::MAX,
        }
    }
}

/// Header of the binary container.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RawHeader {
    pub sample_rate: f64,
    pub f_het: f64,
    pub tau: f64,
    pub t_acq: f64,
    pub n_windows: usize,
    pub dtype: String,
}

/// Per-window sampled induction data.
#[derive(Debug, Clone, PartialEq)]
pub struct RawRecord {
    pub windows: Vec<Vec<f64>>,
    pub sample_rate: f64,
    pub f_het: f64,
    /// Window length in seconds (t_acq).
    pub window_len: f64,
    /// Window spacing in seconds (tau).
    pub window_period: f64,
}

impl RawRecord {
    pub fn samples_per_window(&self) -> usize {
        (self.window_len * self.sample_rate).round() as usize
    }

    /// Effective bandpass linewidth of the per-window FFT extraction, 1/t_acq.
    pub fn bandpass_linewidth(&self) -> f64 {
        1.0 / self.window_len
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let header = RawHeader {
            sample_rate: self.sample_rate,
            f_het: self.f_het,
            tau: self.window_period,
            t_acq: self.window_len,
            n_windows: self.windows.len(),
            dtype: "float32-le".into(),
        };
        let hjson = serde_json::to_vec(&header)?;
        let mut out = Vec::with_capacity(8 + hjson.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(hjson.len() as u32).to_le_bytes());
        out.extend_from_slice(&hjson);
        for w in &self.windows {
            for &v in w {
                out.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
        Ok(out)
    }

    /// Parse the container, reporting the byte offset of any malformation.
    pub fn from_bytes(data: &[u8]) -> Result<Self> {
        if data.len() < 4 || &data[..4] != MAGIC {
            return Err(Error::MalformedContainer {
                offset: 0,
                why: "missing NSRW magic".into(),
            });
        }
        if data.len() < 8 {
            return Err(Error::MalformedContainer {
                offset: 4,
                why: "truncated header length".into(),
            });
        }
        let hlen = u32::from_le_bytes([data[4], data[5], data[6], data[7]]) as usize;
        let header_end = 8usize.checked_add(hlen).ok_or(Error::MalformedContainer {
            offset: 4,
            why: "header length overflows".into(),
        })?;
        if data.len() < header_end {
            return Err(Error::MalformedContainer {
                offset: data.len(),
                why: format!("header claims {hlen} bytes, payload ends early"),
            });
        }
        let header: RawHeader =
            serde_json::from_slice(&data[8..header_end]).map_err(|e| Error::MalformedContainer {
                offset: 8,
                why: format!("bad JSON header: {e}"),
            })?;
        if header.dtype != "float32-le" {
            return Err(Error::MalformedContainer {
                offset: 8,
                why: format!("unsupported dtype {:?}", header.dtype),
            });
        }
        if !(header.sample_rate > 0.0 && header.t_acq > 0.0 && header.tau > 0.0) {
            return Err(Error::MalformedContainer {
                offset: 8,
                why: "non-positive sample_rate/tau/t_acq".into(),
            });
        }
        let spw = (header.t_acq * header.sample_rate).round() as usize;
        if spw == 0 || spw > 1 << 28 {
            return Err(Error::MalformedContainer {
                offset: 8,
                why: format!("implausible samples per window {spw}"),
            });
        }
        let expected = header
            .n_windows
            .checked_mul(spw)
            .and_then(|s| s.checked_mul(4))
            .ok_or(Error::MalformedContainer {
                offset: 8,
                why: "payload size overflows".into(),
            })?;
        let have = data.len() - header_end;
        if have != expected {
            return Err(Error::MalformedContainer {
                offset: header_end + have.min(expected),
                why: format!(
                    "payload holds {have} bytes, header implies {expected} ({} windows x {spw} samples x 4)",
                    header.n_windows
                ),
            });
        }
        let mut windows = Vec::with_capacity(header.n_windows);
        let mut pos = header_end;
        for _ in 0..header.n_windows {
            let mut w = Vec::with_capacity(spw);
            for _ in 0..spw {
                let b = [data[pos], data[pos + 1], data[pos + 2], data[pos + 3]];
                let v = f32::from_le_bytes(b);
                if !v.is_finite() {
                    return Err(Error::MalformedContainer {
                        offset: pos,
                        why: "non-finite sample".into(),
                    });
                }
                w.push(v as f64);
                pos += 4;
            }
            windows.push(w);
        }
        Ok(Self {
            windows,
            sample_rate: header.sample_rate,
            f_het: header.f_het,
            window_len: header.t_acq,
            window_period: header.tau,
        })
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(&self.to_bytes()?)?;
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut buf = Vec::new();
        r.read_to_end(&mut buf)?;
        Self::from_bytes(&buf)
    }
}

/// Synthesis parameters shared by both modes.
#[derive(Debug, Clone, Copy)]
pub struct SynthesisConfig {
    /// Heterodyne carrier in Hz (full-raw mode).
    pub f_het: f64,
    /// Sample rate in Hz (full-raw mode); must be >= 4 f_het.
    pub sample_rate: f64,
    pub decay: DecayModel,
    /// RMS of the additive white Gaussian noise per raw sample.
    pub noise_rms: f64,
    pub seed: u64,
}

impl Default for SynthesisConfig {
    fn default() -> Self {
        Self {
            f_het: 20.0e6,
            sample_rate: 100.0e6,
            decay: DecayModel::none(),
            noise_rms: 0.0,
            seed: 0,
        }
    }
}

/// Materialize full acquisition windows for a rotating-frame trajectory:
/// window j holds A_j cos(2 pi f_het t + phi_j) * envelope(j tau) + noise.
///
/// `transverse` supplies (m_x, m_y) at each pulse; `train_tau`/`t_acq` set the
/// window layout.
pub fn synthesize_raw(
    transverse: &[(f64, f64)],
    tau: f64,
    t_acq: f64,
    cfg: &SynthesisConfig,
) -> Result<RawRecord> {
    if cfg.sample_rate < 4.0 * cfg.f_het {
        return Err(Error::AliasingGuard {
            sample_rate: cfg.sample_rate,
            f_het: cfg.f_het,
        });
    }
    if !(t_acq > 0.0 && tau >= t_acq) {
        return Err(Error::invalid("t_acq", "need 0 < t_acq <= tau"));
    }
    let spw = (t_acq * cfg.sample_rate).round() as usize;
    let dt = 1.0 / cfg.sample_rate;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(cfg.seed);
    let normal = StandardNormal;
    let mut windows = Vec::with_capacity(transverse.len());
    for (j, &(mx, my)) in transverse.iter().enumerate() {
        let amp = (mx * mx + my * my).sqrt() * cfg.decay.envelope((j as f64 + 1.0) * tau);
        let phase = my.atan2(mx);
        let mut w = Vec::with_capacity(spw);
        for k in 0..spw {
            let t = k as f64 * dt;
            let mut v = amp * (TAU * cfg.f_het * t + phase).cos();
            if cfg.noise_rms > 0.0 {
                let g: f64 = normal.sample(&mut rng);
                v += cfg.noise_rms * g;
            }
            w.push(v);
        }
        windows.push(w);
    }
    Ok(RawRecord {
        windows,
        sample_rate: cfg.sample_rate,
        f_het: cfg.f_het,
        window_len: t_acq,
        window_period: tau,
    })
}

/// Compact mode: skip the raw samples and produce the extracted trace
/// directly, with per-point noise variance matched to what the full-raw
/// FFT-peak extraction would give (sigma * sqrt(2 / n_samples)).
pub fn synthesize_compact(
    transverse: &[(f64, f64)],
    tau: f64,
    t_acq: f64,
    cfg: &SynthesisConfig,
) -> Result<MagnetometerTrace> {
    if !(t_acq > 0.0 && tau >= t_acq) {
        return Err(Error::invalid("t_acq", "need 0 < t_acq <= tau"));
    }
    let spw = (t_acq * cfg.sample_rate).round() as usize;
    // Per-quadrature std of the extracted Fourier component of white noise:
    // sigma * sqrt(2 / n_samples).
    let sigma_point = cfg.noise_rms * (2.0 / spw as f64).sqrt();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(cfg.seed);
    let normal = StandardNormal;
    let s: Vec<f64> = transverse
        .iter()
        .enumerate()
        .map(|(j, &(mx, my))| {
            let amp = (mx * mx + my * my).sqrt() * cfg.decay.envelope((j as f64 + 1.0) * tau);
            if sigma_point > 0.0 {
                let g1: f64 = normal.sample(&mut rng);
                let g2: f64 = normal.sample(&mut rng);
                let re = amp + sigma_point * g1;
                let im = sigma_point * g2;
                (re * re + im * im).sqrt()
            } else {
                amp
            }
        })
        .collect();
    Ok(MagnetometerTrace::new(s, tau))
}

/// Per-window FFT-peak extraction: the magnitude of the discrete Fourier
/// component nearest f_het, one point per pulse.
pub fn extract_trace(raw: &RawRecord) -> Result<MagnetometerTrace> {
    if raw.windows.is_empty() {
        return Err(Error::invalid("raw", "no windows"));
    }
    let nyquist = raw.sample_rate / 2.0;
    if raw.f_het > nyquist || raw.f_het <= 0.0 {
        return Err(Error::CarrierOutOfBand {
            f_het: raw.f_het,
            nyquist,
        });
    }
    let n = raw.windows[0].len();
    // Bin nearest the carrier on the window's frequency grid k / t_acq.
    let bin = (raw.f_het * raw.window_len).round();
    let omega = TAU * bin / n as f64;
    let s: Vec<f64> = raw
        .windows
        .iter()
        .map(|w| {
            let (mut re, mut im) = (0.0, 0.0);
            for (k, &v) in w.iter().enumerate() {
                let (sn, cs) = (omega * k as f64).sin_cos();
                re += v * cs;
                im -= v * sn;
            }
            2.0 * (re * re + im * im).sqrt() / n as f64
        })
        .collect();
    Ok(MagnetometerTrace::new(s, raw.window_period))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat_transverse(n: usize) -> Vec<(f64, f64)> {
        vec![(1.0, 0.0); n]
    }

    #[test]
    fn container_round_trip() {
        let cfg = SynthesisConfig {
            f_het: 2.0e6,
            sample_rate: 10.0e6,
            ..Default::default()
        };
        let raw = synthesize_raw(&flat_transverse(8), 73e-6, 32e-6, &cfg).unwrap();
        let bytes = raw.to_bytes().unwrap();
        let back = RawRecord::from_bytes(&bytes).unwrap();
        assert_eq!(back.windows.len(), 8);
        assert_eq!(back.sample_rate, raw.sample_rate);
        // f32 storage: samples agree to f32 precision.
        for (a, b) in raw.windows[0].iter().zip(&back.windows[0]) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn truncated_container_reports_offset() {
        let cfg = SynthesisConfig {
            f_het: 2.0e6,
            sample_rate: 10.0e6,
            ..Default::default()
        };
        let raw = synthesize_raw(&flat_transverse(4), 73e-6, 32e-6, &cfg).unwrap();
        let bytes = raw.to_bytes().unwrap();
        let cut = bytes.len() - 10;
        match RawRecord::from_bytes(&bytes[..cut]) {
            Err(Error::MalformedContainer { offset, .. }) => {
                assert!(offset > 8, "offset {offset}");
            }
            other => panic!("expected MalformedContainer, got {other:?}"),
        }
        assert!(matches!(
            RawRecord::from_bytes(b"JUNKJUNKJUNK"),
            Err(Error::MalformedContainer { offset: 0, .. })
        ));
    }

    #[test]
    fn aliasing_guard_trips() {
        let cfg = SynthesisConfig {
            f_het: 20.0e6,
            sample_rate: 50.0e6,
            ..Default::default()
        };
        assert!(matches!(
            synthesize_raw(&flat_transverse(2), 73e-6, 32e-6, &cfg),
            Err(Error::AliasingGuard { .. })
        ));
    }

    #[test]
    fn pure_carrier_extracts_unit_amplitude() {
        let cfg = SynthesisConfig {
            f_het: 20.0e6,
            sample_rate: 100.0e6,
            ..Default::default()
        };
        let raw = synthesize_raw(&flat_transverse(6), 73e-6, 32e-6, &cfg).unwrap();
        assert!((raw.bandpass_linewidth() - 31_250.0).abs() < 1.0);
        let trace = extract_trace(&raw).unwrap();
        for &s in &trace.s {
            assert!((s - 1.0).abs() < 1e-9, "{s}");
        }
    }

    #[test]
    fn amplitude_modulation_round_trips() {
        let tau = 73e-6;
        let n = 500;
        let f_mod = 2760.0;
        let transverse: Vec<(f64, f64)> = (0..n)
            .map(|j| {
                let t = (j as f64 + 1.0) * tau;
                let a = 1.0 + 0.3 * (TAU * f_mod * t).sin();
                (a, 0.0)
            })
            .collect();
        let cfg = SynthesisConfig {
            f_het: 20.0e6,
            sample_rate: 100.0e6,
            ..Default::default()
        };
        let raw = synthesize_raw(&transverse, tau, 32e-6, &cfg).unwrap();
        let trace = extract_trace(&raw).unwrap();
        for (j, &s) in trace.s.iter().enumerate() {
            let t = (j as f64 + 1.0) * tau;
            let expect = 1.0 + 0.3 * (TAU * f_mod * t).sin();
            assert!((s - expect).abs() < 1e-3, "j={j}: {s} vs {expect}");
        }
    }

    #[test]
    fn decay_recovered_by_fit() {
        // Synthesize decay-only windows and fit the stretched exponential by
        // linearizing: ln S = -(t/T2')^(1/2).
        let tau = 73e-6;
        let t2 = 31.0;
        let decay = DecayModel::new(t2, 0.5, 2e-3).unwrap();
        let n = 2000;
        let cfg = SynthesisConfig {
            f_het: 20.0e6,
            sample_rate: 100.0e6,
            decay,
            ..Default::default()
        };
        // Spread pulses out so the envelope actually falls: tau of 10 ms.
        let tau_long = 10e-3;
        let raw = synthesize_raw(&flat_transverse(n), tau_long, 32e-6, &cfg).unwrap();
        let trace = extract_trace(&raw).unwrap();
        let _ = tau;
        // Least squares on sqrt(t): ln S = -sqrt(t)/sqrt(T2')
        let (mut num, mut den) = (0.0, 0.0);
        for (j, &s) in trace.s.iter().enumerate() {
            let t = (j as f64 + 1.0) * tau_long;
            let xs = t.sqrt();
            num += xs * (-s.ln());
            den += xs * xs;
        }
        let slope = num / den; // = 1/sqrt(T2')
        let t2_fit = 1.0 / (slope * slope);
        assert!((t2_fit - t2).abs() / t2 < 0.02, "T2' fit {t2_fit}");
    }

    #[test]
    fn off_carrier_leakage_is_bounded() {
        // Carrier 100 kHz off the extraction bin: rectangular-window leakage.
        let tau = 73e-6;
        let t_acq = 32e-6;
        let cfg = SynthesisConfig {
            f_het: 20.0e6 + 100.0e3,
            sample_rate: 100.0e6,
            ..Default::default()
        };
        let mut raw = synthesize_raw(&flat_transverse(4), tau, t_acq, &cfg).unwrap();
        raw.f_het = 20.0e6; // extract at the nominal carrier
        let trace = extract_trace(&raw).unwrap();
        // Oracle: |sin(pi d)| / (n |sin(pi d / n)|) for d = offset in bins.
        let n = (t_acq * cfg.sample_rate).round();
        let d = 100.0e3 * t_acq; // 3.2 bins
        let dirichlet = (std::f64::consts::PI * d).sin().abs()
            / (n * (std::f64::consts::PI * d / n).sin().abs());
        for &s in &trace.s {
            assert!(s < 1.5 * dirichlet, "leakage {s} vs bound {dirichlet}");
            assert!(s < 0.08);
        }
    }

    #[test]
    fn compact_mode_matches_full_raw_statistics() {
        let tau = 73e-6;
        let t_acq = 32e-6;
        let n = 400;
        let cfg = SynthesisConfig {
            f_het: 20.0e6,
            sample_rate: 100.0e6,
            noise_rms: 0.5,
            seed: 3,
            ..Default::default()
        };
        let raw = synthesize_raw(&flat_transverse(n), tau, t_acq, &cfg).unwrap();
        let full = extract_trace(&raw).unwrap();
        let compact = synthesize_compact(&flat_transverse(n), tau, t_acq, &cfg).unwrap();
        let var = |v: &[f64]| {
            let m = v.iter().sum::<f64>() / v.len() as f64;
            v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64
        };
        let (vf, vc) = (var(&full.s), var(&compact.s));
        assert!(
            (vf / vc).ln().abs() < 0.5_f64,
            "variance mismatch: full {vf:.3e} vs compact {vc:.3e}"
        );
    }
}
