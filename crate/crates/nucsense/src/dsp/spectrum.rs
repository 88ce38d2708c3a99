//! Magnitude spectra of stroboscopic traces, interpolated peak extraction,
//! alias folding, and short-time Fourier tracking.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use rustfft::FftPlanner;
use serde::Serialize;

use crate::dsp::fit::{fit_peak, PeakFit, PeakShape};
use crate::error::{Error, Result};

/// One-sided magnitude spectrum of a real trace sampled every tau seconds.
///
/// Magnitudes are amplitude-normalized: a unit sinusoid on a bin yields a
/// peak of 1. `resolution` is the bin spacing 1/(N tau); frequencies run to
/// the stroboscopic bandwidth 1/(2 tau).
#[derive(Debug, Clone, Serialize)]
pub struct Spectrum {
    pub freqs: Vec<f64>,
    pub mags: Vec<f64>,
    pub resolution: f64,
    /// Nyquist band edge 1/(2 tau).
    pub bandwidth: f64,
    /// Sum |x_n|^2 of the input, retained for Parseval checks.
    signal_energy: f64,
    /// Two-sided |X_k|^2 sum scaled to the time domain.
    spectral_energy: f64,
}

/// An interpolated spectral peak.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SpectralPeak {
    pub frequency: f64,
    pub magnitude: f64,
    pub bin: usize,
}

impl Spectrum {
    /// Magnitude of the bin nearest `f`.
    pub fn magnitude_at(&self, f: f64) -> f64 {
        let idx = (f / self.resolution).round() as usize;
        self.mags[idx.min(self.mags.len() - 1)]
    }

    /// Local maxima sorted by magnitude, each with a parabolic-interpolated
    /// centroid. `min_freq` suppresses the low-frequency residue left by the
    /// decay split.
    pub fn peaks(&self, min_freq: f64) -> Vec<SpectralPeak> {
        let mut out = Vec::new();
        for k in 1..self.mags.len().saturating_sub(1) {
            if self.freqs[k] < min_freq {
                continue;
            }
            let (a, b, c) = (self.mags[k - 1], self.mags[k], self.mags[k + 1]);
            if b > a && b >= c && b > 0.0 {
                let denom = a - 2.0 * b + c;
                let delta = if denom.abs() > 1e-300 {
                    (0.5 * (a - c) / denom).clamp(-0.5, 0.5)
                } else {
                    0.0
                };
                out.push(SpectralPeak {
                    frequency: self.freqs[k] + delta * self.resolution,
                    magnitude: b - 0.25 * (a - c) * delta,
                    bin: k,
                });
            }
        }
        out.sort_by(|p, q| q.magnitude.partial_cmp(&p.magnitude).unwrap());
        out
    }

    /// Relative Parseval residual |E_time - E_freq| / E_time.
    pub fn parseval_residual(&self) -> f64 {
        if self.signal_energy == 0.0 {
            return 0.0;
        }
        (self.signal_energy - self.spectral_energy).abs() / self.signal_energy
    }

    /// Fit a lineshape to the bins within `half_window` Hz of `f_center`.
    pub fn fit_line(&self, f_center: f64, half_window: f64, shape: PeakShape) -> Result<PeakFit> {
        let lo = ((f_center - half_window) / self.resolution).floor().max(0.0) as usize;
        let hi = (((f_center + half_window) / self.resolution).ceil() as usize)
            .min(self.freqs.len() - 1);
        if hi <= lo + 4 {
            return Err(Error::invalid("fit window", "too few bins in window"));
        }
        fit_peak(&self.freqs[lo..=hi], &self.mags[lo..=hi], shape)
    }
}

/// Magnitude spectrum of the oscillatory component `s_o` on [0, 1/(2 tau)].
pub fn harmonic_spectrum(s_o: &[f64], tau: f64) -> Result<Spectrum> {
    if s_o.len() < 16 {
        return Err(Error::invalid("s_o", "need at least 16 samples"));
    }
    if !(tau > 0.0) {
        return Err(Error::invalid("tau", "must be positive"));
    }
    let n = s_o.len();
    let mut buf: Vec<C64> = s_o.iter().map(|&v| C64::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let n_bins = n / 2 + 1;
    let resolution = 1.0 / (n as f64 * tau);
    let freqs: Vec<f64> = (0..n_bins).map(|k| k as f64 * resolution).collect();
    let mags: Vec<f64> = buf[..n_bins]
        .iter()
        .map(|v| 2.0 * v.norm() / n as f64)
        .collect();
    let signal_energy: f64 = s_o.iter().map(|v| v * v).sum();
    let spectral_energy: f64 = buf.iter().map(|v| v.norm_sqr()).sum::<f64>() / n as f64;
    Ok(Spectrum {
        freqs,
        mags,
        resolution,
        bandwidth: 1.0 / (2.0 * tau),
        signal_energy,
        spectral_energy,
    })
}

/// Split a trace into slow decay and zero-mean oscillation with a centered
/// moving average of `window` seconds (shrinking symmetric window at the
/// edges, no zero padding). Returns (s_d, s_o) with s_o = s - s_d exactly.
pub fn decompose(s: &[f64], tau: f64, window: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if window < 3.0 * tau {
        return Err(Error::invalid(
            "window",
            format!("moving average window {window} s must be >= 3 tau"),
        ));
    }
    let half = (window / (2.0 * tau)).round() as usize;
    let n = s.len();
    let mut s_d = Vec::with_capacity(n);
    // Shrinking symmetric windows at the edges. The mean is computed as the
    // center value plus the mean deviation, so constant stretches split
    // exactly (s_d = s, s_o = 0 bitwise).
    for i in 0..n {
        let h = half.min(i).min(n - 1 - i);
        let lo = i - h;
        let hi = i + h;
        let dev: f64 = s[lo..=hi].iter().map(|v| v - s[i]).sum();
        s_d.push(s[i] + dev / (hi - lo + 1) as f64);
    }
    let s_o: Vec<f64> = s.iter().zip(&s_d).map(|(v, d)| v - d).collect();
    Ok((s_d, s_o))
}

/// The number of points in the decompose moving average for a given window.
pub fn decompose_points(tau: f64, window: f64) -> usize {
    2 * (window / (2.0 * tau)).round() as usize + 1
}

/// The low-pass cutoff reported for a moving-average window, 1/window Hz.
pub fn decompose_cutoff(window: f64) -> f64 {
    1.0 / window
}

/// Fold a frequency into [0, bandwidth] by reflection at multiples of the
/// bandwidth (stroboscopic aliasing).
pub fn alias_map(f_true: f64, bandwidth: f64) -> f64 {
    assert!(f_true >= 0.0 && bandwidth > 0.0);
    let r = f_true.rem_euclid(2.0 * bandwidth);
    if r > bandwidth {
        2.0 * bandwidth - r
    } else {
        r
    }
}

/// One tracked window of a short-time Fourier transform.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct StftPoint {
    pub t_center: f64,
    pub peak_hz: f64,
    pub magnitude: f64,
    /// Set when the window holds fewer than two oscillation periods at the
    /// tracked frequency.
    pub low_confidence: bool,
}

/// Track the dominant spectral line over time: Hann-windowed magnitude
/// spectra every `hop` seconds with parabolic peak interpolation.
///
/// `min_freq` masks the low-frequency bins (decay residue) from the search.
pub fn stft_track(
    s_o: &[f64],
    tau: f64,
    window: f64,
    hop: f64,
    min_freq: f64,
) -> Result<Vec<StftPoint>> {
    if window < 10.0 * tau {
        return Err(Error::invalid("window", "must cover at least 10 samples"));
    }
    let w_len = (window / tau).round() as usize;
    let hop_len = ((hop / tau).round() as usize).max(1);
    if w_len > s_o.len() {
        return Err(Error::invalid("window", "longer than the trace"));
    }
    let hann: Vec<f64> = (0..w_len)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / w_len as f64).cos())
        .collect();
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(w_len);
    let resolution = 1.0 / (w_len as f64 * tau);
    let min_bin = (min_freq / resolution).ceil() as usize;
    let mut out = Vec::new();
    let mut start = 0usize;
    while start + w_len <= s_o.len() {
        let mut buf: Vec<C64> = s_o[start..start + w_len]
            .iter()
            .zip(&hann)
            .map(|(&v, &w)| C64::new(v * w, 0.0))
            .collect();
        fft.process(&mut buf);
        let n_bins = w_len / 2 + 1;
        let mags: Vec<f64> = buf[..n_bins].iter().map(|v| v.norm()).collect();
        let lo = min_bin.max(1).min(n_bins - 2);
        let (mut k_best, mut m_best) = (lo, mags[lo]);
        for k in lo..n_bins - 1 {
            if mags[k] > m_best {
                k_best = k;
                m_best = mags[k];
            }
        }
        let (a, b, c) = (mags[k_best - 1], mags[k_best], mags[k_best + 1]);
        let denom = a - 2.0 * b + c;
        let delta = if denom.abs() > 1e-300 {
            (0.5 * (a - c) / denom).clamp(-0.5, 0.5)
        } else {
            0.0
        };
        let peak_hz = (k_best as f64 + delta) * resolution;
        let t_center = (start as f64 + 0.5 * w_len as f64) * tau;
        out.push(StftPoint {
            t_center,
            peak_hz,
            magnitude: m_best * 2.0 / hann.iter().sum::<f64>(),
            low_confidence: peak_hz * window < 2.0,
        });
        start += hop_len;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    #[test]
    fn pure_tone_peak_on_bin() {
        let tau = 73e-6;
        let n = 8192;
        let f = 40.0 / (n as f64 * tau); // exactly on bin 40
        let s: Vec<f64> = (0..n).map(|j| (TAU * f * j as f64 * tau).sin()).collect();
        let spec = harmonic_spectrum(&s, tau).unwrap();
        let peaks = spec.peaks(0.0);
        assert!((peaks[0].frequency - f).abs() < 1e-9);
        assert!((peaks[0].magnitude - 1.0).abs() < 1e-9);
        assert!(spec.parseval_residual() < 1e-9);
    }

    #[test]
    fn off_bin_tone_interpolates_within_resolution() {
        let tau = 50e-6;
        let n = 4096;
        let f = 1234.567;
        let s: Vec<f64> = (0..n).map(|j| (TAU * f * j as f64 * tau).sin()).collect();
        let spec = harmonic_spectrum(&s, tau).unwrap();
        let peaks = spec.peaks(0.0);
        assert!((peaks[0].frequency - f).abs() < spec.resolution);
    }

    #[test]
    fn peak_centroid_invariant_under_scaling() {
        let tau = 73e-6;
        let n = 2048;
        let s: Vec<f64> = (0..n)
            .map(|j| (TAU * 900.0 * j as f64 * tau).sin() + 0.3 * (TAU * 2200.0 * j as f64 * tau).sin())
            .collect();
        let s10: Vec<f64> = s.iter().map(|v| 10.0 * v).collect();
        let p1 = harmonic_spectrum(&s, tau).unwrap().peaks(0.0);
        let p2 = harmonic_spectrum(&s10, tau).unwrap().peaks(0.0);
        assert_eq!(p1[0].bin, p2[0].bin);
        assert!((p1[0].frequency - p2[0].frequency).abs() < 1e-12);
    }

    #[test]
    fn decompose_is_exact_split() {
        let tau = 73e-6;
        // Dyadic values and a window whose sums divide exactly.
        let s: Vec<f64> = (0..64).map(|i| (i % 8) as f64).collect();
        let (s_d, s_o) = decompose(&s, tau, 7.0 * tau).unwrap();
        for i in 0..s.len() {
            assert_eq!(s_o[i], s[i] - s_d[i]);
        }
        // Constant trace: s_o identically zero, s_d + s_o bitwise equal to s.
        let c: Vec<f64> = vec![0.731; 500];
        let (c_d, c_o) = decompose(&c, tau, 73e-3).unwrap();
        for i in 0..c.len() {
            assert_eq!(c_o[i], 0.0);
            assert_eq!(c_d[i] + c_o[i], c[i]);
        }
    }

    #[test]
    fn decompose_window_point_count() {
        // 73 ms window over tau = 73 us: 1001-point moving average, 13.7 Hz cutoff.
        assert_eq!(decompose_points(73e-6, 73e-3), 1001);
        assert!((decompose_cutoff(73e-3) - 13.699).abs() < 1e-2);
    }

    #[test]
    fn decompose_suppresses_fast_oscillation() {
        let tau = 73e-6;
        let f = 2760.0;
        let n = 4000;
        let s: Vec<f64> = (0..n).map(|j| 1.0 + 0.2 * (TAU * f * j as f64 * tau).sin()).collect();
        let (s_d, _s_o) = decompose(&s, tau, 73e-3).unwrap();
        // Interior points of s_d keep under 1% of the oscillation amplitude.
        let resid = s_d[1500..2500]
            .iter()
            .map(|v| (v - 1.0).abs())
            .fold(0.0, f64::max);
        assert!(resid < 0.002, "residual {resid}");
    }

    #[test]
    fn alias_values_at_standard_bandwidth() {
        let bw = 1.0 / (2.0 * 73e-6);
        let f3 = alias_map(3.0 * 2760.0, bw);
        let f4 = alias_map(4.0 * 2760.0, bw);
        assert!((f3 - 5418.6).abs() < 0.1, "f3 = {f3}");
        assert!((f4 - 2658.6).abs() < 0.1, "f4 = {f4}");
        // Identity below the band edge.
        assert_eq!(alias_map(1234.0, bw), 1234.0);
    }

    #[test]
    fn alias_map_idempotent_and_reflective() {
        let bw = 6849.315;
        for f in [0.0, 3000.0, 6849.0, 9000.0, 15000.0, 31234.5] {
            let a = alias_map(f, bw);
            assert!((0.0..=bw).contains(&a));
            assert!((alias_map(a, bw) - a).abs() < 1e-9);
        }
        for f in [7000.0, 9500.0, 12000.0] {
            assert!((alias_map(2.0 * bw - f, bw) - alias_map(f, bw)).abs() < 1e-9);
        }
    }

    #[test]
    fn stft_tracks_constant_tone() {
        let tau = 73e-6;
        let n = 40_000;
        let f = 2500.0;
        let s: Vec<f64> = (0..n).map(|j| (TAU * f * j as f64 * tau).sin()).collect();
        let pts = stft_track(&s, tau, 0.15, 0.5, 100.0).unwrap();
        assert!(!pts.is_empty());
        for p in &pts {
            assert!((p.peak_hz - f).abs() < 1.0 / 0.15, "{}", p.peak_hz);
            assert!(!p.low_confidence);
        }
    }
}
