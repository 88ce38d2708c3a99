//! Sensitivity estimation: linear fit of first-harmonic response against
//! drive amplitude, extrapolated to the noise floor.

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::util::stream_rng;

/// Output of the sensitivity procedure.
#[derive(Debug, Clone, Serialize)]
pub struct SensitivityResult {
    /// Fitted signal per tesla.
    pub slope: f64,
    pub intercept: f64,
    /// Noise floor in signal units.
    pub noise_floor: f64,
    /// Minimum detectable field noise_floor / slope, tesla.
    pub min_field: f64,
    /// 95% bootstrap interval on min_field, tesla.
    pub min_field_ci: (f64, f64),
    /// min_field * sqrt(duration), T/sqrt(Hz).
    pub sensitivity: f64,
    pub duration: f64,
}

/// Least-squares line through (amplitudes, signals); returns (slope,
/// intercept, slope standard error).
fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| {
            let r = b - (intercept + slope * a);
            r * r
        })
        .sum();
    let dof = (x.len().max(3) - 2) as f64;
    let se = (rss / dof / sxx).sqrt();
    (slope, intercept, se)
}

/// Fit measured first-harmonic signals against field amplitudes and
/// extrapolate the minimum detectable field at the given noise floor.
///
/// The 95% CI comes from a seeded pairs bootstrap (1000 resamples). Errors
/// when fewer than 4 points are supplied or the slope is consistent with
/// zero at 2 standard errors.
pub fn fit_sensitivity(
    amplitudes: &[f64],
    signals: &[f64],
    noise_floor: f64,
    duration: f64,
    seed: u64,
) -> Result<SensitivityResult> {
    if amplitudes.len() != signals.len() || amplitudes.len() < 4 {
        return Err(Error::invalid(
            "sensitivity data",
            "need >= 4 matched (amplitude, signal) points",
        ));
    }
    if !(duration > 0.0) {
        return Err(Error::invalid("duration", "must be positive"));
    }
    if noise_floor < 0.0 {
        return Err(Error::invalid("noise_floor", "must be >= 0"));
    }
    let (slope, intercept, se) = linear_fit(amplitudes, signals);
    if !slope.is_finite() || slope.abs() <= 2.0 * se {
        return Err(Error::DegenerateFit(format!(
            "slope {slope:.3e} consistent with zero (se {se:.3e})"
        )));
    }
    let min_field = noise_floor / slope.abs();
    // Pairs bootstrap for the CI.
    let n = amplitudes.len();
    let mut rng = stream_rng(seed, &[0x626f6f74]);
    let mut boots: Vec<f64> = Vec::with_capacity(1000);
    for _ in 0..1000 {
        let mut xs = Vec::with_capacity(n);
        let mut ys = Vec::with_capacity(n);
        for _ in 0..n {
            let k = rng.random_range(0..n);
            xs.push(amplitudes[k]);
            ys.push(signals[k]);
        }
        let (s, _, _) = linear_fit(&xs, &ys);
        if s.is_finite() && s.abs() > 0.0 {
            boots.push(noise_floor / s.abs());
        }
    }
    boots.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let ci = if boots.is_empty() {
        (min_field, min_field)
    } else {
        let lo = boots[(0.025 * boots.len() as f64) as usize];
        let hi = boots[((0.975 * boots.len() as f64) as usize).min(boots.len() - 1)];
        (lo, hi)
    };
    Ok(SensitivityResult {
        slope,
        intercept,
        noise_floor,
        min_field,
        min_field_ci: ci,
        sensitivity: min_field * duration.sqrt(),
        duration,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constructed_slope_recovered() {
        let amps: Vec<f64> = (1..=8).map(|i| i as f64 * 1e-9).collect();
        let mut rng = stream_rng(5, &[1]);
        let signals: Vec<f64> = amps
            .iter()
            .map(|&a| 1e6 * a + 1e-3 * (rng.random::<f64>() - 0.5))
            .collect();
        let r = fit_sensitivity(&amps, &signals, 1e-3, 34.0, 7).unwrap();
        assert!((r.slope - 1e6).abs() / 1e6 < 0.2);
        let expect = 1e-3 / 1e6;
        assert!(r.min_field_ci.0 <= expect && expect <= r.min_field_ci.1);
        assert!((r.sensitivity - r.min_field * 34.0_f64.sqrt()).abs() < 1e-18);
    }

    #[test]
    fn zero_noise_gives_zero_field() {
        let amps: Vec<f64> = (1..=6).map(|i| i as f64).collect();
        let signals: Vec<f64> = amps.iter().map(|&a| 3.0 * a + 0.5).collect();
        let r = fit_sensitivity(&amps, &signals, 0.0, 10.0, 1).unwrap();
        assert_eq!(r.min_field, 0.0);
        assert_eq!(r.sensitivity, 0.0);
    }

    #[test]
    fn flat_signals_rejected() {
        let amps: Vec<f64> = (1..=6).map(|i| i as f64).collect();
        let mut rng = stream_rng(2, &[9]);
        let signals: Vec<f64> = amps.iter().map(|_| rng.random::<f64>()).collect();
        assert!(fit_sensitivity(&amps, &signals, 1.0, 10.0, 3).is_err());
    }
}
