//! Per-pulse magnetometer traces: one transverse-magnitude sample per pulse,
//! optionally split into a slow decay and a zero-mean oscillation.

use serde::{Deserialize, Serialize};

/// The stroboscopic sensor record S_j, sampled every `dt` seconds.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MagnetometerTrace {
    /// Transverse magnitudes, one per pulse, normalized so `s[0]` = 1 when the
    /// producing engine normalizes.
    pub s: Vec<f64>,
    /// Sample spacing in seconds (the interpulse period tau).
    pub dt: f64,
    /// Optional (s_d, s_o) split with s_d + s_o = s elementwise.
    pub decomposition: Option<(Vec<f64>, Vec<f64>)>,
}

impl MagnetometerTrace {
    pub fn new(s: Vec<f64>, dt: f64) -> Self {
        Self {
            s,
            dt,
            decomposition: None,
        }
    }

    pub fn len(&self) -> usize {
        self.s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.s.len() as f64 * self.dt
    }

    /// Times of the samples, t_j = (j + 1) tau (the j-th point follows the
    /// (j+1)-th pulse).
    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        let dt = self.dt;
        (0..self.s.len()).map(move |j| (j as f64 + 1.0) * dt)
    }

    /// Split into slow decay and zero-mean oscillation with a centered moving
    /// average of `window` seconds, storing the result on the trace and
    /// returning references to it.
    pub fn decompose(&mut self, window: f64) -> crate::error::Result<(&[f64], &[f64])> {
        let split = crate::dsp::decompose(&self.s, self.dt, window)?;
        self.decomposition = Some(split);
        let (s_d, s_o) = self.decomposition.as_ref().unwrap();
        Ok((s_d, s_o))
    }

    /// Mean of s over points at index >= skip, normalized to `s[skip]`.
    pub fn integrated_tail(&self, skip: usize) -> f64 {
        let tail = &self.s[skip.min(self.s.len().saturating_sub(1))..];
        if tail.is_empty() {
            return f64::NAN;
        }
        let norm = tail[0];
        if norm == 0.0 {
            return f64::NAN;
        }
        tail.iter().map(|v| v / norm).sum::<f64>() / tail.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decompose_fills_the_stored_split() {
        let tau = 73e-6;
        let s: Vec<f64> = (0..2000)
            .map(|j| {
                let t = j as f64 * tau;
                1.0 + 0.1 * (std::f64::consts::TAU * 2760.0 * t).sin()
            })
            .collect();
        let mut trace = MagnetometerTrace::new(s.clone(), tau);
        assert!(trace.decomposition.is_none());
        trace.decompose(73e-3).unwrap();
        let (s_d, s_o) = trace.decomposition.as_ref().unwrap();
        for j in 0..s.len() {
            assert_eq!(s_d[j] + s_o[j], s[j]);
        }
    }
}
