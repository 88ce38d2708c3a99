//! Damped least-squares peak fitting for Gaussian and Lorentzian lineshapes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Lineshape model: amplitude, center, width parameter, constant offset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PeakShape {
    Gaussian,
    Lorentzian,
}

/// Converged fit results.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PeakFit {
    pub shape: PeakShape,
    pub center: f64,
    /// Full width at half maximum: 2 sqrt(2 ln 2) sigma for Gaussian,
    /// 2 gamma for Lorentzian.
    pub fwhm: f64,
    pub amplitude: f64,
    pub offset: f64,
    /// Root-mean-square residual at convergence.
    pub residual: f64,
    pub iterations: usize,
}

const MAX_ITERATIONS: usize = 200;
const REL_TOL: f64 = 1e-9;

fn model(shape: PeakShape, p: &[f64; 4], x: f64) -> (f64, [f64; 4]) {
    let [a, c, w, b] = *p;
    match shape {
        PeakShape::Gaussian => {
            let z = (x - c) / w;
            let e = (-0.5 * z * z).exp();
            let f = a * e + b;
            let da = e;
            let dc = a * e * z / w;
            let dw = a * e * z * z / w;
            (f, [da, dc, dw, 1.0])
        }
        PeakShape::Lorentzian => {
            let z = (x - c) / w;
            let d = 1.0 + z * z;
            let f = a / d + b;
            let da = 1.0 / d;
            let dc = 2.0 * a * z / (w * d * d);
            let dw = 2.0 * a * z * z / (w * d * d);
            (f, [da, dc, dw, 1.0])
        }
    }
}

fn solve4(mut m: [[f64; 4]; 4], mut rhs: [f64; 4]) -> Option<[f64; 4]> {
    for col in 0..4 {
        let (mut piv, mut best) = (col, m[col][col].abs());
        for r in (col + 1)..4 {
            if m[r][col].abs() > best {
                piv = r;
                best = m[r][col].abs();
            }
        }
        if best < 1e-300 {
            return None;
        }
        m.swap(col, piv);
        rhs.swap(col, piv);
        for r in (col + 1)..4 {
            let f = m[r][col] / m[col][col];
            for c in col..4 {
                m[r][c] -= f * m[col][c];
            }
            rhs[r] -= f * rhs[col];
        }
    }
    let mut x = [0.0; 4];
    for r in (0..4).rev() {
        let mut acc = rhs[r];
        for c in (r + 1)..4 {
            acc -= m[r][c] * x[c];
        }
        x[r] = acc / m[r][r];
    }
    Some(x)
}

/// Fit one peak to (x, y) samples with a bounded Levenberg-style iteration:
/// damped normal equations, lambda grown on rejected steps, convergence when
/// the relative parameter change drops below 1e-9.
pub fn fit_peak(x: &[f64], y: &[f64], shape: PeakShape) -> Result<PeakFit> {
    if x.len() != y.len() || x.len() < 5 {
        return Err(Error::invalid("fit data", "need >= 5 matched samples"));
    }
    // The peak must be interior to the segment.
    let (imax, &ymax) = y
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .unwrap();
    if imax == 0 || imax == y.len() - 1 {
        return Err(Error::DegenerateFit(
            "maximum sits on the segment edge".into(),
        ));
    }
    let ymin = y.iter().copied().fold(f64::MAX, f64::min);
    if !(ymax > ymin) {
        return Err(Error::DegenerateFit("segment is constant".into()));
    }
    // Initial guesses: centroid-ish center, half-max crossing width.
    let half = ymin + 0.5 * (ymax - ymin);
    let mut left = x[0];
    for k in (0..imax).rev() {
        if y[k] <= half {
            left = x[k];
            break;
        }
    }
    let mut right = x[x.len() - 1];
    for k in imax..y.len() {
        if y[k] <= half {
            right = x[k];
            break;
        }
    }
    let span = (right - left).abs().max((x[1] - x[0]).abs());
    let w0 = match shape {
        PeakShape::Gaussian => span / 2.355,
        PeakShape::Lorentzian => span / 2.0,
    };
    let mut p = [ymax - ymin, x[imax], w0, ymin];
    let mut lambda = 1e-3;
    let mut last_rss = f64::MAX;
    let mut iterations = 0;
    for it in 0..MAX_ITERATIONS {
        iterations = it + 1;
        // Build J^T J and J^T r.
        let mut jtj = [[0.0; 4]; 4];
        let mut jtr = [0.0; 4];
        let mut rss = 0.0;
        for (xi, yi) in x.iter().zip(y) {
            let (f, grad) = model(shape, &p, *xi);
            let r = yi - f;
            rss += r * r;
            for a in 0..4 {
                jtr[a] += grad[a] * r;
                for b in 0..4 {
                    jtj[a][b] += grad[a] * grad[b];
                }
            }
        }
        last_rss = rss;
        // Damped step; retry with larger lambda if it increases the residual.
        let mut accepted = false;
        for _ in 0..20 {
            let mut m = jtj;
            for a in 0..4 {
                m[a][a] *= 1.0 + lambda;
            }
            let Some(step) = solve4(m, jtr) else {
                lambda *= 10.0;
                continue;
            };
            let trial = [p[0] + step[0], p[1] + step[1], p[2] + step[2], p[3] + step[3]];
            if trial[2] == 0.0 || !trial.iter().all(|v| v.is_finite()) {
                lambda *= 10.0;
                continue;
            }
            let trial_rss: f64 = x
                .iter()
                .zip(y)
                .map(|(xi, yi)| {
                    let (f, _) = model(shape, &trial, *xi);
                    (yi - f) * (yi - f)
                })
                .sum();
            if trial_rss <= rss {
                let rel = step
                    .iter()
                    .zip(&p)
                    .map(|(s, v)| (s / v.abs().max(1e-30)).abs())
                    .fold(0.0, f64::max);
                p = trial;
                lambda = (lambda * 0.3).max(1e-12);
                last_rss = trial_rss;
                accepted = true;
                if rel < REL_TOL {
                    return Ok(finish(shape, p, last_rss, x.len(), iterations));
                }
                break;
            }
            lambda *= 10.0;
        }
        if !accepted {
            // Fully damped and still no progress: treat as converged if the
            // residual is already tiny, else report divergence.
            if last_rss / x.len() as f64 <= 1e-24 {
                return Ok(finish(shape, p, last_rss, x.len(), iterations));
            }
            return Err(Error::FitDiverged {
                iterations,
                residual: (last_rss / x.len() as f64).sqrt(),
            });
        }
    }
    Err(Error::FitDiverged {
        iterations,
        residual: (last_rss / x.len() as f64).sqrt(),
    })
}

fn finish(shape: PeakShape, p: [f64; 4], rss: f64, n: usize, iterations: usize) -> PeakFit {
    let w = p[2].abs();
    let fwhm = match shape {
        PeakShape::Gaussian => 2.0 * (2.0 * std::f64::consts::LN_2).sqrt() * w,
        PeakShape::Lorentzian => 2.0 * w,
    };
    PeakFit {
        shape,
        center: p[1],
        fwhm,
        amplitude: p[0],
        offset: p[3],
        residual: (rss / n as f64).sqrt(),
        iterations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_exact_gaussian() {
        let (a, c, sigma, b) = (2.5, 103.7, 4.2, 0.3);
        let x: Vec<f64> = (0..200).map(|i| 60.0 + i as f64).collect();
        let y: Vec<f64> = x
            .iter()
            .map(|&xi| a * (-0.5 * ((xi - c) / sigma).powi(2)).exp() + b)
            .collect();
        let fit = fit_peak(&x, &y, PeakShape::Gaussian).unwrap();
        assert!((fit.center - c).abs() / c < 1e-6);
        assert!((fit.amplitude - a).abs() / a < 1e-6);
        let fwhm_expect = 2.0 * (2.0f64 * std::f64::consts::LN_2).sqrt() * sigma;
        assert!((fit.fwhm - fwhm_expect).abs() / fwhm_expect < 1e-6);
    }

    #[test]
    fn recovers_exact_lorentzian() {
        let (a, c, g, b) = (1.2, 2760.0, 15.0, 0.05);
        let x: Vec<f64> = (0..300).map(|i| 2600.0 + i as f64).collect();
        let y: Vec<f64> = x
            .iter()
            .map(|&xi| a / (1.0 + ((xi - c) / g).powi(2)) + b)
            .collect();
        let fit = fit_peak(&x, &y, PeakShape::Lorentzian).unwrap();
        assert!((fit.center - c).abs() < 1e-3);
        assert!((fit.fwhm - 2.0 * g).abs() / (2.0 * g) < 1e-6);
    }

    #[test]
    fn rejects_edge_maximum() {
        let x: Vec<f64> = (0..50).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|&xi| xi).collect();
        assert!(matches!(
            fit_peak(&x, &y, PeakShape::Gaussian),
            Err(Error::DegenerateFit(_))
        ));
    }

    #[test]
    fn noisy_gaussian_still_close() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(12);
        let (a, c, sigma) = (1.0, 50.0, 5.0);
        let x: Vec<f64> = (0..101).map(|i| i as f64).collect();
        let y: Vec<f64> = x
            .iter()
            .map(|&xi| {
                a * (-0.5 * ((xi - c) / sigma).powi(2)).exp()
                    + 0.01 * (rng.random::<f64>() - 0.5)
            })
            .collect();
        let fit = fit_peak(&x, &y, PeakShape::Gaussian).unwrap();
        assert!((fit.center - c).abs() < 0.5);
        assert!((fit.fwhm - 2.355 * sigma).abs() / (2.355 * sigma) < 0.05);
    }
}
