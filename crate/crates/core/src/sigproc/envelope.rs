//! Decay rate of the ensemble variance after a pulse.
//!
//! After the pulse the position variance relaxes as
//! `c + e^{−Γt}(a + b·cos 2ωt + d·sin 2ωt)`. For a fixed `Γ` the model is
//! linear in `(c, a, b, d)`, so only `Γ` is searched.

use nalgebra::{Matrix4, Vector4};
use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EnvelopeFit {
    /// Decay rate of the variance deviation, rad/s.
    pub gamma: f64,
    /// Equilibrium variance `c`.
    pub baseline: f64,
    /// `(a, b, d)` at the first sample.
    pub deviation: [f64; 3],
    /// RMS residual in variance units.
    pub residual_rms: f64,
}

impl EnvelopeFit {
    /// Envelope of the variance, `c + e^{−Γt}·(|a| + √(b² + d²))`, at time `t`
    /// after the first fitted sample.
    pub fn upper_envelope(&self, t: f64) -> f64 {
        let [a, b, d] = self.deviation;
        self.baseline + (-self.gamma * t).exp() * (a.abs() + b.hypot(d))
    }
}

fn solve_linear(times: &[f64], v: &[f64], omega: f64, gamma: f64) -> Option<(Vector4<f64>, f64)> {
    let mut ata = Matrix4::zeros();
    let mut aty = Vector4::zeros();
    let t0 = times[0];
    let rows = || {
        times.iter().zip(v).map(move |(&t, &y)| {
            let s = t - t0;
            let e = (-gamma * s).exp();
            let (sn, cs) = (2.0 * omega * s).sin_cos();
            (Vector4::new(1.0, e, e * cs, e * sn), y)
        })
    };
    for (row, y) in rows() {
        ata += row * row.transpose();
        aty += row * y;
    }
    let coef = ata.cholesky()?.solve(&aty);
    let rss = rows().map(|(row, y)| (row.dot(&coef) - y).powi(2)).sum();
    Some((coef, rss))
}

/// Fits the damped variance model to `variance` sampled at `times` (s),
/// with the oscillation fixed at `2·omega`.
pub fn fit_variance_envelope(times: &[f64], variance: &[f64], omega: f64) -> Result<EnvelopeFit> {
    if times.len() != variance.len() || times.len() < 8 {
        return Err(Error::domain("need at least 8 matching time/variance samples"));
    }
    let span = times[times.len() - 1] - times[0];
    if !(span > 0.0 && omega > 0.0) {
        return Err(Error::domain("time span and omega must be positive"));
    }
    let rss = |log_g: f64| solve_linear(times, variance, omega, log_g.exp()).map_or(f64::INFINITY, |s| s.1);
    let (lo, hi) = ((0.01 / span).ln(), (200.0 / span).ln());
    let steps = 200;
    let grid: Vec<f64> = (0..=steps).map(|k| lo + (hi - lo) * k as f64 / steps as f64).collect();
    let best = (0..=steps)
        .min_by(|&a, &b| rss(grid[a]).total_cmp(&rss(grid[b])))
        .expect("non-empty grid");
    let (mut a, mut b) = (grid[best.saturating_sub(1)], grid[(best + 1).min(steps)]);
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = b - phi * (b - a);
    let mut x2 = a + phi * (b - a);
    let (mut f1, mut f2) = (rss(x1), rss(x2));
    while b - a > 1e-10 {
        if f1 < f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - phi * (b - a);
            f1 = rss(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + phi * (b - a);
            f2 = rss(x2);
        }
    }
    let gamma = (0.5 * (a + b)).exp();
    let (coef, r) = solve_linear(times, variance, omega, gamma)
        .ok_or_else(|| Error::Numerical("envelope design matrix is singular".into()))?;
    if best == 0 || best == steps {
        return Err(Error::Numerical(format!(
            "decay rate {gamma:.4e} rad/s is at the edge of the search range"
        )));
    }
    Ok(EnvelopeFit {
        gamma,
        baseline: coef[0],
        deviation: [coef[1], coef[2], coef[3]],
        residual_rms: (r / times.len() as f64).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_synthetic_rate() {
        let (w, g) = (7.0e5, 1426.0);
        let times: Vec<f64> = (0..6000).map(|k| 1e-4 + k as f64 * 5e-7).collect();
        let v: Vec<f64> = times
            .iter()
            .map(|t| {
                let s = t - times[0];
                1.0 + (-g * s).exp() * (0.8 + 2.1 * (2.0 * w * s).cos() - 0.4 * (2.0 * w * s).sin())
            })
            .collect();
        let fit = fit_variance_envelope(&times, &v, w).unwrap();
        assert!((fit.gamma / g - 1.0).abs() < 1e-6, "{}", fit.gamma);
        assert!((fit.baseline - 1.0).abs() < 1e-6);
        assert!(fit.residual_rms < 1e-9);
    }

    #[test]
    fn too_few_samples() {
        assert!(fit_variance_envelope(&[0.0, 1.0], &[1.0, 1.0], 1.0).is_err());
    }
}
