//! Pointwise ensemble reductions and momentum estimation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn check_ensemble(traces: &[Vec<f64>]) -> Result<usize> {
    if traces.len() < 2 {
        return Err(Error::domain(format!("need at least 2 traces, got {}", traces.len())));
    }
    let n = traces[0].len();
    if traces.iter().any(|t| t.len() != n) {
        return Err(Error::domain("traces have different lengths"));
    }
    Ok(n)
}

/// Pointwise mean across traces.
pub fn ensemble_mean_trace(traces: &[Vec<f64>]) -> Result<Vec<f64>> {
    let n = check_ensemble(traces)?;
    let mut mean = vec![0.0; n];
    for t in traces {
        for (m, v) in mean.iter_mut().zip(t) {
            *m += v;
        }
    }
    let inv = 1.0 / traces.len() as f64;
    mean.iter_mut().for_each(|m| *m *= inv);
    Ok(mean)
}

/// Traces with the pointwise ensemble mean removed.
pub fn subtract_ensemble_mean(traces: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let mean = ensemble_mean_trace(traces)?;
    Ok(traces
        .iter()
        .map(|t| t.iter().zip(&mean).map(|(v, m)| v - m).collect())
        .collect())
}

/// `√⟨(z − ⟨z⟩)²⟩` at every sample.
pub fn rms_trace(traces: &[Vec<f64>]) -> Result<Vec<f64>> {
    let mean = ensemble_mean_trace(traces)?;
    let mut acc = vec![0.0; mean.len()];
    for t in traces {
        for ((a, v), m) in acc.iter_mut().zip(t).zip(&mean) {
            *a += (v - m) * (v - m);
        }
    }
    let inv = 1.0 / traces.len() as f64;
    Ok(acc.into_iter().map(|a| (a * inv).sqrt()).collect())
}

/// Finite-difference stencil for [`estimate_momentum_with`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DerivativeStencil {
    /// `(z[k+1] − z[k−1]) / 2dt`. Relative error `(ωdt)²/6`.
    Central3,
    /// Fourth-order five-point stencil. Relative error `(ωdt)⁴/30`.
    #[default]
    Central5,
}

impl DerivativeStencil {
    /// Samples at each end computed with a lower-order formula.
    pub fn edge(&self) -> usize {
        match self {
            DerivativeStencil::Central3 => 1,
            DerivativeStencil::Central5 => 2,
        }
    }

    /// Variance of the derivative of unit-variance white noise, times `dt²`.
    pub fn white_noise_gain(&self) -> f64 {
        match self {
            DerivativeStencil::Central3 => 0.5,
            DerivativeStencil::Central5 => 130.0 / 144.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MomentumEstimate {
    /// kg·m/s
    pub p: Vec<f64>,
    /// Number of samples at each end computed with one-sided or
    /// lower-order differences.
    pub flagged: usize,
}

/// `m·dz/dt` with the default stencil.
pub fn estimate_momentum(trace: &[f64], dt: f64, mass: f64) -> Result<MomentumEstimate> {
    estimate_momentum_with(trace, dt, mass, DerivativeStencil::default())
}

pub fn estimate_momentum_with(
    trace: &[f64],
    dt: f64,
    mass: f64,
    stencil: DerivativeStencil,
) -> Result<MomentumEstimate> {
    let n = trace.len();
    if n < 3 {
        return Err(Error::domain(format!("need at least 3 samples, got {n}")));
    }
    if !(dt > 0.0 && mass > 0.0) {
        return Err(Error::domain("dt and mass must be positive"));
    }
    let z = trace;
    let c = mass / dt;
    let mut p = vec![0.0; n];
    p[0] = c * (-3.0 * z[0] + 4.0 * z[1] - z[2]) / 2.0;
    p[n - 1] = c * (3.0 * z[n - 1] - 4.0 * z[n - 2] + z[n - 3]) / 2.0;
    for k in 1..n - 1 {
        p[k] = c * (z[k + 1] - z[k - 1]) / 2.0;
    }
    let mut flagged = 1;
    if stencil == DerivativeStencil::Central5 && n >= 5 {
        for k in 2..n - 2 {
            p[k] = c * (z[k - 2] - 8.0 * z[k - 1] + 8.0 * z[k + 1] - z[k + 2]) / 12.0;
        }
        flagged = 2;
    }
    Ok(MomentumEstimate { p, flagged })
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    use super::*;
    use crate::units::hz_to_rad_s;

    #[test]
    fn identical_traces() {
        let t: Vec<f64> = (0..50).map(|k| (k as f64 * 0.1).sin()).collect();
        let ens = vec![t.clone(); 4];
        assert_eq!(ensemble_mean_trace(&ens).unwrap(), t);
        let centered = subtract_ensemble_mean(&ens).unwrap();
        assert!(centered.iter().flatten().all(|&v| v.abs() < 1e-15));
        assert!(rms_trace(&ens).unwrap().iter().all(|&v| v < 1e-15));
    }

    #[test]
    fn centering_is_idempotent() {
        let ens: Vec<Vec<f64>> = (0..5)
            .map(|i| (0..20).map(|k| ((i * 7 + k * 3) % 11) as f64).collect())
            .collect();
        let mean = ensemble_mean_trace(&subtract_ensemble_mean(&ens).unwrap()).unwrap();
        assert!(mean.iter().all(|v| v.abs() < 1e-13));
    }

    #[test]
    fn single_trace_is_rejected() {
        assert!(ensemble_mean_trace(&[vec![1.0]]).is_err());
        assert!(rms_trace(&[vec![1.0], vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn random_phase_mean_is_small() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n_tr = 400;
        let ens: Vec<Vec<f64>> = (0..n_tr)
            .map(|_| {
                let phi: f64 = rand::Rng::random_range(&mut rng, 0.0..std::f64::consts::TAU);
                (0..100).map(|k| (0.3 * k as f64 + phi).cos()).collect()
            })
            .collect();
        let bound = 4.0 * (0.5_f64 / n_tr as f64).sqrt();
        assert!(ensemble_mean_trace(&ens).unwrap().iter().all(|m| m.abs() < bound));
    }

    #[test]
    fn sine_derivative_accuracy() {
        let dt = 5e-7;
        let w = hz_to_rad_s(112e3);
        let (a, m) = (2e-9, 3e-19);
        let z: Vec<f64> = (0..2000).map(|k| a * (w * k as f64 * dt).sin()).collect();
        let scale = m * a * w;
        for (stencil, tol) in [(DerivativeStencil::Central5, 1e-3), (DerivativeStencil::Central3, 0.021)] {
            let est = estimate_momentum_with(&z, dt, m, stencil).unwrap();
            assert_eq!(est.flagged, stencil.edge());
            let worst = (est.flagged..z.len() - est.flagged)
                .map(|k| (est.p[k] - scale * (w * k as f64 * dt).cos()).abs() / scale)
                .fold(0.0, f64::max);
            assert!(worst < tol, "{stencil:?}: {worst}");
        }
        // The three-point stencil misses the 1% mark at this sampling rate.
        let x = w * dt;
        assert!(x * x / 6.0 > 0.02);
    }

    #[test]
    fn constant_gives_zero() {
        let est = estimate_momentum(&[4.0; 10], 1e-3, 2.0).unwrap();
        assert!(est.p.iter().all(|&p| p.abs() < 1e-9));
        assert!(estimate_momentum(&[1.0, 2.0], 1.0, 1.0).is_err());
    }

    #[test]
    fn white_noise_amplification() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let z: Vec<f64> = (0..200_000).map(|_| StandardNormal.sample(&mut rng)).collect();
        let dt = 1e-3;
        for stencil in [DerivativeStencil::Central3, DerivativeStencil::Central5] {
            let p = estimate_momentum_with(&z, dt, 1.0, stencil).unwrap().p;
            let inner = &p[2..p.len() - 2];
            let var = inner.iter().map(|v| v * v).sum::<f64>() / inner.len() as f64;
            let expected = stencil.white_noise_gain() / (dt * dt);
            assert!((var / expected - 1.0).abs() < 0.02, "{stencil:?}: {}", var / expected);
        }
    }
}
