//! Phase-space reconstruction: filter, centre and differentiate an ensemble,
//! then read off per-time clouds of dimensionless quadratures.

use std::ops::Range;

use rayon::prelude::*;
use serde::Serialize;

use super::ensemble::{estimate_momentum_with, subtract_ensemble_mean, DerivativeStencil};
use super::filter::BandPass;
use crate::error::{Error, Result};
use crate::mat2::Mat2;
use crate::noise::CovarianceState;
use crate::units::HBAR;

/// Smallest cloud accepted by [`cloud_covariance`].
pub const MIN_CLOUD_POINTS: usize = 30;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PhaseSpaceCloud {
    /// `(x, p)` in vacuum units of the reference mode.
    pub points: Vec<[f64; 2]>,
    /// Seconds relative to the end of the pulse sequence.
    pub timestamp: f64,
}

/// Band-pass settings and momentum stencil for [`prepare_ensemble`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PrepareOptions {
    pub filter_center: f64,
    pub filter_halfwidth: f64,
    pub stencil: DerivativeStencil,
    /// `(start, end)` of the pulse sequence in seconds, if any.
    pub pulse_window: Option<(f64, f64)>,
}

/// An ensemble after filtering, mean subtraction and differentiation.
#[derive(Clone, Debug)]
pub struct PreparedEnsemble {
    pub dt: f64,
    /// Filtered, centred positions, m.
    pub z: Vec<Vec<f64>>,
    /// Momenta from the centred positions, kg·m/s.
    pub p: Vec<Vec<f64>>,
    /// Filtered ensemble mean that was removed, m.
    pub mean: Vec<f64>,
    pub settle: usize,
    /// Sample ranges carrying filter or differentiation transients.
    pub invalid: Vec<Range<usize>>,
    pub pulse_window: Option<(f64, f64)>,
}

impl PreparedEnsemble {
    pub fn n_samples(&self) -> usize {
        self.mean.len()
    }

    pub fn index_of(&self, t: f64) -> usize {
        (t / self.dt).round().max(0.0) as usize
    }

    pub fn is_valid(&self, k: usize) -> bool {
        k < self.n_samples() && !self.invalid.iter().any(|r| r.contains(&k))
    }
}

/// Fixed-order preparation: band-pass every trace, subtract the ensemble
/// mean, then differentiate.
pub fn prepare_ensemble(traces: &[Vec<f64>], dt: f64, mass: f64, opts: &PrepareOptions) -> Result<PreparedEnsemble> {
    let filter = BandPass::design(dt, opts.filter_center, opts.filter_halfwidth)?;
    let filtered: Vec<Vec<f64>> = traces.par_iter().map(|t| filter.filtfilt(t)).collect();
    let mean = super::ensemble_mean_trace(&filtered)?;
    let z = subtract_ensemble_mean(&filtered)?;
    let momenta = z
        .par_iter()
        .map(|t| estimate_momentum_with(t, dt, mass, opts.stencil))
        .collect::<Result<Vec<_>>>()?;
    let flagged = momenta.first().map_or(0, |m| m.flagged);
    let p = momenta.into_iter().map(|m| m.p).collect();

    let n = mean.len();
    let edge = filter.settle.max(flagged);
    let mut invalid = vec![0..edge.min(n), n.saturating_sub(edge)..n];
    if let Some((start, end)) = opts.pulse_window {
        let a = ((start / dt).floor() as usize).saturating_sub(filter.settle);
        let b = ((end / dt).ceil() as usize + filter.settle).min(n);
        invalid.push(a..b);
    }
    Ok(PreparedEnsemble {
        dt,
        z,
        p,
        mean,
        settle: filter.settle,
        invalid,
        pulse_window: opts.pulse_window,
    })
}

/// Factors turning `(z, p)` in SI into quadratures with vacuum variance 1.
pub fn quadrature_scales(mass: f64, omega1: f64) -> (f64, f64) {
    ((2.0 * mass * omega1 / HBAR).sqrt(), (2.0 / (HBAR * mass * omega1)).sqrt())
}

/// One `(x, p)` point per trace at the sample nearest `at_time`.
pub fn phase_space_cloud(
    ensemble: &PreparedEnsemble,
    at_time: f64,
    mass: f64,
    omega1: f64,
) -> Result<PhaseSpaceCloud> {
    let k = ensemble.index_of(at_time);
    if !ensemble.is_valid(k) {
        return Err(Error::domain(format!(
            "t = {at_time:.6e} s lies outside the trace or inside a filter settle window"
        )));
    }
    let (sx, sp) = quadrature_scales(mass, omega1);
    let points = ensemble
        .z
        .iter()
        .zip(&ensemble.p)
        .map(|(z, p)| [z[k] * sx, p[k] * sp])
        .collect();
    let end = ensemble.pulse_window.map_or(0.0, |w| w.1);
    Ok(PhaseSpaceCloud {
        points,
        timestamp: k as f64 * ensemble.dt - end,
    })
}

/// Unbiased sample covariance and mean of a cloud.
pub fn cloud_covariance(cloud: &PhaseSpaceCloud) -> Result<CovarianceState> {
    let n = cloud.points.len();
    if n < MIN_CLOUD_POINTS {
        return Err(Error::domain(format!(
            "need at least {MIN_CLOUD_POINTS} points for a covariance, got {n}"
        )));
    }
    if cloud.points.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::domain("cloud contains non-finite points"));
    }
    let inv = 1.0 / n as f64;
    let mx = cloud.points.iter().map(|q| q[0]).sum::<f64>() * inv;
    let mp = cloud.points.iter().map(|q| q[1]).sum::<f64>() * inv;
    let (mut sxx, mut sxp, mut spp) = (0.0, 0.0, 0.0);
    for q in &cloud.points {
        let (dx, dp) = (q[0] - mx, q[1] - mp);
        sxx += dx * dx;
        sxp += dx * dp;
        spp += dp * dp;
    }
    let norm = 1.0 / (n - 1) as f64;
    let sigma = Mat2::new(sxx * norm, sxp * norm, sxp * norm, spp * norm);
    if sigma.get(0, 0) <= 0.0 || sigma.get(1, 1) <= 0.0 {
        return Err(Error::domain("degenerate cloud: zero variance"));
    }
    CovarianceState::new(sigma, [mx, mp]).map_err(|_| Error::domain("degenerate cloud: covariance is singular"))
}

/// Squeezing of standard deviations: `10·log₁₀(σ_iso,before / σ_minor,after)`.
pub fn measured_squeezing_db(cov_before: &CovarianceState, cov_after: &CovarianceState) -> f64 {
    let (lo_b, hi_b) = cov_before.eigenvalues();
    let (lo_a, _) = cov_after.eigenvalues();
    5.0 * (0.5 * (lo_b + hi_b) / lo_a).log10()
}

/// Mean of the sample covariances at every valid sample in `[t_from, t_to]`.
pub fn window_covariance(
    ensemble: &PreparedEnsemble,
    t_from: f64,
    t_to: f64,
    mass: f64,
    omega1: f64,
) -> Result<CovarianceState> {
    let (a, b) = (ensemble.index_of(t_from), ensemble.index_of(t_to));
    let mut sum = Mat2::ZERO;
    let mut mean = [0.0; 2];
    let mut count = 0usize;
    for k in a..=b {
        if !ensemble.is_valid(k) {
            continue;
        }
        let cov = cloud_covariance(&phase_space_cloud(ensemble, k as f64 * ensemble.dt, mass, omega1)?)?;
        sum = sum + *cov.sigma();
        mean[0] += cov.mean()[0];
        mean[1] += cov.mean()[1];
        count += 1;
    }
    if count == 0 {
        return Err(Error::domain(format!(
            "no valid samples in [{t_from:.6e}, {t_to:.6e}] s"
        )));
    }
    let c = 1.0 / count as f64;
    CovarianceState::new(sum.scale(c), [mean[0] * c, mean[1] * c])
}

/// Undoes thermal relaxation over `elapsed` seconds: the deviation of
/// `after` from the isotropic part of `before` is scaled by `e^{Γ·elapsed}`.
pub fn compensate_decay(
    after: &CovarianceState,
    before: &CovarianceState,
    gamma: f64,
    elapsed: f64,
) -> Result<CovarianceState> {
    let (lo, hi) = before.eigenvalues();
    let bath = Mat2::scalar(0.5 * (lo + hi));
    let grow = (gamma * elapsed).exp();
    let sigma = bath + (*after.sigma() - bath).scale(grow);
    CovarianceState::new(sigma, after.mean())
        .map_err(|e| Error::Numerical(format!("decay compensation produced an invalid covariance: {e}")))
}

/// Covariances around a pulse sequence and the resulting squeezing.
#[derive(Clone, Debug, Serialize)]
pub struct SqueezingMeasurement {
    pub before: CovarianceState,
    pub after: CovarianceState,
    /// Seconds between the pulse end and the sample used for `after`.
    pub after_delay: f64,
    pub decay_compensated: bool,
    pub lambda_db: f64,
}

/// "Before": averaged over one `ω₁` period ending at the last valid sample
/// ahead of the pulse. "After": first valid sample past the pulse, optionally
/// corrected for relaxation at rate `gamma` back to the pulse end.
pub fn measure_squeezing(
    ensemble: &PreparedEnsemble,
    mass: f64,
    omega1: f64,
    gamma: Option<f64>,
) -> Result<SqueezingMeasurement> {
    let (start, end) = ensemble
        .pulse_window
        .ok_or_else(|| Error::domain("ensemble has no pulse window"))?;
    let dt = ensemble.dt;
    let settle = ensemble.settle as f64 * dt;
    let before_end = ((start / dt).floor() as usize).saturating_sub(ensemble.settle + 1) as f64 * dt;
    let period = std::f64::consts::TAU / omega1;
    if before_end - period < settle {
        return Err(Error::domain("not enough pre-pulse samples outside the settle windows"));
    }
    let before = window_covariance(ensemble, before_end - period, before_end, mass, omega1)?;
    let after_index = (end / dt).ceil() as usize + ensemble.settle;
    if !ensemble.is_valid(after_index) {
        return Err(Error::domain("no valid post-pulse sample past the settle window"));
    }
    let after_time = after_index as f64 * dt;
    let mut after = cloud_covariance(&phase_space_cloud(ensemble, after_time, mass, omega1)?)?;
    let delay = after_time - end;
    let compensated = match gamma {
        Some(g) if g > 0.0 => {
            after = compensate_decay(&after, &before, g, delay)?;
            true
        }
        _ => false,
    };
    Ok(SqueezingMeasurement {
        lambda_db: measured_squeezing_db(&before, &after),
        before,
        after,
        after_delay: delay,
        decay_compensated: compensated,
    })
}
