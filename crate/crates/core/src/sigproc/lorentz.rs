//! Lorentzian fit to a thermal-oscillator spectrum.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lm::{minimize, parameter_covariance, LmOptions, Termination};

/// Required ratio between the spectral peak and the estimated floor.
pub const MIN_PEAK_TO_FLOOR: f64 = 3.0;

/// `A·Γ/((ω²−ω₀²)² + Γ²ω²) + floor`.
pub fn lorentzian(omega: f64, center: f64, gamma: f64, amplitude: f64, floor: f64) -> f64 {
    let d = omega * omega - center * center;
    amplitude * gamma / (d * d + gamma * gamma * omega * omega) + floor
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LorentzianGuess {
    pub center: f64,
    pub gamma: f64,
    pub amplitude: f64,
    pub floor: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LorentzianFit {
    /// rad/s
    pub center: f64,
    /// rad/s
    pub gamma: f64,
    pub amplitude: f64,
    pub floor: f64,
    /// Covariance of `(center, gamma, amplitude, floor)`, row-major.
    pub covariance: [[f64; 4]; 4],
    /// RMS of the log residuals.
    pub log_residual_rms: f64,
    pub iterations: usize,
    pub termination: Termination,
}

impl LorentzianFit {
    pub fn evaluate(&self, omega: f64) -> f64 {
        lorentzian(omega, self.center, self.gamma, self.amplitude, self.floor)
    }

    pub fn center_std(&self) -> f64 {
        self.covariance[0][0].sqrt()
    }

    pub fn gamma_std(&self) -> f64 {
        self.covariance[1][1].sqrt()
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn floor_estimate(densities: &[f64]) -> f64 {
    let tail = (densities.len() / 10).max(1);
    let mut edges: Vec<f64> = densities[..tail].to_vec();
    edges.extend_from_slice(&densities[densities.len() - tail..]);
    median(edges)
}

/// Starting point from the peak position, its half-maximum width and the
/// level of the outermost bins.
pub fn initial_guess(omegas: &[f64], densities: &[f64]) -> Result<LorentzianGuess> {
    if omegas.len() != densities.len() || omegas.len() < 5 {
        return Err(Error::domain("need at least 5 matching frequency/density points"));
    }
    let floor = floor_estimate(densities).max(0.0);
    let (ipk, &peak) = densities
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty");
    if !(floor > 0.0 && peak / floor >= MIN_PEAK_TO_FLOOR) {
        return Err(Error::domain(format!(
            "spectral peak is not visible above the floor (peak/floor = {:.3}, need {MIN_PEAK_TO_FLOOR})",
            peak / floor
        )));
    }
    let half = floor + 0.5 * (peak - floor);
    let mut lo = ipk;
    while lo > 0 && densities[lo] > half {
        lo -= 1;
    }
    let mut hi = ipk;
    while hi + 1 < densities.len() && densities[hi] > half {
        hi += 1;
    }
    let bin = (omegas[1] - omegas[0]).abs();
    let center = omegas[ipk];
    let gamma = (omegas[hi] - omegas[lo]).abs().max(bin);
    Ok(LorentzianGuess {
        center,
        gamma,
        amplitude: (peak - floor) * gamma * center * center,
        floor,
    })
}

/// Least-squares fit of [`lorentzian`] on log densities. Parameters are
/// fitted as logarithms, which keeps all four positive.
pub fn lorentzian_fit(omegas: &[f64], densities: &[f64], init_guess: Option<LorentzianGuess>) -> Result<LorentzianFit> {
    let auto = initial_guess(omegas, densities)?;
    let guess = init_guess.unwrap_or(auto);
    let g = [guess.center, guess.gamma, guess.amplitude, guess.floor];
    if g.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(Error::domain(format!("initial guess must be positive: {g:?}")));
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = omegas
        .iter()
        .zip(densities)
        .filter(|(_, d)| **d > 0.0 && d.is_finite())
        .map(|(w, d)| (w / g[0], d.ln()))
        .unzip();
    // Work in units of the initial centre frequency: with x = ω/ω_r the
    // amplitude scales as ω_r³.
    let cube = g[0].powi(3);
    let unpack = |q: &[f64]| -> [f64; 4] {
        [
            q[0].exp(),
            g[1] / g[0] * q[1].exp(),
            g[2] / cube * q[2].exp(),
            g[3] * q[3].exp(),
        ]
    };
    let residuals = |q: &[f64]| -> Result<Vec<f64>> {
        let [c, gm, a, f] = unpack(q);
        Ok(xs
            .iter()
            .zip(&ys)
            .map(|(x, y)| lorentzian(*x, c, gm, a, f).ln() - y)
            .collect())
    };
    let opts = LmOptions {
        max_iterations: 400,
        ..LmOptions::default()
    };
    let report = minimize(residuals, &[0.0; 4], &opts)?;
    if !report.termination.converged() {
        return Err(Error::FitFailure {
            iterations: report.iterations,
            reason: format!("{:?}", report.termination),
            best_cost: report.cost,
            best_params: unpack(&report.x).to_vec(),
        });
    }
    let [c, gm, a, f] = unpack(&report.x);
    let params = [c * g[0], gm * g[0], a * cube, f];
    let mut covariance = [[f64::NAN; 4]; 4];
    if let Some(cq) = parameter_covariance(&report.jacobian, &report.residuals) {
        for i in 0..4 {
            for j in 0..4 {
                covariance[i][j] = cq[(i, j)] * params[i] * params[j];
            }
        }
    }
    let rms = (2.0 * report.cost / xs.len() as f64).sqrt();
    Ok(LorentzianFit {
        center: params[0],
        gamma: params[1],
        amplitude: params[2],
        floor: params[3],
        covariance,
        log_residual_rms: rms,
        iterations: report.iterations,
        termination: report.termination,
    })
}
