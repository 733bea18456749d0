//! Welch power spectral density estimate.

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One-sided PSD. `density` is in (trace units)²/Hz.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Psd {
    pub frequencies_hz: Vec<f64>,
    pub density: Vec<f64>,
    pub segments: usize,
}

impl Psd {
    /// Angular frequencies, rad/s.
    pub fn omegas(&self) -> Vec<f64> {
        self.frequencies_hz.iter().map(|f| std::f64::consts::TAU * f).collect()
    }

    pub fn resolution_hz(&self) -> f64 {
        self.frequencies_hz.get(1).copied().unwrap_or(0.0)
    }

    /// Rectangle-rule integral over all bins.
    pub fn total_power(&self) -> f64 {
        self.density.iter().sum::<f64>() * self.resolution_hz()
    }

    /// Integral over bins whose frequency lies in `[lo, hi]` Hz.
    pub fn band_power(&self, lo: f64, hi: f64) -> f64 {
        self.frequencies_hz
            .iter()
            .zip(&self.density)
            .filter(|(f, _)| **f >= lo && **f <= hi)
            .map(|(_, d)| d)
            .sum::<f64>()
            * self.resolution_hz()
    }
}

/// Averaged periodogram with a periodic Hann window and per-segment mean
/// removal.
pub fn welch_psd(trace: &[f64], dt: f64, segment_length: usize, overlap: f64) -> Result<Psd> {
    if segment_length < 2 || segment_length > trace.len() {
        return Err(Error::domain(format!(
            "segment length {segment_length} must be in [2, {}]",
            trace.len()
        )));
    }
    if !(0.0..1.0).contains(&overlap) {
        return Err(Error::domain(format!("overlap must be in [0, 1), got {overlap}")));
    }
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::domain("dt must be positive"));
    }
    let n = segment_length;
    let step = ((n as f64 * (1.0 - overlap)).round() as usize).max(1);
    let window: Vec<f64> = (0..n)
        .map(|k| 0.5 - 0.5 * (std::f64::consts::TAU * k as f64 / n as f64).cos())
        .collect();
    let w2: f64 = window.iter().map(|w| w * w).sum();
    let fft = FftPlanner::new().plan_fft_forward(n);
    let bins = n / 2 + 1;
    let mut acc = vec![0.0; bins];
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    let mut segments = 0;
    let mut start = 0;
    while start + n <= trace.len() {
        let seg = &trace[start..start + n];
        let mean = seg.iter().sum::<f64>() / n as f64;
        for ((b, x), w) in buf.iter_mut().zip(seg).zip(&window) {
            *b = Complex64::new((x - mean) * w, 0.0);
        }
        fft.process(&mut buf);
        for (a, b) in acc.iter_mut().zip(&buf) {
            *a += b.norm_sqr();
        }
        segments += 1;
        start += step;
    }
    let fs = 1.0 / dt;
    let scale = 1.0 / (fs * w2 * segments as f64);
    let density = acc
        .iter()
        .enumerate()
        .map(|(k, a)| {
            let one_sided = if k == 0 || (n.is_multiple_of(2) && k == n / 2) { 1.0 } else { 2.0 };
            a * scale * one_sided
        })
        .collect();
    let frequencies_hz = (0..bins).map(|k| k as f64 * fs / n as f64).collect();
    Ok(Psd {
        frequencies_hz,
        density,
        segments,
    })
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    use super::*;

    fn variance(x: &[f64]) -> f64 {
        let m = x.iter().sum::<f64>() / x.len() as f64;
        x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / x.len() as f64
    }

    #[test]
    fn white_noise_is_flat_and_obeys_parseval() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x: Vec<f64> = (0..1 << 16).map(|_| StandardNormal.sample(&mut rng)).collect();
        let dt = 1e-3;
        let psd = welch_psd(&x, dt, 1024, 0.5).unwrap();
        let var = variance(&x);
        let inner = &psd.density[1..psd.density.len() - 1];
        let mean = inner.iter().sum::<f64>() / inner.len() as f64;
        assert!((mean / (2.0 * dt * var) - 1.0).abs() < 0.02);
        assert!((psd.total_power() / var - 1.0).abs() < 0.05);
    }

    #[test]
    fn tone_power() {
        let dt = 5e-7;
        let (a, f) = (3.0, 112e3);
        let x: Vec<f64> = (0..1 << 15)
            .map(|k| a * (std::f64::consts::TAU * f * k as f64 * dt + 0.3).sin())
            .collect();
        let psd = welch_psd(&x, dt, 4096, 0.5).unwrap();
        let peak = psd
            .density
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0;
        assert!((psd.frequencies_hz[peak] - f).abs() <= psd.resolution_hz());
        let p = psd.band_power(f - 5.0 * psd.resolution_hz(), f + 5.0 * psd.resolution_hz());
        assert!((p / (a * a / 2.0) - 1.0).abs() < 0.05);
        assert!((psd.total_power() / variance(&x) - 1.0).abs() < 0.05);
    }

    #[test]
    fn bad_arguments() {
        assert!(welch_psd(&[0.0; 10], 1.0, 20, 0.5).is_err());
        assert!(welch_psd(&[0.0; 10], 1.0, 4, 1.0).is_err());
    }
}
