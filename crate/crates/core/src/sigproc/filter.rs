//! Butterworth band-pass design (bilinear transform with pre-warped edges)
//! and zero-phase forward-backward filtering.

use rustfft::num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};

/// Prototype order of the default design; the band-pass has twice this order.
pub const DEFAULT_PROTOTYPE_ORDER: usize = 2;

/// Amplitude decay of the slowest pole that defines the settle window.
pub const SETTLE_ATTENUATION_DB: f64 = 60.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
struct Biquad {
    b: [f64; 3],
    a: [f64; 3],
}

impl Biquad {
    fn response(&self, theta: f64) -> Complex64 {
        let z1 = Complex64::from_polar(1.0, -theta);
        let z2 = z1 * z1;
        (self.b[0] + z1 * self.b[1] + z2 * self.b[2]) / (self.a[0] + z1 * self.a[1] + z2 * self.a[2])
    }

    fn run_in_place(&self, x: &mut [f64]) {
        // Transposed direct form II.
        let (mut s1, mut s2) = (0.0, 0.0);
        for v in x.iter_mut() {
            let input = *v;
            let y = self.b[0] * input + s1;
            s1 = self.b[1] * input - self.a[1] * y + s2;
            s2 = self.b[2] * input - self.a[2] * y;
            *v = y;
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BandPass {
    sections: Vec<Biquad>,
    /// Lower and upper band edges, rad/s.
    pub low: f64,
    pub high: f64,
    pub dt: f64,
    /// Samples at each end of a record (and around any discontinuity) that
    /// carry filter transients.
    pub settle: usize,
}

impl BandPass {
    /// Band-pass with edges `center ± halfwidth` (rad/s) at sampling step `dt`.
    pub fn design(dt: f64, center: f64, halfwidth: f64) -> Result<BandPass> {
        BandPass::design_order(dt, center, halfwidth, DEFAULT_PROTOTYPE_ORDER)
    }

    pub fn design_order(dt: f64, center: f64, halfwidth: f64, order: usize) -> Result<BandPass> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::Config(format!("sampling step must be positive, got {dt}")));
        }
        if order == 0 {
            return Err(Error::Config("filter order must be at least 1".into()));
        }
        let low = center - halfwidth;
        let high = center + halfwidth;
        let nyquist = std::f64::consts::PI / dt;
        if !(halfwidth > 0.0 && low > 0.0 && high < nyquist) {
            return Err(Error::Config(format!(
                "pass band [{low:.4e}, {high:.4e}] rad/s must lie inside (0, {nyquist:.4e})"
            )));
        }
        let fs2 = 2.0 / dt;
        let warp = |w: f64| fs2 * (0.5 * w * dt).tan();
        let (wl, wh) = (warp(low), warp(high));
        let w0sq = wl * wh;
        let bw = wh - wl;

        let mut analog = Vec::with_capacity(2 * order);
        for k in 0..order {
            let angle = std::f64::consts::PI * (2 * k + order + 1) as f64 / (2 * order) as f64;
            let p = Complex64::from_polar(1.0, angle);
            let half = p * bw * 0.5;
            let root = (half * half - w0sq).sqrt();
            analog.push(half + root);
            analog.push(half - root);
        }
        let mut upper: Vec<Complex64> = analog
            .into_iter()
            .map(|s| (fs2 + s) / (fs2 - s))
            .filter(|z| z.im > 0.0)
            .collect();
        upper.sort_by(|a, b| a.arg().total_cmp(&b.arg()));
        if upper.len() != order {
            return Err(Error::Numerical("band-pass pole pairing failed".into()));
        }

        let theta_center = 2.0 * (w0sq.sqrt() / fs2).atan();
        let mut slowest: f64 = 0.0;
        let sections = upper
            .iter()
            .map(|z| {
                slowest = slowest.max(z.norm());
                let mut sec = Biquad {
                    b: [1.0, 0.0, -1.0],
                    a: [1.0, -2.0 * z.re, z.norm_sqr()],
                };
                let g = sec.response(theta_center).norm();
                sec.b.iter_mut().for_each(|b| *b /= g);
                sec
            })
            .collect();
        let decay_per_sample = -slowest.ln();
        let settle = ((SETTLE_ATTENUATION_DB / 20.0) * std::f64::consts::LN_10 / decay_per_sample).ceil() as usize;
        Ok(BandPass {
            sections,
            low,
            high,
            dt,
            settle,
        })
    }

    /// Complex response of one forward pass at angular frequency `omega`.
    pub fn response(&self, omega: f64) -> Complex64 {
        let theta = omega * self.dt;
        self.sections
            .iter()
            .fold(Complex64::new(1.0, 0.0), |acc, s| acc * s.response(theta))
    }

    /// Magnitude of the zero-phase (forward-backward) response.
    pub fn zero_phase_gain(&self, omega: f64) -> f64 {
        self.response(omega).norm_sqr()
    }

    pub fn settle_time(&self) -> f64 {
        self.settle as f64 * self.dt
    }

    fn run_cascade(&self, x: &mut [f64]) {
        for s in &self.sections {
            s.run_in_place(x);
        }
    }

    /// Zero-phase filtering with odd-reflection padding at both ends.
    pub fn filtfilt(&self, x: &[f64]) -> Vec<f64> {
        let n = x.len();
        if n < 2 {
            return x.to_vec();
        }
        let pad = self.settle.min(n - 1);
        let mut ext = Vec::with_capacity(n + 2 * pad);
        ext.extend((1..=pad).rev().map(|i| 2.0 * x[0] - x[i]));
        ext.extend_from_slice(x);
        ext.extend((1..=pad).map(|i| 2.0 * x[n - 1] - x[n - 1 - i]));
        self.run_cascade(&mut ext);
        ext.reverse();
        self.run_cascade(&mut ext);
        ext.reverse();
        ext[pad..pad + n].to_vec()
    }
}

/// Output of [`bandpass`]: the filtered samples and the number of samples at
/// each end affected by edge transients.
#[derive(Clone, Debug, PartialEq)]
pub struct Filtered {
    pub data: Vec<f64>,
    pub settle: usize,
}

/// Zero-phase band-pass of `trace` around `center ± halfwidth` (rad/s).
pub fn bandpass(trace: &[f64], dt: f64, center: f64, halfwidth: f64) -> Result<Filtered> {
    let filter = BandPass::design(dt, center, halfwidth)?;
    Ok(Filtered {
        data: filter.filtfilt(trace),
        settle: filter.settle,
    })
}
