//! Seed derivation and thermal initial-condition designs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

/// How initial thermal states (and pulse jitter angles) are drawn across an
/// ensemble.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialSampling {
    /// Randomly shifted Kronecker (R_d) sequence mapped through the inverse
    /// CDFs: each trace is still a thermal sample but the ensemble moments
    /// converge close to `1/n`.
    #[default]
    Lattice,
    /// Independent draws from each trace's own random stream.
    Independent,
}

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of trace `index`; distinct indices give distinct seeds because the
/// mixer is a bijection.
pub fn trace_seed(master_seed: u64, index: u64) -> u64 {
    splitmix64(master_seed.wrapping_add(index.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA)))
}

/// Randomly shifted additive recurrence `frac(shift + i·α)` with
/// `α_k = φ_d^{-k}` and `φ_d` the real root of `x^{d+1} = x + 1`.
#[derive(Clone, Debug)]
pub struct KroneckerSequence {
    alpha: Vec<f64>,
    shift: Vec<f64>,
}

impl KroneckerSequence {
    pub fn new(dim: usize, seed: u64) -> Self {
        let mut phi = 2.0_f64;
        for _ in 0..64 {
            let f = phi.powi(dim as i32 + 1) - phi - 1.0;
            let df = (dim as f64 + 1.0) * phi.powi(dim as i32) - 1.0;
            phi -= f / df;
        }
        let alpha = (1..=dim).map(|k| phi.powi(-(k as i32))).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(seed ^ 0x5EED_1A77_1CE0_0000));
        let shift = (0..dim).map(|_| rng.random::<f64>()).collect();
        KroneckerSequence { alpha, shift }
    }

    pub fn dim(&self) -> usize {
        self.alpha.len()
    }

    /// Point `index` in `[0, 1)^d`.
    pub fn point(&self, index: u64) -> Vec<f64> {
        let i = (index + 1) as f64;
        self.alpha
            .iter()
            .zip(&self.shift)
            .map(|(a, s)| (s + i * a).fract())
            .collect()
    }
}

const OPEN_EPS: f64 = 1e-15;

fn open_unit(u: f64) -> f64 {
    u.clamp(OPEN_EPS, 1.0 - OPEN_EPS)
}

/// Standard bivariate Gaussian from two uniforms (polar inverse CDF).
pub fn gaussian_pair(u_radius: f64, u_angle: f64) -> [f64; 2] {
    let r = (-2.0 * (1.0 - open_unit(u_radius)).ln()).sqrt();
    let theta = std::f64::consts::TAU * u_angle;
    [r * theta.cos(), r * theta.sin()]
}

pub fn gaussian_quantile(u: f64) -> f64 {
    Normal::standard().inverse_cdf(open_unit(u))
}

#[cfg(test)]
mod tests {
    use std::collections::HashSet;

    use super::*;

    #[test]
    fn trace_seeds_are_unique() {
        let seeds: HashSet<u64> = (0..10_000).map(|i| trace_seed(42, i)).collect();
        assert_eq!(seeds.len(), 10_000);
    }

    #[test]
    fn kronecker_root_solves_defining_polynomial() {
        let seq = KroneckerSequence::new(3, 0);
        let phi = 1.0 / seq.alpha[0];
        assert!((phi.powi(4) - phi - 1.0).abs() < 1e-14);
        assert!((phi - 1.220_744_084_605_759_5).abs() < 1e-12);
    }

    #[test]
    fn lattice_gaussian_moments_are_tight() {
        let seq = KroneckerSequence::new(2, 7);
        let n = 2000;
        let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
        for i in 0..n {
            let p = seq.point(i);
            let [x, y] = gaussian_pair(p[0], p[1]);
            sxx += x * x;
            sxy += x * y;
            syy += y * y;
        }
        let n = n as f64;
        assert!((sxx / n - 1.0).abs() < 0.02);
        assert!((syy / n - 1.0).abs() < 0.02);
        assert!((sxy / n).abs() < 0.02);
    }

    #[test]
    fn quantile_is_symmetric() {
        assert!(gaussian_quantile(0.5).abs() < 1e-12);
        assert!((gaussian_quantile(0.975) - 1.959_964).abs() < 1e-5);
    }
}
