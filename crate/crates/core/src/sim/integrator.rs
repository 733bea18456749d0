//! Exact discrete-time update of the damped, driven harmonic oscillator with
//! piecewise-constant stiffness.
//!
//! Internal units: time in `1/ω₁`, position in the thermal length
//! `√(k_BT/(mω₁²))`, velocity in `ω₁` times that length. In these units the
//! equations of motion are
//!
//! ```text
//! du = v dt
//! dv = (-κ (u - u_eq) - γ v) dt + √(2γ) dW
//! ```
//!
//! with `κ = (ω/ω₁)²` and `γ = Γ/ω₁`, and the stationary covariance is
//! `diag(1/κ, 1)`. Over a step `h` the state maps exactly to
//! `Φ (x - x_eq) + x_eq + L ξ` with `Φ = exp(A h)` and `L Lᵀ = Σ∞ - Φ Σ∞ Φᵀ`.

use crate::mat2::Mat2;

#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct ExactStep {
    pub phi: Mat2,
    /// Lower Cholesky factor of the step noise covariance: `[l11, l21, l22]`.
    pub chol: [f64; 3],
    pub u_eq: f64,
}

impl ExactStep {
    pub fn new(kappa: f64, gamma: f64, h: f64, u_eq: f64) -> Self {
        let phi = propagator(kappa, gamma, h);
        let chol = if gamma > 0.0 {
            let stat = Mat2::diag(1.0 / kappa, 1.0);
            let q = stat - phi.conjugate(&stat);
            cholesky_psd(&q.symmetric_part())
        } else {
            [0.0; 3]
        };
        ExactStep { phi, chol, u_eq }
    }

    pub fn is_noiseless(&self) -> bool {
        self.chol == [0.0; 3]
    }

    #[inline]
    pub fn apply(&self, x: &mut [f64; 2], xi: [f64; 2]) {
        let d = [x[0] - self.u_eq, x[1]];
        let m = &self.phi.0;
        let [l11, l21, l22] = self.chol;
        x[0] = m[0][0] * d[0] + m[0][1] * d[1] + self.u_eq + l11 * xi[0];
        x[1] = m[1][0] * d[0] + m[1][1] * d[1] + l21 * xi[0] + l22 * xi[1];
    }
}

/// `exp(A h)` for `A = [[0, 1], [-κ, -γ]]`.
pub(crate) fn propagator(kappa: f64, gamma: f64, h: f64) -> Mat2 {
    // A + γ/2 I squares to δ I with δ = γ²/4 - κ.
    let half = 0.5 * gamma;
    let delta = half * half - kappa;
    let (c, s) = if delta < 0.0 {
        let w = (-delta).sqrt();
        ((w * h).cos(), (w * h).sin() / w)
    } else if delta > 0.0 {
        let w = delta.sqrt();
        ((w * h).cosh(), (w * h).sinh() / w)
    } else {
        (1.0, h)
    };
    let decay = (-half * h).exp();
    Mat2::new(c + half * s, s, -kappa * s, c - half * s).scale(decay)
}

fn cholesky_psd(q: &Mat2) -> [f64; 3] {
    let l11 = q.get(0, 0).max(0.0).sqrt();
    let l21 = if l11 > 0.0 { q.get(1, 0) / l11 } else { 0.0 };
    let l22 = (q.get(1, 1) - l21 * l21).max(0.0).sqrt();
    [l11, l21, l22]
}

/// Rotation of the pulse-trap mode by `phi` about its equilibrium, in the
/// internal units; `rho = ω₂/ω₁`.
pub(crate) fn pulse_mode_rotation(rho: f64, phi: f64) -> Mat2 {
    let (s, c) = phi.sin_cos();
    Mat2::new(c, s / rho, -rho * s, c)
}
