//! Noiseless pulse algebra on the dimensionless quadratures `(X, P)` of the
//! reference mode, i.e. the mode of the trap at `omega1`.
//!
//! A pulse switches the trap to `omega2` for a duration `tau` and back. In the
//! quadratures of the reference mode this is the linear map
//!
//! ```text
//! M(τ) = [[ cos ω₂τ,           (ω₁/ω₂) sin ω₂τ ],
//!         [ -(ω₂/ω₁) sin ω₂τ,  cos ω₂τ         ]]
//! ```
//!
//! a rotation conjugated by the squeeze that relates the two trap modes.
//! `det M = 1`, so the squeezing is carried entirely by the singular values.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mat2::Mat2;

/// Tolerance on `|det - 1|` for a matrix to count as a one-mode symplectic map.
pub const SYMPLECTIC_TOL: f64 = 1e-9;

/// The two trap angular frequencies in rad/s.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrapPair {
    pub omega1: f64,
    pub omega2: f64,
}

impl TrapPair {
    pub fn new(omega1: f64, omega2: f64) -> Result<Self> {
        let trap = TrapPair { omega1, omega2 };
        trap.validate()?;
        Ok(trap)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, w) in [("omega1", self.omega1), ("omega2", self.omega2)] {
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::domain(format!("{name} must be positive and finite, got {w}")));
            }
        }
        Ok(())
    }

    /// `omega1 / omega2`.
    pub fn ratio(&self) -> f64 {
        self.omega1 / self.omega2
    }

    pub fn swapped(&self) -> TrapPair {
        TrapPair {
            omega1: self.omega2,
            omega2: self.omega1,
        }
    }
}

/// A linear map on `(X, P)` with unit determinant.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct QuadratureMap {
    m: Mat2,
}

impl QuadratureMap {
    pub const IDENTITY: QuadratureMap = QuadratureMap { m: Mat2::IDENTITY };

    /// Wraps `m`, rejecting matrices that are not symplectic.
    pub fn new(m: Mat2) -> Result<Self> {
        if !m.is_finite() {
            return Err(Error::domain("quadrature map has non-finite entries"));
        }
        let det = m.det();
        if (det - 1.0).abs() > SYMPLECTIC_TOL {
            return Err(Error::domain(format!(
                "quadrature map is not symplectic: det = {det}"
            )));
        }
        Ok(QuadratureMap { m })
    }

    pub(crate) fn from_matrix_unchecked(m: Mat2) -> Self {
        QuadratureMap { m }
    }

    pub fn matrix(&self) -> &Mat2 {
        &self.m
    }

    /// The map obtained by applying `self` first and then `next`.
    pub fn then(&self, next: &QuadratureMap) -> QuadratureMap {
        QuadratureMap { m: next.m * self.m }
    }

    /// Exact inverse; for a unit-determinant 2×2 matrix this is the adjugate.
    pub fn inverse(&self) -> QuadratureMap {
        let [[a, b], [c, d]] = self.m.0;
        QuadratureMap {
            m: Mat2::new(d, -b, -c, a),
        }
    }

    pub fn singular_values(&self) -> (f64, f64) {
        self.m.singular_values()
    }

    pub fn apply(&self, v: [f64; 2]) -> [f64; 2] {
        self.m.apply(v)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SegmentKind {
    /// Trap held at `omega2`.
    Pulse,
    /// Free evolution in the reference trap at `omega1`.
    Gap,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub kind: SegmentKind,
    /// Seconds.
    pub duration: f64,
}

impl Segment {
    pub fn pulse(duration: f64) -> Self {
        Segment {
            kind: SegmentKind::Pulse,
            duration,
        }
    }

    pub fn gap(duration: f64) -> Self {
        Segment {
            kind: SegmentKind::Gap,
            duration,
        }
    }
}

/// Time-ordered switching sequence. Outside the schedule the trap sits at
/// `omega1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PulseSchedule {
    pub segments: Vec<Segment>,
    pub trap: TrapPair,
}

impl PulseSchedule {
    pub fn new(trap: TrapPair, segments: Vec<Segment>) -> Result<Self> {
        let schedule = PulseSchedule { segments, trap };
        schedule.validate()?;
        Ok(schedule)
    }

    pub fn single_pulse(trap: TrapPair, tau: f64) -> Result<Self> {
        PulseSchedule::new(trap, vec![Segment::pulse(tau)])
    }

    /// `n` pulses of length `tau` separated by gaps of length `gap`.
    pub fn pulse_train(trap: TrapPair, tau: f64, gap: f64, n: usize) -> Result<Self> {
        let mut segments = Vec::with_capacity(2 * n);
        for i in 0..n {
            if i > 0 {
                segments.push(Segment::gap(gap));
            }
            segments.push(Segment::pulse(tau));
        }
        PulseSchedule::new(trap, segments)
    }

    pub fn validate(&self) -> Result<()> {
        self.trap.validate()?;
        if self.segments.is_empty() {
            return Err(Error::domain("pulse schedule has no segments"));
        }
        if let Some(s) = self
            .segments
            .iter()
            .find(|s| !(s.duration.is_finite() && s.duration >= 0.0))
        {
            return Err(Error::domain(format!(
                "segment durations must be finite and non-negative, got {}",
                s.duration
            )));
        }
        Ok(())
    }

    pub fn total_duration(&self) -> f64 {
        self.segments.iter().map(|s| s.duration).sum()
    }

    pub fn pulse_count(&self) -> usize {
        self.segments
            .iter()
            .filter(|s| s.kind == SegmentKind::Pulse)
            .count()
    }

    /// The same segments in reverse time order.
    pub fn reversed(&self) -> PulseSchedule {
        PulseSchedule {
            segments: self.segments.iter().rev().copied().collect(),
            trap: self.trap,
        }
    }
}

/// `r = ½ ln(ω₂/ω₁)`, negative when the pulse trap is softer.
pub fn squeeze_r(trap: &TrapPair) -> Result<f64> {
    trap.validate()?;
    Ok(0.5 * (trap.omega2 / trap.omega1).ln())
}

/// Map of a pulse of length `tau` held at `omega2`.
pub fn pulse_map(trap: &TrapPair, tau: f64) -> Result<QuadratureMap> {
    trap.validate()?;
    if !(tau.is_finite() && tau >= 0.0) {
        return Err(Error::domain(format!("pulse duration must be >= 0, got {tau}")));
    }
    // e^{-2r} = ω₁/ω₂
    let stretch = trap.ratio();
    let (s, c) = (trap.omega2 * tau).sin_cos();
    Ok(QuadratureMap::from_matrix_unchecked(Mat2::new(
        c,
        stretch * s,
        -s / stretch,
        c,
    )))
}

/// Harmonic evolution at `omega` for time `t`: a clockwise phase-space rotation by `ωt`.
pub fn free_rotation(omega: f64, t: f64) -> Result<QuadratureMap> {
    if !(omega.is_finite() && omega > 0.0) {
        return Err(Error::domain(format!("omega must be positive, got {omega}")));
    }
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::domain(format!("evolution time must be >= 0, got {t}")));
    }
    Ok(QuadratureMap::from_matrix_unchecked(Mat2::rotation(omega * t)))
}

/// Product of the segment maps, earliest segment applied first.
pub fn compose_schedule(schedule: &PulseSchedule) -> Result<QuadratureMap> {
    schedule.validate()?;
    let trap = &schedule.trap;
    schedule
        .segments
        .iter()
        .try_fold(QuadratureMap::IDENTITY, |acc, seg| {
            let step = match seg.kind {
                SegmentKind::Pulse => pulse_map(trap, seg.duration)?,
                SegmentKind::Gap => free_rotation(trap.omega1, seg.duration)?,
            };
            Ok(acc.then(&step))
        })
}

/// Squeezing of a map in dB of standard deviation: `10 |log₁₀ √μ|` with
/// `(μ, 1/μ)` the eigenvalues of `M Mᵀ`.
pub fn squeezing_db(map: &QuadratureMap) -> Result<f64> {
    let m = map.matrix();
    let det = m.det();
    if (det - 1.0).abs() > SYMPLECTIC_TOL {
        return Err(Error::domain(format!("map is not symplectic: det = {det}")));
    }
    let (_, mu) = (*m * m.transpose()).sym_eigenvalues();
    Ok(5.0 * mu.log10().abs())
}

/// `10 log₁₀(max(ω₁,ω₂)/min(ω₁,ω₂))`.
pub fn lambda_max(trap: &TrapPair) -> Result<f64> {
    trap.validate()?;
    let hi = trap.omega1.max(trap.omega2);
    let lo = trap.omega1.min(trap.omega2);
    Ok(10.0 * (hi / lo).log10())
}

/// Pulse length giving maximal squeezing, `π / (2 ω₂)`.
pub fn optimal_tau(trap: &TrapPair) -> Result<f64> {
    trap.validate()?;
    Ok(FRAC_PI_2 / trap.omega2)
}

#[cfg(test)]
mod tests {
    use std::f64::consts::{FRAC_PI_4, PI};

    use approx::assert_abs_diff_eq;

    use super::*;
    use crate::units::hz_to_rad_s;

    fn reference_trap() -> TrapPair {
        TrapPair::new(hz_to_rad_s(112e3), hz_to_rad_s(49.3e3)).unwrap()
    }

    #[test]
    fn squeeze_r_values() {
        assert_abs_diff_eq!(squeeze_r(&reference_trap()).unwrap(), -0.4103, epsilon = 1e-4);
        let w = 1.3e5;
        assert_eq!(squeeze_r(&TrapPair::new(w, w).unwrap()).unwrap(), 0.0);
        let e2 = 1f64.exp().powi(2);
        assert_abs_diff_eq!(squeeze_r(&TrapPair::new(w, e2 * w).unwrap()).unwrap(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn non_positive_frequency_is_domain_error() {
        assert!(matches!(TrapPair::new(0.0, 1.0), Err(Error::Domain(_))));
        let bad = TrapPair { omega1: 1.0, omega2: -2.0 };
        assert!(matches!(squeeze_r(&bad), Err(Error::Domain(_))));
        assert!(lambda_max(&bad).is_err());
    }

    #[test]
    fn pulse_map_zero_duration_is_identity() {
        let m = pulse_map(&reference_trap(), 0.0).unwrap();
        assert_eq!(*m.matrix(), Mat2::IDENTITY);
    }

    #[test]
    fn pulse_map_quarter_period() {
        // Frozen from direct evaluation: ω₁/ω₂ = 112/49.3.
        let trap = reference_trap();
        let m = pulse_map(&trap, FRAC_PI_2 / trap.omega2).unwrap();
        let expected = Mat2::new(0.0, 2.2718, -0.4402, 0.0);
        assert!(m.matrix().max_abs_diff(&expected) < 1e-3, "{:?}", m);
    }

    #[test]
    fn equal_frequencies_give_pure_rotation() {
        let w = hz_to_rad_s(112e3);
        let trap = TrapPair::new(w, w).unwrap();
        let tau = 3.3e-6;
        let m = pulse_map(&trap, tau).unwrap();
        assert!(m.matrix().max_abs_diff(&Mat2::rotation(w * tau)) < 1e-15);
    }

    #[test]
    fn pulse_map_is_heisenberg_evolution() {
        // Integrate z'' = -ω₂² z directly and express in ω₁ quadratures.
        let trap = reference_trap();
        let tau = 2.9e-6;
        let (w1, w2) = (trap.omega1, trap.omega2);
        let (z0, p0) = (0.3, -1.2); // X = z·√ω₁, P = p/√ω₁ with m = 1
        let z = z0 * (w2 * tau).cos() + p0 / w2 * (w2 * tau).sin();
        let p = -z0 * w2 * (w2 * tau).sin() + p0 * (w2 * tau).cos();
        let out = pulse_map(&trap, tau).unwrap().apply([z0 * w1.sqrt(), p0 / w1.sqrt()]);
        assert_abs_diff_eq!(out[0], z * w1.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(out[1], p / w1.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn free_rotation_examples() {
        let w = 2.0;
        assert_eq!(*free_rotation(w, 0.0).unwrap().matrix(), Mat2::IDENTITY);
        let half = free_rotation(w, PI / w).unwrap();
        assert!(half.matrix().max_abs_diff(&Mat2::scalar(-1.0)) < 1e-15);
        let quarter = free_rotation(w, FRAC_PI_2 / w).unwrap();
        assert!(quarter.matrix().max_abs_diff(&Mat2::new(0.0, 1.0, -1.0, 0.0)) < 1e-15);
        assert!(free_rotation(w, -1.0).is_err());
    }

    #[test]
    fn compose_single_and_empty_schedules() {
        let trap = reference_trap();
        let tau = 4.1e-6;
        let single = PulseSchedule::single_pulse(trap, tau).unwrap();
        assert_eq!(compose_schedule(&single).unwrap(), pulse_map(&trap, tau).unwrap());

        let zero = PulseSchedule::new(trap, vec![Segment::pulse(0.0), Segment::gap(0.0)]).unwrap();
        assert_eq!(*compose_schedule(&zero).unwrap().matrix(), Mat2::IDENTITY);

        assert!(PulseSchedule::new(trap, vec![]).is_err());
        assert!(PulseSchedule::new(trap, vec![Segment::gap(-1e-6)]).is_err());
    }

    #[test]
    fn two_pulses_squeeze_more_than_one() {
        // Oracle: SVD of M·G·M with M the quarter-period pulse and G a quarter
        // turn gives singular values (R², 1/R²) = (5.1611, 0.19376).
        let trap = reference_trap();
        let tau = optimal_tau(&trap).unwrap();
        let gap = FRAC_PI_2 / trap.omega1;
        let two = PulseSchedule::pulse_train(trap, tau, gap, 2).unwrap();
        let (lo2, hi2) = compose_schedule(&two).unwrap().singular_values();
        let (lo1, hi1) = pulse_map(&trap, tau).unwrap().singular_values();
        assert!(hi2 > hi1 && lo2 < lo1);
        assert_abs_diff_eq!(hi2, 5.161_099_2, epsilon = 1e-6);
        assert_abs_diff_eq!(lo2, 0.193_757_17, epsilon = 1e-7);
    }

    #[test]
    fn squeezing_db_examples() {
        let trap = reference_trap();
        assert_eq!(squeezing_db(&QuadratureMap::IDENTITY).unwrap(), 0.0);
        let at = |angle: f64| squeezing_db(&pulse_map(&trap, angle / trap.omega2).unwrap()).unwrap();
        assert_abs_diff_eq!(at(FRAC_PI_2), 3.56, epsilon = 0.01);
        // Frozen from numpy SVD of M at ω₂τ = π/4: 2.64569 dB.
        assert_abs_diff_eq!(at(FRAC_PI_4), 2.645_689, epsilon = 1e-5);
        assert_abs_diff_eq!(at(FRAC_PI_4), 2.65, epsilon = 0.02);
    }

    #[test]
    fn squeezing_db_rejects_non_symplectic() {
        let m = QuadratureMap::from_matrix_unchecked(Mat2::diag(2.0, 2.0));
        assert!(matches!(squeezing_db(&m), Err(Error::Domain(_))));
        assert!(QuadratureMap::new(Mat2::diag(2.0, 2.0)).is_err());
        assert!(QuadratureMap::new(Mat2::diag(2.0, 0.5)).is_ok());
    }

    #[test]
    fn lambda_max_examples() {
        assert_abs_diff_eq!(lambda_max(&reference_trap()).unwrap(), 3.56, epsilon = 0.01);
        let w = 7.0e5;
        assert_eq!(lambda_max(&TrapPair::new(w, w).unwrap()).unwrap(), 0.0);
        let fitted = TrapPair::new(hz_to_rad_s(112e3), hz_to_rad_s(47.9e3)).unwrap();
        assert_abs_diff_eq!(lambda_max(&fitted).unwrap(), 3.69, epsilon = 0.01);
    }

    #[test]
    fn optimal_tau_examples() {
        let trap = reference_trap();
        assert_abs_diff_eq!(optimal_tau(&trap).unwrap(), 5.071e-6, epsilon = 1e-9);
        let fitted = TrapPair::new(hz_to_rad_s(112e3), hz_to_rad_s(47.9e3)).unwrap();
        assert_abs_diff_eq!(optimal_tau(&fitted).unwrap(), 5.219e-6, epsilon = 1e-9);
        let at_opt = squeezing_db(&pulse_map(&trap, optimal_tau(&trap).unwrap()).unwrap()).unwrap();
        assert_abs_diff_eq!(at_opt, lambda_max(&trap).unwrap(), epsilon = 1e-12);
    }

    #[test]
    fn schedule_serializes_with_lowercase_kinds() {
        let s = PulseSchedule::pulse_train(reference_trap(), 1e-6, 2e-6, 2).unwrap();
        let json = serde_json::to_string(&s).unwrap();
        assert!(json.contains("\"pulse\"") && json.contains("\"gap\""));
        let map = compose_schedule(&s).unwrap();
        let v: Vec<f64> = serde_json::from_str(&serde_json::to_string(&map).unwrap()).unwrap();
        assert_eq!(v.len(), 4);
    }
}
