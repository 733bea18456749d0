//! Covariance propagation for the thermal input state, including the pulse
//! dephasing channel that scales the squeezed-mode coherence `⟨b²⟩` by `η`.
//!
//! Covariances use the convention in which the vacuum state is the identity:
//! `σ = [[2⟨X²⟩, ⟨XP+PX⟩], [⟨XP+PX⟩, 2⟨P²⟩]]` for zero-mean states.

use serde::ser::SerializeStruct;
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::mat2::Mat2;
use crate::squeeze::{free_rotation, pulse_map, TrapPair};
use crate::units::{HBAR, K_B};

const SYMMETRY_TOL: f64 = 1e-12;
/// Relative tolerance used to recognise an isotropic (thermal) covariance.
pub const THERMAL_TOL: f64 = 1e-9;

/// Gaussian state of one mode: covariance plus mean quadratures.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CovarianceState {
    sigma: Mat2,
    mean: [f64; 2],
}

impl CovarianceState {
    /// Validates symmetry (relative 1e-12) and positive definiteness.
    pub fn new(sigma: Mat2, mean: [f64; 2]) -> Result<Self> {
        if !sigma.is_finite() || !mean.iter().all(|x| x.is_finite()) {
            return Err(Error::domain("covariance state has non-finite entries"));
        }
        let scale = sigma.max_abs().max(f64::MIN_POSITIVE);
        if (sigma.get(0, 1) - sigma.get(1, 0)).abs() > SYMMETRY_TOL * scale {
            return Err(Error::domain("covariance matrix is not symmetric"));
        }
        let sigma = sigma.symmetric_part();
        let (lo, _) = sigma.sym_eigenvalues();
        if lo.is_nan() || lo <= 0.0 {
            return Err(Error::domain(format!(
                "covariance matrix is not positive definite (smallest eigenvalue {lo})"
            )));
        }
        Ok(CovarianceState { sigma, mean })
    }

    pub fn sigma(&self) -> &Mat2 {
        &self.sigma
    }

    pub fn mean(&self) -> [f64; 2] {
        self.mean
    }

    /// Eigenvalues `(min, max)` of the covariance.
    pub fn eigenvalues(&self) -> (f64, f64) {
        self.sigma.sym_eigenvalues()
    }

    /// True when `σ = s·I` within relative tolerance `tol`.
    pub fn is_isotropic(&self, tol: f64) -> bool {
        let s = self.sigma;
        let scale = s.get(0, 0).abs().max(s.get(1, 1).abs());
        (s.get(0, 0) - s.get(1, 1)).abs() <= tol * scale && s.get(0, 1).abs() <= tol * scale
    }

    /// Physical states satisfy `det σ ≥ 1` in the vacuum = 1 convention.
    pub fn is_physical(&self) -> bool {
        self.sigma.det() >= 1.0 - 1e-12
    }

    /// Applies a linear phase-space map to covariance and mean.
    pub fn transformed(&self, map: &Mat2) -> Result<CovarianceState> {
        CovarianceState::new(map.conjugate(&self.sigma), map.apply(self.mean))
    }
}

impl Serialize for CovarianceState {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = serializer.serialize_struct("CovarianceState", 3)?;
        st.serialize_field(
            "sigma",
            &[self.sigma.get(0, 0), self.sigma.get(0, 1), self.sigma.get(1, 1)],
        )?;
        st.serialize_field("mean", &self.mean)?;
        st.serialize_field("convention", "vacuum=1")?;
        st.end()
    }
}

impl<'de> Deserialize<'de> for CovarianceState {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            sigma: [f64; 3],
            mean: [f64; 2],
            #[serde(default)]
            convention: Option<String>,
        }
        let raw = Raw::deserialize(deserializer)?;
        if let Some(c) = &raw.convention {
            if c != "vacuum=1" {
                return Err(serde::de::Error::custom(format!("unsupported convention {c:?}")));
            }
        }
        let [a, b, d] = raw.sigma;
        CovarianceState::new(Mat2::new(a, b, b, d), raw.mean).map_err(serde::de::Error::custom)
    }
}

/// Initial thermal occupancy of the reference mode.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThermalParams {
    pub occupancy: f64,
    pub temperature: Option<f64>,
}

impl ThermalParams {
    pub fn new(occupancy: f64) -> Result<Self> {
        if !(occupancy.is_finite() && occupancy >= 0.0) {
            return Err(Error::domain(format!("occupancy must be >= 0, got {occupancy}")));
        }
        Ok(ThermalParams {
            occupancy,
            temperature: None,
        })
    }

    pub fn from_temperature(omega: f64, temperature: f64) -> Result<Self> {
        Ok(ThermalParams {
            occupancy: thermal_occupancy(omega, temperature)?,
            temperature: Some(temperature),
        })
    }

    /// `2N + 1`, the quadrature variance of the thermal state.
    pub fn quadrature_variance(&self) -> f64 {
        2.0 * self.occupancy + 1.0
    }
}

/// Residual phase coherence `η ∈ [0, 1]` left after a pulse.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DephasingModel {
    pub eta: f64,
}

impl DephasingModel {
    pub const NONE: DephasingModel = DephasingModel { eta: 1.0 };

    pub fn new(eta: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&eta) {
            return Err(Error::domain(format!("eta must lie in [0, 1], got {eta}")));
        }
        Ok(DephasingModel { eta })
    }

    /// Standard deviation of a zero-mean Gaussian rotation `φ` of the pulse
    /// mode with `⟨e^{2iφ}⟩ = η`, i.e. `√(-ln η / 2)`.
    pub fn jitter_std(&self) -> f64 {
        (-self.eta.ln() / 2.0).sqrt()
    }

    pub fn from_jitter_std(std: f64) -> Result<Self> {
        if !(std.is_finite() && std >= 0.0) {
            return Err(Error::domain(format!("jitter std must be >= 0, got {std}")));
        }
        DephasingModel::new((-2.0 * std * std).exp())
    }
}

/// Bose occupancy `1 / (exp(ħω/k_BT) - 1)`.
pub fn thermal_occupancy(omega: f64, temperature: f64) -> Result<f64> {
    if !(omega.is_finite() && omega > 0.0) {
        return Err(Error::domain(format!("omega must be positive, got {omega}")));
    }
    if !(temperature.is_finite() && temperature > 0.0) {
        return Err(Error::domain(format!(
            "temperature must be positive, got {temperature}"
        )));
    }
    let x = HBAR * omega / (K_B * temperature);
    Ok(1.0 / x.exp_m1())
}

pub fn initial_thermal(occupancy: f64) -> Result<CovarianceState> {
    let thermal = ThermalParams::new(occupancy)?;
    CovarianceState::new(Mat2::scalar(thermal.quadrature_variance()), [0.0, 0.0])
}

/// Covariance right after a pulse of length `tau` acting on a thermal state,
/// with the squeezed-mode coherence reduced by `η`.
///
/// Only thermal (isotropic, vacuum = 1) inputs are accepted; the closed form
/// is derived for that case. The mean follows the noiseless pulse map.
pub fn propagate_pulse(
    state: &CovarianceState,
    trap: &TrapPair,
    tau: f64,
    dephasing: &DephasingModel,
) -> Result<CovarianceState> {
    if !state.is_isotropic(THERMAL_TOL) {
        return Err(Error::Unsupported(
            "pulse dephasing is only defined for thermal (isotropic) input states".into(),
        ));
    }
    DephasingModel::new(dephasing.eta)?;
    let map = pulse_map(trap, tau)?;
    let n = state.sigma.get(0, 0);
    let (w1, w2) = (trap.omega1, trap.omega2);
    let (sin2, cos2) = (2.0 * w2 * tau).sin_cos();
    let c = dephasing.eta * cos2;
    let s = dephasing.eta * sin2;
    let r2 = (w1 / w2).powi(2);
    let s11 = n * (0.5 * (1.0 + c) + r2 * 0.5 * (1.0 - c));
    let s22 = n * (0.5 * (1.0 + c) + 0.5 * (1.0 - c) / r2);
    let s12 = n * s * (w1 * w1 - w2 * w2) / (2.0 * w1 * w2);
    CovarianceState::new(Mat2::new(s11, s12, s12, s22), map.apply(state.mean))
}

/// Smallest eigenvalue of the covariance: the squeezed-quadrature variance.
pub fn mu_min(state: &CovarianceState) -> f64 {
    state.eigenvalues().0
}

/// `-½·10·log₁₀(μ_min / (2N+1))`: squeezing of standard deviations relative to
/// the initial thermal state.
pub fn squeezing_db_noisy(state_after: &CovarianceState, occupancy: f64) -> Result<f64> {
    let thermal = ThermalParams::new(occupancy)?;
    Ok(-5.0 * (mu_min(state_after) / thermal.quadrature_variance()).log10())
}

/// Weak-damping relaxation towards the thermal state while rotating at `omega1`.
///
/// The deviation from equilibrium rotates with the trap and shrinks as
/// `e^{-Γt}`; the mean rotates and shrinks as `e^{-Γt/2}`. `gamma` is the
/// velocity damping rate in rad/s. Accurate for `Γ ≪ ω₁`.
pub fn relax_toward_thermal(
    state: &CovarianceState,
    gamma: f64,
    occupancy: f64,
    omega1: f64,
    t: f64,
) -> Result<CovarianceState> {
    if !(gamma.is_finite() && gamma >= 0.0) {
        return Err(Error::domain(format!("gamma must be >= 0, got {gamma}")));
    }
    let thermal = Mat2::scalar(ThermalParams::new(occupancy)?.quadrature_variance());
    let rot = *free_rotation(omega1, t)?.matrix();
    let decay = (-gamma * t).exp();
    let deviation = rot.conjugate(&(state.sigma - thermal));
    let sigma = thermal + deviation.scale(decay);
    let mean = rot.apply(state.mean);
    let amp = (-0.5 * gamma * t).exp();
    CovarianceState::new(sigma, [mean[0] * amp, mean[1] * amp])
}
