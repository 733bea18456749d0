//! Particle, gas and optical-trap parameters and the derived damping rate and
//! trap frequency.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::{EPSILON_0, K_B, SPEED_OF_LIGHT};

/// Prefactor of the free-molecular gas damping rate `Γ ≈ 15.8 r² p / (m v_gas)`.
pub const GAS_DAMPING_PREFACTOR: f64 = 15.8;

/// Allowed mismatch between `mass` and `(4/3)πr³ρ` when a density is given.
pub const DENSITY_TOLERANCE: f64 = 0.2;

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::validation(name, format!("must be positive, got {v}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParticleParams {
    /// m
    pub radius: f64,
    /// kg
    pub mass: f64,
    /// kg/m³
    pub density: Option<f64>,
}

impl ParticleParams {
    pub fn new(radius: f64, mass: f64, density: Option<f64>) -> Result<Self> {
        let p = ParticleParams { radius, mass, density };
        p.validate()?;
        Ok(p)
    }

    /// Mass from radius and density.
    pub fn from_density(radius: f64, density: f64) -> Result<Self> {
        positive("density", density)?;
        ParticleParams::new(radius, sphere_mass(radius, density), Some(density))
    }

    pub fn validate(&self) -> Result<()> {
        positive("radius", self.radius)?;
        positive("mass", self.mass)?;
        if let Some(rho) = self.density {
            positive("density", rho)?;
            let expected = sphere_mass(self.radius, rho);
            if ((self.mass - expected) / expected).abs() > DENSITY_TOLERANCE {
                return Err(Error::validation(
                    "mass",
                    format!(
                        "{:.3e} kg is inconsistent with radius and density (expected {:.3e} kg ± 20%)",
                        self.mass, expected
                    ),
                ));
            }
        }
        Ok(())
    }
}

pub fn sphere_mass(radius: f64, density: f64) -> f64 {
    4.0 / 3.0 * PI * radius.powi(3) * density
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GasEnvironment {
    /// Pa
    pub pressure: f64,
    /// K
    pub temperature: f64,
    /// kg
    pub molecule_mass: f64,
}

impl GasEnvironment {
    pub fn validate(&self) -> Result<()> {
        if !(self.pressure.is_finite() && self.pressure >= 0.0) {
            return Err(Error::validation("pressure", format!("must be >= 0, got {}", self.pressure)));
        }
        positive("gas temperature", self.temperature)?;
        positive("molecule mass", self.molecule_mass)
    }

    /// Mean thermal speed `√(3 k_B T / m_gas)`.
    pub fn thermal_velocity(&self) -> f64 {
        (3.0 * K_B * self.temperature / self.molecule_mass).sqrt()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrapOptics {
    /// W
    pub power: f64,
    /// C·m²/V
    pub polarizability: f64,
    /// Beam waist at focus, m.
    pub waist: f64,
}

impl TrapOptics {
    pub fn validate(&self) -> Result<()> {
        positive("power", self.power)?;
        positive("polarizability", self.polarizability)?;
        positive("waist", self.waist)
    }

    /// Axial stiffness `k₀ = 8αP / (c π ε₀ w⁴)` in N/m.
    pub fn stiffness(&self) -> f64 {
        8.0 * self.polarizability * self.power / (SPEED_OF_LIGHT * PI * EPSILON_0 * self.waist.powi(4))
    }
}

/// Clausius–Mossotti polarizability `4πε₀ r³ (εᵣ-1)/(εᵣ+2)` of a dielectric sphere.
pub fn sphere_polarizability(radius: f64, permittivity: f64) -> f64 {
    4.0 * PI * EPSILON_0 * radius.powi(3) * (permittivity - 1.0) / (permittivity + 2.0)
}

/// Velocity damping rate from background-gas collisions, rad/s.
pub fn gas_damping(particle: &ParticleParams, gas: &GasEnvironment) -> Result<f64> {
    particle.validate()?;
    gas.validate()?;
    Ok(GAS_DAMPING_PREFACTOR * particle.radius.powi(2) * gas.pressure
        / (particle.mass * gas.thermal_velocity()))
}

/// Pressure at which `gas_damping` equals `gamma` for the given particle.
pub fn pressure_for_damping(gamma: f64, particle: &ParticleParams, gas: &GasEnvironment) -> Result<f64> {
    particle.validate()?;
    Ok(gamma * particle.mass * gas.thermal_velocity() / (GAS_DAMPING_PREFACTOR * particle.radius.powi(2)))
}

/// Inverts the damping law for the radius of a sphere of known density.
pub fn radius_from_damping(gamma: f64, gas: &GasEnvironment, density: f64) -> Result<f64> {
    positive("gamma", gamma)?;
    positive("density", density)?;
    gas.validate()?;
    positive("pressure", gas.pressure)?;
    // Γ = 15.8 r² p / ((4/3)π r³ ρ v) = 3·15.8 p / (4π ρ v r)
    Ok(3.0 * GAS_DAMPING_PREFACTOR * gas.pressure / (4.0 * PI * density * gas.thermal_velocity() * gamma))
}

/// Axial trap frequency `√(k₀/m)`, rad/s.
pub fn trap_frequency(optics: &TrapOptics, mass: f64) -> Result<f64> {
    optics.validate()?;
    positive("mass", mass)?;
    Ok((optics.stiffness() / mass).sqrt())
}

#[cfg(test)]
mod tests {
    use approx::assert_relative_eq;

    use super::*;
    use crate::units::{hz_to_rad_s, AIR_MOLECULE_MASS};

    fn particle() -> ParticleParams {
        ParticleParams::new(32e-9, 3.1e-19, None).unwrap()
    }

    fn air(pressure: f64) -> GasEnvironment {
        GasEnvironment {
            pressure,
            temperature: 300.0,
            molecule_mass: AIR_MOLECULE_MASS,
        }
    }

    #[test]
    fn damping_vanishes_without_gas() {
        assert_eq!(gas_damping(&particle(), &air(0.0)).unwrap(), 0.0);
    }

    #[test]
    fn damping_is_linear_in_pressure() {
        let g1 = gas_damping(&particle(), &air(5.0)).unwrap();
        let g2 = gas_damping(&particle(), &air(10.0)).unwrap();
        assert_relative_eq!(g2, 2.0 * g1, max_relative = 1e-14);
    }

    #[test]
    fn damping_at_replica_pressure() {
        // Direct evaluation: 1027.6 rad/s = 2π·163.6 Hz.
        let g = gas_damping(&particle(), &air(10.0)).unwrap();
        assert_relative_eq!(g, hz_to_rad_s(164.0), max_relative = 0.02);
    }

    #[test]
    fn radius_inversion_round_trip() {
        let p = ParticleParams::from_density(32e-9, 2200.0).unwrap();
        let gas = air(13.0);
        let g = gas_damping(&p, &gas).unwrap();
        assert_relative_eq!(radius_from_damping(g, &gas, 2200.0).unwrap(), 32e-9, max_relative = 1e-12);
        let pressure = pressure_for_damping(g, &p, &gas).unwrap();
        assert_relative_eq!(pressure, 13.0, max_relative = 1e-12);
    }

    #[test]
    fn density_consistency_is_checked() {
        // (4/3)π(32 nm)³ ρ = 3.1e-19 kg at ρ ≈ 2258 kg/m³
        assert!(ParticleParams::new(32e-9, 3.1e-19, Some(2200.0)).is_ok());
        assert!(ParticleParams::new(32e-9, 3.1e-19, Some(1000.0)).is_err());
        assert!(ParticleParams::new(-1.0, 3.1e-19, None).is_err());
    }

    fn optics(power: f64, waist: f64) -> TrapOptics {
        TrapOptics {
            power,
            polarizability: sphere_polarizability(32e-9, 2.1),
            waist,
        }
    }

    #[test]
    fn trap_frequency_scaling() {
        let m = 3.1e-19;
        let w = trap_frequency(&optics(0.1, 1e-6), m).unwrap();
        assert_relative_eq!(trap_frequency(&optics(0.4, 1e-6), m).unwrap(), 2.0 * w, max_relative = 1e-12);
        assert_relative_eq!(trap_frequency(&optics(0.1, 0.5e-6), m).unwrap(), 4.0 * w, max_relative = 1e-12);
    }

    #[test]
    fn power_ratio_reproduces_frequency_pair() {
        let m = 3.1e-19;
        let p1 = 0.2;
        let p2 = p1 * (49.3f64 / 112.0).powi(2);
        assert_relative_eq!(p2 / p1, 0.194, max_relative = 2e-3);
        let w1 = trap_frequency(&optics(p1, 1e-6), m).unwrap();
        let w2 = trap_frequency(&optics(p2, 1e-6), m).unwrap();
        assert_relative_eq!(w1 / w2, 112.0 / 49.3, max_relative = 1e-12);
    }
}
