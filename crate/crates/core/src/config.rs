//! Experiment configuration: a flat key–value file (TOML, or JSON) with the
//! unit in every key name. Missing keys take documented defaults and the
//! loaded [`ExperimentConfig`] has every field filled in.

use std::f64::consts::{PI, TAU};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::DephasingModel;
use crate::sigproc::{DerivativeStencil, PrepareOptions};
use crate::sim::{
    gas_damping, sphere_mass, sphere_polarizability, trap_frequency, GasEnvironment, InitialSampling,
    LangevinParams, ParticleParams, TrapOptics, DEFAULT_MAX_SAMPLES,
};
use crate::squeeze::{PulseSchedule, Segment, TrapPair};
use crate::units::{hz_to_rad_s, AIR_MOLECULE_MASS};

pub const DEFAULT_PARTICLE_RADIUS_M: f64 = 32e-9;
pub const DEFAULT_PARTICLE_DENSITY_KG_M3: f64 = 2200.0;
pub const DEFAULT_PARTICLE_PERMITTIVITY: f64 = 2.1;
pub const DEFAULT_GAS_PRESSURE_PA: f64 = 10.0;
pub const DEFAULT_GAS_TEMPERATURE_K: f64 = 300.0;
pub const DEFAULT_DT_S: f64 = 5e-7;
pub const DEFAULT_FILTER_HALFWIDTH_HZ: f64 = 30e3;

/// Every key accepted in a configuration file.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    omega1_rad_s: Option<f64>,
    omega2_rad_s: Option<f64>,
    omega2_true_rad_s: Option<f64>,
    trap_power1_w: Option<f64>,
    trap_power2_w: Option<f64>,
    beam_waist_m: Option<f64>,
    particle_permittivity: Option<f64>,

    particle_radius_m: Option<f64>,
    particle_mass_kg: Option<f64>,
    particle_density_kg_m3: Option<f64>,

    gas_pressure_pa: Option<f64>,
    gas_temperature_k: Option<f64>,
    gas_molecule_mass_kg: Option<f64>,
    gamma_rad_s: Option<f64>,

    pulse_start_s: Option<f64>,
    pulse_durations_s: Option<Vec<f64>>,
    gap_durations_s: Option<Vec<f64>>,

    n_traces: Option<usize>,
    duration_s: Option<f64>,
    dt_s: Option<f64>,
    seed: Option<u64>,
    initial_sampling: Option<InitialSampling>,
    max_samples: Option<u64>,

    eta: Option<f64>,
    jitter_std_rad: Option<f64>,
    measurement_floor_m_rthz: Option<f64>,
    pulse_offset_m: Option<f64>,

    filter_center_rad_s: Option<f64>,
    filter_halfwidth_rad_s: Option<f64>,
    derivative_stencil: Option<DerivativeStencil>,
    decay_compensation: Option<bool>,
    after_delay_s: Option<f64>,
    psd_segment_length: Option<usize>,
    psd_overlap: Option<f64>,
    psd_fit_halfwidth_rad_s: Option<f64>,

    sweep_n_taus: Option<usize>,
    sweep_tau_min_s: Option<f64>,
    sweep_tau_max_s: Option<f64>,
    sweep_n_traces: Option<usize>,
    sweep_pulse_start_s: Option<f64>,
    sweep_duration_s: Option<f64>,
    psd_n_traces: Option<usize>,
    psd_duration_s: Option<f64>,
    fig2_delays_s: Option<Vec<f64>>,
}

/// A fully populated, validated experiment description. Serialises back to
/// the same flat key set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Reference (long-lived) trap frequency.
    pub omega1_rad_s: f64,
    /// Commanded pulse trap frequency; the starting point of model fits.
    pub omega2_rad_s: f64,
    /// Pulse trap frequency actually used by the simulator.
    pub omega2_true_rad_s: f64,

    pub particle_radius_m: f64,
    pub particle_mass_kg: f64,
    pub particle_density_kg_m3: f64,

    pub gas_pressure_pa: f64,
    /// Also the bath temperature of the particle motion.
    pub gas_temperature_k: f64,
    pub gas_molecule_mass_kg: f64,
    /// Velocity damping rate; from the gas damping law unless given.
    pub gamma_rad_s: f64,

    pub pulse_start_s: f64,
    pub pulse_durations_s: Vec<f64>,
    /// Free evolution between consecutive pulses; one fewer than pulses.
    pub gap_durations_s: Vec<f64>,

    pub n_traces: usize,
    pub duration_s: f64,
    pub dt_s: f64,
    pub seed: u64,
    pub initial_sampling: InitialSampling,
    pub max_samples: u64,

    pub eta: f64,
    pub jitter_std_rad: f64,
    pub measurement_floor_m_rthz: f64,
    pub pulse_offset_m: f64,

    pub filter_center_rad_s: f64,
    pub filter_halfwidth_rad_s: f64,
    pub derivative_stencil: DerivativeStencil,
    pub decay_compensation: bool,
    /// Extra delay after the settle window before the "after" cloud is taken.
    pub after_delay_s: f64,
    pub psd_segment_length: usize,
    pub psd_overlap: f64,
    /// Half-width of the band around the peak used for Lorentzian fits.
    pub psd_fit_halfwidth_rad_s: f64,

    pub sweep_n_taus: usize,
    pub sweep_tau_min_s: f64,
    pub sweep_tau_max_s: f64,
    pub sweep_n_traces: usize,
    pub sweep_pulse_start_s: f64,
    pub sweep_duration_s: f64,
    pub psd_n_traces: usize,
    pub psd_duration_s: f64,
    /// Times after the pulse end at which phase-space clouds are exported.
    pub fig2_delays_s: Vec<f64>,
}

fn parse_error(path: &Path, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

/// Reads a configuration file. `.json` files are parsed as JSON, anything
/// else as TOML.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)?;
    let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    let raw: RawConfig = if is_json {
        serde_json::from_str(&text)
            .map_err(|e| parse_error(path, format!("line {}, column {}: {e}", e.line(), e.column())))?
    } else {
        toml::from_str(&text).map_err(|e| parse_error(path, e.to_string()))?
    };
    resolve(raw)
}

/// Parses TOML text (no file).
pub fn parse_config_toml(text: &str) -> Result<ExperimentConfig> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| parse_error(Path::new("<string>"), e.to_string()))?;
    resolve(raw)
}

fn resolve(raw: RawConfig) -> Result<ExperimentConfig> {
    let radius = raw.particle_radius_m.unwrap_or(DEFAULT_PARTICLE_RADIUS_M);
    let (mass, density) = match (raw.particle_mass_kg, raw.particle_density_kg_m3) {
        (Some(m), Some(rho)) => (m, rho),
        (Some(m), None) => (m, m / sphere_mass(radius, 1.0)),
        (None, rho) => {
            let rho = rho.unwrap_or(DEFAULT_PARTICLE_DENSITY_KG_M3);
            (sphere_mass(radius, rho), rho)
        }
    };
    let particle = ParticleParams::new(radius, mass, Some(density))?;

    let (omega1, omega2) = match (raw.omega1_rad_s, raw.omega2_rad_s) {
        (Some(a), Some(b)) => (a, b),
        (w1, w2) => {
            let (Some(p1), Some(p2), Some(waist)) = (raw.trap_power1_w, raw.trap_power2_w, raw.beam_waist_m) else {
                return Err(Error::validation(
                    "omega1_rad_s",
                    "give omega1_rad_s and omega2_rad_s, or trap_power1_w, trap_power2_w and beam_waist_m",
                ));
            };
            let alpha = sphere_polarizability(
                radius,
                raw.particle_permittivity.unwrap_or(DEFAULT_PARTICLE_PERMITTIVITY),
            );
            let freq = |power| trap_frequency(&TrapOptics { power, polarizability: alpha, waist }, mass);
            (w1.map_or_else(|| freq(p1), Ok)?, w2.map_or_else(|| freq(p2), Ok)?)
        }
    };

    let gas = GasEnvironment {
        pressure: raw.gas_pressure_pa.unwrap_or(DEFAULT_GAS_PRESSURE_PA),
        temperature: raw.gas_temperature_k.unwrap_or(DEFAULT_GAS_TEMPERATURE_K),
        molecule_mass: raw.gas_molecule_mass_kg.unwrap_or(AIR_MOLECULE_MASS),
    };
    gas.validate()?;
    let gamma = match raw.gamma_rad_s {
        Some(g) => g,
        None => gas_damping(&particle, &gas)?,
    };

    let (eta, jitter) = match (raw.eta, raw.jitter_std_rad) {
        (Some(eta), None) => (eta, DephasingModel::new(eta)?.jitter_std()),
        (None, Some(j)) => (DephasingModel::from_jitter_std(j)?.eta, j),
        (None, None) => (1.0, 0.0),
        (Some(eta), Some(j)) => {
            let implied = DephasingModel::from_jitter_std(j)?.eta;
            if (implied - eta).abs() > 1e-6 {
                return Err(Error::validation(
                    "eta",
                    format!("eta = {eta} disagrees with jitter_std_rad = {j} (implies eta = {implied:.6})"),
                ));
            }
            (eta, j)
        }
    };

    let omega2_true = raw.omega2_true_rad_s.unwrap_or(omega2);
    let half_period2 = PI / omega2;
    let pulse_durations = raw.pulse_durations_s.unwrap_or_else(|| vec![0.5 * half_period2]);
    let gap_durations = raw.gap_durations_s.unwrap_or_else(|| vec![0.0; pulse_durations.len().saturating_sub(1)]);
    let pulse_start = raw.pulse_start_s.unwrap_or(1e-3);
    let duration = raw.duration_s.unwrap_or(4e-3);
    let dt = raw.dt_s.unwrap_or(DEFAULT_DT_S);

    let cfg = ExperimentConfig {
        omega1_rad_s: omega1,
        omega2_rad_s: omega2,
        omega2_true_rad_s: omega2_true,
        particle_radius_m: radius,
        particle_mass_kg: mass,
        particle_density_kg_m3: density,
        gas_pressure_pa: gas.pressure,
        gas_temperature_k: gas.temperature,
        gas_molecule_mass_kg: gas.molecule_mass,
        gamma_rad_s: gamma,
        pulse_start_s: pulse_start,
        pulse_durations_s: pulse_durations,
        gap_durations_s: gap_durations,
        n_traces: raw.n_traces.unwrap_or(2000),
        duration_s: duration,
        dt_s: dt,
        seed: raw.seed.unwrap_or(0),
        initial_sampling: raw.initial_sampling.unwrap_or_default(),
        max_samples: raw.max_samples.unwrap_or(DEFAULT_MAX_SAMPLES),
        eta,
        jitter_std_rad: jitter,
        measurement_floor_m_rthz: raw.measurement_floor_m_rthz.unwrap_or(0.0),
        pulse_offset_m: raw.pulse_offset_m.unwrap_or(0.0),
        filter_center_rad_s: raw.filter_center_rad_s.unwrap_or(omega1),
        filter_halfwidth_rad_s: raw
            .filter_halfwidth_rad_s
            .unwrap_or(hz_to_rad_s(DEFAULT_FILTER_HALFWIDTH_HZ)),
        derivative_stencil: raw.derivative_stencil.unwrap_or_default(),
        decay_compensation: raw.decay_compensation.unwrap_or(true),
        after_delay_s: raw.after_delay_s.unwrap_or(0.0),
        psd_segment_length: raw.psd_segment_length.unwrap_or(1 << 16),
        psd_overlap: raw.psd_overlap.unwrap_or(0.5),
        psd_fit_halfwidth_rad_s: raw.psd_fit_halfwidth_rad_s.unwrap_or(hz_to_rad_s(5e3)),
        sweep_n_taus: raw.sweep_n_taus.unwrap_or(12),
        sweep_tau_min_s: raw.sweep_tau_min_s.unwrap_or(0.04 * half_period2),
        sweep_tau_max_s: raw.sweep_tau_max_s.unwrap_or(0.96 * half_period2),
        sweep_n_traces: raw.sweep_n_traces.unwrap_or(2000),
        sweep_pulse_start_s: raw.sweep_pulse_start_s.unwrap_or(150e-6),
        sweep_duration_s: raw.sweep_duration_s.unwrap_or(400e-6),
        psd_n_traces: raw.psd_n_traces.unwrap_or(4),
        psd_duration_s: raw.psd_duration_s.unwrap_or(0.5),
        fig2_delays_s: raw.fig2_delays_s.unwrap_or_else(|| vec![0.0, 0.25 * TAU / omega1]),
    };
    cfg.validate()?;
    Ok(cfg)
}

impl ExperimentConfig {
    /// Minimal configuration: a trap pair and every other key at its default.
    pub fn from_trap(omega1: f64, omega2: f64) -> Result<ExperimentConfig> {
        resolve(RawConfig {
            omega1_rad_s: Some(omega1),
            omega2_rad_s: Some(omega2),
            ..RawConfig::default()
        })
    }

    /// Checks every cross-field invariant; the error names the violated key.
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::validation(name, format!("must be positive, got {v}")))
            }
        };
        let non_negative = |name: &str, v: f64| {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(Error::validation(name, format!("must be >= 0, got {v}")))
            }
        };
        for (name, v) in [
            ("omega1_rad_s", self.omega1_rad_s),
            ("omega2_rad_s", self.omega2_rad_s),
            ("omega2_true_rad_s", self.omega2_true_rad_s),
            ("dt_s", self.dt_s),
            ("duration_s", self.duration_s),
            ("gas_temperature_k", self.gas_temperature_k),
            ("filter_halfwidth_rad_s", self.filter_halfwidth_rad_s),
            ("psd_fit_halfwidth_rad_s", self.psd_fit_halfwidth_rad_s),
            ("sweep_duration_s", self.sweep_duration_s),
            ("psd_duration_s", self.psd_duration_s),
        ] {
            positive(name, v)?;
        }
        for (name, v) in [
            ("gamma_rad_s", self.gamma_rad_s),
            ("pulse_start_s", self.pulse_start_s),
            ("measurement_floor_m_rthz", self.measurement_floor_m_rthz),
            ("jitter_std_rad", self.jitter_std_rad),
            ("after_delay_s", self.after_delay_s),
            ("sweep_tau_min_s", self.sweep_tau_min_s),
            ("sweep_pulse_start_s", self.sweep_pulse_start_s),
        ] {
            non_negative(name, v)?;
        }
        if !self.pulse_offset_m.is_finite() {
            return Err(Error::validation("pulse_offset_m", "must be finite"));
        }
        if !(0.0..=1.0).contains(&self.eta) {
            return Err(Error::validation("eta", format!("must be in [0, 1], got {}", self.eta)));
        }
        if self.eta == 0.0 {
            return Err(Error::validation("eta", "eta = 0 needs an infinite jitter and cannot be simulated"));
        }
        let nyquist = PI / self.dt_s;
        for (name, w) in [
            ("omega1_rad_s", self.omega1_rad_s),
            ("omega2_rad_s", self.omega2_rad_s),
            ("omega2_true_rad_s", self.omega2_true_rad_s),
        ] {
            if w >= nyquist {
                return Err(Error::validation(
                    name,
                    format!("{w:.4e} rad/s is above the Nyquist limit {nyquist:.4e} rad/s of dt_s = {:e}", self.dt_s),
                ));
            }
        }
        if self.filter_center_rad_s - self.filter_halfwidth_rad_s <= 0.0
            || self.filter_center_rad_s + self.filter_halfwidth_rad_s >= nyquist
        {
            return Err(Error::validation(
                "filter_halfwidth_rad_s",
                "filter band must lie strictly between 0 and the Nyquist frequency",
            ));
        }
        if self.pulse_durations_s.is_empty() {
            return Err(Error::validation("pulse_durations_s", "needs at least one pulse"));
        }
        if self.gap_durations_s.len() + 1 != self.pulse_durations_s.len() {
            return Err(Error::validation(
                "gap_durations_s",
                format!(
                    "{} pulses need {} gaps, got {}",
                    self.pulse_durations_s.len(),
                    self.pulse_durations_s.len() - 1,
                    self.gap_durations_s.len()
                ),
            ));
        }
        for (name, list) in [("pulse_durations_s", &self.pulse_durations_s), ("gap_durations_s", &self.gap_durations_s)] {
            if list.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(Error::validation(name, "durations must be >= 0"));
            }
        }
        let end = self.pulse_start_s + self.schedule_duration();
        if end > self.duration_s {
            return Err(Error::validation(
                "duration_s",
                format!("pulse schedule ends at {end:e} s, after the trace ends ({:e} s)", self.duration_s),
            ));
        }
        if self.n_traces == 0 {
            return Err(Error::validation("n_traces", "must be at least 1"));
        }
        if self.sweep_n_traces < 2 || self.psd_n_traces == 0 {
            return Err(Error::validation("sweep_n_traces", "sweeps need at least 2 traces and PSDs at least 1"));
        }
        if self.sweep_n_taus < 1 || self.sweep_tau_max_s < self.sweep_tau_min_s {
            return Err(Error::validation("sweep_tau_max_s", "tau range is empty"));
        }
        if self.sweep_pulse_start_s + self.sweep_tau_max_s > self.sweep_duration_s {
            return Err(Error::validation("sweep_duration_s", "longest swept pulse ends after the trace"));
        }
        if !(0.0..1.0).contains(&self.psd_overlap) {
            return Err(Error::validation("psd_overlap", "must be in [0, 1)"));
        }
        if self.psd_segment_length < 16 {
            return Err(Error::validation("psd_segment_length", "must be at least 16"));
        }
        if self.fig2_delays_s.iter().any(|d| !(d.is_finite() && *d >= 0.0)) {
            return Err(Error::validation("fig2_delays_s", "delays must be >= 0"));
        }
        self.particle()?;
        Ok(())
    }

    pub fn schedule_duration(&self) -> f64 {
        self.pulse_durations_s.iter().chain(&self.gap_durations_s).sum()
    }

    /// Commanded trap pair.
    pub fn trap(&self) -> TrapPair {
        TrapPair {
            omega1: self.omega1_rad_s,
            omega2: self.omega2_rad_s,
        }
    }

    /// Trap pair used by the simulator.
    pub fn true_trap(&self) -> TrapPair {
        TrapPair {
            omega1: self.omega1_rad_s,
            omega2: self.omega2_true_rad_s,
        }
    }

    pub fn particle(&self) -> Result<ParticleParams> {
        ParticleParams::new(self.particle_radius_m, self.particle_mass_kg, Some(self.particle_density_kg_m3))
    }

    pub fn gas(&self) -> GasEnvironment {
        GasEnvironment {
            pressure: self.gas_pressure_pa,
            temperature: self.gas_temperature_k,
            molecule_mass: self.gas_molecule_mass_kg,
        }
    }

    /// Configured pulses and gaps interleaved, on the true trap.
    pub fn schedule(&self) -> Result<PulseSchedule> {
        let mut segments = Vec::with_capacity(2 * self.pulse_durations_s.len());
        for (i, &tau) in self.pulse_durations_s.iter().enumerate() {
            segments.push(Segment::pulse(tau));
            if let Some(&gap) = self.gap_durations_s.get(i) {
                segments.push(Segment::gap(gap));
            }
        }
        PulseSchedule::new(self.true_trap(), segments)
    }

    pub fn langevin_params(&self) -> LangevinParams {
        LangevinParams {
            pulse_start: self.pulse_start_s,
            jitter_std: self.jitter_std_rad,
            pulse_offset: self.pulse_offset_m,
            initial_sampling: self.initial_sampling,
            max_samples: self.max_samples,
            ..LangevinParams::new(self.particle_mass_kg, self.gas_temperature_k, self.gamma_rad_s)
        }
    }

    /// Analysis settings for an ensemble whose pulses occupy `window`.
    pub fn prepare_options(&self, window: Option<(f64, f64)>) -> PrepareOptions {
        PrepareOptions {
            filter_center: self.filter_center_rad_s,
            filter_halfwidth: self.filter_halfwidth_rad_s,
            stencil: self.derivative_stencil,
            pulse_window: window,
        }
    }

    /// Pulse durations of the squeezing sweep.
    pub fn sweep_taus(&self) -> Vec<f64> {
        let n = self.sweep_n_taus;
        if n == 1 {
            return vec![self.sweep_tau_min_s];
        }
        (0..n)
            .map(|k| self.sweep_tau_min_s + (self.sweep_tau_max_s - self.sweep_tau_min_s) * k as f64 / (n - 1) as f64)
            .collect()
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config is always serialisable")
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always serialisable")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = parse_config_toml("omega1_rad_s = 703716.8\nomega2_rad_s = 309761.0\n").unwrap();
        assert_eq!(cfg.omega2_true_rad_s, cfg.omega2_rad_s);
        assert_eq!(cfg.n_traces, 2000);
        assert_eq!(cfg.dt_s, DEFAULT_DT_S);
        assert_eq!(cfg.eta, 1.0);
        assert_eq!(cfg.jitter_std_rad, 0.0);
        assert!(cfg.gamma_rad_s > 0.0);
        assert_eq!(cfg.filter_center_rad_s, cfg.omega1_rad_s);
        assert!((cfg.pulse_durations_s[0] * cfg.omega2_rad_s - PI / 2.0).abs() < 1e-12);
        // Round trip through the serialised form.
        assert_eq!(parse_config_toml(&cfg.to_toml()).unwrap(), cfg);
        assert_eq!(ExperimentConfig::from_trap(703716.8, 309761.0).unwrap(), cfg);
    }

    #[test]
    fn nyquist_violation_names_the_key() {
        let err = parse_config_toml("omega1_rad_s = 7e5\nomega2_rad_s = 8e6\n").unwrap_err();
        assert!(matches!(err, Error::Validation { ref field, .. } if field == "omega2_rad_s"), "{err}");
    }

    #[test]
    fn unknown_and_malformed_keys() {
        let err = parse_config_toml("omega1_rad_s = 7e5\nomega2_rad_s = 3e5\npressure_mbar = 0.1\n").unwrap_err();
        assert!(err.to_string().contains("pressure_mbar"), "{err}");
        let err = parse_config_toml("omega1_rad_s = 7e5\nomega2_rad_s = \"fast\"\n").unwrap_err();
        assert!(matches!(err, Error::Parse { .. }));
        assert!(err.to_string().contains("line 2"), "{err}");
    }

    #[test]
    fn eta_and_jitter_are_linked() {
        let cfg = parse_config_toml("omega1_rad_s = 7e5\nomega2_rad_s = 3e5\neta = 0.73\n").unwrap();
        assert!((cfg.jitter_std_rad - 0.3967).abs() < 1e-4);
        let cfg = parse_config_toml("omega1_rad_s = 7e5\nomega2_rad_s = 3e5\njitter_std_rad = 0.3967\n").unwrap();
        assert!((cfg.eta - 0.73).abs() < 1e-3);
        assert!(parse_config_toml("omega1_rad_s = 7e5\nomega2_rad_s = 3e5\neta = 0.5\njitter_std_rad = 0.1\n").is_err());
        assert!(parse_config_toml("omega1_rad_s = 7e5\nomega2_rad_s = 3e5\neta = 1.5\n").is_err());
    }

    #[test]
    fn schedule_must_fit() {
        let err = parse_config_toml("omega1_rad_s = 7e5\nomega2_rad_s = 3e5\npulse_start_s = 5e-3\n").unwrap_err();
        assert!(matches!(err, Error::Validation { ref field, .. } if field == "duration_s"));
        let err = parse_config_toml("omega1_rad_s = 7e5\nomega2_rad_s = 3e5\npulse_durations_s = [1e-6, 1e-6]\n");
        assert!(err.is_ok());
        let err = parse_config_toml(
            "omega1_rad_s = 7e5\nomega2_rad_s = 3e5\npulse_durations_s = [1e-6, 1e-6]\ngap_durations_s = []\n",
        )
        .unwrap_err();
        assert!(matches!(err, Error::Validation { ref field, .. } if field == "gap_durations_s"));
    }

    #[test]
    fn trap_from_optics() {
        let cfg = parse_config_toml(
            "trap_power1_w = 0.3\ntrap_power2_w = 0.058\nbeam_waist_m = 1.1e-6\n",
        )
        .unwrap();
        let ratio = cfg.omega1_rad_s / cfg.omega2_rad_s;
        assert!((ratio - (0.3f64 / 0.058).sqrt()).abs() < 1e-9);
        assert!(parse_config_toml("trap_power1_w = 0.3\n").is_err());
    }

    #[test]
    fn json_is_accepted() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(&path, r#"{"omega1_rad_s": 7e5, "omega2_rad_s": 3e5, "n_traces": 10}"#).unwrap();
        assert_eq!(load_config(&path).unwrap().n_traces, 10);
        std::fs::write(&path, "{\"omega1_rad_s\": 7e5,\n \"omega2_rad_s\": }").unwrap();
        assert!(load_config(&path).unwrap_err().to_string().contains("line 2"));
    }
}
