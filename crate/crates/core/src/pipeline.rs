//! The analysis chain and the figure pipelines built from it.

use rayon::prelude::*;
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::fit::{fit_squeezing_curve, model_lambda, FitInit, FitResult, SqueezingCurve};
use crate::noise::CovarianceState;
use crate::sigproc::{
    cloud_covariance, fit_variance_envelope, lorentzian_fit, measure_squeezing, phase_space_cloud,
    prepare_ensemble, welch_psd, EnvelopeFit, LorentzianFit, PhaseSpaceCloud, PreparedEnsemble, Psd,
    SqueezingMeasurement,
};
use crate::sim::{
    add_measurement_noise, radius_from_damping, run_ensemble, sphere_mass, trace_seed, GasEnvironment,
    LangevinParams, TrajectoryEnsemble,
};
use crate::squeeze::PulseSchedule;

const NOISE_SEED_SALT: u64 = 0x6E01_5E00_F100_0000;

/// Adds the configured detection noise to every trace.
pub fn apply_measurement_noise(ens: &mut TrajectoryEnsemble, floor: f64, seed: u64) -> Result<()> {
    if floor == 0.0 {
        return Ok(());
    }
    let dt = ens.dt;
    ens.traces = ens
        .traces
        .par_iter()
        .enumerate()
        .map(|(i, t)| add_measurement_noise(t, dt, floor, trace_seed(seed ^ NOISE_SEED_SALT, i as u64)))
        .collect::<Result<_>>()?;
    Ok(())
}

/// Simulates the configured ensemble and adds detection noise.
pub fn simulate(cfg: &ExperimentConfig) -> Result<TrajectoryEnsemble> {
    let schedule = cfg.schedule()?;
    let mut ens = run_ensemble(
        &cfg.langevin_params(),
        &schedule,
        cfg.n_traces,
        cfg.duration_s,
        cfg.dt_s,
        cfg.seed,
    )?;
    apply_measurement_noise(&mut ens, cfg.measurement_floor_m_rthz, cfg.seed)?;
    Ok(ens)
}

#[derive(Clone, Debug, Serialize)]
pub struct CloudSummary {
    pub label: String,
    /// Seconds relative to the pulse end.
    pub timestamp: f64,
    pub covariance: CovarianceState,
    /// Eigenvalues `(minor, major)`.
    pub eigenvalues: (f64, f64),
    /// Angle of the major axis from the x axis, rad.
    pub major_axis_angle: f64,
}

/// Everything `analyze` derives from one ensemble.
#[derive(Clone, Debug, Serialize)]
pub struct Analysis {
    pub dt: f64,
    pub pulse_window: (f64, f64),
    pub settle_samples: usize,
    /// Filtered ensemble mean, m.
    pub mean: Vec<f64>,
    /// Filtered ensemble rms, m.
    pub rms: Vec<f64>,
    /// Fit of the post-pulse variance; `None` when the ensemble is too short.
    pub envelope: Option<EnvelopeFit>,
    /// First sample used by the envelope fit.
    pub envelope_start: Option<usize>,
    pub squeezing: SqueezingMeasurement,
    #[serde(skip)]
    pub clouds: Vec<(CloudSummary, PhaseSpaceCloud)>,
}

impl Analysis {
    pub fn cloud_summaries(&self) -> Vec<&CloudSummary> {
        self.clouds.iter().map(|c| &c.0).collect()
    }
}

fn summarise(label: &str, cloud: PhaseSpaceCloud) -> Result<(CloudSummary, PhaseSpaceCloud)> {
    let cov = cloud_covariance(&cloud)?;
    let summary = CloudSummary {
        label: label.into(),
        timestamp: cloud.timestamp,
        eigenvalues: cov.eigenvalues(),
        major_axis_angle: cov.sigma().sym_major_axis_angle(),
        covariance: cov,
    };
    Ok((summary, cloud))
}

/// Prepares an ensemble with the configured analysis settings.
pub fn prepare(cfg: &ExperimentConfig, traces: &[Vec<f64>], dt: f64, window: (f64, f64)) -> Result<PreparedEnsemble> {
    prepare_ensemble(traces, dt, cfg.particle_mass_kg, &cfg.prepare_options(Some(window)))
}

/// Squeezing of one prepared ensemble using the configured conventions.
pub fn squeezing_of(cfg: &ExperimentConfig, prepared: &PreparedEnsemble) -> Result<SqueezingMeasurement> {
    let mut shifted = prepared.clone();
    if cfg.after_delay_s > 0.0 {
        let (s, e) = shifted.pulse_window.expect("window set by prepare");
        shifted.pulse_window = Some((s, e + cfg.after_delay_s));
    }
    let gamma = cfg.decay_compensation.then_some(cfg.gamma_rad_s);
    let mut m = measure_squeezing(&shifted, cfg.particle_mass_kg, cfg.omega1_rad_s, gamma)?;
    m.after_delay += cfg.after_delay_s;
    if let Some(g) = gamma {
        if cfg.after_delay_s > 0.0 {
            m.after = crate::sigproc::compensate_decay(&m.after, &m.before, g, cfg.after_delay_s)?;
            m.lambda_db = crate::sigproc::measured_squeezing_db(&m.before, &m.after);
        }
    }
    Ok(m)
}

/// Filter → centre → differentiate → rms, envelope, squeezing and clouds.
pub fn analyze(cfg: &ExperimentConfig, traces: &[Vec<f64>], dt: f64, window: (f64, f64)) -> Result<Analysis> {
    let prepared = prepare(cfg, traces, dt, window)?;
    let rms = crate::sigproc::rms_trace(&prepared.z)?;
    let squeezing = squeezing_of(cfg, &prepared)?;

    let n = prepared.n_samples();
    let start = (window.1 / dt).ceil() as usize + prepared.settle;
    let stop = n.saturating_sub(prepared.settle);
    let (envelope, envelope_start) = if stop > start + 16 {
        let times: Vec<f64> = (start..stop).map(|k| k as f64 * dt).collect();
        let var: Vec<f64> = rms[start..stop].iter().map(|r| r * r).collect();
        (Some(fit_variance_envelope(&times, &var, cfg.omega1_rad_s)?), Some(start))
    } else {
        (None, None)
    };

    let mass = cfg.particle_mass_kg;
    let w1 = cfg.omega1_rad_s;
    let before_t = (window.0 / dt).floor() * dt - (prepared.settle + 1) as f64 * dt;
    let mut clouds = vec![summarise("before", phase_space_cloud(&prepared, before_t, mass, w1)?)?];
    let first_after = ((window.1 / dt).ceil() as usize + prepared.settle) as f64 * dt;
    for (i, d) in cfg.fig2_delays_s.iter().enumerate() {
        let t = first_after + d;
        if prepared.is_valid(prepared.index_of(t)) {
            clouds.push(summarise(&format!("after_{i}"), phase_space_cloud(&prepared, t, mass, w1)?)?);
        }
    }
    Ok(Analysis {
        dt,
        pulse_window: window,
        settle_samples: prepared.settle,
        mean: prepared.mean.clone(),
        rms,
        envelope,
        envelope_start,
        squeezing,
        clouds,
    })
}

/// Pulse window of the configured schedule.
pub fn pulse_window(cfg: &ExperimentConfig) -> (f64, f64) {
    (cfg.pulse_start_s, cfg.pulse_start_s + cfg.schedule_duration())
}

/// One measured point of a squeezing sweep.
#[derive(Clone, Debug, Serialize)]
pub struct SweepPoint {
    pub tau: f64,
    pub measurement: SqueezingMeasurement,
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepResult {
    pub curve: SqueezingCurve,
    pub points: Vec<SweepPoint>,
    pub fit: FitResult,
    /// Largest fitted-model λ over one period of τ.
    pub fitted_peak_db: f64,
    pub injected_omega2: f64,
    pub injected_eta: f64,
}

/// Standard error of λ from `n` independent samples of a Gaussian cloud.
pub fn lambda_standard_error(n: usize) -> f64 {
    5.0 / std::f64::consts::LN_10 * (2.0 / (n as f64 - 1.0)).sqrt()
}

/// Simulates and measures one single-pulse ensemble per swept τ, then fits
/// the dephasing model starting from the commanded `ω₂`.
pub fn squeezing_sweep(cfg: &ExperimentConfig) -> Result<SweepResult> {
    let taus = cfg.sweep_taus();
    let mut params: LangevinParams = cfg.langevin_params();
    params.pulse_start = cfg.sweep_pulse_start_s;
    params.pulse_offset = 0.0;
    let mut points = Vec::with_capacity(taus.len());
    for (i, &tau) in taus.iter().enumerate() {
        let schedule = PulseSchedule::single_pulse(cfg.true_trap(), tau)?;
        let seed = trace_seed(cfg.seed, 1_000_000 + i as u64);
        let mut ens = run_ensemble(&params, &schedule, cfg.sweep_n_traces, cfg.sweep_duration_s, cfg.dt_s, seed)?;
        apply_measurement_noise(&mut ens, cfg.measurement_floor_m_rthz, seed)?;
        let window = (params.pulse_start, params.pulse_start + tau);
        let prepared = prepare(cfg, &ens.traces, ens.dt, window)?;
        points.push(SweepPoint {
            tau,
            measurement: squeezing_of(cfg, &prepared)?,
        });
    }
    let se = lambda_standard_error(cfg.sweep_n_traces);
    let curve = SqueezingCurve::new(
        taus.clone(),
        points.iter().map(|p| p.measurement.lambda_db).collect(),
        Some(vec![se; taus.len()]),
    )?;
    let fit = fit_squeezing_curve(
        &curve,
        cfg.omega1_rad_s,
        FitInit {
            omega2: cfg.omega2_rad_s,
            eta: 0.9,
        },
    )?;
    let period = std::f64::consts::PI / fit.omega2;
    let fitted_peak_db = (0..=400)
        .map(|k| model_lambda(period * k as f64 / 400.0, cfg.omega1_rad_s, fit.omega2, fit.eta, 1.0))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(SweepResult {
        curve,
        points,
        fit,
        fitted_peak_db,
        injected_omega2: cfg.omega2_true_rad_s,
        injected_eta: cfg.eta,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct SpectrumResult {
    /// Average of the per-trace Welch estimates.
    #[serde(skip)]
    pub psd: Psd,
    pub fit: LorentzianFit,
    /// Band used for the fit, rad/s.
    pub fit_band: (f64, f64),
    pub injected_gamma: f64,
    pub injected_omega1: f64,
    /// Radius from the fitted Γ with the configured gas and density, m.
    pub inferred_radius_m: f64,
    pub inferred_mass_kg: f64,
    pub configured_radius_m: f64,
}

/// Restricts a PSD to `[lo, hi]` rad/s, returning `(ω, S)`.
pub fn psd_band(psd: &Psd, lo: f64, hi: f64) -> (Vec<f64>, Vec<f64>) {
    psd.omegas()
        .into_iter()
        .zip(&psd.density)
        .filter(|(w, _)| *w >= lo && *w <= hi)
        .map(|(w, d)| (w, *d))
        .unzip()
}

/// Lorentzian fit of the averaged Welch PSD of undriven thermal traces.
pub fn thermal_spectrum(cfg: &ExperimentConfig) -> Result<SpectrumResult> {
    let mut params = cfg.langevin_params();
    params.pulse_start = 0.0;
    params.jitter_std = 0.0;
    params.pulse_offset = 0.0;
    params.initial_sampling = crate::sim::InitialSampling::Independent;
    let schedule = PulseSchedule::single_pulse(cfg.trap(), 0.0)?;
    let seed = trace_seed(cfg.seed, 2_000_000);
    let mut ens = run_ensemble(&params, &schedule, cfg.psd_n_traces, cfg.psd_duration_s, cfg.dt_s, seed)?;
    apply_measurement_noise(&mut ens, cfg.measurement_floor_m_rthz, seed)?;
    let psds = ens
        .traces
        .par_iter()
        .map(|t| welch_psd(t, ens.dt, cfg.psd_segment_length, cfg.psd_overlap))
        .collect::<Result<Vec<_>>>()?;
    let mut psd = psds[0].clone();
    for other in &psds[1..] {
        for (a, b) in psd.density.iter_mut().zip(&other.density) {
            *a += b;
        }
        psd.segments += other.segments;
    }
    let k = psds.len() as f64;
    psd.density.iter_mut().for_each(|d| *d /= k);

    let band = (
        cfg.omega1_rad_s - cfg.psd_fit_halfwidth_rad_s,
        cfg.omega1_rad_s + cfg.psd_fit_halfwidth_rad_s,
    );
    let (w, s) = psd_band(&psd, band.0, band.1);
    let fit = lorentzian_fit(&w, &s, None)?;
    let gas: GasEnvironment = cfg.gas();
    if gas.pressure <= 0.0 {
        return Err(Error::validation("gas_pressure_pa", "radius inference needs a positive pressure"));
    }
    let radius = radius_from_damping(fit.gamma, &gas, cfg.particle_density_kg_m3)?;
    Ok(SpectrumResult {
        psd,
        fit_band: band,
        injected_gamma: cfg.gamma_rad_s,
        injected_omega1: cfg.omega1_rad_s,
        inferred_mass_kg: sphere_mass(radius, cfg.particle_density_kg_m3),
        inferred_radius_m: radius,
        configured_radius_m: cfg.particle_radius_m,
        fit,
    })
}

/// Frequency (Hz) of the strongest PSD bin of the post-pulse mean trace.
pub fn mean_peak_frequency(analysis: &Analysis) -> Result<f64> {
    let start = analysis.envelope_start.unwrap_or(0);
    let stop = analysis.mean.len().saturating_sub(analysis.settle_samples);
    let seg = &analysis.mean[start..stop.max(start)];
    let psd = welch_psd(seg, analysis.dt, seg.len(), 0.0)?;
    let (k, _) = psd
        .density
        .iter()
        .enumerate()
        .skip(1)
        .max_by(|a, b| a.1.total_cmp(b.1))
        .ok_or_else(|| Error::domain("mean trace too short for a spectrum"))?;
    Ok(psd.frequencies_hz[k])
}
