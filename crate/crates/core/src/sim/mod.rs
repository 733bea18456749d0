//! Classical Langevin ensemble simulator for the switched trap.
//!
//! Each trajectory starts from a thermal state of the `ω₁` trap, follows the
//! pulse schedule from `pulse_start`, and is sampled every `dt`. Between
//! samples and switch times the linear dynamics are integrated exactly, so
//! `dt` only sets the sampling rate.

mod export;
mod integrator;
pub mod physics;
mod sampling;

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use export::{read_ensemble, read_trace_csv, write_ensemble_binary, write_ensemble_csv, EnsembleSidecar};
pub use physics::{
    gas_damping, pressure_for_damping, radius_from_damping, sphere_mass, sphere_polarizability,
    trap_frequency, GasEnvironment, ParticleParams, TrapOptics,
};
pub use sampling::{trace_seed, InitialSampling, KroneckerSequence};

use crate::error::{Error, Result};
use crate::mat2::Mat2;
use crate::squeeze::{PulseSchedule, SegmentKind};
use crate::units::K_B;
use integrator::{pulse_mode_rotation, ExactStep};
use sampling::{gaussian_pair, gaussian_quantile};

/// Default cap on `n_traces × n_samples` for one ensemble.
pub const DEFAULT_MAX_SAMPLES: u64 = 200_000_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LangevinParams {
    /// kg
    pub mass: f64,
    /// Bath temperature, K.
    pub temperature: f64,
    /// Velocity damping rate, rad/s.
    pub gamma: f64,
    /// Time of the first switch, s.
    pub pulse_start: f64,
    /// Std of the random pulse-mode rotation applied at the end of every
    /// pulse, rad. Zero disables dephasing.
    pub jitter_std: f64,
    /// Shift of the trap equilibrium while a pulse is on, m.
    pub pulse_offset: f64,
    pub initial_sampling: InitialSampling,
    /// Also record momentum traces (kg·m/s).
    pub record_momentum: bool,
    pub max_samples: u64,
}

impl LangevinParams {
    pub fn new(mass: f64, temperature: f64, gamma: f64) -> Self {
        LangevinParams {
            mass,
            temperature,
            gamma,
            pulse_start: 0.0,
            jitter_std: 0.0,
            pulse_offset: 0.0,
            initial_sampling: InitialSampling::default(),
            record_momentum: false,
            max_samples: DEFAULT_MAX_SAMPLES,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::validation(name, format!("must be positive, got {v}")))
            }
        };
        positive("mass", self.mass)?;
        positive("temperature", self.temperature)?;
        for (name, v) in [
            ("gamma", self.gamma),
            ("pulse_start", self.pulse_start),
            ("jitter_std", self.jitter_std),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::validation(name, format!("must be >= 0, got {v}")));
            }
        }
        if !self.pulse_offset.is_finite() {
            return Err(Error::validation("pulse_offset", "must be finite"));
        }
        Ok(())
    }

    /// Thermal position spread `√(k_BT/(mω²))` in the trap at `omega`, m.
    pub fn thermal_length(&self, omega: f64) -> f64 {
        (K_B * self.temperature / self.mass).sqrt() / omega
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    /// Position samples, m.
    pub z: Vec<f64>,
    /// Momentum samples, kg·m/s, when requested.
    pub p: Option<Vec<f64>>,
}

/// Everything needed to regenerate an ensemble.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleMeta {
    pub params: LangevinParams,
    pub schedule: PulseSchedule,
    pub duration: f64,
    pub dt: f64,
    pub n_samples: usize,
    pub master_seed: u64,
    /// Time at which the last schedule segment ends, s.
    pub pulse_end: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryEnsemble {
    pub dt: f64,
    pub traces: Vec<Vec<f64>>,
    pub momenta: Option<Vec<Vec<f64>>>,
    pub seeds: Vec<u64>,
    pub meta: EnsembleMeta,
}

impl TrajectoryEnsemble {
    pub fn n_traces(&self) -> usize {
        self.traces.len()
    }

    pub fn n_samples(&self) -> usize {
        self.traces.first().map_or(0, Vec::len)
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.n_samples()).map(|k| k as f64 * self.dt).collect()
    }
}

/// Thermal initial state and per-pulse jitter angles of one trace, in
/// internal units.
#[derive(Clone, Debug, PartialEq)]
pub(crate) struct InitialDraw {
    pub state: [f64; 2],
    pub jitter: Vec<f64>,
}

#[derive(Clone, Copy, Debug)]
enum Op {
    Evolve(usize),
    Jitter(usize),
}

#[derive(Clone, Debug)]
enum StepPlan {
    /// One full `dt` step in the reference trap.
    Uniform,
    Custom(Vec<Op>),
}

/// Precomputed step operators shared by every trace of an ensemble.
#[derive(Clone, Debug)]
struct Plan {
    blocks: Vec<ExactStep>,
    uniform: usize,
    /// Jitters of zero-length pulses at `t = 0`, applied before the first sample.
    initial: Vec<Op>,
    steps: Vec<StepPlan>,
    n_pulses: usize,
    rho: f64,
    pulse_eq: f64,
    length_scale: f64,
    momentum_scale: f64,
    noiseless: bool,
}

#[derive(Clone, Copy, Debug)]
struct Piece {
    start: f64,
    end: f64,
    pulse: Option<usize>,
}

pub(crate) fn sample_count(duration: f64, dt: f64) -> usize {
    (duration / dt + 1e-9).floor() as usize + 1
}

impl Plan {
    fn build(params: &LangevinParams, schedule: &PulseSchedule, duration: f64, dt: f64) -> Result<Plan> {
        params.validate()?;
        schedule.validate()?;
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::validation("dt", format!("must be positive, got {dt}")));
        }
        if !(duration.is_finite() && duration >= 0.0) {
            return Err(Error::validation("duration", format!("must be >= 0, got {duration}")));
        }
        let trap = schedule.trap;
        let w_max = trap.omega1.max(trap.omega2);
        if w_max * dt >= std::f64::consts::PI {
            return Err(Error::validation(
                "dt",
                format!(
                    "sampling at {:.3e} s is below Nyquist for {:.3e} rad/s",
                    dt, w_max
                ),
            ));
        }
        let end = params.pulse_start + schedule.total_duration();
        if end > duration * (1.0 + 1e-12) {
            return Err(Error::Config(format!(
                "schedule ends at {end:.6e} s, after the simulated duration {duration:.6e} s"
            )));
        }

        let w1 = trap.omega1;
        let length_scale = params.thermal_length(w1);
        let kappa2 = (trap.omega2 / w1).powi(2);
        let gamma = params.gamma / w1;
        let pulse_eq = params.pulse_offset / length_scale;

        let mut pieces = vec![Piece {
            start: 0.0,
            end: params.pulse_start,
            pulse: None,
        }];
        let mut t = params.pulse_start;
        let mut n_pulses = 0;
        for seg in &schedule.segments {
            let pulse = match seg.kind {
                SegmentKind::Pulse => {
                    n_pulses += 1;
                    Some(n_pulses - 1)
                }
                SegmentKind::Gap => None,
            };
            pieces.push(Piece {
                start: t,
                end: t + seg.duration,
                pulse,
            });
            t += seg.duration;
        }
        pieces.push(Piece {
            start: t,
            end: f64::INFINITY,
            pulse: None,
        });

        let mut blocks = Vec::new();
        let mut cache: HashMap<(bool, u64), usize> = HashMap::new();
        let mut block = |is_pulse: bool, h: f64| -> usize {
            *cache.entry((is_pulse, h.to_bits())).or_insert_with(|| {
                let (kappa, eq) = if is_pulse { (kappa2, pulse_eq) } else { (1.0, 0.0) };
                blocks.push(ExactStep::new(kappa, gamma, h * w1, eq));
                blocks.len() - 1
            })
        };
        let uniform = block(false, dt);

        let n_samples = sample_count(duration, dt);
        let mut steps = Vec::with_capacity(n_samples.saturating_sub(1));
        for k in 0..n_samples.saturating_sub(1) {
            let a = k as f64 * dt;
            let b = (k + 1) as f64 * dt;
            let touches = |p: &Piece| {
                (p.start < b && p.end > a) || (p.pulse.is_some() && p.end > a && p.end <= b)
            };
            let simple = pieces
                .iter()
                .filter(|p| touches(p))
                .all(|p| p.pulse.is_none() && p.start <= a && p.end >= b);
            if simple {
                steps.push(StepPlan::Uniform);
                continue;
            }
            let mut ops = Vec::new();
            for p in pieces.iter().filter(|p| touches(p)) {
                let h = p.end.min(b) - p.start.max(a);
                if h > 0.0 {
                    ops.push(Op::Evolve(block(p.pulse.is_some(), h)));
                }
                if let Some(idx) = p.pulse {
                    if p.end > a && p.end <= b {
                        ops.push(Op::Jitter(idx));
                    }
                }
            }
            steps.push(StepPlan::Custom(ops));
        }

        let initial = pieces
            .iter()
            .filter(|p| p.end == 0.0)
            .filter_map(|p| p.pulse.map(Op::Jitter))
            .collect();
        let noiseless = blocks.iter().all(ExactStep::is_noiseless);
        Ok(Plan {
            blocks,
            uniform,
            initial,
            steps,
            n_pulses,
            rho: trap.omega2 / w1,
            pulse_eq,
            length_scale,
            momentum_scale: params.mass * w1 * length_scale,
            noiseless,
        })
    }

    fn n_samples(&self) -> usize {
        self.steps.len() + 1
    }

    /// Random rotation of the pulse mode about the pulse equilibrium.
    fn jitter(&self, x: &mut [f64; 2], draw: &InitialDraw, i: usize) {
        let phi = draw.jitter.get(i).copied().unwrap_or(0.0);
        if phi != 0.0 {
            let rot: Mat2 = pulse_mode_rotation(self.rho, phi);
            let d = rot.apply([x[0] - self.pulse_eq, x[1]]);
            *x = [d[0] + self.pulse_eq, d[1]];
        }
    }

    fn run(&self, draw: &InitialDraw, rng: &mut ChaCha8Rng, record_momentum: bool) -> Trajectory {
        let n = self.n_samples();
        let mut z = Vec::with_capacity(n);
        let mut p = record_momentum.then(|| Vec::with_capacity(n));
        let mut x = draw.state;
        for op in &self.initial {
            if let Op::Jitter(i) = *op {
                self.jitter(&mut x, draw, i);
            }
        }
        let record = |x: &[f64; 2], z: &mut Vec<f64>, p: &mut Option<Vec<f64>>| {
            z.push(x[0] * self.length_scale);
            if let Some(p) = p.as_mut() {
                p.push(x[1] * self.momentum_scale);
            }
        };
        record(&x, &mut z, &mut p);
        let noise = |rng: &mut ChaCha8Rng| -> [f64; 2] {
            if self.noiseless {
                [0.0, 0.0]
            } else {
                [rng.sample(StandardNormal), rng.sample(StandardNormal)]
            }
        };
        for step in &self.steps {
            match step {
                StepPlan::Uniform => self.blocks[self.uniform].apply(&mut x, noise(rng)),
                StepPlan::Custom(ops) => {
                    for op in ops {
                        match *op {
                            Op::Evolve(b) => self.blocks[b].apply(&mut x, noise(rng)),
                            Op::Jitter(i) => self.jitter(&mut x, draw, i),
                        }
                    }
                }
            }
            record(&x, &mut z, &mut p);
        }
        Trajectory { z, p }
    }
}

fn independent_draw(rng: &mut ChaCha8Rng, n_pulses: usize, jitter_std: f64) -> InitialDraw {
    let state = [rng.sample(StandardNormal), rng.sample(StandardNormal)];
    let jitter = (0..n_pulses)
        .map(|_| {
            let g: f64 = rng.sample(StandardNormal);
            jitter_std * g
        })
        .collect();
    InitialDraw { state, jitter }
}

fn check_budget(params: &LangevinParams, n_traces: usize, n_samples: usize) -> Result<()> {
    let total = n_traces as u64 * n_samples as u64;
    if total > params.max_samples {
        return Err(Error::ResourceLimit(format!(
            "{n_traces} traces × {n_samples} samples = {total} exceeds max_samples = {}; \
             reduce traces or duration, or raise the limit",
            params.max_samples
        )));
    }
    Ok(())
}

/// One trajectory with an independently drawn thermal initial state.
pub fn simulate_trajectory(
    params: &LangevinParams,
    schedule: &PulseSchedule,
    duration: f64,
    dt: f64,
    seed: u64,
) -> Result<Trajectory> {
    let plan = Plan::build(params, schedule, duration, dt)?;
    check_budget(params, 1, plan.n_samples())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw = independent_draw(&mut rng, plan.n_pulses, params.jitter_std);
    Ok(plan.run(&draw, &mut rng, params.record_momentum))
}

/// One trajectory from a given initial position (m) and momentum (kg·m/s).
pub fn simulate_trajectory_from(
    params: &LangevinParams,
    schedule: &PulseSchedule,
    duration: f64,
    dt: f64,
    seed: u64,
    z0: f64,
    p0: f64,
) -> Result<Trajectory> {
    let plan = Plan::build(params, schedule, duration, dt)?;
    check_budget(params, 1, plan.n_samples())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = independent_draw(&mut rng, plan.n_pulses, params.jitter_std);
    draw.state = [z0 / plan.length_scale, p0 / plan.momentum_scale];
    Ok(plan.run(&draw, &mut rng, params.record_momentum))
}

/// `n_traces` independent repetitions of the schedule, each from a fresh
/// thermal state. Trace `i` uses the stream seeded by
/// `trace_seed(master_seed, i)`; the result does not depend on thread count.
pub fn run_ensemble(
    params: &LangevinParams,
    schedule: &PulseSchedule,
    n_traces: usize,
    duration: f64,
    dt: f64,
    master_seed: u64,
) -> Result<TrajectoryEnsemble> {
    if n_traces == 0 {
        return Err(Error::validation("n_traces", "must be at least 1"));
    }
    let plan = Plan::build(params, schedule, duration, dt)?;
    let n_samples = plan.n_samples();
    check_budget(params, n_traces, n_samples)?;

    let seeds: Vec<u64> = (0..n_traces as u64).map(|i| trace_seed(master_seed, i)).collect();
    let lattice = match params.initial_sampling {
        InitialSampling::Lattice => Some(KroneckerSequence::new(
            2 + if params.jitter_std > 0.0 { plan.n_pulses } else { 0 },
            master_seed,
        )),
        InitialSampling::Independent => None,
    };

    let results: Vec<Trajectory> = seeds
        .par_iter()
        .enumerate()
        .map(|(i, &seed)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut draw = independent_draw(&mut rng, plan.n_pulses, params.jitter_std);
            if let Some(seq) = &lattice {
                let u = seq.point(i as u64);
                draw.state = gaussian_pair(u[0], u[1]);
                if params.jitter_std > 0.0 {
                    draw.jitter = (0..plan.n_pulses)
                        .map(|k| params.jitter_std * gaussian_quantile(u[2 + k]))
                        .collect();
                }
            }
            plan.run(&draw, &mut rng, params.record_momentum)
        })
        .collect();

    let mut traces = Vec::with_capacity(n_traces);
    let mut momenta = params.record_momentum.then(|| Vec::with_capacity(n_traces));
    for tr in results {
        traces.push(tr.z);
        if let (Some(m), Some(p)) = (momenta.as_mut(), tr.p) {
            m.push(p);
        }
    }
    Ok(TrajectoryEnsemble {
        dt,
        traces,
        momenta,
        seeds,
        meta: EnsembleMeta {
            params: params.clone(),
            schedule: schedule.clone(),
            duration,
            dt,
            n_samples,
            master_seed,
            pulse_end: params.pulse_start + schedule.total_duration(),
        },
    })
}

/// Adds white detection noise with one-sided spectral density
/// `noise_floor²` (m²/Hz).
pub fn add_measurement_noise(trace: &[f64], dt: f64, noise_floor: f64, seed: u64) -> Result<Vec<f64>> {
    if !(noise_floor.is_finite() && noise_floor >= 0.0) {
        return Err(Error::validation("noise_floor", format!("must be >= 0, got {noise_floor}")));
    }
    if noise_floor == 0.0 {
        return Ok(trace.to_vec());
    }
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::validation("dt", format!("must be positive, got {dt}")));
    }
    let std = noise_floor / (2.0 * dt).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(trace
        .iter()
        .map(|z| {
            let g: f64 = rng.sample(StandardNormal);
            z + std * g
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use std::f64::consts::{FRAC_PI_2, PI};

    use super::*;
    use crate::squeeze::{Segment, TrapPair};
    use crate::units::hz_to_rad_s;

    fn trap() -> TrapPair {
        TrapPair::new(hz_to_rad_s(112e3), hz_to_rad_s(49.3e3)).unwrap()
    }

    fn params(gamma: f64) -> LangevinParams {
        LangevinParams::new(3.1e-19, 300.0, gamma)
    }

    #[test]
    fn free_oscillation_is_exact() {
        let tr = trap();
        // Zero-length pulse at the very end: constant ω₁ throughout.
        let duration = 100.0 * 2.0 * PI / tr.omega1;
        let schedule = PulseSchedule::single_pulse(tr, 0.0).unwrap();
        let mut p = params(0.0);
        p.pulse_start = duration;
        let dt = 5e-7;
        let a = 1e-7;
        let out = simulate_trajectory_from(&p, &schedule, duration, dt, 1, a, 0.0).unwrap();
        for (k, z) in out.z.iter().enumerate() {
            let expected = a * (tr.omega1 * k as f64 * dt).cos();
            assert!((z - expected).abs() <= 1e-9 * a, "sample {k}: {z} vs {expected}");
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let schedule = PulseSchedule::single_pulse(trap(), 3e-6).unwrap();
        let mut p = params(1e3);
        p.pulse_start = 1e-5;
        p.jitter_std = 0.3;
        let a = run_ensemble(&p, &schedule, 8, 5e-5, 5e-7, 9).unwrap();
        let b = run_ensemble(&p, &schedule, 8, 5e-5, 5e-7, 9).unwrap();
        assert_eq!(a, b);
        let c = run_ensemble(&p, &schedule, 8, 5e-5, 5e-7, 10).unwrap();
        assert_ne!(a.traces, c.traces);
    }

    #[test]
    fn single_independent_trace_matches_simulate_trajectory() {
        let schedule = PulseSchedule::single_pulse(trap(), 4e-6).unwrap();
        let mut p = params(1e3);
        p.pulse_start = 2e-6;
        p.jitter_std = 0.4;
        p.initial_sampling = InitialSampling::Independent;
        let ens = run_ensemble(&p, &schedule, 1, 3e-5, 5e-7, 77).unwrap();
        let single = simulate_trajectory(&p, &schedule, 3e-5, 5e-7, ens.seeds[0]).unwrap();
        assert_eq!(ens.traces[0], single.z);
    }

    #[test]
    fn schedule_longer_than_duration_is_config_error() {
        let schedule = PulseSchedule::single_pulse(trap(), 5e-5).unwrap();
        let err = simulate_trajectory(&params(0.0), &schedule, 1e-5, 5e-7, 0).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn undersampled_trap_is_rejected() {
        let schedule = PulseSchedule::single_pulse(trap(), 1e-6).unwrap();
        assert!(simulate_trajectory(&params(0.0), &schedule, 1e-4, 1e-5, 0).is_err());
    }

    #[test]
    fn zero_traces_rejected_and_budget_enforced() {
        let schedule = PulseSchedule::single_pulse(trap(), 1e-6).unwrap();
        assert!(run_ensemble(&params(0.0), &schedule, 0, 1e-4, 5e-7, 0).is_err());
        let mut p = params(0.0);
        p.max_samples = 1000;
        let err = run_ensemble(&p, &schedule, 10, 1e-4, 5e-7, 0).unwrap_err();
        assert!(matches!(err, Error::ResourceLimit(_)));
    }

    #[test]
    fn pulse_off_the_sample_grid_matches_quadrature_map() {
        // Noiseless trace through a pulse whose edges fall between samples.
        let tr = trap();
        let dt = 5e-7;
        let tau = FRAC_PI_2 / tr.omega2;
        let start = 3.3e-6;
        let schedule = PulseSchedule::new(tr, vec![Segment::pulse(tau)]).unwrap();
        let mut p = params(0.0);
        p.pulse_start = start;
        let (z0, p0) = (1e-7, 2e-20);
        let out = {
            let mut q = p.clone();
            q.record_momentum = true;
            simulate_trajectory_from(&q, &schedule, 2e-5, dt, 0, z0, p0).unwrap()
        };
        let w1 = tr.omega1;
        let m = p.mass;
        let to_quad = |z: f64, pz: f64| [z * (m * w1).sqrt(), pz / (m * w1).sqrt()];
        let x0 = to_quad(z0, p0);
        let k = 30;
        let t = k as f64 * dt;
        let map = crate::squeeze::free_rotation(w1, start)
            .unwrap()
            .then(&crate::squeeze::pulse_map(&tr, tau).unwrap())
            .then(&crate::squeeze::free_rotation(w1, t - start - tau).unwrap());
        let expected = map.apply(x0);
        let got = to_quad(out.z[k], out.p.as_ref().unwrap()[k]);
        let scale = x0[0].abs().max(x0[1].abs());
        assert!((got[0] - expected[0]).abs() < 1e-9 * scale);
        assert!((got[1] - expected[1]).abs() < 1e-9 * scale);
    }

    #[test]
    fn measurement_noise_zero_floor_is_identity() {
        let trace = vec![1.0, 2.0, 3.0];
        assert_eq!(add_measurement_noise(&trace, 1e-6, 0.0, 1).unwrap(), trace);
        assert!(add_measurement_noise(&trace, 1e-6, -1.0, 1).is_err());
    }
}
