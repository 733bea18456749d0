use std::f64::consts::{FRAC_PI_2, PI};

use levsqueeze::noise::{initial_thermal, propagate_pulse, squeezing_db_noisy};
use levsqueeze::sigproc::{
    ensemble_mean_trace, measured_squeezing_db, subtract_ensemble_mean, welch_psd,
};
use levsqueeze::sim::{run_ensemble, LangevinParams};
use levsqueeze::squeeze::{compose_schedule, free_rotation, lambda_max, pulse_map, squeezing_db};
use levsqueeze::{CovarianceState, DephasingModel, Mat2, PulseSchedule, Segment, SegmentKind, TrapPair};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn trap() -> impl Strategy<Value = TrapPair> {
    (1e3f64..1e6, -1.0f64..1.0).prop_map(|(f1, lr)| {
        let w1 = 2.0 * PI * f1;
        TrapPair::new(w1, w1 * 10f64.powf(lr)).unwrap()
    })
}

fn schedule() -> impl Strategy<Value = PulseSchedule> {
    (trap(), prop::collection::vec((any::<bool>(), 0.0f64..3.0), 1..6)).prop_map(|(trap, segs)| {
        let segments = segs
            .into_iter()
            .map(|(p, x)| if p { Segment::pulse(x / trap.omega2) } else { Segment::gap(x / trap.omega1) })
            .collect();
        PulseSchedule::new(trap, segments).unwrap()
    })
}

proptest! {
    #[test]
    fn pulse_map_is_symplectic(trap in trap(), x in 0.0f64..50.0) {
        let m = pulse_map(&trap, x / trap.omega2).unwrap();
        prop_assert!((m.matrix().det() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn squeezing_is_periodic_and_vanishes_at_half_turns(trap in trap(), frac in 0.0f64..1.0, k in 0u32..5) {
        let period = PI / trap.omega2;
        let l = squeezing_db(&pulse_map(&trap, frac * period).unwrap()).unwrap();
        let shifted = squeezing_db(&pulse_map(&trap, (frac + k as f64) * period).unwrap()).unwrap();
        prop_assert!((l - shifted).abs() < 1e-8 * (1.0 + l));
        let zero = squeezing_db(&pulse_map(&trap, k as f64 * period).unwrap()).unwrap();
        prop_assert!(zero.abs() < 1e-9);
    }

    #[test]
    fn squeezing_bounded_by_lambda_max(trap in trap(), frac in 0.0f64..1.0) {
        let lmax = lambda_max(&trap).unwrap();
        let l = squeezing_db(&pulse_map(&trap, frac * PI / trap.omega2).unwrap()).unwrap();
        prop_assert!(l <= lmax + 1e-9);
        let peak = squeezing_db(&pulse_map(&trap, FRAC_PI_2 / trap.omega2).unwrap()).unwrap();
        prop_assert!((peak - lmax).abs() < 1e-9);
    }

    #[test]
    fn squeezing_ignores_free_rotations(trap in trap(), x in 0.0f64..3.0, a in 0.0f64..10.0, b in 0.0f64..10.0) {
        let m = pulse_map(&trap, x / trap.omega2).unwrap();
        let w = trap.omega1;
        let rotated = free_rotation(w, a / w).unwrap().then(&m).then(&free_rotation(w, b / w).unwrap());
        let (l, lr) = (squeezing_db(&m).unwrap(), squeezing_db(&rotated).unwrap());
        prop_assert!((l - lr).abs() < 1e-9 * (1.0 + l));
    }

    #[test]
    fn lambda_max_symmetric_under_swap(trap in trap()) {
        let (a, b) = (lambda_max(&trap).unwrap(), lambda_max(&trap.swapped()).unwrap());
        prop_assert!((a - b).abs() < 1e-12 * (1.0 + a));
    }

    #[test]
    fn reversed_inverse_undoes_schedule(s in schedule()) {
        let forward = compose_schedule(&s).unwrap();
        let undo = s.reversed().segments.iter().fold(forward, |acc, seg| {
            let step = match seg.kind {
                SegmentKind::Pulse => pulse_map(&s.trap, seg.duration).unwrap(),
                SegmentKind::Gap => free_rotation(s.trap.omega1, seg.duration).unwrap(),
            };
            acc.then(&step.inverse())
        });
        prop_assert!(undo.matrix().max_abs_diff(&Mat2::IDENTITY) < 1e-10 * forward.matrix().max_abs().powi(2).max(1.0));
    }

    #[test]
    fn ideal_pulse_is_conjugation(trap in trap(), x in 0.0f64..3.0, n in 0.0f64..1e8) {
        let tau = x / trap.omega2;
        let s0 = initial_thermal(n).unwrap();
        let got = propagate_pulse(&s0, &trap, tau, &DephasingModel::NONE).unwrap();
        let want = pulse_map(&trap, tau).unwrap().matrix().conjugate(s0.sigma());
        let scale = want.max_abs();
        prop_assert!(got.sigma().max_abs_diff(&want) <= 1e-10 * scale);
    }

    #[test]
    fn dephasing_never_shrinks_phase_space(trap in trap(), x in 0.0f64..3.0, eta in 0.0f64..=1.0, n in 0.0f64..1e6) {
        let s0 = initial_thermal(n).unwrap();
        let after = propagate_pulse(&s0, &trap, x / trap.omega2, &DephasingModel::new(eta).unwrap()).unwrap();
        let det0 = s0.sigma().det();
        prop_assert!(after.sigma().det() >= det0 * (1.0 - 1e-12));
        let (lo, _) = after.eigenvalues();
        prop_assert!(lo > 0.0);
        prop_assert!(after.is_physical());
    }

    #[test]
    fn squeezing_monotone_in_eta(trap in trap(), e1 in 0.0f64..=1.0, e2 in 0.0f64..=1.0, n in 0.0f64..1e6) {
        let (lo, hi) = if e1 <= e2 { (e1, e2) } else { (e2, e1) };
        let s0 = initial_thermal(n).unwrap();
        let tau = FRAC_PI_2 / trap.omega2;
        let l = |eta| {
            let s = propagate_pulse(&s0, &trap, tau, &DephasingModel::new(eta).unwrap()).unwrap();
            squeezing_db_noisy(&s, n).unwrap()
        };
        prop_assert!(l(hi) >= l(lo) - 1e-9);
    }

    #[test]
    fn half_turn_pulse_conserves_trace(trap in trap(), k in 0u32..4, n in 0.0f64..1e6) {
        let s0 = initial_thermal(n).unwrap();
        let after = propagate_pulse(&s0, &trap, k as f64 * PI / trap.omega2, &DephasingModel::NONE).unwrap();
        prop_assert!((after.sigma().trace() - s0.sigma().trace()).abs() <= 1e-9 * s0.sigma().trace());
    }

    #[test]
    fn measured_squeezing_ignores_rotation(a in 0.5f64..5.0, b in 0.5f64..5.0, theta in 0.0f64..PI, iso in 0.5f64..5.0) {
        let before = CovarianceState::new(Mat2::scalar(iso), [0.0, 0.0]).unwrap();
        let after = CovarianceState::new(Mat2::diag(a, b), [0.0, 0.0]).unwrap();
        let rotated = after.transformed(&Mat2::rotation(theta)).unwrap();
        let (l, lr) = (measured_squeezing_db(&before, &after), measured_squeezing_db(&before, &rotated));
        prop_assert!((l - lr).abs() < 1e-9);
    }

    #[test]
    fn mean_subtraction_is_idempotent(seed in any::<u64>(), n in 2usize..12, len in 4usize..64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let traces: Vec<Vec<f64>> = (0..n).map(|_| (0..len).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let centred = subtract_ensemble_mean(&traces).unwrap();
        let mean = ensemble_mean_trace(&centred).unwrap();
        prop_assert!(mean.iter().all(|m| m.abs() < 1e-12));
        let twice = subtract_ensemble_mean(&centred).unwrap();
        for (x, y) in centred.iter().flatten().zip(twice.iter().flatten()) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn welch_psd_satisfies_parseval(seed in any::<u64>(), f in 0.01f64..0.45, amp in 0.0f64..3.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dt = 1e-6;
        let x: Vec<f64> = (0..1 << 15)
            .map(|k| amp * (2.0 * PI * f * k as f64).sin() + rng.sample::<f64, _>(StandardNormal))
            .collect();
        let mean = x.iter().sum::<f64>() / x.len() as f64;
        let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / x.len() as f64;
        let psd = welch_psd(&x, dt, 1 << 11, 0.5).unwrap();
        prop_assert!((psd.total_power() / var - 1.0).abs() < 0.05);
    }
}

#[test]
fn ensembles_do_not_depend_on_thread_count() {
    let trap = TrapPair::new(2.0 * PI * 112e3, 2.0 * PI * 49.3e3).unwrap();
    let mut params = LangevinParams::new(3.1e-19, 300.0, 1e3);
    params.pulse_start = 2e-5;
    params.jitter_std = 0.3;
    let schedule = PulseSchedule::single_pulse(trap, 5e-6).unwrap();
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| run_ensemble(&params, &schedule, 64, 1e-4, 5e-7, 5).unwrap())
    };
    assert_eq!(run(1), run(4));
}
