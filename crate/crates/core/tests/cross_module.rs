use nalgebra::DMatrix;
use qfeedback_core::fock_master::{
    build_operators, excitation_probability, integrate_hierarchy, reduce_to_qubit1, reduce_to_qubits, Drive,
    InitialState, Integration,
};
use qfeedback_core::pulses::{PulseSpec, SampledPulse};
use qfeedback_core::single_excitation::{dqd_steady_density, excite_with_pulse, verify_full_inversion, PulseRun};
use qfeedback_core::{NetworkParams, C64};

fn resonant(g1: f64, g2: f64, kappa: f64) -> NetworkParams {
    NetworkParams::mutual_resonance(g1, g2, kappa, 0.2).unwrap()
}

#[test]
fn hierarchy_settles_on_entangled_steady_state() {
    for alpha in [1.0, 2.0] {
        let p = resonant(alpha * 1e-3, 1e-3, 1.5e-3);
        let mut cfg = Integration::new(0.0, 2e5, 5.0);
        cfg.steady_tol = Some(1e-12);
        let traj = integrate_hierarchy(&p, &Drive::Vacuum, InitialState::Qubit1Excited, cfg).unwrap();
        let reduced = reduce_to_qubits(&traj.final_state.rho11, 2);
        let expected = dqd_steady_density(alpha).unwrap().rho;
        let dev = (reduced - expected).iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(dev < 1e-3, "alpha {alpha}: {dev:e}");
    }
}

#[test]
fn steady_mixture_reduces_to_qubit_one() {
    let ops = build_operators(&resonant(1e-3, 1e-3, 1.5e-3), 2).unwrap();
    let dqd = dqd_steady_density(1.0).unwrap().rho;
    // embed the two-qubit state with an empty cavity
    let mut rho = DMatrix::<C64>::zeros(ops.dim, ops.dim);
    let slots = [(0, 0), (0, 1), (1, 0), (1, 1)];
    for (a, &(qa1, qa2)) in slots.iter().enumerate() {
        for (b, &(qb1, qb2)) in slots.iter().enumerate() {
            rho[(ops.index(qa1, qa2, 0), ops.index(qb1, qb2, 0))] = dqd[(a, b)];
        }
    }
    let q1 = reduce_to_qubit1(&rho, 2);
    assert!((q1[(0, 0)].re - 0.75).abs() < 1e-12);
    assert!((q1[(1, 1)].re - 0.25).abs() < 1e-12);
    assert!(q1[(0, 1)].norm() < 1e-12);
    assert!((excitation_probability(&q1) - 0.25).abs() < 1e-12);
}

fn gaussian_peak(p: &NetworkParams) -> f64 {
    let spec = PulseSpec::Gaussian { omega: 2.75 * 1.5e-3, t_peak: 3e3 };
    let run = excite_with_pulse(p, &spec, PulseRun::new(2.0, 1e4)).unwrap();
    run.trajectory.samples.iter().map(|s| s.p_e1).fold(0.0, f64::max)
}

#[test]
fn weaker_second_coupling_raises_excitation() {
    let peaks: Vec<f64> = [1e-3, 0.5e-3, 0.1e-3]
        .iter()
        .map(|g2| gaussian_peak(&resonant(1e-3, *g2, 1.5e-3)))
        .collect();
    assert!(peaks[0] < peaks[1] && peaks[1] < peaks[2], "{peaks:?}");
}

#[test]
fn red_and_blue_detuning_excite_alike() {
    let base = resonant(1e-3, 1e-3, 1.5e-3);
    let spec = PulseSpec::Gaussian { omega: 2.75 * 1.5e-3, t_peak: 3e3 };
    let run = |d1: f64, d2: f64| {
        excite_with_pulse(&base.with_detunings(d1, d2, 0.0), &spec, PulseRun::new(2.0, 1e4))
            .unwrap()
            .trajectory
    };
    let red = run(1e-3, 1e-3);
    let blue = run(-1e-3, -1e-3);
    let dev = red
        .samples
        .iter()
        .zip(&blue.samples)
        .map(|(a, b)| (a.p_e1 - b.p_e1).abs())
        .fold(0.0, f64::max);
    assert!(dev < 1e-10, "{dev:e}");
    let peak = |t: &qfeedback_core::fock_master::Trajectory| t.samples.iter().map(|s| s.p_e1).fold(0.0, f64::max);
    assert!(peak(&run(1e-3, -1e-3)) > peak(&red));
}

#[test]
fn strong_coupling_oscillates_after_inversion() {
    let p = resonant(3e-3, 0.0, 7.5e-3);
    let run = verify_full_inversion(&p, 0.0, PulseRun::new(1.0, 4e3)).unwrap();
    assert!(run.p_e1_at_terminal() > 0.999);
    let tail: Vec<f64> = run.trajectory.samples[run.terminal_index..].iter().map(|s| s.p_e1).collect();
    // kt < 4 gamma: the decay after the terminal time is not monotone
    let rises = tail.windows(2).filter(|w| w[1] > w[0] + 1e-9).count();
    assert!(rises > 0);
    let weak = verify_full_inversion(&resonant(1e-3, 0.0, 7.5e-3), 0.0, PulseRun::new(2.0, 4e3)).unwrap();
    let tail: Vec<f64> = weak.trajectory.samples[weak.terminal_index..].iter().map(|s| s.p_e1).collect();
    assert!(tail.windows(2).all(|w| w[1] <= w[0] + 1e-12));
}

#[test]
fn pulse_specs_round_trip_through_json() {
    let specs = [
        r#"{"type":"rising_exponential","gamma":0.001}"#,
        r#"{"type":"gaussian","omega":0.004125,"t_peak":3000}"#,
        r#"{"type":"inverting","kappa_tilde":0.005,"gamma_k":0.001,"t_terminal":4000}"#,
        r#"{"type":"superposition","kappa_tilde":0.005,"gamma_1":0.001,"gamma_2":0.001,"t_terminal":0,"coeff_1":[0.7071067811865476,0],"coeff_2":[0.7071067811865476,0]}"#,
    ];
    for text in specs {
        let spec: PulseSpec = serde_json::from_str(text).unwrap();
        spec.validate().unwrap();
        let back: PulseSpec = serde_json::from_str(&serde_json::to_string(&spec).unwrap()).unwrap();
        assert_eq!(spec, back);
    }
    assert!(serde_json::from_str::<PulseSpec>(r#"{"type":"gaussian","omega":1,"t_peak":0,"extra":1}"#).is_err());
    let bad: PulseSpec = serde_json::from_str(
        r#"{"type":"superposition","kappa_tilde":0.005,"gamma_1":0.001,"gamma_2":0.001,"t_terminal":0,"coeff_1":[1,0],"coeff_2":[1,0]}"#,
    )
    .unwrap();
    assert!(bad.validate().is_err());
}

#[test]
fn sampled_pulse_drives_like_its_spec() {
    let p = resonant(1e-3, 1e-3, 1.5e-3);
    let spec = PulseSpec::Gaussian { omega: 2.75 * 1.5e-3, t_peak: 3e3 };
    let direct = excite_with_pulse(&p, &spec, PulseRun::new(2.0, 1e3)).unwrap();
    let resampled = PulseSpec::Sampled(SampledPulse::new(direct.pulse.grid, direct.pulse.values.clone()).unwrap());
    let again = excite_with_pulse(&p, &resampled, PulseRun::new(2.0, 1e3)).unwrap();
    let dev = direct
        .trajectory
        .samples
        .iter()
        .zip(&again.trajectory.samples)
        .map(|(a, b)| (a.p_e1 - b.p_e1).abs())
        .fold(0.0, f64::max);
    assert!(dev < 1e-12, "{dev:e}");
}
