//! Single-excitation dynamics with vacuum input and qubit 1 initially excited.
//!
//! The joint state is
//! `s1(t) int_0^t eta b^dagger |g1g2 0> + s2 |g1e2 0> + s3 |e1g2 0> + s4 |g1g2 1>`.
//! Only the product `s1 eta = sqrt(kt) s4` is physical. `s1` is evolved as a
//! pure phase, the raw emitted amplitude `f = sqrt(kt) s4 / s1` is recorded,
//! and the reported asymptotic `s1` is `|f|` with `eta = f / |f|`.
//!
//! Also home to the inversion check that drives the hierarchy with the
//! inverting pulse.

use nalgebra::{DMatrix, Matrix4};
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::fock_master::{integrate_hierarchy, Drive, InitialState, Integration, Trajectory};
use crate::model::NetworkParams;
use crate::pulses::{sample, InvertingSpec, PulseSpec, SampledPulse, TimeGrid};
use crate::stability::TOL_FREQ;
use crate::C64;

/// `|lambda_3|` below this fraction of `kt` uses the confluent formulas.
const CONFLUENT_REL: f64 = 1e-10;
/// Allowed relative disagreement between the two square-root branches.
const BRANCH_TOL: f64 = 1e-9;
/// A trajectory has decayed once `|s4|` is below this fraction of its peak.
const DECAY_FRACTION: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AmplitudeState {
    pub t: f64,
    pub s1: C64,
    pub s2: C64,
    pub s3: C64,
    pub s4: C64,
}

impl AmplitudeState {
    pub fn initial() -> Self {
        Self {
            t: 0.0,
            s1: C64::new(1.0, 0.0),
            s2: C64::new(0.0, 0.0),
            s3: C64::new(1.0, 0.0),
            s4: C64::new(0.0, 0.0),
        }
    }

    /// `|s2|^2 + |s3|^2 + |s4|^2`.
    pub fn bound_population(&self) -> f64 {
        self.s2.norm_sqr() + self.s3.norm_sqr() + self.s4.norm_sqr()
    }

    fn as_array(&self) -> [C64; 4] {
        [self.s1, self.s2, self.s3, self.s4]
    }

    fn from_array(t: f64, s: [C64; 4]) -> Self {
        Self { t, s1: s[0], s2: s[1], s3: s[2], s4: s[3] }
    }
}

/// Time derivatives `(s1', s2', s3', s4')`.
pub fn amplitude_rhs(state: &AmplitudeState, params: &NetworkParams) -> [C64; 4] {
    derivative(&state.as_array(), params)
}

fn derivative(s: &[C64; 4], p: &NetworkParams) -> [C64; 4] {
    let i = C64::i();
    let (d1, d2) = (p.delta_omega_1, p.delta_omega_2);
    let half_diff = (d1 - d2) / 2.0;
    let cavity = -i * (p.delta_omega_r + (d1 + d2) / 2.0) - p.kappa_tilde() / 2.0;
    [
        -i * ((d1 + d2) / 2.0) * s[0],
        -i * half_diff * s[1] - i * p.coupling_2 * s[3],
        i * half_diff * s[2] - i * p.coupling_1 * s[3],
        cavity * s[3] - i * p.coupling_1 * s[2] - i * p.coupling_2 * s[1],
    ]
}

#[derive(Debug, Clone)]
pub struct AmplitudeTrajectory {
    pub states: Vec<AmplitudeState>,
    /// `int_0^t kt |s4|^2`, one entry per state.
    pub emitted: Vec<f64>,
    pub dt: f64,
}

impl AmplitudeTrajectory {
    pub fn last(&self) -> &AmplitudeState {
        self.states.last().expect("trajectory has at least one state")
    }

    /// `max_t | bound population + emitted - 1 |`.
    pub fn probability_defect(&self) -> f64 {
        self.states
            .iter()
            .zip(&self.emitted)
            .map(|(s, e)| (s.bound_population() + e - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

/// RK4 from `t = 0` to `t_end`, with the emitted norm as a fifth component.
pub fn integrate_amplitudes(params: &NetworkParams, t_end: f64, dt: f64) -> Result<AmplitudeTrajectory> {
    params.validate()?;
    if !(t_end > 0.0) {
        return Err(invalid("t_end", "must be positive"));
    }
    let rate = params.fastest_rate();
    if !(dt > 0.0) || dt * rate > crate::fock_master::MAX_STEP_FRACTION * (1.0 + 1e-9) {
        return Err(Error::StepTooLarge {
            reason: format!("dt = {dt} is coarser than 1/50 of 1/{rate:e}"),
        });
    }
    let steps = (t_end / dt).round().max(1.0) as usize;
    let h = t_end / steps as f64;
    let kt = params.kappa_tilde();

    let add = |a: &[C64; 4], b: &[C64; 4], w: f64| -> [C64; 4] { std::array::from_fn(|k| a[k] + b[k] * w) };
    let mut s = AmplitudeState::initial().as_array();
    let mut emitted = 0.0;
    let mut states = Vec::with_capacity(steps + 1);
    let mut record = Vec::with_capacity(steps + 1);
    states.push(AmplitudeState::from_array(0.0, s));
    record.push(0.0);
    for k in 0..steps {
        let k1 = derivative(&s, params);
        let y2 = add(&s, &k1, h / 2.0);
        let k2 = derivative(&y2, params);
        let y3 = add(&s, &k2, h / 2.0);
        let k3 = derivative(&y3, params);
        let y4 = add(&s, &k3, h);
        let k4 = derivative(&y4, params);
        let e = [s[3], y2[3], y3[3], y4[3]].map(|z| kt * z.norm_sqr());
        emitted += h / 6.0 * (e[0] + 2.0 * e[1] + 2.0 * e[2] + e[3]);
        s = std::array::from_fn(|j| s[j] + (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]) * (h / 6.0));
        states.push(AmplitudeState::from_array((k + 1) as f64 * h, s));
        record.push(emitted);
    }
    Ok(AmplitudeTrajectory { states, emitted: record, dt: h })
}

/// Exponents `(l1, l2, l3)` for equal qubit detunings:
/// `l1,2 = (-(kt + 2i(d2 + dr)) -+ l3) / 4`,
/// `l3 = sqrt((kt + 2i(d2 + dr))^2 - 16 g^2)`.
pub fn exponents(params: &NetworkParams) -> (C64, C64, C64) {
    let i = C64::i();
    let b = params.kappa_tilde() + 2.0 * i * (params.delta_omega_2 + params.delta_omega_r);
    let l3 = (b * b - 16.0 * params.total_coupling_sqr()).sqrt();
    ((-b - l3) / 4.0, (-b + l3) / 4.0, l3)
}

/// Closed-form amplitudes for `delta_omega_1 = delta_omega_2`.
pub fn analytic_solution(params: &NetworkParams, t: f64) -> Result<AmplitudeState> {
    params.validate()?;
    let diff = (params.delta_omega_1 - params.delta_omega_2).abs();
    if diff >= TOL_FREQ {
        return Err(Error::DetuningMismatch { difference: diff });
    }
    let g2 = params.total_coupling_sqr();
    if g2 == 0.0 {
        return Err(invalid("coupling", "at least one qubit must couple to the cavity"));
    }
    let (l1, l2, l3) = exponents(params);
    let kt = params.kappa_tilde();
    if l3.norm() >= CONFLUENT_REL * kt {
        // the two square-root branches must agree
        let probe = 1.0 / kt;
        let a = closed_form(params, l1, l2, l3, probe);
        let b = closed_form(params, l2, l1, -l3, probe);
        let deviation = [(a.1 - b.1), (a.2 - b.2), (a.3 - b.3)]
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        if deviation > BRANCH_TOL {
            return Err(Error::BranchMismatch { deviation });
        }
    }
    let (s1, s2, s3, s4) = if l3.norm() < CONFLUENT_REL * kt {
        confluent_form(params, (l1 + l2) / 2.0, t)
    } else {
        closed_form(params, l1, l2, l3, t)
    };
    Ok(AmplitudeState { t, s1, s2, s3, s4 })
}

fn phase(params: &NetworkParams, t: f64) -> C64 {
    (C64::new(0.0, -(params.delta_omega_1 + params.delta_omega_2) / 2.0) * t).exp()
}

fn closed_form(p: &NetworkParams, l1: C64, l2: C64, l3: C64, t: f64) -> (C64, C64, C64, C64) {
    let i = C64::i();
    let (g1, g2) = (p.coupling_1, p.coupling_2);
    let gs = p.total_coupling_sqr();
    let (e1, e2) = ((l1 * t).exp(), (l2 * t).exp());
    let b = p.kappa_tilde() + 2.0 * i * (p.delta_omega_2 + p.delta_omega_r);
    let s2 = g1 * g2 / (2.0 * gs * l3) * ((e2 - e1) * b + l3 * e1 + l3 * e2 - 2.0 * l3);
    let s3 = (2.0 * g2 * g2 * l3 + 4.0 * l2 * g1 * g1 * e1 - 4.0 * l1 * g1 * g1 * e2) / (2.0 * gs * l3);
    let s4 = 2.0 * i * g1 * (e1 - e2) / l3;
    (phase(p, t), s2, s3, s4)
}

/// `l1 = l2 = l` limit of the closed forms.
fn confluent_form(p: &NetworkParams, l: C64, t: f64) -> (C64, C64, C64, C64) {
    let i = C64::i();
    let (g1, g2) = (p.coupling_1, p.coupling_2);
    let gs = p.total_coupling_sqr();
    let e = (l * t).exp();
    let shape = e * (1.0 - l * t);
    let s2 = g1 * g2 / gs * (shape - 1.0);
    let s3 = g2 * g2 / gs + g1 * g1 / gs * shape;
    let s4 = -i * g1 * t * e;
    (phase(p, t), s2, s3, s4)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SteadyLimit {
    /// Unequal detunings: everything leaks into the field.
    Detuned,
    /// Equal detunings with both couplings nonzero.
    Trapped,
    /// `gamma_1 = 0`: qubit 1 keeps its excitation.
    AlphaZero,
    /// `gamma_2 = 0`: qubit 2 plays no part and the photon escapes.
    AlphaInfinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SteadyState {
    pub s1_inf: C64,
    pub s2_inf: C64,
    pub s3_inf: C64,
    /// `gamma_1 / gamma_2`, absent in the limiting cases.
    pub alpha: Option<f64>,
    pub limit: SteadyLimit,
}

impl SteadyState {
    pub fn norm_sqr(&self) -> f64 {
        self.s1_inf.norm_sqr() + self.s2_inf.norm_sqr() + self.s3_inf.norm_sqr()
    }
}

/// Asymptotic amplitudes; `s1_inf` is taken real and non-negative.
pub fn steady_state(params: &NetworkParams) -> Result<SteadyState> {
    params.validate()?;
    let r = |x: f64| C64::new(x, 0.0);
    let (g1, g2) = (params.coupling_1, params.coupling_2);
    if g1 == 0.0 {
        return Ok(SteadyState { s1_inf: r(0.0), s2_inf: r(0.0), s3_inf: r(1.0), alpha: None, limit: SteadyLimit::AlphaZero });
    }
    let equal = (params.delta_omega_1 - params.delta_omega_2).abs() < TOL_FREQ;
    if !equal || g2 == 0.0 {
        let limit = if equal { SteadyLimit::AlphaInfinite } else { SteadyLimit::Detuned };
        return Ok(SteadyState { s1_inf: r(1.0), s2_inf: r(0.0), s3_inf: r(0.0), alpha: None, limit });
    }
    let alpha = g1 / g2;
    let (s1, s2, s3) = alpha_amplitudes(alpha);
    Ok(SteadyState {
        s1_inf: r(s1),
        s2_inf: r(s2),
        s3_inf: r(s3),
        alpha: Some(alpha),
        limit: SteadyLimit::Trapped,
    })
}

/// `(alpha / sqrt(alpha^2 + 1), -alpha / (alpha^2 + 1), 1 / (alpha^2 + 1))`.
fn alpha_amplitudes(alpha: f64) -> (f64, f64, f64) {
    if alpha.is_infinite() {
        return (1.0, 0.0, 0.0);
    }
    let d = alpha * alpha + 1.0;
    (alpha / d.sqrt(), -alpha / d, 1.0 / d)
}

/// Horizon long enough for the amplitudes to settle.
pub fn steady_horizon(params: &NetworkParams) -> f64 {
    let g_min = [params.coupling_1, params.coupling_2]
        .into_iter()
        .filter(|g| *g > 0.0)
        .fold(f64::INFINITY, f64::min);
    let slow = if g_min.is_finite() { 20.0 / g_min } else { 0.0 };
    (50.0 / params.kappa_tilde()).max(slow)
}

#[derive(Debug, Clone)]
pub struct EmittedPulse {
    /// Normalized output envelope (zero if nothing was emitted).
    pub eta: SampledPulse,
    /// Norm of the raw amplitude `sqrt(kt) s4 / s1`.
    pub s1_inf: f64,
}

/// Output envelope of the emitted photon.
pub fn emitted_pulse(traj: &AmplitudeTrajectory, params: &NetworkParams) -> Result<EmittedPulse> {
    let kt = params.kappa_tilde().sqrt();
    let raw: Vec<C64> = traj.states.iter().map(|s| kt * s.s4 / s.s1).collect();
    let peak = traj.states.iter().map(|s| s.s4.norm()).fold(0.0, f64::max);
    let tail = traj.last().s4.norm();
    if tail > DECAY_FRACTION * peak {
        return Err(Error::NotConverged {
            t: traj.last().t,
            residual: tail / peak,
        });
    }
    let grid = TimeGrid::new(0.0, traj.dt, raw.len())?;
    let f = SampledPulse::new(grid, raw)?;
    let norm = f.norm();
    let eta = if norm > 0.0 { f.scaled(C64::new(1.0 / norm, 0.0)) } else { f };
    Ok(EmittedPulse { eta, s1_inf: norm })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DqdDensity {
    /// Basis `g1g2, g1e2, e1g2, e1e2`.
    pub rho: Matrix4<C64>,
    pub purity: f64,
}

impl DqdDensity {
    /// `|s1|^2 |g1g2><g1g2| + |psi><psi|`, `psi = s2 |g1e2> + s3 |e1g2>`.
    pub fn from_amplitudes(s1: C64, s2: C64, s3: C64) -> Self {
        let mut rho = Matrix4::zeros();
        rho[(0, 0)] = C64::new(s1.norm_sqr(), 0.0);
        let psi = [s2, s3];
        for (a, x) in psi.iter().enumerate() {
            for (b, y) in psi.iter().enumerate() {
                rho[(1 + a, 1 + b)] = x * y.conj();
            }
        }
        let block = s2.norm_sqr() + s3.norm_sqr();
        Self { rho, purity: s1.norm_sqr().powi(2) + block * block }
    }

    pub fn from_steady(state: &SteadyState) -> Self {
        Self::from_amplitudes(state.s1_inf, state.s2_inf, state.s3_inf)
    }
}

/// Steady two-qubit state for coupling ratio `alpha`.
pub fn dqd_steady_density(alpha: f64) -> Result<DqdDensity> {
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(invalid("alpha", format!("must be finite and non-negative, got {alpha}")));
    }
    let (s1, s2, s3) = alpha_amplitudes(alpha);
    let r = |x: f64| C64::new(x, 0.0);
    Ok(DqdDensity::from_amplitudes(r(s1), r(s2), r(s3)))
}

#[derive(Debug, Clone)]
pub struct PulseExcitation {
    pub trajectory: Trajectory,
    pub pulse: SampledPulse,
    /// Index of the sample at the pulse's end.
    pub terminal_index: usize,
    pub dt: f64,
}

impl PulseExcitation {
    pub fn p_e1_at_terminal(&self) -> f64 {
        self.trajectory.samples[self.terminal_index].p_e1
    }
}

#[derive(Debug, Clone, Copy)]
pub struct PulseRun {
    pub dt: f64,
    /// Time simulated past the end of the pulse.
    pub after: f64,
    pub n_cav: usize,
    pub state_stride: usize,
}

impl PulseRun {
    pub fn new(dt: f64, after: f64) -> Self {
        Self {
            dt,
            after,
            n_cav: crate::fock_master::DEFAULT_N_CAV,
            state_stride: 0,
        }
    }
}

/// Drive the hierarchy from the ground state with a pulse that ends on a
/// hard edge, such as the inverting pulse. The step grid is aligned so that
/// the edge is a grid point and the pulse is sampled at the RK4 stage times.
pub fn excite_with_pulse(params: &NetworkParams, spec: &PulseSpec, run: PulseRun) -> Result<PulseExcitation> {
    spec.validate()?;
    if !(run.dt > 0.0) || !(run.after >= 0.0) {
        return Err(invalid("dt", "dt must be positive and the trailing window non-negative"));
    }
    let dt = run.dt;
    let (lo, edge) = spec.support();
    let steps = ((edge - lo) / dt).ceil() as usize;
    let t_start = edge - steps as f64 * dt;
    let grid = TimeGrid::new(t_start, dt / 2.0, 2 * steps + 1)?;
    let pulse = sample(spec, grid)?;
    let extra = (run.after / dt).ceil().max(1.0);
    let mut cfg = Integration::new(t_start, edge + extra * dt, dt);
    cfg.n_cav = run.n_cav;
    cfg.state_stride = run.state_stride;
    cfg.drive_rate = spec.fastest_rate();
    let trajectory = integrate_hierarchy(params, &Drive::Pulse(pulse.clone()), InitialState::Ground, cfg)?;
    Ok(PulseExcitation {
        trajectory,
        pulse,
        terminal_index: steps,
        dt,
    })
}

/// Drive the network with the inverting pulse for the one coupled qubit and
/// report the excitation at the terminal time.
pub fn verify_full_inversion(params: &NetworkParams, t_terminal: f64, run: PulseRun) -> Result<PulseExcitation> {
    params.validate()?;
    if !params.is_mutual_resonance() {
        return Err(invalid("detuning", "full inversion needs mutual resonance"));
    }
    let (g1, g2) = (params.coupling_1, params.coupling_2);
    let gamma_k = match (g1 > 0.0, g2 > 0.0) {
        (true, false) => g1,
        (false, true) => g2,
        _ => return Err(invalid("coupling", "exactly one qubit must couple to the cavity")),
    };
    let spec = PulseSpec::Inverting(InvertingSpec {
        kappa_tilde: params.kappa_tilde(),
        gamma_k,
        gamma_other: 0.0,
        t_terminal,
    });
    excite_with_pulse(params, &spec, run)
}

/// Eigenvalues of a Hermitian 4x4, ascending.
pub fn spectrum(rho: &Matrix4<C64>) -> Vec<f64> {
    crate::linalg::hermitian_eigenvalues(&DMatrix::from_iterator(4, 4, rho.iter().copied()))
}
