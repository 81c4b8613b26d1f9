//! Master-equation hierarchy for the network driven by a single photon.
//!
//! The system is qubit 1 ⊗ qubit 2 ⊗ cavity truncated at `n_cav` photons.
//! Basis index: `(q1 * 2 + q2) * (n_cav + 1) + n` with `g = 0`, `e = 1`.
//! `sigma_z = |g><g| - |e><e|` and `sigma_- = |g><e|`.
//!
//! Four matrices are propagated: `rho11` is the physical state under the
//! photon, `rho00` the state under vacuum, and `rho10 = rho01^dagger` couple
//! them through the pulse envelope.

use nalgebra::{DMatrix, Matrix2, Matrix4};
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::linalg;
use crate::model::NetworkParams;
use crate::pulses::SampledPulse;
use crate::C64;

pub const DEFAULT_N_CAV: usize = 2;
/// Trace drift that aborts an integration.
pub const MAX_TRACE_DRIFT: f64 = 1e-5;
/// `dt` may be at most this fraction of the fastest time scale.
pub const MAX_STEP_FRACTION: f64 = 1.0 / 50.0;

type Op = DMatrix<C64>;

fn c(x: f64) -> C64 {
    C64::new(x, 0.0)
}

#[derive(Debug, Clone)]
pub struct OperatorSet {
    pub n_cav: usize,
    pub dim: usize,
    pub h: Op,
    /// `sqrt(kt) a`.
    pub l: Op,
    pub sigma_z_1: Op,
    pub sigma_z_2: Op,
    pub sigma_minus_1: Op,
    pub sigma_minus_2: Op,
    pub a_annihilate: Op,
    /// `-i H - L^dagger L / 2`.
    k_eff: Op,
    l_dag: Op,
}

impl OperatorSet {
    pub fn index(&self, q1: usize, q2: usize, n: usize) -> usize {
        (q1 * 2 + q2) * (self.n_cav + 1) + n
    }

    /// Projector `|q1 q2 n><q1 q2 n|`.
    pub fn basis_state(&self, q1: usize, q2: usize, n: usize) -> Op {
        let k = self.index(q1, q2, n);
        let mut rho = Op::zeros(self.dim, self.dim);
        rho[(k, k)] = c(1.0);
        rho
    }

    /// `-i[H, rho] + L rho L^dagger - {L^dagger L, rho} / 2`.
    pub fn liouvillian(&self, rho: &Op) -> Op {
        &self.k_eff * rho + rho * self.k_eff.adjoint() + &self.l * rho * &self.l_dag
    }
}

pub fn build_operators(params: &NetworkParams, n_cav: usize) -> Result<OperatorSet> {
    params.validate()?;
    if n_cav < 1 {
        return Err(invalid("n_cav", "need at least one photon level"));
    }
    let m = n_cav + 1;
    let id2 = Op::identity(2, 2);
    let idc = Op::identity(m, m);
    let mut sm = Op::zeros(2, 2);
    sm[(0, 1)] = c(1.0);
    let sz = Op::from_diagonal(&nalgebra::DVector::from_vec(vec![c(1.0), c(-1.0)]));
    let mut a = Op::zeros(m, m);
    for n in 1..m {
        a[(n - 1, n)] = c((n as f64).sqrt());
    }
    let on_q1 = |x: &Op| x.kronecker(&id2).kronecker(&idc);
    let on_q2 = |x: &Op| id2.kronecker(x).kronecker(&idc);
    let sigma_minus_1 = on_q1(&sm);
    let sigma_minus_2 = on_q2(&sm);
    let sigma_z_1 = on_q1(&sz);
    let sigma_z_2 = on_q2(&sz);
    let a_annihilate = id2.kronecker(&id2).kronecker(&a);
    let a_dag = a_annihilate.adjoint();

    let number = &a_dag * &a_annihilate;
    let exchange = |s: &Op, g: f64| (s * &a_dag + s.adjoint() * &a_annihilate) * c(g);
    let h = number * c(params.delta_omega_r)
        + &sigma_z_1 * c(params.delta_omega_1 / 2.0)
        + &sigma_z_2 * c(params.delta_omega_2 / 2.0)
        + exchange(&sigma_minus_1, params.coupling_1)
        + exchange(&sigma_minus_2, params.coupling_2);
    let l = &a_annihilate * c(params.kappa_tilde().sqrt());
    let l_dag = l.adjoint();
    let k_eff = &h * C64::new(0.0, -1.0) - (&l_dag * &l) * c(0.5);
    Ok(OperatorSet {
        n_cav,
        dim: 4 * m,
        h,
        l,
        sigma_z_1,
        sigma_z_2,
        sigma_minus_1,
        sigma_minus_2,
        a_annihilate,
        k_eff,
        l_dag,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct HierarchyState {
    pub t: f64,
    pub rho11: Op,
    pub rho10: Op,
    pub rho01: Op,
    pub rho00: Op,
}

impl HierarchyState {
    /// `rho11 = rho00 = |eta><eta|`, cross terms zero.
    pub fn start(t: f64, eta: Op) -> Self {
        let zero = Op::zeros(eta.nrows(), eta.ncols());
        Self {
            t,
            rho11: eta.clone(),
            rho10: zero.clone(),
            rho01: zero,
            rho00: eta,
        }
    }

    fn axpy(&self, h: f64, d: &HierarchyState) -> HierarchyState {
        let s = c(h);
        HierarchyState {
            t: self.t + h,
            rho11: &self.rho11 + &d.rho11 * s,
            rho10: &self.rho10 + &d.rho10 * s,
            rho01: &self.rho01 + &d.rho01 * s,
            rho00: &self.rho00 + &d.rho00 * s,
        }
    }

    fn max_abs(&self) -> f64 {
        [&self.rho11, &self.rho10, &self.rho01, &self.rho00]
            .into_iter()
            .map(linalg::max_abs)
            .fold(0.0, f64::max)
    }
}

/// Time derivative of the hierarchy for envelope value `xi`:
///
/// ```text
/// rho11' = L* rho11 + xi [rho01, L^dagger] + xi^* [L, rho10]
/// rho10' = L* rho10 + xi [rho00, L^dagger]
/// rho01' = L* rho01 + xi^* [L, rho00]
/// rho00' = L* rho00
/// ```
/// The returned `t` field is 1 so that RK4 stages advance time consistently.
pub fn hierarchy_rhs(state: &HierarchyState, xi: C64, ops: &OperatorSet) -> HierarchyState {
    let (l, ld) = (&ops.l, &ops.l_dag);
    let comm = |a: &Op, b: &Op| a * b - b * a;
    let lv = |rho: &Op| {
        if rho.iter().all(|z| *z == c(0.0)) {
            rho.clone()
        } else {
            ops.liouvillian(rho)
        }
    };
    let mut rho11 = ops.liouvillian(&state.rho11);
    let mut rho10 = lv(&state.rho10);
    let mut rho01 = lv(&state.rho01);
    let rho00 = ops.liouvillian(&state.rho00);
    if xi != c(0.0) {
        rho11 += comm(&state.rho01, ld) * xi + comm(l, &state.rho10) * xi.conj();
        rho10 += comm(&state.rho00, ld) * xi;
        rho01 += comm(l, &state.rho00) * xi.conj();
    }
    HierarchyState {
        t: 1.0,
        rho11,
        rho10,
        rho01,
        rho00,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
pub enum InitialState {
    #[serde(rename = "g1g2_0")]
    Ground,
    #[serde(rename = "e1g2_0")]
    Qubit1Excited,
    #[serde(rename = "g1e2_0")]
    Qubit2Excited,
    #[serde(rename = "g1g2_1")]
    CavityPhoton,
}

impl InitialState {
    pub fn label(self) -> &'static str {
        match self {
            InitialState::Ground => "g1g2_0",
            InitialState::Qubit1Excited => "e1g2_0",
            InitialState::Qubit2Excited => "g1e2_0",
            InitialState::CavityPhoton => "g1g2_1",
        }
    }

    pub fn from_label(label: &str) -> Result<Self> {
        [
            InitialState::Ground,
            InitialState::Qubit1Excited,
            InitialState::Qubit2Excited,
            InitialState::CavityPhoton,
        ]
        .into_iter()
        .find(|s| s.label() == label)
        .ok_or_else(|| invalid("initial", format!("unknown state label {label:?}")))
    }

    pub fn density(self, ops: &OperatorSet) -> Op {
        match self {
            InitialState::Ground => ops.basis_state(0, 0, 0),
            InitialState::Qubit1Excited => ops.basis_state(1, 0, 0),
            InitialState::Qubit2Excited => ops.basis_state(0, 1, 0),
            InitialState::CavityPhoton => ops.basis_state(0, 0, 1),
        }
    }
}

#[derive(Debug, Clone)]
pub enum Drive {
    Vacuum,
    Pulse(SampledPulse),
}

impl Drive {
    fn at(&self, t: f64) -> C64 {
        match self {
            Drive::Vacuum => c(0.0),
            Drive::Pulse(p) => p.value_at(t),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Integration {
    pub n_cav: usize,
    pub t_start: f64,
    pub t_end: f64,
    pub dt: f64,
    /// Keep every `state_stride`-th full state (0 keeps none).
    pub state_stride: usize,
    /// Stop early once `max |rhs|` falls below this.
    pub steady_tol: Option<f64>,
    /// Fastest rate of the drive, folded into the step-size check.
    pub drive_rate: f64,
}

impl Integration {
    pub fn new(t_start: f64, t_end: f64, dt: f64) -> Self {
        Self {
            n_cav: DEFAULT_N_CAV,
            t_start,
            t_end,
            dt,
            state_stride: 0,
            steady_tol: None,
            drive_rate: 0.0,
        }
    }
}

/// Observables of `rho11` at one time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Sample {
    pub t: f64,
    pub p_e1: f64,
    pub p_e2: f64,
    /// Mean cavity occupation.
    pub p_cavity: f64,
    pub tr_rho11: f64,
    pub tr_rho00: f64,
    pub hermiticity_defect: f64,
    /// `max |rho01 - rho10^dagger|`.
    pub cross_defect: f64,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    pub states: Vec<HierarchyState>,
    pub steady: bool,
    pub final_state: HierarchyState,
}

impl Trajectory {
    pub fn last(&self) -> &Sample {
        self.samples.last().expect("trajectory has at least one sample")
    }

    /// Sample at the grid time nearest `t`.
    pub fn at(&self, t: f64) -> &Sample {
        self.samples
            .iter()
            .min_by(|a, b| (a.t - t).abs().total_cmp(&(b.t - t).abs()))
            .expect("trajectory has at least one sample")
    }
}

fn trace(m: &Op) -> C64 {
    m.trace()
}

fn observe(state: &HierarchyState, ops: &OperatorSet) -> Sample {
    let rho = &state.rho11;
    let q1 = reduce_to_qubit1(rho, ops.n_cav);
    let q = reduce_to_qubits(rho, ops.n_cav);
    let m = ops.n_cav + 1;
    let occupation: f64 = (0..ops.dim).map(|k| (k % m) as f64 * rho[(k, k)].re).sum();
    Sample {
        t: state.t,
        p_e1: excitation_probability(&q1),
        p_e2: (q[(1, 1)] + q[(3, 3)]).re.clamp(0.0, 1.0),
        p_cavity: occupation,
        tr_rho11: trace(rho).re,
        tr_rho00: trace(&state.rho00).re,
        hermiticity_defect: linalg::hermiticity_defect(rho),
        cross_defect: linalg::max_abs(&(&state.rho01 - state.rho10.adjoint())),
    }
}

/// Classic RK4 on a fixed grid from `t_start` to `t_end`.
pub fn integrate_hierarchy(
    params: &NetworkParams,
    drive: &Drive,
    initial: InitialState,
    cfg: Integration,
) -> Result<Trajectory> {
    let ops = build_operators(params, cfg.n_cav)?;
    integrate_from(&ops, drive, HierarchyState::start(cfg.t_start, initial.density(&ops)), params, cfg)
}

/// RK4 from an arbitrary hierarchy state.
pub fn integrate_from(
    ops: &OperatorSet,
    drive: &Drive,
    start: HierarchyState,
    params: &NetworkParams,
    cfg: Integration,
) -> Result<Trajectory> {
    if !(cfg.t_end > cfg.t_start) {
        return Err(invalid("t_end", format!("must exceed t_start {}", cfg.t_start)));
    }
    let rate = params.fastest_rate().max(cfg.drive_rate);
    if !(cfg.dt > 0.0) || cfg.dt * rate > MAX_STEP_FRACTION * (1.0 + 1e-9) {
        return Err(Error::StepTooLarge {
            reason: format!(
                "dt = {} exceeds {} of the fastest time scale 1/{rate:e}",
                cfg.dt, MAX_STEP_FRACTION
            ),
        });
    }
    let steps = ((cfg.t_end - cfg.t_start) / cfg.dt).round().max(1.0) as usize;
    let dt = (cfg.t_end - cfg.t_start) / steps as f64;

    let mut state = start;
    let mut samples = vec![observe(&state, ops)];
    let mut states = Vec::new();
    if cfg.state_stride > 0 {
        states.push(state.clone());
    }
    let mut steady = false;
    for k in 0..steps {
        let t = cfg.t_start + k as f64 * dt;
        state.t = t;
        let x0 = drive.at(t);
        let xm = drive.at(t + dt / 2.0);
        let x1 = drive.at(t + dt);
        let k1 = hierarchy_rhs(&state, x0, ops);
        let k2 = hierarchy_rhs(&state.axpy(dt / 2.0, &k1), xm, ops);
        let k3 = hierarchy_rhs(&state.axpy(dt / 2.0, &k2), xm, ops);
        let k4 = hierarchy_rhs(&state.axpy(dt, &k3), x1, ops);
        let next = HierarchyState {
            t: t + dt,
            rho11: &state.rho11 + (&k1.rho11 + (&k2.rho11 + &k3.rho11) * c(2.0) + &k4.rho11) * c(dt / 6.0),
            rho10: &state.rho10 + (&k1.rho10 + (&k2.rho10 + &k3.rho10) * c(2.0) + &k4.rho10) * c(dt / 6.0),
            rho01: &state.rho01 + (&k1.rho01 + (&k2.rho01 + &k3.rho01) * c(2.0) + &k4.rho01) * c(dt / 6.0),
            rho00: &state.rho00 + (&k1.rho00 + (&k2.rho00 + &k3.rho00) * c(2.0) + &k4.rho00) * c(dt / 6.0),
        };
        state = next;
        let sample = observe(&state, ops);
        let drift = (sample.tr_rho11 - 1.0).abs().max((sample.tr_rho00 - 1.0).abs());
        if !(drift <= MAX_TRACE_DRIFT) {
            return Err(Error::StepTooLarge {
                reason: format!("trace drift {drift:e} at t = {}", state.t),
            });
        }
        samples.push(sample);
        if cfg.state_stride > 0 && (k + 1) % cfg.state_stride == 0 {
            states.push(state.clone());
        }
        if let Some(tol) = cfg.steady_tol {
            if matches!(drive, Drive::Vacuum) && k1.max_abs() < tol {
                steady = true;
                break;
            }
        }
    }
    Ok(Trajectory {
        samples,
        states,
        steady,
        final_state: state,
    })
}

/// Partial trace over qubit 2 and the cavity; basis `(g, e)`.
pub fn reduce_to_qubit1(rho: &Op, n_cav: usize) -> Matrix2<C64> {
    let q = reduce_to_qubits(rho, n_cav);
    Matrix2::new(
        q[(0, 0)] + q[(1, 1)],
        q[(0, 2)] + q[(1, 3)],
        q[(2, 0)] + q[(3, 1)],
        q[(2, 2)] + q[(3, 3)],
    )
}

/// Partial trace over the cavity; basis `g1g2, g1e2, e1g2, e1e2`.
pub fn reduce_to_qubits(rho: &Op, n_cav: usize) -> Matrix4<C64> {
    let m = n_cav + 1;
    assert_eq!(rho.nrows(), 4 * m, "density matrix does not match n_cav");
    Matrix4::from_fn(|i, j| (0..m).map(|n| rho[(i * m + n, j * m + n)]).sum())
}

/// `<e|rho|e>`, clamped to `[0, 1]`.
pub fn excitation_probability(rho_qubit: &Matrix2<C64>) -> f64 {
    rho_qubit[(1, 1)].re.clamp(0.0, 1.0)
}
