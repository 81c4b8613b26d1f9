//! Single-photon pulse envelopes: definition, evaluation, sampling and norms.

use std::f64::consts::PI;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::C64;

/// Captured norm² below which a sampled pulse is rejected.
pub const MIN_CAPTURED_NORM_SQR: f64 = 0.9999;
/// Tolerance on the superposition normalization constraint.
pub const SUPERPOSITION_TOL: f64 = 1e-9;
/// Points per fastest envelope time scale for default grids.
pub const POINTS_PER_SCALE: f64 = 50.0;
/// Relative width of the band around `kt^2 = 16 g^2` evaluated by the limit formula.
const DEGENERATE_REL: f64 = 1e-12;

/// Uniform grid `t_k = t_start + k dt`, `k < n_points`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub t_start: f64,
    pub dt: f64,
    pub n_points: usize,
}

impl TimeGrid {
    pub fn new(t_start: f64, dt: f64, n_points: usize) -> Result<Self> {
        if !t_start.is_finite() {
            return Err(invalid("t_start", "must be finite"));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(invalid("dt", format!("must be positive, got {dt}")));
        }
        if n_points < 2 {
            return Err(invalid("n_points", "need at least two points"));
        }
        Ok(Self { t_start, dt, n_points })
    }

    /// Smallest uniform grid from `t0` to exactly `t1` with spacing at most `dt_max`.
    pub fn covering(t0: f64, t1: f64, dt_max: f64) -> Result<Self> {
        if !(t1 > t0) {
            return Err(invalid("grid", format!("empty interval [{t0}, {t1}]")));
        }
        if !(dt_max > 0.0) {
            return Err(invalid("dt", format!("must be positive, got {dt_max}")));
        }
        let steps = ((t1 - t0) / dt_max).ceil().max(1.0) as usize;
        Self::new(t0, (t1 - t0) / steps as f64, steps + 1)
    }

    pub fn t(&self, k: usize) -> f64 {
        self.t_start + k as f64 * self.dt
    }

    pub fn t_end(&self) -> f64 {
        self.t(self.n_points - 1)
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_points).map(|k| self.t(k))
    }

    /// Same span, `factor` times as many intervals.
    pub fn refined(&self, factor: usize) -> Self {
        let steps = (self.n_points - 1) * factor.max(1);
        Self {
            t_start: self.t_start,
            dt: self.dt / factor.max(1) as f64,
            n_points: steps + 1,
        }
    }
}

/// Parameters of the inverting pulse for qubit `k`.
///
/// `gamma_other` is the coupling of the other qubit. It enters through the
/// total coupling `g^2 = gamma_k^2 + gamma_other^2`; the pulse alone carries
/// norm² `gamma_k^2 / g^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InvertingSpec {
    pub kappa_tilde: f64,
    pub gamma_k: f64,
    #[serde(default)]
    pub gamma_other: f64,
    pub t_terminal: f64,
}

impl InvertingSpec {
    pub fn total_coupling_sqr(&self) -> f64 {
        self.gamma_k * self.gamma_k + self.gamma_other * self.gamma_other
    }

    pub fn evaluate(&self, r: f64) -> C64 {
        inverting_component(self.kappa_tilde, self.gamma_k, self.total_coupling_sqr(), self.t_terminal, r)
    }

    /// Decay rate of the slower of the two backward exponentials.
    pub fn slowest_rate(&self) -> f64 {
        let kt = self.kappa_tilde;
        let disc = kt * kt - 16.0 * self.total_coupling_sqr();
        if disc > 0.0 {
            (kt - disc.sqrt()) / 4.0
        } else {
            kt / 4.0
        }
    }

    fn validate(&self) -> Result<()> {
        positive("kappa_tilde", self.kappa_tilde)?;
        positive("gamma_k", self.gamma_k)?;
        non_negative("gamma_other", self.gamma_other)?;
        finite("t_terminal", self.t_terminal)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum PulseSpec {
    /// `sqrt(gamma) exp((gamma/2 + i omega_p) t)` for `t <= 0`, zero after.
    RisingExponential {
        gamma: f64,
        #[serde(default)]
        omega_p: f64,
    },
    /// `(omega^2 / 2 pi)^(1/4) exp(-omega^2 (t - t_peak)^2 / 4)`.
    Gaussian { omega: f64, t_peak: f64 },
    Inverting(InvertingSpec),
    /// `c1 nu_1 + c2 nu_2` where `nu_k` inverts qubit `k` and both share the
    /// cavity and terminal time. Coefficients are `[re, im]`.
    Superposition {
        kappa_tilde: f64,
        gamma_1: f64,
        gamma_2: f64,
        t_terminal: f64,
        coeff_1: [f64; 2],
        coeff_2: [f64; 2],
    },
    Sampled(SampledPulse),
}

impl PulseSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            PulseSpec::RisingExponential { gamma, omega_p } => {
                positive("gamma", *gamma)?;
                finite("omega_p", *omega_p)
            }
            PulseSpec::Gaussian { omega, t_peak } => {
                positive("omega", *omega)?;
                finite("t_peak", *t_peak)
            }
            PulseSpec::Inverting(spec) => spec.validate(),
            PulseSpec::Superposition { .. } => {
                let (a, b) = self.superposition_parts().expect("superposition");
                a.validate()?;
                b.validate()?;
                let (c1, c2) = self.superposition_coefficients().expect("superposition");
                check_superposition(c1, c2, a.gamma_k, b.gamma_k)
            }
            PulseSpec::Sampled(p) => {
                if p.values.len() != p.grid.n_points {
                    return Err(Error::GridMismatch);
                }
                TimeGrid::new(p.grid.t_start, p.grid.dt, p.grid.n_points).map(|_| ())
            }
        }
    }

    pub fn evaluate(&self, t: f64) -> C64 {
        match self {
            PulseSpec::RisingExponential { gamma, omega_p } => {
                if t > 0.0 {
                    C64::new(0.0, 0.0)
                } else {
                    gamma.sqrt() * (C64::new(gamma / 2.0, *omega_p) * t).exp()
                }
            }
            PulseSpec::Gaussian { omega, t_peak } => {
                let amp = (omega * omega / (2.0 * PI)).powf(0.25);
                C64::new(amp * (-omega * omega * (t - t_peak).powi(2) / 4.0).exp(), 0.0)
            }
            PulseSpec::Inverting(spec) => spec.evaluate(t),
            PulseSpec::Superposition { .. } => {
                let (a, b) = self.superposition_parts().expect("superposition");
                let (c1, c2) = self.superposition_coefficients().expect("superposition");
                c1 * a.evaluate(t) + c2 * b.evaluate(t)
            }
            PulseSpec::Sampled(p) => p.value_at(t),
        }
    }

    /// Interval holding all but a negligible part of the norm.
    pub fn support(&self) -> (f64, f64) {
        match self {
            PulseSpec::RisingExponential { gamma, .. } => (-20.0 / gamma, 0.0),
            PulseSpec::Gaussian { omega, t_peak } => (t_peak - 10.0 / omega, t_peak + 10.0 / omega),
            PulseSpec::Inverting(spec) => inverting_support(spec),
            PulseSpec::Superposition { .. } => {
                let (a, _) = self.superposition_parts().expect("superposition");
                inverting_support(&a)
            }
            PulseSpec::Sampled(p) => (p.grid.t_start, p.grid.t_end()),
        }
    }

    /// Fastest envelope rate.
    pub fn fastest_rate(&self) -> f64 {
        match self {
            PulseSpec::RisingExponential { gamma, omega_p } => gamma.max(omega_p.abs()),
            PulseSpec::Gaussian { omega, .. } => *omega,
            PulseSpec::Inverting(spec) => spec.kappa_tilde.max(spec.total_coupling_sqr().sqrt()),
            PulseSpec::Superposition { kappa_tilde, gamma_1, gamma_2, .. } => {
                kappa_tilde.max(gamma_1.hypot(*gamma_2))
            }
            // RK4 half steps no coarser than the sample spacing
            PulseSpec::Sampled(p) => 1.0 / (2.0 * POINTS_PER_SCALE * p.grid.dt),
        }
    }

    /// Default grid over the support, resolving the pulse and the given
    /// system rate with [`POINTS_PER_SCALE`] points per time scale.
    pub fn default_grid(&self, system_rate: f64) -> Result<TimeGrid> {
        if let PulseSpec::Sampled(p) = self {
            return Ok(p.grid);
        }
        let rate = self.fastest_rate().max(system_rate);
        let (t0, t1) = self.support();
        TimeGrid::covering(t0, t1, 1.0 / (POINTS_PER_SCALE * rate))
    }

    fn superposition_parts(&self) -> Option<(InvertingSpec, InvertingSpec)> {
        match *self {
            PulseSpec::Superposition { kappa_tilde, gamma_1, gamma_2, t_terminal, .. } => Some((
                InvertingSpec { kappa_tilde, gamma_k: gamma_1, gamma_other: gamma_2, t_terminal },
                InvertingSpec { kappa_tilde, gamma_k: gamma_2, gamma_other: gamma_1, t_terminal },
            )),
            _ => None,
        }
    }

    fn superposition_coefficients(&self) -> Option<(C64, C64)> {
        match *self {
            PulseSpec::Superposition { coeff_1, coeff_2, .. } => {
                Some((C64::new(coeff_1[0], coeff_1[1]), C64::new(coeff_2[0], coeff_2[1])))
            }
            _ => None,
        }
    }
}

fn inverting_support(spec: &InvertingSpec) -> (f64, f64) {
    // 40/kt alone truncates when one branch decays much slower than kt/4
    let span = (40.0 / spec.kappa_tilde).max(10.0 / spec.slowest_rate());
    (spec.t_terminal - span, spec.t_terminal)
}

/// Inverting pulse for qubit `k` when the other qubit is decoupled.
pub fn inverting_pulse(kappa_tilde: f64, gamma_k: f64, t_terminal: f64, r: f64) -> C64 {
    inverting_component(kappa_tilde, gamma_k, gamma_k * gamma_k, t_terminal, r)
}

/// `nu_k(r)` with total coupling `g2 = g^2`:
/// `2i gamma_k sqrt(kt) / s (exp(l_minus tau) - exp(l_plus tau))`,
/// `s = sqrt(kt^2 - 16 g^2)`, `l_pm = (-kt +- s) / 4`, `tau = t_terminal - r`.
pub fn inverting_component(kappa_tilde: f64, gamma_k: f64, g2: f64, t_terminal: f64, r: f64) -> C64 {
    if r > t_terminal {
        return C64::new(0.0, 0.0);
    }
    let tau = t_terminal - r;
    let kt = kappa_tilde;
    let prefactor = C64::new(0.0, 2.0 * gamma_k * kt.sqrt());
    let disc = kt * kt - 16.0 * g2;
    if disc.abs() < DEGENERATE_REL * kt * kt {
        return prefactor * (-tau / 2.0) * (-kt * tau / 4.0).exp();
    }
    let s = C64::new(disc, 0.0).sqrt();
    let minus = ((-kt - s) / 4.0 * tau).exp();
    let plus = ((-kt + s) / 4.0 * tau).exp();
    prefactor * (minus - plus) / s
}

/// Complex envelope on a uniform grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledPulse {
    pub grid: TimeGrid,
    pub values: Vec<C64>,
}

impl SampledPulse {
    pub fn new(grid: TimeGrid, values: Vec<C64>) -> Result<Self> {
        if values.len() != grid.n_points {
            return Err(Error::GridMismatch);
        }
        Ok(Self { grid, values })
    }

    /// Trapezoidal `int |xi|^2 dt`.
    pub fn norm_sqr(&self) -> f64 {
        trapezoid(self.grid.dt, self.values.iter().map(|z| z.norm_sqr()))
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// Linear interpolation; zero outside the grid.
    pub fn value_at(&self, t: f64) -> C64 {
        let x = (t - self.grid.t_start) / self.grid.dt;
        let last = (self.grid.n_points - 1) as f64;
        if !(x >= 0.0 && x <= last) {
            return C64::new(0.0, 0.0);
        }
        let k = (x.floor() as usize).min(self.grid.n_points - 2);
        let w = x - k as f64;
        self.values[k] * (1.0 - w) + self.values[k + 1] * w
    }

    /// Trapezoidal `<self, other> = int conj(self) other dt` on a shared grid.
    pub fn inner(&self, other: &SampledPulse) -> Result<C64> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        let dt = self.grid.dt;
        let n = self.values.len();
        let mut acc = C64::new(0.0, 0.0);
        for (k, (a, b)) in self.values.iter().zip(&other.values).enumerate() {
            let w = if k == 0 || k == n - 1 { 0.5 } else { 1.0 };
            acc += w * a.conj() * b;
        }
        Ok(acc * dt)
    }

    pub fn scaled(&self, c: C64) -> SampledPulse {
        SampledPulse {
            grid: self.grid,
            values: self.values.iter().map(|z| z * c).collect(),
        }
    }

    /// CSV with header `t,re,im`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "t,re,im")?;
        for (t, z) in self.grid.times().zip(&self.values) {
            writeln!(out, "{t},{},{}", z.re, z.im)?;
        }
        Ok(())
    }
}

pub(crate) fn trapezoid(dt: f64, values: impl ExactSizeIterator<Item = f64>) -> f64 {
    let n = values.len();
    let mut acc = 0.0;
    for (k, v) in values.enumerate() {
        acc += if k == 0 || k + 1 == n { 0.5 * v } else { v };
    }
    acc * dt
}

/// Evaluate `spec` on `grid`; analytic pulses must keep at least
/// [`MIN_CAPTURED_NORM_SQR`] of their norm on the grid.
pub fn sample(spec: &PulseSpec, grid: TimeGrid) -> Result<SampledPulse> {
    spec.validate()?;
    // the rising exponential and the inverting pulse end on a jump
    let (_, edge) = spec.support();
    let snap = |t: f64| if (t - edge).abs() < 1e-6 * grid.dt { edge } else { t };
    let values = grid.times().map(|t| spec.evaluate(snap(t))).collect();
    let pulse = SampledPulse::new(grid, values)?;
    if !matches!(spec, PulseSpec::Sampled(_)) {
        let captured = pulse.norm_sqr() / expected_norm_sqr(spec);
        if captured < MIN_CAPTURED_NORM_SQR {
            return Err(Error::SupportTruncated { captured });
        }
    }
    Ok(pulse)
}

/// Analytic norm² of a spec; below one only for a lone inverting component
/// of a coupled pair.
fn expected_norm_sqr(spec: &PulseSpec) -> f64 {
    match spec {
        PulseSpec::Inverting(s) => s.gamma_k * s.gamma_k / s.total_coupling_sqr(),
        _ => 1.0,
    }
}

/// `|c1 g1 + c2 g2|^2 = g1^2 + g2^2`.
pub fn check_superposition(c1: C64, c2: C64, gamma_1: f64, gamma_2: f64) -> Result<()> {
    let lhs = (c1 * gamma_1 + c2 * gamma_2).norm_sqr();
    let rhs = gamma_1 * gamma_1 + gamma_2 * gamma_2;
    if (lhs - rhs).abs() > SUPERPOSITION_TOL * rhs.max(f64::MIN_POSITIVE) {
        return Err(Error::NormConstraintViolated { lhs, rhs });
    }
    Ok(())
}

/// Pointwise `c1 p1 + c2 p2`, after checking the normalization constraint.
pub fn superpose(
    c1: C64,
    c2: C64,
    p1: &SampledPulse,
    p2: &SampledPulse,
    gamma_1: f64,
    gamma_2: f64,
) -> Result<SampledPulse> {
    if p1.grid != p2.grid {
        return Err(Error::GridMismatch);
    }
    check_superposition(c1, c2, gamma_1, gamma_2)?;
    let values = p1.values.iter().zip(&p2.values).map(|(a, b)| c1 * a + c2 * b).collect();
    SampledPulse::new(p1.grid, values)
}

fn positive(name: &'static str, x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(invalid(name, format!("must be positive, got {x}")))
    }
}

fn non_negative(name: &'static str, x: f64) -> Result<()> {
    if x >= 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(invalid(name, format!("must be non-negative, got {x}")))
    }
}

fn finite(name: &'static str, x: f64) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(invalid(name, format!("must be finite, got {x}")))
    }
}
