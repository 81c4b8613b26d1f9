//! Transfer function, impulse response and output pulse of the network
//! driven by a single photon.
//!
//! For a single-photon input the output is again a single photon whose
//! envelope is the input filtered by the impulse response
//! `g(t) = delta(t) + C exp(A t) B`. The delta part is never discretized;
//! it is the additive `xi(t)` term of the output.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, Matrix3, Vector3};
use rustfft::FftPlanner;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::LinearModel;
use crate::pulses::{trapezoid, SampledPulse, TimeGrid};
use crate::stability::TOL_FREQ;
use crate::C64;

/// Relative size of `det(sI - A)` below which `s` counts as a pole.
const POLE_REL: f64 = 1e-12;
/// Bound on `|C v|` and `|w^dagger B|` for the dark mode, relative to `sqrt(kt)`.
const DARK_MODE_TOL: f64 = 1e-9;

/// `exp(A t)` by scaling and squaring with a Pade approximant.
pub fn matrix_exponential(a: &Matrix3<C64>, t: f64) -> Matrix3<C64> {
    (a * C64::new(t, 0.0)).exp()
}

fn pole_tolerance(model: &LinearModel, s: C64) -> f64 {
    POLE_REL * (s.norm() + linalg::max_abs(&model.a)).powi(3)
}

fn det_shifted(model: &LinearModel, s: C64) -> C64 {
    (Matrix3::identity() * s - model.a).determinant()
}

/// Transfer function from its closed rational form.
pub fn transfer_at(model: &LinearModel, s: C64) -> Result<C64> {
    let det = det_shifted(model, s);
    if det.norm() < pole_tolerance(model, s) {
        return removable_value(model, s, det.norm());
    }
    let p = &model.params;
    let i = C64::i();
    let kt = model.decay_rate;
    let (g1s, g2s) = (p.coupling_1.powi(2), p.coupling_2.powi(2));
    let s1 = s - i * p.delta_omega_1;
    let s2 = s - i * p.delta_omega_2;
    let shared = 2.0 * g1s * s2 + 2.0 * g2s * s1;
    let cavity = 2.0 * s + 2.0 * i * p.delta_omega_r;
    let num = shared + s1 * s2 * (cavity - kt);
    let den = shared + s1 * s2 * (cavity + kt);
    Ok(num / den)
}

/// Transfer function as `D + C (sI - A)^-1 B`.
pub fn transfer_resolvent(model: &LinearModel, s: C64) -> Result<C64> {
    let shifted = Matrix3::identity() * s - model.a;
    let det = shifted.determinant();
    if det.norm() < pole_tolerance(model, s) {
        return removable_value(model, s, det.norm());
    }
    let x = shifted
        .lu()
        .solve(&model.b)
        .ok_or(Error::PoleProximity { s, det: det.norm() })?;
    Ok(model.d + (model.c * x)[0])
}

/// Value at an eigenvalue of `A` that the port can neither excite nor see,
/// such as an uncoupled qubit or the dark mode. Any other pole is an error.
fn removable_value(model: &LinearModel, s: C64, det: f64) -> Result<C64> {
    let pole = Error::PoleProximity { s, det };
    let shifted = Matrix3::identity() * s - model.a;
    let scale = s.norm() + linalg::max_abs(&model.a);
    let svd = shifted.svd(true, true);
    let x = svd.solve(&model.b, 1e-9 * scale).map_err(|_| pole.clone())?;
    let b_norm = model.b.norm();
    if (shifted * x - model.b).norm() > 1e-9 * b_norm {
        return Err(pole);
    }
    let v_t = svd.v_t.as_ref().ok_or_else(|| pole.clone())?;
    for (k, sigma) in svd.singular_values.iter().enumerate() {
        if *sigma <= 1e-9 * scale {
            let v = v_t.row(k).adjoint();
            if (model.c * v)[0].norm() > 1e-9 * b_norm {
                return Err(pole);
            }
        }
    }
    Ok(model.d + (model.c * x)[0])
}

#[derive(Debug, Clone)]
pub struct ImpulseResponse {
    /// Weight of the `delta(t)` term.
    pub dirac_weight: C64,
    model: LinearModel,
}

impl ImpulseResponse {
    /// `C exp(A t) B` for `t >= 0`, zero before.
    pub fn smooth(&self, t: f64) -> C64 {
        if t < 0.0 {
            return C64::new(0.0, 0.0);
        }
        (self.model.c * matrix_exponential(&self.model.a, t) * self.model.b)[0]
    }
}

pub fn impulse_response(model: &LinearModel) -> ImpulseResponse {
    ImpulseResponse {
        dirac_weight: C64::new(1.0, 0.0),
        model: model.clone(),
    }
}

/// Smooth part of the impulse response at mutual resonance:
/// `-k (cosh(chi t/4) - k/chi sinh(chi t/4)) exp(-k t/4)`,
/// `chi = sqrt(k^2 - 16 g^2)`, where `k` is the decay rate in use.
pub fn resonance_impulse_closed_form(kappa: f64, coupling_sqr: f64, t: f64) -> C64 {
    let chi = C64::new(kappa * kappa - 16.0 * coupling_sqr, 0.0).sqrt();
    let x = chi * t / 4.0;
    let ratio = if chi.norm() < 1e-12 * kappa {
        // chi -> 0 limit of sinh(chi t/4) / chi
        C64::new(t / 4.0, 0.0)
    } else {
        x.sinh() / chi
    };
    -kappa * (x.cosh() - kappa * ratio) * (-kappa * t / 4.0).exp()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrequencyResponse {
    pub omega_grid: Vec<f64>,
    pub values: Vec<C64>,
}

impl FrequencyResponse {
    /// `max | |G(i w)| - 1 |`.
    pub fn allpass_max_deviation(&self) -> f64 {
        self.values.iter().map(|g| (g.norm() - 1.0).abs()).fold(0.0, f64::max)
    }
}

pub fn frequency_response(model: &LinearModel, omega_grid: &[f64]) -> Result<FrequencyResponse> {
    let values = omega_grid
        .iter()
        .map(|&w| transfer_at(model, C64::new(0.0, w)))
        .collect::<Result<Vec<_>>>()?;
    Ok(FrequencyResponse {
        omega_grid: omega_grid.to_vec(),
        values,
    })
}

#[derive(Debug, Clone, Copy)]
pub struct OutputOptions {
    /// Longest extension past the input grid, in multiples of the input span.
    pub extension_cap: f64,
    /// The output is followed until its bound drops below this fraction of its peak.
    pub decay_threshold: f64,
}

impl Default for OutputOptions {
    fn default() -> Self {
        Self {
            extension_cap: 10.0,
            decay_threshold: 1e-6,
        }
    }
}

/// Input and output envelopes on one grid; the input is zero past its own grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutputPulse {
    pub input: SampledPulse,
    pub output: SampledPulse,
    /// Number of leading samples that belong to the input grid.
    pub input_len: usize,
    /// `C x(t)`, the part of the output scattered by the network.
    scattered: Vec<C64>,
}

impl OutputPulse {
    pub fn input_norm(&self) -> f64 {
        self.input.norm()
    }

    /// `|eta|` with the jump at the end of the input handled exactly:
    /// `|eta|^2 = |xi|^2 + 2 Re <xi, y> + |y|^2` where `y` is continuous and
    /// `xi` lives on the input grid only.
    pub fn output_norm(&self) -> f64 {
        let dt = self.output.grid.dt;
        let n = self.input_len;
        let xi = &self.input.values[..n];
        let y = &self.scattered;
        let xi_sqr = trapezoid(dt, xi.iter().map(|z| z.norm_sqr()));
        let cross = trapezoid(dt, xi.iter().zip(y).map(|(a, b)| (a.conj() * b).re));
        let y_sqr = trapezoid(dt, y.iter().map(|z| z.norm_sqr()));
        (xi_sqr + 2.0 * cross + y_sqr).max(0.0).sqrt()
    }

    /// Last time at which `|eta|` reaches `fraction` of its peak.
    pub fn decay_time(&self, fraction: f64) -> f64 {
        let peak = self.output.values.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let last = self
            .output
            .values
            .iter()
            .rposition(|z| z.norm() >= fraction * peak)
            .unwrap_or(0);
        self.output.grid.t(last)
    }
}

/// Checks that a dark mode of `A`, if present, is invisible from the port.
fn check_dark_mode(model: &LinearModel) -> Result<()> {
    let p = &model.params;
    if (p.delta_omega_1 - p.delta_omega_2).abs() >= TOL_FREQ {
        return Ok(());
    }
    let a = DMatrix::from_iterator(3, 3, model.a.iter().copied());
    let lambda = C64::new(0.0, p.delta_omega_1);
    let eye = DMatrix::<C64>::identity(3, 3);
    let v = linalg::kernel_vector(&(&a - &eye * lambda));
    let w = linalg::kernel_vector(&(a.adjoint() - eye * lambda.conj()));
    let observability: C64 = (0..3).map(|k| model.c[k] * v[k]).sum();
    let controllability: C64 = (0..3).map(|k| w[k].conj() * model.b[k]).sum();
    let tol = DARK_MODE_TOL * model.decay_rate.sqrt();
    if observability.norm() > tol || controllability.norm() > tol {
        return Err(Error::MarginalModeExposed {
            observability: observability.norm(),
            controllability: controllability.norm(),
        });
    }
    Ok(())
}

/// Output envelope for a single-photon input.
///
/// The state `x(t_k) = int exp(A (t_k - r)) B xi(r) dr` is advanced with the
/// trapezoidal rule, which reproduces the trapezoidal convolution sum exactly.
/// Past the input grid the state decays freely until `sqrt(k) |x|`, a bound on
/// the output that never increases, drops below the decay threshold.
pub fn output_pulse(model: &LinearModel, input: &SampledPulse, opts: OutputOptions) -> Result<OutputPulse> {
    check_dark_mode(model)?;
    let grid = input.grid;
    let dt = grid.dt;
    let step = matrix_exponential(&model.a, dt);
    let half = C64::new(dt / 2.0, 0.0);
    let b = model.b;
    let eb = step * b;

    let n_in = grid.n_points;
    let mut scattered = Vec::with_capacity(n_in);
    let mut x: Vector3<C64> = b * input.values[0] * half;
    scattered.push((model.c * x)[0]);
    for k in 1..n_in {
        x = step * x + (eb * input.values[k - 1] + b * input.values[k]) * half;
        scattered.push((model.c * x)[0]);
    }

    let mut peak = input
        .values
        .iter()
        .zip(&scattered)
        .map(|(a, y)| (a + y).norm())
        .fold(0.0, f64::max);
    let span = grid.t_end() - grid.t_start;
    let max_extra = ((opts.extension_cap * span) / dt).ceil() as usize;
    let bound_gain = model.decay_rate.sqrt();
    let mut extra = 0;
    loop {
        if bound_gain * x.norm() < opts.decay_threshold * peak {
            break;
        }
        if extra >= max_extra {
            let partial = input.norm_sqr();
            return Err(Error::SupportTruncated { captured: partial });
        }
        x = step * x;
        let y = (model.c * x)[0];
        peak = peak.max(y.norm());
        scattered.push(y);
        extra += 1;
    }

    let out_grid = TimeGrid::new(grid.t_start, dt, n_in + extra)?;
    let mut xi = input.values.clone();
    xi.resize(out_grid.n_points, C64::new(0.0, 0.0));
    let eta: Vec<C64> = xi.iter().zip(&scattered).map(|(a, y)| a + y).collect();
    Ok(OutputPulse {
        input: SampledPulse::new(out_grid, xi)?,
        output: SampledPulse::new(out_grid, eta)?,
        input_len: n_in,
        scattered,
    })
}

/// Output envelope by the frequency-domain product `eta = G(i w) xi`,
/// with the transform `xi(w) = (2 pi)^-1/2 int xi(t) exp(-i w t) dt`.
///
/// The input is zero-padded to four times `span` (at least its own length)
/// and the result is returned on the padded grid.
pub fn spectral_output(model: &LinearModel, input: &SampledPulse, span: f64) -> Result<SampledPulse> {
    let dt = input.grid.dt;
    let len = ((4.0 * span / dt).ceil() as usize).max(4 * input.grid.n_points);
    let mut buf: Vec<C64> = input.values.clone();
    buf.resize(len, C64::new(0.0, 0.0));

    let mut planner = FftPlanner::new();
    let forward: Arc<dyn rustfft::Fft<f64>> = planner.plan_fft_forward(len);
    let inverse = planner.plan_fft_inverse(len);
    forward.process(&mut buf);
    for (k, z) in buf.iter_mut().enumerate() {
        let signed = if k <= len / 2 { k as f64 } else { k as f64 - len as f64 };
        let omega = 2.0 * PI * signed / (len as f64 * dt);
        *z *= transfer_at(model, C64::new(0.0, omega))?;
    }
    inverse.process(&mut buf);
    let scale = 1.0 / len as f64;
    let values = buf.into_iter().map(|z| z * scale).collect();
    SampledPulse::new(TimeGrid::new(input.grid.t_start, dt, len)?, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_linear_model, NetworkParams};
    use crate::pulses::{sample, PulseSpec};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn params(d1: f64, d2: f64, dr: f64, g1: f64, g2: f64, kappa: f64, mu: f64) -> NetworkParams {
        NetworkParams {
            delta_omega_1: d1,
            delta_omega_2: d2,
            delta_omega_r: dr,
            coupling_1: g1,
            coupling_2: g2,
            kappa,
            mu,
        }
    }

    fn random_params(rng: &mut ChaCha8Rng) -> NetworkParams {
        params(
            rng.random_range(-3e-3..3e-3),
            rng.random_range(-3e-3..3e-3),
            rng.random_range(-3e-3..3e-3),
            rng.random_range(0.0..3e-3),
            rng.random_range(0.0..3e-3),
            rng.random_range(1e-4..5e-3),
            rng.random_range(0.0..0.9),
        )
    }

    fn taylor(a: &Matrix3<C64>, t: f64) -> Matrix3<C64> {
        let at = a * C64::new(t, 0.0);
        let mut term = Matrix3::identity();
        let mut sum = Matrix3::identity();
        for k in 1..40 {
            term = term * at / C64::new(k as f64, 0.0);
            sum += term;
        }
        sum
    }

    fn fig2(d1: f64, d2: f64, mu: f64) -> LinearModel {
        build_linear_model(&params(d1, d2, 0.0, 1e-3, 1e-3, 1e-3, mu), true).unwrap()
    }

    fn rising(gamma: f64) -> SampledPulse {
        let spec = PulseSpec::RisingExponential { gamma, omega_p: 0.0 };
        let grid = TimeGrid::covering(-20.0 / gamma, 0.0, 1.0 / (50.0 * 3e-3)).unwrap();
        sample(&spec, grid).unwrap()
    }

    #[test]
    fn exponential_basics() {
        let a = fig2(1e-3, -2e-3, 0.0).a;
        let id = matrix_exponential(&a, 0.0);
        assert!(linalg::max_abs(&(id - Matrix3::identity())) < 1e-15);
        let d = Matrix3::from_diagonal(&Vector3::new(C64::new(-1.0, 2.0), C64::new(0.0, -0.5), C64::new(0.3, 0.0)));
        let e = matrix_exponential(&d, 1.3);
        for k in 0..3 {
            assert!((e[(k, k)] - (d[(k, k)] * 1.3).exp()).norm() < 1e-14);
        }
    }

    #[test]
    fn exponential_matches_series() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let a = Matrix3::from_fn(|_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
            let t = rng.random_range(0.0..1.0) / (3.0 * linalg::max_abs(&a));
            let dev = linalg::max_abs(&(matrix_exponential(&a, t) - taylor(&a, t)));
            assert!(dev < 1e-12, "{dev:e}");
        }
    }

    #[test]
    fn empty_cavity_transfer() {
        let kt = 2e-3;
        let m = build_linear_model(&params(0.0, 0.0, 0.0, 0.0, 0.0, kt, 0.0), true).unwrap();
        let g0 = transfer_at(&m, C64::new(0.0, 0.0)).unwrap();
        assert!((g0 + 1.0).norm() < 1e-14);
        let grid: Vec<f64> = (0..200).map(|k| -1e-2 + 1e-4 * k as f64 + 3e-5).collect();
        let fr = frequency_response(&m, &grid).unwrap();
        for (w, g) in grid.iter().zip(&fr.values) {
            let s = C64::new(0.0, *w);
            let oracle = (2.0 * s - kt) / (2.0 * s + kt);
            assert!((g - oracle).norm() < 1e-13);
            // phase pi - 2 atan(2w/kt)
            let phase = C64::from_polar(1.0, PI - 2.0 * (2.0 * w / kt).atan());
            assert!((g - phase).norm() < 1e-12);
        }
    }

    #[test]
    fn transfer_at_qubit_frequency() {
        let m = fig2(1e-3, -1e-3, 0.2);
        let g = transfer_at(&m, C64::new(0.0, 1e-3)).unwrap();
        assert!((g - 1.0).norm() < 1e-12);
        let far = transfer_at(&m, C64::new(0.0, 1e6)).unwrap();
        assert!((far - 1.0).norm() < 1e-8);
    }

    #[test]
    fn poles() {
        // dark mode: cancelled, G stays on the unit circle
        let m = fig2(1e-3, 1e-3, 0.0);
        let at = transfer_at(&m, C64::new(0.0, 1e-3)).unwrap();
        let near = transfer_at(&m, C64::new(0.0, 1e-3 + 1e-9)).unwrap();
        assert!((at - near).norm() < 1e-5);
        assert!((transfer_resolvent(&m, C64::new(0.0, 1e-3)).unwrap() - at).norm() < 1e-10);
        // a genuine pole of the port
        let ev = crate::stability::eigenvalues(&fig2(0.0, 0.0, 0.0));
        let m = fig2(0.0, 0.0, 0.0);
        let pole = ev.into_iter().find(|z| z.re < -1e-6).unwrap();
        assert!(matches!(transfer_at(&m, pole), Err(Error::PoleProximity { .. })));
        assert!(matches!(transfer_resolvent(&m, pole), Err(Error::PoleProximity { .. })));
    }

    #[test]
    fn allpass_and_paths_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let p = random_params(&mut rng);
            let m = build_linear_model(&p, true).unwrap();
            let grid: Vec<f64> = (0..1000).map(|k| -1e-2 + 2e-2 * (k as f64 + 0.5) / 1000.0).collect();
            let fr = frequency_response(&m, &grid).unwrap();
            assert!(fr.allpass_max_deviation() < 1e-10);
            for (w, g) in grid.iter().zip(&fr.values) {
                let r = transfer_resolvent(&m, C64::new(0.0, *w)).unwrap();
                assert!((g - r).norm() < 1e-10 * r.norm());
            }
        }
    }

    #[test]
    fn impulse_response_paths() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let p = random_params(&mut rng);
            let m = build_linear_model(&p, true).unwrap();
            let h = impulse_response(&m);
            assert_eq!(h.dirac_weight, C64::new(1.0, 0.0));
            assert!((h.smooth(0.0) + p.kappa_tilde()).norm() < 1e-15);
            assert_eq!(h.smooth(-1.0), C64::new(0.0, 0.0));
            for k in 0..50 {
                let t = 100.0 * k as f64;
                let direct = (m.c * taylor_steps(&m.a, t) * m.b)[0];
                assert!((h.smooth(t) - direct).norm() < 1e-12 * p.kappa_tilde().max(1.0));
            }
        }
    }

    /// `exp(A t)` as a product of short-step series.
    fn taylor_steps(a: &Matrix3<C64>, t: f64) -> Matrix3<C64> {
        let n = 1 + (t * linalg::max_abs(a) * 4.0).ceil() as usize;
        let step = taylor(a, t / n as f64);
        (0..n).fold(Matrix3::identity(), |acc, _| acc * step)
    }

    #[test]
    fn resonance_impulse_closed_form_matches() {
        for (kappa, mu, g1, g2) in [(1e-3, 0.0, 1e-3, 1e-3), (1e-3, 0.6, 1e-3, 1e-3), (1e-2, 0.0, 1e-3, 5e-4), (4e-3, 0.0, 1e-3, 0.0)] {
            let p = params(0.0, 0.0, 0.0, g1, g2, kappa, mu);
            let m = build_linear_model(&p, true).unwrap();
            let h = impulse_response(&m);
            let kt = p.kappa_tilde();
            for k in 0..100 {
                let t = 50.0 * k as f64;
                let closed = resonance_impulse_closed_form(kt, p.total_coupling_sqr(), t);
                assert!(closed.im.abs() < 1e-18);
                assert!(h.smooth(t).im.abs() < 1e-14 * kt);
                assert!((h.smooth(t) - closed).norm() < 1e-12 * kt, "t {t}");
            }
            assert!((resonance_impulse_closed_form(kt, p.total_coupling_sqr(), 0.0) + kt).norm() < 1e-18);
        }
    }

    #[test]
    fn fig2_symmetries() {
        let xi = rising(1e-3);
        let opts = OutputOptions::default();
        let resonance = output_pulse(&fig2(0.0, 0.0, 0.0), &xi, opts).unwrap();
        let red = output_pulse(&fig2(1e-3, 1e-3, 0.0), &xi, opts).unwrap();
        let blue = output_pulse(&fig2(-1e-3, -1e-3, 0.0), &xi, opts).unwrap();
        let red_blue = output_pulse(&fig2(1e-3, -1e-3, 0.0), &xi, opts).unwrap();
        assert!(resonance.output.values.iter().all(|z| z.im.abs() < 1e-10));
        assert!(red_blue.output.values.iter().all(|z| z.im.abs() < 1e-10));
        let n = red.output.values.len().min(blue.output.values.len());
        for k in 0..n {
            let (r, b) = (red.output.values[k], blue.output.values[k]);
            assert!((r.re - b.re).abs() < 1e-10);
            assert!((r.im + b.im).abs() < 1e-10);
        }
    }

    #[test]
    fn norm_is_preserved() {
        for mu in [0.0, 0.6] {
            for (d1, d2) in [(0.0, 0.0), (1e-3, 1e-3), (-1e-3, -1e-3), (1e-3, -1e-3)] {
                let m = fig2(d1, d2, mu);
                let out = output_pulse(&m, &rising(1e-3), OutputOptions { extension_cap: 50.0, ..Default::default() }).unwrap();
                assert!((out.output_norm() - 1.0).abs() < 1e-3, "mu {mu} d {d1} {d2}: {}", out.output_norm());
            }
        }
    }

    #[test]
    fn feedback_lengthens_the_output() {
        let xi = rising(1e-3);
        let opts = OutputOptions { extension_cap: 50.0, ..Default::default() };
        let open = output_pulse(&fig2(0.0, 0.0, 0.0), &xi, opts).unwrap();
        let closed = output_pulse(&fig2(0.0, 0.0, 0.6), &xi, opts).unwrap();
        assert!(closed.decay_time(0.01) > open.decay_time(0.01));
    }

    #[test]
    fn extension_cap_is_enforced() {
        let xi = rising(1e-3);
        let opts = OutputOptions { extension_cap: 0.01, ..Default::default() };
        assert!(matches!(output_pulse(&fig2(0.0, 0.0, 0.6), &xi, opts), Err(Error::SupportTruncated { .. })));
    }

    #[test]
    fn spectral_and_time_domain_agree() {
        let spec = PulseSpec::Gaussian { omega: 2e-3, t_peak: 0.0 };
        let grid = spec.default_grid(3e-3).unwrap();
        let xi = sample(&spec, grid).unwrap();
        for m in [fig2(0.0, 0.0, 0.0), fig2(1e-3, -1e-3, 0.2), fig2(5e-4, 5e-4, 0.0)] {
            let time = output_pulse(&m, &xi, OutputOptions { extension_cap: 50.0, ..Default::default() }).unwrap();
            let span = time.output.grid.t_end() - grid.t_start;
            let freq = spectral_output(&m, &xi, span).unwrap();
            let peak = time.output.values.iter().map(|z| z.norm()).fold(0.0, f64::max);
            let dev = time
                .output
                .values
                .iter()
                .zip(&freq.values)
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max);
            assert!(dev < 1e-4 * peak.max(1.0), "{dev:e}");
        }
    }

    #[test]
    fn dark_mode_guard_passes_for_marginal_models() {
        assert!(check_dark_mode(&fig2(5e-4, 5e-4, 0.0)).is_ok());
    }

    proptest! {
        #[test]
        fn allpass_everywhere(d1 in -3e-3f64..3e-3, d2 in -3e-3f64..3e-3, dr in -3e-3f64..3e-3,
                              g1 in 0.0f64..3e-3, g2 in 0.0f64..3e-3, kappa in 1e-4f64..5e-3,
                              w in -1e-2f64..1e-2) {
            let m = build_linear_model(&params(d1, d2, dr, g1, g2, kappa, 0.3), true).unwrap();
            if let Ok(g) = transfer_at(&m, C64::new(0.0, w)) {
                prop_assert!((g.norm() - 1.0).abs() < 1e-10);
            }
        }
    }
}
