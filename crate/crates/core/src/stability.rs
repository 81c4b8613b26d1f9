//! Stability of the closed-loop state matrix.
//!
//! The state matrix has complex entries, so the classical Routh-Hurwitz test
//! does not apply. Instead the characteristic polynomial is written with
//! complex coefficients, its 6x6 generalized Hurwitz matrix is formed, and the
//! Sign Pair Criterion is read off the Routh-like table built from its leading
//! principal minors. A dense eigensolver provides the independent verdict.
//!
//! The cubic here is the characteristic polynomial of `2 A`: with `z = 2 lambda`,
//! `8 det(lambda I - A) = z^3 + (p1 + i q1) z^2 + (p2 + i q2) z + (p3 + i q3)`.
//! Doubling the variable keeps every coefficient free of fractions and does not
//! move roots across the imaginary axis.

use nalgebra::{DMatrix, Matrix6};
use serde::Serialize;

use crate::error::Result;
use crate::linalg;
use crate::model::{build_linear_model, LinearModel, NetworkParams};
use crate::C64;

/// Two frequencies closer than this are treated as equal.
pub const TOL_FREQ: f64 = 1e-9;
/// Eigenvalue real parts within this of zero count as marginal.
pub const TOL_EIG: f64 = 1e-9;
/// Relative threshold for the degeneracy of a Hurwitz minor.
const TOL_DET_REL: f64 = 1e-12;
/// Sign-pair products smaller than this (on the normalized cubic) carry no sign.
const TOL_SIGN: f64 = 1e-10;

/// Monic cubic `z^3 + (p1 + i q1) z^2 + (p2 + i q2) z + (p3 + i q3)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ComplexCubic {
    pub p1: f64,
    pub p2: f64,
    pub p3: f64,
    pub q1: f64,
    pub q2: f64,
    pub q3: f64,
}

impl ComplexCubic {
    /// Coefficient of `z^(3-k)`, `k = 1..=3`.
    pub fn coefficient(&self, k: usize) -> C64 {
        match k {
            1 => C64::new(self.p1, self.q1),
            2 => C64::new(self.p2, self.q2),
            3 => C64::new(self.p3, self.q3),
            _ => panic!("cubic coefficient index {k} out of range"),
        }
    }

    pub fn eval(&self, z: C64) -> C64 {
        ((z + self.coefficient(1)) * z + self.coefficient(2)) * z + self.coefficient(3)
    }

    /// Roots from the companion matrix.
    pub fn roots(&self) -> [C64; 3] {
        let zero = C64::new(0.0, 0.0);
        let one = C64::new(1.0, 0.0);
        #[rustfmt::skip]
        let companion = DMatrix::from_row_slice(3, 3, &[
            -self.coefficient(1), -self.coefficient(2), -self.coefficient(3),
            one, zero, zero,
            zero, one, zero,
        ]);
        let ev = linalg::eigenvalues(&companion);
        sorted([ev[0], ev[1], ev[2]])
    }

    /// Rescale `z = s w` so that every coefficient has magnitude at most one.
    /// Returns the cubic in `w` and `s`.
    pub fn normalized(&self) -> (ComplexCubic, f64) {
        let s = [
            self.coefficient(1).norm(),
            self.coefficient(2).norm().sqrt(),
            self.coefficient(3).norm().cbrt(),
        ]
        .into_iter()
        .fold(0.0, f64::max);
        if s == 0.0 {
            return (*self, 1.0);
        }
        let (s2, s3) = (s * s, s * s * s);
        let scaled = ComplexCubic {
            p1: self.p1 / s,
            q1: self.q1 / s,
            p2: self.p2 / s2,
            q2: self.q2 / s2,
            p3: self.p3 / s3,
            q3: self.q3 / s3,
        };
        (scaled, s)
    }
}

/// Coefficients of the closed-loop characteristic cubic (in `z = 2 lambda`).
pub fn characteristic_polynomial(params: &NetworkParams) -> Result<ComplexCubic> {
    params.validate()?;
    let kt = params.kappa_tilde();
    let (d1, d2, dr) = (params.delta_omega_1, params.delta_omega_2, params.delta_omega_r);
    let (g1s, g2s) = (params.coupling_1.powi(2), params.coupling_2.powi(2));
    Ok(ComplexCubic {
        p1: kt,
        q1: 2.0 * (dr - d1 - d2),
        p2: 4.0 * g1s + 4.0 * g2s - 4.0 * d1 * d2 + 4.0 * d1 * dr + 4.0 * d2 * dr,
        q2: -2.0 * kt * (d1 + d2),
        p3: -4.0 * kt * d1 * d2,
        q3: -8.0 * (g1s * d2 + g2s * d1 + d1 * d2 * dr),
    })
}

/// The generalized Hurwitz matrix of the cubic.
pub fn generalized_hurwitz(c: &ComplexCubic) -> Matrix6<C64> {
    let re = |x: f64| C64::new(x, 0.0);
    let im = |x: f64| C64::new(0.0, x);
    let (o, one) = (re(0.0), re(1.0));
    #[rustfmt::skip]
    let m = Matrix6::from_row_slice(&[
        re(c.p1), im(c.q2), re(c.p3), o,        o,        o,
        one,      im(c.q1), re(c.p2), im(c.q3), o,        o,
        o,        re(c.p1), im(c.q2), re(c.p3), o,        o,
        o,        one,      im(c.q1), re(c.p2), im(c.q3), o,
        o,        o,        re(c.p1), im(c.q2), re(c.p3), o,
        o,        o,        one,      im(c.q1), re(c.p2), im(c.q3),
    ]);
    m
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RouthTable {
    /// `R_1 ..= R_6`; `None` where the defining minor ratio is degenerate.
    pub r: [Option<C64>; 6],
    /// Leading principal minors `Delta_1 ..= Delta_6`.
    pub delta: [C64; 6],
    /// First `j` whose denominator minor `Delta_{j-2}` vanished.
    pub degenerate_at: Option<usize>,
    tol_det: f64,
}

impl RouthTable {
    pub fn is_degenerate(&self) -> bool {
        self.degenerate_at.is_some()
    }

    /// The three sign-pair products `R1 R2`, `R3 R4`, `R5 R6`.
    ///
    /// Each product telescopes to a ratio of odd minors
    /// (`R3 R4 = Delta_3 / Delta_1`, `R5 R6 = Delta_5 / Delta_3`), which stays
    /// finite when an even minor vanishes and the individual ratios blow up.
    /// `None` when an odd minor in a denominator is itself degenerate.
    pub fn sign_pairs(&self) -> Option<[C64; 3]> {
        let first = self.r[0]? * self.r[1]?;
        if self.delta[0].norm() < self.tol_det || self.delta[2].norm() < self.tol_det {
            return None;
        }
        Some([first, self.delta[2] / self.delta[0], self.delta[4] / self.delta[2]])
    }
}

/// Routh-like table of a generalized Hurwitz matrix.
pub fn routh_like_table(m: &Matrix6<C64>) -> RouthTable {
    let scale = linalg::max_abs(m);
    let tol_det = TOL_DET_REL * scale.powi(6);
    let mut delta = [C64::new(0.0, 0.0); 6];
    for (j, d) in delta.iter_mut().enumerate() {
        *d = m.view((0, 0), (j + 1, j + 1)).clone_owned().determinant();
    }
    let mut r = [None; 6];
    r[0] = Some(C64::new(1.0, 0.0));
    r[1] = Some(m[(0, 0)]);
    let mut degenerate_at = None;
    for j in 3..=6 {
        let den = delta[j - 3];
        if den.norm() < tol_det {
            degenerate_at.get_or_insert(j);
        } else {
            r[j - 1] = Some(delta[j - 2] / den);
        }
    }
    RouthTable {
        r,
        delta,
        degenerate_at,
        tol_det,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum StabilityKind {
    Hurwitz,
    Marginal,
    Unstable,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityVerdict {
    pub kind: StabilityKind,
    /// Eigenvalues of the closed-loop state matrix, from the dense solver.
    pub witness: [C64; 3],
    pub routh: RouthTable,
}

/// Sign Pair Criterion on the closed-loop cubic.
///
/// Hurwitz iff `R1 R2 > 0`, `R3 R4 < 0` and `R5 R6 > 0`; anything else is
/// reported as marginal, since no eigenvalue of this model family can have a
/// positive real part.
pub fn spc_classify(params: &NetworkParams) -> Result<StabilityVerdict> {
    let cubic = characteristic_polynomial(params)?;
    let (normalized, _) = cubic.normalized();
    let routh = routh_like_table(&generalized_hurwitz(&normalized));
    let kind = match routh.sign_pairs() {
        Some([a, b, c]) => {
            let signed = |z: C64| if z.im.abs() > 1e-6 * z.norm().max(TOL_SIGN) { 0.0 } else { z.re };
            if signed(a) > TOL_SIGN && signed(b) < -TOL_SIGN && signed(c) > TOL_SIGN {
                StabilityKind::Hurwitz
            } else {
                StabilityKind::Marginal
            }
        }
        None => {
            log::warn!(
                "odd Hurwitz minor vanished (degenerate at R_{:?}); classifying as marginal",
                routh.degenerate_at
            );
            StabilityKind::Marginal
        }
    };
    let witness = eigenvalues(&build_linear_model(params, true)?);
    Ok(StabilityVerdict { kind, witness, routh })
}

/// Eigenvalues of the state matrix, sorted by real part then imaginary part.
pub fn eigenvalues(model: &LinearModel) -> [C64; 3] {
    let a = DMatrix::from_iterator(3, 3, model.a.iter().copied());
    let ev = linalg::eigenvalues(&a);
    sorted([ev[0], ev[1], ev[2]])
}

/// Verdict from eigenvalue real parts alone.
pub fn classify_eigenvalues(eigs: &[C64], tol: f64) -> StabilityKind {
    let max_re = eigs.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
    if max_re < -tol {
        StabilityKind::Hurwitz
    } else if max_re <= tol {
        StabilityKind::Marginal
    } else {
        StabilityKind::Unstable
    }
}

/// Closed-form closed-loop eigenvalues for equal qubit detunings
/// `delta_omega_1 = delta_omega_2 = delta_s`:
/// the dark mode `i delta_s` and the pair
/// `(-kt - 2i(dr - ds) -+ sqrt((kt + 2i(dr + ds))^2 - 16 g^2)) / 4`.
pub fn marginal_eigenvalues(params: &NetworkParams) -> Result<[C64; 3]> {
    params.validate()?;
    let diff = (params.delta_omega_1 - params.delta_omega_2).abs();
    if diff >= TOL_FREQ {
        return Err(crate::Error::DetuningMismatch { difference: diff });
    }
    let i = C64::i();
    let ds = params.delta_omega_1;
    let dr = params.delta_omega_r;
    let kt = params.kappa_tilde();
    let root = ((kt + 2.0 * i * (dr + ds)).powi(2) - 16.0 * params.total_coupling_sqr()).sqrt();
    let centre = -kt - 2.0 * i * (dr - ds);
    Ok([i * ds, (centre - root) / 4.0, (centre + root) / 4.0])
}

fn sorted(mut z: [C64; 3]) -> [C64; 3] {
    z.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    z
}
