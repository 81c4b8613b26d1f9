//! Network parameters, the beamsplitter feedback reduction, and the linear
//! input-output model of the network.
//!
//! The qubit lowering operators and the cavity annihilation operator, averaged
//! against the ground state with vacuum input, obey a linear state-space model
//!
//! ```text
//!   x' = A x + B b_in,      b_out = C x + b_in,
//! ```
//!
//! with `x = (sigma_-1, sigma_-2, a)`. Closing the loop through a beamsplitter
//! of reflectivity `mu` only rescales the cavity decay rate to
//! `kappa_tilde = (1 - mu) / (1 + mu) * kappa`.

use nalgebra::{Matrix3, RowVector3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::C64;

/// Physical parameters of the network, all in units of the qubit transition
/// frequency.
///
/// `coupling_k` is the effective qubit-cavity coupling (the bare coupling
/// times the mixing-angle sine); it is never split into its factors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, try_from = "RawParams")]
pub struct NetworkParams {
    pub delta_omega_1: f64,
    pub delta_omega_2: f64,
    pub delta_omega_r: f64,
    #[serde(rename = "gamma_1")]
    pub coupling_1: f64,
    #[serde(rename = "gamma_2")]
    pub coupling_2: f64,
    pub kappa: f64,
    pub mu: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawParams {
    delta_omega_1: f64,
    delta_omega_2: f64,
    delta_omega_r: f64,
    gamma_1: f64,
    gamma_2: f64,
    kappa: f64,
    mu: f64,
}

impl TryFrom<RawParams> for NetworkParams {
    type Error = Error;

    fn try_from(raw: RawParams) -> Result<Self> {
        let params = NetworkParams {
            delta_omega_1: raw.delta_omega_1,
            delta_omega_2: raw.delta_omega_2,
            delta_omega_r: raw.delta_omega_r,
            coupling_1: raw.gamma_1,
            coupling_2: raw.gamma_2,
            kappa: raw.kappa,
            mu: raw.mu,
        };
        params.validate()?;
        Ok(params)
    }
}

impl NetworkParams {
    /// All three transitions tuned to the carrier.
    pub fn mutual_resonance(coupling_1: f64, coupling_2: f64, kappa: f64, mu: f64) -> Result<Self> {
        let params = NetworkParams {
            delta_omega_1: 0.0,
            delta_omega_2: 0.0,
            delta_omega_r: 0.0,
            coupling_1,
            coupling_2,
            kappa,
            mu,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn with_detunings(mut self, delta_omega_1: f64, delta_omega_2: f64, delta_omega_r: f64) -> Self {
        self.delta_omega_1 = delta_omega_1;
        self.delta_omega_2 = delta_omega_2;
        self.delta_omega_r = delta_omega_r;
        self
    }

    /// Every violated constraint, in field order.
    pub fn violations(&self) -> Vec<Error> {
        let mut out = Vec::new();
        for (name, value) in [
            ("delta_omega_1", self.delta_omega_1),
            ("delta_omega_2", self.delta_omega_2),
            ("delta_omega_r", self.delta_omega_r),
            ("gamma_1", self.coupling_1),
            ("gamma_2", self.coupling_2),
            ("kappa", self.kappa),
            ("mu", self.mu),
        ] {
            if !value.is_finite() {
                out.push(invalid(name, "must be finite"));
            }
        }
        if !(self.coupling_1 >= 0.0) {
            out.push(invalid("gamma_1", "must be >= 0"));
        }
        if !(self.coupling_2 >= 0.0) {
            out.push(invalid("gamma_2", "must be >= 0"));
        }
        if !(self.kappa > 0.0) {
            out.push(invalid("kappa", "must be > 0"));
        }
        if !(0.0..1.0).contains(&self.mu) {
            out.push(invalid("mu", "mu must be in [0,1)"));
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        match self.violations().into_iter().next() {
            Some(err) => Err(err),
            None => Ok(()),
        }
    }

    /// Cavity decay rate seen by the closed loop.
    pub fn kappa_tilde(&self) -> f64 {
        // validated params cannot fail here
        effective_kappa(self.kappa, self.mu).unwrap_or(f64::NAN)
    }

    /// `Gamma_1^2 + Gamma_2^2`, the squared coupling of the bright qubit mode.
    pub fn total_coupling_sqr(&self) -> f64 {
        self.coupling_1 * self.coupling_1 + self.coupling_2 * self.coupling_2
    }

    pub fn is_mutual_resonance(&self) -> bool {
        self.delta_omega_1 == 0.0 && self.delta_omega_2 == 0.0 && self.delta_omega_r == 0.0
    }

    /// Largest rate present in the model (closed loop), used to size time steps.
    pub fn fastest_rate(&self) -> f64 {
        [
            self.kappa_tilde(),
            self.coupling_1,
            self.coupling_2,
            self.delta_omega_1.abs(),
            self.delta_omega_2.abs(),
            self.delta_omega_r.abs(),
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

/// `(1 - mu) / (1 + mu) * kappa`, the decay rate after closing the loop.
pub fn effective_kappa(kappa: f64, mu: f64) -> Result<f64> {
    if !(kappa > 0.0) || !kappa.is_finite() {
        return Err(invalid("kappa", "must be > 0"));
    }
    if !(0.0..1.0).contains(&mu) {
        return Err(invalid("mu", "mu must be in [0,1)"));
    }
    Ok((1.0 - mu) / (1.0 + mu) * kappa)
}

/// The closed-loop network as an SLH triple. The scattering is the scalar 1,
/// the coupling operator is `sqrt(coupling_rate) * a`, and the Hamiltonian is
/// that of the open network, fully described by `hamiltonian_params`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlhTriple {
    pub scattering: f64,
    pub coupling_rate: f64,
    pub hamiltonian_params: NetworkParams,
}

/// Beamsplitter feedback reduction: only the coupling operator changes.
pub fn slh_reduce(params: &NetworkParams) -> Result<SlhTriple> {
    params.validate()?;
    Ok(SlhTriple {
        scattering: 1.0,
        coupling_rate: effective_kappa(params.kappa, params.mu)?,
        hamiltonian_params: *params,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub a: Matrix3<C64>,
    pub b: Vector3<C64>,
    pub c: RowVector3<C64>,
    pub d: C64,
    /// Decay rate that entered `a`, `b` and `c` (`kappa_tilde` for the closed
    /// loop, `kappa` for the open one).
    pub decay_rate: f64,
    pub params: NetworkParams,
}

/// State-space model of the closed loop (`closed_loop = true`) or of the bare
/// qubit-cavity system (`closed_loop = false`).
pub fn build_linear_model(params: &NetworkParams, closed_loop: bool) -> Result<LinearModel> {
    params.validate()?;
    let rate = if closed_loop {
        effective_kappa(params.kappa, params.mu)?
    } else {
        params.kappa
    };
    Ok(linear_model_with_rate(params, rate))
}

pub(crate) fn linear_model_with_rate(params: &NetworkParams, rate: f64) -> LinearModel {
    let i = C64::i();
    let zero = C64::new(0.0, 0.0);
    let g1 = -i * params.coupling_1;
    let g2 = -i * params.coupling_2;
    #[rustfmt::skip]
    let a = Matrix3::new(
        i * params.delta_omega_1, zero, g1,
        zero, i * params.delta_omega_2, g2,
        g1, g2, -i * params.delta_omega_r - rate / 2.0,
    );
    let b = Vector3::new(zero, zero, C64::new(-rate.sqrt(), 0.0));
    let c = -b.transpose();
    LinearModel {
        a,
        b,
        c,
        d: C64::new(1.0, 0.0),
        decay_rate: rate,
        params: *params,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::hermitian_eigenvalues;
    use nalgebra::DMatrix;
    use proptest::prelude::*;

    fn fig2() -> NetworkParams {
        NetworkParams::mutual_resonance(1e-3, 1e-3, 1e-3, 0.0).unwrap()
    }

    #[test]
    fn effective_kappa_values() {
        assert_eq!(effective_kappa(1e-3, 0.0).unwrap(), 1e-3);
        assert!((effective_kappa(1e-3, 0.6).unwrap() - 2.5e-4).abs() < 1e-18);
        assert!((effective_kappa(7.5e-3, 0.2).unwrap() - 5e-3).abs() < 1e-17);
    }

    #[test]
    fn effective_kappa_domain() {
        assert!(effective_kappa(1e-3, 1.0).is_err());
        assert!(effective_kappa(1e-3, -0.1).is_err());
        assert!(effective_kappa(0.0, 0.2).is_err());
        assert!(effective_kappa(-1.0, 0.2).is_err());
    }

    #[test]
    fn slh_reduction() {
        let open = slh_reduce(&fig2()).unwrap();
        assert_eq!(open.coupling_rate, 1e-3);
        assert_eq!(open.scattering, 1.0);

        let p = NetworkParams::mutual_resonance(1e-3, 1e-3, 1.5e-3, 0.2).unwrap();
        let closed = slh_reduce(&p).unwrap();
        assert!((closed.coupling_rate - 1e-3).abs() < 1e-18);
        assert_eq!(closed.hamiltonian_params, p);

        let mut last = f64::INFINITY;
        for k in 0..1000 {
            let mu = k as f64 / 1000.0;
            let rate = effective_kappa(1.0, mu).unwrap();
            assert!(rate < last);
            last = rate;
        }
        assert!(effective_kappa(1.0, 1.0 - 1e-12).unwrap() < 1e-11);
    }

    #[test]
    fn decoupled_empty_cavity() {
        let p = NetworkParams::mutual_resonance(0.0, 0.0, 1e-3, 0.0).unwrap();
        let m = build_linear_model(&p, true).unwrap();
        let expected = Matrix3::from_diagonal(&Vector3::new(
            C64::new(0.0, 0.0),
            C64::new(0.0, 0.0),
            C64::new(-5e-4, 0.0),
        ));
        assert_eq!(m.a, expected);
    }

    #[test]
    fn fig2_cavity_entry() {
        let m = build_linear_model(&fig2(), true).unwrap();
        assert_eq!(m.a[(2, 2)], C64::new(-5e-4, 0.0));
        assert_eq!(m.d, C64::new(1.0, 0.0));
    }

    #[test]
    fn open_loop_ignores_mu() {
        let p = NetworkParams::mutual_resonance(1e-3, 2e-3, 1e-3, 0.6).unwrap();
        let open = build_linear_model(&p, false).unwrap();
        assert_eq!(open.decay_rate, 1e-3);
        let closed = build_linear_model(&p, true).unwrap();
        assert!((closed.decay_rate - 2.5e-4).abs() < 1e-18);
    }

    #[test]
    fn json_keys() {
        let json = r#"{"delta_omega_1":1e-3,"delta_omega_2":-1e-3,"delta_omega_r":0,
                       "gamma_1":1e-3,"gamma_2":1e-3,"kappa":1e-3,"mu":0}"#;
        let p: NetworkParams = serde_json::from_str(json).unwrap();
        assert_eq!(p.delta_omega_2, -1e-3);
        assert_eq!(p.coupling_1, 1e-3);

        let missing = r#"{"delta_omega_1":0,"delta_omega_2":0,"delta_omega_r":0,
                          "gamma_1":1e-3,"gamma_2":1e-3,"mu":0}"#;
        let err = serde_json::from_str::<NetworkParams>(missing).unwrap_err();
        assert!(err.to_string().contains("kappa"), "{err}");

        let bad_mu = r#"{"delta_omega_1":0,"delta_omega_2":0,"delta_omega_r":0,
                         "gamma_1":1e-3,"gamma_2":1e-3,"kappa":1e-3,"mu":1.0}"#;
        let err = serde_json::from_str::<NetworkParams>(bad_mu).unwrap_err();
        assert!(err.to_string().contains("mu must be in [0,1)"), "{err}");

        let round = serde_json::to_string(&p).unwrap();
        assert!(round.contains("\"gamma_1\""));
        assert_eq!(serde_json::from_str::<NetworkParams>(&round).unwrap(), p);
    }

    fn arb_params() -> impl Strategy<Value = NetworkParams> {
        (
            -5e-3..5e-3f64,
            -5e-3..5e-3f64,
            -5e-3..5e-3f64,
            0.0..5e-3f64,
            0.0..5e-3f64,
            1e-4..1e-2f64,
            0.0..0.95f64,
        )
            .prop_map(|(d1, d2, dr, g1, g2, kappa, mu)| NetworkParams {
                delta_omega_1: d1,
                delta_omega_2: d2,
                delta_omega_r: dr,
                coupling_1: g1,
                coupling_2: g2,
                kappa,
                mu,
            })
    }

    proptest! {
        #[test]
        fn closed_loop_is_open_loop_with_rescaled_kappa(p in arb_params()) {
            let closed = build_linear_model(&p, true).unwrap();
            let mut rescaled = p;
            rescaled.kappa = effective_kappa(p.kappa, p.mu).unwrap();
            let open = build_linear_model(&rescaled, false).unwrap();
            prop_assert_eq!(closed.a, open.a);
            prop_assert_eq!(closed.b, open.b);
            prop_assert_eq!(closed.c, open.c);
        }

        #[test]
        fn structure_holds(p in arb_params()) {
            let m = build_linear_model(&p, true).unwrap();
            prop_assert_eq!(m.c, -m.b.transpose());
            prop_assert_eq!(m.b[0], C64::new(0.0, 0.0));
            prop_assert_eq!(m.b[1], C64::new(0.0, 0.0));
            prop_assert_eq!(m.a[(0, 1)], C64::new(0.0, 0.0));
            prop_assert_eq!(m.a[(1, 0)], C64::new(0.0, 0.0));

            // A + A^dagger has spectrum {0, 0, -kappa_tilde}
            let sym = m.a + m.a.adjoint();
            let dm = DMatrix::from_iterator(3, 3, sym.iter().cloned());
            let mut eig = hermitian_eigenvalues(&dm);
            eig.sort_by(|x, y| x.partial_cmp(y).unwrap());
            let kt = p.kappa_tilde();
            prop_assert!((eig[0] + kt).abs() < 1e-12);
            prop_assert!(eig[1].abs() < 1e-12);
            prop_assert!(eig[2].abs() < 1e-12);
        }

        #[test]
        fn effective_kappa_decreasing(kappa in 1e-4..1.0f64, mu1 in 0.0..0.999f64, mu2 in 0.0..0.999f64) {
            prop_assume!(mu1 < mu2);
            prop_assert!(effective_kappa(kappa, mu1).unwrap() > effective_kappa(kappa, mu2).unwrap());
        }
    }
}
