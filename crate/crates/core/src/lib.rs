//! Simulation core for a coherent feedback network built from two double
//! quantum dot (DQD) charge qubits that share a lossy microwave cavity, with
//! the feedback loop closed through a beamsplitter.
//!
//! The crate is organised by the kind of question being asked of the network:
//!
//! - [`model`]: parameters, the beamsplitter feedback reduction and the
//!   linear input-output state-space model.
//! - [`stability`]: characteristic polynomial, generalized Hurwitz matrix,
//!   Routh-like table and the sign-pair classification, with an eigenvalue
//!   oracle alongside.
//! - [`pulses`]: single-photon envelopes (rising exponential, Gaussian,
//!   inverting pulse, superpositions) and their sampled form.
//! - [`linear_response`]: transfer function, impulse response and the output
//!   single-photon pulse for a single-photon input.
//! - [`fock_master`]: the single-photon master-equation hierarchy on the full
//!   qubit-qubit-cavity Hilbert space.
//! - [`single_excitation`]: amplitude equations of the one-excitation sector,
//!   their closed forms and steady states, and pulse-driven inversion.
//!
//! All frequencies and rates are dimensionless, in units of the qubit
//! transition frequency; times are in units of its inverse.

// `!(x > 0.0)` is the NaN-rejecting form used by every validator
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod fock_master;
pub mod linalg;
pub mod linear_response;
pub mod model;
pub mod pulses;
pub mod single_excitation;
pub mod stability;

pub use error::{Error, Result};
pub use model::{LinearModel, NetworkParams};

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex64;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
