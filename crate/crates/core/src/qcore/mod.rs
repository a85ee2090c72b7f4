//! Minimal state-vector simulator.
//!
//! Qubit `k` of an `m`-qubit register is bit `m - 1 - k` of the basis index, so
//! qubit 0 is the leftmost label in a ket such as `|q0 q1 q2 q3⟩`. Everything in
//! this crate indexes qubits from 0; the 1-based labels 1..4 used for cluster
//! particles map to indices 0..3.

mod gate;
mod rng;
mod state;

pub use gate::{Basis, Gate};
pub use rng::RandomSource;
pub use state::StateVector;

pub use num_complex::Complex64 as Amplitude;

/// Absolute tolerance for every exact-math comparison.
pub const TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum QError {
    #[error("qubit index {qubit} out of range for a {count}-qubit state")]
    QubitOutOfRange { qubit: usize, count: usize },
    #[error("dimension mismatch: {left} vs {right} qubits")]
    DimensionMismatch { left: usize, right: usize },
    #[error("amplitude vector of length {0} is not a power of two >= 2")]
    BadLength(usize),
    #[error("state is not normalized (squared norm {0})")]
    NotNormalized(f64),
    #[error("amplitude is not finite")]
    NonFinite,
}

pub(crate) fn approx_eq(a: Amplitude, b: Amplitude) -> bool {
    (a - b).norm() <= TOLERANCE
}
