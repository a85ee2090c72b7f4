//! Simulator for a ring-based multiparty quantum key agreement over cluster
//! states and the insider collusion attack against it. A single-photon
//! variant with a Hadamard shield defeats the attack.
//!
//! Layers, bottom up: [`qcore`] (state vectors, gates, measurement),
//! [`cluster`] (the sixteen cluster states and nibble encoding), [`povm`]
//! (family parity check plus unambiguous discrimination), [`channel`] (ring
//! transport and transcript), [`protocol`] (both protocol flows),
//! [`adversary`] (collusion and intercept-resend), and [`scenario`] (trial
//! runner and JSON reports).

pub mod adversary;
pub mod channel;
pub mod cluster;
pub mod keys;
pub mod povm;
pub mod protocol;
pub mod qcore;
pub mod scenario;
