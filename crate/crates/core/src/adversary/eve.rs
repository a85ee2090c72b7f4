use super::{Adversary, AdversaryError};
use crate::channel::{ChannelHook, Delivery, PartyId, PhotonSequence, QuantumMemory};
use crate::qcore::{Basis, RandomSource};

/// Outside eavesdropper measuring transiting photons in a random basis and
/// forwarding whatever the measurement left behind.
#[derive(Debug, Clone, Copy)]
pub struct InterceptResend {
    fraction: f64,
}

impl InterceptResend {
    pub fn new(fraction: f64) -> Result<Self, AdversaryError> {
        if (0.0..=1.0).contains(&fraction) {
            Ok(Self { fraction })
        } else {
            Err(AdversaryError::BadFraction(fraction))
        }
    }

    pub fn fraction(&self) -> f64 {
        self.fraction
    }
}

pub fn intercept_resend_eve(fraction: f64) -> Result<InterceptResend, AdversaryError> {
    InterceptResend::new(fraction)
}

impl ChannelHook for InterceptResend {
    fn intercept(
        &mut self,
        _from: PartyId,
        to: PartyId,
        seq: PhotonSequence,
        memory: &mut QuantumMemory,
        rng: &mut RandomSource,
    ) -> Delivery {
        for q in seq.qubits() {
            if rng.bernoulli(self.fraction) {
                let basis = if rng.bit() { Basis::X } else { Basis::Z };
                memory
                    .measure(q, basis, rng)
                    .expect("photon refs always point at live qubits");
            }
        }
        Delivery { to, seq }
    }
}

impl Adversary for InterceptResend {
    fn label(&self) -> &'static str {
        "intercept-resend"
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::{probe_hop, PhotonState};
    use crate::qcore::StateVector;

    #[test]
    fn fraction_is_validated() {
        assert!(InterceptResend::new(1.5).is_err());
        assert!(InterceptResend::new(-0.1).is_err());
        assert!(InterceptResend::new(0.0).is_ok());
    }

    #[test]
    fn zero_fraction_is_invisible() {
        let mut rng = RandomSource::from_seed(1);
        let mut eve = InterceptResend::new(0.0).unwrap();
        for _ in 0..100 {
            assert_eq!(probe_hop(16, &mut eve, &mut rng).unwrap().mismatches, 0);
        }
    }

    // Exact enumeration: each of 4 states, each of 2 Eve bases; a wrong
    // basis leaves a conjugate eigenstate, which reads wrong half the time.
    #[test]
    fn enumerated_error_probability_is_a_quarter() {
        let mut p = 0.0;
        for st in PhotonState::ALL {
            for eve_basis in [Basis::Z, Basis::X] {
                let v = st.vector();
                let p_err = if eve_basis == st.basis {
                    0.0
                } else {
                    // Eve collapses to either conjugate eigenstate with ½;
                    // each reads wrong in the original basis with ½.
                    [false, true]
                        .iter()
                        .map(|&b| {
                            let collapsed = StateVector::eigenstate(eve_basis, b);
                            let p_collapse = v.fidelity_up_to_phase(&collapsed).unwrap();
                            let wrong = StateVector::eigenstate(st.basis, !st.bit);
                            p_collapse * collapsed.fidelity_up_to_phase(&wrong).unwrap()
                        })
                        .sum()
                };
                p += 0.25 * 0.5 * p_err;
            }
        }
        assert!((p - 0.25).abs() < 1e-12);
    }
}
