//! Attackers that plug into a protocol run.
//!
//! An [`Adversary`] sees what its parties would see. That covers quantum
//! traffic through the channel hook plus whatever its insiders know.
//! Scoring against ground truth happens afterwards in [`evaluate`], which
//! attack logic never calls.

mod collusion;
mod eve;

use serde::Serialize;

use crate::channel::{ChannelHook, PartyId, QuantumMemory, QubitRef, RegisterId};
use crate::cluster::{ClusterParams, TransitionTable};
use crate::keys::BitString;
use crate::povm::ClusterDiscriminator;
use crate::protocol::{PhotonState, ProtocolError, ProtocolKind, RunOutcome};
use crate::qcore::RandomSource;

pub use collusion::{collusion_attack_improved, collusion_attack_original, Collusion, CollusionPlan};
pub use eve::{intercept_resend_eve, InterceptResend};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AdversaryError {
    #[error("colluders {colluders:?} do not form the antipodal pattern for {parties} parties")]
    PatternMismatch {
        colluders: Vec<usize>,
        parties: usize,
    },
    #[error("collusion needs at least {min} parties, got {parties}")]
    TooFewParties { parties: usize, min: usize },
    #[error("target key has {got} bits, the run produces {expected}")]
    TargetLength { got: usize, expected: usize },
    #[error("fraction must lie in [0, 1], got {0}")]
    BadFraction(f64),
}

/// What the protocol tells an adversary at the start of a run.
#[derive(Debug, Clone)]
pub struct Briefing {
    pub kind: ProtocolKind,
    pub parties: usize,
    pub key_bits: usize,
    pub params: ClusterParams,
    /// Private keys of the controlled parties only.
    pub insider_keys: Vec<(PartyId, BitString)>,
    /// Prepared photon states of sequences owned by controlled parties
    /// (improved protocol).
    pub insider_preparations: Vec<(PartyId, Vec<PhotonState>)>,
}

/// Key material an adversary believes it learned from one mid-ring readout:
/// the XOR of the keys `encoders` had applied, per bit (`None` if unknown).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Extraction {
    pub owner: PartyId,
    pub encoders: Vec<PartyId>,
    pub bits: Vec<Option<bool>>,
}

#[allow(unused_variables)]
pub trait Adversary: ChannelHook {
    fn label(&self) -> &'static str;

    /// Parties whose protocol behaviour the adversary controls.
    fn insiders(&self) -> Vec<PartyId> {
        Vec::new()
    }

    fn enlist(&mut self, briefing: &Briefing) -> Result<(), AdversaryError> {
        Ok(())
    }

    /// After `holder` has checked and stripped `owner`'s sequence in `round`,
    /// the party to hand it to before encoding, if any.
    fn detour(&mut self, holder: PartyId, owner: PartyId, round: usize) -> Option<PartyId> {
        None
    }

    /// `owner` holds all four particles of its clusters (original protocol).
    #[allow(clippy::too_many_arguments)]
    fn inspect_clusters(
        &mut self,
        owner: PartyId,
        round: usize,
        registers: &[RegisterId],
        memory: &mut QuantumMemory,
        discriminator: &ClusterDiscriminator,
        table: &TransitionTable,
        rng: &mut RandomSource,
    ) -> Result<(), ProtocolError> {
        Ok(())
    }

    /// `owner` holds its own photons again (improved protocol).
    fn inspect_photons(
        &mut self,
        owner: PartyId,
        round: usize,
        photons: &[QubitRef],
        memory: &mut QuantumMemory,
        rng: &mut RandomSource,
    ) -> Result<(), ProtocolError> {
        Ok(())
    }

    /// Key bits `encoder` applies to `owner`'s sequence instead of its own key.
    fn substitute_key(&mut self, encoder: PartyId, owner: PartyId, round: usize) -> Option<BitString> {
        None
    }

    /// Positions an insider owner announces as inconclusive.
    fn invalid_positions(&self, owner: PartyId) -> Vec<usize> {
        Vec::new()
    }

    /// Final key an insider reports.
    fn final_key(&self, party: PartyId, discarded: &[usize]) -> Option<BitString> {
        None
    }

    fn extractions(&self) -> Vec<Extraction> {
        Vec::new()
    }

    fn target_key(&self) -> Option<&BitString> {
        None
    }
}

/// No adversary.
#[derive(Debug, Default, Clone, Copy)]
pub struct Passive;

impl ChannelHook for Passive {}

impl Adversary for Passive {
    fn label(&self) -> &'static str {
        "none"
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdversaryMetrics {
    pub label: &'static str,
    pub extracted_bits: usize,
    pub correct_bits: usize,
    pub extraction_accuracy: Option<f64>,
    /// Some decoy check saw a mismatch.
    pub detected: bool,
    /// Every honest party ended with the target key.
    pub manipulation_success: Option<bool>,
}

/// Scores an adversary against the run's ground truth.
pub fn evaluate(adversary: &dyn Adversary, outcome: &RunOutcome) -> AdversaryMetrics {
    let truth = &outcome.private_keys;
    let mut extracted = 0;
    let mut correct = 0;
    for ex in adversary.extractions() {
        for (j, guess) in ex.bits.iter().enumerate() {
            let Some(guess) = guess else { continue };
            let actual = ex.encoders.iter().fold(false, |acc, p| acc ^ truth[p.0].get(j));
            extracted += 1;
            correct += (*guess == actual) as usize;
        }
    }
    let insiders = adversary.insiders();
    let manipulation_success = adversary.target_key().map(|target| {
        let target = target.without_nibbles(&outcome.discarded_positions);
        outcome.abort.is_none()
            && outcome
                .final_keys
                .iter()
                .enumerate()
                .filter(|(i, _)| !insiders.contains(&PartyId(*i)))
                .all(|(_, k)| k.as_ref() == Some(&target))
    });
    AdversaryMetrics {
        label: adversary.label(),
        extracted_bits: extracted,
        correct_bits: correct,
        extraction_accuracy: (extracted > 0).then(|| correct as f64 / extracted as f64),
        detected: outcome.detections.iter().any(|d| d.detected()),
        manipulation_success,
    }
}
