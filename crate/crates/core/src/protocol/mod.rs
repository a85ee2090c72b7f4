//! Both key agreement flows, run as a single turn-based loop over the ring.
//!
//! Every party owns one circulating sequence. In round `r` the sequence of
//! owner `i` moves from `i + r − 1` to `i + r`; each move is one decoy-checked
//! hop. Rounds `1..N` end with the receiver encoding its key, round `N`
//! returns the sequence home. All owners advance one hop per round, so the
//! circulations interleave the way they would on a real ring.

mod decoy;
mod improved;
mod original;

use serde::Serialize;

use crate::adversary::{evaluate, Adversary, AdversaryMetrics, Passive};
use crate::channel::{
    ChannelError, ClassicalMessage, MessageKind, PartyId, PhotonSequence, QuantumMemory,
    Recipient, Ring, TranscriptEvent,
};
use crate::cluster::{ClusterError, ClusterParams};
use crate::keys::BitString;
use crate::povm::PovmError;
use crate::qcore::{QError, RandomSource, TOLERANCE};

pub use decoy::{
    check_decoys, insert_decoys, measure_decoys, strip_decoys, DecoyRecord, PhotonState,
};
pub use improved::{run_improved, run_improved_with};
pub use original::{run_original, run_original_with};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ProtocolKind {
    /// Cluster states, Pauli encoding on particles 2 and 4, POVM readout.
    Original,
    /// Single photons, `iσy` encoding with a random Hadamard shield.
    Improved,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("invalid {field}: {message}")]
pub struct ConfigError {
    pub field: &'static str,
    pub message: String,
}

impl ConfigError {
    pub fn new(field: &'static str, message: impl Into<String>) -> Self {
        Self {
            field,
            message: message.into(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ProtocolError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Quantum(#[from] QError),
    #[error(transparent)]
    Povm(#[from] PovmError),
    #[error(transparent)]
    Cluster(#[from] ClusterError),
    #[error("adversary setup failed: {0}")]
    Adversary(String),
    #[error("simulator invariant violated: {0}")]
    Invariant(String),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProtocolConfig {
    pub participants: usize,
    /// Cluster states per party in the original protocol; keys are `4·clusters` bits.
    pub clusters: usize,
    /// Single photons per party in the improved protocol; keys are `photons` bits.
    pub photons: usize,
    pub decoys_per_hop: usize,
    /// A hop aborts the run when its decoy error rate exceeds this.
    pub error_threshold: f64,
    pub params: ClusterParams,
    pub seed: u64,
    /// Encoders apply a random H after encoding (improved protocol).
    pub hadamard_shield: bool,
    /// Check photon states against the expected encoding before readout
    /// (improved protocol, no adversary).
    #[serde(skip)]
    pub audit_phases: bool,
    /// Fixed private keys instead of random ones.
    #[serde(skip)]
    pub private_keys: Option<Vec<BitString>>,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        Self {
            participants: 4,
            clusters: 8,
            photons: 32,
            decoys_per_hop: 16,
            error_threshold: 0.0,
            params: ClusterParams::uniform(),
            seed: 0,
            hadamard_shield: true,
            audit_phases: false,
            private_keys: None,
        }
    }
}

pub const MAX_PARTICIPANTS: usize = 64;

impl ProtocolConfig {
    pub fn key_bits(&self, kind: ProtocolKind) -> usize {
        match kind {
            ProtocolKind::Original => 4 * self.clusters,
            ProtocolKind::Improved => self.photons,
        }
    }

    pub fn validate(&self, kind: ProtocolKind) -> Result<(), ConfigError> {
        if self.participants < 3 || self.participants > MAX_PARTICIPANTS {
            return Err(ConfigError::new(
                "participants",
                format!("need 3..={MAX_PARTICIPANTS}, got {}", self.participants),
            ));
        }
        match kind {
            ProtocolKind::Original if self.clusters == 0 => {
                return Err(ConfigError::new("clusters", "need at least one cluster state"));
            }
            ProtocolKind::Improved if self.photons == 0 => {
                return Err(ConfigError::new("photons", "need at least one photon"));
            }
            _ => {}
        }
        if !(0.0..1.0).contains(&self.error_threshold) {
            return Err(ConfigError::new(
                "threshold",
                format!("must lie in [0, 1), got {}", self.error_threshold),
            ));
        }
        if kind == ProtocolKind::Original {
            let (name, value) = self.params.smallest();
            if value <= TOLERANCE {
                return Err(ConfigError::new(
                    "params",
                    format!("coefficient {name} = {value} makes the family states linearly dependent"),
                ));
            }
        }
        if let Some(keys) = &self.private_keys {
            let bits = self.key_bits(kind);
            if keys.len() != self.participants || keys.iter().any(|k| k.len() != bits) {
                return Err(ConfigError::new(
                    "private_keys",
                    format!("need {} keys of {bits} bits", self.participants),
                ));
            }
        }
        Ok(())
    }

    fn draw_keys(&self, kind: ProtocolKind, rng: &mut RandomSource) -> Vec<BitString> {
        match &self.private_keys {
            Some(keys) => keys.clone(),
            None => (0..self.participants)
                .map(|_| BitString::random(self.key_bits(kind), rng))
                .collect(),
        }
    }
}

/// Result of one decoy check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DetectionEvent {
    pub from: PartyId,
    pub to: PartyId,
    pub owner: PartyId,
    pub round: usize,
    pub decoys: usize,
    pub mismatches: usize,
    pub error_rate: f64,
}

impl DetectionEvent {
    pub fn detected(&self) -> bool {
        self.mismatches > 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Abort {
    pub from: PartyId,
    pub to: PartyId,
    pub owner: PartyId,
    pub round: usize,
    pub error_rate: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunOutcome {
    pub protocol: ProtocolKind,
    /// Ground truth, used only for scoring.
    pub private_keys: Vec<BitString>,
    /// `None` for every party when the run aborted.
    pub final_keys: Vec<Option<BitString>>,
    pub abort: Option<Abort>,
    pub detections: Vec<DetectionEvent>,
    /// Nibble positions dropped after inconclusive readouts (original only).
    pub discarded_positions: Vec<usize>,
    pub adversary: Option<AdversaryMetrics>,
    pub transcript: Vec<TranscriptEvent>,
}

impl RunOutcome {
    /// XOR of every private key with discarded positions removed.
    pub fn expected_key(&self) -> BitString {
        let bits = self.private_keys.first().map_or(0, BitString::len);
        self.private_keys
            .iter()
            .fold(BitString::zeros(bits), |acc, k| &acc ^ k)
            .without_nibbles(&self.discarded_positions)
    }

    /// All parties finished with the XOR of all private keys.
    pub fn agreement(&self) -> bool {
        if self.abort.is_some() {
            return false;
        }
        let expected = self.expected_key();
        self.final_keys.iter().all(|k| k.as_ref() == Some(&expected))
    }

    pub fn detection_count(&self) -> usize {
        self.detections.iter().filter(|d| d.detected()).count()
    }
}

/// Mutable state of one run shared by both flows.
pub(crate) struct Session<'a> {
    pub(crate) memory: QuantumMemory,
    pub(crate) ring: Ring,
    pub(crate) rng: &'a mut RandomSource,
    pub(crate) adversary: &'a mut dyn Adversary,
    decoys: usize,
    threshold: f64,
    pub(crate) detections: Vec<DetectionEvent>,
    pub(crate) abort: Option<Abort>,
}

impl<'a> Session<'a> {
    pub(crate) fn new(
        parties: usize,
        decoys: usize,
        threshold: f64,
        rng: &'a mut RandomSource,
        adversary: &'a mut dyn Adversary,
    ) -> Self {
        Self {
            memory: QuantumMemory::new(),
            ring: Ring::new(parties),
            rng,
            adversary,
            decoys,
            threshold,
            detections: Vec::new(),
            abort: None,
        }
    }

    fn message(
        &mut self,
        sender: PartyId,
        recipient: Recipient,
        kind: MessageKind,
        seq: &PhotonSequence,
        payload: Vec<usize>,
    ) -> Result<(), ChannelError> {
        self.ring.send_classical(ClassicalMessage {
            sender,
            recipient,
            kind,
            about: seq.origin,
            round: seq.round,
            payload,
        })
    }

    /// One decoy-protected transfer. Returns the receiver's stripped sequence,
    /// or `None` after recording an abort.
    pub(crate) fn hop(
        &mut self,
        from: PartyId,
        to: PartyId,
        seq: PhotonSequence,
    ) -> Result<Option<PhotonSequence>, ProtocolError> {
        let (owner, round) = (seq.origin, seq.round);
        let (padded, record) = insert_decoys(seq, self.decoys, &mut self.memory, self.rng);
        let tag = PhotonSequence::new(Vec::new(), owner, round);
        let hook: &mut dyn crate::channel::ChannelHook = &mut *self.adversary;
        let delivery = self
            .ring
            .send_quantum(from, to, padded, hook, &mut self.memory, self.rng)?;
        if delivery.to != to {
            // nothing arrived, so nothing can be acknowledged
            self.record(from, to, owner, round, record.len(), record.len().max(1), 1.0);
            return Ok(None);
        }
        let seq = delivery.seq;

        self.message(to, Recipient::Party(from), MessageKind::Ack, &tag, Vec::new())?;
        self.ring.take_about(from, to, MessageKind::Ack, owner, round)?;
        self.message(from, Recipient::Broadcast, MessageKind::DecoyPositions, &tag, record.positions.clone())?;
        self.message(from, Recipient::Broadcast, MessageKind::DecoyBases, &tag, record.bases())?;

        let positions = self.ring.take_about(to, from, MessageKind::DecoyPositions, owner, round)?.payload;
        let bases = self.ring.take_about(to, from, MessageKind::DecoyBases, owner, round)?.payload;
        let results = measure_decoys(&seq, &positions, &bases, &mut self.memory, self.rng)?;
        self.message(to, Recipient::Party(from), MessageKind::DecoyResults, &tag, results)?;

        let results = self.ring.take_about(from, to, MessageKind::DecoyResults, owner, round)?.payload;
        let rate = check_decoys(&record, &results);
        let wrong = decoy::mismatches(&record, &results);
        self.record(from, to, owner, round, record.len(), wrong, rate);
        if rate > self.threshold {
            return Ok(None);
        }
        let stripped = strip_decoys(seq, &positions);
        debug_assert!(stripped
            .photons
            .iter()
            .all(|p| p.role == crate::channel::PhotonRole::Payload));
        Ok(Some(stripped))
    }

    #[allow(clippy::too_many_arguments)]
    fn record(
        &mut self,
        from: PartyId,
        to: PartyId,
        owner: PartyId,
        round: usize,
        decoys: usize,
        mismatches: usize,
        error_rate: f64,
    ) {
        self.detections.push(DetectionEvent {
            from,
            to,
            owner,
            round,
            decoys,
            mismatches,
            error_rate,
        });
        if error_rate > self.threshold && self.abort.is_none() {
            self.abort = Some(Abort {
                from,
                to,
                owner,
                round,
                error_rate,
            });
        }
    }

    pub(crate) fn finish(
        self,
        protocol: ProtocolKind,
        private_keys: Vec<BitString>,
        final_keys: Vec<Option<BitString>>,
        discarded_positions: Vec<usize>,
        scored: bool,
    ) -> RunOutcome {
        let parties = private_keys.len();
        let final_keys = if self.abort.is_some() {
            vec![None; parties]
        } else {
            final_keys
        };
        let mut outcome = RunOutcome {
            protocol,
            private_keys,
            final_keys,
            abort: self.abort,
            detections: self.detections,
            discarded_positions,
            adversary: None,
            transcript: self.ring.into_transcript(),
        };
        if scored {
            outcome.adversary = Some(evaluate(&*self.adversary, &outcome));
        }
        outcome
    }
}

pub(crate) fn resolve_adversary<'a, 'b: 'a>(
    adversary: Option<&'a mut (dyn Adversary + 'b)>,
    passive: &'a mut Passive,
) -> (&'a mut (dyn Adversary + 'b), bool) {
    match adversary {
        Some(a) => (a, true),
        None => (passive, false),
    }
}

/// Sends `decoys` decoys (and no payload) over a single hop and reports the
/// check. Used to measure detection statistics in isolation.
pub fn probe_hop(
    decoys: usize,
    adversary: &mut dyn Adversary,
    rng: &mut RandomSource,
) -> Result<DetectionEvent, ProtocolError> {
    let mut session = Session::new(2, decoys, 0.0, rng, adversary);
    let seq = PhotonSequence::new(Vec::new(), PartyId(0), 1);
    session.hop(PartyId(0), PartyId(1), seq)?;
    Ok(session.detections.pop().expect("one check per hop"))
}
