//! Ring transport: a lossless quantum channel carrying photon sequences, an
//! authenticated classical channel for announcements, and the interception
//! point adversaries attach to.
//!
//! Photons do not carry their quantum state. They hold a [`QubitRef`] into a
//! [`QuantumMemory`], so qubit 2 of a cluster travelling around the ring and
//! qubits 1 and 3 kept at home stay one entangled register. The only ways to
//! touch a register from outside this module are gates and measurements.

use std::collections::VecDeque;
use std::fmt;

use serde::Serialize;

use crate::povm::{ClusterDiscriminator, DiscriminationOutcome, PovmError};
use crate::qcore::{Basis, Gate, QError, RandomSource, StateVector};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ChannelError {
    #[error("party {0} cannot send to itself")]
    SelfSend(PartyId),
    #[error("party {0} is not on a ring of {1}")]
    UnknownParty(PartyId, usize),
    #[error("{party} expected a {kind:?} message from {from} but none arrived")]
    Missing {
        party: PartyId,
        from: PartyId,
        kind: MessageKind,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(transparent)]
pub struct PartyId(pub usize);

impl PartyId {
    /// `self + steps` around a ring of `n`.
    pub fn offset(self, steps: usize, n: usize) -> PartyId {
        PartyId((self.0 + steps) % n)
    }

    pub fn successor(self, n: usize) -> PartyId {
        self.offset(1, n)
    }

    /// Steps from `self` forward to `other`.
    pub fn distance_to(self, other: PartyId, n: usize) -> usize {
        (other.0 + n - self.0) % n
    }
}

impl fmt::Display for PartyId {
    // 1-based, matching the usual P1..PN naming
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "P{}", self.0 + 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct RegisterId(usize);

/// One qubit of a register in [`QuantumMemory`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct QubitRef {
    pub register: RegisterId,
    pub qubit: usize,
}

/// Storage for every register in a run.
#[derive(Debug, Default)]
pub struct QuantumMemory {
    registers: Vec<StateVector>,
}

impl QuantumMemory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn allocate(&mut self, state: StateVector) -> RegisterId {
        self.registers.push(state);
        RegisterId(self.registers.len() - 1)
    }

    /// Allocates a single-qubit register.
    pub fn allocate_photon(&mut self, state: StateVector) -> QubitRef {
        debug_assert_eq!(state.qubit_count(), 1);
        QubitRef {
            register: self.allocate(state),
            qubit: 0,
        }
    }

    pub fn apply(&mut self, target: QubitRef, gate: Gate) -> Result<(), QError> {
        self.registers[target.register.0].apply_gate_in_place(gate, target.qubit)
    }

    pub fn measure(
        &mut self,
        target: QubitRef,
        basis: Basis,
        rng: &mut RandomSource,
    ) -> Result<bool, QError> {
        let reg = &mut self.registers[target.register.0];
        let (bit, post) = reg.measure_qubit(target.qubit, basis, rng)?;
        *reg = post;
        Ok(bit)
    }

    /// Cluster identification on a whole 4-qubit register; the register is
    /// left in its post-measurement state.
    pub fn discriminate(
        &mut self,
        register: RegisterId,
        discriminator: &ClusterDiscriminator,
        rng: &mut RandomSource,
    ) -> Result<DiscriminationOutcome, PovmError> {
        let reg = &mut self.registers[register.0];
        let (outcome, post) = discriminator.discriminate(reg, rng)?;
        *reg = post;
        Ok(outcome)
    }

    /// Replaces a register by a freshly prepared state. Only the holder of
    /// every qubit of the register may do this.
    pub fn prepare(&mut self, register: RegisterId, state: StateVector) {
        self.registers[register.0] = state;
    }

    /// Simulator-side view of a register, for self-checks only.
    pub(crate) fn peek(&self, register: RegisterId) -> &StateVector {
        &self.registers[register.0]
    }

    pub fn register_count(&self) -> usize {
        self.registers.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum PhotonRole {
    Decoy,
    Payload,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Photon {
    qubit: QubitRef,
    pub(crate) role: PhotonRole,
}

impl Photon {
    pub(crate) fn payload(qubit: QubitRef) -> Self {
        Self {
            qubit,
            role: PhotonRole::Payload,
        }
    }

    pub(crate) fn decoy(qubit: QubitRef) -> Self {
        Self {
            qubit,
            role: PhotonRole::Decoy,
        }
    }

    pub fn qubit(&self) -> QubitRef {
        self.qubit
    }
}

/// Ordered photons in flight, tagged with the party whose sequence it is and
/// the ring round.
#[derive(Debug, Clone, PartialEq)]
pub struct PhotonSequence {
    pub photons: Vec<Photon>,
    pub origin: PartyId,
    pub round: usize,
}

impl PhotonSequence {
    pub fn new(photons: Vec<Photon>, origin: PartyId, round: usize) -> Self {
        Self {
            photons,
            origin,
            round,
        }
    }

    pub fn len(&self) -> usize {
        self.photons.len()
    }

    pub fn is_empty(&self) -> bool {
        self.photons.is_empty()
    }

    pub fn qubits(&self) -> impl Iterator<Item = QubitRef> + '_ {
        self.photons.iter().map(Photon::qubit)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MessageKind {
    Ack,
    DecoyPositions,
    DecoyBases,
    DecoyResults,
    HPositions,
    InvalidPositions,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Recipient {
    Party(PartyId),
    Broadcast,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ClassicalMessage {
    pub sender: PartyId,
    pub recipient: Recipient,
    pub kind: MessageKind,
    /// Owner of the sequence this message is about.
    pub about: PartyId,
    pub round: usize,
    /// Positions or bits, depending on `kind`.
    pub payload: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum TranscriptEvent {
    Quantum {
        from: PartyId,
        to: PartyId,
        delivered_to: PartyId,
        origin: PartyId,
        round: usize,
        photons: usize,
    },
    Classical(ClassicalMessage),
}

/// Where a quantum send ends up.
#[derive(Debug, Clone, PartialEq)]
pub struct Delivery {
    pub to: PartyId,
    pub seq: PhotonSequence,
}

/// Interception point on every quantum send. The default is faithful delivery.
pub trait ChannelHook {
    fn intercept(
        &mut self,
        _from: PartyId,
        to: PartyId,
        seq: PhotonSequence,
        _memory: &mut QuantumMemory,
        _rng: &mut RandomSource,
    ) -> Delivery {
        Delivery { to, seq }
    }
}

/// A hook that does nothing.
#[derive(Debug, Default, Clone, Copy)]
pub struct Faithful;

impl ChannelHook for Faithful {}

/// Channels between `n` parties on a ring, plus the run transcript.
#[derive(Debug)]
pub struct Ring {
    parties: usize,
    transcript: Vec<TranscriptEvent>,
    inboxes: Vec<VecDeque<ClassicalMessage>>,
}

impl Ring {
    pub fn new(parties: usize) -> Self {
        Self {
            parties,
            transcript: Vec::new(),
            inboxes: vec![VecDeque::new(); parties],
        }
    }

    pub fn parties(&self) -> usize {
        self.parties
    }

    fn check_party(&self, p: PartyId) -> Result<(), ChannelError> {
        if p.0 < self.parties {
            Ok(())
        } else {
            Err(ChannelError::UnknownParty(p, self.parties))
        }
    }

    pub fn send_quantum(
        &mut self,
        from: PartyId,
        to: PartyId,
        seq: PhotonSequence,
        hook: &mut dyn ChannelHook,
        memory: &mut QuantumMemory,
        rng: &mut RandomSource,
    ) -> Result<Delivery, ChannelError> {
        self.check_party(from)?;
        self.check_party(to)?;
        if from == to {
            return Err(ChannelError::SelfSend(from));
        }
        let (origin, round, photons) = (seq.origin, seq.round, seq.len());
        let delivery = hook.intercept(from, to, seq, memory, rng);
        self.transcript.push(TranscriptEvent::Quantum {
            from,
            to,
            delivered_to: delivery.to,
            origin,
            round,
            photons,
        });
        Ok(delivery)
    }

    pub fn send_classical(&mut self, msg: ClassicalMessage) -> Result<(), ChannelError> {
        self.check_party(msg.sender)?;
        match msg.recipient {
            Recipient::Party(p) => {
                self.check_party(p)?;
                self.inboxes[p.0].push_back(msg.clone());
            }
            Recipient::Broadcast => {
                for (i, inbox) in self.inboxes.iter_mut().enumerate() {
                    if i != msg.sender.0 {
                        inbox.push_back(msg.clone());
                    }
                }
            }
        }
        self.transcript.push(TranscriptEvent::Classical(msg));
        Ok(())
    }

    /// Removes and returns the oldest message of `kind` from `from` in
    /// `party`'s inbox.
    pub fn take(
        &mut self,
        party: PartyId,
        from: PartyId,
        kind: MessageKind,
    ) -> Result<ClassicalMessage, ChannelError> {
        let inbox = &mut self.inboxes[party.0];
        let pos = inbox
            .iter()
            .position(|m| m.sender == from && m.kind == kind)
            .ok_or(ChannelError::Missing { party, from, kind })?;
        Ok(inbox.remove(pos).expect("position is in range"))
    }

    /// Like [`Ring::take`], restricted to messages about `about`'s sequence
    /// in `round`. Broadcasts also land in bystanders' inboxes, so a party
    /// may hold older announcements from the same sender about other hops.
    pub fn take_about(
        &mut self,
        party: PartyId,
        from: PartyId,
        kind: MessageKind,
        about: PartyId,
        round: usize,
    ) -> Result<ClassicalMessage, ChannelError> {
        let inbox = &mut self.inboxes[party.0];
        let pos = inbox
            .iter()
            .position(|m| m.sender == from && m.kind == kind && m.about == about && m.round == round)
            .ok_or(ChannelError::Missing { party, from, kind })?;
        Ok(inbox.remove(pos).expect("position is in range"))
    }

    /// Every message of `kind` waiting for `party`, oldest first.
    pub fn drain(&mut self, party: PartyId, kind: MessageKind) -> Vec<ClassicalMessage> {
        let inbox = &mut self.inboxes[party.0];
        let (hit, keep): (Vec<_>, Vec<_>) = inbox.drain(..).partition(|m| m.kind == kind);
        inbox.extend(keep);
        hit
    }

    pub fn transcript(&self) -> &[TranscriptEvent] {
        &self.transcript
    }

    pub fn into_transcript(self) -> Vec<TranscriptEvent> {
        self.transcript
    }
}
