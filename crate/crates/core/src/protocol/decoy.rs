use serde::Serialize;

use crate::channel::{Photon, PhotonSequence, QuantumMemory};
use crate::qcore::{Basis, QError, RandomSource, StateVector};

/// One of `|0⟩, |1⟩, |+⟩, |−⟩`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct PhotonState {
    pub basis: Basis,
    pub bit: bool,
}

impl PhotonState {
    pub const ALL: [PhotonState; 4] = [
        PhotonState { basis: Basis::Z, bit: false },
        PhotonState { basis: Basis::Z, bit: true },
        PhotonState { basis: Basis::X, bit: false },
        PhotonState { basis: Basis::X, bit: true },
    ];

    pub fn random(rng: &mut RandomSource) -> Self {
        Self::ALL[rng.below(4)]
    }

    pub fn vector(self) -> StateVector {
        StateVector::eigenstate(self.basis, self.bit)
    }
}

/// The sender's private record of the decoys it inserted on one hop.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct DecoyRecord {
    /// Ascending indices into the padded sequence.
    pub positions: Vec<usize>,
    pub states: Vec<PhotonState>,
}

impl DecoyRecord {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn bases(&self) -> Vec<usize> {
        self.states
            .iter()
            .map(|s| (s.basis == Basis::X) as usize)
            .collect()
    }
}

/// Pads `seq` with `count` fresh decoys at uniformly chosen slots.
pub fn insert_decoys(
    seq: PhotonSequence,
    count: usize,
    memory: &mut QuantumMemory,
    rng: &mut RandomSource,
) -> (PhotonSequence, DecoyRecord) {
    if count == 0 {
        return (seq, DecoyRecord::default());
    }
    let total = seq.len() + count;
    let positions = rng.sorted_subset(total, count);
    let states: Vec<PhotonState> = (0..count).map(|_| PhotonState::random(rng)).collect();
    let mut payload = seq.photons.into_iter();
    let mut decoys = states.iter();
    let mut next_decoy = positions.iter().peekable();
    let mut photons = Vec::with_capacity(total);
    for slot in 0..total {
        if next_decoy.peek() == Some(&&slot) {
            next_decoy.next();
            let s = decoys.next().expect("one state per position");
            photons.push(Photon::decoy(memory.allocate_photon(s.vector())));
        } else {
            photons.push(payload.next().expect("payload fills the remaining slots"));
        }
    }
    (
        PhotonSequence::new(photons, seq.origin, seq.round),
        DecoyRecord { positions, states },
    )
}

/// Receiver side: measures each announced position in the announced basis
/// (`0` = Z, `1` = X). Positions missing from the sequence report `2`.
pub fn measure_decoys(
    seq: &PhotonSequence,
    positions: &[usize],
    bases: &[usize],
    memory: &mut QuantumMemory,
    rng: &mut RandomSource,
) -> Result<Vec<usize>, QError> {
    positions
        .iter()
        .zip(bases)
        .map(|(&p, &b)| match seq.photons.get(p) {
            Some(photon) => {
                let basis = if b == 1 { Basis::X } else { Basis::Z };
                Ok(memory.measure(photon.qubit(), basis, rng)? as usize)
            }
            None => Ok(2),
        })
        .collect()
}

/// Fraction of decoys whose reported result differs from the prepared state.
/// An empty record passes with rate 0.
pub fn check_decoys(record: &DecoyRecord, results: &[usize]) -> f64 {
    if record.is_empty() {
        return 0.0;
    }
    mismatches(record, results) as f64 / record.len() as f64
}

pub(crate) fn mismatches(record: &DecoyRecord, results: &[usize]) -> usize {
    record
        .states
        .iter()
        .enumerate()
        .filter(|(i, s)| results.get(*i) != Some(&(s.bit as usize)))
        .count()
}

/// Drops the photons at `positions` (ascending).
pub fn strip_decoys(seq: PhotonSequence, positions: &[usize]) -> PhotonSequence {
    let photons = seq
        .photons
        .into_iter()
        .enumerate()
        .filter(|(i, _)| positions.binary_search(i).is_err())
        .map(|(_, p)| p)
        .collect();
    PhotonSequence::new(photons, seq.origin, seq.round)
}
