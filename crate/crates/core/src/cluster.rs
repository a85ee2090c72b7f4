//! The sixteen four-qubit cluster states, the nibble encoding rule on
//! particles 2 and 4, and the transition table derived from them.

use std::fmt;
use std::ops::BitXor;

use serde::{Deserialize, Serialize};

use crate::qcore::{Amplitude, Gate, QError, StateVector, TOLERANCE};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ClusterError {
    #[error("cluster coefficients must be finite and non-negative, got {name} = {value}")]
    BadCoefficient { name: char, value: f64 },
    #[error("cluster coefficients are not normalized: a²+b²+c²+d² = {0}")]
    NotNormalized(f64),
    #[error("cluster state id {0} outside 1..=16")]
    BadStateId(u8),
    #[error("key nibble {0} outside 0..=15")]
    BadNibble(u8),
    #[error("encoding needs a 4-qubit state, got {0} qubits")]
    WrongQubitCount(usize),
    #[error("cannot derive a unique transition from state {from} under nibble {nibble}")]
    AmbiguousTransition { from: ClusterStateId, nibble: KeyNibble },
    #[error(transparent)]
    Quantum(#[from] QError),
}

/// Real amplitudes `(a, b, c, d)` shared by all sixteen cluster states.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterParams {
    a: f64,
    b: f64,
    c: f64,
    d: f64,
}

impl ClusterParams {
    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Result<Self, ClusterError> {
        for (name, value) in [('a', a), ('b', b), ('c', c), ('d', d)] {
            if !value.is_finite() || value < 0.0 {
                return Err(ClusterError::BadCoefficient { name, value });
            }
        }
        let n = a * a + b * b + c * c + d * d;
        if (n - 1.0).abs() > TOLERANCE {
            return Err(ClusterError::NotNormalized(n));
        }
        Ok(Self { a, b, c, d })
    }

    /// `a = b = c = d = ½`: the four states of each family are orthogonal.
    pub fn uniform() -> Self {
        Self {
            a: 0.5,
            b: 0.5,
            c: 0.5,
            d: 0.5,
        }
    }

    /// `(0.6, 0.5, 0.4, √0.23)`, a genuinely non-maximal setting.
    pub fn non_uniform() -> Self {
        Self {
            a: 0.6,
            b: 0.5,
            c: 0.4,
            d: (1.0f64 - 0.36 - 0.25 - 0.16).sqrt(),
        }
    }

    pub fn coefficients(&self) -> [f64; 4] {
        [self.a, self.b, self.c, self.d]
    }

    /// Name and value of the smallest coefficient.
    pub fn smallest(&self) -> (char, f64) {
        ['a', 'b', 'c', 'd']
            .into_iter()
            .zip(self.coefficients())
            .fold(('a', f64::INFINITY), |acc, (n, v)| if v < acc.1 { (n, v) } else { acc })
    }
}

impl Default for ClusterParams {
    fn default() -> Self {
        Self::uniform()
    }
}

/// Index `1..=16` of a cluster state `|Ψi⟩`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ClusterStateId(u8);

impl ClusterStateId {
    pub const INITIAL: ClusterStateId = ClusterStateId(1);

    pub fn new(index: u8) -> Result<Self, ClusterError> {
        if (1..=16).contains(&index) {
            Ok(Self(index))
        } else {
            Err(ClusterError::BadStateId(index))
        }
    }

    pub fn index(self) -> u8 {
        self.0
    }

    pub fn all() -> impl Iterator<Item = ClusterStateId> {
        (1..=16).map(ClusterStateId)
    }
}

impl fmt::Display for ClusterStateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Ψ{}", self.0)
    }
}

/// Four key bits, written most significant first (`0011` is 3).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct KeyNibble(u8);

impl KeyNibble {
    pub const ZERO: KeyNibble = KeyNibble(0);

    pub fn new(bits: u8) -> Result<Self, ClusterError> {
        if bits < 16 {
            Ok(Self(bits))
        } else {
            Err(ClusterError::BadNibble(bits))
        }
    }

    pub fn from_bits(bits: [bool; 4]) -> Self {
        Self(bits.iter().fold(0, |acc, &b| (acc << 1) | b as u8))
    }

    pub fn bits(self) -> [bool; 4] {
        [
            self.0 & 8 != 0,
            self.0 & 4 != 0,
            self.0 & 2 != 0,
            self.0 & 1 != 0,
        ]
    }

    pub fn value(self) -> u8 {
        self.0
    }

    pub fn all() -> impl Iterator<Item = KeyNibble> {
        (0..16).map(KeyNibble)
    }
}

impl BitXor for KeyNibble {
    type Output = KeyNibble;
    fn bitxor(self, rhs: Self) -> Self {
        KeyNibble(self.0 ^ rhs.0)
    }
}

impl fmt::Display for KeyNibble {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04b}", self.0)
    }
}

/// Gates applied to particle 2 and particle 4 for one nibble.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct OpPair {
    pub op2: Gate,
    pub op4: Gate,
}

/// Encoding rule, indexed by nibble value.
const ENCODING_RULE: [(Gate, Gate); 16] = {
    use Gate::{ISigmaY as Y, Identity as I, SigmaX as X, SigmaZ as Z};
    [
        (I, I), // 0000
        (I, Z), // 0001
        (Z, I), // 0010
        (Z, Z), // 0011
        (Z, X), // 0100
        (Z, Y), // 0101
        (I, X), // 0110
        (I, Y), // 0111
        (X, Z), // 1000
        (X, I), // 1001
        (Y, Z), // 1010
        (Y, I), // 1011
        (Y, Y), // 1100
        (Y, X), // 1101
        (X, Y), // 1110
        (X, X), // 1111
    ]
};

pub fn nibble_to_oppair(nibble: KeyNibble) -> OpPair {
    let (op2, op4) = ENCODING_RULE[nibble.0 as usize];
    OpPair { op2, op4 }
}

/// Qubit indices (0-based) of particles 2 and 4.
pub const PARTICLE_2: usize = 1;
pub const PARTICLE_4: usize = 3;

/// Basis kets (as 4-bit indices, particle 1 leftmost) and signs of each
/// cluster state, in the order of the coefficients `a, b, c, d`.
const CLUSTER_KETS: [([usize; 4], [i8; 4]); 16] = [
    ([0b0000, 0b0011, 0b1100, 0b1111], [1, 1, 1, -1]),
    ([0b0000, 0b0011, 0b1100, 0b1111], [1, -1, 1, 1]),
    ([0b0000, 0b0011, 0b1100, 0b1111], [1, 1, -1, 1]),
    ([0b0000, 0b0011, 0b1100, 0b1111], [1, -1, -1, -1]),
    ([0b0001, 0b0010, 0b1101, 0b1110], [1, 1, -1, 1]),
    ([0b0001, 0b0010, 0b1101, 0b1110], [1, -1, -1, -1]),
    ([0b0001, 0b0010, 0b1101, 0b1110], [1, 1, 1, -1]),
    ([0b0001, 0b0010, 0b1101, 0b1110], [1, -1, 1, 1]),
    ([0b0100, 0b0111, 0b1000, 0b1011], [1, -1, 1, 1]),
    ([0b0100, 0b0111, 0b1000, 0b1011], [1, 1, 1, -1]),
    ([0b0100, 0b0111, 0b1000, 0b1011], [1, -1, -1, -1]),
    ([0b0100, 0b0111, 0b1000, 0b1011], [1, 1, -1, 1]),
    ([0b0101, 0b0110, 0b1001, 0b1010], [1, -1, -1, -1]),
    ([0b0101, 0b0110, 0b1001, 0b1010], [1, 1, -1, 1]),
    ([0b0101, 0b0110, 0b1001, 0b1010], [1, -1, 1, 1]),
    ([0b0101, 0b0110, 0b1001, 0b1010], [1, 1, 1, -1]),
];

/// Basis indices carrying the `a, b, c, d` terms of `|Ψid⟩`.
pub fn support(id: ClusterStateId) -> [usize; 4] {
    CLUSTER_KETS[id.0 as usize - 1].0
}

/// Signs of the `a, b, c, d` terms of `|Ψid⟩`.
pub fn signs(id: ClusterStateId) -> [i8; 4] {
    CLUSTER_KETS[id.0 as usize - 1].1
}

pub fn make_cluster_state(params: &ClusterParams, id: ClusterStateId) -> StateVector {
    let (kets, signs) = CLUSTER_KETS[id.0 as usize - 1];
    let mut amps = vec![Amplitude::new(0.0, 0.0); 16];
    for ((ket, sign), coeff) in kets.iter().zip(signs).zip(params.coefficients()) {
        amps[*ket] = Amplitude::new(sign as f64 * coeff, 0.0);
    }
    StateVector::from_amplitudes(amps).expect("normalized coefficients give a unit vector")
}

pub fn encode_nibble(state: &StateVector, nibble: KeyNibble) -> Result<StateVector, ClusterError> {
    if state.qubit_count() != 4 {
        return Err(ClusterError::WrongQubitCount(state.qubit_count()));
    }
    let pair = nibble_to_oppair(nibble);
    Ok(state
        .apply_gate(pair.op2, PARTICLE_2)?
        .apply_gate(pair.op4, PARTICLE_4)?)
}

/// `encode(|Ψfrom⟩, nibble) = phase · |Ψto⟩`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Transition {
    pub from: ClusterStateId,
    pub nibble: KeyNibble,
    pub to: ClusterStateId,
    #[serde(serialize_with = "serialize_phase")]
    pub phase: Amplitude,
}

fn serialize_phase<S: serde::Serializer>(p: &Amplitude, s: S) -> Result<S::Ok, S::Error> {
    use serde::ser::SerializeTuple;
    let mut t = s.serialize_tuple(2)?;
    t.serialize_element(&p.re)?;
    t.serialize_element(&p.im)?;
    t.end()
}

/// All 256 transitions, derived by applying each operation pair to each state
/// and matching the result against the sixteen kets.
#[derive(Debug, Clone)]
pub struct TransitionTable {
    params: ClusterParams,
    entries: Vec<Transition>,
    // decode[from-1][to-1] = nibble
    decode: [[KeyNibble; 16]; 16],
}

impl TransitionTable {
    pub fn build(params: &ClusterParams) -> Result<Self, ClusterError> {
        let states: Vec<StateVector> = ClusterStateId::all()
            .map(|id| make_cluster_state(params, id))
            .collect();
        let mut entries = Vec::with_capacity(256);
        let mut decode = [[KeyNibble::ZERO; 16]; 16];
        let mut seen = [[false; 16]; 16];
        for from in ClusterStateId::all() {
            for nibble in KeyNibble::all() {
                let out = encode_nibble(&states[from.0 as usize - 1], nibble)?;
                let mut hit = None;
                for (k, target) in states.iter().enumerate() {
                    let overlap = target.inner_product(&out)?;
                    if (overlap.norm_sqr() - 1.0).abs() <= TOLERANCE {
                        if hit.is_some() {
                            return Err(ClusterError::AmbiguousTransition { from, nibble });
                        }
                        hit = Some((k, overlap));
                    }
                }
                let (k, phase) = hit.ok_or(ClusterError::AmbiguousTransition { from, nibble })?;
                let f = from.0 as usize - 1;
                if seen[f][k] {
                    return Err(ClusterError::AmbiguousTransition { from, nibble });
                }
                seen[f][k] = true;
                decode[f][k] = nibble;
                entries.push(Transition {
                    from,
                    nibble,
                    to: ClusterStateId(k as u8 + 1),
                    phase,
                });
            }
        }
        Ok(Self {
            params: *params,
            entries,
            decode,
        })
    }

    pub fn params(&self) -> &ClusterParams {
        &self.params
    }

    pub fn entries(&self) -> &[Transition] {
        &self.entries
    }

    pub fn lookup(&self, from: ClusterStateId, nibble: KeyNibble) -> &Transition {
        &self.entries[(from.0 as usize - 1) * 16 + nibble.0 as usize]
    }

    /// The unique nibble taking `initial` to `last`.
    pub fn decode_nibble(&self, initial: ClusterStateId, last: ClusterStateId) -> KeyNibble {
        self.decode[initial.0 as usize - 1][last.0 as usize - 1]
    }
}
