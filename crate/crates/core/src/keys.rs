//! Bit strings for private keys, final keys and target keys.

use std::fmt;
use std::ops::BitXor;

use serde::{Serialize, Serializer};

use crate::cluster::KeyNibble;
use crate::qcore::RandomSource;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum KeyError {
    #[error("invalid hex digit {0:?}")]
    BadHexDigit(char),
    #[error("hex key has {got} digits, expected {expected} for {bits} bits")]
    WrongHexLength {
        got: usize,
        expected: usize,
        bits: usize,
    },
}

#[derive(Clone, Default, PartialEq, Eq, Hash)]
pub struct BitString(Vec<bool>);

impl BitString {
    pub fn new(bits: Vec<bool>) -> Self {
        Self(bits)
    }

    pub fn zeros(len: usize) -> Self {
        Self(vec![false; len])
    }

    pub fn random(len: usize, rng: &mut RandomSource) -> Self {
        Self(rng.bits(len))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn bits(&self) -> &[bool] {
        &self.0
    }

    pub fn get(&self, i: usize) -> bool {
        self.0[i]
    }

    pub fn from_nibbles(nibbles: &[KeyNibble]) -> Self {
        Self(nibbles.iter().flat_map(|n| n.bits()).collect())
    }

    /// Nibble `p` (bits `4p..4p+4`).
    pub fn nibble(&self, p: usize) -> KeyNibble {
        let b = &self.0[4 * p..4 * p + 4];
        KeyNibble::from_bits([b[0], b[1], b[2], b[3]])
    }

    pub fn nibble_count(&self) -> usize {
        self.0.len() / 4
    }

    /// Drops the nibbles at the given (sorted or unsorted) positions.
    pub fn without_nibbles(&self, dropped: &[usize]) -> Self {
        Self(
            self.0
                .chunks(4)
                .enumerate()
                .filter(|(p, _)| !dropped.contains(p))
                .flat_map(|(_, c)| c.iter().copied())
                .collect(),
        )
    }

    /// Parses `ceil(bits / 4)` hex digits, most significant bit first; any
    /// trailing bits beyond `bits` are ignored.
    pub fn from_hex(hex: &str, bits: usize) -> Result<Self, KeyError> {
        let hex = hex.trim().trim_start_matches("0x").trim_start_matches("0X");
        let expected = bits.div_ceil(4);
        let got = hex.chars().count();
        if got != expected {
            return Err(KeyError::WrongHexLength {
                got,
                expected,
                bits,
            });
        }
        let mut out = Vec::with_capacity(expected * 4);
        for ch in hex.chars() {
            let v = ch.to_digit(16).ok_or(KeyError::BadHexDigit(ch))?;
            out.extend((0..4).rev().map(|k| v >> k & 1 == 1));
        }
        out.truncate(bits);
        Ok(Self(out))
    }

    pub fn to_hex(&self) -> String {
        self.0
            .chunks(4)
            .map(|c| {
                let v = c
                    .iter()
                    .chain(std::iter::repeat(&false))
                    .take(4)
                    .fold(0u32, |acc, &b| (acc << 1) | b as u32);
                char::from_digit(v, 16).expect("nibble")
            })
            .collect()
    }
}

impl BitXor for &BitString {
    type Output = BitString;

    fn bitxor(self, rhs: &BitString) -> BitString {
        assert_eq!(self.len(), rhs.len(), "xor of keys with different lengths");
        BitString(self.0.iter().zip(&rhs.0).map(|(a, b)| a ^ b).collect())
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.0 {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitString({self})")
    }
}

impl Serialize for BitString {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}
