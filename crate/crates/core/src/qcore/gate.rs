use std::fmt;

use serde::{Deserialize, Serialize};

use super::Amplitude;

/// Single-qubit gates used by both protocols.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Gate {
    /// `|0⟩⟨0| + |1⟩⟨1|`
    Identity,
    /// `|0⟩⟨0| − |1⟩⟨1|`
    SigmaZ,
    /// `|1⟩⟨0| + |0⟩⟨1|`
    SigmaX,
    /// `|0⟩⟨1| − |1⟩⟨0|`, i.e. `i·σy`.
    ISigmaY,
    /// `(|0⟩⟨0| + |0⟩⟨1| + |1⟩⟨0| − |1⟩⟨1|)/√2`
    Hadamard,
}

impl Gate {
    pub const ALL: [Gate; 5] = [
        Gate::Identity,
        Gate::SigmaZ,
        Gate::SigmaX,
        Gate::ISigmaY,
        Gate::Hadamard,
    ];

    /// Row-major 2×2 matrix: `m[row][col] = ⟨row|U|col⟩`.
    pub fn matrix(self) -> [[Amplitude; 2]; 2] {
        let r = |x: f64| Amplitude::new(x, 0.0);
        match self {
            Gate::Identity => [[r(1.0), r(0.0)], [r(0.0), r(1.0)]],
            Gate::SigmaZ => [[r(1.0), r(0.0)], [r(0.0), r(-1.0)]],
            Gate::SigmaX => [[r(0.0), r(1.0)], [r(1.0), r(0.0)]],
            Gate::ISigmaY => [[r(0.0), r(1.0)], [r(-1.0), r(0.0)]],
            Gate::Hadamard => {
                let h = std::f64::consts::FRAC_1_SQRT_2;
                [[r(h), r(h)], [r(h), r(-h)]]
            }
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Gate::Identity => "I",
            Gate::SigmaZ => "SZ",
            Gate::SigmaX => "SX",
            Gate::ISigmaY => "ISY",
            Gate::Hadamard => "H",
        }
    }
}

impl fmt::Display for Gate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Measurement basis for single photons. Outcome 0 is `|0⟩` (Z) or `|+⟩` (X).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Basis {
    Z,
    X,
}

impl Basis {
    pub fn conjugate(self) -> Basis {
        match self {
            Basis::Z => Basis::X,
            Basis::X => Basis::Z,
        }
    }
}

impl fmt::Display for Basis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Basis::Z => f.write_str("Z"),
            Basis::X => f.write_str("X"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::{approx_eq, TOLERANCE};

    fn mul(a: [[Amplitude; 2]; 2], b: [[Amplitude; 2]; 2]) -> [[Amplitude; 2]; 2] {
        let mut out = [[Amplitude::new(0.0, 0.0); 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
            }
        }
        out
    }

    fn dagger(a: [[Amplitude; 2]; 2]) -> [[Amplitude; 2]; 2] {
        [
            [a[0][0].conj(), a[1][0].conj()],
            [a[0][1].conj(), a[1][1].conj()],
        ]
    }

    #[test]
    fn every_gate_is_unitary() {
        let id = Gate::Identity.matrix();
        for g in Gate::ALL {
            let p = mul(dagger(g.matrix()), g.matrix());
            for i in 0..2 {
                for j in 0..2 {
                    assert!(approx_eq(p[i][j], id[i][j]), "{g} not unitary");
                }
            }
        }
    }

    #[test]
    fn hadamard_conjugates_isy_to_its_negative() {
        let h = Gate::Hadamard.matrix();
        let y = Gate::ISigmaY.matrix();
        let hyh = mul(mul(h, y), h);
        for i in 0..2 {
            for j in 0..2 {
                assert!((hyh[i][j] + y[i][j]).norm() < TOLERANCE);
            }
        }
    }

    #[test]
    fn hadamard_squares_to_identity() {
        let h = Gate::Hadamard.matrix();
        let hh = mul(h, h);
        let id = Gate::Identity.matrix();
        for i in 0..2 {
            for j in 0..2 {
                assert!(approx_eq(hh[i][j], id[i][j]));
            }
        }
    }
}
