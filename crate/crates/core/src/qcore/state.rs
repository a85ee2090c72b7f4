use std::fmt;

use super::{approx_eq, Amplitude, Basis, Gate, QError, RandomSource, TOLERANCE};

/// Unit-norm pure state on `qubit_count` qubits.
#[derive(Clone, PartialEq)]
pub struct StateVector {
    qubits: usize,
    amps: Vec<Amplitude>,
}

impl StateVector {
    /// Computational basis state `|index⟩`.
    pub fn basis(qubits: usize, index: usize) -> Result<Self, QError> {
        if qubits == 0 {
            return Err(QError::BadLength(1));
        }
        let dim = 1usize << qubits;
        if index >= dim {
            return Err(QError::QubitOutOfRange {
                qubit: index,
                count: qubits,
            });
        }
        let mut amps = vec![Amplitude::new(0.0, 0.0); dim];
        amps[index] = Amplitude::new(1.0, 0.0);
        Ok(Self { qubits, amps })
    }

    pub fn zero(qubits: usize) -> Result<Self, QError> {
        Self::basis(qubits, 0)
    }

    /// Single-qubit eigenstate of `basis` with outcome `bit`.
    pub fn eigenstate(basis: Basis, bit: bool) -> Self {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let amps = match (basis, bit) {
            (Basis::Z, false) => [1.0, 0.0],
            (Basis::Z, true) => [0.0, 1.0],
            (Basis::X, false) => [h, h],
            (Basis::X, true) => [h, -h],
        };
        Self {
            qubits: 1,
            amps: amps.iter().map(|&x| Amplitude::new(x, 0.0)).collect(),
        }
    }

    /// Takes ownership of `amps`, which must already be normalized.
    pub fn from_amplitudes(amps: Vec<Amplitude>) -> Result<Self, QError> {
        let len = amps.len();
        if len < 2 || !len.is_power_of_two() {
            return Err(QError::BadLength(len));
        }
        if amps.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
            return Err(QError::NonFinite);
        }
        let s = Self {
            qubits: len.trailing_zeros() as usize,
            amps,
        };
        let n = s.norm_sqr();
        if (n - 1.0).abs() > TOLERANCE {
            return Err(QError::NotNormalized(n));
        }
        Ok(s)
    }

    /// Rescales `amps` to unit norm.
    pub fn normalized(amps: Vec<Amplitude>) -> Result<Self, QError> {
        let n: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        if !n.is_finite() || n <= 0.0 {
            return Err(QError::NotNormalized(n));
        }
        let scale = 1.0 / n.sqrt();
        Self::from_amplitudes(amps.into_iter().map(|a| a * scale).collect())
    }

    pub fn qubit_count(&self) -> usize {
        self.qubits
    }

    pub fn dimension(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[Amplitude] {
        &self.amps
    }

    pub fn amplitude(&self, index: usize) -> Amplitude {
        self.amps[index]
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    fn bit_mask(&self, qubit: usize) -> Result<usize, QError> {
        if qubit >= self.qubits {
            return Err(QError::QubitOutOfRange {
                qubit,
                count: self.qubits,
            });
        }
        Ok(1 << (self.qubits - 1 - qubit))
    }

    pub fn apply_gate(&self, gate: Gate, qubit: usize) -> Result<Self, QError> {
        let mut out = self.clone();
        out.apply_gate_in_place(gate, qubit)?;
        Ok(out)
    }

    pub fn apply_gate_in_place(&mut self, gate: Gate, qubit: usize) -> Result<(), QError> {
        let mask = self.bit_mask(qubit)?;
        let m = gate.matrix();
        for i in 0..self.amps.len() {
            if i & mask != 0 {
                continue;
            }
            let j = i | mask;
            let (a0, a1) = (self.amps[i], self.amps[j]);
            self.amps[i] = m[0][0] * a0 + m[0][1] * a1;
            self.amps[j] = m[1][0] * a0 + m[1][1] * a1;
        }
        Ok(())
    }

    /// Kronecker product; `self` occupies the leading qubits.
    pub fn tensor(&self, other: &StateVector) -> StateVector {
        let mut amps = Vec::with_capacity(self.amps.len() * other.amps.len());
        for a in &self.amps {
            for b in &other.amps {
                amps.push(a * b);
            }
        }
        StateVector {
            qubits: self.qubits + other.qubits,
            amps,
        }
    }

    /// `⟨self|other⟩`, conjugate-linear in `self`.
    pub fn inner_product(&self, other: &StateVector) -> Result<Amplitude, QError> {
        if self.qubits != other.qubits {
            return Err(QError::DimensionMismatch {
                left: self.qubits,
                right: other.qubits,
            });
        }
        Ok(self
            .amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    /// `|⟨self|other⟩|²`.
    pub fn fidelity_up_to_phase(&self, other: &StateVector) -> Result<f64, QError> {
        Ok(self.inner_product(other)?.norm_sqr())
    }

    pub fn same_up_to_phase(&self, other: &StateVector) -> bool {
        matches!(self.fidelity_up_to_phase(other), Ok(f) if (f - 1.0).abs() <= TOLERANCE)
    }

    /// Probability of reading `1` on `qubit` in `basis`.
    pub fn probability_of_one(&self, qubit: usize, basis: Basis) -> Result<f64, QError> {
        let rotated = self.rotated_into(basis, qubit)?;
        let mask = rotated.bit_mask(qubit)?;
        Ok(rotated
            .amps
            .iter()
            .enumerate()
            .filter(|(i, _)| i & mask != 0)
            .map(|(_, a)| a.norm_sqr())
            .sum())
    }

    fn rotated_into(&self, basis: Basis, qubit: usize) -> Result<StateVector, QError> {
        match basis {
            Basis::Z => {
                self.bit_mask(qubit)?;
                Ok(self.clone())
            }
            Basis::X => self.apply_gate(Gate::Hadamard, qubit),
        }
    }

    /// Projective measurement of one qubit. Returns the outcome bit and the
    /// renormalized post-measurement state.
    pub fn measure_qubit(
        &self,
        qubit: usize,
        basis: Basis,
        rng: &mut RandomSource,
    ) -> Result<(bool, StateVector), QError> {
        let mut rotated = self.rotated_into(basis, qubit)?;
        let mask = rotated.bit_mask(qubit)?;
        let p1: f64 = rotated
            .amps
            .iter()
            .enumerate()
            .filter(|(i, _)| i & mask != 0)
            .map(|(_, a)| a.norm_sqr())
            .sum();
        let outcome = rng.unit() < p1;
        let keep = if outcome { p1 } else { 1.0 - p1 };
        let scale = 1.0 / keep.sqrt();
        for (i, a) in rotated.amps.iter_mut().enumerate() {
            if (i & mask != 0) == outcome {
                *a *= scale;
            } else {
                *a = Amplitude::new(0.0, 0.0);
            }
        }
        if basis == Basis::X {
            rotated.apply_gate_in_place(Gate::Hadamard, qubit)?;
        }
        Ok((outcome, rotated))
    }

    pub fn approx_eq(&self, other: &StateVector) -> bool {
        self.qubits == other.qubits
            && self
                .amps
                .iter()
                .zip(&other.amps)
                .all(|(a, b)| approx_eq(*a, *b))
    }
}

impl fmt::Debug for StateVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "StateVector[{}q](", self.qubits)?;
        let mut first = true;
        for (i, a) in self.amps.iter().enumerate() {
            if a.norm() <= TOLERANCE {
                continue;
            }
            if !first {
                f.write_str(" + ")?;
            }
            first = false;
            write!(
                f,
                "({:.4}{:+.4}i)|{:0width$b}⟩",
                a.re,
                a.im,
                i,
                width = self.qubits
            )?;
        }
        f.write_str(")")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const H: f64 = std::f64::consts::FRAC_1_SQRT_2;

    fn c(re: f64) -> Amplitude {
        Amplitude::new(re, 0.0)
    }

    fn plus() -> StateVector {
        StateVector::eigenstate(Basis::X, false)
    }

    #[test]
    fn isy_maps_one_to_zero() {
        let one = StateVector::basis(1, 1).unwrap();
        let out = one.apply_gate(Gate::ISigmaY, 0).unwrap();
        assert!(out.approx_eq(&StateVector::basis(1, 0).unwrap()));
    }

    #[test]
    fn hadamard_on_zero_gives_plus() {
        let out = StateVector::zero(1)
            .unwrap()
            .apply_gate(Gate::Hadamard, 0)
            .unwrap();
        assert!(out.approx_eq(&StateVector::from_amplitudes(vec![c(H), c(H)]).unwrap()));
    }

    #[test]
    fn identity_leaves_state_alone() {
        let s = StateVector::normalized(vec![c(0.3), Amplitude::new(0.1, 0.5), c(-0.2), c(0.7)])
            .unwrap();
        for q in 0..2 {
            assert!(s.apply_gate(Gate::Identity, q).unwrap().approx_eq(&s));
        }
    }

    #[test]
    fn gate_index_out_of_range() {
        let err = StateVector::zero(2)
            .unwrap()
            .apply_gate(Gate::SigmaX, 2)
            .unwrap_err();
        assert_eq!(err, QError::QubitOutOfRange { qubit: 2, count: 2 });
    }

    #[test]
    fn qubit_zero_is_leftmost() {
        // X on qubit 1 of |00⟩ gives |01⟩ = index 1.
        let s = StateVector::zero(2).unwrap().apply_gate(Gate::SigmaX, 1).unwrap();
        assert!(s.approx_eq(&StateVector::basis(2, 1).unwrap()));
    }

    #[test]
    fn tensor_examples() {
        let zero = StateVector::zero(1).unwrap();
        let one = StateVector::basis(1, 1).unwrap();
        assert!(zero.tensor(&one).approx_eq(&StateVector::basis(2, 1).unwrap()));

        let pp = plus().tensor(&plus());
        let expect = StateVector::from_amplitudes(vec![c(0.5); 4]).unwrap();
        assert!(pp.approx_eq(&expect));

        let four = StateVector::normalized(vec![c(1.0); 16]).unwrap();
        let five = four.tensor(&zero);
        assert_eq!(five.qubit_count(), 5);
        assert!((five.norm_sqr() - 1.0).abs() < TOLERANCE);
    }

    #[test]
    fn inner_products() {
        let zero = StateVector::zero(1).unwrap();
        let one = StateVector::basis(1, 1).unwrap();
        assert!(approx_eq(zero.inner_product(&zero).unwrap(), c(1.0)));
        assert!(approx_eq(zero.inner_product(&one).unwrap(), c(0.0)));
        assert!(matches!(
            zero.inner_product(&StateVector::zero(2).unwrap()),
            Err(QError::DimensionMismatch { left: 1, right: 2 })
        ));
        // conjugate-linear in the first slot
        let i_state = StateVector::from_amplitudes(vec![Amplitude::new(0.0, 1.0), c(0.0)]).unwrap();
        assert!(approx_eq(
            i_state.inner_product(&zero).unwrap(),
            Amplitude::new(0.0, -1.0)
        ));
    }

    #[test]
    fn fidelity_examples() {
        let one = StateVector::basis(1, 1).unwrap();
        let minus_one = StateVector::from_amplitudes(vec![c(0.0), c(-1.0)]).unwrap();
        let zero = StateVector::zero(1).unwrap();
        assert!((one.fidelity_up_to_phase(&minus_one).unwrap() - 1.0).abs() < TOLERANCE);
        assert!(one.fidelity_up_to_phase(&zero).unwrap().abs() < TOLERANCE);
        assert!((plus().fidelity_up_to_phase(&zero).unwrap() - 0.5).abs() < TOLERANCE);
    }

    #[test]
    fn measuring_eigenstates_is_deterministic() {
        let mut rng = RandomSource::from_seed(9);
        for _ in 0..100 {
            let (bit, post) = plus().measure_qubit(0, Basis::X, &mut rng).unwrap();
            assert!(!bit);
            assert!(post.approx_eq(&plus()));
        }
        let s01 = StateVector::basis(2, 1).unwrap();
        let (bit, post) = s01.measure_qubit(1, Basis::Z, &mut rng).unwrap();
        assert!(bit);
        assert!(post.approx_eq(&s01));
    }

    #[test]
    fn plus_in_z_is_a_fair_coin() {
        let trials = 10_000;
        let mut rng = RandomSource::from_seed(2024);
        let ones = (0..trials)
            .filter(|_| plus().measure_qubit(0, Basis::Z, &mut rng).unwrap().0)
            .count();
        let p = ones as f64 / trials as f64;
        let sigma = (0.25 / trials as f64).sqrt();
        assert!((p - 0.5).abs() <= 3.0 * sigma, "p = {p}");
    }

    #[test]
    fn measurement_frequencies_follow_born_rule() {
        let mut rng = RandomSource::from_seed(77);
        let trials = 10_000;
        for _ in 0..20 {
            let amps: Vec<Amplitude> = (0..8)
                .map(|_| Amplitude::new(rng.unit() - 0.5, rng.unit() - 0.5))
                .collect();
            let s = StateVector::normalized(amps).unwrap();
            let qubit = rng.below(3);
            let basis = if rng.bit() { Basis::X } else { Basis::Z };
            // Oracle: sum squared amplitudes directly (X basis via explicit rotation).
            let rotated = if basis == Basis::X {
                s.apply_gate(Gate::Hadamard, qubit).unwrap()
            } else {
                s.clone()
            };
            let mask = 1 << (2 - qubit);
            let expected: f64 = rotated
                .amplitudes()
                .iter()
                .enumerate()
                .filter(|(i, _)| i & mask != 0)
                .map(|(_, a)| a.norm_sqr())
                .sum();
            let ones = (0..trials)
                .filter(|_| s.measure_qubit(qubit, basis, &mut rng).unwrap().0)
                .count();
            let p = ones as f64 / trials as f64;
            let sigma = (expected * (1.0 - expected) / trials as f64).sqrt().max(1e-12);
            assert!((p - expected).abs() <= 3.0 * sigma + 1e-12, "p={p} expected={expected}");
        }
    }

    #[test]
    fn collapse_is_normalized_eigenstate() {
        let mut rng = RandomSource::from_seed(5);
        let s = StateVector::normalized(vec![c(0.6), c(0.0), c(0.0), c(0.8)]).unwrap();
        let (bit, post) = s.measure_qubit(0, Basis::Z, &mut rng).unwrap();
        let expect = StateVector::basis(2, if bit { 3 } else { 0 }).unwrap();
        assert!(post.approx_eq(&expect));
    }

    fn arb_state(max_qubits: usize) -> impl Strategy<Value = StateVector> {
        (1..=max_qubits).prop_flat_map(|q| {
            prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1 << q).prop_filter_map(
                "zero vector",
                |v| {
                    StateVector::normalized(
                        v.into_iter().map(|(r, i)| Amplitude::new(r, i)).collect(),
                    )
                    .ok()
                },
            )
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn gates_preserve_norm(s in arb_state(4), g in 0usize..5, q in 0usize..4) {
            let q = q % s.qubit_count();
            let out = s.apply_gate(Gate::ALL[g], q).unwrap();
            prop_assert!((out.norm_sqr() - 1.0).abs() <= TOLERANCE);
        }

        #[test]
        fn hadamard_is_an_involution(s in arb_state(4), q in 0usize..4) {
            let q = q % s.qubit_count();
            let out = s.apply_gate(Gate::Hadamard, q).unwrap().apply_gate(Gate::Hadamard, q).unwrap();
            prop_assert!(out.approx_eq(&s));
        }

        #[test]
        fn hadamard_sandwich_of_isy_is_negated_isy(s in arb_state(3), q in 0usize..3) {
            let q = q % s.qubit_count();
            let sandwiched = s
                .apply_gate(Gate::Hadamard, q).unwrap()
                .apply_gate(Gate::ISigmaY, q).unwrap()
                .apply_gate(Gate::Hadamard, q).unwrap();
            let direct = s.apply_gate(Gate::ISigmaY, q).unwrap();
            prop_assert!((sandwiched.fidelity_up_to_phase(&direct).unwrap() - 1.0).abs() <= TOLERANCE);
            let amps: Vec<Amplitude> = direct.amplitudes().iter().map(|a| -a).collect();
            prop_assert!(sandwiched.approx_eq(&StateVector::from_amplitudes(amps).unwrap()));
        }
    }
}
