use super::{Adversary, AdversaryError, Briefing, Extraction};
use crate::channel::{ChannelHook, PartyId, QuantumMemory, QubitRef, RegisterId};
use crate::cluster::{make_cluster_state, ClusterParams, ClusterStateId, TransitionTable};
use crate::keys::BitString;
use crate::povm::{ClusterDiscriminator, DiscriminationOutcome};
use crate::protocol::{PhotonState, ProtocolError, ProtocolKind};
use crate::qcore::RandomSource;

/// Which parties collude, and the key they want everyone to end up with.
#[derive(Debug, Clone, PartialEq)]
pub struct CollusionPlan {
    parties: usize,
    colluders: Vec<PartyId>,
    target: BitString,
}

impl CollusionPlan {
    /// The antipodal coalition anchored at `anchor`: a pair for even ring
    /// sizes, a triple for odd ones.
    pub fn antipodal(parties: usize, anchor: PartyId, target: BitString) -> Result<Self, AdversaryError> {
        let even = parties.is_multiple_of(2);
        let min = if even { 4 } else { 3 };
        if parties < min {
            return Err(AdversaryError::TooFewParties { parties, min });
        }
        // odd N: (N−1)/2 and (N+1)/2 steps from the anchor
        let offsets: &[usize] = if even {
            &[0, parties / 2]
        } else {
            &[0, parties / 2, parties / 2 + 1]
        };
        let mut colluders: Vec<PartyId> = offsets.iter().map(|&o| anchor.offset(o, parties)).collect();
        colluders.sort();
        Ok(Self {
            parties,
            colluders,
            target,
        })
    }

    /// Accepts an explicit coalition only if it matches the antipodal pattern
    /// for some anchor.
    pub fn new(parties: usize, colluders: &[PartyId], target: BitString) -> Result<Self, AdversaryError> {
        let mut wanted: Vec<PartyId> = colluders.to_vec();
        wanted.sort();
        wanted.dedup();
        let mismatch = || AdversaryError::PatternMismatch {
            colluders: colluders.iter().map(|p| p.0 + 1).collect(),
            parties,
        };
        if wanted.len() != colluders.len() || wanted.iter().any(|p| p.0 >= parties) {
            return Err(mismatch());
        }
        for &anchor in &wanted {
            let plan = Self::antipodal(parties, anchor, target.clone())?;
            if plan.colluders == wanted {
                return Ok(plan);
            }
        }
        Err(mismatch())
    }

    pub fn parties(&self) -> usize {
        self.parties
    }

    pub fn colluders(&self) -> &[PartyId] {
        &self.colluders
    }

    pub fn target(&self) -> &BitString {
        &self.target
    }
}

/// Insider coalition that reroutes partner-owned sequences to their owner,
/// reads off the honest keys applied so far, and has one insider per honest
/// owner encode a correction instead of its own key.
#[derive(Debug, Clone)]
pub struct Collusion {
    plan: CollusionPlan,
    expects: ProtocolKind,
    key_bits: usize,
    own_keys: Vec<(PartyId, BitString)>,
    preparations: Vec<(PartyId, Vec<PhotonState>)>,
    extractions: Vec<Extraction>,
}

pub fn collusion_attack_original(plan: CollusionPlan) -> Collusion {
    Collusion::new(plan, ProtocolKind::Original)
}

pub fn collusion_attack_improved(plan: CollusionPlan) -> Collusion {
    Collusion::new(plan, ProtocolKind::Improved)
}

impl Collusion {
    fn new(plan: CollusionPlan, expects: ProtocolKind) -> Self {
        Self {
            plan,
            expects,
            key_bits: 0,
            own_keys: Vec::new(),
            preparations: Vec::new(),
            extractions: Vec::new(),
        }
    }

    pub fn plan(&self) -> &CollusionPlan {
        &self.plan
    }

    fn is_insider(&self, p: PartyId) -> bool {
        self.plan.colluders.contains(&p)
    }

    fn own_key(&self, p: PartyId) -> &BitString {
        &self
            .own_keys
            .iter()
            .find(|(q, _)| *q == p)
            .expect("briefed on every insider")
            .1
    }

    /// Parties that have encoded `owner`'s sequence when it reaches its
    /// receiver in `round`.
    fn encoders_before(&self, owner: PartyId, round: usize) -> Vec<PartyId> {
        (1..round).map(|k| owner.offset(k, self.plan.parties)).collect()
    }

    /// The insider encoding last on `owner`'s sequence.
    fn corrector(&self, owner: PartyId) -> PartyId {
        let n = self.plan.parties;
        *self
            .plan
            .colluders
            .iter()
            .max_by_key(|c| owner.distance_to(**c, n))
            .expect("non-empty coalition")
    }

    /// XOR of every honest key, as far as the extractions reveal it.
    fn honest_xor(&self) -> Vec<Option<bool>> {
        let mut acc = vec![Some(false); self.key_bits];
        for ex in &self.extractions {
            for (slot, bit) in acc.iter_mut().zip(&ex.bits) {
                *slot = match (*slot, bit) {
                    (Some(a), Some(b)) => Some(a ^ b),
                    _ => None,
                };
            }
        }
        acc
    }
}

impl ChannelHook for Collusion {}

impl Adversary for Collusion {
    fn label(&self) -> &'static str {
        match self.expects {
            ProtocolKind::Original => "collusion-original",
            ProtocolKind::Improved => "collusion-improved",
        }
    }

    fn insiders(&self) -> Vec<PartyId> {
        self.plan.colluders.clone()
    }

    fn enlist(&mut self, briefing: &Briefing) -> Result<(), AdversaryError> {
        if briefing.parties != self.plan.parties {
            return Err(AdversaryError::PatternMismatch {
                colluders: self.plan.colluders.iter().map(|p| p.0 + 1).collect(),
                parties: briefing.parties,
            });
        }
        if self.plan.target.len() != briefing.key_bits {
            return Err(AdversaryError::TargetLength {
                got: self.plan.target.len(),
                expected: briefing.key_bits,
            });
        }
        self.expects = briefing.kind;
        self.key_bits = briefing.key_bits;
        self.own_keys = briefing.insider_keys.clone();
        self.preparations = briefing.insider_preparations.clone();
        self.extractions.clear();
        Ok(())
    }

    fn detour(&mut self, holder: PartyId, owner: PartyId, round: usize) -> Option<PartyId> {
        if holder == owner || round >= self.plan.parties {
            return None;
        }
        if !self.is_insider(holder) || !self.is_insider(owner) {
            return None;
        }
        let encoders = self.encoders_before(owner, round);
        let all_honest = !encoders.is_empty() && encoders.iter().all(|p| !self.is_insider(*p));
        all_honest.then_some(owner)
    }

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
        let params: ClusterParams = *table.params();
        let mut bits = Vec::with_capacity(4 * registers.len());
        for &register in registers {
            match memory.discriminate(register, discriminator, rng)? {
                DiscriminationOutcome::Conclusive(id) => {
                    let nibble = table.decode_nibble(ClusterStateId::INITIAL, id);
                    bits.extend(nibble.bits().map(Some));
                    memory.prepare(register, make_cluster_state(&params, id));
                }
                DiscriminationOutcome::Inconclusive => bits.extend([None; 4]),
            }
        }
        self.extractions.push(Extraction {
            owner,
            encoders: self.encoders_before(owner, round),
            bits,
        });
        Ok(())
    }

    fn inspect_photons(
        &mut self,
        owner: PartyId,
        round: usize,
        photons: &[QubitRef],
        memory: &mut QuantumMemory,
        rng: &mut RandomSource,
    ) -> Result<(), ProtocolError> {
        let prep = self
            .preparations
            .iter()
            .find(|(p, _)| *p == owner)
            .map(|(_, prep)| prep.clone())
            .ok_or_else(|| ProtocolError::Adversary(format!("no preparation record for {owner}")))?;
        let mut bits = Vec::with_capacity(photons.len());
        for (&photon, st) in photons.iter().zip(&prep) {
            let outcome = memory.measure(photon, st.basis, rng)?;
            bits.push(Some(outcome != st.bit));
        }
        self.extractions.push(Extraction {
            owner,
            encoders: self.encoders_before(owner, round),
            bits,
        });
        Ok(())
    }

    fn substitute_key(&mut self, encoder: PartyId, owner: PartyId, _round: usize) -> Option<BitString> {
        if self.is_insider(owner) || self.corrector(owner) != encoder {
            return None;
        }
        let honest = self.honest_xor();
        let mut bits: Vec<bool> = self
            .plan
            .target
            .bits()
            .iter()
            .zip(&honest)
            .map(|(&t, h)| t ^ h.unwrap_or(false))
            .collect();
        for &c in &self.plan.colluders {
            if c != encoder {
                for (b, k) in bits.iter_mut().zip(self.own_key(c).bits()) {
                    *b ^= k;
                }
            }
        }
        Some(BitString::new(bits))
    }

    fn invalid_positions(&self, owner: PartyId) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .extractions
            .iter()
            .filter(|ex| ex.owner == owner)
            .flat_map(|ex| {
                ex.bits
                    .chunks(4)
                    .enumerate()
                    .filter(|(_, c)| c.iter().any(Option::is_none))
                    .map(|(p, _)| p)
                    .collect::<Vec<_>>()
            })
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    fn final_key(&self, party: PartyId, discarded: &[usize]) -> Option<BitString> {
        self.is_insider(party).then(|| match self.expects {
            ProtocolKind::Original => self.plan.target.without_nibbles(discarded),
            ProtocolKind::Improved => self.plan.target.clone(),
        })
    }

    fn extractions(&self) -> Vec<Extraction> {
        self.extractions.clone()
    }

    fn target_key(&self) -> Option<&BitString> {
        Some(&self.plan.target)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(v: &[usize]) -> Vec<PartyId> {
        v.iter().map(|&i| PartyId(i)).collect()
    }

    #[test]
    fn antipodal_patterns() {
        let t = BitString::zeros(4);
        let p = CollusionPlan::antipodal(4, PartyId(0), t.clone()).unwrap();
        assert_eq!(p.colluders(), ids(&[0, 2]).as_slice());
        let p = CollusionPlan::antipodal(5, PartyId(0), t.clone()).unwrap();
        assert_eq!(p.colluders(), ids(&[0, 2, 3]).as_slice());
        let p = CollusionPlan::antipodal(6, PartyId(4), t.clone()).unwrap();
        assert_eq!(p.colluders(), ids(&[1, 4]).as_slice());
        assert!(matches!(
            CollusionPlan::antipodal(2, PartyId(0), t),
            Err(AdversaryError::TooFewParties { .. })
        ));
    }

    #[test]
    fn explicit_plans_are_checked() {
        let t = BitString::zeros(4);
        assert!(CollusionPlan::new(4, &ids(&[2, 0]), t.clone()).is_ok());
        assert!(CollusionPlan::new(6, &ids(&[1, 4]), t.clone()).is_ok());
        assert!(CollusionPlan::new(5, &ids(&[4, 1, 2]), t.clone()).is_ok());
        for bad in [&[0, 1][..], &[0, 0], &[0, 2, 3], &[0, 9]] {
            assert!(matches!(
                CollusionPlan::new(4, &ids(bad), t.clone()),
                Err(AdversaryError::PatternMismatch { .. })
            ));
        }
    }

    #[test]
    fn corrector_is_the_last_insider_encoder() {
        let plan = CollusionPlan::antipodal(6, PartyId(0), BitString::zeros(4)).unwrap();
        let c = collusion_attack_original(plan);
        assert_eq!(c.corrector(PartyId(1)), PartyId(0));
        assert_eq!(c.corrector(PartyId(2)), PartyId(0));
        assert_eq!(c.corrector(PartyId(4)), PartyId(3));
        assert_eq!(c.corrector(PartyId(5)), PartyId(3));
    }

    #[test]
    fn detours_happen_once_per_honest_arc() {
        let plan = CollusionPlan::antipodal(5, PartyId(0), BitString::zeros(4)).unwrap();
        let mut c = collusion_attack_original(plan);
        let mut hits = Vec::new();
        for round in 1..5 {
            for owner in 0..5 {
                let holder = PartyId(owner).offset(round, 5);
                if let Some(to) = c.detour(holder, PartyId(owner), round) {
                    hits.push((holder.0, to.0, round));
                }
            }
        }
        assert_eq!(hits, vec![(2, 0, 2), (0, 3, 2)]);
    }
}
