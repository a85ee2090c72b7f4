use super::{
    resolve_adversary, PhotonState, ProtocolConfig, ProtocolError, ProtocolKind, RunOutcome,
    Session,
};
use crate::adversary::{Adversary, Briefing, Passive};
use crate::channel::{ClassicalMessage, MessageKind, PartyId, Photon, PhotonSequence, Recipient};
use crate::keys::BitString;
use crate::qcore::{Gate, RandomSource, TOLERANCE};

/// Runs the single-photon protocol with an RNG seeded from `config.seed`.
pub fn run_improved(
    config: &ProtocolConfig,
    adversary: Option<&mut (dyn Adversary + '_)>,
) -> Result<RunOutcome, ProtocolError> {
    let mut rng = RandomSource::from_seed(config.seed);
    run_improved_with(config, adversary, &mut rng)
}

pub fn run_improved_with(
    config: &ProtocolConfig,
    adversary: Option<&mut (dyn Adversary + '_)>,
    rng: &mut RandomSource,
) -> Result<RunOutcome, ProtocolError> {
    config.validate(ProtocolKind::Improved)?;
    let n = config.participants;
    let len = config.photons;
    let keys = config.draw_keys(ProtocolKind::Improved, rng);

    let mut passive = Passive;
    let (adversary, scored) = resolve_adversary(adversary, &mut passive);
    let mut s = Session::new(n, config.decoys_per_hop, config.error_threshold, rng, adversary);

    let preparations: Vec<Vec<PhotonState>> = (0..n)
        .map(|_| (0..len).map(|_| PhotonState::random(s.rng)).collect())
        .collect();
    let mut sequences: Vec<Option<PhotonSequence>> = preparations
        .iter()
        .enumerate()
        .map(|(owner, prep)| {
            let photons = prep
                .iter()
                .map(|st| Photon::payload(s.memory.allocate_photon(st.vector())))
                .collect();
            Some(PhotonSequence::new(photons, PartyId(owner), 0))
        })
        .collect();
    // Fixed photon handles per owner; the sequence order never changes once
    // decoys are stripped.
    let home: Vec<Vec<_>> = sequences
        .iter()
        .map(|seq| seq.as_ref().expect("prepared").qubits().collect())
        .collect();

    let insiders = s.adversary.insiders();
    s.adversary
        .enlist(&Briefing {
            kind: ProtocolKind::Improved,
            parties: n,
            key_bits: len,
            params: config.params,
            insider_keys: insiders.iter().map(|p| (*p, keys[p.0].clone())).collect(),
            insider_preparations: insiders
                .iter()
                .map(|p| (*p, preparations[p.0].clone()))
                .collect(),
        })
        .map_err(|e| ProtocolError::Adversary(e.to_string()))?;

    // shielded[owner][encoder] = photon positions that encoder hit with H
    let mut shielded: Vec<Vec<Vec<usize>>> = vec![vec![Vec::new(); n]; n];
    let mut applied: Vec<BitString> = vec![BitString::zeros(len); n];

    'ring: for round in 1..=n {
        for owner in (0..n).map(PartyId) {
            let holder = owner.offset(round - 1, n);
            let receiver = owner.offset(round, n);
            let mut seq = sequences[owner.0].take().expect("sequence in flight");
            seq.round = round;
            let Some(mut seq) = s.hop(holder, receiver, seq)? else {
                break 'ring;
            };
            if round == n {
                sequences[owner.0] = Some(seq);
                continue;
            }
            if let Some(detour) = s.adversary.detour(receiver, owner, round) {
                let Some(back) = s.hop(receiver, detour, seq)? else {
                    break 'ring;
                };
                let photons: Vec<_> = back.qubits().collect();
                s.adversary
                    .inspect_photons(detour, round, &photons, &mut s.memory, s.rng)?;
                let Some(returned) = s.hop(detour, receiver, back)? else {
                    break 'ring;
                };
                seq = returned;
            }
            let key = s
                .adversary
                .substitute_key(receiver, owner, round)
                .unwrap_or_else(|| keys[receiver.0].clone());
            if seq.len() != len {
                return Err(ProtocolError::Invariant(format!(
                    "{receiver} holds {} payload photons, expected {len}",
                    seq.len()
                )));
            }
            applied[owner.0] = &applied[owner.0] ^ &key;
            for (j, photon) in seq.photons.iter().enumerate() {
                if key.get(j) {
                    s.memory.apply(photon.qubit(), Gate::ISigmaY)?;
                }
                if config.hadamard_shield && s.rng.bit() {
                    s.memory.apply(photon.qubit(), Gate::Hadamard)?;
                    shielded[owner.0][receiver.0].push(j);
                }
            }
            sequences[owner.0] = Some(seq);
        }
    }
    if s.abort.is_some() {
        return Ok(s.finish(ProtocolKind::Improved, keys, Vec::new(), Vec::new(), scored));
    }

    // Every check has passed: all encoders now reveal where they applied H.
    for (owner, per_encoder) in shielded.iter().enumerate() {
        for (encoder, positions) in per_encoder.iter().enumerate() {
            if encoder == owner {
                continue;
            }
            s.ring.send_classical(ClassicalMessage {
                sender: PartyId(encoder),
                recipient: Recipient::Broadcast,
                kind: MessageKind::HPositions,
                about: PartyId(owner),
                round: n,
                payload: positions.clone(),
            })?;
        }
    }

    let mut final_keys = Vec::with_capacity(n);
    for owner in (0..n).map(PartyId) {
        let announced = s.ring.drain(owner, MessageKind::HPositions);
        if insiders.contains(&owner) {
            final_keys.push(s.adversary.final_key(owner, &[]));
            continue;
        }
        let mut parity = vec![false; len];
        for msg in announced.iter().filter(|m| m.about == owner) {
            for &j in &msg.payload {
                parity[j] ^= true;
            }
        }
        let mut m = Vec::with_capacity(len);
        for (j, &photon) in home[owner.0].iter().enumerate() {
            if parity[j] {
                s.memory.apply(photon, Gate::Hadamard)?;
            }
            let prep = preparations[owner.0][j];
            if config.audit_phases && !scored {
                audit_phase(&s, photon, prep, applied[owner.0].get(j))?;
            }
            let outcome = s.memory.measure(photon, prep.basis, s.rng)?;
            m.push(outcome != prep.bit);
        }
        final_keys.push(Some(&keys[owner.0] ^ &BitString::new(m)));
    }
    Ok(s.finish(ProtocolKind::Improved, keys, final_keys, Vec::new(), scored))
}

/// After undoing the shield, a photon must equal `(iσy)^flips |prep⟩` up to a
/// global phase.
fn audit_phase(
    s: &Session<'_>,
    photon: crate::channel::QubitRef,
    prep: PhotonState,
    flipped: bool,
) -> Result<(), ProtocolError> {
    let mut expected = prep.vector();
    if flipped {
        expected.apply_gate_in_place(Gate::ISigmaY, 0)?;
    }
    let f = s.memory.peek(photon.register).fidelity_up_to_phase(&expected)?;
    if (f - 1.0).abs() > TOLERANCE {
        return Err(ProtocolError::Invariant(format!(
            "photon fidelity {f} after shield removal"
        )));
    }
    Ok(())
}
