use std::collections::BTreeSet;

use super::{resolve_adversary, ProtocolConfig, ProtocolError, ProtocolKind, RunOutcome, Session};
use crate::adversary::{Adversary, Briefing, Passive};
use crate::channel::{
    ClassicalMessage, MessageKind, PartyId, Photon, PhotonSequence, QubitRef, Recipient,
    RegisterId,
};
use crate::cluster::{
    make_cluster_state, nibble_to_oppair, ClusterStateId, KeyNibble, TransitionTable, PARTICLE_2,
    PARTICLE_4,
};
use crate::keys::BitString;
use crate::povm::{ClusterDiscriminator, DiscriminationOutcome};
use crate::qcore::RandomSource;

/// Runs the cluster-state protocol with an RNG seeded from `config.seed`.
pub fn run_original(
    config: &ProtocolConfig,
    adversary: Option<&mut (dyn Adversary + '_)>,
) -> Result<RunOutcome, ProtocolError> {
    let mut rng = RandomSource::from_seed(config.seed);
    run_original_with(config, adversary, &mut rng)
}

pub fn run_original_with(
    config: &ProtocolConfig,
    adversary: Option<&mut (dyn Adversary + '_)>,
    rng: &mut RandomSource,
) -> Result<RunOutcome, ProtocolError> {
    config.validate(ProtocolKind::Original)?;
    let n = config.participants;
    let clusters = config.clusters;
    let table = TransitionTable::build(&config.params)?;
    let discriminator = ClusterDiscriminator::new(&config.params)?;
    let keys = config.draw_keys(ProtocolKind::Original, rng);

    let mut passive = Passive;
    let (adversary, scored) = resolve_adversary(adversary, &mut passive);
    let mut s = Session::new(n, config.decoys_per_hop, config.error_threshold, rng, adversary);

    // Every party prepares its clusters in |Ψ1⟩, keeps particles 1 and 3, and
    // sends particles 2 and 4 (all of S2, then all of S4).
    let initial = make_cluster_state(&config.params, ClusterStateId::INITIAL);
    let registers: Vec<Vec<RegisterId>> = (0..n)
        .map(|_| (0..clusters).map(|_| s.memory.allocate(initial.clone())).collect())
        .collect();
    let mut sequences: Vec<Option<PhotonSequence>> = registers
        .iter()
        .enumerate()
        .map(|(owner, regs)| {
            let photons = [PARTICLE_2, PARTICLE_4]
                .iter()
                .flat_map(|&qubit| {
                    regs.iter()
                        .map(move |&register| Photon::payload(QubitRef { register, qubit }))
                })
                .collect();
            Some(PhotonSequence::new(photons, PartyId(owner), 0))
        })
        .collect();

    let insiders = s.adversary.insiders();
    s.adversary
        .enlist(&Briefing {
            kind: ProtocolKind::Original,
            parties: n,
            key_bits: 4 * clusters,
            params: config.params,
            insider_keys: insiders.iter().map(|p| (*p, keys[p.0].clone())).collect(),
            insider_preparations: Vec::new(),
        })
        .map_err(|e| ProtocolError::Adversary(e.to_string()))?;

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
                s.adversary.inspect_clusters(
                    detour,
                    round,
                    &registers[owner.0],
                    &mut s.memory,
                    &discriminator,
                    &table,
                    s.rng,
                )?;
                let Some(returned) = s.hop(detour, receiver, back)? else {
                    break 'ring;
                };
                seq = returned;
            }
            let key = s
                .adversary
                .substitute_key(receiver, owner, round)
                .unwrap_or_else(|| keys[receiver.0].clone());
            if seq.len() != 2 * clusters {
                return Err(ProtocolError::Invariant(format!(
                    "{receiver} holds {} payload photons, expected {}",
                    seq.len(),
                    2 * clusters
                )));
            }
            for p in 0..clusters {
                let pair = nibble_to_oppair(key.nibble(p));
                s.memory.apply(seq.photons[p].qubit(), pair.op2)?;
                s.memory.apply(seq.photons[clusters + p].qubit(), pair.op4)?;
            }
            sequences[owner.0] = Some(seq);
        }
    }
    if s.abort.is_some() {
        return Ok(s.finish(ProtocolKind::Original, keys, Vec::new(), Vec::new(), scored));
    }

    // Readout: each owner identifies its clusters and announces inconclusive
    // positions; those positions are dropped from everyone's key.
    let mut decoded: Vec<Option<Vec<KeyNibble>>> = vec![None; n];
    let mut discarded = BTreeSet::new();
    for owner in (0..n).map(PartyId) {
        let invalid = if insiders.contains(&owner) {
            s.adversary.invalid_positions(owner)
        } else {
            let mut nibbles = Vec::with_capacity(clusters);
            let mut invalid = Vec::new();
            for (p, &register) in registers[owner.0].iter().enumerate() {
                match s.memory.discriminate(register, &discriminator, s.rng)? {
                    DiscriminationOutcome::Conclusive(id) => {
                        nibbles.push(table.decode_nibble(ClusterStateId::INITIAL, id))
                    }
                    DiscriminationOutcome::Inconclusive => {
                        nibbles.push(KeyNibble::ZERO);
                        invalid.push(p);
                    }
                }
            }
            decoded[owner.0] = Some(nibbles);
            invalid
        };
        s.ring.send_classical(ClassicalMessage {
            sender: owner,
            recipient: Recipient::Broadcast,
            kind: MessageKind::InvalidPositions,
            about: owner,
            round: n,
            payload: invalid.clone(),
        })?;
        discarded.extend(invalid);
    }
    let discarded: Vec<usize> = discarded.into_iter().collect();

    let final_keys = (0..n)
        .map(|i| match &decoded[i] {
            Some(m) => Some((&keys[i] ^ &BitString::from_nibbles(m)).without_nibbles(&discarded)),
            None => s.adversary.final_key(PartyId(i), &discarded),
        })
        .collect();
    Ok(s.finish(ProtocolKind::Original, keys, final_keys, discarded, scored))
}
