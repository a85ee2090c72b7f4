use qka_sim::adversary::{
    collusion_attack_improved, collusion_attack_original, intercept_resend_eve, Adversary,
    AdversaryError, Briefing, CollusionPlan, Passive,
};
use qka_sim::channel::{ChannelHook, MessageKind, PartyId, TranscriptEvent};
use qka_sim::cluster::ClusterParams;
use qka_sim::keys::BitString;
use qka_sim::protocol::{run_improved, run_improved_with, run_original, ProtocolConfig, ProtocolKind};
use qka_sim::qcore::RandomSource;

fn keys(hex: &[&str], bits: usize) -> Vec<BitString> {
    hex.iter().map(|h| BitString::from_hex(h, bits).unwrap()).collect()
}

#[test]
fn four_party_worked_example() {
    let private = keys(&["1234", "abcd", "0f0f", "9999"], 16);
    let config = ProtocolConfig {
        participants: 4,
        clusters: 4,
        seed: 12,
        private_keys: Some(private.clone()),
        ..Default::default()
    };
    let target = BitString::from_hex("c0de", 16).unwrap();
    let plan = CollusionPlan::new(4, &[PartyId(0), PartyId(2)], target.clone()).unwrap();
    let mut attack = collusion_attack_original(plan);
    let out = run_original(&config, Some(&mut attack)).unwrap();

    for party in [1, 3] {
        assert_eq!(out.final_keys[party].as_ref(), Some(&target), "P{}", party + 1);
    }
    assert_eq!(out.detection_count(), 0);
    let m = out.adversary.unwrap();
    assert_eq!(m.manipulation_success, Some(true));
    assert_eq!(m.extraction_accuracy, Some(1.0));

    // P1 learned k2 from its own clusters, P3 learned k4.
    let ex = attack.extractions();
    assert_eq!(ex.len(), 2);
    let learned = |owner: usize| {
        let e = ex.iter().find(|e| e.owner == PartyId(owner)).unwrap();
        BitString::new(e.bits.iter().map(|b| b.unwrap()).collect())
    };
    assert_eq!(learned(0), private[1]);
    assert_eq!(learned(2), private[3]);

    // The rerouting shows up as P3 -> P1 -> P3 and P1 -> P3 -> P1 legs in
    // round 2.
    let legs: Vec<(usize, usize, usize)> = out
        .transcript
        .iter()
        .filter_map(|e| match e {
            TranscriptEvent::Quantum { from, to, origin, round: 2, .. } => Some((from.0, to.0, origin.0)),
            _ => None,
        })
        .collect();
    for leg in [(2, 0, 0), (0, 2, 0), (0, 2, 2), (2, 0, 2)] {
        assert!(legs.contains(&leg), "missing leg {leg:?} in {legs:?}");
    }
}

#[test]
fn colluders_pass_every_decoy_check_they_take_part_in() {
    for n in [4, 5, 6, 7, 8] {
        let config = ProtocolConfig {
            participants: n,
            clusters: 2,
            seed: n as u64,
            ..Default::default()
        };
        let plan = CollusionPlan::antipodal(n, PartyId(1), BitString::zeros(8)).unwrap();
        let mut attack = collusion_attack_original(plan);
        let out = run_original(&config, Some(&mut attack)).unwrap();
        assert!(out.abort.is_none());
        assert!(out.detections.iter().all(|d| d.mismatches == 0 && d.decoys == 16));
        assert_eq!(out.adversary.unwrap().manipulation_success, Some(true), "N={n}");
    }
}

#[test]
fn collusion_survives_inconclusive_readouts() {
    let mut discarded = 0;
    for seed in 0..30 {
        let config = ProtocolConfig {
            participants: 6,
            clusters: 8,
            params: ClusterParams::non_uniform(),
            seed,
            ..Default::default()
        };
        let plan = CollusionPlan::antipodal(6, PartyId(0), BitString::from_hex("deadbeef", 32).unwrap()).unwrap();
        let mut attack = collusion_attack_original(plan);
        let out = run_original(&config, Some(&mut attack)).unwrap();
        assert_eq!(out.adversary.unwrap().manipulation_success, Some(true));
        discarded += out.discarded_positions.len();
    }
    assert!(discarded > 0);
}

#[test]
fn honest_outputs_do_not_depend_on_who_holds_which_key() {
    let private = keys(&["0f", "f0", "3c"], 8);
    let config = ProtocolConfig {
        participants: 3,
        clusters: 2,
        private_keys: Some(private),
        ..Default::default()
    };
    let out = run_original(&config, None).unwrap();
    for k in &out.final_keys {
        assert_eq!(k.as_ref().unwrap().to_hex(), "c3");
    }
}

#[test]
fn zero_fraction_eve_changes_nothing() {
    for kind in [ProtocolKind::Original, ProtocolKind::Improved] {
        let config = ProtocolConfig {
            participants: 5,
            clusters: 4,
            photons: 16,
            seed: 21,
            ..Default::default()
        };
        let mut eve = intercept_resend_eve(0.0).unwrap();
        let (plain, watched) = match kind {
            ProtocolKind::Original => (run_original(&config, None), run_original(&config, Some(&mut eve))),
            ProtocolKind::Improved => (run_improved(&config, None), run_improved(&config, Some(&mut eve))),
        };
        let (plain, watched) = (plain.unwrap(), watched.unwrap());
        assert_eq!(plain.final_keys, watched.final_keys);
        assert_eq!(plain.transcript, watched.transcript);
        assert!(!watched.adversary.unwrap().detected);
    }
}

#[test]
fn eve_is_caught_and_the_run_aborts() {
    let config = ProtocolConfig {
        participants: 4,
        photons: 16,
        seed: 2,
        ..Default::default()
    };
    let mut eve = intercept_resend_eve(1.0).unwrap();
    let out = run_improved(&config, Some(&mut eve)).unwrap();
    let abort = out.abort.expect("a full intercept-resend is noticed");
    assert!(abort.error_rate > 0.0);
    assert!(out.final_keys.is_empty() || out.final_keys.iter().all(Option::is_none));
    assert!(out.adversary.unwrap().detected);
}

#[test]
fn a_tolerant_threshold_lets_light_eavesdropping_through() {
    let config = ProtocolConfig {
        participants: 4,
        clusters: 4,
        decoys_per_hop: 32,
        error_threshold: 0.5,
        seed: 9,
        ..Default::default()
    };
    let mut eve = intercept_resend_eve(0.05).unwrap();
    let out = run_original(&config, Some(&mut eve)).unwrap();
    assert!(out.abort.is_none());
    assert_eq!(out.detections.len(), 16);
}

#[test]
fn improved_manipulation_falls_with_key_length() {
    let rate = |photons: usize| {
        let wins = (0..400u64)
            .filter(|&trial| {
                let mut rng = RandomSource::for_trial(55, trial);
                let config = ProtocolConfig {
                    participants: 4,
                    photons,
                    ..Default::default()
                };
                let target = BitString::random(photons, &mut rng);
                let plan = CollusionPlan::antipodal(4, PartyId(0), target).unwrap();
                let mut attack = collusion_attack_improved(plan);
                let out = run_improved_with(&config, Some(&mut attack), &mut rng).unwrap();
                out.adversary.unwrap().manipulation_success == Some(true)
            })
            .count();
        wins as f64 / 400.0
    };
    let rates: Vec<f64> = [1, 2, 4, 8].into_iter().map(rate).collect();
    for w in rates.windows(2) {
        assert!(w[1] <= w[0] + 0.05, "{rates:?}");
    }
    assert!(rates[0] > 0.4 && rates[3] < 0.2, "{rates:?}");
}

/// Records what the protocol tells an adversary.
struct Spy {
    insiders: Vec<PartyId>,
    briefing: Option<Briefing>,
}

impl ChannelHook for Spy {}

impl Adversary for Spy {
    fn label(&self) -> &'static str {
        "spy"
    }

    fn insiders(&self) -> Vec<PartyId> {
        self.insiders.clone()
    }

    fn enlist(&mut self, briefing: &Briefing) -> Result<(), AdversaryError> {
        self.briefing = Some(briefing.clone());
        Ok(())
    }
}

#[test]
fn adversaries_are_briefed_only_on_their_own_parties() {
    let mut spy = Spy {
        insiders: vec![PartyId(1)],
        briefing: None,
    };
    let config = ProtocolConfig {
        participants: 4,
        photons: 8,
        ..Default::default()
    };
    let out = run_improved(&config, Some(&mut spy)).unwrap();
    let b = spy.briefing.unwrap();
    assert_eq!(b.insider_keys.len(), 1);
    assert_eq!(b.insider_keys[0], (PartyId(1), out.private_keys[1].clone()));
    assert_eq!(b.insider_preparations.len(), 1);
    assert_eq!(b.insider_preparations[0].0, PartyId(1));
    // The spy reports no final key of its own.
    assert_eq!(out.final_keys[1], None);
}

#[test]
fn classical_messages_never_carry_key_material() {
    let config = ProtocolConfig {
        participants: 4,
        photons: 16,
        seed: 77,
        ..Default::default()
    };
    let out = run_improved(&config, None).unwrap();
    for event in &out.transcript {
        if let TranscriptEvent::Classical(msg) = event {
            match msg.kind {
                MessageKind::DecoyBases | MessageKind::DecoyResults => {
                    assert!(msg.payload.iter().all(|&x| x <= 1));
                    assert_eq!(msg.payload.len(), 16);
                }
                MessageKind::DecoyPositions | MessageKind::HPositions => {
                    assert!(msg.payload.windows(2).all(|w| w[0] < w[1]));
                }
                MessageKind::Ack => assert!(msg.payload.is_empty()),
                MessageKind::InvalidPositions => unreachable!("original protocol only"),
            }
        }
    }
}

#[test]
fn passive_adversary_matches_no_adversary() {
    let config = ProtocolConfig {
        seed: 4,
        ..Default::default()
    };
    let a = run_original(&config, None).unwrap();
    let b = run_original(&config, Some(&mut Passive)).unwrap();
    assert_eq!(a.final_keys, b.final_keys);
    assert!(a.adversary.is_none());
    assert_eq!(b.adversary.unwrap().manipulation_success, None);
}
