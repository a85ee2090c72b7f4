//! Batch runner producing JSON reports, plus the text inspectors.

use std::fmt::Write as _;
use std::str::FromStr;
use std::time::{SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::Serialize;

use crate::adversary::{
    collusion_attack_improved, collusion_attack_original, intercept_resend_eve, Adversary,
    AdversaryMetrics, CollusionPlan,
};
use crate::channel::{PartyId, TranscriptEvent};
use crate::cluster::{ClusterParams, TransitionTable};
use crate::keys::BitString;
use crate::povm::{ClusterDiscriminator, FamilyReport, PovmError};
use crate::protocol::{
    run_improved_with, run_original_with, ConfigError, ProtocolConfig, ProtocolError,
    ProtocolKind, RunOutcome,
};
use crate::qcore::RandomSource;

pub const VERSION_TAG: &str = concat!("qka-sim/", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    HonestOriginal,
    HonestImproved,
    CollusionOriginal,
    CollusionImproved,
    EveOriginal,
    EveImproved,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 6] = [
        ScenarioKind::HonestOriginal,
        ScenarioKind::HonestImproved,
        ScenarioKind::CollusionOriginal,
        ScenarioKind::CollusionImproved,
        ScenarioKind::EveOriginal,
        ScenarioKind::EveImproved,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::HonestOriginal => "honest-original",
            ScenarioKind::HonestImproved => "honest-improved",
            ScenarioKind::CollusionOriginal => "collusion-original",
            ScenarioKind::CollusionImproved => "collusion-improved",
            ScenarioKind::EveOriginal => "eve-original",
            ScenarioKind::EveImproved => "eve-improved",
        }
    }

    pub fn protocol(self) -> ProtocolKind {
        match self {
            ScenarioKind::HonestOriginal | ScenarioKind::CollusionOriginal | ScenarioKind::EveOriginal => {
                ProtocolKind::Original
            }
            _ => ProtocolKind::Improved,
        }
    }

    pub fn is_collusion(self) -> bool {
        matches!(self, ScenarioKind::CollusionOriginal | ScenarioKind::CollusionImproved)
    }

    pub fn is_eve(self) -> bool {
        matches!(self, ScenarioKind::EveOriginal | ScenarioKind::EveImproved)
    }
}

impl FromStr for ScenarioKind {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| {
            let names: Vec<_> = Self::ALL.iter().map(|k| k.name()).collect();
            ConfigError::new("scenario", format!("unknown scenario {s:?}; expected one of {}", names.join(", ")))
        })
    }
}

/// Everything needed to reproduce a batch of trials.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioSpec {
    pub scenario: ScenarioKind,
    pub participants: usize,
    pub clusters: usize,
    pub photons: usize,
    pub decoys: usize,
    pub threshold: f64,
    pub params: [f64; 4],
    pub hadamard_shield: bool,
    pub trials: usize,
    pub seed: u64,
    /// Target key as hex; required for collusion scenarios, absent otherwise.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target_key: Option<String>,
    /// 1-based party anchoring the antipodal coalition.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub colluder_anchor: Option<usize>,
    /// Interception probability per photon; eve scenarios only (default 1).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eve_fraction: Option<f64>,
    pub transcript: bool,
}

impl ScenarioSpec {
    pub fn new(scenario: ScenarioKind) -> Self {
        let defaults = ProtocolConfig::default();
        Self {
            scenario,
            participants: defaults.participants,
            clusters: defaults.clusters,
            photons: defaults.photons,
            decoys: defaults.decoys_per_hop,
            threshold: defaults.error_threshold,
            params: defaults.params.coefficients(),
            hadamard_shield: true,
            trials: 10,
            seed: 0,
            target_key: None,
            colluder_anchor: None,
            eve_fraction: None,
            transcript: false,
        }
    }

    pub fn config(&self) -> Result<ProtocolConfig, ConfigError> {
        let [a, b, c, d] = self.params;
        let params = ClusterParams::new(a, b, c, d).map_err(|e| ConfigError::new("params", e.to_string()))?;
        let config = ProtocolConfig {
            participants: self.participants,
            clusters: self.clusters,
            photons: self.photons,
            decoys_per_hop: self.decoys,
            error_threshold: self.threshold,
            params,
            seed: self.seed,
            hadamard_shield: self.hadamard_shield,
            audit_phases: false,
            private_keys: None,
        };
        config.validate(self.scenario.protocol())?;
        Ok(config)
    }

    /// Checks every field; the error names the first offending one.
    pub fn validate(&self) -> Result<ProtocolConfig, ConfigError> {
        let config = self.config()?;
        if self.trials == 0 {
            return Err(ConfigError::new("trials", "need at least one trial"));
        }
        let kind = self.scenario;
        match (&self.target_key, kind.is_collusion()) {
            (None, true) => {
                return Err(ConfigError::new("target-key", "required for collusion scenarios"))
            }
            (Some(_), false) => {
                return Err(ConfigError::new("target-key", "only valid for collusion scenarios"))
            }
            _ => {}
        }
        if self.colluder_anchor.is_some() && !kind.is_collusion() {
            return Err(ConfigError::new("colluder-anchor", "only valid for collusion scenarios"));
        }
        if let Some(anchor) = self.colluder_anchor {
            if anchor == 0 || anchor > self.participants {
                return Err(ConfigError::new(
                    "colluder-anchor",
                    format!("must name a party in 1..={}", self.participants),
                ));
            }
        }
        if kind.is_collusion() {
            self.plan()?;
        }
        match (self.eve_fraction, kind.is_eve()) {
            (Some(_), false) => {
                return Err(ConfigError::new("eve-fraction", "only valid for eve scenarios"))
            }
            (Some(f), true) if !(0.0..=1.0).contains(&f) => {
                return Err(ConfigError::new("eve-fraction", format!("must lie in [0, 1], got {f}")))
            }
            _ => {}
        }
        Ok(config)
    }

    fn plan(&self) -> Result<CollusionPlan, ConfigError> {
        let hex = self.target_key.as_deref().unwrap_or_default();
        let bits = match self.scenario.protocol() {
            ProtocolKind::Original => 4 * self.clusters,
            ProtocolKind::Improved => self.photons,
        };
        let target = BitString::from_hex(hex, bits).map_err(|e| ConfigError::new("target-key", e.to_string()))?;
        let anchor = PartyId(self.colluder_anchor.unwrap_or(1) - 1);
        CollusionPlan::antipodal(self.participants, anchor, target)
            .map_err(|e| ConfigError::new("participants", e.to_string()))
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error(transparent)]
    Spec(#[from] ConfigError),
    #[error("trial {trial}: {source}")]
    Trial { trial: usize, source: ProtocolError },
}

impl ScenarioError {
    /// 1 for a rejected spec, 2 for anything that went wrong inside a run.
    pub fn exit_code(&self) -> i32 {
        match self {
            ScenarioError::Spec(_) => 1,
            ScenarioError::Trial {
                source: ProtocolError::Config(_),
                ..
            } => 1,
            ScenarioError::Trial { .. } => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialSummary {
    pub trial: usize,
    pub aborted: bool,
    pub agreement: bool,
    pub hops_checked: usize,
    pub hops_detected: usize,
    pub discarded_positions: Vec<usize>,
    /// Key held by the first honest party, hex.
    pub final_key: Option<String>,
    pub adversary: Option<AdversaryMetrics>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub transcript: Option<Vec<TranscriptEvent>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Aggregates {
    pub trials: usize,
    pub agreement_rate: f64,
    /// Fraction of trials with at least one decoy mismatch.
    pub detection_rate: f64,
    /// Fraction of checked hops with at least one decoy mismatch.
    pub hop_detection_rate: f64,
    pub abort_rate: f64,
    pub manipulation_success_rate: Option<f64>,
    pub extraction_accuracy_mean: Option<f64>,
    pub extraction_accuracy_stddev: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub version: &'static str,
    pub generated_at_unix: u64,
    pub seed: u64,
    pub spec: ScenarioSpec,
    pub aggregates: Aggregates,
    pub trials: Vec<TrialSummary>,
}

impl RunReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report types always serialize")
    }
}

fn build_adversary(spec: &ScenarioSpec) -> Result<Option<Box<dyn Adversary>>, ConfigError> {
    let adversary: Box<dyn Adversary> = match spec.scenario {
        ScenarioKind::HonestOriginal | ScenarioKind::HonestImproved => return Ok(None),
        ScenarioKind::CollusionOriginal => Box::new(collusion_attack_original(spec.plan()?)),
        ScenarioKind::CollusionImproved => Box::new(collusion_attack_improved(spec.plan()?)),
        ScenarioKind::EveOriginal | ScenarioKind::EveImproved => Box::new(
            intercept_resend_eve(spec.eve_fraction.unwrap_or(1.0))
                .map_err(|e| ConfigError::new("eve-fraction", e.to_string()))?,
        ),
    };
    Ok(Some(adversary))
}

/// Runs one trial with its own random stream derived from `(seed, trial)`.
pub fn run_trial(spec: &ScenarioSpec, config: &ProtocolConfig, trial: usize) -> Result<RunOutcome, ScenarioError> {
    let mut rng = RandomSource::for_trial(spec.seed, trial as u64);
    let mut adversary = build_adversary(spec)?;
    let adversary = adversary.as_deref_mut();
    let outcome = match spec.scenario.protocol() {
        ProtocolKind::Original => run_original_with(config, adversary, &mut rng),
        ProtocolKind::Improved => run_improved_with(config, adversary, &mut rng),
    };
    outcome.map_err(|source| ScenarioError::Trial { trial, source })
}

fn summarize(trial: usize, outcome: RunOutcome, insiders: &[PartyId], keep_transcript: bool) -> TrialSummary {
    let final_key = outcome
        .final_keys
        .iter()
        .enumerate()
        .find(|(i, _)| !insiders.contains(&PartyId(*i)))
        .and_then(|(_, k)| k.as_ref().map(BitString::to_hex));
    TrialSummary {
        trial,
        aborted: outcome.abort.is_some(),
        agreement: outcome.agreement(),
        hops_checked: outcome.detections.len(),
        hops_detected: outcome.detection_count(),
        discarded_positions: outcome.discarded_positions.clone(),
        final_key,
        adversary: outcome.adversary.clone(),
        transcript: keep_transcript.then_some(outcome.transcript),
    }
}

fn rate(hits: usize, total: usize) -> f64 {
    if total == 0 {
        0.0
    } else {
        hits as f64 / total as f64
    }
}

pub fn aggregate(trials: &[TrialSummary]) -> Aggregates {
    let n = trials.len();
    let count = |f: &dyn Fn(&TrialSummary) -> bool| trials.iter().filter(|t| f(t)).count();
    let hops: usize = trials.iter().map(|t| t.hops_checked).sum();
    let detected_hops: usize = trials.iter().map(|t| t.hops_detected).sum();
    let success: Vec<bool> = trials
        .iter()
        .filter_map(|t| t.adversary.as_ref()?.manipulation_success)
        .collect();
    let accuracy: Vec<f64> = trials
        .iter()
        .filter_map(|t| t.adversary.as_ref()?.extraction_accuracy)
        .collect();
    let (mean, stddev) = if accuracy.is_empty() {
        (None, None)
    } else {
        let m = accuracy.iter().sum::<f64>() / accuracy.len() as f64;
        let var = accuracy.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / accuracy.len() as f64;
        (Some(m), Some(var.sqrt()))
    };
    Aggregates {
        trials: n,
        agreement_rate: rate(count(&|t| t.agreement), n),
        detection_rate: rate(count(&|t| t.hops_detected > 0), n),
        hop_detection_rate: rate(detected_hops, hops),
        abort_rate: rate(count(&|t| t.aborted), n),
        manipulation_success_rate: (!success.is_empty())
            .then(|| rate(success.iter().filter(|s| **s).count(), success.len())),
        extraction_accuracy_mean: mean,
        extraction_accuracy_stddev: stddev,
    }
}

/// Validates the spec, runs every trial (in parallel) and aggregates.
pub fn run_scenario(spec: &ScenarioSpec) -> Result<RunReport, ScenarioError> {
    let config = spec.validate()?;
    let insiders = if spec.scenario.is_collusion() {
        spec.plan()?.colluders().to_vec()
    } else {
        Vec::new()
    };
    let trials = (0..spec.trials)
        .into_par_iter()
        .map(|trial| {
            let outcome = run_trial(spec, &config, trial)?;
            Ok(summarize(trial, outcome, &insiders, spec.transcript))
        })
        .collect::<Result<Vec<_>, ScenarioError>>()?;
    Ok(RunReport {
        version: VERSION_TAG,
        generated_at_unix: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map_or(0, |d| d.as_secs()),
        seed: spec.seed,
        spec: spec.clone(),
        aggregates: aggregate(&trials),
        trials,
    })
}

fn format_phase(re: f64, im: f64) -> String {
    let near = |x: f64, y: f64| (x - y).abs() < 1e-9;
    match (re, im) {
        (r, i) if near(r, 1.0) && near(i, 0.0) => "+1".into(),
        (r, i) if near(r, -1.0) && near(i, 0.0) => "-1".into(),
        (r, i) if near(r, 0.0) && near(i, 1.0) => "+i".into(),
        (r, i) if near(r, 0.0) && near(i, -1.0) => "-i".into(),
        (r, i) => format!("{r:+.6}{i:+.6}i"),
    }
}

/// One line per transition: `from nibble to phase`.
pub fn dump_transition_table(params: &ClusterParams) -> Result<String, ProtocolError> {
    let table = TransitionTable::build(params)?;
    let mut out = String::from("from nibble to phase\n");
    for t in table.entries() {
        writeln!(
            out,
            "{} {} {} {}",
            t.from.index(),
            t.nibble,
            t.to.index(),
            format_phase(t.phase.re, t.phase.im)
        )
        .expect("writing to a String");
    }
    Ok(out)
}

/// Per-family conclusive and inconclusive probabilities of the discriminator
/// plus its positivity and completeness checks.
pub fn dump_povm_stats(params: &ClusterParams) -> Result<String, PovmError> {
    let discriminator = ClusterDiscriminator::new(params)?;
    let [a, b, c, d] = params.coefficients();
    let mut out = format!("params a={a} b={b} c={c} d={d}\n");
    for povm in discriminator.povms() {
        let r = FamilyReport::from_povm(povm);
        let ids: Vec<String> = povm.family().members().iter().map(|id| id.index().to_string()).collect();
        writeln!(
            out,
            "family {} (states {}): scale {:.9}",
            r.family,
            ids.join(","),
            r.scale
        )
        .expect("writing to a String");
        for (j, id) in povm.family().members().iter().enumerate() {
            writeln!(
                out,
                "  state {:>2}: conclusive {:.9} inconclusive {:.9}",
                id.index(),
                r.conclusive_probability[j],
                r.inconclusive_probability[j]
            )
            .expect("writing to a String");
        }
        writeln!(
            out,
            "  min eigenvalue {:.3e}, completeness error {:.3e}, max misidentification {:.3e}: {}",
            r.min_eigenvalue,
            r.completeness_error,
            r.max_misidentification,
            if r.passes() { "ok" } else { "FAILED" }
        )
        .expect("writing to a String");
    }
    Ok(out)
}
