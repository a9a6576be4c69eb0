//! One complete commit/unveil/verify run.

use serde::{Deserialize, Serialize};

use crate::adversary::{cheat_bitflip, AdversaryStrategy, DelayedCheat, DelayedReport};
use crate::engine::Slit;
use crate::error::Result;
use crate::fmt::opt_f64_string;
use crate::protocol::{
    alice_commit_honest, alice_unveil_honest, bob_prepare_trials, Apparatus, Bit, CommitTranscript,
    SealedSlitRecord, SessionKey, SlitChoice, TrialSetup, UnveilMessage,
};
use crate::rng::{substream, Domain};
use crate::verifier::{verify, QuantileTable, RejectionReason, TestName, Verdict};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AliceStrategy {
    Honest { bit: Bit },
    Adversary(AdversaryStrategy),
}

impl AliceStrategy {
    pub fn unveiled_bit(&self) -> Bit {
        match self {
            AliceStrategy::Honest { bit } => *bit,
            AliceStrategy::Adversary(a) => a.unveiled_bit(),
        }
    }

    pub fn is_honest(&self) -> bool {
        matches!(self, AliceStrategy::Honest { .. })
    }
}

/// Per-session numbers for aggregation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionReport {
    pub session_id: String,
    pub unveiled_bit: Bit,
    pub n_trials: usize,
    pub announced_detections: usize,
    /// Neutrons through the slits, whatever Alice did with them.
    pub transmitted: usize,
    /// Transmitted neutrons still alive at the unveil time.
    pub survivors: usize,
    /// Announced detections on trials where Bob had closed a slit.
    pub single_slit_detections: usize,
    pub accept: bool,
    pub rejection_reason: Option<RejectionReason>,
    /// For a 1→0 guessing cheat: the acceptance probability given everything
    /// except where the single-slit detections landed.
    #[serde(with = "opt_f64_string")]
    pub conditional_success: Option<f64>,
    pub delayed: Option<DelayedReport>,
}

#[derive(Debug, Clone)]
pub struct SessionOutcome {
    pub transcript: CommitTranscript,
    pub unveil: UnveilMessage,
    pub verdict: Verdict,
    pub report: SessionReport,
}

/// Reusable per-run state: the apparatus, calibration and any solved
/// adversary physics.
pub struct SessionRunner<'a> {
    apparatus: &'a Apparatus,
    strategy: AliceStrategy,
    quantiles: Option<&'a QuantileTable>,
    delayed: Option<DelayedCheat<'a>>,
    guess_accuracy: Option<[f64; 2]>,
}

impl<'a> SessionRunner<'a> {
    pub fn new(apparatus: &'a Apparatus, strategy: AliceStrategy, quantiles: Option<&'a QuantileTable>) -> Result<Self> {
        let mut delayed = None;
        let mut guess_accuracy = None;
        if let AliceStrategy::Adversary(adv) = strategy {
            adv.validate(apparatus)?;
            match adv {
                AdversaryStrategy::DelayedMeasurement { measure_time, unveiled, announce_fraction } => {
                    delayed = Some(DelayedCheat::new(apparatus, measure_time, unveiled, announce_fraction)?);
                }
                AdversaryStrategy::BitFlipGuess { unveiled: Bit::Zero, rule, .. } => {
                    guess_accuracy = Some([rule.accuracy(apparatus, Slit::Left), rule.accuracy(apparatus, Slit::Right)]);
                }
                AdversaryStrategy::BitFlipGuess { .. } => {}
            }
        }
        Ok(SessionRunner { apparatus, strategy, quantiles, delayed, guess_accuracy })
    }

    pub fn run(&self, session: &SessionKey) -> Result<SessionOutcome> {
        let apparatus = self.apparatus;
        let (setups, sealed) = bob_prepare_trials(apparatus.config(), session);
        let mut delayed_report = None;
        let (transcript, unveil) = match self.strategy {
            AliceStrategy::Honest { bit } => {
                let (t, state) = alice_commit_honest(bit, &setups, apparatus, session)?;
                (t, alice_unveil_honest(&state)?)
            }
            AliceStrategy::Adversary(AdversaryStrategy::BitFlipGuess { committed, unveiled, rule }) => {
                cheat_bitflip(committed, unveiled, rule, &setups, apparatus, session)?
            }
            AliceStrategy::Adversary(AdversaryStrategy::DelayedMeasurement { .. }) => {
                let cheat = self.delayed.as_ref().expect("built with the runner");
                let (t, u, r) = cheat.run(&setups, session)?;
                delayed_report = Some(r);
                (t, u)
            }
        };
        let verdict = verify(&transcript, &unveil, &sealed, apparatus, self.quantiles)?;
        let world = replay_world(apparatus, &setups, session);
        let report = self.report(session, &world, &sealed, &transcript, &verdict, delayed_report);
        Ok(SessionOutcome { transcript, unveil, verdict, report })
    }

    fn report(
        &self,
        session: &SessionKey,
        world: &World,
        sealed: &SealedSlitRecord,
        transcript: &CommitTranscript,
        verdict: &Verdict,
        delayed: Option<DelayedReport>,
    ) -> SessionReport {
        let single_slit: Vec<SlitChoice> = transcript
            .announcements
            .iter()
            .filter(|a| a.detected)
            .map(|a| sealed.choices()[a.trial_id as usize])
            .filter(|c| *c != SlitChoice::Both)
            .collect();
        let conditional_success = self.guess_accuracy.map(|[left, right]| {
            if !verdict.passes_except(&[TestName::SlitConsistency]) {
                return 0.0;
            }
            single_slit
                .iter()
                .map(|c| if *c == SlitChoice::LeftOnly { left } else { right })
                .product()
        });
        SessionReport {
            session_id: session.id(),
            unveiled_bit: self.strategy.unveiled_bit(),
            n_trials: sealed.choices().len(),
            announced_detections: transcript.detected_count(),
            transmitted: world.transmitted,
            survivors: world.survivors,
            single_slit_detections: single_slit.len(),
            accept: verdict.accept,
            rejection_reason: verdict.rejection_reason,
            conditional_success,
            delayed,
        }
    }
}

struct World {
    transmitted: usize,
    survivors: usize,
}

/// Replays nature's draws for the session to count what actually happened.
fn replay_world(apparatus: &Apparatus, setups: &[TrialSetup], session: &SessionKey) -> World {
    let unveil_time = apparatus.config().unveil_time;
    let mut world = World { transmitted: 0, survivors: 0 };
    for s in setups {
        let nature = apparatus.transit(s, &mut substream(session.seed, Domain::Nature, s.trial_id()));
        if let Some(n) = nature.neutron {
            world.transmitted += 1;
            world.survivors += (n.decay_time() > unveil_time) as usize;
        }
    }
    world
}

/// Runs one full session: Bob prepares, Alice commits and unveils, Bob verifies.
pub fn run_session(
    strategy: AliceStrategy,
    apparatus: &Apparatus,
    session: &SessionKey,
    quantiles: Option<&QuantileTable>,
) -> Result<SessionOutcome> {
    SessionRunner::new(apparatus, strategy, quantiles)?.run(session)
}

