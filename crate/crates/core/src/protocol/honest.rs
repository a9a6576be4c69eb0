//! Honest Bob and honest Alice.

use rand::Rng;

use super::messages::*;
use super::{Apparatus, ProtocolConfig, SealedSlitRecord, SlitChoice, TrialSetup};
use crate::error::{QbcError, Result};
use crate::rng::{substream, Domain};

/// Bob's random slit settings: both open with probability `p_both`, otherwise
/// one slit chosen uniformly.
pub fn bob_prepare_trials(config: &ProtocolConfig, session: &SessionKey) -> (Vec<TrialSetup>, SealedSlitRecord) {
    let choices: Vec<SlitChoice> = (0..config.n_trials as u64)
        .map(|i| {
            let mut rng = substream(session.seed, Domain::BobChoice, i);
            if rng.random::<f64>() < config.p_both {
                SlitChoice::Both
            } else if rng.random::<bool>() {
                SlitChoice::LeftOnly
            } else {
                SlitChoice::RightOnly
            }
        })
        .collect();
    let setups = choices.iter().enumerate().map(|(i, c)| TrialSetup::new(i as u64, *c)).collect();
    (setups, SealedSlitRecord::new(session.id(), choices))
}

/// When an honest Alice measures for bit `b`.
pub fn measurement_time(config: &ProtocolConfig, bit: Bit) -> f64 {
    match bit {
        Bit::Zero => config.t0,
        Bit::One => config.t1(),
    }
}

/// Time written on announcements for a measurement made at `measured_at`.
pub(crate) fn stamp(config: &ProtocolConfig, measured_at: f64) -> f64 {
    if config.announce_at_measurement {
        measured_at
    } else {
        config.t1()
    }
}

pub(crate) fn transcript(apparatus: &Apparatus, session: &SessionKey, announcements: Vec<Announcement>) -> CommitTranscript {
    let config = apparatus.config();
    CommitTranscript {
        schema: TRANSCRIPT_SCHEMA.into(),
        session_id: session.id(),
        config_hash: config.config_hash(),
        n_trials: config.n_trials,
        commit_end: config.commit_end,
        announcements,
    }
}

/// Honest commitment: which-slit measurements at t0 for 0, screen detection
/// at t1 for 1. Every trial gets an announcement.
pub fn alice_commit_honest(
    bit: Bit,
    setups: &[TrialSetup],
    apparatus: &Apparatus,
    session: &SessionKey,
) -> Result<(CommitTranscript, AlicePrivateState)> {
    let config = apparatus.config();
    config.check_guard()?;
    let t_measure = measurement_time(config, bit);
    let mut announcements = Vec::with_capacity(setups.len());
    let mut trials = Vec::with_capacity(setups.len());
    for setup in setups {
        let id = setup.trial_id();
        let nature = apparatus.transit(setup, &mut substream(session.seed, Domain::Nature, id));
        let mut rng = substream(session.seed, Domain::AliceMeasurement, id);
        let datum = match nature.neutron {
            Some(n) if n.detectable_at(t_measure) => Some(match bit {
                Bit::Zero => Revealed::Slit { slit: n.measure_which_slit(&mut rng) },
                Bit::One => Revealed::Position { position_m: n.detect_on_screen(&mut rng) },
            }),
            _ => None,
        };
        announcements.push(Announcement { trial_id: id, detected: datum.is_some(), stamped_at: stamp(config, t_measure) });
        trials.push(AliceTrial { trial_id: id, detected: datum.is_some(), datum });
    }
    let state = AlicePrivateState { schema: ALICE_STATE_SCHEMA.into(), session_id: session.id(), bit, trials };
    Ok((transcript(apparatus, session, announcements), state))
}

/// Reveals the stored data for every trial announced as detected.
pub fn alice_unveil_honest(state: &AlicePrivateState) -> Result<UnveilMessage> {
    let mut data = Vec::new();
    for t in state.trials.iter().filter(|t| t.detected) {
        let datum = t.datum.ok_or(QbcError::StateMismatch(t.trial_id))?;
        let matches = matches!(
            (state.bit, datum),
            (Bit::Zero, Revealed::Slit { .. }) | (Bit::One, Revealed::Position { .. })
        );
        if !matches {
            return Err(QbcError::StateMismatch(t.trial_id));
        }
        data.push(UnveilEntry { trial_id: t.trial_id, datum });
    }
    Ok(UnveilMessage::new(state.session_id.clone(), state.bit, data))
}
