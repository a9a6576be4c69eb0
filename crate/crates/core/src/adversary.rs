//! Cheating Alices.
//!
//! Adversaries see exactly what an honest Alice sees: the [`TrialSetup`]s,
//! whose slit settings are private, and their own measurement outcomes.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::engine::{ScreenPattern, Slit};
use crate::error::{invalid, Result};
use crate::fmt::f64_string;
use crate::protocol::{
    alice_commit_honest, stamp, transcript, Announcement, Apparatus, Bit, CommitTranscript, DelayedPatterns,
    Revealed, SessionKey, SlitChoice, TrialSetup, UnveilEntry, UnveilMessage,
};
use crate::rng::{substream, Domain};

/// How a 1→0 cheat turns a screen position into a slit claim.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GuessRule {
    /// The slit whose single-slit pattern is denser at the position.
    #[default]
    MaximumLikelihood,
    /// Left for negative positions.
    Sign,
    Coin,
}

impl GuessRule {
    pub fn guess<R: Rng + ?Sized>(self, apparatus: &Apparatus, x: f64, rng: &mut R) -> Slit {
        let coin = |rng: &mut R| if rng.random::<bool>() { Slit::Left } else { Slit::Right };
        match self {
            GuessRule::Coin => coin(rng),
            GuessRule::Sign if x < 0.0 => Slit::Left,
            GuessRule::Sign if x > 0.0 => Slit::Right,
            GuessRule::Sign => coin(rng),
            GuessRule::MaximumLikelihood => {
                let l = apparatus.collapsed_pattern(Slit::Left).map_or(0.0, |p| p.density_at(x));
                let r = apparatus.collapsed_pattern(Slit::Right).map_or(0.0, |p| p.density_at(x));
                if l > r {
                    Slit::Left
                } else if r > l {
                    Slit::Right
                } else {
                    coin(rng)
                }
            }
        }
    }

    /// Probability the guess names the open slit of a single-slit trial.
    pub fn accuracy(self, apparatus: &Apparatus, open: Slit) -> f64 {
        if self == GuessRule::Coin {
            return 0.5;
        }
        let Some(own) = apparatus.collapsed_pattern(open) else { return 0.5 };
        let other = apparatus.collapsed_pattern(match open {
            Slit::Left => Slit::Right,
            Slit::Right => Slit::Left,
        });
        let total: f64 = own.intensity().iter().sum();
        let mut hit = 0.0;
        for (i, x) in own.grid().positions().enumerate() {
            let p = own.intensity()[i] / total;
            let chance = match self {
                GuessRule::Coin => unreachable!(),
                GuessRule::Sign => sign_hit(x, open),
                GuessRule::MaximumLikelihood => {
                    let o = other.map_or(0.0, |q: &ScreenPattern| q.intensity()[i]);
                    let s = own.intensity()[i];
                    if s > o {
                        1.0
                    } else if s < o {
                        0.0
                    } else {
                        0.5
                    }
                }
            };
            hit += p * chance;
        }
        hit
    }
}

fn sign_hit(x: f64, open: Slit) -> f64 {
    match (x.partial_cmp(&0.0), open) {
        (Some(std::cmp::Ordering::Less), Slit::Left) | (Some(std::cmp::Ordering::Greater), Slit::Right) => 1.0,
        (Some(std::cmp::Ordering::Equal), _) => 0.5,
        _ => 0.0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AdversaryStrategy {
    /// Commit honestly to one bit, unveil the other with made-up data.
    BitFlipGuess { committed: Bit, unveiled: Bit, rule: GuessRule },
    /// Announce at t1 without measuring; measure everything at `measure_time`.
    DelayedMeasurement {
        #[serde(with = "f64_string")]
        measure_time: f64,
        unveiled: Bit,
        /// Fraction of transmitted trials announced as detected.
        #[serde(with = "f64_string")]
        announce_fraction: f64,
    },
}

impl AdversaryStrategy {
    pub fn validate(&self, apparatus: &Apparatus) -> Result<()> {
        match *self {
            AdversaryStrategy::BitFlipGuess { committed, unveiled, .. } if committed == unveiled => {
                invalid("a bit-flip cheat must unveil the other bit")
            }
            AdversaryStrategy::DelayedMeasurement { measure_time, .. } if !(measure_time > apparatus.config().t1()) => {
                invalid(format!("delayed measurement at {measure_time} s does not follow t1"))
            }
            AdversaryStrategy::DelayedMeasurement { announce_fraction, .. }
                if !(0.0..=1.0).contains(&announce_fraction) =>
            {
                invalid("announce_fraction must lie in [0, 1]")
            }
            _ => Ok(()),
        }
    }

    pub fn unveiled_bit(&self) -> Bit {
        match *self {
            AdversaryStrategy::BitFlipGuess { unveiled, .. } | AdversaryStrategy::DelayedMeasurement { unveiled, .. } => {
                unveiled
            }
        }
    }
}

/// Commits honestly to `committed` and unveils the other bit.
///
/// For 0→1 each position is drawn from the single-slit pattern of the slit
/// she found. For 1→0 each slit claim comes from `rule`.
pub fn cheat_bitflip(
    committed: Bit,
    unveiled: Bit,
    rule: GuessRule,
    setups: &[TrialSetup],
    apparatus: &Apparatus,
    session: &SessionKey,
) -> Result<(CommitTranscript, UnveilMessage)> {
    AdversaryStrategy::BitFlipGuess { committed, unveiled, rule }.validate(apparatus)?;
    let (transcript, state) = alice_commit_honest(committed, setups, apparatus, session)?;
    let data = state
        .trials
        .iter()
        .filter_map(|t| t.datum.map(|d| (t.trial_id, d)))
        .map(|(trial_id, datum)| {
            let mut rng = substream(session.seed, Domain::Adversary, trial_id);
            let datum = match datum {
                Revealed::Slit { slit } => Revealed::Position {
                    position_m: apparatus.collapsed_sampler(slit).expect("single slit transmits").sample(&mut rng),
                },
                Revealed::Position { position_m } => {
                    Revealed::Slit { slit: rule.guess(apparatus, position_m, &mut rng) }
                }
            };
            UnveilEntry { trial_id, datum }
        })
        .collect();
    Ok((transcript, UnveilMessage::new(session.id(), unveiled, data)))
}

/// What the delayed-measurement cheat could and could not back up.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelayedReport {
    pub announced: usize,
    /// Announced trials with a datum at unveil.
    pub supported: usize,
    #[serde(with = "f64_string")]
    pub missing_fraction: f64,
    /// Revealed positions outside the honest t1 screen support.
    pub unsupported_positions: usize,
    /// Width of the both-open pattern at the measurement time over its t1 width.
    #[serde(with = "f64_string")]
    pub width_ratio: f64,
}

/// A delayed-measurement Alice with her late detection patterns solved.
#[derive(Debug, Clone)]
pub struct DelayedCheat<'a> {
    apparatus: &'a Apparatus,
    patterns: DelayedPatterns,
    unveiled: Bit,
    announce_fraction: f64,
    width_ratio: f64,
}

impl<'a> DelayedCheat<'a> {
    pub fn new(apparatus: &'a Apparatus, measure_time: f64, unveiled: Bit, announce_fraction: f64) -> Result<Self> {
        AdversaryStrategy::DelayedMeasurement { measure_time, unveiled, announce_fraction }.validate(apparatus)?;
        let patterns = apparatus.delayed_patterns(measure_time)?;
        let width = |p: Option<&ScreenPattern>| p.map_or(f64::NAN, |p| p.width());
        let width_ratio =
            width(patterns.pattern(SlitChoice::Both)) / width(apparatus.screen_pattern(SlitChoice::Both));
        Ok(DelayedCheat { apparatus, patterns, unveiled, announce_fraction, width_ratio })
    }

    pub fn patterns(&self) -> &DelayedPatterns {
        &self.patterns
    }

    pub fn run(&self, setups: &[TrialSetup], session: &SessionKey) -> Result<(CommitTranscript, UnveilMessage, DelayedReport)> {
        let apparatus = self.apparatus;
        let config = apparatus.config();
        config.check_guard()?;
        let t_m = self.patterns.measure_time();
        let mut announcements = Vec::with_capacity(setups.len());
        let mut data = Vec::new();
        let mut announced = 0;
        for setup in setups {
            let id = setup.trial_id();
            let nature = apparatus.transit(setup, &mut substream(session.seed, Domain::Nature, id));
            let mut rng = substream(session.seed, Domain::Adversary, id);
            let announce = nature.neutron.is_some() && rng.random::<f64>() < self.announce_fraction;
            announcements.push(Announcement { trial_id: id, detected: announce, stamped_at: stamp(config, config.t1()) });
            if !announce {
                continue;
            }
            announced += 1;
            let neutron = nature.neutron.expect("announced trials transmitted");
            if !neutron.detectable_at(t_m) {
                continue;
            }
            let mut meas = substream(session.seed, Domain::AliceMeasurement, id);
            let datum = match self.unveiled {
                Bit::One => Revealed::Position { position_m: neutron.detect_late(&self.patterns, &mut meas) },
                Bit::Zero => Revealed::Slit { slit: if meas.random::<bool>() { Slit::Left } else { Slit::Right } },
            };
            data.push(UnveilEntry { trial_id: id, datum });
        }
        let unsupported_positions = data
            .iter()
            .filter(|e| match e.datum {
                Revealed::Position { position_m } => !apparatus.supports(SlitChoice::Both, position_m),
                Revealed::Slit { .. } => false,
            })
            .count();
        let report = DelayedReport {
            announced,
            supported: data.len(),
            missing_fraction: if announced > 0 { 1.0 - data.len() as f64 / announced as f64 } else { 0.0 },
            unsupported_positions,
            width_ratio: self.width_ratio,
        };
        Ok((transcript(apparatus, session, announcements), UnveilMessage::new(session.id(), self.unveiled, data), report))
    }
}

/// Delays every measurement to `measure_time` and unveils `unveiled`.
pub fn cheat_delayed(
    measure_time: f64,
    unveiled: Bit,
    announce_fraction: f64,
    setups: &[TrialSetup],
    apparatus: &Apparatus,
    session: &SessionKey,
) -> Result<(CommitTranscript, UnveilMessage, DelayedReport)> {
    DelayedCheat::new(apparatus, measure_time, unveiled, announce_fraction)?.run(setups, session)
}
