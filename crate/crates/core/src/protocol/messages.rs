//! Messages and records exchanged between the parties.
//!
//! Everything here serializes to canonical JSON so commit and unveil can run
//! in separate processes. Times and positions are 17-significant-digit strings.

use serde::{Deserialize, Serialize};

use crate::engine::Slit;
use crate::error::{QbcError, Result};
use crate::fmt::f64_string;

pub const TRANSCRIPT_SCHEMA: &str = "qbc-transcript/1";
pub const UNVEIL_SCHEMA: &str = "qbc-unveil/1";
pub const ALICE_STATE_SCHEMA: &str = "qbc-alice-state/1";

/// The committed bit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum Bit {
    Zero,
    One,
}

impl Bit {
    pub fn flipped(self) -> Bit {
        match self {
            Bit::Zero => Bit::One,
            Bit::One => Bit::Zero,
        }
    }
}

impl From<Bit> for u8 {
    fn from(b: Bit) -> u8 {
        match b {
            Bit::Zero => 0,
            Bit::One => 1,
        }
    }
}

impl TryFrom<u8> for Bit {
    type Error = QbcError;

    fn try_from(v: u8) -> Result<Bit> {
        match v {
            0 => Ok(Bit::Zero),
            1 => Ok(Bit::One),
            _ => Err(QbcError::InvalidParams(format!("bit must be 0 or 1, got {v}"))),
        }
    }
}

impl std::fmt::Display for Bit {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", u8::from(*self))
    }
}

/// Identifies one protocol run; all randomness of the run derives from `seed`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SessionKey {
    pub seed: u64,
}

impl SessionKey {
    pub fn new(seed: u64) -> Self {
        SessionKey { seed }
    }

    pub fn id(&self) -> String {
        format!("{:016x}", self.seed)
    }
}

/// Alice's public statement about one trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Announcement {
    pub trial_id: u64,
    pub detected: bool,
    #[serde(with = "f64_string")]
    pub stamped_at: f64,
}

/// Everything Bob holds before the unveil.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommitTranscript {
    pub schema: String,
    pub session_id: String,
    pub config_hash: String,
    pub n_trials: usize,
    #[serde(with = "f64_string")]
    pub commit_end: f64,
    pub announcements: Vec<Announcement>,
}

impl CommitTranscript {
    pub fn detected_count(&self) -> usize {
        self.announcements.iter().filter(|a| a.detected).count()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Revealed datum for one detected trial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Revealed {
    Slit { slit: Slit },
    Position {
        #[serde(with = "f64_string")]
        position_m: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnveilEntry {
    pub trial_id: u64,
    #[serde(flatten)]
    pub datum: Revealed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnveilMessage {
    pub schema: String,
    pub session_id: String,
    pub bit: Bit,
    pub data: Vec<UnveilEntry>,
}

impl UnveilMessage {
    pub fn new(session_id: String, bit: Bit, data: Vec<UnveilEntry>) -> Self {
        UnveilMessage { schema: UNVEIL_SCHEMA.into(), session_id, bit, data }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Alice's record of one trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AliceTrial {
    pub trial_id: u64,
    pub detected: bool,
    pub datum: Option<Revealed>,
}

/// What Alice keeps between commit and unveil.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlicePrivateState {
    pub schema: String,
    pub session_id: String,
    pub bit: Bit,
    pub trials: Vec<AliceTrial>,
}
