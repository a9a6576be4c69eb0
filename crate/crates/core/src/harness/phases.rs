//! Commit, unveil and verify as separate steps that hand over through files.

use std::fs;
use std::path::Path;

use super::experiment::load_calibration;
use crate::error::Result;
use crate::protocol::{
    alice_commit_honest, alice_unveil_honest, bob_prepare_trials, AlicePrivateState, Apparatus, Bit,
    CommitTranscript, ProtocolConfig, SealedSlitRecord, SessionKey, UnveilMessage,
};
use crate::verifier::{verify, Verdict};

pub const TRANSCRIPT_FILE: &str = "transcript.json";
pub const ALICE_STATE_FILE: &str = "alice_state.json";
pub const SEALED_FILE: &str = "sealed_record.json";
pub const UNVEIL_FILE: &str = "unveil.json";
pub const VERDICT_FILE: &str = "verdict.json";

fn read<T: for<'de> serde::Deserialize<'de>>(path: &Path) -> Result<T> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

fn write<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, serde_json::to_string(value)? + "\n")?;
    Ok(())
}

/// Bob prepares and Alice commits honestly; writes the public transcript and
/// both parties' private files into `dir`.
pub fn commit_phase(config: &ProtocolConfig, bit: Bit, seed: u64, dir: &Path) -> Result<CommitTranscript> {
    let apparatus = Apparatus::build(config)?;
    let key = SessionKey::new(seed);
    let (setups, sealed) = bob_prepare_trials(config, &key);
    let (transcript, state) = alice_commit_honest(bit, &setups, &apparatus, &key)?;
    fs::create_dir_all(dir)?;
    write(&dir.join(TRANSCRIPT_FILE), &transcript)?;
    write(&dir.join(ALICE_STATE_FILE), &state)?;
    write(&dir.join(SEALED_FILE), &sealed)?;
    Ok(transcript)
}

/// Alice reads her private state and writes the unveil message.
pub fn unveil_phase(dir: &Path) -> Result<UnveilMessage> {
    let state: AlicePrivateState = read(&dir.join(ALICE_STATE_FILE))?;
    let unveil = alice_unveil_honest(&state)?;
    write(&dir.join(UNVEIL_FILE), &unveil)?;
    Ok(unveil)
}

/// Bob checks the unveil against the transcript and his sealed record.
pub fn verify_phase(config: &ProtocolConfig, dir: &Path, calibration_dir: &Path) -> Result<Verdict> {
    let transcript = CommitTranscript::from_json(&fs::read_to_string(dir.join(TRANSCRIPT_FILE))?)?;
    let unveil = UnveilMessage::from_json(&fs::read_to_string(dir.join(UNVEIL_FILE))?)?;
    let sealed: SealedSlitRecord = read(&dir.join(SEALED_FILE))?;
    let apparatus = Apparatus::build(config)?;
    let quantiles = match unveil.bit {
        Bit::One => Some(load_calibration(calibration_dir, config)?),
        Bit::Zero => None,
    };
    let verdict = verify(&transcript, &unveil, &sealed, &apparatus, quantiles.as_ref())?;
    write(&dir.join(VERDICT_FILE), &verdict)?;
    Ok(verdict)
}
