//! Experiment driver: configuration files, Monte Carlo sweeps and output files.

mod concealing;
mod config_file;
mod experiment;
mod phases;

pub use concealing::{concealing_probe, public_structure, ConcealingReport, BOOTSTRAP_REPLICATES, MIN_PROBE_SESSIONS};
pub use config_file::{parse_guess_rule, RunSettings, RUN_KEYS};
pub use experiment::{
    calibration_path, central_window, load_calibration, run_experiment, CalibrationSummary, Command, Experiment,
    PatternSummary, RunOutput, SessionMetrics, DEFAULT_CALIBRATION_SESSIONS, DEFAULT_SESSIONS, METRICS_SCHEMA,
};
pub use phases::{
    commit_phase, unveil_phase, verify_phase, ALICE_STATE_FILE, SEALED_FILE, TRANSCRIPT_FILE, UNVEIL_FILE, VERDICT_FILE,
};
