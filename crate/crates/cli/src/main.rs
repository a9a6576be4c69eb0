use std::path::PathBuf;
use std::process::ExitCode;

use clap::{CommandFactory, FromArgMatches, Parser, Subcommand};
use qbc_core::harness::{
    commit_phase, parse_guess_rule, run_experiment, unveil_phase, verify_phase, Command, Experiment, RunSettings,
    RUN_KEYS,
};
use qbc_core::protocol::{Bit, ProtocolConfig};
use qbc_core::QbcError;

#[derive(Debug, Parser)]
#[command(name = "qbc", version, about = "Neutron double-slit bit commitment simulator")]
struct Cli {
    #[command(subcommand)]
    command: Sub,

    /// Flat key = value configuration file.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Run seed; overrides the config file.
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,

    /// Sessions per configuration.
    #[arg(long, global = true, value_name = "K")]
    sessions: Option<usize>,

    /// Trial counts to sweep, comma separated.
    #[arg(long = "N", global = true, value_name = "INT", value_delimiter = ',')]
    n: Vec<usize>,

    /// Committed bit (honest, cheat-bitflip, commit) or unveiled bit (cheat-delayed).
    #[arg(long, global = true, value_name = "0|1", value_parser = clap::value_parser!(u8).range(0..=1))]
    b: Option<u8>,

    /// Slit-guessing rule of cheat-bitflip: ml, sign or coin.
    #[arg(long, global = true, value_name = "NAME")]
    strategy: Option<String>,

    /// Output root; each run writes to OUT/<run id>.
    #[arg(long, global = true, value_name = "DIR", default_value = "out")]
    out: PathBuf,

    #[arg(long, global = true, value_name = "NAME")]
    run_id: Option<String>,

    /// Directory of cached calibrations [default: OUT/calibration].
    #[arg(long, global = true, value_name = "DIR")]
    calibration_dir: Option<PathBuf>,

    #[arg(long, global = true, value_name = "K")]
    calibration_sessions: Option<usize>,

    /// Recompute calibrations that already exist.
    #[arg(long, global = true)]
    force: bool,
}

#[derive(Debug, Subcommand)]
enum Sub {
    /// Honest sessions for one bit.
    Honest,
    /// Commit honestly to --b, unveil the other bit with guessed data.
    CheatBitflip,
    /// Defer every measurement to --measure-time and unveil --b.
    CheatDelayed {
        /// Measurement time in seconds [default: unveil_time].
        #[arg(long, value_name = "S")]
        measure_time: Option<f64>,
        /// Fraction of transmitted trials announced as detected [default: 1].
        #[arg(long, value_name = "F")]
        announce_fraction: Option<f64>,
    },
    /// Distance between Bob's pre-unveil views for b=0 and b=1.
    Concealing {
        /// Reuse the same session seeds for both bits.
        #[arg(long)]
        identical_seeds: bool,
    },
    /// Monte Carlo calibration of the pattern test under honest play.
    Calibrate,
    /// Screen patterns as CSV plus fringe measurements.
    PatternExport,
    /// One honest commitment, written to --dir.
    Commit {
        #[arg(long, value_name = "DIR")]
        dir: PathBuf,
    },
    /// Alice's unveil from the private state in --dir.
    Unveil {
        #[arg(long, value_name = "DIR")]
        dir: PathBuf,
    },
    /// Bob's verdict on the files in --dir.
    Verify {
        #[arg(long, value_name = "DIR")]
        dir: PathBuf,
    },
}

fn config_keys_help() -> String {
    let defaults = serde_json::to_value(ProtocolConfig::default()).expect("config serializes");
    let mut text = String::from("Configuration keys (flat `key = value`, no tables):\n");
    if let Some(map) = defaults.as_object() {
        for (k, v) in map {
            let v = if v.is_null() { "unset".to_string() } else { v.to_string() };
            text.push_str(&format!("  {k:<24} default {v}\n"));
        }
    }
    for k in RUN_KEYS {
        text.push_str(&format!("  {k:<24} run setting\n"));
    }
    text.push_str("t0 and grid_half_width follow wavelength and geometry unless set.\n\n");
    text.push_str("Exit codes: 0 success, 2 config error, 3 missing calibration, 4 internal invariant,\n");
    text.push_str("            5 file or serialization error, 6 inconsistent protocol data.");
    text
}

fn exit_code(e: &QbcError) -> u8 {
    match e {
        QbcError::Config(_)
        | QbcError::InvalidParams(_)
        | QbcError::ConfigGuard(_)
        | QbcError::GridTooNarrow { .. }
        | QbcError::DegeneratePattern(_) => 2,
        QbcError::UncalibratedQuantiles(_) => 3,
        QbcError::Invariant(_) => 4,
        QbcError::Io(_) | QbcError::Serialization(_) => 5,
        QbcError::StateMismatch(_) | QbcError::SessionMismatch { .. } => 6,
    }
}

fn run(cli: Cli) -> Result<(), QbcError> {
    let mut settings = match &cli.config {
        Some(path) => RunSettings::load(path)?,
        None => RunSettings::default(),
    };
    if let Some(&n) = cli.n.first() {
        settings.protocol.n_trials = n;
    }
    let bit = Bit::try_from(cli.b.unwrap_or(0))?;
    let seed = cli.seed.or(settings.seed).unwrap_or(0);
    let calibration_dir = cli.calibration_dir.clone().unwrap_or_else(|| cli.out.join("calibration"));

    let command = match &cli.command {
        Sub::Commit { dir } => {
            settings.protocol.validate().map_err(|e| QbcError::Config(e.to_string()))?;
            let t = commit_phase(&settings.protocol, bit, seed, dir)?;
            println!("committed session {} with {} detections", t.session_id, t.detected_count());
            return Ok(());
        }
        Sub::Unveil { dir } => {
            let u = unveil_phase(dir)?;
            println!("unveiled bit {} with {} data", u.bit, u.data.len());
            return Ok(());
        }
        Sub::Verify { dir } => {
            let v = verify_phase(&settings.protocol, dir, &calibration_dir)?;
            match v.rejection_reason {
                None => println!("accept"),
                Some(r) => println!("reject: {r:?}"),
            }
            return Ok(());
        }
        Sub::Honest => Command::Honest,
        Sub::CheatBitflip => Command::CheatBitflip,
        Sub::CheatDelayed { .. } => Command::CheatDelayed,
        Sub::Concealing { .. } => Command::Concealing,
        Sub::Calibrate => Command::Calibrate,
        Sub::PatternExport => Command::PatternExport,
    };

    let mut exp = Experiment::new(command, settings);
    exp.seed = seed;
    exp.bit = bit;
    exp.n_values = cli.n.clone();
    exp.out_dir = cli.out.clone();
    exp.run_id = cli.run_id.clone();
    exp.calibration_dir = calibration_dir;
    exp.force = cli.force;
    if let Some(k) = cli.sessions {
        exp.sessions = k;
    }
    if let Some(k) = cli.calibration_sessions {
        exp.calibration_sessions = k;
    }
    if let Some(rule) = &cli.strategy {
        exp.guess_rule = parse_guess_rule(rule)?;
    }
    match cli.command {
        Sub::CheatDelayed { measure_time, announce_fraction } => {
            if let Some(t) = measure_time {
                exp.measure_time = t;
            }
            if let Some(f) = announce_fraction {
                exp.announce_fraction = f;
            }
        }
        Sub::Concealing { identical_seeds } => exp.identical_seeds = identical_seeds,
        _ => {}
    }
    let out = run_experiment(&exp)?;
    for line in out.summary {
        println!("{line}");
    }
    println!("wrote {}", out.run_dir.display());
    Ok(())
}

fn main() -> ExitCode {
    let matches = Cli::command().after_help(config_keys_help()).get_matches();
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
