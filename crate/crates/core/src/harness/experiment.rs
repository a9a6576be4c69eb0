//! Monte Carlo experiments behind the command-line subcommands.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::concealing::{concealing_probe, ConcealingReport};
use super::config_file::RunSettings;
use crate::adversary::{AdversaryStrategy, GuessRule};
use crate::engine::{analytic_fraunhofer, fringe_spacing, ScreenPattern, Slit};
use crate::error::{QbcError, Result};
use crate::fmt::{f64_string, opt_f64_string};
use crate::protocol::{Apparatus, Bit, ProtocolConfig, SlitChoice};
use crate::rng::session_seed;
use crate::session::{AliceStrategy, SessionReport, SessionRunner};
use crate::stats::fringe_contrast;
use crate::verifier::{calibrate_quantiles, QuantileTable, Verdict};

pub const METRICS_SCHEMA: &str = "qbc-metrics/1";

pub const DEFAULT_SESSIONS: usize = 1000;
pub const DEFAULT_CALIBRATION_SESSIONS: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Honest,
    CheatBitflip,
    CheatDelayed,
    Concealing,
    Calibrate,
    PatternExport,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Honest => "honest",
            Command::CheatBitflip => "cheat-bitflip",
            Command::CheatDelayed => "cheat-delayed",
            Command::Concealing => "concealing",
            Command::Calibrate => "calibrate",
            Command::PatternExport => "pattern-export",
        }
    }
}

/// A fully specified experiment.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub command: Command,
    pub config: ProtocolConfig,
    pub seed: u64,
    pub sessions: usize,
    /// Trial counts to sweep; empty means the configured `n_trials`.
    pub n_values: Vec<usize>,
    /// Honest: the committed bit. Bit flip: the committed bit. Delayed: the unveiled bit.
    pub bit: Bit,
    pub guess_rule: GuessRule,
    pub measure_time: f64,
    pub announce_fraction: f64,
    pub identical_seeds: bool,
    pub out_dir: PathBuf,
    pub run_id: Option<String>,
    pub calibration_dir: PathBuf,
    pub calibration_sessions: usize,
    /// Recompute calibration tables that already exist.
    pub force: bool,
}

impl Experiment {
    pub fn new(command: Command, settings: RunSettings) -> Self {
        let config = settings.protocol;
        Experiment {
            command,
            seed: settings.seed.unwrap_or(0),
            sessions: settings.sessions.unwrap_or(DEFAULT_SESSIONS),
            n_values: Vec::new(),
            bit: Bit::Zero,
            guess_rule: settings.guess_rule.unwrap_or_default(),
            measure_time: settings.measure_time.unwrap_or(config.unveil_time),
            announce_fraction: settings.announce_fraction.unwrap_or(1.0),
            identical_seeds: false,
            out_dir: PathBuf::from("out"),
            run_id: None,
            calibration_dir: PathBuf::from("out").join("calibration"),
            calibration_sessions: settings.calibration_sessions.unwrap_or(DEFAULT_CALIBRATION_SESSIONS),
            force: false,
            config,
        }
    }

    pub fn run_id(&self) -> String {
        self.run_id.clone().unwrap_or_else(|| match self.command {
            Command::Honest | Command::CheatBitflip | Command::CheatDelayed => {
                format!("{}-b{}-seed{}", self.command.name(), self.bit, self.seed)
            }
            _ => format!("{}-seed{}", self.command.name(), self.seed),
        })
    }

    fn configs(&self) -> Vec<ProtocolConfig> {
        if self.n_values.is_empty() {
            return vec![self.config.clone()];
        }
        self.n_values.iter().map(|&n| ProtocolConfig { n_trials: n, ..self.config.clone() }).collect()
    }

    fn strategy(&self) -> AliceStrategy {
        match self.command {
            Command::CheatBitflip => AliceStrategy::Adversary(AdversaryStrategy::BitFlipGuess {
                committed: self.bit,
                unveiled: self.bit.flipped(),
                rule: self.guess_rule,
            }),
            Command::CheatDelayed => AliceStrategy::Adversary(AdversaryStrategy::DelayedMeasurement {
                measure_time: self.measure_time,
                unveiled: self.bit,
                announce_fraction: self.announce_fraction,
            }),
            _ => AliceStrategy::Honest { bit: self.bit },
        }
    }
}

/// Where the calibration for a configuration is cached.
pub fn calibration_path(dir: &Path, config: &ProtocolConfig) -> PathBuf {
    dir.join(format!("{}.json", config.config_hash()))
}

/// Loads a cached calibration, checking it belongs to `config`.
pub fn load_calibration(dir: &Path, config: &ProtocolConfig) -> Result<QuantileTable> {
    let path = calibration_path(dir, config);
    if !path.exists() {
        return Err(QbcError::UncalibratedQuantiles(format!(
            "{} (expected {}; run the calibrate subcommand)",
            config.config_hash(),
            path.display()
        )));
    }
    let table = QuantileTable::load(&path)?;
    if table.config_hash != config.config_hash() {
        return Err(QbcError::UncalibratedQuantiles(config.config_hash()));
    }
    Ok(table)
}

/// Aggregate over the sessions of one configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionMetrics {
    pub n_trials: usize,
    pub config_hash: String,
    pub strategy: AliceStrategy,
    pub sessions_run: usize,
    #[serde(with = "f64_string")]
    pub accept_rate: f64,
    pub rejections: BTreeMap<String, usize>,
    /// Accept rate of a cheating strategy.
    #[serde(with = "opt_f64_string")]
    pub cheat_success_rate: Option<f64>,
    /// Mean per-session acceptance probability given all but the single-slit
    /// detection positions; an unbiased, low-variance cheat success estimate.
    #[serde(with = "opt_f64_string")]
    pub conditional_success_mean: Option<f64>,
    /// Announced detections per trial.
    #[serde(with = "f64_string")]
    pub detected_fraction: f64,
    /// Transmitted neutrons alive at the unveil time, per transmitted neutron.
    #[serde(with = "f64_string")]
    pub survivor_fraction: f64,
    #[serde(with = "f64_string")]
    pub single_slit_detections_per_trial: f64,
    /// Delayed measurement: announced detections without data, pooled.
    #[serde(with = "opt_f64_string")]
    pub missing_fraction: Option<f64>,
    #[serde(with = "opt_f64_string")]
    pub unsupported_position_fraction: Option<f64>,
    #[serde(with = "opt_f64_string")]
    pub width_ratio: Option<f64>,
}

impl SessionMetrics {
    /// Aggregates reports in the given order.
    pub fn aggregate(config: &ProtocolConfig, strategy: AliceStrategy, reports: &[SessionReport]) -> Self {
        let n = reports.len().max(1) as f64;
        let trials: usize = reports.iter().map(|r| r.n_trials).sum::<usize>().max(1);
        let sum = |f: &dyn Fn(&SessionReport) -> usize| reports.iter().map(f).sum::<usize>();
        let accept_rate = sum(&|r| r.accept as usize) as f64 / n;
        let mut rejections = BTreeMap::new();
        for r in reports {
            if let Some(reason) = r.rejection_reason {
                *rejections.entry(format!("{reason:?}")).or_insert(0) += 1;
            }
        }
        let cond: Vec<f64> = reports.iter().filter_map(|r| r.conditional_success).collect();
        let delayed: Vec<_> = reports.iter().filter_map(|r| r.delayed.as_ref()).collect();
        let announced: usize = delayed.iter().map(|d| d.announced).sum();
        let supported: usize = delayed.iter().map(|d| d.supported).sum();
        let unsupported: usize = delayed.iter().map(|d| d.unsupported_positions).sum();
        let transmitted = sum(&|r| r.transmitted);
        SessionMetrics {
            n_trials: config.n_trials,
            config_hash: config.config_hash(),
            strategy,
            sessions_run: reports.len(),
            accept_rate,
            rejections,
            cheat_success_rate: (!strategy.is_honest()).then_some(accept_rate),
            conditional_success_mean: (!cond.is_empty()).then(|| cond.iter().sum::<f64>() / cond.len() as f64),
            detected_fraction: sum(&|r| r.announced_detections) as f64 / trials as f64,
            survivor_fraction: if transmitted > 0 { sum(&|r| r.survivors) as f64 / transmitted as f64 } else { 0.0 },
            single_slit_detections_per_trial: sum(&|r| r.single_slit_detections) as f64 / trials as f64,
            missing_fraction: (!delayed.is_empty() && announced > 0)
                .then(|| 1.0 - supported as f64 / announced as f64),
            unsupported_position_fraction: (!delayed.is_empty() && supported > 0 && strategy.unveiled_bit() == Bit::One)
                .then(|| unsupported as f64 / supported as f64),
            width_ratio: delayed.first().map(|d| d.width_ratio),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
struct RunMetrics<T: Serialize> {
    schema: &'static str,
    command: &'static str,
    seed: u64,
    sessions: usize,
    results: Vec<T>,
}

#[derive(Serialize)]
struct VerdictLine<'a> {
    n_trials: usize,
    index: usize,
    verdict: &'a Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationSummary {
    pub n_trials: usize,
    /// File name inside the calibration directory.
    pub file: String,
    pub reused: bool,
    pub table: QuantileTable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternSummary {
    #[serde(with = "f64_string")]
    pub alpha_both: f64,
    #[serde(with = "f64_string")]
    pub alpha_single: f64,
    #[serde(with = "f64_string")]
    pub fringe_spacing_m: f64,
    #[serde(with = "f64_string")]
    pub analytic_spacing_m: f64,
    #[serde(with = "f64_string")]
    pub spacing_relative_error: f64,
    #[serde(with = "f64_string")]
    pub contrast_both: f64,
    /// Both-open trials after a which-slit measurement.
    #[serde(with = "f64_string")]
    pub contrast_collapsed: f64,
    #[serde(with = "opt_f64_string")]
    pub fresnel_number_warning: Option<f64>,
}

/// What a finished experiment left behind.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub run_dir: PathBuf,
    /// One human-readable line per result.
    pub summary: Vec<String>,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

/// Runs the experiment and writes its artifacts under `out_dir/run_id`.
pub fn run_experiment(exp: &Experiment) -> Result<RunOutput> {
    let run_dir = exp.out_dir.join(exp.run_id());
    let summary = match exp.command {
        Command::Honest | Command::CheatBitflip | Command::CheatDelayed => run_sessions(exp, &run_dir)?,
        Command::Concealing => run_concealing(exp, &run_dir)?,
        Command::Calibrate => run_calibrate(exp, &run_dir)?,
        Command::PatternExport => run_pattern_export(exp, &run_dir)?,
    };
    Ok(RunOutput { run_dir, summary })
}

fn run_sessions(exp: &Experiment, run_dir: &Path) -> Result<Vec<String>> {
    let strategy = exp.strategy();
    let mut results = Vec::new();
    let mut lines = Vec::new();
    let prepared = exp
        .configs()
        .into_iter()
        .map(|config| {
            let apparatus = Apparatus::build(&config)?;
            let quantiles = match strategy.unveiled_bit() {
                Bit::One => Some(load_calibration(&exp.calibration_dir, &config)?),
                Bit::Zero => None,
            };
            Ok((config, apparatus, quantiles))
        })
        .collect::<Result<Vec<_>>>()?;
    fs::create_dir_all(run_dir)?;
    let mut verdicts = BufWriter::new(File::create(run_dir.join("verdicts.jsonl"))?);
    for (config, apparatus, quantiles) in prepared {
        let runner = SessionRunner::new(&apparatus, strategy, quantiles.as_ref())?;
        let outcomes = (0..exp.sessions as u64)
            .into_par_iter()
            .map(|i| runner.run(&crate::protocol::SessionKey::new(session_seed(exp.seed, i))))
            .map(|o| o.map(|o| (o.verdict, o.report)))
            .collect::<Result<Vec<_>>>()?;
        for (index, (verdict, _)) in outcomes.iter().enumerate() {
            serde_json::to_writer(&mut verdicts, &VerdictLine { n_trials: config.n_trials, index, verdict })?;
            verdicts.write_all(b"\n")?;
        }
        let reports: Vec<SessionReport> = outcomes.into_iter().map(|(_, r)| r).collect();
        let m = SessionMetrics::aggregate(&config, strategy, &reports);
        lines.push(format!(
            "N={} sessions={} accept_rate={:.6} detected_fraction={:.6}{}",
            m.n_trials,
            m.sessions_run,
            m.accept_rate,
            m.detected_fraction,
            m.missing_fraction.map(|f| format!(" missing_fraction={f:.6}")).unwrap_or_default()
        ));
        results.push(m);
    }
    verdicts.flush()?;
    write_json(
        &run_dir.join("metrics.json"),
        &RunMetrics { schema: METRICS_SCHEMA, command: exp.command.name(), seed: exp.seed, sessions: exp.sessions, results },
    )?;
    Ok(lines)
}

fn run_concealing(exp: &Experiment, run_dir: &Path) -> Result<Vec<String>> {
    let mut results: Vec<ConcealingWithN> = Vec::new();
    for config in exp.configs() {
        let apparatus = Apparatus::build(&config)?;
        let report = concealing_probe(&apparatus, exp.sessions, exp.seed, exp.identical_seeds)?;
        results.push(ConcealingWithN { n_trials: config.n_trials, config_hash: config.config_hash(), report });
    }
    write_json(
        &run_dir.join("metrics.json"),
        &RunMetrics { schema: METRICS_SCHEMA, command: exp.command.name(), seed: exp.seed, sessions: exp.sessions, results: results.clone() },
    )?;
    Ok(results
        .iter()
        .map(|r| {
            format!(
                "N={} tv_distance_estimate={:.6} ci=[{:.6}, {:.6}] schema_identical={}",
                r.n_trials, r.report.tv_distance_estimate, r.report.ci_low, r.report.ci_high, r.report.schema_identical
            )
        })
        .collect())
}

#[derive(Debug, Clone, Serialize)]
struct ConcealingWithN {
    n_trials: usize,
    config_hash: String,
    #[serde(flatten)]
    report: ConcealingReport,
}

fn run_calibrate(exp: &Experiment, run_dir: &Path) -> Result<Vec<String>> {
    let mut results = Vec::new();
    for config in exp.configs() {
        let path = calibration_path(&exp.calibration_dir, &config);
        let existing = if exp.force { None } else { load_calibration(&exp.calibration_dir, &config).ok() };
        let reused = existing.is_some();
        let table = match existing {
            Some(t) => t,
            None => {
                let apparatus = Apparatus::build(&config)?;
                let t = calibrate_quantiles(&apparatus, exp.calibration_sessions, exp.seed)?;
                t.save(&path)?;
                t
            }
        };
        let file = path.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default();
        results.push(CalibrationSummary { n_trials: config.n_trials, file, reused, table });
    }
    write_json(
        &run_dir.join("metrics.json"),
        &RunMetrics { schema: METRICS_SCHEMA, command: exp.command.name(), seed: exp.seed, sessions: exp.calibration_sessions, results: results.clone() },
    )?;
    Ok(results
        .iter()
        .map(|c| {
            format!(
                "N={} quantile={:.6} sessions={} {} {}",
                c.n_trials,
                c.table.z_quantile,
                c.table.sessions,
                if c.reused { "reused" } else { "wrote" },
                c.file
            )
        })
        .collect())
}

/// Window spanning the central `fringes` bright fringes of the both-open pattern.
pub fn central_window(config: &ProtocolConfig, fringes: f64) -> (f64, f64) {
    let spacing = config.wavelength * config.screen_distance / config.slit_separation;
    (-0.5 * fringes * spacing, 0.5 * fringes * spacing)
}

fn run_pattern_export(exp: &Experiment, run_dir: &Path) -> Result<Vec<String>> {
    let config = &exp.config;
    let apparatus = Apparatus::build(config)?;
    let (lo, hi) = central_window(config, 5.0);
    let dir = run_dir.join("patterns");
    fs::create_dir_all(&dir)?;
    let export = |name: &str, p: &ScreenPattern| -> Result<()> {
        p.write_csv(BufWriter::new(File::create(dir.join(format!("{name}.csv")))?))
    };
    let pattern = |c: SlitChoice| apparatus.screen_pattern(c).ok_or_else(|| QbcError::DegeneratePattern(format!("{c:?} transmits nothing")));
    let both = pattern(SlitChoice::Both)?;
    export("both", both)?;
    export("left_only", pattern(SlitChoice::LeftOnly)?)?;
    export("right_only", pattern(SlitChoice::RightOnly)?)?;
    let pl = apparatus.p_left(SlitChoice::Both);
    let (l, r) = (
        apparatus.collapsed_pattern(Slit::Left).expect("left slit transmits"),
        apparatus.collapsed_pattern(Slit::Right).expect("right slit transmits"),
    );
    let mixed: Vec<f64> = l.intensity().iter().zip(r.intensity()).map(|(a, b)| pl * a + (1.0 - pl) * b).collect();
    let collapsed = ScreenPattern::new(*both.grid(), mixed)?.normalized()?;
    export("both_after_which_slit", &collapsed)?;
    let analytic = analytic_fraunhofer(&config.mask(SlitChoice::Both)?, config.wavelength, config.screen_distance, both.grid())?;
    export("both_analytic_far_field", &analytic.pattern)?;

    let spacing = fringe_spacing(both, lo, hi)?;
    let analytic_spacing = config.wavelength * config.screen_distance / config.slit_separation;
    let summary = PatternSummary {
        alpha_both: apparatus.emergent_alpha(SlitChoice::Both),
        alpha_single: apparatus.emergent_alpha(SlitChoice::LeftOnly),
        fringe_spacing_m: spacing,
        analytic_spacing_m: analytic_spacing,
        spacing_relative_error: (spacing - analytic_spacing).abs() / analytic_spacing,
        contrast_both: fringe_contrast(both, lo, hi)?,
        contrast_collapsed: fringe_contrast(&collapsed, lo, hi)?,
        fresnel_number_warning: analytic.warning.map(|w| w.fresnel_number),
    };
    write_json(
        &run_dir.join("metrics.json"),
        &RunMetrics { schema: METRICS_SCHEMA, command: exp.command.name(), seed: exp.seed, sessions: 0, results: vec![summary.clone()] },
    )?;
    Ok(vec![format!(
        "fringe_spacing={:.6e} m analytic={:.6e} m relative_error={:.3e} contrast_both={:.4} contrast_collapsed={:.4}",
        summary.fringe_spacing_m,
        summary.analytic_spacing_m,
        summary.spacing_relative_error,
        summary.contrast_both,
        summary.contrast_collapsed
    )])
}
