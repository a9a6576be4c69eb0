//! Bob's double-slit apparatus and the per-trial physics it produces.
//!
//! Every trial with the same slit setting is physically identical, so the
//! wave mechanics is solved once per setting and trials only draw random
//! outcomes from the precomputed distributions. A [`TrialSetup`] keeps Bob's
//! setting private; Alice interacts with it only through [`Neutron`].

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::ProtocolConfig;
use crate::engine::{
    apply_aperture, collapse, evolve_free, far_field_pattern, intensity, make_gaussian_packet, slit_weights,
    spectral_reach, ComplexField, OpenSlits, PatternSampler, ScreenPattern, Slit,
};
use crate::decay::{sample_decay_time, DecayParams};
use crate::error::{QbcError, Result};
use crate::rng::SimRng;

/// Bob's per-trial slit setting.
pub type SlitChoice = OpenSlits;

pub const ALL_CHOICES: [SlitChoice; 3] = [SlitChoice::Both, SlitChoice::LeftOnly, SlitChoice::RightOnly];

/// Spectral weight allowed to wrap around the periodic grid during a flight.
pub const WRAP_TAIL: f64 = 1e-9;

/// Densities below this fraction of a pattern's peak count as this value in log-likelihoods.
pub const RELATIVE_DENSITY_FLOOR: f64 = 1e-12;

fn index(choice: SlitChoice) -> usize {
    match choice {
        SlitChoice::Both => 0,
        SlitChoice::LeftOnly => 1,
        SlitChoice::RightOnly => 2,
    }
}

/// Solved physics for one slit setting.
#[derive(Debug, Clone)]
struct SettingPhysics {
    transmitted_fraction: f64,
    /// Probability a which-slit measurement finds the left slit.
    p_left: f64,
    slit_field: Option<ComplexField>,
    screen: Option<ScreenPattern>,
    sampler: Option<PatternSampler>,
    /// Per-cell ln(screen / which-path reference); absent when the two agree.
    score: Option<Vec<f64>>,
    /// Mean and variance of the score of a detection drawn from `screen`.
    score_moments: (f64, f64),
    /// Per-cell position in [0, 1) of the score-descending cumulative mass.
    score_rank: Option<Vec<f64>>,
    floor: f64,
}

#[derive(Debug, Clone)]
pub struct Apparatus {
    config: ProtocolConfig,
    settings: [SettingPhysics; 3],
}

/// Score table of a pattern against the which-path reference, and its moments.
fn score_table(screen: &ScreenPattern, reference: &ScreenPattern, floor: f64) -> (Vec<f64>, (f64, f64)) {
    let dx = screen.grid().dx();
    let (ts, tr) = (screen.total_weight(), reference.total_weight());
    let ref_floor = RELATIVE_DENSITY_FLOOR * reference.intensity().iter().cloned().fold(0.0, f64::max);
    let mut table = Vec::with_capacity(screen.intensity().len());
    let (mut m1, mut m2) = (0.0, 0.0);
    for (f, r) in screen.intensity().iter().zip(reference.intensity()) {
        let s = (f.max(floor) / ts).ln() - (r.max(ref_floor) / tr).ln();
        if *f > floor {
            let p = f * dx / ts;
            m1 += p * s;
            m2 += p * s * s;
        }
        table.push(s);
    }
    (table, (m1, (m2 - m1 * m1).max(0.0)))
}

fn score_rank(screen: &ScreenPattern, table: &[f64]) -> Vec<f64> {
    let total: f64 = screen.intensity().iter().sum();
    let mut order: Vec<usize> = (0..table.len()).collect();
    order.sort_by(|&a, &b| table[b].total_cmp(&table[a]).then(a.cmp(&b)));
    let mut rank = vec![0.0; table.len()];
    let mut acc = 0.0;
    for i in order {
        let p = screen.intensity()[i] / total;
        rank[i] = (acc + 0.5 * p).min(1.0 - f64::EPSILON);
        acc += p;
    }
    rank
}

/// Farthest a field's significant momentum components travel in `elapsed`.
fn travel(config: &ProtocolConfig, field: &ComplexField, elapsed: f64) -> f64 {
    let k = spectral_reach(field, WRAP_TAIL);
    field.units().hbar() * k * elapsed / config.mass()
}

fn check_no_wrap(config: &ProtocolConfig, field: &ComplexField, elapsed: f64) -> Result<()> {
    let reach = travel(config, field, elapsed) + 0.5 * (config.slit_separation + config.slit_width);
    if reach > config.grid_half_width {
        return Err(QbcError::InvalidParams(format!(
            "grid half width {} m is smaller than the {reach:.3e} m the field spreads to; \
             widen the grid or add points",
            config.grid_half_width
        )));
    }
    Ok(())
}

impl Apparatus {
    pub fn build(config: &ProtocolConfig) -> Result<Self> {
        config.validate()?;
        let grid = config.grid()?;
        let mass = config.mass();
        let source = make_gaussian_packet(&config.packet(), &grid)?;
        let at_slits = evolve_free(&source, mass, config.t0)?;
        let flight = config.t1() - config.t0;

        let solve = |choice: SlitChoice| -> Result<SettingPhysics> {
            let mask = config.mask(choice)?;
            let outcome = apply_aperture(&at_slits, &mask)?;
            let transmitted_fraction = outcome.transmitted_fraction();
            let Some(field) = outcome.into_field() else {
                return Ok(SettingPhysics {
                    transmitted_fraction,
                    p_left: 0.5,
                    slit_field: None,
                    screen: None,
                    sampler: None,
                    score: None,
                    score_moments: (0.0, 0.0),
                    score_rank: None,
                    floor: 0.0,
                });
            };
            check_no_wrap(config, &field, flight)?;
            let (wl, wr) = slit_weights(&field, &mask);
            let screen = intensity(&evolve_free(&field, mass, flight)?)?.normalized()?;
            let peak = screen.intensity().iter().cloned().fold(0.0, f64::max);
            let floor = RELATIVE_DENSITY_FLOOR * peak;
            Ok(SettingPhysics {
                transmitted_fraction,
                p_left: wl / (wl + wr),
                sampler: Some(screen.sampler()?),
                score: None,
                score_moments: (0.0, 0.0),
                score_rank: None,
                floor,
                screen: Some(screen),
                slit_field: Some(field),
            })
        };
        let mut settings = [solve(SlitChoice::Both)?, solve(SlitChoice::LeftOnly)?, solve(SlitChoice::RightOnly)?];
        // The which-path reference of the both-open setting is the incoherent
        // mixture of the two single-slit patterns. Single-slit settings are
        // their own reference and score zero everywhere.
        if let (Some(both), Some(left), Some(right)) =
            (&settings[0].screen, &settings[1].screen, &settings[2].screen)
        {
            let pl = settings[0].p_left;
            let mixed: Vec<f64> = left
                .intensity()
                .iter()
                .zip(right.intensity())
                .map(|(l, r)| pl * l + (1.0 - pl) * r)
                .collect();
            let reference = ScreenPattern::new(both.grid().clone(), mixed)?;
            let (table, moments) = score_table(both, &reference, settings[0].floor);
            settings[0].score_rank = Some(score_rank(both, &table));
            settings[0].score = Some(table);
            settings[0].score_moments = moments;
        }
        Ok(Apparatus { config: config.clone(), settings })
    }

    pub fn config(&self) -> &ProtocolConfig {
        &self.config
    }

    /// Slit transmission probability used for trials with this setting.
    pub fn alpha(&self, choice: SlitChoice) -> f64 {
        self.config.alpha_override.unwrap_or_else(|| self.emergent_alpha(choice))
    }

    /// Transmission computed from the wave mechanics alone.
    pub fn emergent_alpha(&self, choice: SlitChoice) -> f64 {
        self.settings[index(choice)].transmitted_fraction
    }

    /// Probability that a which-slit measurement on a transmitted neutron returns Left.
    pub fn p_left(&self, choice: SlitChoice) -> f64 {
        self.settings[index(choice)].p_left
    }

    /// Normalized field just behind the slits.
    pub fn slit_field(&self, choice: SlitChoice) -> Option<&ComplexField> {
        self.settings[index(choice)].slit_field.as_ref()
    }

    /// Screen pattern at t1 for a setting.
    pub fn screen_pattern(&self, choice: SlitChoice) -> Option<&ScreenPattern> {
        self.settings[index(choice)].screen.as_ref()
    }

    /// Screen pattern at t1 of a neutron collapsed onto one slit at t0.
    pub fn collapsed_pattern(&self, slit: Slit) -> Option<&ScreenPattern> {
        match slit {
            Slit::Left => self.screen_pattern(SlitChoice::LeftOnly),
            Slit::Right => self.screen_pattern(SlitChoice::RightOnly),
        }
    }

    /// Sampler for the envelope a collapsed neutron lands in.
    pub fn collapsed_sampler(&self, slit: Slit) -> Option<&PatternSampler> {
        let choice = match slit {
            Slit::Left => SlitChoice::LeftOnly,
            Slit::Right => SlitChoice::RightOnly,
        };
        self.settings[index(choice)].sampler.as_ref()
    }

    /// Whether `x` is a possible t1 detection for a setting: on the grid and
    /// above the density floor.
    pub fn supports(&self, choice: SlitChoice, x: f64) -> bool {
        let s = &self.settings[index(choice)];
        match (&s.screen, s.screen.as_ref().and_then(|p| p.grid().bin_of(x))) {
            (Some(p), Some(i)) => p.intensity()[i] > s.floor,
            _ => false,
        }
    }

    /// Log ratio of the setting's t1 density to its which-path reference at a
    /// supported `x`. Large where interference fringes are bright.
    pub fn fringe_score(&self, choice: SlitChoice, x: f64) -> Option<f64> {
        if !self.supports(choice, x) {
            return None;
        }
        let s = &self.settings[index(choice)];
        match (&s.score, s.screen.as_ref().and_then(|p| p.grid().bin_of(x))) {
            (Some(t), Some(i)) => Some(t[i]),
            _ => Some(0.0),
        }
    }

    /// Per-cell fringe scores of a setting over the screen grid.
    pub fn fringe_score_table(&self, choice: SlitChoice) -> Option<&[f64]> {
        self.settings[index(choice)].score.as_deref()
    }

    /// Where a supported `x` falls when screen cells are ordered by decreasing
    /// fringe score and weighted by detection probability. Uniform on [0, 1)
    /// for honest detections, up to cell granularity.
    pub fn fringe_rank(&self, choice: SlitChoice, x: f64) -> Option<f64> {
        let s = &self.settings[index(choice)];
        let i = s.screen.as_ref()?.grid().bin_of(x)?;
        Some(s.score_rank.as_ref()?[i])
    }

    /// Probability of each of `bins` equal-width fringe-rank classes under the
    /// honest pattern.
    pub fn fringe_rank_masses(&self, choice: SlitChoice, bins: usize) -> Option<Vec<f64>> {
        let s = &self.settings[index(choice)];
        let (screen, rank) = (s.screen.as_ref()?, s.score_rank.as_ref()?);
        let total: f64 = screen.intensity().iter().sum();
        let mut masses = vec![0.0; bins];
        for (v, r) in screen.intensity().iter().zip(rank) {
            masses[rank_bin(*r, bins)] += v / total;
        }
        Some(masses)
    }

    /// Mean and variance of the fringe score of an honest detection.
    pub fn score_moments(&self, choice: SlitChoice) -> (f64, f64) {
        self.settings[index(choice)].score_moments
    }

    /// Probability that an honest party announces a detection on a trial.
    pub fn detection_probability(&self, choice: SlitChoice, measure_time: f64) -> f64 {
        self.alpha(choice) * (-measure_time / self.config.tau).exp() * self.config.detector_efficiency
    }

    /// Runs the physics of one trial up to the slits.
    pub fn transit<'a>(&'a self, setup: &TrialSetup, nature: &mut SimRng) -> TrialNature<'a> {
        let u_transmit: f64 = nature.random();
        let decay_time = sample_decay_time(&DecayParams { tau: self.config.tau }, nature);
        let u_detector: f64 = nature.random();
        let transmitted = u_transmit < self.alpha(setup.choice);
        TrialNature {
            trial_id: setup.trial_id,
            neutron: transmitted.then_some(Neutron {
                apparatus: self,
                choice: setup.choice,
                decay_time,
                detector_fires: u_detector < self.config.detector_efficiency,
            }),
            decay_time,
        }
    }

    /// Detection distributions for a measurement deferred to `measure_time`.
    pub fn delayed_patterns(&self, measure_time: f64) -> Result<DelayedPatterns> {
        let elapsed = measure_time - self.config.t0;
        if !(elapsed > 0.0) {
            return Err(QbcError::InvalidParams("measure time must follow t0".into()));
        }
        let mass = self.config.mass();
        let half = self.config.grid_half_width;
        let mut patterns = Vec::with_capacity(3);
        for choice in ALL_CHOICES {
            let Some(field) = self.slit_field(choice) else {
                patterns.push(None);
                continue;
            };
            let fits = travel(&self.config, field, elapsed) + 0.5 * self.config.slit_separation < half;
            let pattern = if fits {
                intensity(&evolve_free(field, mass, elapsed)?)?.normalized()?
            } else {
                far_field_pattern(field, mass, elapsed)?
            };
            patterns.push(Some(pattern));
        }
        let samplers = patterns
            .iter()
            .map(|p| p.as_ref().map(|p| p.sampler()).transpose())
            .collect::<Result<Vec<_>>>()?;
        Ok(DelayedPatterns { measure_time, patterns, samplers })
    }
}

/// Class index of a fringe rank among `bins` equal-width classes.
pub fn rank_bin(rank: f64, bins: usize) -> usize {
    ((rank * bins as f64) as usize).min(bins - 1)
}

/// Detection distributions at a late measurement time, per setting.
#[derive(Debug, Clone)]
pub struct DelayedPatterns {
    measure_time: f64,
    patterns: Vec<Option<ScreenPattern>>,
    samplers: Vec<Option<PatternSampler>>,
}

impl DelayedPatterns {
    pub fn measure_time(&self) -> f64 {
        self.measure_time
    }

    pub fn pattern(&self, choice: SlitChoice) -> Option<&ScreenPattern> {
        self.patterns[index(choice)].as_ref()
    }
}

/// One of the N setups Bob prepared. The slit setting is not readable.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialSetup {
    trial_id: u64,
    choice: SlitChoice,
}

impl TrialSetup {
    pub(crate) fn new(trial_id: u64, choice: SlitChoice) -> Self {
        TrialSetup { trial_id, choice }
    }

    pub fn trial_id(&self) -> u64 {
        self.trial_id
    }
}

/// Bob's private record of his slit settings, read only at verification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SealedSlitRecord {
    pub session_id: String,
    choices: Vec<SlitChoice>,
}

impl SealedSlitRecord {
    pub(crate) fn new(session_id: String, choices: Vec<SlitChoice>) -> Self {
        SealedSlitRecord { session_id, choices }
    }

    /// Opens the record. Only the verifier does this.
    pub fn choices(&self) -> &[SlitChoice] {
        &self.choices
    }
}

/// What nature decided for one trial.
#[derive(Debug, Clone)]
pub struct TrialNature<'a> {
    pub trial_id: u64,
    /// Present when the neutron got through the slits.
    pub neutron: Option<Neutron<'a>>,
    pub decay_time: f64,
}

/// A neutron that made it through the slits.
#[derive(Debug, Clone)]
pub struct Neutron<'a> {
    apparatus: &'a Apparatus,
    choice: SlitChoice,
    decay_time: f64,
    detector_fires: bool,
}

impl Neutron<'_> {
    pub fn decay_time(&self) -> f64 {
        self.decay_time
    }

    /// Whether a detector looking at time `t` registers the neutron.
    pub fn detectable_at(&self, t: f64) -> bool {
        self.decay_time > t && self.detector_fires
    }

    /// Projective which-slit measurement at t0.
    pub fn measure_which_slit<R: Rng + ?Sized>(&self, rng: &mut R) -> Slit {
        if rng.random::<f64>() < self.apparatus.p_left(self.choice) {
            Slit::Left
        } else {
            Slit::Right
        }
    }

    /// Detection position on the screen at t1.
    pub fn detect_on_screen<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.apparatus.settings[index(self.choice)]
            .sampler
            .as_ref()
            .expect("transmitted neutrons have a screen pattern")
            .sample(rng)
    }

    /// Detection position at a deferred time.
    pub fn detect_late<R: Rng + ?Sized>(&self, patterns: &DelayedPatterns, rng: &mut R) -> f64 {
        patterns.samplers[index(self.choice)]
            .as_ref()
            .expect("transmitted neutrons have a delayed pattern")
            .sample(rng)
    }

    /// Field after a which-slit outcome, for inspecting the counterfactual screen.
    pub fn collapsed_field(&self, slit: Slit) -> Result<ComplexField> {
        let field = self.apparatus.slit_field(self.choice).expect("transmitted");
        collapse(field, &self.apparatus.config.mask(self.choice)?, slit)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::which_slit_measure;
    use crate::rng::{substream, Domain};
    use std::sync::OnceLock;

    fn apparatus() -> &'static Apparatus {
        static A: OnceLock<Apparatus> = OnceLock::new();
        A.get_or_init(|| Apparatus::build(&ProtocolConfig::default()).unwrap())
    }

    #[test]
    fn settings_are_mirror_images() {
        let a = apparatus();
        assert!((a.emergent_alpha(SlitChoice::LeftOnly) - a.emergent_alpha(SlitChoice::RightOnly)).abs() < 1e-12);
        let both = a.emergent_alpha(SlitChoice::Both);
        assert!((both - 2.0 * a.emergent_alpha(SlitChoice::LeftOnly)).abs() < 1e-12);
        assert!((a.p_left(SlitChoice::Both) - 0.5).abs() < 1e-12);
        assert_eq!(a.p_left(SlitChoice::LeftOnly), 1.0);
        assert_eq!(a.p_left(SlitChoice::RightOnly), 0.0);
        let l = a.screen_pattern(SlitChoice::LeftOnly).unwrap();
        let r = a.screen_pattern(SlitChoice::RightOnly).unwrap();
        for (x, y) in l.intensity().iter().zip(r.mirrored().intensity()) {
            assert!((x - y).abs() <= 1e-10 * l.intensity().iter().cloned().fold(0.0, f64::max));
        }
    }

    #[test]
    fn neutron_measurement_matches_engine() {
        let a = apparatus();
        let setup = TrialSetup::new(0, SlitChoice::Both);
        let mut nature = substream(1, Domain::Nature, 0);
        let n = loop {
            if let Some(n) = a.transit(&setup, &mut nature).neutron {
                break n;
            }
        };
        let mask = a.config().mask(SlitChoice::Both).unwrap();
        let field = a.slit_field(SlitChoice::Both).unwrap();
        for i in 0..200 {
            let mut r1 = substream(9, Domain::AliceMeasurement, i);
            let mut r2 = r1.clone();
            let (engine_slit, _) = which_slit_measure(field, &mask, &mut r1).unwrap();
            assert_eq!(n.measure_which_slit(&mut r2), engine_slit);
        }
    }

    #[test]
    fn alpha_override_applies() {
        let c = ProtocolConfig { alpha_override: Some(0.75), ..Default::default() };
        let a = Apparatus::build(&c).unwrap();
        assert_eq!(a.alpha(SlitChoice::LeftOnly), 0.75);
        assert!(a.emergent_alpha(SlitChoice::LeftOnly) < 0.75);
    }
}
