//! How well Bob can tell b=0 from b=1 before the unveil.
//!
//! Bob's view of a session is his own slit settings plus Alice's transcript.
//! The probe compares the two bits' view distributions through the
//! detection-count histogram and the per-trial (setting, detected)
//! frequencies, and reports the larger total-variation distance.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{invalid, Result};
use crate::fmt::f64_string;
use crate::protocol::{alice_commit_honest, bob_prepare_trials, Apparatus, Bit, CommitTranscript, SessionKey, SlitChoice};
use crate::rng::{session_seed, substream, Domain};

pub const MIN_PROBE_SESSIONS: usize = 100;
pub const BOOTSTRAP_REPLICATES: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcealingReport {
    pub sessions: usize,
    pub identical_seeds: bool,
    /// Raw distance between the empirical view distributions.
    #[serde(with = "f64_string")]
    pub tv_observed: f64,
    /// Mean raw distance between two samples of one pooled distribution.
    #[serde(with = "f64_string")]
    pub tv_null_mean: f64,
    /// Observed distance in excess of finite-sample noise, clipped at zero.
    #[serde(with = "f64_string")]
    pub tv_distance_estimate: f64,
    #[serde(with = "f64_string")]
    pub ci_low: f64,
    #[serde(with = "f64_string")]
    pub ci_high: f64,
    /// Whether every transcript's public structure was the same for both bits.
    pub schema_identical: bool,
}

impl ConcealingReport {
    pub fn ci_contains_zero(&self) -> bool {
        self.ci_low <= 0.0
    }
}

/// Bob's view of one session.
#[derive(Debug, Clone, PartialEq)]
struct View {
    count: usize,
    /// Detections per setting, then non-detections per setting.
    categories: [usize; 6],
}

fn view(choices: &[SlitChoice], transcript: &CommitTranscript) -> View {
    let mut categories = [0; 6];
    for a in &transcript.announcements {
        let c = match choices[a.trial_id as usize] {
            SlitChoice::Both => 0,
            SlitChoice::LeftOnly => 1,
            SlitChoice::RightOnly => 2,
        };
        categories[c + if a.detected { 0 } else { 3 }] += 1;
    }
    View { count: transcript.detected_count(), categories }
}

/// Transcript with everything that may legitimately vary blanked out: the
/// session id and the detection flags.
pub fn public_structure(transcript: &CommitTranscript) -> Result<Value> {
    let mut v = serde_json::to_value(transcript)?;
    v["session_id"] = Value::Null;
    if let Some(list) = v["announcements"].as_array_mut() {
        for a in list {
            a["detected"] = Value::Null;
        }
    }
    Ok(v)
}

fn tv(a: &[View], b: &[View], n_trials: usize) -> f64 {
    let mut ha = vec![0.0; n_trials + 1];
    let mut hb = vec![0.0; n_trials + 1];
    let (mut ca, mut cb) = ([0.0; 6], [0.0; 6]);
    for v in a {
        ha[v.count] += 1.0 / a.len() as f64;
        for (x, y) in ca.iter_mut().zip(v.categories) {
            *x += y as f64;
        }
    }
    for v in b {
        hb[v.count] += 1.0 / b.len() as f64;
        for (x, y) in cb.iter_mut().zip(v.categories) {
            *x += y as f64;
        }
    }
    let half_l1 = |p: &[f64], q: &[f64]| 0.5 * p.iter().zip(q).map(|(x, y)| (x - y).abs()).sum::<f64>();
    let (ta, tb): (f64, f64) = (ca.iter().sum(), cb.iter().sum());
    let fa: Vec<f64> = ca.iter().map(|x| x / ta).collect();
    let fb: Vec<f64> = cb.iter().map(|x| x / tb).collect();
    half_l1(&ha, &hb).max(half_l1(&fa, &fb))
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    sorted[((q * (sorted.len() - 1) as f64).round() as usize).min(sorted.len() - 1)]
}

/// Runs `sessions` honest sessions per bit and compares Bob's views.
///
/// With `identical_seeds` both bits reuse the same session seeds, so the
/// views can differ only through decays between t0 and t1.
pub fn concealing_probe(apparatus: &Apparatus, sessions: usize, seed: u64, identical_seeds: bool) -> Result<ConcealingReport> {
    if sessions < MIN_PROBE_SESSIONS {
        return invalid(format!("the concealing probe needs at least {MIN_PROBE_SESSIONS} sessions"));
    }
    let n_trials = apparatus.config().n_trials;
    let runs = (0..sessions as u64)
        .into_par_iter()
        .map(|i| {
            let key = |bit: u64| {
                SessionKey::new(session_seed(seed, if identical_seeds { i } else { 2 * i + bit }))
            };
            let mut out = Vec::with_capacity(2);
            for (bit, k) in [(Bit::Zero, key(0)), (Bit::One, key(1))] {
                let (setups, sealed) = bob_prepare_trials(apparatus.config(), &k);
                let (t, _) = alice_commit_honest(bit, &setups, apparatus, &k)?;
                out.push((view(sealed.choices(), &t), public_structure(&t)?));
            }
            let (v1, s1) = out.pop().expect("two bits");
            let (v0, s0) = out.pop().expect("two bits");
            Ok((v0, v1, s0 == s1))
        })
        .collect::<Result<Vec<_>>>()?;
    let schema_identical = runs.iter().all(|r| r.2);
    let (zero, one): (Vec<View>, Vec<View>) = runs.into_iter().map(|(a, b, _)| (a, b)).unzip();
    let observed = tv(&zero, &one, n_trials);

    let pooled: Vec<&View> = zero.iter().chain(&one).collect();
    let mut null: Vec<f64> = (0..BOOTSTRAP_REPLICATES as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = substream(seed, Domain::Bootstrap, r);
            let mut draw = || -> Vec<View> {
                (0..sessions).map(|_| pooled[rng.random_range(0..pooled.len())].clone()).collect()
            };
            let (a, b) = (draw(), draw());
            tv(&a, &b, n_trials)
        })
        .collect();
    null.sort_by(f64::total_cmp);
    let null_mean = null.iter().sum::<f64>() / null.len() as f64;
    Ok(ConcealingReport {
        sessions,
        identical_seeds,
        tv_observed: observed,
        tv_null_mean: null_mean,
        tv_distance_estimate: (observed - null_mean).max(0.0),
        ci_low: (observed - quantile(&null, 0.975)).max(0.0),
        ci_high: (observed - quantile(&null, 0.025)).max(0.0),
        schema_identical,
    })
}
