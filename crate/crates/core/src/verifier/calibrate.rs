//! Monte Carlo calibration of the pattern statistic under honest play.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::pattern_statistic;
use crate::error::{QbcError, Result};
use crate::fmt::f64_string;
use crate::protocol::{
    alice_commit_honest, bob_prepare_trials, Apparatus, Bit, Revealed, SessionKey,
};
use crate::rng::session_seed;

pub const QUANTILE_SCHEMA: &str = "qbc-quantiles/1";

/// Lower critical value of the pattern statistic for one configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileTable {
    pub schema: String,
    pub config_hash: String,
    pub seed: u64,
    pub sessions: usize,
    #[serde(with = "f64_string")]
    pub level: f64,
    #[serde(with = "f64_string")]
    pub z_quantile: f64,
    #[serde(with = "f64_string")]
    pub z_mean: f64,
    #[serde(with = "f64_string")]
    pub z_sd: f64,
}

impl QuantileTable {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let table: QuantileTable = serde_json::from_str(&text)?;
        if table.schema != QUANTILE_SCHEMA {
            return Err(QbcError::Serialization(format!("unknown quantile schema {}", table.schema)));
        }
        Ok(table)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        std::fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }
}

/// Pattern statistic of one honest bit-1 session.
pub fn honest_pattern_statistic(apparatus: &Apparatus, session: &SessionKey) -> Result<f64> {
    let (setups, sealed) = bob_prepare_trials(apparatus.config(), session);
    let (_, state) = alice_commit_honest(Bit::One, &setups, apparatus, session)?;
    let entries: Vec<_> = state
        .trials
        .iter()
        .filter_map(|t| match t.datum {
            Some(Revealed::Position { position_m }) => Some((sealed.choices()[t.trial_id as usize], position_m)),
            _ => None,
        })
        .collect();
    pattern_statistic(apparatus, &entries)
        .ok_or_else(|| QbcError::Invariant("honest detection outside the screen pattern support".into()))
}

/// Runs `sessions` honest bit-1 sessions and records the lower
/// `epsilon_v / 2` quantile of the pattern statistic.
pub fn calibrate_quantiles(apparatus: &Apparatus, sessions: usize, seed: u64) -> Result<QuantileTable> {
    let config = apparatus.config();
    let level = config.epsilon_v / 2.0;
    if (sessions as f64) * level < 1.0 {
        return Err(QbcError::InvalidParams(format!(
            "{sessions} sessions cannot resolve a quantile at level {level}"
        )));
    }
    let mut z = (0..sessions as u64)
        .into_par_iter()
        .map(|i| honest_pattern_statistic(apparatus, &SessionKey::new(session_seed(seed, i))))
        .collect::<Result<Vec<f64>>>()?;
    z.sort_by(f64::total_cmp);
    let k = (level * sessions as f64).floor() as usize;
    let mean = z.iter().sum::<f64>() / sessions as f64;
    let var = z.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / sessions as f64;
    Ok(QuantileTable {
        schema: QUANTILE_SCHEMA.into(),
        config_hash: config.config_hash(),
        seed,
        sessions,
        level,
        z_quantile: z[k],
        z_mean: mean,
        z_sd: var.sqrt(),
    })
}
