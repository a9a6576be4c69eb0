//! Flat `key = value` run configuration.
//!
//! The file is TOML restricted to top-level scalars: no tables, no arrays.
//! Keys are the [`ProtocolConfig`] fields plus a few run settings. Unset
//! `t0` and `grid_half_width` follow the configured wavelength and geometry.

use std::path::Path;

use serde::Deserialize;

use crate::adversary::GuessRule;
use crate::constants::speed_for_wavelength;
use crate::error::{QbcError, Result};
use crate::protocol::{default_grid_half_width, ProtocolConfig};

/// Keys that configure the run rather than the protocol.
pub const RUN_KEYS: [&str; 6] =
    ["seed", "sessions", "calibration_sessions", "measure_time", "announce_fraction", "guess_rule"];

const INTEGER_KEYS: [&str; 5] = ["n_trials", "grid_points", "seed", "sessions", "calibration_sessions"];

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunSettings {
    pub protocol: ProtocolConfig,
    pub seed: Option<u64>,
    pub sessions: Option<usize>,
    pub calibration_sessions: Option<usize>,
    pub measure_time: Option<f64>,
    pub announce_fraction: Option<f64>,
    pub guess_rule: Option<GuessRule>,
}

fn config_err(msg: impl Into<String>) -> QbcError {
    QbcError::Config(msg.into())
}

fn take<T: for<'de> Deserialize<'de>>(table: &mut toml::Table, key: &str) -> Result<Option<T>> {
    table
        .remove(key)
        .map(|v| v.try_into().map_err(|e| config_err(format!("{key}: {e}"))))
        .transpose()
}

impl RunSettings {
    pub fn parse(text: &str) -> Result<Self> {
        let mut table: toml::Table = text.parse().map_err(|e| config_err(format!("{e}")))?;
        for (key, value) in table.iter_mut() {
            match value {
                toml::Value::Table(_) | toml::Value::Array(_) => {
                    return Err(config_err(format!("{key}: only flat scalar values are allowed")));
                }
                toml::Value::Integer(i) if !INTEGER_KEYS.contains(&key.as_str()) => {
                    *value = toml::Value::Float(*i as f64);
                }
                _ => {}
            }
        }
        let seed = match table.remove("seed") {
            None => None,
            Some(toml::Value::Integer(i)) if i >= 0 => Some(i as u64),
            Some(toml::Value::String(s)) => Some(s.parse().map_err(|e| config_err(format!("seed: {e}")))?),
            Some(v) => return Err(config_err(format!("seed: expected a non-negative integer, got {v}"))),
        };
        let guess_rule = match table.remove("guess_rule") {
            None => None,
            Some(toml::Value::String(s)) => Some(parse_guess_rule(&s)?),
            Some(v) => return Err(config_err(format!("guess_rule: expected a string, got {v}"))),
        };
        let sessions = take(&mut table, "sessions")?;
        let calibration_sessions = take(&mut table, "calibration_sessions")?;
        let measure_time = take(&mut table, "measure_time")?;
        let announce_fraction = take(&mut table, "announce_fraction")?;

        let has_t0 = table.contains_key("t0");
        let has_half_width = table.contains_key("grid_half_width");
        let mut protocol: ProtocolConfig =
            toml::Value::Table(table).try_into().map_err(|e| config_err(format!("{e}")))?;
        if !has_t0 {
            protocol.t0 = protocol.screen_distance / speed_for_wavelength(protocol.wavelength);
        }
        if !has_half_width {
            protocol.grid_half_width =
                default_grid_half_width(protocol.wavelength, protocol.screen_distance, protocol.slit_width);
        }
        protocol.validate().map_err(|e| config_err(e.to_string()))?;
        Ok(RunSettings { protocol, seed, sessions, calibration_sessions, measure_time, announce_fraction, guess_rule })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }
}

pub fn parse_guess_rule(s: &str) -> Result<GuessRule> {
    match s {
        "ml" | "maximum_likelihood" => Ok(GuessRule::MaximumLikelihood),
        "sign" => Ok(GuessRule::Sign),
        "coin" => Ok(GuessRule::Coin),
        _ => Err(config_err(format!("unknown guess rule {s:?}; expected ml, sign or coin"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(RunSettings::parse("").unwrap(), RunSettings::default());
    }

    #[test]
    fn keys_and_derived_defaults() {
        let s = RunSettings::parse(
            "# comment\nn_trials = 50\nwavelength = 1e-9\nalpha_override = 1\nseed = 7\nguess_rule = \"coin\"\n",
        )
        .unwrap();
        assert_eq!(s.protocol.n_trials, 50);
        assert_eq!(s.protocol.alpha_override, Some(1.0));
        assert_eq!(s.seed, Some(7));
        assert_eq!(s.guess_rule, Some(GuessRule::Coin));
        let v = speed_for_wavelength(1e-9);
        assert!((s.protocol.t0 - 5.0 / v).abs() < 1e-15);
        assert!((s.protocol.grid_half_width - 16.0 * 1e-9 * 5.0 / 2.2e-5).abs() < 1e-15);
    }

    #[test]
    fn tables_and_unknown_keys_refused() {
        assert!(matches!(RunSettings::parse("[engine]\nn_trials = 3"), Err(QbcError::Config(_))));
        assert!(matches!(RunSettings::parse("x = [1, 2]"), Err(QbcError::Config(_))));
        assert!(matches!(RunSettings::parse("colour = 3"), Err(QbcError::Config(_))));
        assert!(matches!(RunSettings::parse("n_trials = 0"), Err(QbcError::Config(_))));
    }
}
