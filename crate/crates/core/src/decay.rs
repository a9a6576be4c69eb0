//! Exponential neutron decay.

use rand::Rng;
use rand_distr::{Distribution, Exp};

use crate::constants::NEUTRON_LIFETIME;
use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayParams {
    /// Mean lifetime τ, s.
    pub tau: f64,
}

impl Default for DecayParams {
    fn default() -> Self {
        DecayParams { tau: NEUTRON_LIFETIME }
    }
}

impl DecayParams {
    pub fn new(tau: f64) -> Result<Self> {
        if !(tau > 0.0 && tau.is_finite()) {
            return invalid(format!("lifetime must be positive, got {tau}"));
        }
        Ok(DecayParams { tau })
    }
}

/// S(t) = exp(-t/τ).
pub fn survival_probability(t: f64, params: &DecayParams) -> Result<f64> {
    if !(t >= 0.0) {
        return invalid(format!("survival time must be non-negative, got {t}"));
    }
    Ok((-t / params.tau).exp())
}

pub fn sample_decay_time<R: Rng + ?Sized>(params: &DecayParams, rng: &mut R) -> f64 {
    Exp::new(1.0 / params.tau).expect("validated lifetime").sample(rng)
}

/// Expected number of neutrons still alive at `t` out of `n` sent through
/// slits that transmit with probability `alpha`.
pub fn surviving_count(n: usize, alpha: f64, t: f64, params: &DecayParams) -> Result<f64> {
    if !(0.0..=1.0).contains(&alpha) {
        return invalid(format!("alpha must lie in [0, 1], got {alpha}"));
    }
    Ok(n as f64 * alpha * survival_probability(t, params)?)
}
