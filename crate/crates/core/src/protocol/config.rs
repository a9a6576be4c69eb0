use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::constants::*;
use crate::engine::{ApertureMask, Grid, OpenSlits, PacketParams, Units};
use crate::error::{invalid, QbcError, Result};

/// Everything that fixes a protocol session apart from the seed and the bit.
///
/// Times are measured from the moment Bob releases the neutron. The screen
/// arrival time is derived from the flight: `t1 = t0 + L·m/p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProtocolConfig {
    /// Number of parallel double-slit setups, N.
    pub n_trials: usize,
    /// de Broglie wavelength of the beam, m.
    pub wavelength: f64,
    /// Slit-to-screen distance L, m.
    pub screen_distance: f64,
    /// Slit arrival time t0, s.
    pub t0: f64,
    /// Unveil time T, s.
    pub unveil_time: f64,
    /// Mean lifetime τ, s.
    pub tau: f64,
    /// End of the commitment phase, s.
    pub commit_end: f64,
    /// Initial transverse rms width of the packet at the source, m.
    pub sigma0: f64,
    pub slit_width: f64,
    pub slit_separation: f64,
    pub edge_softness: f64,
    /// Half width of the transverse grid, m.
    pub grid_half_width: f64,
    pub grid_points: usize,
    /// Probability Bob leaves both slits open.
    pub p_both: f64,
    /// Replaces the emergent slit transmission probability when set.
    pub alpha_override: Option<f64>,
    /// Verifier significance level.
    pub epsilon_v: f64,
    /// `t1` may not exceed this fraction of τ.
    pub t1_guard: f64,
    pub detector_efficiency: f64,
    /// Test-only leak: stamp announcements with the actual measurement time.
    pub announce_at_measurement: bool,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        ProtocolConfig {
            n_trials: 200,
            wavelength: DEFAULT_WAVELENGTH,
            screen_distance: DEFAULT_SCREEN_DISTANCE,
            t0: DEFAULT_SCREEN_DISTANCE / speed_for_wavelength(DEFAULT_WAVELENGTH),
            unveil_time: NEUTRON_LIFETIME,
            tau: NEUTRON_LIFETIME,
            commit_end: NEUTRON_LIFETIME,
            sigma0: 1.0e-4,
            slit_width: DEFAULT_SLIT_WIDTH,
            slit_separation: DEFAULT_SLIT_SEPARATION,
            edge_softness: 0.0,
            grid_half_width: default_grid_half_width(DEFAULT_WAVELENGTH, DEFAULT_SCREEN_DISTANCE, DEFAULT_SLIT_WIDTH),
            grid_points: 1 << 14,
            p_both: 0.5,
            alpha_override: None,
            epsilon_v: 1e-3,
            t1_guard: 0.01,
            detector_efficiency: 1.0,
            announce_at_measurement: false,
        }
    }
}

/// Eight times the full width of the single-slit central lobe, so the
/// diffraction tails reach the screen without wrapping around the grid.
pub fn default_grid_half_width(wavelength: f64, screen_distance: f64, slit_width: f64) -> f64 {
    8.0 * 2.0 * wavelength * screen_distance / slit_width
}

impl ProtocolConfig {
    pub fn speed(&self) -> f64 {
        speed_for_wavelength(self.wavelength)
    }

    pub fn mass(&self) -> f64 {
        NEUTRON_MASS
    }

    /// Screen arrival time.
    pub fn t1(&self) -> f64 {
        self.t0 + self.screen_distance / self.speed()
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |name: &str, v: f64| -> Result<()> {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                invalid(format!("{name} must be positive and finite, got {v}"))
            }
        };
        if self.n_trials < 1 {
            return invalid("n_trials must be at least 1");
        }
        pos("wavelength", self.wavelength)?;
        pos("screen_distance", self.screen_distance)?;
        pos("t0", self.t0)?;
        pos("tau", self.tau)?;
        pos("sigma0", self.sigma0)?;
        pos("grid_half_width", self.grid_half_width)?;
        let t1 = self.t1();
        if !(t1 < self.commit_end && self.commit_end <= self.unveil_time) {
            return invalid(format!(
                "need t0 < t1 < commit_end <= T, got t1={t1}, commit_end={}, T={}",
                self.commit_end, self.unveil_time
            ));
        }
        if !(0.0..=1.0).contains(&self.p_both) {
            return invalid("p_both must lie in [0, 1]");
        }
        if let Some(a) = self.alpha_override {
            if !(0.0..=1.0).contains(&a) {
                return invalid("alpha_override must lie in [0, 1]");
            }
        }
        if !(self.epsilon_v > 0.0 && self.epsilon_v < 1.0) {
            return invalid("epsilon_v must lie in (0, 1)");
        }
        if !(self.detector_efficiency > 0.0 && self.detector_efficiency <= 1.0) {
            return invalid("detector_efficiency must lie in (0, 1]");
        }
        if !(self.t1_guard > 0.0) {
            return invalid("t1_guard must be positive");
        }
        Grid::symmetric(self.grid_half_width, self.grid_points)?;
        self.mask(OpenSlits::Both)?;
        Ok(())
    }

    /// Trips when the screen arrival is not negligible against the lifetime.
    pub fn check_guard(&self) -> Result<()> {
        let t1 = self.t1();
        if t1 > self.t1_guard * self.tau {
            return Err(QbcError::ConfigGuard(format!(
                "t1 = {t1} s exceeds {} of tau = {} s",
                self.t1_guard, self.tau
            )));
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::symmetric(self.grid_half_width, self.grid_points)
    }

    pub fn packet(&self) -> PacketParams {
        PacketParams { sigma0: self.sigma0, x0: 0.0, p0: 0.0, mass: self.mass(), units: Units::Si }
    }

    pub fn mask(&self, open: OpenSlits) -> Result<ApertureMask> {
        ApertureMask::new(self.slit_width, self.slit_separation, open, self.edge_softness)
    }

    /// Short content hash identifying the configuration.
    pub fn config_hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        hex::encode(&digest[..8])
    }
}
