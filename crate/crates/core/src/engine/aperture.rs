use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::ComplexField;
use crate::error::{invalid, Result};

/// Amplitude transmission of a screen as a function of transverse position.
pub trait Transmission {
    /// Value in `[0, 1]`.
    fn transmission(&self, x: f64) -> f64;
}

/// Same transmission everywhere; `1.0` is no screen at all, `0.0` a wall.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformTransmission(pub f64);

impl Transmission for UniformTransmission {
    fn transmission(&self, _x: f64) -> f64 {
        self.0.clamp(0.0, 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OpenSlits {
    Both,
    LeftOnly,
    RightOnly,
}

impl OpenSlits {
    pub fn left_open(self) -> bool {
        matches!(self, OpenSlits::Both | OpenSlits::LeftOnly)
    }

    pub fn right_open(self) -> bool {
        matches!(self, OpenSlits::Both | OpenSlits::RightOnly)
    }
}

/// Two slits centered at ±d/2 about x = 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ApertureMask {
    slit_width: f64,
    slit_separation: f64,
    open: OpenSlits,
    edge_softness: f64,
}

impl ApertureMask {
    pub fn new(slit_width: f64, slit_separation: f64, open: OpenSlits, edge_softness: f64) -> Result<Self> {
        if !(slit_width > 0.0 && slit_width.is_finite()) {
            return invalid(format!("slit width must be positive, got {slit_width}"));
        }
        if !(slit_separation > slit_width) {
            return invalid("slit separation must exceed slit width");
        }
        if !(edge_softness >= 0.0) || edge_softness > slit_width {
            return invalid("edge softness must lie in [0, slit width]");
        }
        if slit_separation - slit_width < edge_softness {
            return invalid("softened slits would overlap");
        }
        Ok(ApertureMask { slit_width, slit_separation, open, edge_softness })
    }

    pub fn hard(slit_width: f64, slit_separation: f64, open: OpenSlits) -> Result<Self> {
        ApertureMask::new(slit_width, slit_separation, open, 0.0)
    }

    pub fn slit_width(&self) -> f64 {
        self.slit_width
    }

    pub fn slit_separation(&self) -> f64 {
        self.slit_separation
    }

    pub fn open(&self) -> OpenSlits {
        self.open
    }

    pub fn edge_softness(&self) -> f64 {
        self.edge_softness
    }

    pub fn with_open(&self, open: OpenSlits) -> ApertureMask {
        ApertureMask { open, ..*self }
    }

    /// Profile of a single slit centered at `center`, ignoring which slits are open.
    fn slit_profile(&self, x: f64, center: f64) -> f64 {
        let u = (x - center).abs();
        let half = 0.5 * self.slit_width;
        let s = self.edge_softness;
        if s == 0.0 {
            return if u <= half { 1.0 } else { 0.0 };
        }
        let inner = half - 0.5 * s;
        if u <= inner {
            1.0
        } else if u >= half + 0.5 * s {
            0.0
        } else {
            0.5 * (1.0 + (PI * (u - inner) / s).cos())
        }
    }

    pub fn left_center(&self) -> f64 {
        -0.5 * self.slit_separation
    }

    pub fn right_center(&self) -> f64 {
        0.5 * self.slit_separation
    }

    /// Whether `x` lies in the support of the left slit (open or not).
    pub fn in_left_region(&self, x: f64) -> bool {
        self.slit_profile(x, self.left_center()) > 0.0
    }

    pub fn in_right_region(&self, x: f64) -> bool {
        self.slit_profile(x, self.right_center()) > 0.0
    }
}

impl Transmission for ApertureMask {
    fn transmission(&self, x: f64) -> f64 {
        let mut t = 0.0;
        if self.open.left_open() {
            t += self.slit_profile(x, self.left_center());
        }
        if self.open.right_open() {
            t += self.slit_profile(x, self.right_center());
        }
        t.min(1.0)
    }
}

/// Result of passing a field through a screen.
#[derive(Debug, Clone, PartialEq)]
pub enum ApertureOutcome {
    /// Renormalized field behind the screen and the probability of getting through.
    Transmitted { field: ComplexField, transmitted_fraction: f64 },
    AllBlocked,
}

impl ApertureOutcome {
    pub fn transmitted_fraction(&self) -> f64 {
        match self {
            ApertureOutcome::Transmitted { transmitted_fraction, .. } => *transmitted_fraction,
            ApertureOutcome::AllBlocked => 0.0,
        }
    }

    pub fn field(&self) -> Option<&ComplexField> {
        match self {
            ApertureOutcome::Transmitted { field, .. } => Some(field),
            ApertureOutcome::AllBlocked => None,
        }
    }

    pub fn into_field(self) -> Option<ComplexField> {
        match self {
            ApertureOutcome::Transmitted { field, .. } => Some(field),
            ApertureOutcome::AllBlocked => None,
        }
    }
}

/// Multiplies the field by the screen transmission.
pub fn apply_aperture<M: Transmission + ?Sized>(field: &ComplexField, mask: &M) -> Result<ApertureOutcome> {
    let grid = *field.grid();
    let before = field.norm_sqr();
    let mut out = field.clone();
    for (a, x) in out.amplitudes_mut().iter_mut().zip(grid.positions()) {
        *a *= mask.transmission(x);
    }
    let after = out.norm_sqr();
    if after == 0.0 {
        return Ok(ApertureOutcome::AllBlocked);
    }
    let transmitted_fraction = (after / before).clamp(0.0, 1.0);
    out.normalize()?;
    Ok(ApertureOutcome::Transmitted { field: out, transmitted_fraction })
}
