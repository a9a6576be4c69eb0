//! Numerical matter-wave engine for the transverse coordinate.
//!
//! Fields live on a uniform, cell-centered periodic grid. Free evolution is
//! applied exactly in momentum space, so a single call covers any elapsed time.

mod aperture;
mod evolve;
mod measure;
mod pattern;

pub use aperture::{apply_aperture, ApertureMask, ApertureOutcome, OpenSlits, Transmission, UniformTransmission};
pub use evolve::{evolve_free, far_field_pattern, spectral_reach, wavenumbers};
pub use measure::{collapse, slit_weights, which_slit_measure, Slit};
pub use pattern::{
    analytic_fraunhofer, fringe_spacing, intensity, sample_position, FarFieldViolation,
    FraunhoferPattern, PatternSampler, ScreenPattern,
};

use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::constants::HBAR;
use crate::error::{invalid, QbcError, Result};
use crate::fmt::sig17;

/// Boundary amplitude guard, relative to the peak.
pub const BOUNDARY_GUARD: f64 = 1e-12;

/// Unit system of a field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Units {
    #[default]
    Si,
    /// ħ = 1; masses and times are dimensionless.
    Natural,
}

impl Units {
    pub fn hbar(self) -> f64 {
        match self {
            Units::Si => HBAR,
            Units::Natural => 1.0,
        }
    }
}

/// Uniform cell-centered grid: point `i` sits at `x_min + (i + 1/2)·dx`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    x_min: f64,
    x_max: f64,
    n_points: usize,
}

impl Grid {
    pub fn new(x_min: f64, x_max: f64, n_points: usize) -> Result<Self> {
        if n_points < 2 || !n_points.is_power_of_two() {
            return invalid(format!("n_points must be a power of two >= 2, got {n_points}"));
        }
        if !(x_min.is_finite() && x_max.is_finite()) || x_max <= x_min {
            return invalid(format!("grid bounds [{x_min}, {x_max}] are not increasing"));
        }
        Ok(Grid { x_min, x_max, n_points })
    }

    /// Grid on `[-half_width, half_width)`.
    pub fn symmetric(half_width: f64, n_points: usize) -> Result<Self> {
        Grid::new(-half_width, half_width, n_points)
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / self.n_points as f64
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.x_min + self.x_max)
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x_min + (i as f64 + 0.5) * self.dx()
    }

    pub fn positions(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_points).map(move |i| self.x(i))
    }

    /// Index of the cell containing `x`, if any.
    pub fn bin_of(&self, x: f64) -> Option<usize> {
        if !(x >= self.x_min && x < self.x_max) {
            return None;
        }
        let i = ((x - self.x_min) / self.dx()).floor() as usize;
        Some(i.min(self.n_points - 1))
    }

    pub fn contains(&self, x: f64) -> bool {
        self.bin_of(x).is_some()
    }
}

/// Discretized transverse wavefunction.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField {
    grid: Grid,
    units: Units,
    amplitudes: Vec<Complex64>,
}

impl ComplexField {
    pub fn new(grid: Grid, units: Units, amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.len() != grid.n_points() {
            return invalid(format!(
                "{} amplitudes for a grid of {} points",
                amplitudes.len(),
                grid.n_points()
            ));
        }
        Ok(ComplexField { grid, units, amplitudes })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn units(&self) -> Units {
        self.units
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub(crate) fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amplitudes
    }

    /// Σ|ψ|²·dx.
    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>() * self.grid.dx()
    }

    pub fn normalize(&mut self) -> Result<()> {
        let n = self.norm_sqr();
        if !(n > 0.0) || !n.is_finite() {
            return Err(QbcError::DegeneratePattern("field has zero norm".into()));
        }
        let s = 1.0 / n.sqrt();
        self.amplitudes.iter_mut().for_each(|a| *a *= s);
        Ok(())
    }

    pub fn is_normalized(&self, tol: f64) -> bool {
        (self.norm_sqr() - 1.0).abs() <= tol
    }

    /// ⟨x⟩ of |ψ|².
    pub fn centroid(&self) -> f64 {
        let w = self.norm_sqr() / self.grid.dx();
        self.amplitudes
            .iter()
            .zip(self.grid.positions())
            .map(|(a, x)| a.norm_sqr() * x)
            .sum::<f64>()
            / w
    }

    /// Standard deviation of |ψ|².
    pub fn width(&self) -> f64 {
        let c = self.centroid();
        let w = self.norm_sqr() / self.grid.dx();
        let var = self
            .amplitudes
            .iter()
            .zip(self.grid.positions())
            .map(|(a, x)| a.norm_sqr() * (x - c) * (x - c))
            .sum::<f64>()
            / w;
        var.sqrt()
    }

    /// Reflection through the grid midpoint.
    pub fn mirrored(&self) -> ComplexField {
        let mut amplitudes = self.amplitudes.clone();
        amplitudes.reverse();
        ComplexField { grid: self.grid, units: self.units, amplitudes }
    }

    /// CSV snapshot with header `x_m,re,im`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "x_m,re,im")?;
        for (x, a) in self.grid.positions().zip(&self.amplitudes) {
            writeln!(out, "{},{},{}", sig17(x), sig17(a.re), sig17(a.im))?;
        }
        Ok(())
    }
}

/// Initial Gaussian wave packet.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PacketParams {
    /// Initial rms width of |ψ|².
    pub sigma0: f64,
    pub x0: f64,
    /// Transverse momentum.
    pub p0: f64,
    pub mass: f64,
    #[serde(default)]
    pub units: Units,
}

impl PacketParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma0 > 0.0 && self.sigma0.is_finite()) {
            return invalid(format!("sigma0 must be positive, got {}", self.sigma0));
        }
        if !(self.mass > 0.0 && self.mass.is_finite()) {
            return invalid(format!("mass must be positive, got {}", self.mass));
        }
        if !self.x0.is_finite() || !self.p0.is_finite() {
            return invalid("packet center and momentum must be finite");
        }
        Ok(())
    }
}

/// ψ(x) ∝ exp(−(x−x0)²/(4σ0²) + i·p0·x/ħ), normalized on the grid.
pub fn make_gaussian_packet(params: &PacketParams, grid: &Grid) -> Result<ComplexField> {
    params.validate()?;
    let hbar = params.units.hbar();
    let k0 = params.p0 / hbar;
    let profile = |x: f64| {
        let u = (x - params.x0) / params.sigma0;
        (-0.25 * u * u).exp()
    };
    let edge = profile(grid.x(0)).max(profile(grid.x(grid.n_points() - 1)));
    let peak = profile(params.x0.clamp(grid.x(0), grid.x(grid.n_points() - 1)));
    let ratio = edge / peak;
    if !(ratio < BOUNDARY_GUARD) {
        return Err(QbcError::GridTooNarrow { ratio, limit: BOUNDARY_GUARD });
    }
    let amplitudes = grid
        .positions()
        .map(|x| Complex64::from_polar(profile(x), k0 * (x - params.x0)))
        .collect();
    let mut field = ComplexField::new(*grid, params.units, amplitudes)?;
    field.normalize()?;
    Ok(field)
}

/// Analytic rms width of a free Gaussian after time `t`.
pub fn gaussian_width_at(sigma0: f64, mass: f64, t: f64, units: Units) -> f64 {
    let s = units.hbar() * t / (2.0 * mass * sigma0 * sigma0);
    sigma0 * (1.0 + s * s).sqrt()
}
