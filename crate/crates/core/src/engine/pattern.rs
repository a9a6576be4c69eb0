use std::f64::consts::PI;
use std::io::Write;

use rand::Rng;

use super::{ApertureMask, ComplexField, Grid, OpenSlits};
use crate::error::{invalid, QbcError, Result};
use crate::fmt::sig17;

/// Detection probability density on a screen.
#[derive(Debug, Clone, PartialEq)]
pub struct ScreenPattern {
    grid: Grid,
    intensity: Vec<f64>,
    total_weight: f64,
}

impl ScreenPattern {
    pub fn new(grid: Grid, intensity: Vec<f64>) -> Result<Self> {
        if intensity.len() != grid.n_points() {
            return invalid("intensity length does not match grid");
        }
        if let Some(v) = intensity.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
            return invalid(format!("intensity must be finite and non-negative, found {v}"));
        }
        let total_weight = intensity.iter().sum::<f64>() * grid.dx();
        Ok(ScreenPattern { grid, intensity, total_weight })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn intensity(&self) -> &[f64] {
        &self.intensity
    }

    pub fn total_weight(&self) -> f64 {
        self.total_weight
    }

    pub fn is_normalized(&self, tol: f64) -> bool {
        (self.total_weight - 1.0).abs() <= tol
    }

    pub fn normalized(&self) -> Result<ScreenPattern> {
        if !(self.total_weight > 0.0) {
            return Err(QbcError::DegeneratePattern("pattern has zero weight".into()));
        }
        let s = 1.0 / self.total_weight;
        ScreenPattern::new(self.grid, self.intensity.iter().map(|v| v * s).collect())
    }

    /// Normalized density at `x`; zero off the grid.
    pub fn density_at(&self, x: f64) -> f64 {
        match self.grid.bin_of(x) {
            Some(i) if self.total_weight > 0.0 => self.intensity[i] / self.total_weight,
            _ => 0.0,
        }
    }

    /// Probability mass of the bins whose centers fall in `[lo, hi]`.
    pub fn mass_between(&self, lo: f64, hi: f64) -> f64 {
        let dx = self.grid.dx();
        self.grid
            .positions()
            .zip(&self.intensity)
            .filter(|(x, _)| *x >= lo && *x <= hi)
            .map(|(_, v)| v * dx)
            .sum::<f64>()
            / self.total_weight
    }

    pub fn centroid(&self) -> f64 {
        let dx = self.grid.dx();
        self.grid.positions().zip(&self.intensity).map(|(x, v)| x * v * dx).sum::<f64>() / self.total_weight
    }

    pub fn width(&self) -> f64 {
        let c = self.centroid();
        let dx = self.grid.dx();
        let var = self
            .grid
            .positions()
            .zip(&self.intensity)
            .map(|(x, v)| (x - c) * (x - c) * v * dx)
            .sum::<f64>()
            / self.total_weight;
        var.sqrt()
    }

    pub fn mirrored(&self) -> ScreenPattern {
        let mut intensity = self.intensity.clone();
        intensity.reverse();
        ScreenPattern { grid: self.grid, intensity, total_weight: self.total_weight }
    }

    pub fn sampler(&self) -> Result<PatternSampler> {
        PatternSampler::new(self)
    }

    /// CSV with header `x_m,intensity`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "x_m,intensity")?;
        for (x, v) in self.grid.positions().zip(&self.intensity) {
            writeln!(out, "{},{}", sig17(x), sig17(*v))?;
        }
        Ok(())
    }
}

/// Born-rule screen pattern |ψ|².
pub fn intensity(field: &ComplexField) -> Result<ScreenPattern> {
    ScreenPattern::new(*field.grid(), field.amplitudes().iter().map(|a| a.norm_sqr()).collect())
}

/// Inverse-CDF sampler over the cells of a pattern.
#[derive(Debug, Clone)]
pub struct PatternSampler {
    grid: Grid,
    cdf: Vec<f64>,
}

impl PatternSampler {
    pub fn new(pattern: &ScreenPattern) -> Result<Self> {
        let mut acc = 0.0;
        let cdf: Vec<f64> = pattern
            .intensity
            .iter()
            .map(|v| {
                acc += v;
                acc
            })
            .collect();
        if !(acc > 0.0) {
            return Err(QbcError::DegeneratePattern("cannot sample a pattern with zero weight".into()));
        }
        Ok(PatternSampler { grid: pattern.grid, cdf })
    }

    pub fn sample_bin<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let total = *self.cdf.last().expect("non-empty grid");
        let u = rng.random::<f64>() * total;
        self.cdf.partition_point(|c| *c <= u).min(self.cdf.len() - 1)
    }

    /// Center of a sampled cell.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.grid.x(self.sample_bin(rng))
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }
}

/// One detection position drawn from the pattern.
pub fn sample_position<R: Rng + ?Sized>(pattern: &ScreenPattern, rng: &mut R) -> Result<f64> {
    Ok(pattern.sampler()?.sample(rng))
}

/// Raised when the screen is not in the far field of the aperture.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FarFieldViolation {
    /// (d + a)² / (λL); the textbook formula wants this ≪ 1.
    pub fresnel_number: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FraunhoferPattern {
    pub pattern: ScreenPattern,
    pub warning: Option<FarFieldViolation>,
}

const FAR_FIELD_LIMIT: f64 = 0.1;

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        x.sin() / x
    }
}

/// Textbook far-field double/single-slit pattern, normalized on `grid`.
pub fn analytic_fraunhofer(
    mask: &ApertureMask,
    wavelength: f64,
    distance: f64,
    grid: &Grid,
) -> Result<FraunhoferPattern> {
    if !(wavelength > 0.0) || !(distance > 0.0) {
        return invalid("wavelength and distance must be positive");
    }
    let a = mask.slit_width();
    let d = mask.slit_separation();
    let scale = PI / (wavelength * distance);
    let envelope = |x: f64| sinc(scale * a * x).powi(2);
    let intensity: Vec<f64> = grid
        .positions()
        .map(|x| match mask.open() {
            OpenSlits::Both => (scale * d * x).cos().powi(2) * envelope(x),
            OpenSlits::LeftOnly => envelope(x - mask.left_center()),
            OpenSlits::RightOnly => envelope(x - mask.right_center()),
        })
        .collect();
    let pattern = ScreenPattern::new(*grid, intensity)?.normalized()?;
    let fresnel_number = (d + a).powi(2) / (wavelength * distance);
    let warning = (fresnel_number > FAR_FIELD_LIMIT).then_some(FarFieldViolation { fresnel_number });
    Ok(FraunhoferPattern { pattern, warning })
}

/// Mean distance between adjacent dark fringes (intensity minima) inside
/// `[lo, hi]`, with parabolic sub-cell refinement of each minimum.
pub fn fringe_spacing(pattern: &ScreenPattern, lo: f64, hi: f64) -> Result<f64> {
    let v = pattern.intensity();
    let grid = pattern.grid();
    let dx = grid.dx();
    let mut peaks = Vec::new();
    for i in 1..v.len() - 1 {
        let x = grid.x(i);
        if x < lo || x > hi {
            continue;
        }
        if v[i] < v[i - 1] && v[i] <= v[i + 1] {
            let denom = v[i - 1] - 2.0 * v[i] + v[i + 1];
            let shift = if denom != 0.0 { 0.5 * (v[i - 1] - v[i + 1]) / denom } else { 0.0 };
            peaks.push(x + shift * dx);
        }
    }
    if peaks.len() < 2 {
        return Err(QbcError::DegeneratePattern(format!(
            "need two minima in [{lo}, {hi}], found {}",
            peaks.len()
        )));
    }
    Ok((peaks[peaks.len() - 1] - peaks[0]) / (peaks.len() - 1) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn screen() -> Grid {
        Grid::symmetric(2.0e-3, 8192).unwrap()
    }

    fn default_mask(open: OpenSlits) -> ApertureMask {
        ApertureMask::hard(DEFAULT_SLIT_WIDTH, DEFAULT_SLIT_SEPARATION, open).unwrap()
    }

    #[test]
    fn rejects_negative_intensity() {
        let g = Grid::symmetric(1.0, 4).unwrap();
        assert!(ScreenPattern::new(g, vec![0.0, -1.0, 0.0, 0.0]).is_err());
        assert!(ScreenPattern::new(g, vec![0.0; 3]).is_err());
    }

    #[test]
    fn fraunhofer_fringe_spacing_by_hand() {
        let fr = analytic_fraunhofer(&default_mask(OpenSlits::Both), DEFAULT_WAVELENGTH, DEFAULT_SCREEN_DISTANCE, &screen())
            .unwrap();
        let expected = 9.225e-5;
        assert!((DEFAULT_WAVELENGTH * DEFAULT_SCREEN_DISTANCE / DEFAULT_SLIT_SEPARATION - expected).abs() < 1e-12);
        let s = fringe_spacing(&fr.pattern, -2.0e-4, 2.0e-4).unwrap();
        assert!((s / expected - 1.0).abs() < 1e-3, "{s}");
        assert!(fr.pattern.is_normalized(1e-12));
        // (d + a)²/(λL) ≈ 1.6 at the default geometry
        assert!(fr.warning.is_some());
    }

    #[test]
    fn fraunhofer_peak_at_center() {
        let g = screen();
        let fr = analytic_fraunhofer(&default_mask(OpenSlits::Both), DEFAULT_WAVELENGTH, DEFAULT_SCREEN_DISTANCE, &g).unwrap();
        let v = fr.pattern.intensity();
        let max = v.iter().cloned().fold(0.0, f64::max);
        let center = v[g.n_points() / 2].max(v[g.n_points() / 2 - 1]);
        assert!((center / max - 1.0).abs() < 1e-3);
    }

    #[test]
    fn single_slit_envelopes_shift_by_separation() {
        let g = screen();
        let d = DEFAULT_SLIT_SEPARATION;
        let left = analytic_fraunhofer(&default_mask(OpenSlits::LeftOnly), DEFAULT_WAVELENGTH, DEFAULT_SCREEN_DISTANCE, &g)
            .unwrap()
            .pattern;
        let right = analytic_fraunhofer(&default_mask(OpenSlits::RightOnly), DEFAULT_WAVELENGTH, DEFAULT_SCREEN_DISTANCE, &g)
            .unwrap()
            .pattern;
        let peak = |p: &ScreenPattern| {
            let v = p.intensity();
            let i = (0..v.len()).max_by(|a, b| v[*a].total_cmp(&v[*b])).unwrap();
            g.x(i)
        };
        assert!((peak(&right) - peak(&left) - d).abs() < 2.0 * g.dx());
        for x in [-3e-4, -1e-4, 0.0, 2.5e-4] {
            assert!((left.density_at(x) - right.density_at(x + d)).abs() < 1e-3 * left.density_at(-d / 2.0));
        }
    }

    #[test]
    fn delta_pattern_always_samples_its_bin() {
        let g = Grid::symmetric(1.0, 64).unwrap();
        let mut v = vec![0.0; 64];
        v[17] = 3.0;
        let p = ScreenPattern::new(g, v).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            assert_eq!(sample_position(&p, &mut rng).unwrap(), g.x(17));
        }
    }

    #[test]
    fn zero_pattern_cannot_be_sampled() {
        let g = Grid::symmetric(1.0, 8).unwrap();
        let p = ScreenPattern::new(g, vec![0.0; 8]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert!(matches!(sample_position(&p, &mut rng), Err(QbcError::DegeneratePattern(_))));
    }

    #[test]
    fn uniform_pattern_mean_is_midpoint() {
        let g = Grid::new(1.0, 3.0, 256).unwrap();
        let p = ScreenPattern::new(g, vec![1.0; 256]).unwrap();
        let s = p.sampler().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 200_000;
        let mean = (0..n).map(|_| s.sample(&mut rng)).sum::<f64>() / n as f64;
        let se = (4.0f64 / 12.0).sqrt() / (n as f64).sqrt();
        assert!((mean - 2.0).abs() < 3.0 * se, "{mean}");
    }

    #[test]
    fn sampling_is_deterministic() {
        let g = Grid::symmetric(1.0, 32).unwrap();
        let p = ScreenPattern::new(g, (0..32).map(|i| i as f64).collect()).unwrap();
        let s = p.sampler().unwrap();
        let a: Vec<f64> = {
            let mut r = ChaCha8Rng::seed_from_u64(5);
            (0..50).map(|_| s.sample(&mut r)).collect()
        };
        let b: Vec<f64> = {
            let mut r = ChaCha8Rng::seed_from_u64(5);
            (0..50).map(|_| s.sample(&mut r)).collect()
        };
        assert_eq!(a, b);
    }

    #[test]
    fn pattern_csv_round_trips_values() {
        let g = Grid::symmetric(1.0, 4).unwrap();
        let p = ScreenPattern::new(g, vec![0.1, 0.2, 0.3, 1.0 / 3.0]).unwrap();
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("x_m,intensity"));
        let last: Vec<f64> = lines.last().unwrap().split(',').map(|s| s.parse().unwrap()).collect();
        assert_eq!(last[1], 1.0 / 3.0);
        assert_eq!(last[0], g.x(3));
    }
}
