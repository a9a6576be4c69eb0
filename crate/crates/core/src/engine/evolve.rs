use std::cell::RefCell;
use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::{ComplexField, Grid, ScreenPattern};
use crate::error::{invalid, Result};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plans(n: usize) -> (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>) {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        (p.plan_fft_forward(n), p.plan_fft_inverse(n))
    })
}

/// Angular wavenumbers in FFT order.
pub fn wavenumbers(grid: &Grid) -> Vec<f64> {
    let n = grid.n_points();
    let dk = 2.0 * PI / (n as f64 * grid.dx());
    (0..n)
        .map(|j| if j < n / 2 { j as f64 * dk } else { (j as f64 - n as f64) * dk })
        .collect()
}

/// Applies e^{−iHt/ħ} with H = p²/2m exactly in momentum space.
pub fn evolve_free(field: &ComplexField, mass: f64, dt: f64) -> Result<ComplexField> {
    if !(mass > 0.0 && mass.is_finite()) {
        return invalid(format!("mass must be positive, got {mass}"));
    }
    if !(dt >= 0.0 && dt.is_finite()) {
        return invalid(format!("dt must be non-negative, got {dt}"));
    }
    if dt == 0.0 {
        return Ok(field.clone());
    }
    let grid = *field.grid();
    let n = grid.n_points();
    let (fwd, inv) = plans(n);
    let coef = field.units().hbar() * dt / (2.0 * mass);
    let scale = 1.0 / n as f64;

    let mut out = field.clone();
    let buf = out.amplitudes_mut();
    fwd.process(buf);
    for (a, k) in buf.iter_mut().zip(wavenumbers(&grid)) {
        *a *= Complex64::from_polar(scale, -coef * k * k);
    }
    inv.process(buf);
    Ok(out)
}

/// Smallest |k| such that the spectral weight beyond it is at most `tail`.
pub fn spectral_reach(field: &ComplexField, tail: f64) -> f64 {
    let grid = *field.grid();
    let (fwd, _) = plans(grid.n_points());
    let mut buf = field.amplitudes().to_vec();
    fwd.process(&mut buf);
    let mut weights: Vec<(f64, f64)> =
        wavenumbers(&grid).into_iter().map(|k| k.abs()).zip(buf.iter().map(|a| a.norm_sqr())).collect();
    weights.sort_by(|a, b| b.0.total_cmp(&a.0));
    let total: f64 = weights.iter().map(|w| w.1).sum();
    let mut beyond = 0.0;
    for (k, w) in weights {
        beyond += w;
        if beyond > tail * total {
            return k;
        }
    }
    0.0
}

/// Asymptotic screen pattern after a long free flight: x = ħk·elapsed/m.
///
/// Valid once the flight spreads the packet far beyond its extent at the
/// aperture; the result lives on a grid scaled from the wavenumber grid.
pub fn far_field_pattern(field: &ComplexField, mass: f64, elapsed: f64) -> Result<ScreenPattern> {
    if !(mass > 0.0) || !(elapsed > 0.0) {
        return invalid("far-field pattern needs positive mass and elapsed time");
    }
    let grid = *field.grid();
    let n = grid.n_points();
    let (fwd, _) = plans(n);
    let mut buf = field.amplitudes().to_vec();
    fwd.process(&mut buf);

    let dk = 2.0 * PI / (n as f64 * grid.dx());
    let stretch = field.units().hbar() * elapsed / mass;
    let cell = dk * stretch;
    let half = (n / 2) as f64;
    let out_grid = Grid::new((-half - 0.5) * cell, (half - 0.5) * cell, n)?;
    // fftshift: output cell j holds wavenumber (j − n/2)·dk
    let intensity: Vec<f64> = (0..n).map(|j| buf[(j + n / 2) % n].norm_sqr()).collect();
    let total: f64 = intensity.iter().sum::<f64>() * cell;
    ScreenPattern::new(out_grid, intensity.into_iter().map(|v| v / total).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{gaussian_width_at, make_gaussian_packet, PacketParams, Units};

    fn packet(sigma0: f64, p0: f64, half: f64, n: usize) -> ComplexField {
        let grid = Grid::symmetric(half, n).unwrap();
        let p = PacketParams { sigma0, x0: 0.0, p0, mass: 1.0, units: Units::Natural };
        make_gaussian_packet(&p, &grid).unwrap()
    }

    #[test]
    fn zero_time_is_identity() {
        let f = packet(1.0, 0.3, 20.0, 1024);
        assert_eq!(evolve_free(&f, 1.0, 0.0).unwrap(), f);
    }

    #[test]
    fn rejects_bad_params() {
        let f = packet(1.0, 0.0, 20.0, 256);
        assert!(evolve_free(&f, 0.0, 1.0).is_err());
        assert!(evolve_free(&f, 1.0, -1.0).is_err());
    }

    #[test]
    fn width_doubles_root_two_at_t2() {
        let f = packet(1.0, 0.0, 40.0, 4096);
        let g = evolve_free(&f, 1.0, 2.0).unwrap();
        let expected = gaussian_width_at(1.0, 1.0, 2.0, Units::Natural);
        assert!((expected - 2f64.sqrt()).abs() < 1e-12);
        assert!((g.width() / expected - 1.0).abs() < 1e-3, "{}", g.width());
    }

    #[test]
    fn ehrenfest_drift() {
        let p0 = 1.5;
        let dt = 0.5;
        let f = packet(1.0, p0, 30.0, 4096);
        let g = evolve_free(&f, 1.0, dt).unwrap();
        let dx = f.grid().dx();
        assert!((g.centroid() - f.centroid() - p0 * dt).abs() < dx, "{}", g.centroid());
    }

    #[test]
    fn far_field_of_gaussian_matches_spreading() {
        let f = packet(1.0, 0.0, 20.0, 2048);
        let t = 1.0e3;
        let pat = far_field_pattern(&f, 1.0, t).unwrap();
        let expected = gaussian_width_at(1.0, 1.0, t, Units::Natural);
        assert!((pat.width() / expected - 1.0).abs() < 1e-3, "{} vs {}", pat.width(), expected);
    }
}
