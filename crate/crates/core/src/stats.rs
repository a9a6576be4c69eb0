//! Small statistics toolkit used by the verifier.

use statrs::function::factorial::ln_binomial;
use statrs::function::gamma::gamma_ur;

use crate::engine::ScreenPattern;
use crate::error::{invalid, QbcError, Result};

/// Upper tail P(X ≥ x) of a chi-square variable with `dof` degrees of freedom.
pub fn chi_square_sf(x: f64, dof: u32) -> Result<f64> {
    if !(x >= 0.0) || dof < 1 {
        return invalid(format!("chi_square_sf needs x >= 0 and dof >= 1, got x={x}, dof={dof}"));
    }
    if x == 0.0 {
        return Ok(1.0);
    }
    if x.is_infinite() {
        return Ok(0.0);
    }
    Ok(gamma_ur(0.5 * dof as f64, 0.5 * x).clamp(0.0, 1.0))
}

/// Exact two-sided binomial test: total probability of outcomes no more likely than the observed one.
pub fn binomial_two_sided(successes: u64, n: u64, p0: f64) -> Result<f64> {
    if successes > n {
        return invalid(format!("{successes} successes out of {n} trials"));
    }
    if !(p0 > 0.0 && p0 < 1.0) {
        return invalid(format!("p0 must lie in (0, 1), got {p0}"));
    }
    let (lp, lq) = (p0.ln(), (1.0 - p0).ln());
    let ln_pmf = |k: u64| ln_binomial(n, k) + k as f64 * lp + (n - k) as f64 * lq;
    let observed = ln_pmf(successes);
    // relative slack so that exact ties survive rounding
    let cutoff = observed + 1e-7;
    let p: f64 = (0..=n).map(ln_pmf).filter(|l| *l <= cutoff).map(f64::exp).sum();
    Ok(p.min(1.0))
}

/// Fringe contrast (max − min)/(max + min) from the local extrema of a pattern in `[lo, hi]`.
///
/// `max` is the largest local maximum and `min` the smallest local minimum.
/// A window holding maxima but no minima (or the reverse) has no fringes and
/// scores 0; a flat window scores 0.
pub fn fringe_contrast(pattern: &ScreenPattern, lo: f64, hi: f64) -> Result<f64> {
    let grid = pattern.grid();
    let v = pattern.intensity();
    let idx: Vec<usize> = (0..v.len()).filter(|i| (lo..=hi).contains(&grid.x(*i))).collect();
    if idx.len() < 3 {
        return Err(QbcError::DegeneratePattern(format!("window [{lo}, {hi}] covers fewer than 3 cells")));
    }
    let window: Vec<f64> = idx.iter().map(|i| v[*i]).collect();
    let top = window.iter().cloned().fold(f64::MIN, f64::max);
    let bottom = window.iter().cloned().fold(f64::MAX, f64::min);
    if top - bottom <= 1e-12 * top.abs() {
        return Ok(0.0);
    }
    let mut maxima = Vec::new();
    let mut minima = Vec::new();
    for w in window.windows(3) {
        if w[1] > w[0] && w[1] >= w[2] {
            maxima.push(w[1]);
        } else if w[1] < w[0] && w[1] <= w[2] {
            minima.push(w[1]);
        }
    }
    if maxima.is_empty() && minima.is_empty() {
        return Err(QbcError::DegeneratePattern(format!("no extrema in [{lo}, {hi}]")));
    }
    if maxima.is_empty() || minima.is_empty() {
        return Ok(0.0);
    }
    let hi_v = maxima.iter().cloned().fold(f64::MIN, f64::max);
    let lo_v = minima.iter().cloned().fold(f64::MAX, f64::min);
    if hi_v + lo_v <= 0.0 {
        return Ok(0.0);
    }
    Ok(((hi_v - lo_v) / (hi_v + lo_v)).clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::Grid;

    #[test]
    fn chi_square_edges() {
        assert_eq!(chi_square_sf(0.0, 3).unwrap(), 1.0);
        assert!((chi_square_sf(3.8415, 1).unwrap() - 0.05).abs() < 1e-4);
        assert!(chi_square_sf(-1.0, 2).is_err());
        assert!(chi_square_sf(1.0, 0).is_err());
        let mut last = 1.0;
        for i in 1..200 {
            let p = chi_square_sf(i as f64 * 0.5, 4).unwrap();
            assert!(p <= last);
            last = p;
        }
        assert!(last < 1e-18);
        assert_eq!(chi_square_sf(f64::INFINITY, 4).unwrap(), 0.0);
    }

    #[test]
    fn binomial_exact_cases() {
        let p = binomial_two_sided(10, 10, 0.5).unwrap();
        assert!((p - 2.0 / 1024.0).abs() < 1e-15);
        assert!((binomial_two_sided(5, 10, 0.5).unwrap() - 1.0).abs() < 1e-12);
        assert!((binomial_two_sided(0, 10, 0.5).unwrap() - 2.0 / 1024.0).abs() < 1e-15);
        assert!(binomial_two_sided(11, 10, 0.5).is_err());
        assert!(binomial_two_sided(1, 10, 1.0).is_err());
        assert_eq!(binomial_two_sided(0, 0, 0.3).unwrap(), 1.0);
    }

    #[test]
    fn binomial_seventy_of_hundred() {
        // exact summation oracle, computed independently with integer binomials
        let p = binomial_two_sided(70, 100, 0.5).unwrap();
        assert!((p - 7.85013e-5).abs() < 1e-9, "{p}");
    }

    #[test]
    fn contrast_of_cos_squared_is_one() {
        let g = Grid::symmetric(4.0, 1024).unwrap();
        // period 1, zeros at half-integers which fall exactly on cell centers
        let pat = ScreenPattern::new(
            g,
            g.positions().map(|x| (std::f64::consts::PI * (x + 1.0 / 256.0)).cos().powi(2)).collect(),
        )
        .unwrap();
        let c = fringe_contrast(&pat, -3.0, 3.0).unwrap();
        assert!((c - 1.0).abs() < 1e-6, "{c}");
    }

    #[test]
    fn contrast_of_flat_is_zero() {
        let g = Grid::symmetric(1.0, 64).unwrap();
        let pat = ScreenPattern::new(g, vec![2.0; 64]).unwrap();
        assert_eq!(fringe_contrast(&pat, -0.5, 0.5).unwrap(), 0.0);
    }

    #[test]
    fn monotone_window_is_degenerate() {
        let g = Grid::symmetric(1.0, 64).unwrap();
        let pat = ScreenPattern::new(g, (0..64).map(|i| i as f64).collect()).unwrap();
        assert!(matches!(fringe_contrast(&pat, -0.5, 0.5), Err(QbcError::DegeneratePattern(_))));
    }
}
