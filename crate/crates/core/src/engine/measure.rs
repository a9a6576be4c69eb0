use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{ApertureMask, ComplexField};
use crate::error::{QbcError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Slit {
    Left,
    Right,
}

/// Projective which-slit measurement on a field just behind the slits.
///
/// Returns the outcome and the collapsed, renormalized field supported on the
/// chosen slit only.
pub fn which_slit_measure<R: Rng + ?Sized>(
    field_at_slits: &ComplexField,
    mask: &ApertureMask,
    rng: &mut R,
) -> Result<(Slit, ComplexField)> {
    let (p_left, p_right) = slit_weights(field_at_slits, mask);
    let total = p_left + p_right;
    if !(total > 0.0) {
        return Err(QbcError::DegeneratePattern("no amplitude in either slit".into()));
    }
    let slit = if rng.random::<f64>() * total < p_left { Slit::Left } else { Slit::Right };
    Ok((slit, collapse(field_at_slits, mask, slit)?))
}

/// Unnormalized weights Σ|ψ|²·dx over each slit's support.
pub fn slit_weights(field: &ComplexField, mask: &ApertureMask) -> (f64, f64) {
    let dx = field.grid().dx();
    let mut left = 0.0;
    let mut right = 0.0;
    for (a, x) in field.amplitudes().iter().zip(field.grid().positions()) {
        if mask.in_left_region(x) {
            left += a.norm_sqr() * dx;
        } else if mask.in_right_region(x) {
            right += a.norm_sqr() * dx;
        }
    }
    (left, right)
}

/// Field restricted to one slit's support, renormalized.
pub fn collapse(field: &ComplexField, mask: &ApertureMask, slit: Slit) -> Result<ComplexField> {
    let grid = *field.grid();
    let mut out = field.clone();
    for (a, x) in out.amplitudes_mut().iter_mut().zip(grid.positions()) {
        let keep = match slit {
            Slit::Left => mask.in_left_region(x),
            Slit::Right => mask.in_right_region(x),
        };
        if !keep {
            *a = num_complex::Complex64::new(0.0, 0.0);
        }
    }
    out.normalize()?;
    Ok(out)
}
