mod common;

use proptest::prelude::*;
use qbc_core::engine::{Grid, ScreenPattern};
use qbc_core::stats::*;

pub const SPOT_POINTS: [(f64, u32); 20] = [
    (0.0, 1),
    (0.001, 1),
    (0.5, 1),
    (1.0, 1),
    (3.841, 1),
    (10.83, 1),
    (0.1, 2),
    (2.0, 2),
    (5.991, 2),
    (1.0, 3),
    (7.815, 3),
    (4.0, 5),
    (11.07, 5),
    (9.0, 10),
    (18.31, 10),
    (25.0, 19),
    (30.14, 19),
    (40.0, 30),
    (60.0, 49),
    (120.0, 80),
];

#[test]
fn chi_square_matches_quadrature_oracle() {
    for (x, k) in SPOT_POINTS {
        let got = chi_square_sf(x, k).unwrap();
        let want = common::chi_square_sf_quadrature(x, k);
        assert!((got - want).abs() < 1e-8, "x={x} k={k}: {got} vs {want}");
    }
}

#[test]
fn chi_square_examples() {
    assert_eq!(chi_square_sf(0.0, 4).unwrap(), 1.0);
    assert!((chi_square_sf(3.841458820694124, 1).unwrap() - 0.05).abs() < 1e-12);
    // k = 2 is an exponential tail
    assert!((chi_square_sf(3.0, 2).unwrap() - (-1.5f64).exp()).abs() < 1e-14);
    assert!(chi_square_sf(-1.0, 2).is_err());
    assert!(chi_square_sf(1.0, 0).is_err());
}

#[test]
fn binomial_examples() {
    let p = binomial_two_sided(10, 10, 0.5).unwrap();
    assert!((p - 2.0 / 1024.0).abs() < 1e-15);
    assert!((p - 1.953e-3).abs() < 5e-7);
    assert!((binomial_two_sided(5, 10, 0.5).unwrap() - 1.0).abs() < 1e-12);
    assert!(binomial_two_sided(11, 10, 0.5).is_err());
    assert!(binomial_two_sided(1, 10, 1.0).is_err());
}

proptest! {
    #[test]
    fn chi_square_is_monotone(x in 0.0f64..200.0, dx in 0.0f64..20.0, k in 1u32..60) {
        let a = chi_square_sf(x, k).unwrap();
        let b = chi_square_sf(x + dx, k).unwrap();
        prop_assert!(b <= a + 1e-15);
        prop_assert!((0.0..=1.0).contains(&a));
    }

    #[test]
    fn binomial_matches_direct_sum(n in 1u64..60, frac in 0.0f64..=1.0, p0 in 0.05f64..0.95) {
        let k = ((n as f64) * frac).round() as u64;
        let got = binomial_two_sided(k, n, p0).unwrap();
        let want = common::binomial_two_sided_direct(k, n, p0);
        prop_assert!((got - want).abs() < 1e-9, "{} vs {}", got, want);
    }
}

#[test]
fn contrast_of_synthetic_patterns() {
    let grid = Grid::symmetric(10.0, 2048).unwrap();
    let fringes: Vec<f64> = grid.positions().map(|x| 1.0 + 0.6 * (2.0 * x).cos()).collect();
    let p = ScreenPattern::new(grid, fringes).unwrap();
    assert!((fringe_contrast(&p, -8.0, 8.0).unwrap() - 0.6).abs() < 1e-4);
    let flat = ScreenPattern::new(grid, vec![1.0; 2048]).unwrap();
    assert_eq!(fringe_contrast(&flat, -8.0, 8.0).unwrap(), 0.0);
}
