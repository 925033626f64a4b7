use std::f64::consts::{FRAC_PI_2, PI};

use approx::assert_abs_diff_eq;
use billiard_lab::asymptotic::*;
use billiard_lab::*;
use proptest::prelude::*;

fn upper(r: f64, t: f64) -> PolarPoint {
    PolarPoint::new(r, t, Half::Upper)
}

#[test]
fn semidisc_leading_order_examples() {
    let q = f2_asym_semidisc(RegionId::I, &upper(1000.0, 0.0), 1, CoeffSet::Published).unwrap();
    assert_abs_diff_eq!(q.r, 998.0, epsilon = 1e-12);
    assert_abs_diff_eq!(q.theta, 0.002, epsilon = 1e-15);

    // (1000, π/2) sits just past the V band, so go through the unchecked path
    let q = f2_asym_semidisc_unchecked(RegionId::V, &upper(1000.0, FRAC_PI_2), 1, CoeffSet::Published).unwrap();
    assert_abs_diff_eq!(q.r, 1000.0, epsilon = 1e-12);
    assert_abs_diff_eq!(q.theta, FRAC_PI_2 + 0.004, epsilon = 1e-15);
    assert!(f2_asym_semidisc(RegionId::V, &upper(1000.0, FRAC_PI_2), 1, CoeffSet::Published).is_err());
}

#[test]
fn wrong_region_is_rejected() {
    let err = f2_asym_semidisc(RegionId::I, &upper(1000.0, 2.0), 2, CoeffSet::Corrected).unwrap_err();
    assert!(matches!(err, LabError::WrongRegion { .. }));
    // right angle, wrong chart
    let p = PolarPoint::new(1000.0, 0.3, Half::Lower);
    assert!(f2_asym_semidisc(RegionId::I, &p, 2, CoeffSet::Corrected).is_err());
    assert!(f2_asym_sector(&1.0, RegionId::II, &upper(1000.0, 0.1), 2).is_err());
}

#[test]
fn semidisc_matches_sector_at_right_angle() {
    let p = upper(1e4, 0.3);
    let a = f2_asym_semidisc(RegionId::I, &p, 2, CoeffSet::Published).unwrap();
    let b = f2_asym_sector(&FRAC_PI_2, RegionId::I, &p, 2).unwrap();
    assert!((a.r - b.r).abs() < 1e-12 * 1e4);
    assert!((a.theta - b.theta).abs() < 1e-12);
}

#[test]
fn sector_special_regions() {
    let beta = PI / 3.0;
    for (reg, half) in [(RegionId::V, Half::Upper), (RegionId::VI, Half::Lower)] {
        let (lo, hi) = region_band(beta, reg, 500.0);
        let p = PolarPoint::new(500.0, 0.5 * (lo + hi), half);
        let q = f2_asym_sector(&beta, reg, &p, 2).unwrap();
        assert_eq!(q.r, 500.0);
        assert_abs_diff_eq!(q.theta, p.theta + 4.0 / 500.0, epsilon = 1e-15);
    }
    let k = sector_coefficients(&beta, RegionId::II, &(PI - beta));
    assert_abs_diff_eq!(k.b, 4.0, epsilon = 1e-14);
}

#[test]
fn singular_line_examples() {
    assert_abs_diff_eq!(singular_line_theta(FRAC_PI_2, SingularLine::L2, 100.0), FRAC_PI_2 - 0.01, epsilon = 1e-15);
    assert_abs_diff_eq!(singular_line_theta(FRAC_PI_2, SingularLine::L3p, 100.0), FRAC_PI_2 - 0.03, epsilon = 1e-15);
    assert_abs_diff_eq!(singular_line_theta(PI / 3.0, SingularLine::L1, 200.0), -0.0025, epsilon = 1e-15);
}

/// Every band end is a singular line; the exact classification must switch
/// within O(r⁻²) of the model.
#[test]
fn singular_lines_match_exact_boundaries() {
    for beta in [FRAC_PI_2, PI / 3.0, PI / 5.0] {
        let sh = SectorShape::<f64>::from_f64(beta);
        for reg in RegionId::ALL {
            for r in [200.0, 800.0, 3200.0] {
                let (lo, hi) = region_band(beta, reg, r);
                let top = locate_boundary(&sh, reg.half(), r, reg, hi - 0.5 / r, hi + 0.5 / r).unwrap();
                let bot = locate_boundary(&sh, reg.half(), r, reg, lo + 0.5 / r, lo - 0.5 / r).unwrap();
                assert!((top - hi).abs() * r * r < 0.5, "beta {beta} {reg} r {r} top {top} model {hi}");
                assert!((bot - lo).abs() * r * r < 0.5, "beta {beta} {reg} r {r} bottom {bot} model {lo}");
            }
        }
    }
}

#[test]
fn translation_coefficient_is_positive_in_every_band() {
    for beta in [PI / 6.0, PI / 4.0, PI / 3.0, FRAC_PI_2] {
        for reg in RegionId::ALL {
            for t in band_samples(beta, reg, 1e3, 0.0, 200) {
                let b = sector_coefficients(&beta, reg, &t).b;
                assert!(b > 0.0, "beta {beta} {reg} theta {t}: b = {b}");
            }
        }
    }
    for reg in [RegionId::I, RegionId::II, RegionId::III, RegionId::IV] {
        for t in band_samples(FRAC_PI_2, reg, 1e3, 0.0, 200) {
            let k = semidisc_coefficients(reg, &t, CoeffSet::Corrected).unwrap();
            assert!(k.b > 0.0);
        }
    }
}

#[test]
fn order_fit_needs_four_radii() {
    let err = semidisc_order_fit::<f64>(RegionId::I, 2, CoeffSet::Published, &[100.0, 200.0, 400.0], 5).unwrap_err();
    assert!(matches!(err, LabError::InsufficientRange { need: 4, got: 3 }));
}

fn grid(k0: i32, k1: i32) -> Vec<f64> {
    (k0..=k1).map(|k| 10.0 * 2f64.powi(k)).collect()
}

#[test]
fn semidisc_corrected_order_four_slopes() {
    for reg in [RegionId::I, RegionId::II, RegionId::III, RegionId::IV] {
        let fit = semidisc_order_fit::<Mp>(reg, 4, CoeffSet::Corrected, &grid(5, 12), 12).unwrap();
        assert!((fit.slope_r + 4.0).abs() < 0.3, "{reg} r slope {}", fit.slope_r);
        assert!((fit.slope_theta + 5.0).abs() < 0.3, "{reg} theta slope {}", fit.slope_theta);
    }
}

#[test]
fn semidisc_lower_orders_lose_one_power_each() {
    for (order, er, et) in [(1u32, -1.0, -2.0), (2, -2.0, -3.0)] {
        let fit = semidisc_order_fit::<Mp>(RegionId::I, order, CoeffSet::Corrected, &grid(5, 12), 12).unwrap();
        assert!((fit.slope_r - er).abs() < 0.3, "order {order}: {}", fit.slope_r);
        assert!((fit.slope_theta - et).abs() < 0.3, "order {order}: {}", fit.slope_theta);
    }
}

#[test]
fn sector_order_two_slopes() {
    for beta in [PI / 3.0, PI / 4.0] {
        for reg in [RegionId::I, RegionId::II, RegionId::III, RegionId::IV] {
            let fit = sector_order_fit::<Mp>(&Mp::new(beta), reg, 2, &grid(5, 12), 12).unwrap();
            assert!((fit.slope_r + 2.0).abs() < 0.3, "beta {beta} {reg}: {}", fit.slope_r);
            assert!((fit.slope_theta + 3.0).abs() < 0.3, "beta {beta} {reg}: {}", fit.slope_theta);
        }
    }
}

proptest! {
    #[test]
    fn semidisc_and_sector_coefficients_agree(t in -0.05f64..(PI + 0.05)) {
        for reg in [RegionId::I, RegionId::II, RegionId::III, RegionId::IV] {
            let a = semidisc_coefficients(reg, &t, CoeffSet::Published).unwrap();
            let b = sector_coefficients(&FRAC_PI_2, reg, &t);
            for (x, y) in [(a.a, b.a), (a.b, b.b), (a.a1, b.a1), (a.b1, b.b1)] {
                prop_assert!((x - y).abs() < 1e-12, "{reg} t {t}: {x} vs {y}");
            }
        }
    }
}
