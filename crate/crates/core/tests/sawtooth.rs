use std::f64::consts::{PI, SQRT_2};

use approx::assert_abs_diff_eq;
use billiard_lab::return_map::CylinderState;
use billiard_lab::sawtooth::*;
use billiard_lab::LabError;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn hexagonal() -> SawtoothSystem {
    SawtoothSystem::new(1.0).unwrap()
}

#[test]
fn step_examples() {
    let s = CylinderState { r: 10.0, phi: 0.25 };
    let a = hexagonal().step(&s).unwrap();
    assert_abs_diff_eq!(a.r, 9.75, epsilon = 1e-14);
    assert_abs_diff_eq!(a.phi, 0.25, epsilon = 1e-14);
    let b = SawtoothSystem::new(8.0 / 3.0).unwrap().step(&s).unwrap();
    assert_abs_diff_eq!(b.r, 10.0 - 2.0 / 3.0, epsilon = 1e-14);
    assert!(matches!(hexagonal().step(&CylinderState { r: 10.0, phi: 0.0 }), Err(LabError::OnBoundary)));
    assert!(SawtoothSystem::new(4.5).is_err());
}

#[test]
fn rotation_angle_branches_agree() {
    for d in [0.1, 0.5, 1.0, 1.5, 2.0] {
        let sys = SawtoothSystem::new(d).unwrap();
        assert_abs_diff_eq!(sys.alpha.cos(), 1.0 - d / 2.0, epsilon = 1e-15);
        let m = sys.branch_matrix();
        assert_abs_diff_eq!(0.5 * (m[0][0] + m[1][1]), sys.alpha.cos(), epsilon = 1e-15);
        assert_abs_diff_eq!(m[0][0] * m[1][1] - m[0][1] * m[1][0], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(sys.alpha_arcsin(), sys.alpha, epsilon = 1e-7);
    }
    assert_abs_diff_eq!(SawtoothSystem::for_polygon(4).unwrap().delta, 2.0 - SQRT_2, epsilon = 1e-15);
    assert_abs_diff_eq!(SawtoothSystem::for_polygon(4).unwrap().delta, 0.58579, epsilon = 1e-5);
}

#[test]
fn conjugation_gives_a_rotation() {
    let sys = hexagonal();
    assert_abs_diff_eq!(sys.center(1).0, 3f64.sqrt() / 2.0, epsilon = 1e-15);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..1000 {
        let (r, phi) = (rng.gen_range(1.0..100.0), rng.gen::<f64>());
        let p = sys.conjugate(r, phi);
        let back = sys.deconjugate(p.0, p.1);
        assert!((back.0 - r).abs() < 1e-14 * r.max(1.0) && (back.1 - phi).abs() < 1e-14);
        let c = sys.center(sys.branch(r, phi));
        let q = sys.conjugated_step(p.0, p.1);
        let (d0, d1) = ((p.0 - c.0).hypot(p.1 - c.1), (q.0 - c.0).hypot(q.1 - c.1));
        assert!((d0 - d1).abs() < 1e-12);
        // signed angle from p to q about c is −α
        let turn = ((p.0 - c.0) * (q.1 - c.1) - (p.1 - c.1) * (q.0 - c.0)).atan2((p.0 - c.0) * (q.0 - c.0) + (p.1 - c.1) * (q.1 - c.1));
        assert!((turn + sys.alpha).abs() < 1e-10, "{turn}");
        // rotation formula route
        let q2 = sys.rotation_step(p.0, p.1);
        assert!((q.0 - q2.0).hypot(q.1 - q2.1) < 1e-12);
    }
    assert!(sys.isometry_error((1.0, 100.0), 1000, 5) < 1e-12);
}

#[test]
fn rhombus_shape() {
    for d in [0.4, 1.0, 2.0 - SQRT_2] {
        let sys = SawtoothSystem::new(d).unwrap();
        let rh = sys.rhombus(7);
        let s = rh.side_lengths();
        for x in s {
            assert_abs_diff_eq!(x, s[0], epsilon = 1e-12);
        }
        assert_abs_diff_eq!(rh.angle(), sys.alpha, epsilon = 1e-12);
        // centre is the midpoint of the diagonals
        let v = rh.vertices;
        assert_abs_diff_eq!(0.5 * (v[0].0 + v[2].0), rh.center.0, epsilon = 1e-12);
        assert_abs_diff_eq!(0.5 * (v[1].1 + v[3].1), rh.center.1, epsilon = 1e-12);
    }
}

#[test]
fn regular_polygons_close() {
    for (m, sides) in [(3u32, 6usize), (4, 8), (6, 12)] {
        let sys = SawtoothSystem::for_polygon(m).unwrap();
        let o = build_invariant_polygon(&sys, m, 12).unwrap();
        assert_eq!(o.vertices.len(), sides);
        let c = o.center;
        let rad = 0.5 / (PI / sides as f64).cos();
        for (i, v) in o.vertices.iter().enumerate() {
            assert_abs_diff_eq!((v.0 - c.0).hypot(v.1 - c.1), rad, epsilon = 1e-12);
            let w = o.vertices[(i + 1) % sides];
            assert_abs_diff_eq!((v.0 - w.0).hypot(v.1 - w.1), 2.0 * rad * (PI / sides as f64).sin(), epsilon = 1e-12);
        }
        // apothem 1/2: touches φ̄ = 0 and φ̄ = 1
        let (lo, hi) = o.vertices.iter().fold((1.0f64, 0.0f64), |(l, h), v| (l.min(v.1), h.max(v.1)));
        assert_abs_diff_eq!(lo, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(hi, 1.0, epsilon = 1e-12);
        assert!(o.vertex_closure(&sys) < 1e-10);
        assert_abs_diff_eq!(o.area(), sides as f64 * 0.25 * (PI / sides as f64).tan(), epsilon = 1e-12);
    }
}

#[test]
fn irrational_angle_does_not_close() {
    let sys = SawtoothSystem::new(1.1).unwrap();
    let Err(LabError::NotClosed(gap)) = build_invariant_polygon(&sys, 3, 5) else { panic!("closed") };
    // oracle: six explicit rotations by α about the centre move a by 2ρ|sin 3α|
    let rho = (sys.conjugate(5.0, 0.0).0 - sys.center(5).0).hypot(0.5);
    assert_abs_diff_eq!(gap, 2.0 * rho * (3.0 * sys.alpha).sin().abs(), epsilon = 1e-12);
}

#[test]
fn polygon_interior_is_invariant() {
    for m in [3u32, 4, 6] {
        let sys = SawtoothSystem::for_polygon(m).unwrap();
        let o = build_invariant_polygon(&sys, m, 9).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(m as u64);
        let mut n = 0;
        while n < 10_000 {
            let p = (rng.gen_range(o.r_min..o.r_max), rng.gen::<f64>());
            if !o.contains(p) {
                continue;
            }
            n += 1;
            assert!(o.contains(sys.rotation_step(p.0, p.1)), "m {m}: {p:?}");
        }
    }
}

#[test]
fn winding_number_membership() {
    let sys = hexagonal();
    let o = build_invariant_polygon(&sys, 3, 4).unwrap();
    assert_eq!(o.winding(o.center).abs(), 1);
    assert!(o.contains(o.vertices[2]));
    assert_eq!(o.side((o.r_min - 0.1, 0.5)), Side::Left);
    assert_eq!(o.side((o.r_max + 0.1, 0.5)), Side::Right);
    // a corner region beside the polygon but within its R̄ extent
    assert_eq!(o.side((o.r_min + 1e-3, 0.0)), Side::Left);
    let q = o.scaled(0.5);
    assert_abs_diff_eq!(q.area(), 0.25 * o.area(), epsilon = 1e-12);
}

#[test]
fn unperturbed_orbits_stay_left() {
    for m in [3u32, 4] {
        let sys = SawtoothSystem::for_polygon(m).unwrap();
        let o = build_invariant_polygon(&sys, m, 20).unwrap();
        let seeds = left_seeds(&sys, std::slice::from_ref(&o), (1.0, 20.0), 200, 1);
        let (st, orbits) = escape_experiment(&sys, &seeds, 20_000, std::slice::from_ref(&o), &[], None);
        assert_eq!(st.crossings, 0);
        let edge = sys.deconjugate(o.r_max, 0.5).0 + 1.0;
        assert!(orbits.iter().all(|x| x.max_r < edge));
    }
}

#[test]
fn irrational_angle_exploration_runs() {
    let sys = SawtoothSystem::new(1.1).unwrap();
    let o = regular_polygon(&sys, 3, 20);
    let seeds = left_seeds(&sys, std::slice::from_ref(&o), (1.0, 20.0), 50, 2);
    let (st, _) = escape_experiment(&sys, &seeds, 20_000, std::slice::from_ref(&o), &[], None);
    println!("Δ = 1.1: {} of {} orbits cross the hexagon stand-in", st.orbits_crossing, st.seeds);
}

#[test]
fn perturbed_orbits_enter_through_the_band() {
    let sys = hexagonal().with_k(2);
    let c = 0.1;
    let push = move |r: f64, _phi: f64| (c / r, 0.0);
    assert!(perturbation_constant(&push, (10.0, 1e4), 1000) <= c + 1e-12);
    let bands: Vec<GBand> = (3..=4).map(|l| GBand::new(&sys, 3, l).unwrap()).collect();
    let barriers: Vec<_> = bands.iter().map(|g| g.outer.clone()).collect();
    let seeds = left_seeds(&sys, &barriers, (30.0, 60.0), 20, 3);
    let (st, _) = escape_experiment(&sys, &seeds, 300_000, &barriers, &bands, Some(&push));
    assert!(st.entries > 0, "no orbit reached a barrier");
    assert_eq!(st.entries, st.entries_in_band);
    assert!(st.max_jump < bands[1].jump_bound, "{} vs {}", st.max_jump, bands[1].jump_bound);
}

#[test]
fn band_half_width_formula() {
    let sys = hexagonal();
    let g = GBand::new(&sys, 3, 3).unwrap();
    // α = π/3: ½·⅛·(1/2)/(√3/2)
    assert_abs_diff_eq!(g.jump_bound, 1.0 / (16.0 * 3f64.sqrt()), epsilon = 1e-15);
    assert!(g.contains((g.outer.center.0, 0.5 / 16.0)));
    assert!(!g.contains(g.outer.center));
}

#[test]
fn fermi_ulam_examples() {
    let lead = FermiUlamModel::new(1.0, 0.0);
    let (t, i) = lead.step(0.7, 10.0).unwrap();
    assert_abs_diff_eq!(t, 0.7, epsilon = 1e-12);
    assert_abs_diff_eq!(i, 10.2, epsilon = 1e-12);
    let (_, i) = FermiUlamModel::new(1.0, 1.0).step(0.7, 10.0).unwrap();
    assert_abs_diff_eq!(i, 10.2 + (0.04 - 1.0 / 12.0) / 10.0, epsilon = 1e-12);
    assert_abs_diff_eq!(i, 10.19567, epsilon = 1e-5);
    assert!(matches!(lead.step(0.2, 0.5), Err(LabError::EnergyTooLow(_))));
}

#[test]
fn fermi_ulam_leading_map_is_the_sawtooth() {
    let fu = FermiUlamModel::new(2.0 - SQRT_2, 0.0);
    let sys = fu.as_sawtooth().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..1000 {
        let (tau, i) = (rng.gen::<f64>(), rng.gen_range(1.0..1e3));
        let (t2, i2) = fu.leading(tau, i);
        let (r2, p2) = sys.step_raw(i, tau);
        assert_eq!((t2, i2), (p2, r2));
    }
    let o = build_invariant_polygon(&sys, 4, 30).unwrap();
    let seeds: Vec<(f64, f64)> = left_seeds(&sys, std::slice::from_ref(&o), (2.0, 30.0), 100, 6).into_iter().map(|(r, p)| (p, r)).collect();
    let (hits, _) = fermi_ulam_barrier_test(&fu, &o, &seeds, 20_000).unwrap();
    assert_eq!(hits, 0);
}

#[test]
fn fermi_ulam_correction_below_band_half_width() {
    let fu = FermiUlamModel::new(2.0 - SQRT_2, 1.0);
    for j in fermi_ulam_jump_bound(&fu, 5..=9, 500).unwrap() {
        assert!(j.max_jump < j.bound, "{j:?}");
        // the correction is at most Δ₁/(6I) in I, times 2/s in R̄
        let s = (fu.delta * (4.0 - fu.delta)).sqrt();
        assert!(j.max_jump <= 2.0 / s / (6.0 * j.energy) * 1.0001);
    }
}

/// Monte-Carlo Jacobian determinant of L_Δ away from the discontinuities.
#[test]
fn sawtooth_preserves_area() {
    let sys = SawtoothSystem::new(0.7).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let h = 1e-6;
    let mut checked = 0;
    for _ in 0..10_000 {
        let (r, phi): (f64, f64) = (rng.gen_range(5.0..6.0), rng.gen_range(0.1..0.9));
        let w = (phi - r).rem_euclid(1.0);
        if !(0.01..0.99).contains(&w) {
            continue;
        }
        let f = |a: f64, b: f64| sys.step_raw(a, b);
        let (a, b, c, d) = (f(r + h, phi), f(r - h, phi), f(r, phi + h), f(r, phi - h));
        let det = ((a.0 - b.0) * (c.1 - d.1) - (a.1 - b.1) * (c.0 - d.0)) / (4.0 * h * h);
        assert!((det - 1.0).abs() < 1e-8, "{det}");
        checked += 1;
    }
    assert!(checked > 9000);
}

proptest! {
    #[test]
    fn conjugation_round_trip(d in 0.05f64..3.95, r in -50.0f64..50.0, phi in 0.0f64..1.0) {
        let sys = SawtoothSystem::new(d).unwrap();
        let p = sys.conjugate(r, phi);
        let b = sys.deconjugate(p.0, p.1);
        prop_assert!((b.0 - r).abs() < 1e-12 && (b.1 - phi).abs() < 1e-15);
    }

    #[test]
    fn step_stays_on_cylinder(d in 0.05f64..3.95, r in -50.0f64..50.0, phi in 0.0f64..1.0) {
        let sys = SawtoothSystem::new(d).unwrap();
        let (r2, p2) = sys.step_raw(r, phi);
        prop_assert!((0.0..1.0).contains(&p2));
        prop_assert!((r2 - r).abs() <= d / 2.0 + 1e-12);
    }
}
