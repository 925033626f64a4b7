use std::f64::consts::SQRT_2;
use std::sync::OnceLock;

use approx::assert_abs_diff_eq;
use billiard_lab::normal_form::*;
use billiard_lab::return_map::{composed_return_model, exact_first_return, TailConstants, LINEAR_PART, MAX_RETURN_STEPS};
use billiard_lab::*;
use num_complex::Complex64 as C;

struct Island {
    fp: FixedPoint,
    model: CubicReturnModel,
    diag: DiagonalizedModel,
}

fn island(n: u32) -> &'static Island {
    static CACHE: OnceLock<Vec<(u32, Island)>> = OnceLock::new();
    let all = CACHE.get_or_init(|| {
        [40u32, 80, 160]
            .into_iter()
            .map(|n| {
                let fp = find_fixed_point(n).unwrap();
                let model = taylor_fit(&fp, DEFAULT_STENCIL).unwrap();
                let diag = diagonalize(&model).unwrap();
                (n, Island { fp, model, diag })
            })
            .collect()
    });
    &all.iter().find(|(k, _)| *k == n).expect("cached island index").1
}

#[test]
fn fixed_point_near_anchor() {
    let fp = find_fixed_point(60).unwrap();
    let z = fp.point();
    assert!(z.dist(&Point2::new(179.25, 1.0)) < 0.5, "{z:?}");
    assert!(fp.residual < 1e-11);
    // double-precision check of the definition
    let back = exact_first_return(&SectorShape::<f64>::semidisc(), &z, MAX_RETURN_STEPS).unwrap().point;
    assert!(back.dist(&z) < 1e-10);
}

#[test]
fn fixed_point_offset_is_order_one_over_n() {
    let s: Vec<f64> = [40, 80, 160]
        .into_iter()
        .map(|n| {
            let z = island(n).fp.point();
            n as f64 * z.dist(&Point2::new(3.0 * n as f64 - 0.75, 1.0))
        })
        .collect();
    let (lo, hi) = s.iter().fold((f64::MAX, 0.0f64), |(l, h), &x| (l.min(x), h.max(x)));
    assert!(hi / lo < 2.0, "{s:?}");
}

#[test]
fn small_index_is_rejected() {
    assert!(matches!(find_fixed_point(5), Err(LabError::Config(_))));
}

#[test]
fn linear_part_is_area_preserving_and_converges() {
    let mut prev = f64::MAX;
    for n in [40, 80, 160] {
        let m = &island(n).model;
        assert!((m.det() - 1.0).abs() < 1e-5, "n {n}: det {}", m.det());
        assert!(m.fit_residual < FIT_TOL);
        let dev = (0..2).flat_map(|i| (0..2).map(move |j| (i, j))).map(|(i, j)| (m.a[i][j] - LINEAR_PART[i][j]).abs()).fold(0.0, f64::max);
        assert!(dev * n as f64 <= 10.0, "n {n}: {dev}");
        let c = (island(n).diag.cos_alpha() + 7.0 / 9.0).abs();
        assert!(c * 1.4 <= prev, "n {n}: {c} after {prev}");
        prev = c;
    }
    assert!(prev < 0.02);
}

#[test]
fn quadratic_terms_scale_like_one_over_n() {
    let size = |n| island(n).model.f2.iter().flatten().map(|v: &f64| v.abs()).fold(0.0, f64::max);
    for (n, m) in [(40, 80), (80, 160)] {
        let ratio = size(n) / size(m);
        assert!((ratio - 2.0).abs() < 0.5, "{n}→{m}: {ratio}");
    }
    for n in [40, 80, 160] {
        let g = island(n).diag.g2.iter().map(|c| c.norm()).fold(0.0, f64::max);
        assert!(g * n as f64 <= 2.0, "n {n}: |G₂|·n = {}", g * n as f64);
    }
}

#[test]
fn eigenvector_and_unit_eigenvalue() {
    let d = &island(160).diag;
    assert!((d.lambda.norm() - 1.0).abs() < 1e-8);
    assert!(d.lambda.im < 0.0);
    assert!((d.p - C::new(2.0, -SQRT_2)).norm() < 0.2, "{}", d.p);
    // to_a and from_a are inverse on real points
    let (u, w) = d.from_a(d.to_a(0.3, -0.2));
    assert_abs_diff_eq!(u, 0.3, epsilon = 1e-14);
    assert_abs_diff_eq!(w, -0.2, epsilon = 1e-14);
}

/// Independent closed form of the resonant coefficient from the degree-3
/// normal form: c·(λ⁴ − λ) = 2|g₂₀|²λ² + |g₂₁|²(λ⁴ + λ³ + λ²)
/// − g₂₁g₂₂(2λ³ + λ² + λ − 1) + g₃₂(λ⁴ − λ), α₂ = −ic/λ.
fn alpha2_oracle(d: &DiagonalizedModel) -> C {
    let l = d.lambda;
    let (g20, g21, g22, g32) = (d.g2[0], d.g2[1], d.g2[2], d.g3[2]);
    let num = 2.0 * g20.norm_sqr() * l.powi(2) + g21.norm_sqr() * (l.powi(4) + l.powi(3) + l.powi(2))
        - g21 * g22 * (2.0 * l.powi(3) + l.powi(2) + l - 1.0)
        + g32 * (l.powi(4) - l);
    -C::i() * num / (l.powi(4) - l) / l
}

#[test]
fn twist_formula_matches_homological_solve_and_oracle() {
    for n in [40, 80, 160] {
        let d = &island(n).diag;
        let a = birkhoff_twist(d).unwrap().alpha2;
        let b = homological_solve(d).unwrap().alpha2();
        let c = alpha2_oracle(d);
        assert!((a - b).norm() < 1e-9 * a.norm(), "n {n}: {a} vs {b}");
        assert!((a - c).norm() < 1e-9 * a.norm(), "n {n}: {a} vs {c}");
    }
}

#[test]
fn twist_coefficient_value() {
    let target = -4.0 * SQRT_2 / 9.0;
    for n in [40, 80, 160] {
        let tw = birkhoff_twist(&island(n).diag).unwrap();
        let n2 = (n as f64).powi(2);
        assert!(tw.alpha2.re < 0.0);
        assert!((tw.alpha2.norm() * n2) > 0.5);
        assert!((tw.alpha2.re * n2 - target).abs() < 0.1 * target.abs(), "n {n}: {}", tw.alpha2.re * n2);
        assert!(tw.alpha2.im.abs() < 0.15 * tw.alpha2.re.abs());
    }
}

#[test]
fn resonant_eigenvalues_are_refused() {
    let mut d = island(40).diag.clone();
    d.lambda = C::i();
    assert!(matches!(birkhoff_twist(&d), Err(LabError::Resonance { k: 4, .. })));
    d.lambda = C::from_polar(1.0, std::f64::consts::TAU / 3.0);
    assert!(matches!(homological_solve(&d), Err(LabError::Resonance { k: 3, .. })));
}

#[test]
fn normal_form_residual_decays_like_n_cubed() {
    let r: Vec<f64> = [40, 80]
        .into_iter()
        .map(|n| {
            let i = island(n);
            let nf = homological_solve(&i.diag).unwrap();
            normal_form_residual(&i.fp, &i.diag, &nf, 0.01, 12).unwrap()
        })
        .collect();
    assert!(r[0] / r[1] >= 6.0, "{r:?}");
}

#[test]
fn normal_form_conjugacy_inverts() {
    let nf = homological_solve(&island(80).diag).unwrap();
    let z = C::new(0.01, -0.004);
    assert!((nf.conj_inverse(nf.conj(z)) - z).norm() < 1e-16);
}

#[test]
fn rotation_profile_agrees_with_twist() {
    let i = island(40);
    let tw = birkhoff_twist(&i.diag).unwrap();
    let p = rotation_profile(&i.fp, &i.diag, &[0.01, 0.02, 0.03, 0.04], 4000).unwrap();
    assert!(p.slope < 0.0);
    assert!((p.slope - tw.alpha2.re).abs() < 0.3 * tw.alpha2.re.abs(), "{} vs {}", p.slope, tw.alpha2.re);
    assert!((p.intercept - i.diag.lambda.arg()).abs() < 1e-6);
    assert!(matches!(rotation_profile(&i.fp, &i.diag, &[0.01], 10), Err(LabError::InsufficientRange { .. })));
}

#[test]
fn island_survives_and_far_points_leave() {
    let i = island(40);
    let scan = island_scan(&i.fp, 5, 0.5, 500);
    assert_eq!(scan.total, 25);
    assert!(scan.fraction >= 0.5, "{scan:?}");
    let shape = SectorShape::<f64>::semidisc();
    let d = 10.0 * r_diameter();
    let far = stays_bounded(&shape, &i.fp.point(), d, 0.3 * d, 2.0 * r_diameter(), 1000);
    assert!(matches!(far, Err(LabError::OrbitEscaped(_))));
}

#[test]
fn least_squares_recovers_cubic() {
    let f = |x: f64, y: f64| (0.5 * x - 2.0 * y + 0.3 * x * y - 0.7 * y.powi(3), 0.25 * x + y + 1.5 * x * x + 0.2 * x * x * y);
    let m = taylor_fit_map(40, 0.01, f).unwrap();
    assert_abs_diff_eq!(m.a[0][1], -2.0, epsilon = 1e-10);
    assert_abs_diff_eq!(m.f2[0][1], 0.3, epsilon = 1e-8);
    assert_abs_diff_eq!(m.f3[0][3], -0.7, epsilon = 1e-6);
    assert_abs_diff_eq!(m.f2[1][0], 1.5, epsilon = 1e-8);
    assert_abs_diff_eq!(m.f3[1][1], 0.2, epsilon = 1e-6);
    assert!(m.fit_residual < 1e-14);
}

/// The closed-form return model in (x̃, ỹ) carries the published cubic
/// coefficients; its own twist must come out as −4√2/9 n⁻².
#[test]
fn model_route_reproduces_published_cubic_and_twist() {
    let n = 2000u32;
    let nf = n as f64;
    let zero = TailConstants::default();
    let m = taylor_fit_map(n, 0.05, |x, y| composed_return_model(nf, x, y, &zero)).unwrap();
    assert_abs_diff_eq!(m.f3[0][3] * nf * nf, 1360.0 / 729.0, epsilon = 1e-6);
    let d = diagonalize(&m).unwrap();
    let g32 = d.g3[2] * nf * nf;
    let expect = C::new(-32.0 / 81.0, 28.0 * SQRT_2 / 81.0);
    assert!((g32 - expect).norm() < 0.01, "{g32}");
    let tw = birkhoff_twist(&d).unwrap();
    assert!((tw.alpha2.re * nf * nf + 4.0 * SQRT_2 / 9.0).abs() < 0.01, "{}", tw.alpha2 * nf * nf);

    // tail constants move only constant terms
    let g = 7.0 / 192.0;
    let k = TailConstants { e: [0.0; 4], f: [-g, g, g, -g] };
    let mk = taylor_fit_map(n, 0.05, |x, y| composed_return_model(nf, x, y, &k)).unwrap();
    for c in 0..2 {
        for j in 0..4 {
            assert!((m.f3[c][j] - mk.f3[c][j]).abs() * nf * nf < 1e-6);
        }
    }
}
