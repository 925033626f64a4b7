//! Large-r expansions of F² in polar coordinates, region by region, and the
//! asymptotics of the singular lines.
//!
//! Semi-disc: `r' = r + a + a₁/r + a₂/r² + a₃/r³`, `θ' = θ + b/r + b₁/r² + b₂/r³ + b₃/r⁴`.
//! The published b₂ for regions I–IV has wrong constant and sinθ terms; the
//! corrected set fixes them and adds a₃, b₃ (derived symbolically from the
//! exact compositions). [`CoeffSet::Published`] keeps the printed values.

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::geometry::{Half, PolarPoint, RegionId, SectorShape};
use crate::real::Real;
use crate::stats::fit_slope;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CoeffSet {
    /// Coefficients as printed, up to a₂, b₂.
    Published,
    /// Corrected b₂ plus a₃, b₃.
    Corrected,
}

#[derive(Clone, Debug)]
pub struct F2Coefficients<R> {
    pub a: R,
    pub b: R,
    pub a1: R,
    pub b1: R,
    pub a2: Option<R>,
    pub b2: Option<R>,
    pub a3: Option<R>,
    pub b3: Option<R>,
}

fn c<R: Real>(x: f64) -> R {
    R::from_f64(x)
}

/// Semi-disc coefficients at angle `t` (regions I–V).
pub fn semidisc_coefficients<R: Real>(region: RegionId, t: &R, set: CoeffSet) -> Result<F2Coefficients<R>> {
    let s = t.sin();
    let co = t.cos();
    let sin_k = |k: f64| (t.clone() * k).sin();
    let cos_k = |k: f64| (t.clone() * k).cos();
    let corrected = set == CoeffSet::Corrected;
    let out = match region {
        RegionId::I | RegionId::IV => {
            let b2_const = if corrected { R::ratio(7.0, 3.0) } else { R::ratio(5.0, 3.0) };
            F2Coefficients {
                a: co.clone() * -2.0,
                b: (s.clone() + 1.0) * 2.0,
                a1: s.sq() * 2.0,
                b1: co.clone() * (s.clone() + 1.0) * 4.0,
                a2: Some(co.clone() * 4.0 - co.powi(3) * 4.0),
                b2: Some(cos_k(2.0) * 6.0 + sin_k(3.0) * 8.0 / 3.0 + b2_const),
                a3: corrected.then(|| (c::<R>(8.0) - s.sq() * 10.0) * s.sq()),
                b3: corrected.then(|| sin_k(4.0) * 4.0 + co.clone() * 8.0 + cos_k(3.0) * 10.0),
            }
        }
        RegionId::II | RegionId::III => {
            let sin_part = if corrected {
                -s.clone() * 4.0 + R::ratio(1.0, 3.0)
            } else {
                s.clone() * 4.0 - R::ratio(1.0, 3.0)
            };
            F2Coefficients {
                a: co.clone() * -2.0,
                b: (s.clone() + 1.0) * 2.0,
                a1: s.sq() * 2.0 + s.clone() * 4.0,
                b1: co.clone() * (s.clone() + 1.0) * 4.0,
                a2: Some(co.clone() * 8.0 + sin_k(2.0) * 4.0 - co.powi(3) * 4.0),
                b2: Some(cos_k(2.0) * 8.0 + sin_k(3.0) * 8.0 / 3.0 + sin_part),
                a3: corrected.then(|| {
                    -s.powi(4) * 10.0 - s.powi(3) * 24.0 - s.sq() * 8.0 + s.clone() * 14.0 + 8.0
                }),
                b3: corrected.then(|| {
                    -sin_k(2.0) * 16.0 + sin_k(4.0) * 4.0 - co.clone() * 2.0 + cos_k(3.0) * 16.0
                }),
            }
        }
        RegionId::V => F2Coefficients {
            a: co.clone() * -4.0,
            b: s.clone() * 4.0,
            a1: s.sq() * 8.0,
            b1: sin_k(2.0) * 8.0,
            a2: Some(co.clone() * 32.0 - co.powi(3) * 32.0),
            b2: Some(sin_k(3.0) * 64.0 / 3.0),
            a3: corrected.then(|| (c::<R>(128.0) - s.sq() * 160.0) * s.sq()),
            b3: corrected.then(|| sin_k(4.0) * 64.0),
        },
        RegionId::VI => {
            return Err(LabError::WrongRegion { region: "VI".into(), theta: t.to_f64() });
        }
    };
    Ok(out)
}

/// Sector coefficients (a, b, a₁, b₁) at angle `t`.
pub fn sector_coefficients<R: Real>(beta: &R, region: RegionId, t: &R) -> F2Coefficients<R> {
    let m = beta.clone() - t.clone();
    let p = beta.clone() + t.clone();
    let (a, b, a1, b1) = match region {
        RegionId::I | RegionId::III => {
            let extra = if region == RegionId::III { m.cos() * 4.0 } else { R::zero() };
            (
                m.sin() * -2.0,
                m.cos() * 2.0 + 2.0,
                (m.clone() * 2.0).cos() + 1.0 + extra,
                m.sin() * 4.0 + (m.clone() * 2.0).sin() * 2.0,
            )
        }
        RegionId::II | RegionId::IV => {
            let extra = if region == RegionId::II { -p.cos() * 4.0 } else { R::zero() };
            (
                p.sin() * -2.0,
                -p.cos() * 2.0 + 2.0,
                (p.clone() * 2.0).cos() + 1.0 + extra,
                p.sin() * 4.0 - (p.clone() * 2.0).sin() * 2.0,
            )
        }
        RegionId::V | RegionId::VI => (R::zero(), R::from_f64(4.0), R::zero(), R::zero()),
    };
    F2Coefficients { a, b, a1, b1, a2: None, b2: None, a3: None, b3: None }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SingularLine {
    L1,
    L1p,
    L2,
    L2p,
    L3,
    L3p,
}

/// Leading angle and 1/r coefficient of a singular line in the chart where
/// it bounds regions: ℓ₁, ℓ₂, ℓ₂′ in the upper chart (ℓ₁′ too), ℓ₃, ℓ₃′ in
/// the lower chart.
pub fn singular_line_model(beta: f64, line: SingularLine) -> (f64, f64) {
    use std::f64::consts::PI;
    let cb = beta.cos();
    match line {
        SingularLine::L1 => (0.0, -cb),
        SingularLine::L1p => (PI, -(2.0 + cb)),
        SingularLine::L2 => (beta, -1.0),
        SingularLine::L2p => (PI - beta, -3.0),
        SingularLine::L3 => (PI - beta, -1.0),
        SingularLine::L3p => (beta, -3.0),
    }
}

pub fn singular_line_theta(beta: f64, line: SingularLine, r: f64) -> f64 {
    let (lead, coeff) = singular_line_model(beta, line);
    lead + coeff / r
}

/// Angular band of a region at radius `r` in its own chart, from the
/// singular-line asymptotics.
pub fn region_band(beta: f64, region: RegionId, r: f64) -> (f64, f64) {
    use std::f64::consts::PI;
    let cb = beta.cos();
    let (l2, l2p) = (beta - 1.0 / r, PI - beta - 3.0 / r);
    let (l3p, l3) = (beta - 3.0 / r, PI - beta - 1.0 / r);
    match region {
        RegionId::I => (-cb / r, l2.min(l2p)),
        RegionId::V => (l2.min(l2p), l2.max(l2p)),
        RegionId::II => (l2.max(l2p), PI - (2.0 + cb) / r),
        RegionId::III => (-(2.0 + cb) / r, l3p.min(l3)),
        RegionId::VI => (l3p.min(l3), l3p.max(l3)),
        RegionId::IV => (l3p.max(l3), PI - cb / r),
    }
}

fn check_band(beta: f64, region: RegionId, p: &PolarPoint<impl Real>) -> Result<()> {
    let r = p.r.to_f64();
    let t = p.theta.to_f64();
    let (lo, hi) = region_band(beta, region, r);
    if p.half != region.half() || t < lo || t > hi {
        return Err(LabError::WrongRegion { region: region.to_string(), theta: t });
    }
    Ok(())
}

fn apply_series<R: Real>(k: &F2Coefficients<R>, p: &PolarPoint<R>, order: u32) -> PolarPoint<R> {
    let r = p.r.clone();
    let inv = R::one() / r.clone();
    let mut dr = k.a.clone();
    let mut dt = k.b.clone() * inv.clone();
    let terms = [
        (Some(k.a1.clone()), Some(k.b1.clone())),
        (k.a2.clone(), k.b2.clone()),
        (k.a3.clone(), k.b3.clone()),
    ];
    let mut pw = inv.clone();
    for (i, (ai, bi)) in terms.into_iter().enumerate() {
        if order < i as u32 + 2 {
            break;
        }
        if let (Some(ai), Some(bi)) = (ai, bi) {
            dr = dr + ai * pw.clone();
            dt = dt + bi * pw.clone() * inv.clone();
        }
        pw = pw * inv.clone();
    }
    PolarPoint { r: r + dr, theta: p.theta.clone() + dt, half: p.half }
}

/// Truncated semi-disc expansion. `order` counts retained powers: 1 keeps
/// (a, b), 4 keeps up to (a₃, b₃).
pub fn f2_asym_semidisc<R: Real>(
    region: RegionId,
    p: &PolarPoint<R>,
    order: u32,
    set: CoeffSet,
) -> Result<PolarPoint<R>> {
    check_band(std::f64::consts::FRAC_PI_2, region, p)?;
    f2_asym_semidisc_unchecked(region, p, order, set)
}

/// Same as [`f2_asym_semidisc`] without the band check.
pub fn f2_asym_semidisc_unchecked<R: Real>(
    region: RegionId,
    p: &PolarPoint<R>,
    order: u32,
    set: CoeffSet,
) -> Result<PolarPoint<R>> {
    let k = semidisc_coefficients(region, &p.theta, set)?;
    Ok(apply_series(&k, p, order.min(4)))
}

/// Truncated sector expansion, order ≤ 2.
pub fn f2_asym_sector<R: Real>(beta: &R, region: RegionId, p: &PolarPoint<R>, order: u32) -> Result<PolarPoint<R>> {
    check_band(beta.to_f64(), region, p)?;
    let k = sector_coefficients(beta, region, &p.theta);
    Ok(apply_series(&k, p, order.min(2)))
}

#[derive(Clone, Debug, Serialize)]
pub struct OrderFit {
    pub slope_r: f64,
    pub slope_theta: f64,
    /// (r, max |Δr|, max |Δθ|)
    pub rows: Vec<(f64, f64, f64)>,
}

/// θ-samples inside a region band at radius r, `margin` away from its ends
/// (the middle half when the band is narrower than that allows).
pub fn band_samples(beta: f64, region: RegionId, r: f64, margin: f64, count: usize) -> Vec<f64> {
    let (lo, hi) = region_band(beta, region, r);
    let (lo, hi) = if hi - lo > 4.0 * margin {
        (lo + margin, hi - margin)
    } else {
        let w = hi - lo;
        (lo + 0.25 * w, hi - 0.25 * w)
    };
    (0..count).map(|i| lo + (hi - lo) * (i as f64 + 0.5) / count as f64).collect()
}

/// Least-squares log-log slopes of the expansion error against r. `exact`
/// returns `None` when the point is not in the expected region.
pub fn order_fit<R, E, A>(exact: E, approx: A, r_grid: &[f64], theta_grid: impl Fn(f64) -> Vec<f64>) -> Result<OrderFit>
where
    R: Real,
    E: Fn(&PolarPoint<R>) -> Option<PolarPoint<R>>,
    A: Fn(&PolarPoint<R>) -> Result<PolarPoint<R>>,
{
    if r_grid.len() < 4 {
        return Err(LabError::InsufficientRange { need: 4, got: r_grid.len() });
    }
    let mut rows = Vec::with_capacity(r_grid.len());
    for &r in r_grid {
        let (mut er, mut et) = (0.0f64, 0.0f64);
        for t in theta_grid(r) {
            let p = PolarPoint::new(R::from_f64(r), R::from_f64(t), Half::Upper);
            let Some(ex) = exact(&p) else { continue };
            let ap = approx(&p)?;
            er = er.max((ex.r - ap.r).abs().to_f64());
            et = et.max((ex.theta - ap.theta).abs().to_f64());
        }
        rows.push((r, er, et));
    }
    let lr: Vec<f64> = rows.iter().map(|x| x.0.ln()).collect();
    let slope_r = fit_slope(&lr, &rows.iter().map(|x| x.1.ln()).collect::<Vec<_>>());
    let slope_theta = fit_slope(&lr, &rows.iter().map(|x| x.2.ln()).collect::<Vec<_>>());
    Ok(OrderFit { slope_r, slope_theta, rows })
}

/// Exact F² at a polar point, expressed back in the same chart with the angle
/// unwrapped next to the input. `None` if the point is singular or not in
/// `region`.
pub fn exact_f2_polar<R: Real>(shape: &SectorShape<R>, region: RegionId, p: &PolarPoint<R>) -> Option<PolarPoint<R>> {
    let z = p.to_point();
    let (got, w) = shape.f2(&z).ok()?;
    if got != region {
        return None;
    }
    let mut q = PolarPoint::from_point_in(&w, p.half);
    let two_pi = R::pi() * 2.0;
    while (q.theta.clone() - p.theta.clone()).to_f64() < -std::f64::consts::PI {
        q.theta = q.theta + two_pi.clone();
    }
    while (q.theta.clone() - p.theta.clone()).to_f64() > std::f64::consts::PI {
        q.theta = q.theta - two_pi.clone();
    }
    Some(q)
}

/// Order fit of a semi-disc region expansion against the exact map.
pub fn semidisc_order_fit<R: Real>(region: RegionId, order: u32, set: CoeffSet, r_grid: &[f64], samples: usize) -> Result<OrderFit> {
    let shape = SectorShape::<R>::semidisc();
    let beta = std::f64::consts::FRAC_PI_2;
    let half = region.half();
    order_fit(
        |p: &PolarPoint<R>| exact_f2_polar(&shape, region, &PolarPoint { half, ..p.clone() }),
        |p: &PolarPoint<R>| f2_asym_semidisc_unchecked(region, &PolarPoint { half, ..p.clone() }, order, set),
        r_grid,
        |r| band_samples(beta, region, r, 5.0 / r, samples),
    )
}

/// Order fit of a sector region expansion (order ≤ 2) against the exact map.
pub fn sector_order_fit<R: Real>(beta: &R, region: RegionId, order: u32, r_grid: &[f64], samples: usize) -> Result<OrderFit> {
    let shape = SectorShape::new(beta.clone());
    let bf = beta.to_f64();
    let half = region.half();
    order_fit(
        |p: &PolarPoint<R>| exact_f2_polar(&shape, region, &PolarPoint { half, ..p.clone() }),
        |p: &PolarPoint<R>| {
            let k = sector_coefficients(beta, region, &p.theta);
            Ok(apply_series(&k, &PolarPoint { half, ..p.clone() }, order.min(2)))
        },
        r_grid,
        |r| band_samples(bf, region, r, 5.0 / r, samples),
    )
}

/// Locate a region boundary on the circle of radius r by bisection on the
/// exact region classification. `lo` must classify as `below`, `hi` not;
/// either order works.
pub fn locate_boundary(shape: &SectorShape<f64>, half: Half, r: f64, below: RegionId, mut lo: f64, mut hi: f64) -> Option<f64> {
    let classify = |t: f64| {
        let z = PolarPoint::new(r, t, half).to_point();
        shape.classify_region(&z).ok()
    };
    if classify(lo)? != below {
        return None;
    }
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        match classify(mid) {
            Some(reg) if reg == below => lo = mid,
            Some(_) => hi = mid,
            None => return Some(mid),
        }
        if (hi - lo).abs() < 1e-15 * r.max(1.0) {
            break;
        }
    }
    Some(0.5 * (lo + hi))
}
