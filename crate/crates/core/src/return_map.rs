//! First-return maps to the fundamental domains.
//!
//! Semi-disc: the exact return to region I (detected as the IV → I
//! transition of the F² orbit), the four asymptotic passage maps 𝓕₁..𝓕₄ in
//! (ρ, φ) coordinates and their composition expanded near the anchor
//! (3n + 1/4, 1/2). Sector: the cylinder chart (R, φ) on the domain between
//! ℓ₁ and F²ℓ₁ and the sawtooth model L_β.

use rayon::prelude::*;
use serde::Serialize;

use crate::adiabatic::AdiabaticChart;
use crate::asymptotic::CoeffSet;
use crate::error::{LabError, Result};
use crate::geometry::{Half, Point2, PolarPoint, RegionId, SectorShape};
use crate::real::Real;
use crate::stats::loglog_slope;

/// Cap on F² steps per return.
pub const MAX_RETURN_STEPS: usize = 1_000_000;

#[derive(Clone, Debug)]
pub struct Return<R = f64> {
    pub point: Point2<R>,
    /// F² steps taken.
    pub steps: usize,
    /// Orbit points per region, indexed like [`RegionId::ALL`].
    pub visits: [usize; 6],
}

fn region_index(r: RegionId) -> usize {
    RegionId::ALL.iter().position(|&x| x == r).unwrap()
}

/// Iterate F² from a point of region I until the orbit comes back from IV
/// into I.
pub fn exact_first_return<R: Real>(shape: &SectorShape<R>, z: &Point2<R>, max_steps: usize) -> Result<Return<R>> {
    let (first, mut next) = shape.f2(z).map_err(|_| LabError::SingularOrbit { steps: 0 })?;
    if first != RegionId::I {
        let theta = PolarPoint::from_point(z).theta.to_f64();
        return Err(LabError::WrongRegion { region: first.to_string(), theta });
    }
    let mut visits = [0usize; 6];
    visits[region_index(first)] += 1;
    let mut prev = first;
    let mut cur;
    for steps in 1..=max_steps {
        cur = next;
        let (reg, nx) = shape.f2(&cur).map_err(|_| LabError::SingularOrbit { steps })?;
        if prev == RegionId::IV && reg == RegionId::I {
            return Ok(Return { point: cur, steps, visits });
        }
        visits[region_index(reg)] += 1;
        prev = reg;
        next = nx;
    }
    Err(LabError::MaxStepsExceeded(max_steps))
}

/// (ρ, φ = ρψ) on the semi-disc domain D, through the region-I chart.
#[derive(Clone, Debug)]
pub struct DomainChart {
    chart: AdiabaticChart,
    order: u32,
}

impl DomainChart {
    /// Corrected semi-disc chart without tails (order 3).
    pub fn semidisc() -> Self {
        DomainChart { chart: AdiabaticChart::semidisc(RegionId::I, CoeffSet::Corrected).unwrap(), order: 3 }
    }

    /// Use a chart that carries the Φ₄/Ψ₃ tails (order 4).
    pub fn with_chart(chart: AdiabaticChart) -> Self {
        let order = if chart.tail.is_some() { 4 } else { 3 };
        DomainChart { chart, order }
    }

    pub fn rho_phi<R: Real>(&self, z: &Point2<R>) -> (R, R) {
        let p = PolarPoint::from_point_in(z, Half::Upper);
        let (rho, psi) = self.chart.to_adiabatic_unchecked(&p.r, &p.theta, self.order);
        (rho.clone(), rho * psi)
    }

    pub fn point<R: Real>(&self, rho: &R, phi: &R) -> Result<Point2<R>> {
        let psi = phi.clone() / rho.clone();
        Ok(self.chart.from_adiabatic(rho, &psi, self.order)?.to_point())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Stage {
    F1,
    F2,
    F3,
    F4,
}

impl Stage {
    pub const ALL: [Stage; 4] = [Stage::F1, Stage::F2, Stage::F3, Stage::F4];

    /// Admissible range of v = {ρ/3 − φ} for the passage.
    pub fn v_window(self) -> (f64, f64) {
        match self {
            Stage::F1 => (1.0 / 3.0, 5.0 / 6.0),
            Stage::F2 | Stage::F4 => (1.0 / 3.0, 2.0 / 3.0),
            Stage::F3 => (5.0 / 6.0, 1.0),
        }
    }
}

/// Φ₄ and Ψ₃ at π/2 per region I..IV.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct TailConstants {
    pub e: [f64; 4],
    pub f: [f64; 4],
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ReturnState {
    pub rho: f64,
    pub phi: f64,
}

/// One asymptotic passage, series through ρ⁻².
pub fn passage_map(stage: Stage, s: ReturnState, k: &TailConstants) -> Result<ReturnState> {
    use std::f64::consts::PI;
    let ReturnState { rho, phi } = s;
    let v = (rho / 3.0 - phi).rem_euclid(1.0);
    if !(1e-9..=1.0 - 1e-9).contains(&v) {
        return Err(LabError::OnBoundary);
    }
    let (lo, hi) = stage.v_window();
    if v <= lo || v >= hi {
        return Err(LabError::BandViolation(format!("{stage:?}: v = {v}")));
    }
    let (e, f) = (k.e, k.f);
    let (r1, r2) = (1.0 / rho, 1.0 / (rho * rho));
    let v2 = v * v;
    let out = match stage {
        Stage::F1 => ReturnState {
            rho: rho + r1 * (22.0 / 3.0 - 16.0 * v) + r2 * (4.0 * e[1] - 4.0 * e[0] - 16.0 * v + 58.0 / 9.0),
            phi: 7.0 / 6.0 - v
                + r1 * (PI / 2.0 - 7.0 / 9.0)
                + r2 * (8.0 * v2 - 4.0 * v / 3.0 - 8.0 * f[0] + 8.0 * f[1] + PI - 293.0 / 36.0),
        },
        Stage::F2 => ReturnState {
            rho: rho - 4.0 * v + r2 * v * (8.0 * v2 - 12.0 * v + 11.0) / 3.0,
            phi: 1.0 - v + r2 * v / 2.0,
        },
        Stage::F3 => ReturnState {
            rho: rho + r1 * (50.0 / 3.0 - 16.0 * v) + r2 * (4.0 * e[3] - 4.0 * e[2] + 8.0 * PI + 16.0 * v - 254.0 / 9.0),
            phi: 5.0 / 6.0 - v
                + r1 * (PI / 2.0 - 7.0 / 9.0)
                + r2 * (8.0 * v2 - 20.0 * v / 3.0 - 8.0 * f[2] + 8.0 * f[3] - PI + 31.0 / 12.0),
        },
        Stage::F4 => ReturnState {
            rho: rho + 4.0 - 4.0 * v + r2 * (8.0 * v2 * v - 4.0 * v2 + 5.0 * v - 1.0) / 3.0,
            phi: 1.0 - v + r2 * (0.5 - v / 2.0),
        },
    };
    Ok(out)
}

/// The anchor states (ρ⁽⁰⁾..ρ⁽⁴⁾, φ⁽⁰⁾..φ⁽⁴⁾) of the passage cycle.
pub fn anchor_cycle(n: f64) -> [ReturnState; 5] {
    let s = |rho, phi| ReturnState { rho, phi };
    [
        s(3.0 * n + 0.25, 0.5),
        s(3.0 * n + 0.25, 7.0 / 12.0),
        s(3.0 * n - 1.75, 0.5),
        s(3.0 * n - 1.75, -1.0 / 12.0),
        s(3.0 * n + 0.25, 0.5),
    ]
}

/// All intermediate states of 𝓕₄𝓕₃𝓕₂𝓕₁ from `s`.
pub fn passage_cycle(s: ReturnState, k: &TailConstants) -> Result<[ReturnState; 5]> {
    let mut out = [s; 5];
    for (i, st) in Stage::ALL.into_iter().enumerate() {
        out[i + 1] = passage_map(st, out[i], k)?;
    }
    Ok(out)
}

/// 𝓕₄𝓕₃𝓕₂𝓕₁ in coordinates centred at the anchor (3n + 1/4, 1/2).
pub fn composed_passages(n: f64, xt: f64, yt: f64, k: &TailConstants) -> Result<(f64, f64)> {
    let c = passage_cycle(ReturnState { rho: 3.0 * n + 0.25 + xt, phi: 0.5 + yt }, k)?;
    Ok((c[4].rho - 3.0 * n - 0.25, c[4].phi - 0.5))
}

/// Linear part of the composed model at n = ∞.
pub const LINEAR_PART: [[f64; 2]; 2] = [[1.0 / 9.0, -8.0 / 3.0], [4.0 / 9.0, -5.0 / 3.0]];

/// Lower-degree n⁻² coefficients of the composed model, in the order
/// (x², y², xy, x, y, 1). The cubic, πx, πy, π and e/f parts are shared.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelQuadratics {
    pub x: [f64; 6],
    pub y: [f64; 6],
}

impl ModelQuadratics {
    /// The coefficients as printed with the closed-form model.
    pub const PRINTED: Self = Self {
        x: [-416.0 / 729.0, -224.0 / 81.0, 800.0 / 243.0, -1922.0 / 729.0, 998.0 / 243.0, 1486.0 / 729.0],
        y: [-80.0 / 729.0, -176.0 / 81.0, 320.0 / 243.0, -1205.0 / 729.0, 950.0 / 243.0, 817.0 / 729.0],
    };
    /// Exact rational composition of the four printed passage maps, expanded in 1/n.
    /// Differs from `PRINTED` in x², y², xy, x, y and constant terms of X and x, y, constant of Y.
    pub const RECOMPOSED: Self = Self {
        x: [-1120.0 / 2187.0, -472.0 / 243.0, 2080.0 / 729.0, -1442.0 / 729.0, 1694.0 / 243.0, 1972.0 / 729.0],
        y: [-80.0 / 729.0, -176.0 / 81.0, 320.0 / 243.0, -1061.0 / 729.0, 1094.0 / 243.0, 925.0 / 729.0],
    };

    fn eval(c: &[f64; 6], x: f64, y: f64) -> f64 {
        c[0] * x * x + c[1] * y * y + c[2] * x * y + c[3] * x + c[4] * y + c[5]
    }
}

/// Cubic part of the n⁻² coefficient (X, Y). The printed and recomposed models agree here.
pub fn model_cubic(x: f64, y: f64) -> (f64, f64) {
    (
        -1520.0 * x * y * y / 729.0 + 2080.0 * x * x * y / 2187.0 - 3392.0 * x.powi(3) / 19683.0
            + 1360.0 * y.powi(3) / 729.0,
        -32.0 * x * y * y / 81.0 + 64.0 * x * x * y / 243.0 - 128.0 * x.powi(3) / 2187.0 + 16.0 * y.powi(3) / 81.0,
    )
}

/// Closed-form return model in (x̃, ỹ) = (ρ − 3n − 1/4, φ − 1/2) through order n⁻²,
/// with the printed coefficients.
pub fn composed_return_model(n: f64, x: f64, y: f64, k: &TailConstants) -> (f64, f64) {
    composed_return_model_with(n, x, y, k, &ModelQuadratics::PRINTED)
}

pub fn composed_return_model_with(n: f64, x: f64, y: f64, k: &TailConstants, q: &ModelQuadratics) -> (f64, f64) {
    use std::f64::consts::PI;
    let (e, f) = (k.e, k.f);
    let (cx, cy) = model_cubic(x, y);
    let big_x = cx + ModelQuadratics::eval(&q.x, x, y) + 14.0 * PI * x / 27.0 - 8.0 * PI * y / 9.0
        + 28.0 * (e[0] - e[1]) / 81.0
        + 4.0 * (e[2] - e[3]) / 27.0
        + 64.0 * (f[0] - f[1]) / 27.0
        - 32.0 * (f[2] - f[3]) / 9.0
        - 83.0 * PI / 162.0;
    let big_y = cy + ModelQuadratics::eval(&q.y, x, y) + 5.0 * PI * x / 27.0 - 2.0 * PI * y / 9.0
        + 4.0 * (e[0] - e[1]) / 81.0
        + 4.0 * (e[2] - e[3]) / 27.0
        + 40.0 * (f[0] - f[1]) / 27.0
        - 8.0 * (f[2] - f[3]) / 9.0
        - 121.0 * PI / 324.0;
    let (a, n2) = (LINEAR_PART, n * n);
    (
        a[0][0] * x + a[0][1] * y + (2.0 * PI / 9.0 - 4.0 / 81.0 - 32.0 * y / 9.0 + 128.0 * x / 81.0) / n + big_x / n2,
        a[1][0] * x + a[1][1] * y + (-PI / 9.0 + 2.0 / 81.0 + 32.0 * x / 81.0) / n + big_y / n2,
    )
}

/// Plane point near the semi-disc anchor: (x, y) = (3n − 3/4, 1) + offset.
pub fn anchor_point(n: f64) -> Point2 {
    Point2::new(3.0 * n - 0.75, 1.0)
}

/// The island chart H₁ to leading order: x₁ = x + y − 3n − 1/4, y₁ = y/2 − 1/2.
pub fn h1_chart(n: f64, z: &Point2) -> (f64, f64) {
    (z.x + z.y - 3.0 * n - 0.25, 0.5 * z.y - 0.5)
}

pub fn h1_inverse(n: f64, x1: f64, y1: f64) -> Point2 {
    let y = 2.0 * y1 + 1.0;
    Point2::new(x1 + 3.0 * n + 0.25 - y, y)
}

// ---------------------------------------------------------------- sector

/// Constants of the sawtooth model for the sector of angle β.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SectorConstants {
    pub beta: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub c1: f64,
    pub c2: f64,
}

impl SectorConstants {
    pub fn new(beta: f64) -> Self {
        let t = (0.5 * beta).tan();
        let a = t.powi(3) / 6.0 + t / 2.0;
        let q = (std::f64::consts::PI - 2.0 * beta) / 4.0;
        let b = q + 2.0 * a;
        let c = (2.0 * beta.sin() + (2.0 * beta).sin()) * b;
        SectorConstants { beta, a, b, c, c1: a / b, c2: (a + q) / b }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CylinderState {
    pub r: f64,
    pub phi: f64,
}

/// Leading affine chart of the sector domain onto the cylinder.
pub fn sector_cylinder_chart(k: &SectorConstants, z: &Point2) -> CylinderState {
    let (s, c) = (k.beta.sin(), k.beta.cos());
    CylinderState {
        r: k.b * (0.5 * (c + 1.0) * z.x + 0.5 * s * z.y) + 0.5 - 0.5 * k.b * s,
        phi: (z.y + c) / (2.0 * (c + 1.0)),
    }
}

pub fn sector_cylinder_inverse(k: &SectorConstants, st: &CylinderState) -> Point2 {
    let (s, c) = (k.beta.sin(), k.beta.cos());
    let y = 2.0 * (c + 1.0) * st.phi - c;
    let x = (2.0 * ((st.r - 0.5) / k.b + 0.5 * s) - s * y) / (c + 1.0);
    Point2::new(x, y)
}

/// One step of L_C(R, φ) = (R + C({φ − R} − 1/2), {φ − R}).
pub fn sawtooth_step(c: f64, s: &CylinderState) -> Result<CylinderState> {
    let w = (s.phi - s.r).rem_euclid(1.0);
    if !(1e-12..=1.0 - 1e-12).contains(&w) {
        return Err(LabError::OnBoundary);
    }
    Ok(CylinderState { r: s.r + c * (w - 0.5), phi: w })
}

pub fn sawtooth_model(k: &SectorConstants, s: &CylinderState) -> Result<CylinderState> {
    sawtooth_step(k.c, &sawtooth_step(k.c, s)?)
}

fn frac_dist(x: f64, target: f64) -> f64 {
    let d = (x - target).rem_euclid(1.0);
    d.min(1.0 - d)
}

/// Distance (in φ units) to the nearest singular curve of the half passage.
pub fn sector_singular_distance(k: &SectorConstants, s: &CylinderState) -> f64 {
    frac_dist(s.phi - s.r, 0.0)
        .min(frac_dist(k.c1 * s.r - s.phi, 0.5 * k.c1))
        .min(frac_dist(k.c2 * s.r - s.phi, 1.0 - 0.5 * k.c2))
}

#[derive(Clone, Debug, Serialize)]
pub struct SawtoothFit {
    pub slope: f64,
    /// (R, max residual, samples used)
    pub rows: Vec<(f64, f64, usize)>,
}

/// Max over an ensemble of |exact return − L²| at each R, and the log-log
/// slope. Samples within 5/R of a singular curve at either half step are
/// dropped, as are orbits that meet a singular line.
pub fn sawtooth_residual(beta: f64, r_grid: &[f64], samples: usize) -> Result<SawtoothFit> {
    if r_grid.len() < 4 {
        return Err(LabError::InsufficientRange { need: 4, got: r_grid.len() });
    }
    let k = SectorConstants::new(beta);
    let shape = SectorShape::<f64>::from_f64(beta);
    let mut rows = Vec::new();
    for &r0 in r_grid {
        let margin = 5.0 / r0;
        let res: Vec<Option<f64>> = (0..samples)
            .into_par_iter()
            .map(|i| {
                let s = CylinderState {
                    r: r0 + (i as f64 * 0.618_033_988_749_895).fract(),
                    phi: (i as f64 + 0.5) / samples as f64,
                };
                let half = sawtooth_step(k.c, &s).ok()?;
                if sector_singular_distance(&k, &s) < margin || sector_singular_distance(&k, &half) < margin {
                    return None;
                }
                let model = sawtooth_step(k.c, &half).ok()?;
                let z = sector_cylinder_inverse(&k, &s);
                let ret = exact_first_return(&shape, &z, MAX_RETURN_STEPS).ok()?;
                let got = sector_cylinder_chart(&k, &ret.point);
                Some((got.r - model.r).abs().max(frac_dist(got.phi, model.phi)))
            })
            .collect();
        let used: Vec<f64> = res.into_iter().flatten().collect();
        if used.is_empty() {
            return Err(LabError::InsufficientRange { need: 1, got: 0 });
        }
        rows.push((r0, used.iter().cloned().fold(0.0, f64::max), used.len()));
    }
    let rs: Vec<f64> = rows.iter().map(|x| x.0).collect();
    let slope = loglog_slope(&rs, &rows.iter().map(|x| x.1).collect::<Vec<_>>());
    Ok(SawtoothFit { slope, rows })
}
