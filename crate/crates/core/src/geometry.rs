//! Exact outer billiard map around the circular sector
//! `{x² + y² ≤ 1, y ≥ −cos β}`.
//!
//! For β = π/2 this is the semi-disc `{x² + y² ≤ 1, y ≥ 0}`: the chord sits on
//! `y = −cos β = 0`, so the semi-disc needs no translation of the frame.
//!
//! Orientation: the sector lies on the right of the oriented segment
//! `z → F(z)`. This is the choice under which `(2+√3, 1)` is 5-periodic for
//! the semi-disc.

use serde::{Deserialize, Serialize};
use std::fmt;

use crate::error::{LabError, Result};
use crate::real::Real;

/// Default distance to a singular line below which a point counts as singular.
pub const SINGULAR_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct Point2<R = f64> {
    pub x: R,
    pub y: R,
}

impl<R: Real> Point2<R> {
    pub fn new(x: R, y: R) -> Self {
        Point2 { x, y }
    }

    pub fn from_f64(x: f64, y: f64) -> Self {
        Point2 { x: R::from_f64(x), y: R::from_f64(y) }
    }

    pub fn norm2(&self) -> R {
        self.x.sq() + self.y.sq()
    }

    pub fn to_f64(&self) -> Point2<f64> {
        Point2 { x: self.x.to_f64(), y: self.y.to_f64() }
    }

    pub fn dist(&self, o: &Self) -> R {
        (self.x.clone() - o.x.clone()).hypot(&(self.y.clone() - o.y.clone()))
    }

    /// Point reflection through `c`: `2c − self`.
    pub fn reflect_through(&self, c: &Self) -> Self {
        Point2 {
            x: c.x.clone() * 2.0 - self.x.clone(),
            y: c.y.clone() * 2.0 - self.y.clone(),
        }
    }
}

impl Point2<f64> {
    pub fn norm(&self) -> f64 {
        self.x.hypot(self.y)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SupportKind {
    Vertex1,
    Vertex2,
    Tangency,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SupportPoint<R = f64> {
    pub kind: SupportKind,
    pub location: Point2<R>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RegionId {
    I,
    II,
    III,
    IV,
    V,
    VI,
}

impl RegionId {
    pub const ALL: [RegionId; 6] =
        [RegionId::I, RegionId::II, RegionId::III, RegionId::IV, RegionId::V, RegionId::VI];

    /// Regions I, II and V are parametrized in the upper polar chart; III, IV
    /// and VI in the chart of `−z`.
    pub fn half(self) -> Half {
        match self {
            RegionId::I | RegionId::II | RegionId::V => Half::Upper,
            _ => Half::Lower,
        }
    }
}

impl fmt::Display for RegionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            RegionId::I => "I",
            RegionId::II => "II",
            RegionId::III => "III",
            RegionId::IV => "IV",
            RegionId::V => "V",
            RegionId::VI => "VI",
        };
        f.write_str(s)
    }
}

/// The smooth maps that F² restricts to on its continuity domains.
/// `TR1` means T∘R₁ (R₁ first).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Composition {
    TR1,
    R2T,
    R1T,
    TR2,
    TT,
    R2R1,
    R1R2,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Half {
    Upper,
    Lower,
}

/// Polar chart. In the lower half the angle is that of `−z`, i.e. the true
/// polar angle shifted by π.
#[derive(Clone, Debug, PartialEq)]
pub struct PolarPoint<R = f64> {
    pub r: R,
    pub theta: R,
    pub half: Half,
}

impl<R: Real> PolarPoint<R> {
    pub fn new(r: R, theta: R, half: Half) -> Self {
        PolarPoint { r, theta, half }
    }

    pub fn to_point(&self) -> Point2<R> {
        let x = self.r.clone() * self.theta.cos();
        let y = self.r.clone() * self.theta.sin();
        match self.half {
            Half::Upper => Point2 { x, y },
            Half::Lower => Point2 { x: -x, y: -y },
        }
    }

    pub fn from_point_in(z: &Point2<R>, half: Half) -> Self {
        let r = z.norm2().sqrt();
        let theta = match half {
            Half::Upper => z.y.atan2(&z.x),
            Half::Lower => (-z.y.clone()).atan2(&(-z.x.clone())),
        };
        PolarPoint { r, theta, half }
    }

    /// Upper chart for `y ≥ 0`, lower chart otherwise.
    pub fn from_point(z: &Point2<R>) -> Self {
        let half = if z.y.to_f64() >= 0.0 { Half::Upper } else { Half::Lower };
        Self::from_point_in(z, half)
    }
}

#[derive(Clone, Debug)]
pub struct SectorShape<R = f64> {
    beta: R,
    sin_b: R,
    cos_b: R,
    semidisc: bool,
    pub tol: f64,
}

impl<R: Real> SectorShape<R> {
    pub fn new(beta: R) -> Self {
        let sin_b = beta.sin();
        let cos_b = beta.cos();
        SectorShape { beta, sin_b, cos_b, semidisc: false, tol: SINGULAR_TOL }
    }

    pub fn from_f64(beta: f64) -> Self {
        if beta == std::f64::consts::FRAC_PI_2 {
            Self::semidisc()
        } else {
            Self::new(R::from_f64(beta))
        }
    }

    /// β = π/2 with exact sin β = 1, cos β = 0.
    pub fn semidisc() -> Self {
        SectorShape {
            beta: R::pi() / 2.0,
            sin_b: R::one(),
            cos_b: R::zero(),
            semidisc: true,
            tol: SINGULAR_TOL,
        }
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn beta(&self) -> &R {
        &self.beta
    }
    pub fn sin_beta(&self) -> &R {
        &self.sin_b
    }
    pub fn cos_beta(&self) -> &R {
        &self.cos_b
    }
    pub fn is_semidisc(&self) -> bool {
        self.semidisc
    }

    pub fn o1(&self) -> Point2<R> {
        Point2 { x: self.sin_b.clone(), y: -self.cos_b.clone() }
    }

    pub fn o2(&self) -> Point2<R> {
        Point2 { x: -self.sin_b.clone(), y: -self.cos_b.clone() }
    }

    pub fn contains(&self, z: &Point2<R>) -> bool {
        z.norm2().to_f64() <= 1.0 && (z.y.clone() + self.cos_b.clone()).to_f64() >= 0.0
    }

    /// Distance to the nearest singular line of F: ℓ₁ (the chord extended past
    /// O₁) and the arc tangents ℓ₂ at O₁ and ℓ₃ at O₂.
    pub fn singular_distance(&self, z: &Point2<R>) -> f64 {
        let (s, c) = (self.sin_b.to_f64(), self.cos_b.to_f64());
        let p = z.to_f64();
        let ray = |o: (f64, f64), u: (f64, f64)| {
            let (dx, dy) = (p.x - o.0, p.y - o.1);
            let t = dx * u.0 + dy * u.1;
            if t >= 0.0 {
                (dx * u.1 - dy * u.0).abs()
            } else {
                dx.hypot(dy)
            }
        };
        let l1 = ray((s, -c), (1.0, 0.0));
        let l2 = ray((s, -c), (c, s));
        let l3 = ray((-s, -c), (c, -s));
        l1.min(l2).min(l3)
    }

    /// Point of the unit circle where the line from `z` touches it with the
    /// disc on the right. Requires `|z| > 1`.
    pub fn tangency(&self, z: &Point2<R>) -> Point2<R> {
        let d2 = z.norm2();
        let s = (d2.clone() - 1.0).sqrt() / d2.clone();
        Point2 {
            x: z.x.clone() / d2.clone() + s.clone() * z.y.clone(),
            y: z.y.clone() / d2 - s * z.x.clone(),
        }
    }

    /// The reflection T through the right tangency point.
    pub fn t_map(&self, z: &Point2<R>) -> Point2<R> {
        z.reflect_through(&self.tangency(z))
    }

    pub fn r1(&self, z: &Point2<R>) -> Point2<R> {
        z.reflect_through(&self.o1())
    }

    pub fn r2(&self, z: &Point2<R>) -> Point2<R> {
        z.reflect_through(&self.o2())
    }

    fn sup_sector(&self, nx: f64, ny: f64) -> f64 {
        let (s, c) = (self.sin_b.to_f64(), self.cos_b.to_f64());
        let mut best = (nx * s - ny * c).max(-nx * s - ny * c);
        let nn = nx.hypot(ny);
        if ny / nn >= -c {
            best = best.max(nn);
        }
        best
    }

    /// Slack of the line `z → v`: how far the sector reaches to the left of
    /// it, normalized. Zero for a supporting line with the sector on the right.
    fn vertex_slack(&self, z: &Point2<f64>, v: &Point2<f64>) -> f64 {
        let (dx, dy) = (v.x - z.x, v.y - z.y);
        let (nx, ny) = (-dy, dx);
        (self.sup_sector(nx, ny) - (nx * z.x + ny * z.y)) / nx.hypot(ny)
    }

    pub fn support_point(&self, z: &Point2<R>) -> Result<SupportPoint<R>> {
        let zf = z.to_f64();
        if self.contains(z) {
            return Err(LabError::InsideShape { x: zf.x, y: zf.y });
        }
        if self.singular_distance(z) < self.tol {
            return Err(LabError::OnSingularity { x: zf.x, y: zf.y });
        }
        if z.norm2().to_f64() > 1.0 {
            let p = self.tangency(z);
            if (p.y.clone() + self.cos_b.clone()).to_f64() >= 0.0 {
                return Ok(SupportPoint { kind: SupportKind::Tangency, location: p });
            }
        }
        let (o1, o2) = (self.o1(), self.o2());
        let s1 = self.vertex_slack(&zf, &o1.to_f64());
        let s2 = self.vertex_slack(&zf, &o2.to_f64());
        let slack_tol = 1e-12 * (1.0 + zf.norm());
        if s1.abs() <= slack_tol && s2.abs() <= slack_tol {
            return Err(LabError::Ambiguous { x: zf.x, y: zf.y });
        }
        if s1 <= s2 {
            Ok(SupportPoint { kind: SupportKind::Vertex1, location: o1 })
        } else {
            Ok(SupportPoint { kind: SupportKind::Vertex2, location: o2 })
        }
    }

    /// One step of the outer billiard map, with the support kind used.
    pub fn step_kind(&self, z: &Point2<R>) -> Result<(SupportKind, Point2<R>)> {
        let sp = self.support_point(z)?;
        Ok((sp.kind, z.reflect_through(&sp.location)))
    }

    pub fn outer_billiard_step(&self, z: &Point2<R>) -> Result<Point2<R>> {
        Ok(self.step_kind(z)?.1)
    }

    /// F² together with the continuity region it was evaluated in.
    pub fn f2(&self, z: &Point2<R>) -> Result<(RegionId, Point2<R>)> {
        let (k1, w) = self.step_kind(z)?;
        let (k2, u) = self.step_kind(&w)?;
        let region = region_of(k1, k2, z.y.to_f64() > 0.0)?;
        Ok((region, u))
    }

    pub fn classify_region(&self, z: &Point2<R>) -> Result<RegionId> {
        Ok(self.f2(z)?.0)
    }

    pub fn composition(&self, region: RegionId) -> Composition {
        match region {
            RegionId::I => Composition::TR1,
            RegionId::II => Composition::R2T,
            RegionId::III => Composition::R1T,
            RegionId::IV => Composition::TR2,
            RegionId::V if self.semidisc => Composition::R2R1,
            RegionId::V | RegionId::VI => Composition::TT,
        }
    }

    /// Apply a composition unconditionally: the analytic continuation of F²
    /// from the region where it is valid.
    pub fn apply(&self, comp: Composition, z: &Point2<R>) -> Point2<R> {
        match comp {
            Composition::TR1 => self.t_map(&self.r1(z)),
            Composition::R2T => self.r2(&self.t_map(z)),
            Composition::R1T => self.r1(&self.t_map(z)),
            Composition::TR2 => self.t_map(&self.r2(z)),
            Composition::TT => self.t_map(&self.t_map(z)),
            Composition::R2R1 => self.r2(&self.r1(z)),
            Composition::R1R2 => self.r1(&self.r2(z)),
        }
    }

    pub fn orbit(&self, z: &Point2<R>, steps: usize) -> Result<Vec<(Point2<R>, SupportKind)>> {
        let mut out = Vec::with_capacity(steps);
        let mut cur = z.clone();
        for _ in 0..steps {
            let (k, next) = self.step_kind(&cur)?;
            out.push((cur, k));
            cur = next;
        }
        out.push((cur, SupportKind::Tangency));
        Ok(out)
    }
}

fn region_of(k1: SupportKind, k2: SupportKind, upper: bool) -> Result<RegionId> {
    use SupportKind::*;
    Ok(match (k1, k2) {
        (Vertex1, Tangency) => RegionId::I,
        (Tangency, Vertex2) => RegionId::II,
        (Tangency, Vertex1) => RegionId::III,
        (Vertex2, Tangency) => RegionId::IV,
        (Vertex1, Vertex2) => RegionId::V,
        (Vertex2, Vertex1) => RegionId::VI,
        (Tangency, Tangency) if upper => RegionId::V,
        (Tangency, Tangency) => RegionId::VI,
        other => return Err(LabError::UnexpectedComposition(format!("{other:?}"))),
    })
}

impl SectorShape<f64> {
    /// Central finite-difference determinant of DF at `z`.
    pub fn jacobian_det(&self, z: &Point2, h: f64) -> Result<f64> {
        let (k0, _) = self.step_kind(z)?;
        let mut cols = [[0.0; 2]; 2];
        for (i, (dx, dy)) in [(h, 0.0), (0.0, h)].into_iter().enumerate() {
            let (kp, fp) = self.step_kind(&Point2::new(z.x + dx, z.y + dy))?;
            let (km, fm) = self.step_kind(&Point2::new(z.x - dx, z.y - dy))?;
            if kp != k0 || km != k0 {
                return Err(LabError::OnSingularity { x: z.x, y: z.y });
            }
            cols[i] = [(fp.x - fm.x) / (2.0 * h), (fp.y - fm.y) / (2.0 * h)];
        }
        Ok(cols[0][0] * cols[1][1] - cols[1][0] * cols[0][1])
    }
}
