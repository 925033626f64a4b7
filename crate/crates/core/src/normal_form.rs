//! Numeric Birkhoff normal form at the elliptic fixed points of the semi-disc
//! return map.
//!
//! Pipeline: Newton on the exact return (MPFR), a cubic least-squares fit of
//! the return in the island chart H₁, complex diagonalisation, and the twist
//! coefficient α₂. The twist is computed twice: from the closed-form
//! expression in the G coefficients and by solving the homological equations
//! explicitly. The rotation profile is a third, purely dynamical estimate.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{LabError, Result};
use crate::geometry::{Point2, SectorShape};
use crate::real::{Mp, Real};
use crate::return_map::{anchor_point, exact_first_return, h1_chart, h1_inverse, MAX_RETURN_STEPS};
use crate::stats::linear_fit;

type C = Complex64;

/// Smallest island index the pipeline accepts.
pub const MIN_N: u32 = 20;
/// Default Taylor stencil spacing (plane units in the H₁ chart).
pub const DEFAULT_STENCIL: f64 = 1e-2;
/// Largest acceptable RMS residual of the cubic fit.
pub const FIT_TOL: f64 = 1e-7;
/// Guard on |λᵏ − 1|, k ≤ 4.
pub const RESONANCE_TOL: f64 = 1e-6;

fn check_n(n: u32) -> Result<()> {
    if n < MIN_N {
        return Err(LabError::Config(format!("island index n = {n} is below {MIN_N}")));
    }
    Ok(())
}

fn mp_point(z: &Point2) -> Point2<Mp> {
    Point2::new(Mp::new(z.x), Mp::new(z.y))
}

/// Exact return in MPFR. Offsets are added at full precision.
fn exact_return_mp(shape: &SectorShape<Mp>, base: &Point2<Mp>, dx: f64, dy: f64) -> Result<Point2<Mp>> {
    let z = Point2::new(base.x.clone() + dx, base.y.clone() + dy);
    let r = exact_first_return(shape, &z, MAX_RETURN_STEPS)?;
    Ok(r.point)
}

#[derive(Clone, Debug, Serialize)]
pub struct FixedPoint {
    pub n: u32,
    pub point: Point2Ser,
    /// |𝓕(z) − z| at the MPFR solution.
    pub residual: f64,
    pub iterations: usize,
    #[serde(skip)]
    pub exact: Point2<Mp>,
}

/// Plain (x, y) pair for reports.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Point2Ser {
    pub x: f64,
    pub y: f64,
}

impl FixedPoint {
    pub fn point(&self) -> Point2 {
        Point2::new(self.point.x, self.point.y)
    }
}

/// Newton on z ↦ 𝓕(z) − z with a central-difference Jacobian, seeded at
/// (3n − 3/4, 1).
pub fn find_fixed_point(n: u32) -> Result<FixedPoint> {
    check_n(n)?;
    let shape = SectorShape::<Mp>::semidisc();
    let mut z = mp_point(&anchor_point(n as f64));
    let h = 1e-12;
    let disp = |z: &Point2<Mp>, dx: f64, dy: f64| -> Result<(Mp, Mp)> {
        let w = exact_return_mp(&shape, z, dx, dy)?;
        Ok((w.x - (z.x.clone() + dx), w.y - (z.y.clone() + dy)))
    };
    for it in 1..=30 {
        let (gx, gy) = disp(&z, 0.0, 0.0)?;
        let res = gx.to_f64().hypot(gy.to_f64());
        if res < 1e-40 {
            return finish_fixed_point(n, z, res, it);
        }
        let cols: Vec<(Mp, Mp)> = [(h, 0.0), (-h, 0.0), (0.0, h), (0.0, -h)]
            .into_par_iter()
            .map(|(dx, dy)| disp(&z, dx, dy))
            .collect::<Result<_>>()?;
        let d = |p: &Mp, m: &Mp| (p.clone() - m.clone()) / (2.0 * h);
        let (j11, j21) = (d(&cols[0].0, &cols[1].0), d(&cols[0].1, &cols[1].1));
        let (j12, j22) = (d(&cols[2].0, &cols[3].0), d(&cols[2].1, &cols[3].1));
        let det = j11.clone() * j22.clone() - j12.clone() * j21.clone();
        let sx = (j22 * gx.clone() - j12 * gy.clone()) / det.clone();
        let sy = (j11 * gy - j21 * gx) / det;
        let step = sx.to_f64().hypot(sy.to_f64());
        z = Point2::new(z.x - sx, z.y - sy);
        if step < 1e-35 {
            let (gx, gy) = disp(&z, 0.0, 0.0)?;
            return finish_fixed_point(n, z, gx.to_f64().hypot(gy.to_f64()), it);
        }
    }
    Err(LabError::NoConvergence(30))
}

fn finish_fixed_point(n: u32, z: Point2<Mp>, residual: f64, iterations: usize) -> Result<FixedPoint> {
    if residual > 1e-11 {
        return Err(LabError::NoConvergence(iterations));
    }
    let p = z.to_f64();
    Ok(FixedPoint { n, point: Point2Ser { x: p.x, y: p.y }, residual, iterations, exact: z })
}

/// Cubic model of the return in the H₁ chart centred at the fixed point:
/// u′ = A u + F₂(u) + F₃(u) per component.
#[derive(Clone, Debug, Serialize)]
pub struct CubicReturnModel {
    pub n: u32,
    pub fixed_point: Point2Ser,
    pub a: [[f64; 2]; 2],
    /// Per component: coefficients of x², xy, y².
    pub f2: [[f64; 3]; 2],
    /// Per component: coefficients of x³, x²y, xy², y³.
    pub f3: [[f64; 4]; 2],
    /// RMS residual of the least-squares fit.
    pub fit_residual: f64,
}

impl CubicReturnModel {
    pub fn det(&self) -> f64 {
        self.a[0][0] * self.a[1][1] - self.a[0][1] * self.a[1][0]
    }

    pub fn half_trace(&self) -> f64 {
        0.5 * (self.a[0][0] + self.a[1][1])
    }

    pub fn eval(&self, x: f64, y: f64) -> (f64, f64) {
        let m2 = [x * x, x * y, y * y];
        let m3 = [x * x * x, x * x * y, x * y * y, y * y * y];
        let comp = |i: usize| {
            self.a[i][0] * x
                + self.a[i][1] * y
                + (0..3).map(|k| self.f2[i][k] * m2[k]).sum::<f64>()
                + (0..4).map(|k| self.f3[i][k] * m3[k]).sum::<f64>()
        };
        (comp(0), comp(1))
    }
}

/// Exponents (i, j) of x^i y^j used by the fit: constant, linear, quadratic, cubic.
const MONOMIALS: [(i32, i32); 10] =
    [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2), (3, 0), (2, 1), (1, 2), (0, 3)];

/// Degree-3 least-squares fit of `samples` ((x, y) ↦ (x′, y′)) taken on a
/// 7 × 7 grid of spacing `h`. Returns the coefficient vectors for x′ and y′
/// (in `MONOMIALS` order) and the RMS residual.
pub fn cubic_least_squares(h: f64, samples: &[((f64, f64), (f64, f64))]) -> Result<([f64; 10], [f64; 10], f64)> {
    let rows = samples.len();
    // scaled monomials keep the normal matrix well conditioned
    let design = DMatrix::from_fn(rows, MONOMIALS.len(), |r, c| {
        let ((x, y), _) = samples[r];
        let (i, j) = MONOMIALS[c];
        (x / h).powi(i) * (y / h).powi(j)
    });
    let svd = design.clone().svd(true, true);
    let mut out = [[0.0; 10]; 2];
    let mut sq = 0.0;
    for comp in 0..2 {
        let rhs = DVector::from_fn(rows, |r, _| if comp == 0 { samples[r].1 .0 } else { samples[r].1 .1 });
        let sol = svd.solve(&rhs, 1e-14).map_err(|_| LabError::ConditioningFailure(f64::INFINITY))?;
        sq += (&design * &sol - &rhs).norm_squared();
        for (c, &(i, j)) in MONOMIALS.iter().enumerate() {
            out[comp][c] = sol[c] / h.powi(i + j);
        }
    }
    Ok((out[0], out[1], (sq / (2 * rows) as f64).sqrt()))
}

fn model_from_coeffs(n: u32, fp: &Point2, cx: &[f64; 10], cy: &[f64; 10], fit_residual: f64) -> CubicReturnModel {
    CubicReturnModel {
        n,
        fixed_point: Point2Ser { x: fp.x, y: fp.y },
        a: [[cx[1], cx[2]], [cy[1], cy[2]]],
        f2: [[cx[3], cx[4], cx[5]], [cy[3], cy[4], cy[5]]],
        f3: [[cx[6], cx[7], cx[8], cx[9]], [cy[6], cy[7], cy[8], cy[9]]],
        fit_residual,
    }
}

fn stencil(h: f64) -> Vec<(f64, f64)> {
    (-3..=3).flat_map(|i| (-3..=3).map(move |j| (i as f64 * h, j as f64 * h))).collect()
}

/// Fit the exact return around the fixed point in the H₁ chart
/// (x₁ = x + y − 3n − 1/4, y₁ = y/2 − 1/2), shifted to the fixed point.
pub fn taylor_fit(fp: &FixedPoint, h: f64) -> Result<CubicReturnModel> {
    let shape = SectorShape::<Mp>::semidisc();
    let base = &fp.exact;
    let samples: Vec<((f64, f64), (f64, f64))> = stencil(h)
        .into_par_iter()
        .map(|(u, w)| {
            // H₁ offset (u, w) is the plane offset (u − 2w, 2w)
            let (dx, dy) = (u - 2.0 * w, 2.0 * w);
            let r = exact_return_mp(&shape, base, dx, dy)?;
            let ex = (r.x - base.x.clone()).to_f64();
            let ey = (r.y - base.y.clone()).to_f64();
            Ok(((u, w), (ex + ey, 0.5 * ey)))
        })
        .collect::<Result<_>>()?;
    let (cx, cy, res) = cubic_least_squares(h, &samples)?;
    if res > FIT_TOL {
        return Err(LabError::ConditioningFailure(res));
    }
    Ok(model_from_coeffs(fp.n, &fp.point(), &cx, &cy, res))
}

/// Fit any planar map given in H₁-like coordinates around the origin.
pub fn taylor_fit_map(n: u32, h: f64, map: impl Fn(f64, f64) -> (f64, f64) + Sync) -> Result<CubicReturnModel> {
    let samples: Vec<_> = stencil(h).into_par_iter().map(|(u, w)| ((u, w), map(u, w))).collect();
    let (cx, cy, res) = cubic_least_squares(h, &samples)?;
    if res > FIT_TOL {
        return Err(LabError::ConditioningFailure(res));
    }
    Ok(model_from_coeffs(n, &Point2::new(0.0, 0.0), &cx, &cy, res))
}

// ------------------------------------------------------------ polynomials

/// Complex polynomial in (a, b) truncated at total degree 3; `c[i][j]` is the
/// coefficient of aⁱbʲ.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Poly3 {
    pub c: [[C; 4]; 4],
}

impl Poly3 {
    pub fn linear(ca: C, cb: C) -> Self {
        let mut p = Poly3::default();
        p.c[1][0] = ca;
        p.c[0][1] = cb;
        p
    }

    pub fn add(&self, o: &Self) -> Self {
        let mut p = *self;
        for i in 0..4 {
            for j in 0..4 - i {
                p.c[i][j] += o.c[i][j];
            }
        }
        p
    }

    pub fn scale(&self, s: C) -> Self {
        let mut p = *self;
        for row in p.c.iter_mut() {
            for v in row.iter_mut() {
                *v *= s;
            }
        }
        p
    }

    pub fn mul(&self, o: &Self) -> Self {
        let mut p = Poly3::default();
        for i in 0..4 {
            for j in 0..4 - i {
                if self.c[i][j] == C::default() {
                    continue;
                }
                for k in 0..4 - i - j {
                    for l in 0..4 - i - j - k {
                        p.c[i + k][j + l] += self.c[i][j] * o.c[k][l];
                    }
                }
            }
        }
        p
    }

    pub fn pow(&self, k: u32) -> Self {
        let mut p = Poly3::default();
        p.c[0][0] = C::new(1.0, 0.0);
        for _ in 0..k {
            p = p.mul(self);
        }
        p
    }

    /// Homogeneous part of degree `d`.
    pub fn degree(&self, d: usize) -> Self {
        let mut p = Poly3::default();
        for i in 0..=d {
            p.c[i][d - i] = self.c[i][d - i];
        }
        p
    }

    /// The polynomial b̄-conjugate: coefficient of aⁱbʲ becomes conj(c[j][i]).
    pub fn bar(&self) -> Self {
        let mut p = Poly3::default();
        for i in 0..4 {
            for j in 0..4 - i {
                p.c[i][j] = self.c[j][i].conj();
            }
        }
        p
    }

    pub fn d_a(&self) -> Self {
        let mut p = Poly3::default();
        for i in 1..4 {
            for j in 0..4 - i {
                p.c[i - 1][j] = self.c[i][j] * i as f64;
            }
        }
        p
    }

    pub fn d_b(&self) -> Self {
        let mut p = Poly3::default();
        for i in 0..4 {
            for j in 1..4 - i {
                p.c[i][j - 1] = self.c[i][j] * j as f64;
            }
        }
        p
    }

    pub fn eval(&self, a: C, b: C) -> C {
        let mut s = C::default();
        for i in 0..4 {
            for j in 0..4 - i {
                s += self.c[i][j] * a.powi(i as i32) * b.powi(j as i32);
            }
        }
        s
    }
}

// ---------------------------------------------------------- diagonalised

/// a′ = λa + Σ G₁,ⱼᵏ aᵏ b^{j−k}, with (x₁, y₁) = v a + v̄ b, b = ā and
/// v = (p, 1).
#[derive(Clone, Debug, Serialize)]
pub struct DiagonalizedModel {
    pub n: u32,
    #[serde(serialize_with = "ser_c")]
    pub lambda: C,
    /// First eigenvector component (second is 1).
    #[serde(serialize_with = "ser_c")]
    pub p: C,
    /// G₁,₂ᵏ, k = 0..2.
    #[serde(serialize_with = "ser_cv")]
    pub g2: Vec<C>,
    /// G₁,₃ᵏ, k = 0..3.
    #[serde(serialize_with = "ser_cv")]
    pub g3: Vec<C>,
}

fn ser_c<S: serde::Serializer>(c: &C, s: S) -> std::result::Result<S::Ok, S::Error> {
    [c.re, c.im].serialize(s)
}

fn ser_cv<S: serde::Serializer>(v: &[C], s: S) -> std::result::Result<S::Ok, S::Error> {
    v.iter().map(|c| [c.re, c.im]).collect::<Vec<_>>().serialize(s)
}

impl DiagonalizedModel {
    pub fn cos_alpha(&self) -> f64 {
        self.lambda.re / self.lambda.norm()
    }

    /// Nonlinear part G as a polynomial in (a, b).
    pub fn g_poly(&self) -> Poly3 {
        let mut p = Poly3::default();
        for k in 0..3 {
            p.c[k][2 - k] = self.g2[k];
        }
        for k in 0..4 {
            p.c[k][3 - k] = self.g3[k];
        }
        p
    }

    /// H₁ offset → complex coordinate a.
    pub fn to_a(&self, x1: f64, y1: f64) -> C {
        (C::new(x1, 0.0) - self.p.conj() * y1) / (self.p - self.p.conj())
    }

    /// complex coordinate a → H₁ offset.
    pub fn from_a(&self, a: C) -> (f64, f64) {
        (2.0 * (self.p * a).re, 2.0 * a.re)
    }
}

/// Eigen-decomposition of A, taking the eigenvalue with Im λ < 0 (the one
/// paired with v → (2 − √2 i, 1)), and the G coefficients.
pub fn diagonalize(m: &CubicReturnModel) -> Result<DiagonalizedModel> {
    let ht = m.half_trace();
    let det = m.det();
    let disc = det - ht * ht;
    if disc <= 0.0 {
        return Err(LabError::NotElliptic(ht / det.sqrt()));
    }
    let lambda = C::new(ht, -disc.sqrt());
    let p = (lambda - m.a[1][1]) / m.a[1][0];
    let x = Poly3::linear(p, p.conj());
    let y = Poly3::linear(C::new(1.0, 0.0), C::new(1.0, 0.0));
    let mut px = Poly3::default();
    let mut py = Poly3::default();
    let quad = [(2, 0), (1, 1), (0, 2)];
    let cub = [(3, 0), (2, 1), (1, 2), (0, 3)];
    for (k, &(i, j)) in quad.iter().enumerate() {
        let mono = x.pow(i).mul(&y.pow(j));
        px = px.add(&mono.scale(C::new(m.f2[0][k], 0.0)));
        py = py.add(&mono.scale(C::new(m.f2[1][k], 0.0)));
    }
    for (k, &(i, j)) in cub.iter().enumerate() {
        let mono = x.pow(i).mul(&y.pow(j));
        px = px.add(&mono.scale(C::new(m.f3[0][k], 0.0)));
        py = py.add(&mono.scale(C::new(m.f3[1][k], 0.0)));
    }
    let g = px.add(&py.scale(-p.conj())).scale(C::new(1.0, 0.0) / (p - p.conj()));
    Ok(DiagonalizedModel {
        n: m.n,
        lambda,
        p,
        g2: (0..3).map(|k| g.c[k][2 - k]).collect(),
        g3: (0..4).map(|k| g.c[k][3 - k]).collect(),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct BirkhoffResult {
    pub n: u32,
    /// arg λ (negative with the Im λ < 0 branch).
    pub alpha: f64,
    pub cos_alpha: f64,
    #[serde(serialize_with = "ser_c")]
    pub alpha2: C,
}

fn resonance_guard(lambda: C) -> Result<()> {
    for k in 1..=4u32 {
        let gap = (lambda.powi(k as i32) - 1.0).norm();
        if gap < RESONANCE_TOL {
            return Err(LabError::Resonance { k, gap });
        }
    }
    Ok(())
}

/// α₂ from the closed-form expression in λ and the G coefficients.
pub fn birkhoff_twist(d: &DiagonalizedModel) -> Result<BirkhoffResult> {
    let l = d.lambda;
    resonance_guard(l)?;
    let (g20, g21, g22) = (d.g2[0], d.g2[1], d.g2[2]);
    let g32 = d.g3[2];
    let one = C::new(1.0, 0.0);
    let s = g22 * g21 / (l * l * (l - one))
        + g21.norm_sqr() / (l - one)
        + 2.0 * g21 * g22 / (l * (one - l))
        + 2.0 * g20.norm_sqr() / (l.powi(3) - one)
        + g32 / l;
    Ok(BirkhoffResult { n: d.n, alpha: l.arg(), cos_alpha: d.cos_alpha(), alpha2: -C::i() * s })
}

/// Degree-3 Birkhoff normal form a = ζ + h₂(ζ, ζ̄) + h₃(ζ, ζ̄) with
/// ζ′ = λζ + c ζ²ζ̄.
#[derive(Clone, Debug)]
pub struct NormalForm {
    pub lambda: C,
    pub h: Poly3,
    pub c: C,
}

impl NormalForm {
    pub fn alpha2(&self) -> C {
        -C::i() * self.c / self.lambda
    }

    pub fn conj(&self, zeta: C) -> C {
        zeta + self.h.eval(zeta, zeta.conj())
    }

    /// Inverse of `conj` by fixed-point iteration.
    pub fn conj_inverse(&self, a: C) -> C {
        let mut z = a;
        for _ in 0..60 {
            let next = a - self.h.eval(z, z.conj());
            if (next - z).norm() < 1e-17 * (1.0 + a.norm()) {
                return next;
            }
            z = next;
        }
        z
    }

    pub fn normal_map(&self, zeta: C) -> C {
        self.lambda * zeta + self.c * zeta * zeta * zeta.conj()
    }
}

/// Solve the homological equations degree by degree. The resonant ζ²ζ̄ term
/// is kept; every other monomial of degree 2 and 3 is removed.
pub fn homological_solve(d: &DiagonalizedModel) -> Result<NormalForm> {
    let l = d.lambda;
    resonance_guard(l)?;
    let lb = l.conj();
    let g = d.g_poly();
    let g2 = g.degree(2);
    let divisor = |i: usize, j: usize| l.powi(i as i32) * lb.powi(j as i32) - l;
    let mut h2 = Poly3::default();
    for i in 0..=2 {
        h2.c[i][2 - i] = g2.c[i][2 - i] / divisor(i, 2 - i);
    }
    // cubic terms produced by the quadratic step
    let t3 = g.degree(3).add(&g2.d_a().mul(&h2).add(&g2.d_b().mul(&h2.bar())).degree(3));
    let mut h3 = Poly3::default();
    for i in 0..=3 {
        if i == 2 {
            continue;
        }
        h3.c[i][3 - i] = t3.c[i][3 - i] / divisor(i, 3 - i);
    }
    Ok(NormalForm { lambda: l, h: h2.add(&h3), c: t3.c[2][1] })
}

/// Full pipeline output for one island.
#[derive(Clone, Debug, Serialize)]
pub struct TwistReport {
    pub n: u32,
    pub fixed_point: Point2Ser,
    pub residual: f64,
    pub a: [[f64; 2]; 2],
    pub det_a: f64,
    pub cos_alpha: f64,
    pub alpha2_re: f64,
    pub alpha2_im: f64,
    pub alpha2_times_n2: f64,
    /// Re α₂·n² from the explicit homological solve.
    pub alpha2_homological_times_n2: f64,
}

pub fn twist_pipeline(n: u32, h: f64) -> Result<(FixedPoint, CubicReturnModel, DiagonalizedModel, BirkhoffResult, TwistReport)> {
    let fp = find_fixed_point(n)?;
    let model = taylor_fit(&fp, h)?;
    let diag = diagonalize(&model)?;
    let tw = birkhoff_twist(&diag)?;
    let nf = homological_solve(&diag)?;
    let n2 = (n as f64).powi(2);
    let report = TwistReport {
        n,
        fixed_point: fp.point,
        residual: fp.residual,
        a: model.a,
        det_a: model.det(),
        cos_alpha: tw.cos_alpha,
        alpha2_re: tw.alpha2.re,
        alpha2_im: tw.alpha2.im,
        alpha2_times_n2: tw.alpha2.re * n2,
        alpha2_homological_times_n2: nf.alpha2().re * n2,
    };
    Ok((fp, model, diag, tw, report))
}

/// Max over a circle |ζ| = s of |Φ⁻¹∘𝓕∘Φ(ζ) − (λζ + cζ²ζ̄)|, using the exact
/// return. Measures what the degree-3 normal form leaves behind.
pub fn normal_form_residual(fp: &FixedPoint, d: &DiagonalizedModel, nf: &NormalForm, s: f64, samples: usize) -> Result<f64> {
    let shape = SectorShape::<Mp>::semidisc();
    let base = &fp.exact;
    let res: Vec<f64> = (0..samples)
        .into_par_iter()
        .map(|k| {
            let zeta = C::from_polar(s, std::f64::consts::TAU * (k as f64 + 0.25) / samples as f64);
            let (u, w) = d.from_a(nf.conj(zeta));
            let r = exact_return_mp(&shape, base, u - 2.0 * w, 2.0 * w)?;
            let ex = (r.x - base.x.clone()).to_f64();
            let ey = (r.y - base.y.clone()).to_f64();
            let back = nf.conj_inverse(d.to_a(ex + ey, 0.5 * ey));
            Ok((back - nf.normal_map(zeta)).norm())
        })
        .collect::<Result<_>>()?;
    Ok(res.into_iter().fold(0.0, f64::max))
}

// ------------------------------------------------------------ dynamics

/// Exact return of an H₁ offset from the fixed point, in double precision.
fn return_offset(shape: &SectorShape<f64>, fp: &Point2, u: f64, w: f64) -> Result<(f64, f64)> {
    let z = Point2::new(fp.x + u - 2.0 * w, fp.y + 2.0 * w);
    let r = exact_first_return(shape, &z, MAX_RETURN_STEPS)?.point;
    let (ex, ey) = (r.x - fp.x, r.y - fp.y);
    Ok((ex + ey, 0.5 * ey))
}

#[derive(Clone, Debug, Serialize)]
pub struct RotationProfile {
    /// (mean |a|², rotation per return)
    pub rows: Vec<(f64, f64)>,
    /// Slope of rotation against |a|²: the twist estimate.
    pub slope: f64,
    /// Rotation at |a| = 0; equals arg λ.
    pub intercept: f64,
}

/// Smooth bump weight on (0, 1); weighted orbit averages with it converge
/// much faster than plain ones on quasi-periodic orbits.
fn bump(t: f64) -> f64 {
    (-1.0 / (t * (1.0 - t))).exp()
}

/// Rotation number of the exact return on orbits started at a = s (real),
/// for each radius s: the unwrapped angle increment arg(a′/a) averaged over
/// `returns` iterates with bump weights. |a|² is averaged the same way.
pub fn rotation_profile(fp: &FixedPoint, d: &DiagonalizedModel, radii: &[f64], returns: usize) -> Result<RotationProfile> {
    if radii.len() < 2 {
        return Err(LabError::InsufficientRange { need: 2, got: radii.len() });
    }
    let shape = SectorShape::<f64>::semidisc();
    let base = fp.point();
    let weights: Vec<f64> = (0..returns).map(|k| bump((k as f64 + 0.5) / returns as f64)).collect();
    let total: f64 = weights.iter().sum();
    let rows: Vec<(f64, f64)> = radii
        .par_iter()
        .map(|&s| {
            let mut a = C::new(s, 0.0);
            let (mut turn, mut r2) = (0.0, 0.0);
            for (k, w) in weights.iter().enumerate() {
                let (u, v) = d.from_a(a);
                let (u2, v2) = return_offset(&shape, &base, u, v).map_err(|_| LabError::OrbitEscaped(k))?;
                let next = d.to_a(u2, v2);
                if next.norm() > 10.0 * s {
                    return Err(LabError::OrbitEscaped(k));
                }
                turn += w * (next / a).arg();
                r2 += w * a.norm_sqr();
                a = next;
            }
            Ok((r2 / total, turn / total))
        })
        .collect::<Result<_>>()?;
    let (slope, intercept) = linear_fit(&rows.iter().map(|r| r.0).collect::<Vec<_>>(), &rows.iter().map(|r| r.1).collect::<Vec<_>>());
    Ok(RotationProfile { rows, slope, intercept })
}

/// Parallelogram R around the island centre: {u e₁ + w e₂ : |u|, |w| ≤ 1}
/// with e₁ = (3/512, 0), e₂ = (−3/512, 3/512) in the plane.
pub const R_E1: (f64, f64) = (3.0 / 512.0, 0.0);
pub const R_E2: (f64, f64) = (-3.0 / 512.0, 3.0 / 512.0);

/// diam(R): the long diagonal.
pub fn r_diameter() -> f64 {
    let (dx, dy) = (2.0 * (R_E1.0 - R_E2.0), 2.0 * (R_E1.1 - R_E2.1));
    dx.hypot(dy)
}

#[derive(Clone, Debug, Serialize)]
pub struct IslandScan {
    pub n: u32,
    pub grid: usize,
    pub scale: f64,
    pub horizon: usize,
    pub bounded: usize,
    pub total: usize,
    pub fraction: f64,
}

/// Fraction of a `grid × grid` lattice on `scale·R` (centred at the fixed
/// point) whose orbits stay within 2·diam(R) for `horizon` returns.
pub fn island_scan(fp: &FixedPoint, grid: usize, scale: f64, horizon: usize) -> IslandScan {
    let base = fp.point();
    let shape = SectorShape::<f64>::semidisc();
    let lim = 2.0 * r_diameter();
    let pts: Vec<(f64, f64)> = (0..grid)
        .flat_map(|i| (0..grid).map(move |j| (i, j)))
        .map(|(i, j)| {
            let t = |k: usize| if grid == 1 { 0.0 } else { scale * (2.0 * k as f64 / (grid - 1) as f64 - 1.0) };
            let (u, w) = (t(i), t(j));
            (u * R_E1.0 + w * R_E2.0, u * R_E1.1 + w * R_E2.1)
        })
        .collect();
    let bounded = pts.par_iter().filter(|&&(dx, dy)| stays_bounded(&shape, &base, dx, dy, lim, horizon).is_ok()).count();
    IslandScan {
        n: fp.n,
        grid,
        scale,
        horizon,
        bounded,
        total: pts.len(),
        fraction: bounded as f64 / pts.len() as f64,
    }
}

/// Ok(()) if the orbit of base + (dx, dy) stays within `lim` of `base` for
/// `horizon` returns; otherwise the return count at which it left.
pub fn stays_bounded(shape: &SectorShape<f64>, base: &Point2, dx: f64, dy: f64, lim: f64, horizon: usize) -> Result<()> {
    let mut z = Point2::new(base.x + dx, base.y + dy);
    for k in 0..horizon {
        z = exact_first_return(shape, &z, MAX_RETURN_STEPS).map_err(|_| LabError::OrbitEscaped(k))?.point;
        if z.dist(base) > lim {
            return Err(LabError::OrbitEscaped(k + 1));
        }
    }
    Ok(())
}

/// H₁ coordinates of the fixed point, for reports.
pub fn fixed_point_h1(fp: &FixedPoint) -> (f64, f64) {
    h1_chart(fp.n as f64, &fp.point())
}

/// Plane point of an H₁ position (inverse of the chart), re-exported for drivers.
pub fn h1_point(n: u32, x1: f64, y1: f64) -> Point2 {
    h1_inverse(n as f64, x1, y1)
}
