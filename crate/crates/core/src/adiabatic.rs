//! Adiabatic coordinates (ρ, ψ) on regions I–IV.
//!
//! `ρ = rΦ₁(θ) + Φ₂(θ) + Φ₃(θ)/r + Φ₄(θ)/r²`, `ψ = Ψ(θ) + Ψ₁(θ)/r + Ψ₂(θ)/r² + Ψ₃(θ)/r³`,
//! chosen so that F² acts as `ρ' = ρ + O(r⁻⁴)`, `ψ' = ψ + 1/ρ + O(r⁻⁵)`.
//!
//! The heads are closed forms. The semi-disc comes in two flavours: the
//! published Φ₃, Ψ₂ (these reproduce the tabulated values and solve the ODEs
//! built with the published b₂) and the corrected ones that go with the
//! corrected b₂ and actually kill the drift. Φ₄, Ψ₃ have no closed form; they
//! are integrated numerically with source terms measured from the exact map.

use ode_solvers::dop_shared::OutputType;
use ode_solvers::{Dopri5, System, Vector1};
use rayon::prelude::*;
use serde::Serialize;

use crate::asymptotic::{band_samples, region_band, sector_coefficients, semidisc_coefficients, CoeffSet, F2Coefficients};
use crate::error::{LabError, Result};
use crate::geometry::{Half, PolarPoint, RegionId, SectorShape};
use crate::real::{derivatives, Jet, Mp, Real};
use crate::stats::loglog_slope;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum ChartFamily {
    Semidisc(CoeffSet),
    Sector(f64),
}

impl ChartFamily {
    pub fn beta(&self) -> f64 {
        match self {
            ChartFamily::Semidisc(_) => std::f64::consts::FRAC_PI_2,
            ChartFamily::Sector(b) => *b,
        }
    }
}

/// Which closed-form head to evaluate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Head {
    Phi1,
    Phi2,
    Phi3,
    Psi,
    Psi1,
    Psi2,
}

/// Tabulated Φ₄ and Ψ₃ with their derivatives, cubic Hermite in between.
#[derive(Clone, Debug, Serialize)]
pub struct OdeTail {
    pub theta: Vec<f64>,
    pub phi4: Vec<f64>,
    pub dphi4: Vec<f64>,
    pub psi3: Vec<f64>,
    pub dpsi3: Vec<f64>,
    /// Φ₄(π/2)
    pub e: f64,
    /// Ψ₃(π/2)
    pub f: f64,
    /// Largest ODE residual seen at cell midpoints.
    pub residual: f64,
}

impl OdeTail {
    fn hermite(&self, y: &[f64], dy: &[f64], t: f64) -> Option<f64> {
        let xs = &self.theta;
        // short extrapolation off the end cells, for F²-images of points near the edge
        if t < xs[0] - 0.01 || t > xs[xs.len() - 1] + 0.01 {
            return None;
        }
        let i = xs.partition_point(|&x| x <= t).clamp(1, xs.len() - 1) - 1;
        let h = xs[i + 1] - xs[i];
        let s = (t - xs[i]) / h;
        let (s2, s3) = (s * s, s * s * s);
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        Some(h00 * y[i] + h10 * h * dy[i] + h01 * y[i + 1] + h11 * h * dy[i + 1])
    }

    pub fn phi4(&self, t: f64) -> Option<f64> {
        self.hermite(&self.phi4, &self.dphi4, t)
    }

    pub fn psi3(&self, t: f64) -> Option<f64> {
        self.hermite(&self.psi3, &self.dpsi3, t)
    }
}

#[derive(Clone, Debug)]
pub struct TailOptions {
    /// Smallest radius of the Richardson ladder r₀·2ᵏ.
    pub r0: f64,
    pub levels: usize,
    /// Dense-output spacing of the tabulation.
    pub dx: f64,
    pub tol: f64,
}

impl Default for TailOptions {
    fn default() -> Self {
        TailOptions { r0: 1000.0, levels: 7, dx: 1e-3, tol: 1e-12 }
    }
}

#[derive(Clone, Debug)]
pub struct AdiabaticChart {
    pub family: ChartFamily,
    pub region: RegionId,
    pub tail: Option<OdeTail>,
}

impl AdiabaticChart {
    pub fn semidisc(region: RegionId, set: CoeffSet) -> Result<Self> {
        Self::checked(ChartFamily::Semidisc(set), region)
    }

    pub fn sector(beta: f64, region: RegionId) -> Result<Self> {
        if !(beta > 0.0 && beta <= std::f64::consts::FRAC_PI_2) {
            return Err(LabError::Config(format!("beta {beta} outside (0, pi/2]")));
        }
        Self::checked(ChartFamily::Sector(beta), region)
    }

    fn checked(family: ChartFamily, region: RegionId) -> Result<Self> {
        if matches!(region, RegionId::V | RegionId::VI) {
            return Err(LabError::WrongRegion { region: region.to_string(), theta: f64::NAN });
        }
        Ok(AdiabaticChart { family, region, tail: None })
    }

    pub fn beta(&self) -> f64 {
        self.family.beta()
    }

    pub fn half(&self) -> Half {
        self.region.half()
    }

    /// Angle where all heads except Φ₁ vanish and Φ₁ = 1.
    pub fn initial_angle(&self) -> f64 {
        let b = self.beta();
        match self.family {
            ChartFamily::Semidisc(_) => match self.region {
                RegionId::I | RegionId::III => 0.0,
                _ => std::f64::consts::PI,
            },
            ChartFamily::Sector(_) => match self.region {
                RegionId::I | RegionId::III => b,
                _ => std::f64::consts::PI - b,
            },
        }
    }

    /// θ-interval on which the chart is evaluated: the region band plus a
    /// little slack on both ends.
    pub fn domain(&self) -> (f64, f64) {
        let b = self.beta();
        let pi = std::f64::consts::PI;
        match self.region {
            RegionId::I | RegionId::III => (-0.05, b + 0.05),
            _ => (pi - b - 0.05, pi + 0.05),
        }
    }

    fn coefficients<R: Real>(&self, t: &R) -> Result<F2Coefficients<R>> {
        match self.family {
            ChartFamily::Semidisc(set) => semidisc_coefficients(self.region, t, set),
            ChartFamily::Sector(b) => Ok(sector_coefficients(&R::from_f64(b), self.region, t)),
        }
    }

    /// Closed-form head at `t`; `None` where the family has none (Φ₃, Ψ₂
    /// for sectors).
    pub fn head<R: Real>(&self, which: Head, t: &R) -> Option<R> {
        match self.family {
            ChartFamily::Semidisc(set) => Some(semidisc_head(self.region, set, which, t)),
            ChartFamily::Sector(b) => sector_head(&R::from_f64(b), self.region, which, t),
        }
    }

    /// Value and first three θ-derivatives of a head.
    pub fn head_jet(&self, which: Head, t: f64) -> Option<[f64; 4]> {
        self.head::<f64>(which, &t)?;
        Some(derivatives(|x: Jet| self.head(which, &x).unwrap(), t))
    }

    fn terms_available(&self) -> u32 {
        match (self.family, &self.tail) {
            (ChartFamily::Sector(_), _) => 2,
            (_, None) => 3,
            (_, Some(_)) => 4,
        }
    }

    /// ρ and ψ from the first `order` terms of each series (capped at what
    /// the chart provides), without any band check.
    pub fn to_adiabatic_unchecked<R: Real>(&self, r: &R, t: &R, order: u32) -> (R, R) {
        let k = order.min(self.terms_available());
        let inv = R::one() / r.clone();
        let h = |w| self.head(w, t).unwrap_or_else(R::zero);
        let mut rho = r.clone() * h(Head::Phi1);
        let mut psi = h(Head::Psi);
        if k >= 2 {
            rho = rho + h(Head::Phi2);
            psi = psi + h(Head::Psi1) * inv.clone();
        }
        if k >= 3 {
            rho = rho + h(Head::Phi3) * inv.clone();
            psi = psi + h(Head::Psi2) * inv.sq();
        }
        if k >= 4 {
            let tail = self.tail.as_ref().expect("order 4 requires a tail");
            let tf = t.to_f64();
            rho = rho + R::from_f64(tail.phi4(tf).unwrap_or(f64::NAN)) * inv.sq();
            psi = psi + R::from_f64(tail.psi3(tf).unwrap_or(f64::NAN)) * inv.powi(3);
        }
        (rho, psi)
    }

    /// (ρ, ψ) of a point, which must sit inside the region band.
    pub fn to_adiabatic<R: Real>(&self, p: &PolarPoint<R>, order: u32) -> Result<(R, R)> {
        let (r, t) = (p.r.to_f64(), p.theta.to_f64());
        let (lo, hi) = region_band(self.beta(), self.region, r);
        if p.half != self.half() || t < lo || t > hi {
            return Err(LabError::WrongRegion { region: self.region.to_string(), theta: t });
        }
        Ok(self.to_adiabatic_unchecked(&p.r, &p.theta, order))
    }

    /// Newton inversion of [`Self::to_adiabatic_unchecked`], seeded by solving
    /// Ψ(θ) = ψ and ρ = rΦ₁ + Φ₂.
    pub fn from_adiabatic<R: Real>(&self, rho: &R, psi: &R, order: u32) -> Result<PolarPoint<R>> {
        let (lo, hi) = self.domain();
        let target = psi.to_f64();
        let psi0 = |t: f64| self.head::<f64>(Head::Psi, &t).unwrap();
        let (mut a, mut b) = (lo, hi);
        if !(psi0(a) <= target && target <= psi0(b)) {
            return Err(LabError::WrongRegion { region: self.region.to_string(), theta: f64::NAN });
        }
        for _ in 0..100 {
            let m = 0.5 * (a + b);
            if psi0(m) < target {
                a = m;
            } else {
                b = m;
            }
        }
        let t0 = 0.5 * (a + b);
        let mut t = R::from_f64(t0);
        let mut r = (rho.clone() - self.head(Head::Phi2, &t).unwrap()) / self.head(Head::Phi1, &t).unwrap();
        let scale = rho.to_f64().abs().max(1.0);
        let mut settled = 0;
        for _ in 0..50 {
            let (fr, fp) = self.to_adiabatic_unchecked(&r, &t, order);
            let (er, ep) = (fr - rho.clone(), fp - psi.clone());
            let res = er.to_f64().abs() + ep.to_f64().abs() * scale;
            if res < 1e-13 * scale {
                settled += 1;
                // extra steps so multiprecision callers get past f64 accuracy
                if settled >= 3 {
                    return Ok(PolarPoint::new(r, t, self.half()));
                }
            }
            let (rf, tf) = (r.to_f64(), t.to_f64());
            let jr = self.to_adiabatic_unchecked(&Jet::from_re(rf).derivative(), &Jet::from_re(tf), order);
            let jt = self.to_adiabatic_unchecked(&Jet::from_re(rf), &Jet::from_re(tf).derivative(), order);
            let (m11, m12, m21, m22) = (jr.0.v1, jt.0.v1, jr.1.v1, jt.1.v1);
            let det = m11 * m22 - m12 * m21;
            let dr = (m22 * er.to_f64() - m12 * ep.to_f64()) / det;
            let dt = (m11 * ep.to_f64() - m21 * er.to_f64()) / det;
            // Newton update carried in R so the residual keeps shrinking below f64 round-off
            r = r - dr;
            t = t - dt;
            if !r.to_f64().is_finite() {
                break;
            }
        }
        Err(LabError::NoConvergence(50))
    }

    /// Attach Φ₄/Ψ₃ tails (corrected semi-disc charts only).
    pub fn with_tail(&self, opts: &TailOptions) -> Result<Self> {
        if self.family != ChartFamily::Semidisc(CoeffSet::Corrected) {
            return Err(LabError::Config("tails need the corrected semi-disc chart".into()));
        }
        let base = AdiabaticChart { tail: None, ..self.clone() };
        let c3 = |t: f64| base.drift_coefficient(t, opts, DriftKind::Rho);
        let (theta, phi4, dphi4) = base.tabulate(opts, |t, y| {
            let k = base.coefficients(&t).unwrap();
            (2.0 * k.a * y - c3(t)) / k.b
        })?;
        let e = interp_once(&theta, &phi4, &dphi4, std::f64::consts::FRAC_PI_2);
        let zeros = vec![0.0; theta.len()];
        let stage = AdiabaticChart {
            tail: Some(OdeTail {
                theta,
                phi4,
                dphi4,
                psi3: zeros.clone(),
                dpsi3: zeros,
                e,
                f: 0.0,
                residual: 0.0,
            }),
            ..base.clone()
        };
        // Ψ₃ source is measured with Φ₄ in place and Ψ₃ still zero
        let d4 = |t: f64| stage.drift_coefficient(t, opts, DriftKind::Psi);
        let (theta2, psi3, dpsi3) = stage.tabulate(opts, |t, y| {
            let k = stage.coefficients(&t).unwrap();
            (3.0 * k.a * y - d4(t)) / k.b
        })?;
        let mut tail = stage.tail.clone().unwrap();
        if theta2 != tail.theta {
            return Err(LabError::Integration("tail grids differ between passes".into()));
        }
        tail.f = interp_once(&theta2, &psi3, &dpsi3, std::f64::consts::FRAC_PI_2);
        tail.psi3 = psi3;
        tail.dpsi3 = dpsi3;

        // residual of both ODEs at every fourth cell midpoint
        let worst = (0..tail.theta.len() - 1)
            .into_par_iter()
            .step_by(4)
            .map(|i| {
                let tm = 0.5 * (tail.theta[i] + tail.theta[i + 1]);
                let h = 1e-6;
                let k = base.coefficients(&tm).unwrap();
                let d_phi = (tail.phi4(tm + h).unwrap() - tail.phi4(tm - h).unwrap()) / (2.0 * h);
                let d_psi = (tail.psi3(tm + h).unwrap() - tail.psi3(tm - h).unwrap()) / (2.0 * h);
                let r1 = k.b * d_phi - 2.0 * k.a * tail.phi4(tm).unwrap() + c3(tm);
                let r2 = k.b * d_psi - 3.0 * k.a * tail.psi3(tm).unwrap() + d4(tm);
                r1.abs().max(r2.abs())
            })
            .reduce(|| 0.0, f64::max);
        tail.residual = worst;
        Ok(AdiabaticChart { tail: Some(tail), ..base })
    }

    /// Integrate `y' = rhs(θ, y)` from the initial angle (y = 0) across the
    /// chart domain; returns nodes, values and derivatives.
    fn tabulate<F: Fn(f64, f64) -> f64 + Sync>(&self, opts: &TailOptions, rhs: F) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
        let (lo, hi) = self.domain();
        let t0 = self.initial_angle();
        let (xu, yu) = integrate_scalar(&rhs, t0, hi, 0.0, opts.dx, opts.tol)?;
        let (xd, yd) = integrate_scalar(&rhs, t0, lo, 0.0, opts.dx, opts.tol)?;
        let mut xs: Vec<f64> = xd.iter().rev().cloned().collect();
        let mut ys: Vec<f64> = yd.iter().rev().cloned().collect();
        xs.pop();
        ys.pop();
        xs.extend(xu);
        ys.extend(yu);
        let dys = xs.par_iter().zip(ys.par_iter()).map(|(&x, &y)| rhs(x, y)).collect();
        Ok((xs, ys, dys))
    }

    /// Leading drift coefficient at angle `t`, extracted from the exact
    /// region composition by Richardson extrapolation over r₀·2ᵏ:
    /// `lim r³(ρ' − ρ)` for [`DriftKind::Rho`], `lim r⁴(ψ' − ψ − 1/ρ)` for Psi.
    pub fn drift_coefficient_rho(&self, t: f64, opts: &TailOptions) -> f64 {
        self.drift_coefficient(t, opts, DriftKind::Rho)
    }

    fn drift_coefficient(&self, t: f64, opts: &TailOptions, kind: DriftKind) -> f64 {
        let shape = SectorShape::<Mp>::semidisc();
        let comp = shape.composition(self.region);
        let half = self.half();
        let mut hs = Vec::with_capacity(opts.levels);
        let mut gs = Vec::with_capacity(opts.levels);
        for k in 0..opts.levels {
            let r = opts.r0 * 2f64.powi(k as i32);
            let p = PolarPoint::new(Mp::new(r), Mp::new(t), half);
            let w = shape.apply(comp, &p.to_point());
            let q = unwrap_near(PolarPoint::from_point_in(&w, half), &p.theta);
            let g = match kind {
                DriftKind::Rho => {
                    let (a, _) = self.to_adiabatic_unchecked(&p.r, &p.theta, 3);
                    let (b, _) = self.to_adiabatic_unchecked(&q.r, &q.theta, 3);
                    (b - a) * r.powi(3)
                }
                DriftKind::Psi => {
                    let (ra, pa) = self.to_adiabatic_unchecked(&p.r, &p.theta, 4);
                    let (_, pb) = self.to_adiabatic_unchecked(&q.r, &q.theta, 4);
                    (pb - pa - Mp::one() / ra) * r.powi(4)
                }
            };
            hs.push(Mp::new(1.0 / r));
            gs.push(g);
        }
        neville_at_zero(&hs, gs).to_f64()
    }
}

fn interp_once(x: &[f64], y: &[f64], dy: &[f64], t: f64) -> f64 {
    let tmp = OdeTail {
        theta: x.to_vec(),
        phi4: y.to_vec(),
        dphi4: dy.to_vec(),
        psi3: vec![],
        dpsi3: vec![],
        e: 0.0,
        f: 0.0,
        residual: 0.0,
    };
    tmp.phi4(t).unwrap_or(f64::NAN)
}

#[derive(Clone, Copy)]
enum DriftKind {
    Rho,
    Psi,
}

/// Shift `q.theta` by multiples of 2π to lie within π of `near`.
pub fn unwrap_near<R: Real>(mut q: PolarPoint<R>, near: &R) -> PolarPoint<R> {
    let two_pi = R::pi() * 2.0;
    let pi = std::f64::consts::PI;
    while (q.theta.clone() - near.clone()).to_f64() < -pi {
        q.theta = q.theta + two_pi.clone();
    }
    while (q.theta.clone() - near.clone()).to_f64() > pi {
        q.theta = q.theta - two_pi.clone();
    }
    q
}

/// Polynomial extrapolation of g(h) to h = 0 (Neville).
pub fn neville_at_zero<R: Real>(h: &[R], mut g: Vec<R>) -> R {
    let n = g.len();
    for m in 1..n {
        for i in 0..n - m {
            let num = h[i].clone() * g[i + 1].clone() - h[i + m].clone() * g[i].clone();
            g[i] = num / (h[i].clone() - h[i + m].clone());
        }
    }
    g[0].clone()
}

/// Scalar ODE in the shifted variable u ≥ 0 with θ = x0 + sign·u (the
/// solver's dense output assumes a nonnegative, increasing abscissa).
struct Scalar<'a, F> {
    f: &'a F,
    x0: f64,
    sign: f64,
}

impl<F: Fn(f64, f64) -> f64> System<f64, Vector1<f64>> for Scalar<'_, F> {
    fn system(&self, u: f64, y: &Vector1<f64>, dy: &mut Vector1<f64>) {
        dy[0] = self.sign * (self.f)(self.x0 + self.sign * u, y[0]);
    }
}

/// Dense Dopri5 solution of a scalar ODE from x0 to x1 (either direction).
pub fn integrate_scalar<F: Fn(f64, f64) -> f64>(f: &F, x0: f64, x1: f64, y0: f64, dx: f64, tol: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let sign = if x1 >= x0 { 1.0 } else { -1.0 };
    let sys = Scalar { f, x0, sign };
    // cap the step so the dense output keeps the accuracy of the steps
    let len = (x1 - x0).abs();
    let h_max = (10.0 * dx).min(len);
    let mut solver = Dopri5::from_param(
        sys,
        0.0,
        len,
        dx,
        Vector1::new(y0),
        tol,
        tol,
        0.9,
        0.04,
        0.2,
        10.0,
        h_max,
        0.0,
        100_000,
        1000,
        OutputType::Dense,
    );
    solver.integrate().map_err(|e| LabError::Integration(format!("{e:?}")))?;
    let xs = solver.x_out().iter().map(|u| x0 + sign * u).collect();
    let ys = solver.y_out().iter().map(|y| y[0]).collect();
    Ok((xs, ys))
}

fn semidisc_head<R: Real>(region: RegionId, set: CoeffSet, which: Head, t: &R) -> R {
    use RegionId::*;
    let s = t.sin();
    let c = t.cos();
    let one = R::one();
    let corrected = set == CoeffSet::Corrected;
    match which {
        Head::Phi1 => s + 1.0,
        Head::Phi2 => match region {
            I => one - c,
            II => one + c,
            III => c - 1.0,
            _ => -c - 1.0,
        },
        Head::Phi3 => {
            let num = if corrected {
                s.powi(3) * 2.0 - s.clone() * 3.0
            } else if matches!(region, I | IV) {
                s.powi(3) * 2.0 - s.clone()
            } else {
                s.powi(3) * 2.0 - s.sq() * 12.0 - s.clone()
            };
            num / ((s + 1.0) * 6.0)
        }
        Head::Psi => {
            let num = c.sq() + c.clone() * 2.0 + s.clone() * c - s.clone() * 2.0 - 2.0;
            R::ratio(1.0, 6.0) - num / ((s + 1.0).sq() * 6.0)
        }
        Head::Psi1 => {
            // half-angle form of ∓2tan³(θ/2)/D, ±2/D with D = 3(1+sinθ)(1+tan(θ/2))³,
            // regular at θ = π
            let u = t.clone() * 0.5;
            let (su, cu) = (u.sin(), u.cos());
            let den = (s + 1.0) * (su.clone() + cu.clone()).powi(3) * 3.0;
            match region {
                I => -su.powi(3) * 2.0 / den,
                II => cu.powi(3) * 2.0 / den,
                III => su.powi(3) * 2.0 / den,
                _ => -cu.powi(3) * 2.0 / den,
            }
        }
        Head::Psi2 => {
            let published = psi2_published(region, t);
            if !corrected {
                return published;
            }
            let q = (s.clone() + 1.0).sq();
            let j = -c * (s.clone() + 2.0) / ((s + 1.0).sq() * 3.0);
            let two3: R = R::ratio(2.0, 3.0);
            let seven6: R = R::ratio(7.0, 6.0);
            let delta = match region {
                I => -(j + two3) / (q * 6.0),
                IV => -(j - two3) / (q * 6.0),
                II => (t.clone() - R::pi() - seven6 * (j - two3)) / q,
                _ => (t.clone() - seven6 * (j + two3)) / q,
            };
            published + delta
        }
    }
}

fn psi2_published<R: Real>(region: RegionId, t: &R) -> R {
    use RegionId::*;
    let s = t.sin();
    let c = t.cos();
    let th = t.clone();
    let c2 = c.sq();
    let c3 = c.powi(3);
    let c4 = c.powi(4);
    let den36 = (s.clone() + 1.0).powi(5) * 36.0;
    match region {
        I => {
            (s.clone() * 20.0 - c.clone() * 33.0 - s.clone() * c.clone() * 33.0 + c2.clone() * 12.0 + c3.clone() * 7.0
                - c4 * 6.0
                + c2 * s.clone() * 22.0
                - c3 * s * 6.0
                + 20.0)
                / den36
        }
        IV => {
            (-c.clone() * 33.0 - s.clone() * 20.0 - c.clone() * s.clone() * 33.0 - c2.clone() * 12.0 + c3.clone() * 7.0
                + c4 * 6.0
                - c2 * s.clone() * 22.0
                - c3 * s * 6.0
                - 20.0)
                / den36
        }
        III => {
            (-th.clone() * 144.0 - c.clone() * 69.0 + s.clone() * 116.0 + th.clone() * c2.clone() * 108.0
                - c.clone() * s.clone() * 69.0
                - c2.clone() * 60.0
                + c3.clone() * 19.0
                - c4 * 6.0
                - c2.clone() * s.clone() * 2.0
                - c3 * s.clone() * 6.0
                - th.clone() * s.clone() * 144.0
                + th * c2 * s * 36.0
                + 116.0)
                / den36
        }
        _ => {
            let pi = R::pi();
            let k = |m: f64| (th.clone() * m).cos();
            let n = |m: f64| (th.clone() * m).sin();
            (-th.clone() * 360.0 + pi.clone() * 360.0 + k(2.0) * 132.0 + k(3.0) * 19.0 - n(2.0) * 144.0 + n(3.0) * 2.0
                - c * 219.0
                - s.clone() * 462.0
                + k(4.0) * 3.0
                - n(4.0) * 3.0
                + th.clone() * k(2.0) * 216.0
                + th.clone() * n(3.0) * 36.0
                + pi.clone() * s.clone() * 540.0
                - th.clone() * s.clone() * 540.0
                - pi.clone() * k(2.0) * 216.0
                - pi * n(3.0) * 36.0
                - 335.0)
                / ((s + 1.0).powi(5) * 144.0)
        }
    }
}

fn sector_head<R: Real>(beta: &R, region: RegionId, which: Head, t: &R) -> Option<R> {
    use RegionId::*;
    let m = beta.clone() - t.clone();
    let p = beta.clone() + t.clone();
    let first = matches!(region, I | III);
    let sign = if matches!(region, I | IV) { -1.0 } else { 1.0 };
    let v = match which {
        Head::Phi3 | Head::Psi2 => return None,
        Head::Phi1 if first => (m * 0.5).cos().sq(),
        Head::Phi1 => (p * 0.5).sin().sq(),
        Head::Phi2 if first => m.sin() * (0.5 * sign),
        Head::Phi2 => p.sin() * (0.5 * sign),
        Head::Psi if first => {
            let tn = (m * 0.5).tan();
            -tn.powi(3) / 6.0 - tn * 0.5
        }
        Head::Psi => {
            let h = p * 0.5;
            let ct = h.cos() / h.sin();
            -ct.powi(3) / 6.0 - ct * 0.5
        }
        Head::Psi1 if first => {
            let h = m * 0.5;
            (h.cos() - (h.clone() * 3.0).cos()) / (h.cos().powi(5) * 16.0) * sign
        }
        Head::Psi1 => {
            let num = p.cos() + 1.0;
            let den = (p.clone() * 2.0).cos() - p.cos() * 4.0 + 3.0;
            num / den * sign
        }
    };
    Some(v)
}

/// One row of the tabulated values: Φ₁..Φ₁''', Φ₂..Φ₂'', Φ₃, Φ₃' and
/// Ψ..Ψ''', Ψ₁..Ψ₁'', Ψ₂, Ψ₂'.
#[derive(Clone, Debug, Serialize)]
pub struct TableRow {
    pub region: RegionId,
    pub theta: f64,
    pub phi: [f64; 9],
    pub psi: [f64; 9],
}

/// The eight (region, angle) rows at the region ends and at π/2, from the
/// published semi-disc chart.
pub fn table_rows() -> Vec<TableRow> {
    use std::f64::consts::{FRAC_PI_2, PI};
    let spots = [
        (RegionId::I, 0.0),
        (RegionId::I, FRAC_PI_2),
        (RegionId::II, PI),
        (RegionId::II, FRAC_PI_2),
        (RegionId::III, 0.0),
        (RegionId::III, FRAC_PI_2),
        (RegionId::IV, PI),
        (RegionId::IV, FRAC_PI_2),
    ];
    spots
        .iter()
        .map(|&(region, theta)| {
            let ch = AdiabaticChart::semidisc(region, CoeffSet::Published).unwrap();
            let j = |h| ch.head_jet(h, theta).unwrap();
            let (p1, p2, p3) = (j(Head::Phi1), j(Head::Phi2), j(Head::Phi3));
            let (q0, q1, q2) = (j(Head::Psi), j(Head::Psi1), j(Head::Psi2));
            TableRow {
                region,
                theta,
                phi: [p1[0], p1[1], p1[2], p1[3], p2[0], p2[1], p2[2], p3[0], p3[1]],
                psi: [q0[0], q0[1], q0[2], q0[3], q1[0], q1[1], q1[2], q2[0], q2[1]],
            }
        })
        .collect()
}

/// Largest closed-form vs ODE discrepancy for one head.
#[derive(Clone, Debug, Serialize)]
pub struct OdeCheck {
    pub head: Head,
    pub max_error: f64,
}

/// Integrate each level of the triangular Φ/Ψ system as a scalar ODE (lower
/// levels taken from the closed forms) and compare with the closed form of
/// the level itself. Fails with ResidualTooLarge above 1e−7.
pub fn solve_phi_psi_odes(chart: &AdiabaticChart) -> Result<Vec<OdeCheck>> {
    let k = |t: f64| chart.coefficients(&t).unwrap();
    let d = |h: Head, t: f64| chart.head_jet(h, t).unwrap();
    let mut rhs: Vec<(Head, Box<dyn Fn(f64, f64) -> f64 + '_>)> = vec![
        (Head::Phi1, Box::new(|t, y| -k(t).a * y / k(t).b)),
        (
            Head::Phi2,
            Box::new(|t, _y| {
                let c = k(t);
                let p1 = d(Head::Phi1, t);
                -(p1[1] * c.b1 + p1[2] * c.b * c.b / 2.0 + c.a * p1[1] * c.b + c.a1 * p1[0]) / c.b
            }),
        ),
        (Head::Psi, Box::new(|t, _y| 1.0 / (k(t).b * d(Head::Phi1, t)[0]))),
        (
            Head::Psi1,
            Box::new(|t, y| {
                let c = k(t);
                let (p1, p2, q) = (d(Head::Phi1, t), d(Head::Phi2, t), d(Head::Psi, t));
                (c.a * y - c.b * c.b * q[2] / 2.0 - c.b1 * q[1] - p2[0] / (p1[0] * p1[0])) / c.b
            }),
        ),
    ];
    if matches!(chart.family, ChartFamily::Semidisc(_)) {
        rhs.push((
            Head::Phi3,
            Box::new(|t, y| {
                let c = k(t);
                let (a2, b2) = (c.a2.unwrap(), c.b2.unwrap());
                let (p1, p2) = (d(Head::Phi1, t), d(Head::Phi2, t));
                let src = p1[3] * c.b.powi(3) / 6.0
                    + p1[2] * (c.b * c.b1 + c.a * c.b * c.b / 2.0)
                    + p1[1] * (b2 + c.a * c.b1 + c.a1 * c.b)
                    + a2 * p1[0]
                    + p2[1] * c.b1
                    + p2[2] * c.b * c.b / 2.0;
                (c.a * y - src) / c.b
            }),
        ));
        rhs.push((
            Head::Psi2,
            Box::new(|t, y| {
                let c = k(t);
                let b2 = c.b2.unwrap();
                let (p1, p2, p3) = (d(Head::Phi1, t)[0], d(Head::Phi2, t)[0], d(Head::Phi3, t)[0]);
                let (q, q1) = (d(Head::Psi, t), d(Head::Psi1, t));
                let src = b2 * q[1]
                    + c.b * c.b1 * q[2]
                    + c.b.powi(3) * q[3] / 6.0
                    + c.b * c.b * q1[2] / 2.0
                    + q1[1] * (c.b1 - c.a * c.b)
                    + (c.a * c.a - c.a1) * q1[0]
                    + (p1 * p3 - p2 * p2) / p1.powi(3);
                (2.0 * c.a * y - src) / c.b
            }),
        ));
    }
    let t0 = chart.initial_angle();
    let mid = match chart.region {
        RegionId::I | RegionId::III => chart.beta().min(std::f64::consts::FRAC_PI_2),
        _ => std::f64::consts::PI - chart.beta(),
    };
    // semi-disc: integrate across the whole band to π/2; sector: from the
    // initial angle back to the far end of the band
    let end = match chart.family {
        ChartFamily::Semidisc(_) => std::f64::consts::FRAC_PI_2,
        ChartFamily::Sector(_) => match chart.region {
            RegionId::I | RegionId::III => 0.0,
            _ => std::f64::consts::PI,
        },
    };
    let end = if (end - t0).abs() < 1e-12 { mid } else { end };
    let mut out = Vec::new();
    for (head, f) in &rhs {
        let y0 = chart.head::<f64>(*head, &t0).unwrap();
        let (xs, ys) = integrate_scalar(f, t0, end, y0, 1e-2, 1e-12)?;
        let err = xs
            .iter()
            .zip(&ys)
            .map(|(&x, &y)| (y - chart.head::<f64>(*head, &x).unwrap()).abs())
            .fold(0.0, f64::max);
        out.push(OdeCheck { head: *head, max_error: err });
    }
    let worst = out.iter().map(|c| c.max_error).fold(0.0, f64::max);
    if worst > 1e-7 {
        return Err(LabError::ResidualTooLarge(worst));
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize)]
pub struct DriftFit {
    pub slope_rho: f64,
    pub slope_psi: f64,
    /// (r, max |ρ' − ρ|, max |ψ' − ψ − 1/ρ|)
    pub rows: Vec<(f64, f64, f64)>,
}

/// Drift of the chart under the exact F², in multiprecision, over band
/// samples at each radius; log-log slopes of the maxima.
pub fn adiabatic_drift(chart: &AdiabaticChart, order: u32, r_grid: &[f64], samples: usize) -> Result<DriftFit> {
    if r_grid.len() < 4 {
        return Err(LabError::InsufficientRange { need: 4, got: r_grid.len() });
    }
    let beta = chart.beta();
    let shape = match chart.family {
        ChartFamily::Semidisc(_) => SectorShape::<Mp>::semidisc(),
        ChartFamily::Sector(b) => SectorShape::<Mp>::new(Mp::new(b)),
    };
    let half = chart.half();
    let mut rows = Vec::new();
    for &r in r_grid {
        let (mut dr, mut dp) = (0.0f64, 0.0f64);
        for t in band_samples(beta, chart.region, r, 5.0 / r, samples) {
            let p = PolarPoint::new(Mp::new(r), Mp::new(t), half);
            let Ok((reg, w)) = shape.f2(&p.to_point()) else { continue };
            if reg != chart.region {
                continue;
            }
            let q = unwrap_near(PolarPoint::from_point_in(&w, half), &p.theta);
            let (ra, pa) = chart.to_adiabatic_unchecked(&p.r, &p.theta, order);
            let (rb, pb) = chart.to_adiabatic_unchecked(&q.r, &q.theta, order);
            dr = dr.max((rb - ra.clone()).abs().to_f64());
            dp = dp.max((pb - pa - Mp::one() / ra).abs().to_f64());
        }
        rows.push((r, dr, dp));
    }
    let rs: Vec<f64> = rows.iter().map(|x| x.0).collect();
    let slope_rho = loglog_slope(&rs, &rows.iter().map(|x| x.1).collect::<Vec<_>>());
    let slope_psi = loglog_slope(&rs, &rows.iter().map(|x| x.2).collect::<Vec<_>>());
    Ok(DriftFit { slope_rho, slope_psi, rows })
}

/// Inverse series for the region-I exit point (r_m, θ_m) in terms of ρ and
/// v = {ρ/3 − φ}, with the tail constants e₁ = Φ₄(π/2), f₁ = Ψ₃(π/2).
pub fn inverse_taylor_region1(rho: f64, v: f64, e1: f64, f1: f64) -> (f64, f64) {
    let r = 0.5 * rho - 0.5
        + (8.0 * v * v + 8.0 * v / 3.0 - 13.0 / 36.0) / rho
        + (8.0 * v * v + 32.0 * v / 9.0 - 2.0 * e1 - 23.0 / 108.0) / (rho * rho);
    // leading term from 3d₂ + 24v = 2; the closed solution is printed with the opposite sign
    let t = std::f64::consts::FRAC_PI_2 + (2.0 / 3.0 - 8.0 * v) / rho
        + (2.0 / 9.0 - 8.0 * v) / (rho * rho)
        + (256.0 * v.powi(3) / 3.0 + 32.0 * v * v / 3.0 - 92.0 * v / 9.0 - 64.0 * f1 - 94.0 / 81.0) / rho.powi(3);
    (r, t)
}
