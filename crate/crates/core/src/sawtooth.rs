//! The piecewise-linear cylinder map
//! L_Δ(R, φ) = (R + Δ({φ − R} − 1/2), {φ − R}),
//! its conjugation to a piecewise rotation, the invariant 2m-gons at
//! α_Δ = π/m, escape experiments for perturbations T_Δ = L_Δᵏ + O(1/R), and
//! the Fermi–Ulam collision normal form.
//!
//! Barred coordinates: R̄ = (2/s)R − (√Δ/√(4−Δ))φ, φ̄ = φ with s = √Δ√(4−Δ).
//! On the strip Cₙ = {n − 1 < R − φ < n} the conjugated map is a clockwise
//! rotation by α_Δ about (R̄ₙ, 1/2), R̄ₙ = (4n − Δ)/(2s).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{LabError, Result};
use crate::return_map::{sawtooth_step, CylinderState};

/// Tolerance of the polygon membership test.
pub const EDGE_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SawtoothSystem {
    pub delta: f64,
    /// Rotation angle, cos α = 1 − Δ/2.
    pub alpha: f64,
    /// Iterate count for the perturbed family T_Δ = L_Δᵏ + O(1/R).
    pub k: u32,
}

impl SawtoothSystem {
    pub fn new(delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta < 4.0) {
            return Err(LabError::Config(format!("Δ = {delta} is outside (0, 4)")));
        }
        Ok(SawtoothSystem { delta, alpha: (1.0 - 0.5 * delta).acos(), k: 1 })
    }

    /// Δ = 2 − 2cos(π/m), the parameter with α_Δ = π/m.
    pub fn for_polygon(m: u32) -> Result<Self> {
        if m < 3 {
            return Err(LabError::Config(format!("m = {m}: need m ≥ 3")));
        }
        Self::new(2.0 - 2.0 * (std::f64::consts::PI / m as f64).cos())
    }

    pub fn with_k(mut self, k: u32) -> Self {
        self.k = k;
        self
    }

    /// arcsin(√(Δ(4 − Δ))/2); agrees with `alpha` for Δ ≤ 2.
    pub fn alpha_arcsin(&self) -> f64 {
        ((self.delta * (4.0 - self.delta)).sqrt() / 2.0).asin()
    }

    fn s(&self) -> f64 {
        (self.delta * (4.0 - self.delta)).sqrt()
    }

    /// L_Δ with the continuity check.
    pub fn step(&self, st: &CylinderState) -> Result<CylinderState> {
        sawtooth_step(self.delta, st)
    }

    /// L_Δ without the boundary check, for long orbits.
    #[inline]
    pub fn step_raw(&self, r: f64, phi: f64) -> (f64, f64) {
        let x = phi - r;
        let w = x - x.floor();
        (r + self.delta * (w - 0.5), w)
    }

    /// Index n of the continuity strip Cₙ = {n − 1 < R − φ < n}.
    pub fn branch(&self, r: f64, phi: f64) -> i64 {
        (r - phi).floor() as i64 + 1
    }

    /// Linear part [[1 − Δ, Δ], [−1, 1]] of every branch.
    pub fn branch_matrix(&self) -> [[f64; 2]; 2] {
        [[1.0 - self.delta, self.delta], [-1.0, 1.0]]
    }

    pub fn conjugate(&self, r: f64, phi: f64) -> (f64, f64) {
        let s = self.s();
        (2.0 / s * r - (self.delta / (4.0 - self.delta)).sqrt() * phi, phi)
    }

    pub fn deconjugate(&self, rb: f64, phib: f64) -> (f64, f64) {
        let s = self.s();
        (0.5 * s * (rb + (self.delta / (4.0 - self.delta)).sqrt() * phib), phib)
    }

    /// Centre (R̄ₙ, 1/2) of the rhombus D̄ₙ.
    pub fn center(&self, n: i64) -> (f64, f64) {
        ((4.0 * n as f64 - self.delta) / (2.0 * self.s()), 0.5)
    }

    /// The piecewise rotation R_Δ in barred coordinates, built from the
    /// rotation formula rather than by conjugating L_Δ.
    pub fn rotation_step(&self, rb: f64, phib: f64) -> (f64, f64) {
        let (r, phi) = self.deconjugate(rb, phib);
        let c = self.center(self.branch(r, phi));
        rotate_cw(c, (rb, phib), self.alpha)
    }

    /// conj ∘ L_Δ ∘ conj⁻¹, the second route to R_Δ.
    pub fn conjugated_step(&self, rb: f64, phib: f64) -> (f64, f64) {
        let (r, phi) = self.deconjugate(rb, phib);
        let (r2, p2) = self.step_raw(r, phi);
        self.conjugate(r2, p2)
    }

    /// Largest change of the distance to the branch centre under
    /// conj ∘ L_Δ ∘ conj⁻¹, over random points with R ∈ `r_range`.
    pub fn isometry_error(&self, r_range: (f64, f64), samples: usize, seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst: f64 = 0.0;
        for _ in 0..samples {
            let (r, phi) = (rng.gen_range(r_range.0..r_range.1), rng.gen::<f64>());
            let c = self.center(self.branch(r, phi));
            let p = self.conjugate(r, phi);
            let q = self.conjugated_step(p.0, p.1);
            worst = worst.max(((q.0 - c.0).hypot(q.1 - c.1) - (p.0 - c.0).hypot(p.1 - c.1)).abs());
        }
        worst
    }

    pub fn rhombus(&self, n: i64) -> RhombusDomain {
        let nf = n as f64;
        let corners = [(nf - 1.0, 0.0), (nf, 0.0), (nf + 1.0, 1.0), (nf, 1.0)];
        RhombusDomain { n, center: self.center(n), vertices: corners.map(|(r, p)| self.conjugate(r, p)) }
    }
}

/// Clockwise rotation of `p` by `a` about `c`.
pub fn rotate_cw(c: (f64, f64), p: (f64, f64), a: f64) -> (f64, f64) {
    let (dx, dy) = (p.0 - c.0, p.1 - c.1);
    let (s, co) = a.sin_cos();
    (c.0 + co * dx + s * dy, c.1 - s * dx + co * dy)
}

/// D̄ₙ: the conjugated image of Cₙ ∩ {0 ≤ φ ≤ 1}.
#[derive(Clone, Debug, Serialize)]
pub struct RhombusDomain {
    pub n: i64,
    pub center: (f64, f64),
    /// (n − 1, 0), (n, 0), (n + 1, 1), (n, 1) in barred coordinates.
    pub vertices: [(f64, f64); 4],
}

impl RhombusDomain {
    pub fn side_lengths(&self) -> [f64; 4] {
        let v = self.vertices;
        std::array::from_fn(|i| {
            let (a, b) = (v[i], v[(i + 1) % 4]);
            (a.0 - b.0).hypot(a.1 - b.1)
        })
    }

    /// Interior angle at the vertex (n − 1, 0).
    pub fn angle(&self) -> f64 {
        let v = self.vertices;
        let (u, w) = ((v[1].0 - v[0].0, v[1].1 - v[0].1), (v[3].0 - v[0].0, v[3].1 - v[0].1));
        (u.0 * w.1 - u.1 * w.0).atan2(u.0 * w.0 + u.1 * w.1)
    }
}

/// Regular 2m-gon Oₙ in barred coordinates.
#[derive(Clone, Debug, Serialize)]
pub struct InvariantPolygon {
    pub m: u32,
    pub n: i64,
    pub center: (f64, f64),
    pub vertices: Vec<(f64, f64)>,
    /// Leftmost and rightmost R̄ of the vertices.
    pub r_min: f64,
    pub r_max: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Side {
    Left,
    Inside,
    Right,
}

impl InvariantPolygon {
    /// Copy scaled about the centre.
    pub fn scaled(&self, f: f64) -> InvariantPolygon {
        let c = self.center;
        let vertices: Vec<_> = self.vertices.iter().map(|v| (c.0 + f * (v.0 - c.0), c.1 + f * (v.1 - c.1))).collect();
        let (r_min, r_max) = extent(&vertices);
        InvariantPolygon { m: self.m, n: self.n, center: c, vertices, r_min, r_max }
    }

    /// Winding number of the boundary around `p`; points within
    /// [`EDGE_TOL`] of an edge count as inside.
    pub fn winding(&self, p: (f64, f64)) -> i32 {
        let v = &self.vertices;
        let mut w = 0;
        for i in 0..v.len() {
            let (a, b) = (v[i], v[(i + 1) % v.len()]);
            let cross = (b.0 - a.0) * (p.1 - a.1) - (p.0 - a.0) * (b.1 - a.1);
            let len = (b.0 - a.0).hypot(b.1 - a.1);
            let t = ((p.0 - a.0) * (b.0 - a.0) + (p.1 - a.1) * (b.1 - a.1)) / (len * len);
            if cross.abs() <= EDGE_TOL * len && (-EDGE_TOL..=1.0 + EDGE_TOL).contains(&t) {
                return 1;
            }
            if a.1 <= p.1 {
                if b.1 > p.1 && cross > 0.0 {
                    w += 1;
                }
            } else if b.1 <= p.1 && cross < 0.0 {
                w -= 1;
            }
        }
        w
    }

    pub fn contains(&self, p: (f64, f64)) -> bool {
        self.winding(p) != 0
    }

    /// Which side of the barrier a barred point lies on. The polygon spans
    /// the whole fibre 0 ≤ φ̄ ≤ 1, so outside points are left or right of it.
    pub fn side(&self, p: (f64, f64)) -> Side {
        if p.0 < self.r_min - EDGE_TOL {
            return Side::Left;
        }
        if p.0 > self.r_max + EDGE_TOL {
            return Side::Right;
        }
        if self.contains(p) {
            Side::Inside
        } else if p.0 < self.center.0 {
            Side::Left
        } else {
            Side::Right
        }
    }

    /// max |R_Δ^{2m}(v) − v| over the vertices. Vertices sit on
    /// discontinuity lines, so each step takes the branch of a point nudged
    /// towards the polygon centre and rotates the exact vertex.
    pub fn vertex_closure(&self, sys: &SawtoothSystem) -> f64 {
        let c = self.center;
        self.vertices
            .iter()
            .map(|&v| {
                let mut p = v;
                for _ in 0..2 * self.m {
                    let probe = sys.deconjugate(p.0 + 1e-9 * (c.0 - p.0), p.1 + 1e-9 * (c.1 - p.1));
                    p = rotate_cw(sys.center(sys.branch(probe.0, probe.1)), p, sys.alpha);
                }
                (p.0 - v.0).hypot(p.1 - v.1)
            })
            .fold(0.0, f64::max)
    }

    pub fn area(&self) -> f64 {
        let v = &self.vertices;
        0.5 * (0..v.len()).map(|i| {
            let (a, b) = (v[i], v[(i + 1) % v.len()]);
            a.0 * b.1 - b.0 * a.1
        }).sum::<f64>().abs()
    }
}

fn extent(v: &[(f64, f64)]) -> (f64, f64) {
    v.iter().fold((f64::MAX, f64::MIN), |(lo, hi), p| (lo.min(p.0), hi.max(p.0)))
}

/// Rotate the vertex a = (n, 0) of D̄ₙ about the centre by α_Δ, 2m times.
/// The 2m-th image has to come back to a.
pub fn build_invariant_polygon(sys: &SawtoothSystem, m: u32, n: i64) -> Result<InvariantPolygon> {
    if m < 3 {
        return Err(LabError::Config(format!("m = {m}: need m ≥ 3")));
    }
    let c = sys.center(n);
    let a = sys.conjugate(n as f64, 0.0);
    let mut vertices = Vec::with_capacity(2 * m as usize);
    let mut p = a;
    for _ in 0..2 * m {
        vertices.push(p);
        p = rotate_cw(c, p, sys.alpha);
    }
    let gap = (p.0 - a.0).hypot(p.1 - a.1);
    if gap > 1e-10 {
        return Err(LabError::NotClosed(gap));
    }
    let (r_min, r_max) = extent(&vertices);
    Ok(InvariantPolygon { m, n, center: c, vertices, r_min, r_max })
}

/// Regular 2m-gon with apothem 1/2 about the centre of D̄ₙ and one edge on
/// φ̄ = 0, whatever Δ is. For Δ ≠ 2 − 2cos(π/m) it is not invariant; the
/// exploratory escape runs use it as the stand-in barrier.
pub fn regular_polygon(sys: &SawtoothSystem, m: u32, n: i64) -> InvariantPolygon {
    let c = sys.center(n);
    let th = std::f64::consts::PI / m as f64;
    let rad = 0.5 / (0.5 * th).cos();
    let a = (c.0 + rad * (0.5 * th).sin(), 0.0);
    let vertices: Vec<_> = (0..2 * m).map(|j| rotate_cw(c, a, j as f64 * th)).collect();
    let (r_min, r_max) = extent(&vertices);
    InvariantPolygon { m, n, center: c, vertices, r_min, r_max }
}

/// Band Gₙ = O_{4ⁿ} \ Q_{4ⁿ}, Q the copy of O scaled by 1 − 2⁻ⁿ.
#[derive(Clone, Debug, Serialize)]
pub struct GBand {
    pub level: u32,
    pub outer: InvariantPolygon,
    pub inner: InvariantPolygon,
    /// Half the band width in the jump estimate: ½·2⁻ⁿ·(1 − cos α)/sin α.
    pub jump_bound: f64,
}

impl GBand {
    pub fn new(sys: &SawtoothSystem, m: u32, level: u32) -> Result<GBand> {
        let outer = build_invariant_polygon(sys, m, 4i64.pow(level))?;
        let f = 0.5f64.powi(level as i32);
        let inner = outer.scaled(1.0 - f);
        let jump_bound = 0.5 * f * (1.0 - sys.alpha.cos()) / sys.alpha.sin();
        Ok(GBand { level, outer, inner, jump_bound })
    }

    pub fn contains(&self, p: (f64, f64)) -> bool {
        self.outer.contains(p) && !self.inner.contains(p)
    }
}

/// A perturbation p(R, φ) added after each L_Δᵏ.
pub type Perturbation = dyn Fn(f64, f64) -> (f64, f64) + Sync;

/// Largest R·|p(R, φ)| over a sample of the cylinder; the perturbation must
/// be O(1/R) for the escape statistics to mean anything.
pub fn perturbation_constant(p: &Perturbation, r_range: (f64, f64), samples: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    (0..samples)
        .map(|_| {
            let r = rng.gen_range(r_range.0..r_range.1);
            let (dr, dp) = p(r, rng.gen::<f64>());
            r * dr.hypot(dp)
        })
        .fold(0.0, f64::max)
}

#[derive(Clone, Debug, Serialize)]
pub struct OrbitStats {
    pub seed: (f64, f64),
    pub max_r: f64,
    /// Transitions from left of a barrier to inside or right of it.
    pub crossings: usize,
    /// Steps that entered an outer polygon from outside.
    pub entries: usize,
    /// Entries that landed in the G band.
    pub entries_in_band: usize,
    /// Steps spent in any G band.
    pub band_visits: usize,
    /// Largest |T̄ − R̄ᵏ| seen near a barrier (barred units).
    pub max_jump: f64,
    pub boundary_hits: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct EscapeStats {
    pub seeds: usize,
    pub steps: usize,
    pub crossings: usize,
    pub orbits_crossing: usize,
    pub entries: usize,
    pub entries_in_band: usize,
    pub band_visits: usize,
    pub max_jump: f64,
    pub max_r: Vec<f64>,
}

/// Seeds uniform in R ∈ `r_range`, φ ∈ [0, 1), kept only if left of every
/// barrier. Deterministic in `seed`.
pub fn left_seeds(sys: &SawtoothSystem, barriers: &[InvariantPolygon], r_range: (f64, f64), count: usize, seed: u64) -> Vec<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let s = (rng.gen_range(r_range.0..r_range.1), rng.gen::<f64>());
        let b = sys.conjugate(s.0, s.1);
        if barriers.iter().all(|o| o.side(b) == Side::Left) {
            out.push(s);
        }
    }
    out
}

/// Iterate T_Δ = L_Δᵏ + p from each seed; count barrier crossings and G-band
/// events. Seeds run in parallel; results keep seed order.
pub fn escape_experiment(
    sys: &SawtoothSystem,
    seeds: &[(f64, f64)],
    steps: usize,
    barriers: &[InvariantPolygon],
    bands: &[GBand],
    perturbation: Option<&Perturbation>,
) -> (EscapeStats, Vec<OrbitStats>) {
    let orbits: Vec<OrbitStats> = seeds.par_iter().map(|&s| run_orbit(sys, s, steps, barriers, bands, perturbation)).collect();
    let stats = EscapeStats {
        seeds: seeds.len(),
        steps,
        crossings: orbits.iter().map(|o| o.crossings).sum(),
        orbits_crossing: orbits.iter().filter(|o| o.crossings > 0).count(),
        entries: orbits.iter().map(|o| o.entries).sum(),
        entries_in_band: orbits.iter().map(|o| o.entries_in_band).sum(),
        band_visits: orbits.iter().map(|o| o.band_visits).sum(),
        max_jump: orbits.iter().map(|o| o.max_jump).fold(0.0, f64::max),
        max_r: orbits.iter().map(|o| o.max_r).collect(),
    };
    (stats, orbits)
}

fn run_orbit(
    sys: &SawtoothSystem,
    seed: (f64, f64),
    steps: usize,
    barriers: &[InvariantPolygon],
    bands: &[GBand],
    perturbation: Option<&Perturbation>,
) -> OrbitStats {
    let (mut r, mut phi) = seed;
    let mut left: Vec<bool> = barriers.iter().map(|o| o.side(sys.conjugate(r, phi)) == Side::Left).collect();
    let near = |b: (f64, f64), g: &GBand| b.0 > g.outer.r_min - 1.0 && b.0 < g.outer.r_max + 1.0;
    let mut inside: Vec<bool> = bands.iter().map(|g| g.outer.contains(sys.conjugate(r, phi))).collect();
    let mut st = OrbitStats {
        seed,
        max_r: r,
        crossings: 0,
        entries: 0,
        entries_in_band: 0,
        band_visits: 0,
        max_jump: 0.0,
        boundary_hits: 0,
    };
    for _ in 0..steps {
        let (mut r2, mut p2) = (r, phi);
        for _ in 0..sys.k {
            let w = (p2 - r2) - (p2 - r2).floor();
            if !(1e-12..=1.0 - 1e-12).contains(&w) {
                st.boundary_hits += 1;
            }
            (r2, p2) = sys.step_raw(r2, p2);
        }
        if let Some(p) = perturbation {
            let (dr, dp) = p(r, phi);
            let lin = sys.conjugate(r2, p2);
            r2 += dr;
            p2 = (p2 + dp).rem_euclid(1.0);
            let b = sys.conjugate(r2, p2);
            if bands.iter().any(|g| near(b, g)) {
                st.max_jump = st.max_jump.max((b.0 - lin.0).hypot(b.1 - lin.1));
            }
        }
        r = r2;
        phi = p2;
        st.max_r = st.max_r.max(r);
        let b = sys.conjugate(r, phi);
        for (o, was_left) in barriers.iter().zip(left.iter_mut()) {
            let now_left = b.0 < o.r_min - EDGE_TOL || o.side(b) == Side::Left;
            if *was_left && !now_left {
                st.crossings += 1;
            }
            *was_left = now_left;
        }
        for (g, was) in bands.iter().zip(inside.iter_mut()) {
            if b.0 < g.outer.r_min - EDGE_TOL || b.0 > g.outer.r_max + EDGE_TOL {
                *was = false;
                continue;
            }
            let now = g.outer.contains(b);
            let in_band = now && !g.inner.contains(b);
            if now && !*was {
                st.entries += 1;
                if in_band {
                    st.entries_in_band += 1;
                }
            }
            if in_band {
                st.band_visits += 1;
            }
            *was = now;
        }
    }
    st
}

// ------------------------------------------------------------ Fermi–Ulam

/// Collision normal form (τ, I) ↦ (τ̄, Ī): τ̄ = {τ − I},
/// Ī = I + Δ(τ̄ − 1/2) + Δ₁((τ̄ − 1/2)² − 1/12)/I.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FermiUlamModel {
    pub delta: f64,
    pub delta1: f64,
    /// Smallest admissible energy.
    pub i0: f64,
}

impl FermiUlamModel {
    pub fn new(delta: f64, delta1: f64) -> Self {
        FermiUlamModel { delta, delta1, i0: 1.0 }
    }

    pub fn step(&self, tau: f64, i: f64) -> Result<(f64, f64)> {
        if i < self.i0 {
            return Err(LabError::EnergyTooLow(i));
        }
        let (t, i_lead) = self.leading(tau, i);
        let u = t - 0.5;
        Ok((t, i_lead + self.delta1 * (u * u - 1.0 / 12.0) / i))
    }

    /// The leading map F̂ alone.
    #[inline]
    pub fn leading(&self, tau: f64, i: f64) -> (f64, f64) {
        let x = tau - i;
        let t = x - x.floor();
        (t, i + self.delta * (t - 0.5))
    }

    /// The same piecewise-linear map in cylinder form: (R, φ) = (I, τ).
    pub fn as_sawtooth(&self) -> Result<SawtoothSystem> {
        SawtoothSystem::new(self.delta)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct JumpCheck {
    pub level: u32,
    pub energy: f64,
    /// max |F − F̂| in barred units.
    pub max_jump: f64,
    pub bound: f64,
}

/// Size of the I⁻¹ correction near I = 4ⁿ against the band half-width
/// ½·2⁻ⁿ·(1 − cos α)/sin α, for each level with 4ⁿ ≥ `i_min`.
pub fn fermi_ulam_jump_bound(model: &FermiUlamModel, levels: std::ops::RangeInclusive<u32>, samples: usize) -> Result<Vec<JumpCheck>> {
    let sys = model.as_sawtooth()?;
    let mut out = Vec::new();
    for level in levels {
        let energy = 4f64.powi(level as i32);
        let mut worst: f64 = 0.0;
        for j in 0..samples {
            let tau = (j as f64 + 0.5) / samples as f64;
            let i = energy + (j as f64 * 0.618_033_988_749_895).fract();
            let full = model.step(tau, i)?;
            let lead = model.leading(tau, i);
            let (a, b) = (sys.conjugate(full.1, full.0), sys.conjugate(lead.1, lead.0));
            worst = worst.max((a.0 - b.0).hypot(a.1 - b.1));
        }
        let bound = 0.5 * 0.5f64.powi(level as i32) * (1.0 - sys.alpha.cos()) / sys.alpha.sin();
        out.push(JumpCheck { level, energy, max_jump: worst, bound });
    }
    Ok(out)
}

/// Leading Fermi–Ulam orbits from energies left of the barrier; counts steps
/// that reach the transplanted polygon (barred (I, τ)).
pub fn fermi_ulam_barrier_test(model: &FermiUlamModel, barrier: &InvariantPolygon, seeds: &[(f64, f64)], steps: usize) -> Result<(usize, f64)> {
    let sys = model.as_sawtooth()?;
    let res: Vec<(usize, f64)> = seeds
        .par_iter()
        .map(|&(tau0, i0)| {
            let (mut tau, mut i) = (tau0, i0);
            let (mut hits, mut max_i) = (0usize, i);
            for _ in 0..steps {
                (tau, i) = model.leading(tau, i);
                max_i = max_i.max(i);
                let b = sys.conjugate(i, tau);
                if b.0 >= barrier.r_min - EDGE_TOL && barrier.side(b) != Side::Left {
                    hits += 1;
                }
            }
            (hits, max_i)
        })
        .collect();
    Ok((res.iter().map(|r| r.0).sum(), res.iter().map(|r| r.1).fold(0.0, f64::max)))
}
