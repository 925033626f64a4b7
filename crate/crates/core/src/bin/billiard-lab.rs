use std::collections::BTreeMap;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use billiard_lab::adiabatic::{adiabatic_drift, table_rows, AdiabaticChart, TailOptions};
use billiard_lab::asymptotic::{sector_order_fit, semidisc_order_fit, CoeffSet};
use billiard_lab::normal_form::{self as nf, DEFAULT_STENCIL};
use billiard_lab::return_map::{anchor_cycle, passage_cycle, sawtooth_residual, TailConstants};
use billiard_lab::sawtooth::{self as st, FermiUlamModel, GBand, SawtoothSystem};
use billiard_lab::suites::{self, QUADRANTS, SUITES};
use billiard_lab::{Mp, Point2, SectorShape};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

#[derive(Parser, Debug)]
#[command(name = "billiard-lab", version, about = "Outer billiards around circular sectors: numerical experiments")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    cmd: Cmd,
}

/// Flags shared by every subcommand. Any of them can also come from the
/// key=value file given by --config; flags win.
#[derive(Args, Debug, Clone, Default, Serialize)]
struct Common {
    /// Sector angle β in (0, π/2].
    #[arg(long, global = true)]
    beta: Option<f64>,
    /// Island index, or a comma-separated list.
    #[arg(long, global = true)]
    n: Option<String>,
    #[arg(long, global = true)]
    seeds: Option<usize>,
    #[arg(long, global = true)]
    steps: Option<usize>,
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Output directory (default: out).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; falls back to BILLIARD_LAB_THREADS.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true)]
    #[serde(skip)]
    config: Option<PathBuf>,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Cmd {
    /// Trace an exact orbit.
    Orbit {
        /// Start point "x,y".
        #[arg(long)]
        start: String,
    },
    /// Error-order fits of the asymptotic F² against the exact map.
    ExpansionCheck {
        #[arg(long, default_value_t = 4)]
        order: u32,
    },
    /// Coefficient tables and drift slopes of the adiabatic charts.
    AdiabaticCheck,
    /// Fixed-point cycle of the passage maps and the sawtooth residual slope.
    ReturnMap,
    /// Twist pipeline per island index.
    NormalForm,
    /// Bounded-orbit fraction on a grid around the island centre.
    IslandScan {
        #[arg(long, default_value_t = 9)]
        grid: usize,
        #[arg(long, default_value_t = 0.5)]
        scale: f64,
    },
    /// Invariant polygons and escape experiments for L_Δ and T_Δ.
    Sawtooth {
        /// Polygon order; Δ = 2 − 2cos(π/m) unless --delta is given.
        #[arg(long, default_value_t = 3)]
        m: u32,
        /// Explicit Δ (exploratory; the barrier is then a regular stand-in).
        #[arg(long)]
        delta: Option<f64>,
        /// Perturbation size c in T_Δ = L_Δᵏ + (c/R, 0); G-band statistics on.
        #[arg(long)]
        perturb: Option<f64>,
        #[arg(long, default_value_t = 1)]
        k: u32,
        /// Write every j-th point of the first orbit to trace.csv (0: off).
        #[arg(long, default_value_t = 0)]
        thin: usize,
    },
    /// Fermi–Ulam normal form: transplanted barrier and jump bound.
    FermiUlam {
        #[arg(long, default_value_t = 4)]
        m: u32,
        #[arg(long, default_value_t = 1.0)]
        delta1: f64,
    },
    /// Run acceptance suites by name or id ("all" for every one).
    Acceptance {
        #[arg(long, default_value = "all")]
        suite: String,
    },
}

impl Cmd {
    fn name(&self) -> &'static str {
        match self {
            Cmd::Orbit { .. } => "orbit",
            Cmd::ExpansionCheck { .. } => "expansion-check",
            Cmd::AdiabaticCheck => "adiabatic-check",
            Cmd::ReturnMap => "return-map",
            Cmd::NormalForm => "normal-form",
            Cmd::IslandScan { .. } => "island-scan",
            Cmd::Sawtooth { .. } => "sawtooth",
            Cmd::FermiUlam { .. } => "fermi-ulam",
            Cmd::Acceptance { .. } => "acceptance",
        }
    }
}

fn parse_config(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    let mut map = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| anyhow!("{}:{}: expected key=value", path.display(), i + 1))?;
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(map)
}

fn fill<T: std::str::FromStr>(slot: &mut Option<T>, cfg: &BTreeMap<String, String>, key: &str) -> Result<()>
where
    T::Err: std::fmt::Display,
{
    if slot.is_none() {
        if let Some(v) = cfg.get(key) {
            *slot = Some(v.parse().map_err(|e| anyhow!("config key {key} = {v:?}: {e}"))?);
        }
    }
    Ok(())
}

impl Common {
    fn merge_config(&mut self) -> Result<()> {
        let Some(path) = self.config.clone() else { return Ok(()) };
        let cfg = parse_config(&path)?;
        const KNOWN: [&str; 8] = ["beta", "n", "seeds", "steps", "tol", "out", "seed", "threads"];
        if let Some(k) = cfg.keys().find(|k| !KNOWN.contains(&k.as_str())) {
            bail!("unknown config key {k:?}; known keys: {}", KNOWN.join(", "));
        }
        fill(&mut self.beta, &cfg, "beta")?;
        fill(&mut self.n, &cfg, "n")?;
        fill(&mut self.seeds, &cfg, "seeds")?;
        fill(&mut self.steps, &cfg, "steps")?;
        fill(&mut self.tol, &cfg, "tol")?;
        fill(&mut self.out, &cfg, "out")?;
        fill(&mut self.seed, &cfg, "seed")?;
        fill(&mut self.threads, &cfg, "threads")?;
        Ok(())
    }

    fn validate(&mut self) -> Result<()> {
        if let Some(b) = self.beta {
            // a 4-decimal π/2 such as 1.5708 means the semi-disc
            if b != std::f64::consts::FRAC_PI_2 && (b - std::f64::consts::FRAC_PI_2).abs() < 5e-5 {
                eprintln!("note: --beta {b} taken as π/2");
                self.beta = Some(std::f64::consts::FRAC_PI_2);
            }
        }
        if let Some(b) = self.beta {
            if !(b > 0.0 && b <= std::f64::consts::FRAC_PI_2 + 1e-12) {
                bail!("--beta {b} is outside (0, π/2]");
            }
        }
        if self.seeds == Some(0) {
            bail!("--seeds must be positive");
        }
        if self.steps == Some(0) {
            bail!("--steps must be positive");
        }
        if let Some(t) = self.tol {
            if t.is_nan() || t <= 0.0 {
                bail!("--tol must be positive");
            }
        }
        if self.threads == Some(0) {
            bail!("--threads must be positive");
        }
        Ok(())
    }

    fn n_list(&self, default: &[f64]) -> Result<Vec<f64>> {
        match &self.n {
            None => Ok(default.to_vec()),
            Some(s) => s.split(',').map(|x| x.trim().parse::<f64>().map_err(|e| anyhow!("--n {x:?}: {e}"))).collect(),
        }
    }

    fn island_indices(&self, default: &[f64]) -> Result<Vec<u32>> {
        self.n_list(default)?
            .into_iter()
            .map(|n| {
                if n.fract() != 0.0 || n < nf::MIN_N as f64 {
                    bail!("--n {n}: island indices are integers ≥ {}", nf::MIN_N);
                }
                Ok(n as u32)
            })
            .collect()
    }
}

struct Output {
    dir: PathBuf,
    files: Vec<String>,
}

impl Output {
    fn new(dir: PathBuf) -> Result<Self> {
        fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Output { dir, files: Vec::new() })
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut s = serde_json::to_string_pretty(value)?;
        s.push('\n');
        self.write(name, &s)
    }

    fn csv(&mut self, name: &str, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
        let mut s = header.join(",");
        s.push('\n');
        for r in rows {
            s.push_str(&r.join(","));
            s.push('\n');
        }
        self.write(name, &s)
    }

    fn write(&mut self, name: &str, body: &str) -> Result<()> {
        let path = self.dir.join(name);
        let mut f = fs::File::create(&path).with_context(|| format!("writing {}", path.display()))?;
        f.write_all(body.as_bytes())?;
        self.files.push(name.to_string());
        Ok(())
    }
}

fn row<I: IntoIterator<Item = T>, T: ToString>(xs: I) -> Vec<String> {
    xs.into_iter().map(|x| x.to_string()).collect()
}

fn main() {
    match run() {
        Ok(true) => {}
        Ok(false) => std::process::exit(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            std::process::exit(2);
        }
    }
}

/// Ok(false) when an acceptance check failed.
fn run() -> Result<bool> {
    let mut cli = Cli::parse();
    cli.common.merge_config()?;
    cli.common.validate()?;
    let threads = match cli.common.threads {
        Some(t) => Some(t),
        None => match std::env::var("BILLIARD_LAB_THREADS") {
            Ok(v) => Some(v.parse().map_err(|e| anyhow!("BILLIARD_LAB_THREADS={v:?}: {e}"))?),
            Err(_) => None,
        },
    };
    if let Some(t) = threads {
        rayon::ThreadPoolBuilder::new().num_threads(t).build_global()?;
    }
    let started = Instant::now();
    let mut out = Output::new(cli.common.out.clone().unwrap_or_else(|| PathBuf::from("out")))?;
    let c = &cli.common;
    let ok = match &cli.cmd {
        Cmd::Orbit { start } => orbit(c, start, &mut out)?,
        Cmd::ExpansionCheck { order } => expansion_check(c, *order, &mut out)?,
        Cmd::AdiabaticCheck => adiabatic_check(c, &mut out)?,
        Cmd::ReturnMap => return_map(c, &mut out)?,
        Cmd::NormalForm => normal_form(c, &mut out)?,
        Cmd::IslandScan { grid, scale } => island_scan(c, *grid, *scale, &mut out)?,
        Cmd::Sawtooth { m, delta, perturb, k, thin } => sawtooth(c, *m, *delta, *perturb, *k, *thin, &mut out)?,
        Cmd::FermiUlam { m, delta1 } => fermi_ulam(c, *m, *delta1, &mut out)?,
        Cmd::Acceptance { suite } => acceptance(suite, &mut out)?,
    };
    let files = out.files.clone();
    out.json(
        "manifest.json",
        &json!({
            "command": cli.cmd.name(),
            "arguments": &cli.cmd,
            "config": c,
            "threads": rayon::current_num_threads(),
            "version": env!("CARGO_PKG_VERSION"),
            "wall_time_s": started.elapsed().as_secs_f64(),
            "outputs": files,
            "passed": ok,
        }),
    )?;
    Ok(ok)
}

fn orbit(c: &Common, start: &str, out: &mut Output) -> Result<bool> {
    let (x, y) = start.split_once(',').ok_or_else(|| anyhow!("--start expects \"x,y\", got {start:?}"))?;
    let z0 = Point2::new(x.trim().parse::<f64>()?, y.trim().parse::<f64>()?);
    let steps = c.steps.unwrap_or(5);
    let beta = c.beta.unwrap_or(std::f64::consts::FRAC_PI_2);
    let shape = SectorShape::<f64>::from_f64(beta);
    let pts = shape.orbit(&z0, steps)?;
    let last = pts.last().map(|p| p.0.clone()).unwrap_or_else(|| z0.clone());
    let closure = last.dist(&z0);
    let tol = c.tol.unwrap_or(1e-9);
    out.csv(
        "orbit.csv",
        &["step", "x", "y", "support"],
        pts.iter().enumerate().map(|(i, (p, k))| row([i.to_string(), p.x.to_string(), p.y.to_string(), format!("{k:?}")])),
    )?;
    out.json("orbit.json", &json!({ "beta": beta, "start": [z0.x, z0.y], "steps": steps, "closure_residual": closure, "closed": closure < tol }))?;
    println!("{steps} steps from ({}, {}): closure residual {closure:.3e}", z0.x, z0.y);
    Ok(true)
}

fn expansion_check(c: &Common, order: u32, out: &mut Output) -> Result<bool> {
    let grid: Vec<f64> = (0..8).map(|k| 320.0 * 2f64.powi(k)).collect();
    let samples = c.seeds.unwrap_or(12);
    let mut fits = Vec::new();
    let mut rows = Vec::new();
    let (label, beta) = match c.beta {
        Some(b) if (b - std::f64::consts::FRAC_PI_2).abs() > 1e-12 => (format!("sector {b}"), Some(b)),
        _ => ("semidisc corrected".to_string(), None),
    };
    for reg in QUADRANTS {
        let f = match beta {
            None => semidisc_order_fit::<Mp>(reg, order, CoeffSet::Corrected, &grid, samples)?,
            Some(b) => sector_order_fit::<Mp>(&Mp::new(b), reg, order, &grid, samples)?,
        };
        println!("{label} {reg}: order {order}, slope r {:.3}, slope θ {:.3}", f.slope_r, f.slope_theta);
        for (r, er, et) in &f.rows {
            rows.push(row([reg.to_string(), r.to_string(), er.to_string(), et.to_string()]));
        }
        fits.push(json!({ "region": reg, "slope_r": f.slope_r, "slope_theta": f.slope_theta }));
    }
    out.csv("expansion.csv", &["region", "r", "max_err_r", "max_err_theta"], rows)?;
    out.json("expansion.json", &json!({ "family": label, "order": order, "fits": fits }))?;
    Ok(true)
}

fn adiabatic_check(c: &Common, out: &mut Output) -> Result<bool> {
    let rows = table_rows();
    out.csv(
        "tables.csv",
        &["region", "theta", "phi1", "phi1_d1", "phi1_d2", "phi1_d3", "phi2", "phi2_d1", "phi2_d2", "phi3", "phi3_d1", "psi", "psi_d1", "psi_d2", "psi_d3", "psi1", "psi1_d1", "psi1_d2", "psi2", "psi2_d1"],
        rows.iter().map(|r| {
            let mut v = vec![r.region.to_string(), r.theta.to_string()];
            v.extend(r.phi.iter().chain(&r.psi).map(|x| x.to_string()));
            v
        }),
    )?;
    let grid: Vec<f64> = (0..8).map(|k| 320.0 * 2f64.powi(k)).collect();
    let samples = c.seeds.unwrap_or(8);
    let mut drifts = Vec::new();
    match c.beta {
        Some(b) if (b - std::f64::consts::FRAC_PI_2).abs() > 1e-12 => {
            for reg in QUADRANTS {
                let fit = adiabatic_drift(&AdiabaticChart::sector(b, reg)?, 2, &grid, samples)?;
                println!("sector {b} {reg}: ρ slope {:.3}, ψ slope {:.3}", fit.slope_rho, fit.slope_psi);
                drifts.push(json!({ "chart": format!("sector {reg}"), "order": 2, "fit": fit }));
            }
        }
        _ => {
            for reg in QUADRANTS {
                let fit = adiabatic_drift(&AdiabaticChart::semidisc(reg, CoeffSet::Corrected)?, 3, &grid, samples)?;
                println!("semidisc {reg}: ρ slope {:.3}, ψ slope {:.3}", fit.slope_rho, fit.slope_psi);
                drifts.push(json!({ "chart": format!("semidisc {reg}"), "order": 3, "fit": fit }));
            }
            let ch = AdiabaticChart::semidisc(billiard_lab::RegionId::I, CoeffSet::Corrected)?.with_tail(&TailOptions::default())?;
            let fit = adiabatic_drift(&ch, 4, &grid, samples)?;
            println!("semidisc I with ODE tail: ρ slope {:.3}, ψ slope {:.3}", fit.slope_rho, fit.slope_psi);
            drifts.push(json!({ "chart": "semidisc I + tail", "order": 4, "fit": fit }));
        }
    }
    out.json("adiabatic.json", &json!({ "tables": rows, "drift": drifts }))?;
    Ok(true)
}

fn return_map(c: &Common, out: &mut Output) -> Result<bool> {
    let mut cycles = Vec::new();
    let mut rows = Vec::new();
    for n in c.n_list(&[1e4])? {
        let a = anchor_cycle(n);
        let got = passage_cycle(a[0], &TailConstants::default())?;
        let dev = a.iter().zip(&got).map(|(x, y)| (x.rho - y.rho).abs().max((x.phi - y.phi).abs())).fold(0.0, f64::max);
        println!("n = {n}: max deviation from the anchor cycle {dev:.3e} (n·dev = {:.3})", dev * n);
        for (i, (x, y)) in a.iter().zip(&got).enumerate() {
            rows.push(row([n, i as f64, x.rho, x.phi, y.rho, y.phi]));
        }
        cycles.push(json!({ "n": n, "anchors": a, "passages": got, "max_deviation": dev }));
    }
    out.csv("cycle.csv", &["n", "stage", "anchor_rho", "anchor_phi", "rho", "phi"], rows)?;
    let beta = c.beta.unwrap_or(std::f64::consts::FRAC_PI_2);
    let grid: Vec<f64> = (0..6).map(|k| 200.0 * 2f64.powi(k)).collect();
    let fit = sawtooth_residual(beta, &grid, c.seeds.unwrap_or(200))?;
    println!("β = {beta}: sawtooth residual slope {:.3}", fit.slope);
    out.json("return_map.json", &json!({ "cycles": cycles, "sawtooth_residual": { "beta": beta, "slope": fit.slope, "rows": fit.rows } }))?;
    Ok(true)
}

fn normal_form(c: &Common, out: &mut Output) -> Result<bool> {
    let ns = c.island_indices(&[160.0])?;
    let h = c.tol.unwrap_or(DEFAULT_STENCIL);
    let mut reports = Vec::new();
    for n in ns {
        let (_, _, _, _, rep) = nf::twist_pipeline(n, h)?;
        println!("n = {n}: det A = {:.9}, cos α = {:.6}, n²·Re α₂ = {:.5}", rep.det_a, rep.cos_alpha, rep.alpha2_times_n2);
        reports.push(rep);
    }
    out.csv(
        "normal_form.csv",
        &["n", "det_a", "cos_alpha", "alpha2_re", "alpha2_im", "alpha2_times_n2"],
        reports.iter().map(|r| row([r.n as f64, r.det_a, r.cos_alpha, r.alpha2_re, r.alpha2_im, r.alpha2_times_n2])),
    )?;
    if reports.len() == 1 {
        out.json("normal_form.json", &reports[0])?;
    } else {
        out.json("normal_form.json", &reports)?;
    }
    Ok(true)
}

fn island_scan(c: &Common, grid: usize, scale: f64, out: &mut Output) -> Result<bool> {
    if grid == 0 || scale.is_nan() || scale <= 0.0 {
        bail!("--grid and --scale must be positive");
    }
    let horizon = c.steps.unwrap_or(10_000);
    let mut scans = Vec::new();
    for n in c.island_indices(&[160.0])? {
        let fp = nf::find_fixed_point(n)?;
        let s = nf::island_scan(&fp, grid, scale, horizon);
        println!("n = {n}: {}/{} bounded for {horizon} returns", s.bounded, s.total);
        scans.push(s);
    }
    out.csv(
        "island_scan.csv",
        &["n", "grid", "scale", "horizon", "bounded", "total", "fraction"],
        scans.iter().map(|s| row([s.n as f64, s.grid as f64, s.scale, s.horizon as f64, s.bounded as f64, s.total as f64, s.fraction])),
    )?;
    out.json("island_scan.json", &scans)?;
    Ok(true)
}

#[allow(clippy::too_many_arguments)]
fn sawtooth(c: &Common, m: u32, delta: Option<f64>, perturb: Option<f64>, k: u32, thin: usize, out: &mut Output) -> Result<bool> {
    let sys = match delta {
        Some(d) => SawtoothSystem::new(d)?,
        None => SawtoothSystem::for_polygon(m)?,
    }
    .with_k(k);
    let seeds_n = c.seeds.unwrap_or(1000);
    let steps = c.steps.unwrap_or(1_000_000);
    let seed = c.seed.unwrap_or(0);
    let index = c.n_list(&[suites::BLOCKING_N as f64])?[0] as i64;
    let (barriers, bands) = match perturb {
        None => {
            let poly = match st::build_invariant_polygon(&sys, m, index) {
                Ok(p) => p,
                Err(billiard_lab::LabError::NotClosed(gap)) if delta.is_some() => {
                    println!("Δ = {}: rotation does not close (gap {gap:.3e}); using a regular stand-in", sys.delta);
                    st::regular_polygon(&sys, m, index)
                }
                Err(e) => return Err(e.into()),
            };
            println!("O_{index}: {} vertices, closure {:.2e}, isometry error {:.2e}", poly.vertices.len(), poly.vertex_closure(&sys), sys.isometry_error((1.0, 100.0), 1000, seed));
            (vec![poly], Vec::new())
        }
        Some(_) => {
            let bands: Vec<GBand> = (3..=4).map(|l| GBand::new(&sys, m, l)).collect::<Result<_, _>>()?;
            (bands.iter().map(|g| g.outer.clone()).collect(), bands)
        }
    };
    let r_hi = barriers.iter().map(|b| sys.deconjugate(b.r_min, 0.0).0).fold(f64::MAX, f64::min);
    let r_range = if perturb.is_some() { (0.5 * r_hi, r_hi) } else { (1.0, r_hi) };
    let seeds = st::left_seeds(&sys, &barriers, r_range, seeds_n, seed);
    let push = perturb.map(|cc| move |r: f64, _phi: f64| (cc / r, 0.0));
    if let Some(p) = &push {
        println!("perturbation constant sup R·|p| = {:.3e}", st::perturbation_constant(p, (10.0, 1e4), 1000));
    }
    let pref = push.as_ref().map(|p| p as &st::Perturbation);
    let (stats, orbits) = st::escape_experiment(&sys, &seeds, steps, &barriers, &bands, pref);
    println!("{} seeds × {} steps: {} crossings by {} orbits", stats.seeds, stats.steps, stats.crossings, stats.orbits_crossing);
    if !bands.is_empty() {
        println!("barrier entries {}, of which in the G band {}; max jump {:.3e} vs bound {:.3e}", stats.entries, stats.entries_in_band, stats.max_jump, bands.last().map(|b| b.jump_bound).unwrap_or(0.0));
    }
    out.csv(
        "sawtooth_orbits.csv",
        &["orbit", "r0", "phi0", "max_r", "crossings", "entries", "entries_in_band", "band_visits", "max_jump", "boundary_hits"],
        orbits.iter().enumerate().map(|(i, o)| {
            row([i.to_string(), o.seed.0.to_string(), o.seed.1.to_string(), o.max_r.to_string(), o.crossings.to_string(), o.entries.to_string(), o.entries_in_band.to_string(), o.band_visits.to_string(), o.max_jump.to_string(), o.boundary_hits.to_string()])
        }),
    )?;
    if thin > 0 {
        let (mut r, mut phi) = seeds[0];
        let mut rows = vec![row([0.0, r, phi])];
        for step in 1..=steps {
            for _ in 0..sys.k {
                (r, phi) = sys.step_raw(r, phi);
            }
            if let Some(cc) = perturb {
                r += cc / r;
            }
            if step % thin == 0 {
                rows.push(row([step as f64, r, phi]));
            }
        }
        out.csv("trace.csv", &["step", "R", "phi"], rows)?;
    }
    let mut max_r = stats.max_r.clone();
    max_r.sort_by(f64::total_cmp);
    let q = |p: f64| max_r[((max_r.len() - 1) as f64 * p).round() as usize];
    out.json(
        "sawtooth.json",
        &json!({
            "system": sys,
            "barriers": barriers,
            "seeds": stats.seeds,
            "steps": stats.steps,
            "crossings": stats.crossings,
            "orbits_crossing": stats.orbits_crossing,
            "recurrences": { "entries": stats.entries, "entries_in_band": stats.entries_in_band, "band_visits": stats.band_visits },
            "max_jump": stats.max_jump,
            "max_R_distribution": { "min": q(0.0), "median": q(0.5), "p90": q(0.9), "max": q(1.0) },
        }),
    )?;
    Ok(true)
}

fn fermi_ulam(c: &Common, m: u32, delta1: f64, out: &mut Output) -> Result<bool> {
    let sys = SawtoothSystem::for_polygon(m)?;
    let fu = FermiUlamModel::new(sys.delta, delta1);
    let index = c.n_list(&[suites::BLOCKING_N as f64])?[0] as i64;
    let poly = st::build_invariant_polygon(&sys, m, index)?;
    let seeds: Vec<(f64, f64)> = st::left_seeds(&sys, std::slice::from_ref(&poly), (1.0, index as f64), c.seeds.unwrap_or(1000), c.seed.unwrap_or(0))
        .into_iter()
        .map(|(r, phi)| (phi, r))
        .collect();
    let steps = c.steps.unwrap_or(1_000_000);
    let (hits, max_i) = st::fermi_ulam_barrier_test(&fu, &poly, &seeds, steps)?;
    let jumps = st::fermi_ulam_jump_bound(&fu, 5..=12, 2000)?;
    println!("Δ = {:.5}: {} orbits × {steps} steps, barrier hits {hits}, max I {max_i:.3}", fu.delta, seeds.len());
    for j in &jumps {
        println!("I = 4^{}: max jump {:.3e}, bound {:.3e}", j.level, j.max_jump, j.bound);
    }
    out.csv("fermi_ulam_jumps.csv", &["level", "energy", "max_jump", "bound"], jumps.iter().map(|j| row([j.level as f64, j.energy, j.max_jump, j.bound])))?;
    out.json("fermi_ulam.json", &json!({ "model": fu, "barrier_index": index, "orbits": seeds.len(), "steps": steps, "barrier_hits": hits, "max_energy": max_i, "jumps": jumps }))?;
    Ok(true)
}

fn acceptance(which: &str, out: &mut Output) -> Result<bool> {
    let ids: Vec<u8> = if which == "all" {
        SUITES.iter().map(|(i, _)| *i).collect()
    } else {
        which
            .split(',')
            .map(|s| suites::suite_id(s.trim()).ok_or_else(|| anyhow!("unknown suite {s:?}; choose from {}", SUITES.iter().map(|(_, n)| *n).collect::<Vec<_>>().join(", "))))
            .collect::<Result<_>>()?
    };
    let mut outcomes = Vec::new();
    for id in ids {
        let o = suites::run_suite(id)?;
        println!("{o}");
        outcomes.push(o);
    }
    let ok = outcomes.iter().all(|o| o.passed);
    out.json("acceptance.json", &outcomes)?;
    Ok(ok)
}
