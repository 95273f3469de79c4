use std::collections::HashMap;
use std::f64::consts::TAU;
use std::fmt::Write as _;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use log::{info, warn};
use mockfield::equilibria::{
    ec_gradient_residual, find_resonant_surface, regularized_comparison, singular_kernel, solve_beltrami,
    tearing_equilibrium, MultiplierSet, SlabEquilibrium,
};
use mockfield::expr::Expr;
use mockfield::field3d::{divergence_norm, Grid3D};
use mockfield::filaments::{
    advect_loop, circulation, co_advect, linking_number, AnalyticField, CoAdvectConfig, MarkerLoop,
};
use mockfield::findim::{extend_canonize, jacobi_residual, trajectory, unfreeze_sim, PoissonMatrixModel};
use mockfield::hierarchy::{self, RunConfig};
use mockfield::homology::{flux_through_cut, harmonic_winding_pairing_at, hodge_decompose, ChannelField};
use mockfield::invariants::{drift_report, InvariantSpec};
use mockfield::io::{read_loop_csv, write_loop_csv, write_series_csv, Snapshot};
use mockfield::tolerances;
use mockfield::{Hamiltonian2D, HierarchyState, ScalarField2D, SystemTag};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::report::{Artifacts, Check};
use crate::scenario::{
    Equilibrium, Evolve2d, Filament, FilamentMode, Findim, Hodge, Kind, LoopSpec, Scenario, Tearing,
};

/// A scenario with every input built and validated, ready to execute.
pub enum Prepared {
    Evolve2d { state: HierarchyState, h: Hamiltonian2D, cfg: RunConfig },
    Equilibrium(Equilibrium),
    Tearing { slab: SlabEquilibrium, x_r: f64, cfg: Tearing },
    Filament(FilamentJob),
    Hodge { u: ChannelField, cuts: usize },
    Findim(FindimJob),
}

pub enum FilamentJob {
    Analytic { field: AnalyticField, loops: Vec<MarkerLoop>, cfg: Filament },
    Hierarchy { state: HierarchyState, h: Hamiltonian2D, loops: Vec<MarkerLoop>, cfg: Filament },
}

pub struct FindimJob {
    model: PoissonMatrixModel,
    probes: Vec<Vec<f64>>,
    cfg: Findim,
}

/// Builds all inputs. `base` is the directory of the scenario file.
pub fn prepare(sc: &Scenario, base: &Path) -> Result<Prepared> {
    let p = match sc.kind {
        Kind::Evolve2d => prepare_evolve(sc.evolve2d.as_ref().unwrap(), sc.seed)?,
        Kind::Equilibrium => {
            let e = sc.equilibrium.clone().unwrap();
            Grid3D::new([e.n; 3], e.periods.unwrap_or([TAU; 3]))?;
            MultiplierSet { rho0: e.rho0, gamma: e.gamma, ..Default::default() }.validate()?;
            Prepared::Equilibrium(e)
        }
        Kind::Tearing => prepare_tearing(sc.tearing.clone().unwrap())?,
        Kind::Filament => prepare_filament(sc.filament.clone().unwrap(), sc.seed, base)?,
        Kind::Hodge => {
            let c: &Hodge = sc.hodge.as_ref().unwrap();
            let e = Expr::parse(&c.stream, &["x", "y"])?;
            let u = ChannelField::from_stream_function(c.nx, c.ny, c.lx, |x, y| e.eval(&[x, y]), c.mean_flow)?;
            if c.cuts == 0 {
                bail!("need at least one cut");
            }
            Prepared::Hodge { u, cuts: c.cuts }
        }
        Kind::Findim => prepare_findim(sc.findim.clone().unwrap(), sc.seed, base)?,
    };
    Ok(p)
}

fn prepare_evolve(c: &Evolve2d, seed: u64) -> Result<Prepared> {
    let invariants = c.specs()?;
    let h = c.flow.hamiltonian()?;
    let state = c.flow.initial_state(seed)?;
    if !(c.dt > 0.0) || !(c.t_end >= 0.0) || c.sample_every == 0 {
        bail!("need dt > 0, t_end >= 0 and sample_every >= 1");
    }
    let cfg = RunConfig { dt: c.dt, t_end: c.t_end, sample_every: c.sample_every, invariants, keep_states: false };
    Ok(Prepared::Evolve2d { state, h, cfg })
}

fn prepare_tearing(c: Tearing) -> Result<Prepared> {
    let slab = SlabEquilibrium::new(c.x_min, c.x_max, &c.by, &c.bz, c.k)?;
    let scan = find_resonant_surface(&slab, c.samples);
    let x_r = match scan.roots.as_slice() {
        [] => bail!("no resonant surface k . B = 0 in [{}, {}]", c.x_min, c.x_max),
        [x] => *x,
        [x, ..] => {
            warn!("{} resonant surfaces found, using x = {x}", scan.roots.len());
            *x
        }
    };
    Ok(Prepared::Tearing { slab, x_r, cfg: c })
}

fn build_loops(specs: &[LoopSpec], base: &Path, planar: bool) -> Result<Vec<MarkerLoop>> {
    specs
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let l = match s {
                LoopSpec::Circle(c) => MarkerLoop::circle(c.center, c.radius, c.e1, c.e2, c.markers)?,
                LoopSpec::Csv(p) => {
                    let path = base.join(p);
                    let f = std::fs::File::open(&path).with_context(|| format!("reading {}", path.display()))?;
                    read_loop_csv(std::io::BufReader::new(f))?
                }
            };
            if planar && l.points().iter().any(|p| p[2] != 0.0) {
                bail!("loop {i}: hierarchy mode needs loops in the z = 0 plane");
            }
            Ok(if planar && !l.is_planar() {
                MarkerLoop::planar(&l.points().iter().map(|p| [p[0], p[1]]).collect::<Vec<_>>())?
            } else {
                l
            })
        })
        .collect()
}

fn prepare_filament(c: Filament, seed: u64, base: &Path) -> Result<Prepared> {
    if !(c.dt > 0.0) || !(c.t_end >= 0.0) || c.sample_every == 0 {
        bail!("need dt > 0, t_end >= 0 and sample_every >= 1");
    }
    let job = match c.mode {
        FilamentMode::Analytic => {
            if c.flow.is_some() || !c.points.is_empty() {
                bail!("analytic mode takes `velocity` and `loops` only");
            }
            let v = c.velocity.as_ref().context("analytic mode needs `velocity`")?;
            let field = AnalyticField::parse([&v[0], &v[1], &v[2]])?;
            step_count(c.dt, c.t_end)?;
            let loops = build_loops(&c.loops, base, false)?;
            FilamentJob::Analytic { field, loops, cfg: c }
        }
        FilamentMode::Hierarchy => {
            if c.velocity.is_some() || c.kelvin {
                bail!("hierarchy mode takes a `flow`, not a `velocity`");
            }
            let flow = c.flow.as_ref().context("hierarchy mode needs a `flow` block")?;
            let h = flow.hamiltonian()?;
            let state = flow.initial_state(seed)?;
            let loops = build_loops(&c.loops, base, true)?;
            FilamentJob::Hierarchy { state, h, loops, cfg: c }
        }
    };
    Ok(Prepared::Filament(job))
}

fn step_count(dt: f64, t_end: f64) -> Result<usize> {
    let steps = (t_end / dt).round();
    if (steps * dt - t_end).abs() > 1e-9 * t_end.max(dt) {
        bail!("t_end = {t_end} is not a whole number of steps dt = {dt}");
    }
    Ok(steps as usize)
}

fn prepare_findim(c: Findim, seed: u64, base: &Path) -> Result<Prepared> {
    let spec = c.model.load(base)?;
    let model = PoissonMatrixModel::from_spec(&spec)?;
    if c.z0.len() != model.n() {
        bail!("z0 has {} entries, model has {} variables", c.z0.len(), model.n());
    }
    if c.theta0.len() != c.nu {
        bail!("theta0 needs {} angles", c.nu);
    }
    if c.nu == 0 && (c.h1.is_some() || c.epsilon != 0.0) {
        bail!("a perturbation needs nu >= 1");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let probes: Vec<Vec<f64>> = (0..c.probes)
        .map(|_| c.z0.iter().map(|z| z + c.probe_radius * rng.random_range(-1.0..1.0)).collect())
        .collect();
    if c.nu > 0 {
        let ext = extend_canonize(&model, c.nu, &probes)?;
        if let Some(h1) = &c.h1 {
            ext.parse_perturbation(h1)?;
        }
    }
    Ok(Prepared::Findim(FindimJob { model, probes, cfg: c }))
}

/// Runs a prepared scenario, writing its data files, and returns the checks.
pub fn execute(p: Prepared, out: &mut Artifacts) -> Result<Vec<Check>> {
    match p {
        Prepared::Evolve2d { state, h, cfg } => run_evolve(&state, &h, &cfg, out),
        Prepared::Equilibrium(c) => run_equilibrium(&c, out),
        Prepared::Tearing { slab, x_r, cfg } => run_tearing(&slab, x_r, &cfg, out),
        Prepared::Filament(FilamentJob::Analytic { field, loops, cfg }) => run_analytic_loops(&field, loops, &cfg, out),
        Prepared::Filament(FilamentJob::Hierarchy { state, h, loops, cfg }) => {
            run_co_advection(&state, &h, &loops, &cfg, out)
        }
        Prepared::Hodge { u, cuts } => run_hodge(&u, cuts, out),
        Prepared::Findim(job) => run_findim(&job, out),
    }
}

fn write_snapshot(out: &mut Artifacts, name: &str, f: &ScalarField2D) -> Result<()> {
    out.write_with(name, |w| Snapshot::from_scalar(f).write_csv(w))
}

fn run_evolve(state: &HierarchyState, h: &Hamiltonian2D, cfg: &RunConfig, out: &mut Artifacts) -> Result<Vec<Check>> {
    info!("system {} on {}x{}, t_end = {}", state.tag(), state.omega().nx(), state.omega().ny(), cfg.t_end);
    let traj = match hierarchy::run(state, h, cfg) {
        Ok(t) => t,
        Err(f) => {
            out.write_with("invariants.csv", |w| write_series_csv(&f.partial.series, w))?;
            return Err(anyhow!(f));
        }
    };
    out.write_with("invariants.csv", |w| write_series_csv(&traj.series, w))?;
    let last = traj.samples.last().context("run kept no final state")?;
    write_snapshot(out, "final_omega.csv", last.omega())?;
    if let Some(p) = last.psi() {
        write_snapshot(out, "final_psi.csv", p)?;
    }
    if let Some(p) = last.psicheck() {
        write_snapshot(out, "final_psicheck.csv", p)?;
    }
    let tol: HashMap<String, f64> = cfg.invariants.iter().map(|s: &InvariantSpec| (s.name(), s.tolerance())).collect();
    let report = drift_report(&traj.series, |n| tol[n]);
    Ok(report.entries.into_iter().map(|e| Check::new(e.name, e.role.to_string(), e.drift, e.tolerance)).collect())
}

fn run_equilibrium(c: &Equilibrium, out: &mut Artifacts) -> Result<Vec<Check>> {
    let grid = Grid3D::new([c.n; 3], c.periods.unwrap_or([TAU; 3]))?;
    let sol = solve_beltrami(&grid, c.mu_target)?;
    let b = &sol.field;
    let speed = c.mu3 / c.rho0;
    let base = MultiplierSet { mu3: c.mu3, mu4: c.mu4, rho0: c.rho0, gamma: c.gamma, ..Default::default() };
    let b2 = b.norm_sq_pointwise();
    let b2_mean = b2.iter().sum::<f64>() / b2.len() as f64;
    let m = MultiplierSet {
        mu1: 0.5 * speed * speed * b2_mean + base.enthalpy(c.rho0),
        mu2: sol.mu * (1.0 - c.mu3 * c.mu3 / c.rho0) - c.mu4,
        ..base
    };
    let rho = vec![c.rho0; grid.len()];
    let v = b.scale(speed);
    let mock = (c.mu4 != 0.0).then_some(b);
    let r = ec_gradient_residual(&rho, &v, b, mock, &m)?;

    out.write_json("multipliers.json", &json!({ "eigenvalue": sol.mu, "mode": sol.mode, "multipliers": m }))?;
    let mut s = String::from("x,y,bx,by,bz\n");
    for j in 0..grid.n[1] {
        for i in 0..grid.n[0] {
            let idx = grid.index(i, j, 0);
            let p = grid.point(idx);
            let _ = writeln!(s, "{},{},{},{},{}", p[0], p[1], b.comp(0)[idx], b.comp(1)[idx], b.comp(2)[idx]);
        }
    }
    out.write("slice.csv", s.as_bytes())?;

    let res = tolerances::BELTRAMI_RESIDUAL;
    Ok(vec![
        Check::new("beltrami", "residual", sol.residual, res),
        Check::new("divergence", "residual", divergence_norm(b), tolerances::SOLENOIDAL),
        Check::new("bernoulli", "residual", r.bernoulli, res),
        Check::new("momentum", "residual", r.momentum, res),
        Check::new("curl", "residual", r.curl, res),
    ])
}

fn run_tearing(slab: &SlabEquilibrium, x_r: f64, c: &Tearing, out: &mut Artifacts) -> Result<Vec<Check>> {
    let c0 = Complex64::new(c.c0[0], c.c0[1]);
    let c1 = Complex64::new(c.c1[0], c.c1[1]);
    let kernel = singular_kernel(slab, x_r, c0, c1)?;
    let t = tearing_equilibrium(slab, &kernel, c.mu2, c.mu4, c.nodes)?;

    let mut s = String::from("x,By,Bz,bx_re,bx_im,by_re,by_im,bz_re,bz_im\n");
    for (x, b) in t.x.iter().zip(&t.b) {
        let _ = write!(s, "{x},{},{}", slab.by(*x), slab.bz(*x));
        for v in b {
            let _ = write!(s, ",{},{}", v.re, v.im);
        }
        s.push('\n');
    }
    out.write("profile.csv", s.as_bytes())?;
    out.write_json(
        "sheet.json",
        &json!({
            "x_r": x_r,
            "sheet_strength": [kernel.sheet_strength.re, kernel.sheet_strength.im],
            "forcing": [t.solution.forcing.re, t.solution.forcing.im],
            "q2": t.solution.q2,
        }),
    )?;

    let scale = slab.resonance_scale().max(f64::MIN_POSITIVE);
    let mut checks = vec![
        Check::new("resonance", "k.B at x_r", slab.resonance_function(x_r).abs() / scale, tolerances::RESONANCE),
        Check::new("jump", "jump mismatch", t.jump.relative_mismatch, tolerances::JUMP_MISMATCH),
        Check::new("interior", "residual", t.interior_residual, tolerances::INTERIOR_RESIDUAL),
    ];
    let mut errs = Vec::new();
    for &n in &c.compare_nodes {
        let r = regularized_comparison(&t.solution, n)?;
        checks.push(Check::new(
            format!("regularized[{n}]"),
            "solver agreement",
            r.mismatch_outside,
            tolerances::REGULARIZED_AGREEMENT,
        ));
        errs.push((n, r.mismatch_outside));
    }
    // Successive refinements should shrink the mismatch at second order.
    // Without a perturbation both solvers return zero and there is no rate.
    if c.mu4 != 0.0 {
        for w in errs.windows(2) {
            let ((n0, e0), (n1, e1)) = (w[0], w[1]);
            let order = (e0 / e1).ln() / (n1 as f64 / n0 as f64).ln();
            checks.push(Check::new(format!("order[{n0}->{n1}]"), "distance from 2", (order - 2.0).abs(), 0.2));
        }
    }
    Ok(checks)
}

fn relative_drift(series: impl Iterator<Item = f64> + Clone) -> f64 {
    let mut it = series.clone();
    let Some(v0) = it.next() else { return 0.0 };
    series.map(|v| (v - v0).abs()).fold(0.0, f64::max) / v0.abs().max(1.0)
}

fn write_table(out: &mut Artifacts, name: &str, header: &[String], times: &[f64], rows: &[Vec<f64>]) -> Result<()> {
    let mut s = String::from("t");
    for h in header {
        s.push(',');
        s.push_str(h);
    }
    s.push('\n');
    for (t, row) in times.iter().zip(rows) {
        s.push_str(&t.to_string());
        for v in row {
            s.push(',');
            s.push_str(&v.to_string());
        }
        s.push('\n');
    }
    out.write(name, s.as_bytes())
}

fn write_loops(out: &mut Artifacts, loops: &[MarkerLoop]) -> Result<()> {
    for (i, l) in loops.iter().enumerate() {
        out.write_with(&format!("loop{i}_final.csv"), |w| write_loop_csv(l, w))?;
    }
    Ok(())
}

fn run_analytic_loops(
    field: &AnalyticField,
    mut loops: Vec<MarkerLoop>,
    c: &Filament,
    out: &mut Artifacts,
) -> Result<Vec<Check>> {
    let steps = step_count(c.dt, c.t_end)?;
    let link_all = |ls: &[MarkerLoop]| -> Result<Vec<(usize, usize, f64, i64)>> {
        let mut v = Vec::new();
        for i in 0..ls.len() {
            for j in i + 1..ls.len() {
                let r = linking_number(&ls[i], &ls[j])?;
                v.push((i, j, r.raw, r.integer));
            }
        }
        Ok(v)
    };
    let before = link_all(&loops)?;

    let circ = |ls: &[MarkerLoop], t: f64| -> Result<Vec<f64>> { ls.iter().map(|l| Ok(circulation(field, l, t)?)).collect() };
    let mut times = vec![0.0];
    let mut rows = vec![circ(&loops, 0.0)?];
    let mut done = 0;
    while done < steps {
        let chunk = c.sample_every.min(steps - done);
        let t0 = done as f64 * c.dt;
        loops = loops.iter().map(|l| advect_loop(l, field, t0, c.dt, chunk, c.resample)).collect::<mockfield::Result<_>>()?;
        done += chunk;
        let t = done as f64 * c.dt;
        times.push(t);
        rows.push(circ(&loops, t)?);
    }
    let after = link_all(&loops)?;

    let names: Vec<String> = (0..loops.len()).map(|i| format!("loop{i}")).collect();
    write_table(out, "circulation.csv", &names, &times, &rows)?;
    let mut s = String::from("i,j,raw_initial,integer_initial,raw_final,integer_final\n");
    for (a, b) in before.iter().zip(&after) {
        let _ = writeln!(s, "{},{},{},{},{},{}", a.0, a.1, a.2, a.3, b.2, b.3);
    }
    out.write("linking.csv", s.as_bytes())?;
    write_loops(out, &loops)?;

    let mut checks = Vec::new();
    for (a, b) in before.iter().zip(&after) {
        let name = format!("link[{},{}]", a.0, a.1);
        checks.push(Check::new(
            format!("{name}@0"),
            "linking integrality",
            (a.2 - a.3 as f64).abs(),
            tolerances::LINKING_INTEGRALITY,
        ));
        // Staying within half a unit of the initial integer means the topology held.
        checks.push(Check::new(name, "linking number", (b.2 - a.3 as f64).abs(), 0.5));
    }
    if c.kelvin {
        for (i, n) in names.iter().enumerate() {
            let d = relative_drift(rows.iter().map(|r| r[i]));
            checks.push(Check::new(format!("circulation[{n}]"), "Kelvin", d, tolerances::CIRCULATION_DRIFT));
        }
    }
    Ok(checks)
}

fn run_co_advection(
    state: &HierarchyState,
    h: &Hamiltonian2D,
    loops: &[MarkerLoop],
    c: &Filament,
    out: &mut Artifacts,
) -> Result<Vec<Check>> {
    let cfg = CoAdvectConfig { dt: c.dt, t_end: c.t_end, sample_every: c.sample_every, resample: c.resample };
    let r = co_advect(state, h, loops, &c.points, &cfg)?;

    let loop_names: Vec<String> = (0..loops.len()).map(|i| format!("loop{i}")).collect();
    let point_names: Vec<String> = (0..c.points.len()).map(|i| format!("point{i}")).collect();
    write_table(out, "circulation.csv", &loop_names, &r.times, &r.circulations)?;
    write_table(out, "points.csv", &point_names, &r.times, &r.point_values)?;
    write_loops(out, &r.loops)?;

    let mut checks = Vec::new();
    // Kelvin's theorem holds for the vortex system only.
    if state.tag() == SystemTag::I {
        for (i, n) in loop_names.iter().enumerate() {
            let d = relative_drift(r.circulations.iter().map(|row| row[i]));
            checks.push(Check::new(format!("circulation[{n}]"), "Kelvin", d, tolerances::CIRCULATION_DRIFT));
        }
    }
    for (i, n) in point_names.iter().enumerate() {
        let d = relative_drift(r.point_values.iter().map(|row| row[i]));
        checks.push(Check::new(format!("sample[{n}]"), "Casimir", d, tolerances::POINT_SAMPLE_DRIFT));
    }
    Ok(checks)
}

fn run_hodge(u: &ChannelField, cuts: usize, out: &mut Artifacts) -> Result<Vec<Check>> {
    let (harm, sol) = hodge_decompose(u)?;
    let lx = u.lx();
    let xs: Vec<f64> = (0..cuts).map(|i| (i as f64 + 0.5) * lx / cuts as f64).collect();
    let mut s = String::from("x,flux,pairing,solenoidal_flux\n");
    let mut fluxes = Vec::new();
    let (mut pair_err, mut sol_flux) = (0.0f64, 0.0f64);
    for &x in &xs {
        let f = flux_through_cut(u, x);
        let p = harmonic_winding_pairing_at(u, x);
        let fs = flux_through_cut(&sol, x);
        let _ = writeln!(s, "{x},{f},{p},{fs}");
        fluxes.push(f);
        pair_err = pair_err.max((p - f).abs());
        sol_flux = sol_flux.max(fs.abs());
    }
    out.write("fluxes.csv", s.as_bytes())?;
    out.write_with("field.csv", |w| Snapshot::from_channel(u).write_csv(w))?;
    out.write_with("harmonic.csv", |w| Snapshot::from_channel(&harm).write_csv(w))?;
    out.write_with("solenoidal.csv", |w| Snapshot::from_channel(&sol).write_csv(w))?;

    let lo = fluxes.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = fluxes.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let orth = harm.inner(&sol)?.abs() / u.norm_sq().max(1.0);
    Ok(vec![
        Check::new("divergence", "admissibility", u.divergence_norm(), tolerances::SOLENOIDAL),
        Check::new("wall_normal", "admissibility", u.wall_normal_max(), tolerances::SOLENOIDAL),
        Check::new("orthogonality", "decomposition", orth, tolerances::HODGE_ORTHOGONALITY),
        Check::new("flux_spread", "cut independence", hi - lo, tolerances::FLUX_INDEPENDENCE),
        Check::new("pairing", "winding pairing", pair_err, tolerances::WINDING_PAIRING),
        Check::new("solenoidal_flux", "cut independence", sol_flux, tolerances::FLUX_INDEPENDENCE),
    ])
}

fn run_findim(job: &FindimJob, out: &mut Artifacts) -> Result<Vec<Check>> {
    let (m, c) = (&job.model, &job.cfg);
    let mut checks = vec![
        Check::new("antisymmetry", "structure", m.antisymmetry_residual(&job.probes), tolerances::JACOBI),
        Check::new("jacobi", "structure", jacobi_residual(m, &job.probes), tolerances::JACOBI),
        Check::new("casimirs", "structure", m.casimir_residual(&job.probes), tolerances::JACOBI),
    ];
    if c.nu == 0 {
        let (times, states) = trajectory(m, &c.z0, c.dt, c.t_end, c.sample_every)?;
        let ncas = m.casimirs().len();
        let rows: Vec<Vec<f64>> = states
            .iter()
            .map(|z| {
                let mut row = z.clone();
                row.extend(m.casimirs().iter().map(|e| e.eval(z)));
                row.push(m.energy(z));
                row
            })
            .collect();
        let mut header: Vec<String> = m.vars().to_vec();
        header.extend((0..ncas).map(|i| format!("C{}", i + 1)));
        header.push("H".into());
        write_table(out, "trajectory.csv", &header, &times, &rows)?;
        let width = m.n();
        checks.push(Check::new("H", "energy", relative_drift(rows.iter().map(|r| r[width + ncas])), tolerances::ENERGY_DRIFT));
        for k in 0..ncas {
            let d = relative_drift(rows.iter().map(|r| r[width + k]));
            checks.push(Check::new(format!("C{}", k + 1), "Casimir", d, tolerances::CASIMIR_DRIFT));
        }
    } else {
        let ext = extend_canonize(m, c.nu, &job.probes)?;
        let h1 = c.h1.as_deref().map(|s| ext.parse_perturbation(s)).transpose()?;
        let r = unfreeze_sim(&ext, h1.as_ref(), c.epsilon, &c.z0, &c.theta0, c.dt, c.t_end, c.sample_every)?;
        let rows: Vec<Vec<f64>> = r
            .states
            .iter()
            .zip(&r.energy)
            .map(|(z, e)| {
                let mut row = z.clone();
                row.push(*e);
                row
            })
            .collect();
        let mut header: Vec<String> = ext.vars().to_vec();
        header.push("H".into());
        write_table(out, "trajectory.csv", &header, &r.times, &rows)?;
        let e_drift = relative_drift(r.energy.iter().cloned());
        checks.push(Check::new("H", "energy", e_drift, tolerances::ENERGY_DRIFT));
        // With a perturbation switched on the former Casimirs are meant to move.
        if h1.is_none() || c.epsilon == 0.0 {
            for (k, idx) in ext.casimir_indices().enumerate() {
                let d = relative_drift(r.casimirs.iter().map(|row| row[k]));
                checks.push(Check::new(ext.vars()[idx].clone(), "Casimir", d, tolerances::CASIMIR_DRIFT));
            }
        }
    }
    Ok(checks)
}
