//! Time evolution of the two-dimensional vortex hierarchy:
//!
//! * system I, state `omega`, bracket `{omega, .}` (Euler vorticity);
//! * system II, state `(omega, psi)` (reduced MHD);
//! * system III, state `(omega, psi, psicheck)` where `psicheck` is a mock
//!   field: advected exactly like `psi` but absent from every Hamiltonian.
//!
//! Right-hand sides are assembled in Fourier space with 2/3-rule dealiasing,
//! which makes every quadratic invariant an exact invariant of the
//! semi-discrete system; the only drift left is the RK4 time error.

use std::f64::consts::TAU;

use log::warn;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::invariants::{self, InvariantSeries, InvariantSpec};
use crate::spectral2d::{self, plan, Axis, Plan2D, ScalarField2D};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SystemTag {
    #[serde(rename = "I")]
    I,
    #[serde(rename = "II")]
    II,
    #[serde(rename = "III")]
    III,
}

impl std::fmt::Display for SystemTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SystemTag::I => "I",
            SystemTag::II => "II",
            SystemTag::III => "III",
        })
    }
}

impl std::str::FromStr for SystemTag {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "I" | "1" => Ok(SystemTag::I),
            "II" | "2" => Ok(SystemTag::II),
            "III" | "3" => Ok(SystemTag::III),
            other => Err(Error::Config(format!("unknown system tag `{other}`"))),
        }
    }
}

/// Tagged state vector of the hierarchy.
#[derive(Debug, Clone, PartialEq)]
pub struct HierarchyState {
    tag: SystemTag,
    omega: ScalarField2D,
    psi: Option<ScalarField2D>,
    psicheck: Option<ScalarField2D>,
    pub time: f64,
}

impl HierarchyState {
    pub fn system_i(omega: ScalarField2D) -> Result<Self> {
        Self::build(SystemTag::I, omega, None, None)
    }

    pub fn system_ii(omega: ScalarField2D, psi: ScalarField2D) -> Result<Self> {
        Self::build(SystemTag::II, omega, Some(psi), None)
    }

    pub fn system_iii(
        omega: ScalarField2D,
        psi: ScalarField2D,
        psicheck: ScalarField2D,
    ) -> Result<Self> {
        Self::build(SystemTag::III, omega, Some(psi), Some(psicheck))
    }

    fn build(
        tag: SystemTag,
        mut omega: ScalarField2D,
        psi: Option<ScalarField2D>,
        psicheck: Option<ScalarField2D>,
    ) -> Result<Self> {
        omega.assert_zero_mean()?;
        for f in psi.iter().chain(psicheck.iter()) {
            omega.check_same_grid(f)?;
        }
        Ok(Self { tag, omega, psi, psicheck, time: 0.0 })
    }

    pub fn tag(&self) -> SystemTag {
        self.tag
    }
    pub fn omega(&self) -> &ScalarField2D {
        &self.omega
    }
    pub fn psi(&self) -> Option<&ScalarField2D> {
        self.psi.as_ref()
    }
    pub fn psicheck(&self) -> Option<&ScalarField2D> {
        self.psicheck.as_ref()
    }

    /// Projects every field onto the 2/3-rule band.
    pub fn dealiased(&self) -> Self {
        Self {
            tag: self.tag,
            omega: self.omega.dealiased(),
            psi: self.psi.as_ref().map(ScalarField2D::dealiased),
            psicheck: self.psicheck.as_ref().map(ScalarField2D::dealiased),
            time: self.time,
        }
    }

    fn fields(&self) -> impl Iterator<Item = &ScalarField2D> {
        std::iter::once(&self.omega).chain(self.psi.iter()).chain(self.psicheck.iter())
    }

    fn is_finite(&self) -> bool {
        self.fields().all(|f| f.values().iter().all(|v| v.is_finite()))
    }

    /// `self + alpha * rate`, on raw samples.
    pub(crate) fn advanced(&self, alpha: f64, rate: &Tendency) -> Self {
        fn add(f: &ScalarField2D, alpha: f64, d: &[f64]) -> ScalarField2D {
            let mut out = f.clone();
            for (v, dv) in out.values_mut().iter_mut().zip(d) {
                *v += alpha * dv;
            }
            out
        }
        Self {
            tag: self.tag,
            omega: add(&self.omega, alpha, &rate.d_omega),
            psi: self.psi.as_ref().map(|f| add(f, alpha, rate.d_psi.as_deref().unwrap_or(&[]))),
            psicheck: self
                .psicheck
                .as_ref()
                .map(|f| add(f, alpha, rate.d_psicheck.as_deref().unwrap_or(&[]))),
            time: self.time + alpha,
        }
    }

    /// Maximum of `|a - b|` over all fields, `None` if tags differ.
    pub fn max_abs_diff(&self, other: &Self) -> Option<f64> {
        if self.tag != other.tag {
            return None;
        }
        let d = self
            .fields()
            .zip(other.fields())
            .flat_map(|(a, b)| a.values().iter().zip(b.values()).map(|(p, q)| (p - q).abs()))
            .fold(0.0_f64, f64::max);
        Some(d)
    }

    /// Largest sample magnitude over all fields.
    pub fn max_abs(&self) -> f64 {
        self.fields().map(ScalarField2D::max_abs).fold(0.0, f64::max)
    }
}

/// Which field a Hamiltonian term acts on. There is deliberately no way to
/// make a valid [`CustomHamiltonian`] depend on `psicheck`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FieldRef {
    Omega,
    Psi,
    Psicheck,
}

/// Quadratic functionals available to custom Hamiltonians.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuadraticForm {
    /// `1/2 int f^2`, gradient `f`.
    Mass,
    /// `1/2 int |grad f|^2`, gradient `-Laplacian f`.
    Dirichlet,
    /// `1/2 int f (-Laplacian)^{-1} f`, gradient `-Laplacian^{-1} f` (mean-free part).
    Kinetic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadraticTerm {
    pub field: FieldRef,
    pub form: QuadraticForm,
    pub weight: f64,
}

/// A Hamiltonian built from quadratic terms in `omega` and `psi` only.
#[derive(Debug, Clone, PartialEq)]
pub struct CustomHamiltonian {
    terms: Vec<QuadraticTerm>,
}

impl CustomHamiltonian {
    pub fn new(terms: Vec<QuadraticTerm>) -> Result<Self> {
        if let Some(t) = terms.iter().find(|t| t.field == FieldRef::Psicheck) {
            return Err(Error::MockFieldInHamiltonian(format!("{:?} term on psicheck", t.form)));
        }
        Ok(Self { terms })
    }

    pub fn terms(&self) -> &[QuadraticTerm] {
        &self.terms
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Hamiltonian2D {
    /// `H_E = -1/2 int omega Laplacian^{-1} omega`.
    Euler,
    /// `H_RMHD = -1/2 int [omega Laplacian^{-1} omega + psi Laplacian psi]`.
    Rmhd,
    Custom(CustomHamiltonian),
}

impl Hamiltonian2D {
    fn terms(&self) -> Vec<QuadraticTerm> {
        let kinetic = QuadraticTerm { field: FieldRef::Omega, form: QuadraticForm::Kinetic, weight: 1.0 };
        match self {
            Hamiltonian2D::Euler => vec![kinetic],
            Hamiltonian2D::Rmhd => vec![
                kinetic,
                QuadraticTerm { field: FieldRef::Psi, form: QuadraticForm::Dirichlet, weight: 1.0 },
            ],
            Hamiltonian2D::Custom(c) => c.terms.clone(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Hamiltonian2D::Euler => "euler",
            Hamiltonian2D::Rmhd => "rmhd",
            Hamiltonian2D::Custom(_) => "custom",
        }
    }

    pub fn check_compatible(&self, tag: SystemTag) -> Result<()> {
        let needs_psi = self.terms().iter().any(|t| t.field == FieldRef::Psi);
        if needs_psi && tag == SystemTag::I {
            return Err(Error::Config(format!(
                "Hamiltonian `{}` depends on psi, which system I does not carry",
                self.name()
            )));
        }
        Ok(())
    }

    /// Value of the Hamiltonian by quadrature.
    pub fn value(&self, state: &HierarchyState) -> Result<f64> {
        self.check_compatible(state.tag)?;
        let mut total = 0.0;
        for t in self.terms() {
            let f = match t.field {
                FieldRef::Omega => &state.omega,
                FieldRef::Psi => state.psi.as_ref().expect("checked compatible"),
                FieldRef::Psicheck => unreachable!("rejected at construction"),
            };
            let g = form_gradient(f, t.form)?;
            let density = f.zip_map(&g, |a, b| a * b)?;
            total += 0.5 * t.weight * density.integrate();
        }
        Ok(total)
    }
}

/// Functional derivatives of a Hamiltonian. There is no `psicheck` slot:
/// `dH/dpsicheck = 0` for every admissible Hamiltonian.
#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianGradient {
    pub d_omega: ScalarField2D,
    pub d_psi: Option<ScalarField2D>,
}

fn form_gradient(f: &ScalarField2D, form: QuadraticForm) -> Result<ScalarField2D> {
    match form {
        QuadraticForm::Mass => Ok(f.clone()),
        QuadraticForm::Dirichlet => Ok(spectral2d::laplacian(f)?.scale(-1.0)),
        QuadraticForm::Kinetic => {
            let mut g = f.clone();
            g.remove_mean();
            Ok(spectral2d::invert_laplacian(&g)?.scale(-1.0))
        }
    }
}

pub fn grad_h(state: &HierarchyState, h: &Hamiltonian2D) -> Result<HamiltonianGradient> {
    h.check_compatible(state.tag)?;
    let zeros = || ScalarField2D::zeros(state.omega.nx(), state.omega.ny(), state.omega.lx(), state.omega.ly());
    let mut d_omega = zeros()?;
    let mut d_psi = match state.tag {
        SystemTag::I => None,
        _ => Some(zeros()?),
    };
    for t in h.terms() {
        match t.field {
            FieldRef::Omega => {
                d_omega = d_omega.axpy(t.weight, &form_gradient(&state.omega, t.form)?)?;
            }
            FieldRef::Psi => {
                let psi = state.psi.as_ref().expect("checked compatible");
                let acc = d_psi.as_mut().expect("checked compatible");
                *acc = acc.axpy(t.weight, &form_gradient(psi, t.form)?)?;
            }
            FieldRef::Psicheck => unreachable!("rejected at construction"),
        }
    }
    Ok(HamiltonianGradient { d_omega, d_psi })
}

/// Time derivative of a [`HierarchyState`], as raw grid samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Tendency {
    pub d_omega: Vec<f64>,
    pub d_psi: Option<Vec<f64>>,
    pub d_psicheck: Option<Vec<f64>>,
}

/// Spectral gradient pair `(f_x, f_y)` of a band-truncated field.
struct Grads {
    x: Vec<f64>,
    y: Vec<f64>,
}

fn grads(p: &Plan2D, spec: &[Complex64], lx: f64, ly: f64) -> Grads {
    let mut s = spec.to_vec();
    p.truncate(&mut s);
    let (x, y) = p.inverse_pair(&p.deriv_spec(&s, Axis::X, lx, ly), &p.deriv_spec(&s, Axis::Y, lx, ly));
    Grads { x, y }
}

/// Accumulates `{a, b} = a_y b_x - a_x b_y` into `acc`.
fn add_bracket(acc: &mut [f64], a: &Grads, b: &Grads) {
    for i in 0..acc.len() {
        acc[i] += a.y[i] * b.x[i] - a.x[i] * b.y[i];
    }
}

fn band_limit(p: &Plan2D, spec: &mut [Complex64]) {
    p.truncate(spec);
    spec[0] = Complex64::new(0.0, 0.0);
}

/// Spectrum of `weight * dF/df` for one quadratic term.
fn add_form_gradient(acc: &mut [Complex64], spec: &[Complex64], k2: &[f64], form: QuadraticForm, weight: f64) {
    for i in 0..acc.len() {
        let m = match form {
            QuadraticForm::Mass => 1.0,
            QuadraticForm::Dirichlet => k2[i],
            QuadraticForm::Kinetic if k2[i] == 0.0 => 0.0,
            QuadraticForm::Kinetic => 1.0 / k2[i],
        };
        acc[i] += spec[i] * (weight * m);
    }
}

/// Right-hand side of the Hamiltonian system for the state's tag.
pub fn rhs(state: &HierarchyState, h: &Hamiltonian2D) -> Result<Tendency> {
    h.check_compatible(state.tag)?;
    let om = &state.omega;
    let (lx, ly) = (om.lx(), om.ly());
    let p = plan(om.nx(), om.ny());
    let n = om.values().len();
    let k2 = p.k2(lx, ly);
    let zero = Complex64::new(0.0, 0.0);

    // omega is always transformed on its own so that system II with psi = 0
    // reproduces system I exactly; psi and psicheck share transforms.
    let w_s = p.forward(om.values());
    let (psi_s, pc_s) = match (&state.psi, &state.psicheck) {
        (Some(psi), Some(pc)) => {
            let (a, b) = p.forward_pair(psi.values(), pc.values());
            (Some(a), Some(b))
        }
        (Some(psi), None) => (Some(p.forward(psi.values())), None),
        _ => (None, None),
    };
    let mut phi_s = vec![zero; n];
    let mut cur_s = psi_s.as_ref().map(|_| vec![zero; n]);
    for t in h.terms() {
        match t.field {
            FieldRef::Omega => add_form_gradient(&mut phi_s, &w_s, &k2, t.form, t.weight),
            FieldRef::Psi => {
                let acc = cur_s.as_mut().expect("checked compatible");
                add_form_gradient(acc, psi_s.as_ref().expect("checked compatible"), &k2, t.form, t.weight);
            }
            FieldRef::Psicheck => unreachable!("rejected at construction"),
        }
    }

    let h_w = grads(&p, &phi_s, lx, ly);
    let mut d_omega = vec![0.0; n];
    add_bracket(&mut d_omega, &grads(&p, &w_s, lx, ly), &h_w);
    let mut d_psi = None;
    if let (Some(ps), Some(cs)) = (&psi_s, &cur_s) {
        let ps = grads(&p, ps, lx, ly);
        add_bracket(&mut d_omega, &ps, &grads(&p, cs, lx, ly));
        let mut dp = vec![0.0; n];
        add_bracket(&mut dp, &ps, &h_w);
        d_psi = Some(dp);
    }
    // {psicheck, dH/dpsicheck} vanishes identically and is not formed.
    let d_psicheck = pc_s.map(|pc| {
        let mut dpc = vec![0.0; n];
        add_bracket(&mut dpc, &grads(&p, &pc, lx, ly), &h_w);
        dpc
    });

    let mut a = p.forward(&d_omega);
    band_limit(&p, &mut a);
    let d_omega = p.inverse(a);
    let (d_psi, d_psicheck) = match (d_psi, d_psicheck) {
        (Some(dp), Some(dpc)) => {
            let (mut a, mut b) = p.forward_pair(&dp, &dpc);
            band_limit(&p, &mut a);
            band_limit(&p, &mut b);
            let (ps, pc) = p.inverse_pair(&a, &b);
            (Some(ps), Some(pc))
        }
        (Some(dp), None) => {
            let mut a = p.forward(&dp);
            band_limit(&p, &mut a);
            (Some(p.inverse(a)), None)
        }
        _ => (None, None),
    };
    Ok(Tendency { d_omega, d_psi, d_psicheck })
}

/// Largest signal speed `max(|V|, |B|)` with `V = (phi_y, -phi_x)`,
/// `B = (psi_y, -psi_x)`.
pub fn max_signal_speed(state: &HierarchyState, h: &Hamiltonian2D) -> Result<f64> {
    let g = grad_h(state, h)?;
    let speed = |f: &ScalarField2D| -> Result<f64> {
        let fx = spectral2d::deriv(f, Axis::X)?;
        let fy = spectral2d::deriv(f, Axis::Y)?;
        Ok(fx
            .values()
            .iter()
            .zip(fy.values())
            .map(|(a, b)| (a * a + b * b).sqrt())
            .fold(0.0, f64::max))
    };
    let mut s = speed(&g.d_omega)?;
    if let Some(psi) = &state.psi {
        s = s.max(speed(psi)?);
    }
    Ok(s)
}

/// Advective CFL bound `0.5 min(dx, dy) / max speed`.
pub fn cfl_limit(state: &HierarchyState, h: &Hamiltonian2D) -> Result<f64> {
    let s = max_signal_speed(state, h)?;
    let dmin = state.omega.dx().min(state.omega.dy());
    Ok(if s > 0.0 { 0.5 * dmin / s } else { f64::INFINITY })
}

/// One classical RK4 step. `dt` may be negative (time reversal); `dt = 0`
/// returns the input unchanged.
pub fn step_rk4(state: &HierarchyState, h: &Hamiltonian2D, dt: f64) -> Result<HierarchyState> {
    if !dt.is_finite() {
        return Err(Error::Config(format!("time step must be finite, got {dt}")));
    }
    if dt == 0.0 {
        return Ok(state.clone());
    }
    let k1 = rhs(state, h)?;
    let k2 = rhs(&state.advanced(0.5 * dt, &k1), h)?;
    let k3 = rhs(&state.advanced(0.5 * dt, &k2), h)?;
    let k4 = rhs(&state.advanced(dt, &k3), h)?;
    finish_rk4(state, [&k1, &k2, &k3, &k4], dt)
}

/// Final RK4 update from the four stage tendencies, with the finiteness and
/// zero-mean checks.
pub(crate) fn finish_rk4(state: &HierarchyState, k: [&Tendency; 4], dt: f64) -> Result<HierarchyState> {
    let combine = |a: &[f64], b: &[f64], c: &[f64], d: &[f64]| -> Vec<f64> {
        (0..a.len()).map(|i| (a[i] + 2.0 * b[i] + 2.0 * c[i] + d[i]) / 6.0).collect()
    };
    let opt = |a: &Option<Vec<f64>>, b: &Option<Vec<f64>>, c: &Option<Vec<f64>>, d: &Option<Vec<f64>>| {
        match (a, b, c, d) {
            (Some(a), Some(b), Some(c), Some(d)) => Some(combine(a, b, c, d)),
            _ => None,
        }
    };
    let [k1, k2, k3, k4] = k;
    let k = Tendency {
        d_omega: combine(&k1.d_omega, &k2.d_omega, &k3.d_omega, &k4.d_omega),
        d_psi: opt(&k1.d_psi, &k2.d_psi, &k3.d_psi, &k4.d_psi),
        d_psicheck: opt(&k1.d_psicheck, &k2.d_psicheck, &k3.d_psicheck, &k4.d_psicheck),
    };
    let mut next = state.advanced(dt, &k);
    next.time = state.time + dt;
    if !next.is_finite() {
        return Err(Error::NonFinite { time: next.time, what: "state after RK4 step".into() });
    }
    next.omega.assert_zero_mean()?;
    next.omega.remove_mean();
    Ok(next)
}

/// Sampled trajectory with its invariant time series.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub samples: Vec<HierarchyState>,
    pub series: InvariantSeries,
}

/// A run that stopped early; `partial` holds everything sampled so far.
#[derive(Debug, thiserror::Error)]
#[error("run aborted at t = {time}: {source}")]
pub struct RunFailure {
    pub time: f64,
    #[source]
    pub source: Error,
    pub partial: Box<Trajectory>,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub dt: f64,
    pub t_end: f64,
    /// Steps between samples (the initial and final states are always kept).
    pub sample_every: usize,
    pub invariants: Vec<InvariantSpec>,
    /// Keep full field snapshots at the sample times; otherwise only the
    /// final state is stored.
    pub keep_states: bool,
}

/// Integrates from `initial` to `t_end`, sampling invariants along the way.
/// Content outside the dealiasing band is never touched by the dynamics.
pub fn run(
    initial: &HierarchyState,
    h: &Hamiltonian2D,
    cfg: &RunConfig,
) -> std::result::Result<Trajectory, RunFailure> {
    let fail = |time: f64, source: Error, traj: Trajectory| RunFailure {
        time,
        source,
        partial: Box::new(traj),
    };
    let names: Vec<String> = cfg.invariants.iter().map(InvariantSpec::name).collect();
    let roles: Result<Vec<_>> = cfg.invariants.iter().map(|s| s.role(initial.tag)).collect();
    let (roles, role_err) = match roles {
        Ok(r) => (r, None),
        Err(e) => (vec![invariants::Role::Casimir; names.len()], Some(e)),
    };
    let mut traj = Trajectory { samples: Vec::new(), series: InvariantSeries::new(names, roles) };
    if let Some(e) = role_err {
        return Err(fail(initial.time, e, traj));
    }

    if !(cfg.dt > 0.0) || !cfg.dt.is_finite() || !(cfg.t_end >= 0.0) || cfg.sample_every == 0 {
        let e = Error::Config(format!(
            "need dt > 0, t_end >= 0, sample_every >= 1 (got {}, {}, {})",
            cfg.dt, cfg.t_end, cfg.sample_every
        ));
        return Err(fail(initial.time, e, traj));
    }
    if let Err(e) = h.check_compatible(initial.tag) {
        return Err(fail(initial.time, e, traj));
    }

    let mut state = initial.clone();
    let record = |traj: &mut Trajectory, s: &HierarchyState, keep: bool| -> Result<()> {
        let values = invariants::evaluate_all(s, h, &cfg.invariants)?;
        traj.series.push(s.time, values);
        if keep {
            traj.samples.push(s.clone());
        }
        Ok(())
    };
    if let Err(e) = record(&mut traj, &state, true) {
        return Err(fail(state.time, e, traj));
    }

    match cfl_limit(&state, h) {
        Ok(limit) if cfg.dt > limit => {
            warn!("dt = {} exceeds the CFL estimate {limit:.3e}", cfg.dt)
        }
        _ => {}
    }

    let t0 = state.time;
    let n_steps = ((cfg.t_end / cfg.dt) - 1e-9).ceil().max(0.0) as usize;
    for step in 1..=n_steps {
        let target = if step == n_steps { t0 + cfg.t_end } else { t0 + step as f64 * cfg.dt };
        let dt = target - state.time;
        state = match step_rk4(&state, h, dt) {
            Ok(mut s) => {
                s.time = target;
                s
            }
            Err(e) => return Err(fail(state.time, e, traj)),
        };
        if step % cfg.sample_every == 0 || step == n_steps {
            let keep = cfg.keep_states || step == n_steps;
            if let Err(e) = record(&mut traj, &state, keep) {
                return Err(fail(state.time, e, traj));
            }
        }
    }
    Ok(traj)
}

/// Default `[0, 2pi)^2` domain helper for examples and tests.
pub fn default_periods() -> (f64, f64) {
    (TAU, TAU)
}
