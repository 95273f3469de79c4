//! Casimir invariants and constants of motion of the vortex hierarchy, their
//! 3D MHD counterparts, and drift bookkeeping along trajectories.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::field3d::{self, curl_inverse, integrate_dot, VectorField3D};
use crate::hierarchy::{Hamiltonian2D, HierarchyState, SystemTag};
use crate::spectral2d::ScalarField2D;
use crate::tolerances;

/// Invariant identifiers.
///
/// * `C0 = int f(omega)`
/// * `C1 = int omega g(psi)`
/// * `C2 = int f(psi)`
/// * `C3 = int h(psi psicheck)`
/// * `C4 = int f(psicheck)`
/// * `Energy`: the run's Hamiltonian.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Invariant {
    C0,
    C1,
    C2,
    C3,
    C4,
    #[serde(rename = "H")]
    Energy,
}

impl Invariant {
    pub fn label(self) -> &'static str {
        match self {
            Invariant::C0 => "C0",
            Invariant::C1 => "C1",
            Invariant::C2 => "C2",
            Invariant::C3 => "C3",
            Invariant::C4 => "C4",
            Invariant::Energy => "H",
        }
    }

    /// Weight used when none is given.
    pub fn default_weight(self) -> WeightFunction {
        match self {
            Invariant::C1 | Invariant::C3 => WeightFunction::Identity,
            _ => WeightFunction::Square,
        }
    }

    /// How the invariant is conserved for a system, or an error if it is not
    /// part of that system's list.
    pub fn role(self, tag: SystemTag) -> Result<Role> {
        use Invariant::*;
        use SystemTag::*;
        match (self, tag) {
            (Energy, _) => Ok(Role::Energy),
            (C0, I) | (C1, II) | (C2, II) | (C2, III) | (C3, III) | (C4, III) => Ok(Role::Casimir),
            (C1, III) => Ok(Role::Symmetry),
            _ => Err(Error::InapplicableInvariant { which: self.label().into(), tag: tag.to_string() }),
        }
    }
}

impl std::str::FromStr for Invariant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "C0" => Ok(Invariant::C0),
            "C1" => Ok(Invariant::C1),
            "C2" => Ok(Invariant::C2),
            "C3" => Ok(Invariant::C3),
            "C4" => Ok(Invariant::C4),
            "H" | "energy" => Ok(Invariant::Energy),
            other => Err(Error::Config(format!("unknown invariant `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Casimir,
    /// A constant of motion that is not a Casimir of the system.
    Symmetry,
    Energy,
}

impl std::fmt::Display for Role {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Role::Casimir => "Casimir",
            Role::Symmetry => "conserved by symmetry",
            Role::Energy => "energy",
        })
    }
}

/// Scalar weight in a Casimir integrand.
#[derive(Debug, Clone, PartialEq)]
pub enum WeightFunction {
    Identity,
    Square,
    Cube,
    /// Any expression in the single variable `s`.
    Expr(Expr),
}

impl WeightFunction {
    pub fn parse(src: &str) -> Result<Self> {
        match src.trim() {
            "identity" | "id" => Ok(WeightFunction::Identity),
            "square" => Ok(WeightFunction::Square),
            "cube" => Ok(WeightFunction::Cube),
            other => Ok(WeightFunction::Expr(Expr::parse(other, &["s"])?)),
        }
    }

    pub fn eval(&self, s: f64) -> f64 {
        match self {
            WeightFunction::Identity => s,
            WeightFunction::Square => s * s,
            WeightFunction::Cube => s * s * s,
            WeightFunction::Expr(e) => e.eval(&[s]),
        }
    }

    pub fn name(&self) -> String {
        match self {
            WeightFunction::Identity => "identity".into(),
            WeightFunction::Square => "square".into(),
            WeightFunction::Cube => "cube".into(),
            WeightFunction::Expr(e) => e.source().to_string(),
        }
    }
}

/// An invariant together with its weight function.
#[derive(Debug, Clone, PartialEq)]
pub struct InvariantSpec {
    pub which: Invariant,
    pub weight: WeightFunction,
}

impl InvariantSpec {
    pub fn new(which: Invariant, weight: WeightFunction) -> Self {
        Self { which, weight }
    }

    pub fn with_default_weight(which: Invariant) -> Self {
        Self { which, weight: which.default_weight() }
    }

    /// Column name: the label, suffixed with the weight when it is not the default.
    pub fn name(&self) -> String {
        if self.which == Invariant::Energy || self.weight == self.which.default_weight() {
            self.which.label().to_string()
        } else {
            format!("{}[{}]", self.which.label(), self.weight.name())
        }
    }

    pub fn role(&self, tag: SystemTag) -> Result<Role> {
        self.which.role(tag)
    }

    pub fn tolerance(&self) -> f64 {
        match self.which {
            Invariant::Energy => tolerances::ENERGY_DRIFT,
            Invariant::C0 => tolerances::VORTICITY_CASIMIR_DRIFT,
            _ => tolerances::CASIMIR_DRIFT,
        }
    }
}

fn weighted_integral(f: &ScalarField2D, w: impl Fn(f64) -> f64) -> f64 {
    f.values().iter().map(|&v| w(v)).sum::<f64>() * f.dx() * f.dy()
}

/// Quadrature of the requested Casimir integrand.
pub fn casimir2d(state: &HierarchyState, which: Invariant, w: &WeightFunction) -> Result<f64> {
    if which == Invariant::Energy {
        return Err(Error::Config("energy is evaluated by energy2d".into()));
    }
    which.role(state.tag())?;
    let om = state.omega();
    let psi = || state.psi().expect("tag carries psi");
    let pc = || state.psicheck().expect("tag carries psicheck");
    Ok(match which {
        Invariant::C0 => weighted_integral(om, |v| w.eval(v)),
        Invariant::C1 => {
            let s: f64 = om.values().iter().zip(psi().values()).map(|(a, b)| a * w.eval(*b)).sum();
            s * om.dx() * om.dy()
        }
        Invariant::C2 => weighted_integral(psi(), |v| w.eval(v)),
        Invariant::C3 => {
            let s: f64 = psi().values().iter().zip(pc().values()).map(|(a, b)| w.eval(a * b)).sum();
            s * om.dx() * om.dy()
        }
        Invariant::C4 => weighted_integral(pc(), |v| w.eval(v)),
        Invariant::Energy => unreachable!(),
    })
}

/// Hamiltonian value by quadrature.
pub fn energy2d(state: &HierarchyState, h: &Hamiltonian2D) -> Result<f64> {
    h.value(state)
}

pub fn evaluate(state: &HierarchyState, h: &Hamiltonian2D, spec: &InvariantSpec) -> Result<f64> {
    match spec.which {
        Invariant::Energy => energy2d(state, h),
        w => casimir2d(state, w, &spec.weight),
    }
}

pub fn evaluate_all(state: &HierarchyState, h: &Hamiltonian2D, specs: &[InvariantSpec]) -> Result<Vec<f64>> {
    specs.iter().map(|s| evaluate(state, h, s)).collect()
}

/// The invariants every run of a given system records by default.
pub fn default_specs(tag: SystemTag) -> Vec<InvariantSpec> {
    use Invariant::*;
    let list: &[Invariant] = match tag {
        SystemTag::I => &[Energy, C0],
        SystemTag::II => &[Energy, C1, C2],
        SystemTag::III => &[Energy, C1, C2, C3, C4],
    };
    list.iter().map(|&w| InvariantSpec::with_default_weight(w)).collect()
}

/// Time series of invariants sampled along a trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvariantSeries {
    names: Vec<String>,
    roles: Vec<Role>,
    times: Vec<f64>,
    values: Vec<Vec<f64>>,
}

impl InvariantSeries {
    pub fn new(names: Vec<String>, roles: Vec<Role>) -> Self {
        assert_eq!(names.len(), roles.len(), "one role per invariant");
        Self { names, roles, times: Vec::new(), values: Vec::new() }
    }

    pub fn push(&mut self, t: f64, row: Vec<f64>) {
        assert_eq!(row.len(), self.names.len(), "row width must match the invariant list");
        self.times.push(t);
        self.values.push(row);
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }
    pub fn roles(&self) -> &[Role] {
        &self.roles
    }
    pub fn times(&self) -> &[f64] {
        &self.times
    }
    pub fn rows(&self) -> &[Vec<f64>] {
        &self.values
    }
    pub fn len(&self) -> usize {
        self.times.len()
    }
    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Values at the first sample.
    pub fn reference(&self) -> Option<&[f64]> {
        self.values.first().map(Vec::as_slice)
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let c = self.names.iter().position(|n| n == name)?;
        Some(self.values.iter().map(|r| r[c]).collect())
    }

    /// `max_t |v(t) - v(0)| / max(1, |v(0)|)`; infinite if any sample is not finite.
    pub fn drift(&self, column: usize) -> f64 {
        let Some(first) = self.values.first() else { return 0.0 };
        let v0 = first[column];
        let mut worst = 0.0_f64;
        for r in &self.values {
            let d = (r[column] - v0).abs();
            if !d.is_finite() {
                return f64::INFINITY;
            }
            worst = worst.max(d);
        }
        worst / v0.abs().max(1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftEntry {
    pub name: String,
    pub role: Role,
    pub drift: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftReport {
    pub entries: Vec<DriftEntry>,
}

impl DriftReport {
    pub fn all_pass(&self) -> bool {
        self.entries.iter().all(|e| e.pass)
    }
}

/// Drift of every column against `tolerance(name)`.
pub fn drift_report(series: &InvariantSeries, tolerance: impl Fn(&str) -> f64) -> DriftReport {
    let entries = series
        .names
        .iter()
        .enumerate()
        .map(|(c, name)| {
            let drift = series.drift(c);
            let tol = tolerance(name);
            DriftEntry { name: name.clone(), role: series.roles[c], drift, tolerance: tol, pass: drift < tol }
        })
        .collect();
    DriftReport { entries }
}

/// Default per-name tolerance, matching [`InvariantSpec::tolerance`].
pub fn default_tolerance(name: &str) -> f64 {
    let label = name.split('[').next().unwrap_or(name);
    match label.parse::<Invariant>() {
        Ok(w) => InvariantSpec::with_default_weight(w).tolerance(),
        Err(_) => tolerances::CASIMIR_DRIFT,
    }
}

/// Mass, helicities and cross helicities of a 3D MHD state with mock field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Casimirs3D {
    /// `int rho`
    pub mass: f64,
    /// `1/2 int A . B`
    pub magnetic_helicity: f64,
    /// `int V . B`
    pub cross_helicity: f64,
    /// `int A . Bcheck`
    pub mock_cross_helicity: f64,
    /// `1/2 int Acheck . Bcheck`
    pub mock_helicity: f64,
}

/// Evaluates the five 3D invariants. Vector potentials are taken in the
/// Coulomb gauge; both magnetic fields must be solenoidal.
pub fn casimir3d(
    rho: &[f64],
    v: &VectorField3D,
    b: &VectorField3D,
    b_check: &VectorField3D,
) -> Result<Casimirs3D> {
    v.check_same_grid(b)?;
    v.check_same_grid(b_check)?;
    let grid = v.grid();
    if rho.len() != grid.len() {
        return Err(Error::GridMismatch(format!("density has {} samples, grid {}", rho.len(), grid.len())));
    }
    field3d::check_solenoidal(b, tolerances::SOLENOIDAL)?;
    field3d::check_solenoidal(b_check, tolerances::SOLENOIDAL)?;
    let a = curl_inverse(b);
    let a_check = curl_inverse(b_check);
    Ok(Casimirs3D {
        mass: grid.integrate(rho),
        magnetic_helicity: 0.5 * integrate_dot(&a, b)?,
        cross_helicity: integrate_dot(v, b)?,
        mock_cross_helicity: integrate_dot(&a, b_check)?,
        mock_helicity: 0.5 * integrate_dot(&a_check, b_check)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field3d::Grid3D;
    use std::f64::consts::{PI, TAU};

    fn f(n: usize, g: impl Fn(f64, f64) -> f64) -> ScalarField2D {
        ScalarField2D::from_fn_2pi(n, g).unwrap()
    }

    #[test]
    fn applicability_table() {
        assert_eq!(Invariant::C0.role(SystemTag::I).unwrap(), Role::Casimir);
        assert_eq!(Invariant::C1.role(SystemTag::III).unwrap(), Role::Symmetry);
        assert!(Invariant::C3.role(SystemTag::II).is_err());
        assert!(Invariant::C0.role(SystemTag::II).is_err());
        assert!(Invariant::C1.role(SystemTag::I).is_err());
    }

    #[test]
    fn single_mode_values() {
        let c = f(32, |x, _| x.cos());
        let s1 = HierarchyState::system_i(c.clone()).unwrap();
        let c0 = casimir2d(&s1, Invariant::C0, &WeightFunction::Square).unwrap();
        assert!((c0 - 2.0 * PI * PI).abs() < 1e-12);

        let s2 = HierarchyState::system_ii(c.clone(), f(32, |_, y| y.cos())).unwrap();
        assert!(casimir2d(&s2, Invariant::C1, &WeightFunction::Identity).unwrap().abs() < 1e-12);

        let s3 = HierarchyState::system_iii(c.clone(), c.clone(), c.clone()).unwrap();
        let c3 = casimir2d(&s3, Invariant::C3, &WeightFunction::Identity).unwrap();
        assert!((c3 - 2.0 * PI * PI).abs() < 1e-12);
    }

    #[test]
    fn rmhd_energy_of_eigenmodes() {
        let c = f(32, |x, _| x.cos());
        let z = ScalarField2D::zeros(32, 32, TAU, TAU).unwrap();
        let h = Hamiltonian2D::Rmhd;
        let e = |w: &ScalarField2D, p: &ScalarField2D| {
            energy2d(&HierarchyState::system_ii(w.clone(), p.clone()).unwrap(), &h).unwrap()
        };
        assert_eq!(e(&z, &z), 0.0);
        assert!((e(&c, &z) - PI * PI).abs() < 1e-12);
        assert!((e(&z, &c) - PI * PI).abs() < 1e-12);
    }

    #[test]
    fn weight_parsing() {
        assert_eq!(WeightFunction::parse("square").unwrap(), WeightFunction::Square);
        let w = WeightFunction::parse("s^2 + 3*s").unwrap();
        assert_eq!(w.eval(2.0), 10.0);
        assert!(WeightFunction::parse("s +").is_err());
        let spec = InvariantSpec::new(Invariant::C0, WeightFunction::Cube);
        assert_eq!(spec.name(), "C0[cube]");
        assert_eq!(InvariantSpec::with_default_weight(Invariant::C2).name(), "C2");
    }

    #[test]
    fn drift_of_constant_and_jump() {
        let mut s = InvariantSeries::new(vec!["C0".into()], vec![Role::Casimir]);
        for i in 0..5 {
            s.push(i as f64, vec![3.0]);
        }
        assert_eq!(s.drift(0), 0.0);
        s.push(5.0, vec![3.0 + 3e-3]);
        let r = drift_report(&s, default_tolerance);
        assert!(r.entries[0].drift >= 1e-3 && !r.all_pass());
    }

    #[test]
    fn empty_series_reports_nothing() {
        let s = InvariantSeries::new(vec![], vec![]);
        assert!(drift_report(&s, default_tolerance).entries.is_empty());
    }

    #[test]
    fn beltrami_helicities() {
        let g = Grid3D::cube_2pi(8).unwrap();
        let b = VectorField3D::from_fn(g, |[x, _, _]| [0.0, x.sin(), x.cos()]);
        let rho = vec![1.0; g.len()];
        let c = casimir3d(&rho, &VectorField3D::zeros(g), &b, &b).unwrap();
        let vol = TAU.powi(3);
        assert!((c.magnetic_helicity - 0.5 * vol).abs() < 1e-10);
        assert!((c.mock_cross_helicity - 2.0 * c.magnetic_helicity).abs() < 1e-10);
        assert_eq!(c.cross_helicity, 0.0);
        assert!((c.mass - vol).abs() < 1e-10);
    }
}
