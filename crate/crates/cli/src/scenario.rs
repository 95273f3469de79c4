use std::f64::consts::TAU;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use mockfield::expr::Expr;
use mockfield::findim::ModelSpec;
use mockfield::hierarchy::{CustomHamiltonian, QuadraticTerm};
use mockfield::invariants::{default_specs, InvariantSpec};
use mockfield::spectral2d::random_smooth;
use mockfield::{Hamiltonian2D, HierarchyState, Invariant, ScalarField2D, SystemTag, WeightFunction};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Evolve2d,
    Equilibrium,
    Tearing,
    Filament,
    Hodge,
    Findim,
}

impl Kind {
    pub fn as_str(self) -> &'static str {
        match self {
            Kind::Evolve2d => "evolve2d",
            Kind::Equilibrium => "equilibrium",
            Kind::Tearing => "tearing",
            Kind::Filament => "filament",
            Kind::Hodge => "hodge",
            Kind::Findim => "findim",
        }
    }
}

/// A scenario file: the kind, a seed, an output directory and exactly one
/// parameter block named after the kind.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub kind: Kind,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evolve2d: Option<Evolve2d>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub equilibrium: Option<Equilibrium>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tearing: Option<Tearing>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub filament: Option<Filament>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hodge: Option<Hodge>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub findim: Option<Findim>,
}

impl Scenario {
    /// Reads and parses a scenario, returning it with the raw source text.
    pub fn load(path: &Path) -> Result<(Self, String)> {
        let src = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let sc: Scenario = toml::from_str(&src).with_context(|| format!("parsing {}", path.display()))?;
        sc.check_blocks()?;
        Ok((sc, src))
    }

    fn check_blocks(&self) -> Result<()> {
        let present: Vec<&str> = [
            ("evolve2d", self.evolve2d.is_some()),
            ("equilibrium", self.equilibrium.is_some()),
            ("tearing", self.tearing.is_some()),
            ("filament", self.filament.is_some()),
            ("hodge", self.hodge.is_some()),
            ("findim", self.findim.is_some()),
        ]
        .iter()
        .filter(|(_, p)| *p)
        .map(|(n, _)| *n)
        .collect();
        match present.as_slice() {
            [one] if *one == self.kind.as_str() => Ok(()),
            [] => bail!("kind `{}` needs a [{}] block", self.kind.as_str(), self.kind.as_str()),
            _ => bail!(
                "kind `{}` takes only a [{}] block, found [{}]",
                self.kind.as_str(),
                self.kind.as_str(),
                present.join("], [")
            ),
        }
    }
}

fn one() -> usize {
    1
}

/// Grid, Hamiltonian and initial fields of a hierarchy run.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Flow {
    pub system: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nx: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ny: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lx: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ly: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hamiltonian: Option<HamiltonianConfig>,
    pub omega: FieldInit,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub psi: Option<FieldInit>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub psicheck: Option<FieldInit>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum HamiltonianConfig {
    /// `euler` or `rmhd`.
    Named(String),
    Custom(CustomTerms),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomTerms {
    pub terms: Vec<QuadraticTerm>,
}

/// An expression in `x, y`, or a seeded random smooth field.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FieldInit {
    Expr(String),
    Random(RandomField),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomField {
    pub kmax: u32,
    pub rms: f64,
    /// Overrides the scenario seed plus the field's offset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl Flow {
    pub fn tag(&self) -> Result<SystemTag> {
        Ok(self.system.parse()?)
    }

    fn grid(&self) -> Result<(usize, usize, f64, f64)> {
        let (nx, ny) = match (self.n, self.nx, self.ny) {
            (Some(n), None, None) => (n, n),
            (None, Some(nx), Some(ny)) => (nx, ny),
            _ => bail!("give either `n` or both `nx` and `ny`"),
        };
        Ok((nx, ny, self.lx.unwrap_or(TAU), self.ly.unwrap_or(TAU)))
    }

    pub fn hamiltonian(&self) -> Result<Hamiltonian2D> {
        let tag = self.tag()?;
        let h = match &self.hamiltonian {
            None if tag == SystemTag::I => Hamiltonian2D::Euler,
            None => Hamiltonian2D::Rmhd,
            Some(HamiltonianConfig::Named(n)) => match n.as_str() {
                "euler" => Hamiltonian2D::Euler,
                "rmhd" => Hamiltonian2D::Rmhd,
                other => bail!("unknown Hamiltonian `{other}` (use euler, rmhd or a table of terms)"),
            },
            Some(HamiltonianConfig::Custom(c)) => Hamiltonian2D::Custom(CustomHamiltonian::new(c.terms.clone())?),
        };
        h.check_compatible(tag)?;
        Ok(h)
    }

    /// Builds the initial state. Random fields use `seed + 0, 1, 2` for
    /// omega, psi and psicheck unless they carry their own seed.
    pub fn initial_state(&self, seed: u64) -> Result<HierarchyState> {
        let tag = self.tag()?;
        let (nx, ny, lx, ly) = self.grid()?;
        let build = |init: &FieldInit, offset: u64, name: &str| -> Result<ScalarField2D> {
            let f = match init {
                FieldInit::Expr(src) => {
                    let e = Expr::parse(src, &["x", "y"])?;
                    ScalarField2D::from_fn(nx, ny, lx, ly, |x, y| e.eval(&[x, y]))?
                }
                FieldInit::Random(r) => {
                    if !(r.rms >= 0.0) {
                        bail!("{name}: rms must be non-negative");
                    }
                    let f = random_smooth(nx, ny, lx, ly, r.kmax, r.seed.unwrap_or(seed.wrapping_add(offset)))?;
                    let rms = (f.values().iter().map(|v| v * v).sum::<f64>() / f.values().len() as f64).sqrt();
                    if rms > 0.0 {
                        f.scale(r.rms / rms)
                    } else {
                        f
                    }
                }
            };
            Ok(f)
        };
        let field = |init: &Option<FieldInit>, offset: u64, name: &str| -> Result<ScalarField2D> {
            match init {
                Some(i) => build(i, offset, name),
                None => bail!("system {tag} needs an initial `{name}`"),
            }
        };
        let omega = build(&self.omega, 0, "omega").context("omega")?;
        let extra = |name: &str, given: bool| -> Result<()> {
            if given {
                bail!("system {tag} does not carry `{name}`");
            }
            Ok(())
        };
        let state = match tag {
            SystemTag::I => {
                extra("psi", self.psi.is_some())?;
                extra("psicheck", self.psicheck.is_some())?;
                HierarchyState::system_i(omega)?
            }
            SystemTag::II => {
                extra("psicheck", self.psicheck.is_some())?;
                HierarchyState::system_ii(omega, field(&self.psi, 1, "psi")?)?
            }
            SystemTag::III => HierarchyState::system_iii(
                omega,
                field(&self.psi, 1, "psi")?,
                field(&self.psicheck, 2, "psicheck")?,
            )?,
        };
        Ok(state)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Evolve2d {
    pub flow: Flow,
    pub dt: f64,
    pub t_end: f64,
    #[serde(default = "one")]
    pub sample_every: usize,
    /// Names such as `H`, `C0` or `C0[s^3]`; omitted means the system's defaults.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub invariants: Option<Vec<String>>,
}

/// Parses `C2` or `C2[cube]` into an invariant with its weight.
pub fn parse_invariant(name: &str) -> Result<InvariantSpec> {
    let name = name.trim();
    let (label, weight) = match name.find('[') {
        Some(i) => {
            let inner = name[i + 1..]
                .strip_suffix(']')
                .with_context(|| format!("unterminated weight in `{name}`"))?;
            (&name[..i], Some(inner))
        }
        None => (name, None),
    };
    let which: Invariant = label.trim().parse()?;
    Ok(match weight {
        Some(w) => {
            if which == Invariant::Energy {
                bail!("the energy takes no weight");
            }
            InvariantSpec::new(which, WeightFunction::parse(w)?)
        }
        None => InvariantSpec::with_default_weight(which),
    })
}

impl Evolve2d {
    pub fn specs(&self) -> Result<Vec<InvariantSpec>> {
        let tag = self.flow.tag()?;
        let specs = match &self.invariants {
            None => default_specs(tag),
            Some(names) => names.iter().map(|n| parse_invariant(n)).collect::<Result<_>>()?,
        };
        for s in &specs {
            s.role(tag)?;
        }
        Ok(specs)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Equilibrium {
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub periods: Option<[f64; 3]>,
    pub mu_target: f64,
    #[serde(default = "default_rho0")]
    pub rho0: f64,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    /// Flow multiplier; the velocity is `mu3 / rho0` times the field.
    #[serde(default)]
    pub mu3: f64,
    /// Mock-field multiplier; the mock field is taken equal to the field.
    #[serde(default)]
    pub mu4: f64,
}

fn default_rho0() -> f64 {
    1.0
}

fn default_gamma() -> f64 {
    5.0 / 3.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tearing {
    pub x_min: f64,
    pub x_max: f64,
    pub by: String,
    pub bz: String,
    pub k: [f64; 2],
    #[serde(default)]
    pub mu2: f64,
    pub mu4: f64,
    /// Kernel constant and jump as `[re, im]`.
    #[serde(default)]
    pub c0: [f64; 2],
    #[serde(default = "unit_jump")]
    pub c1: [f64; 2],
    #[serde(default = "default_nodes")]
    pub nodes: usize,
    /// Samples of the resonance scan.
    #[serde(default = "default_scan")]
    pub samples: usize,
    /// Node counts for the regularized finite-difference comparison.
    #[serde(default)]
    pub compare_nodes: Vec<usize>,
}

fn unit_jump() -> [f64; 2] {
    [1.0, 0.0]
}

fn default_nodes() -> usize {
    129
}

fn default_scan() -> usize {
    201
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FilamentMode {
    /// Loops in a prescribed 3D velocity field.
    Analytic,
    /// Planar loops and points carried by a hierarchy flow.
    Hierarchy,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Filament {
    pub mode: FilamentMode,
    /// Velocity components in `x, y, z, t` (analytic mode).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub velocity: Option<[String; 3]>,
    /// Flow for hierarchy mode.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flow: Option<Flow>,
    pub dt: f64,
    pub t_end: f64,
    #[serde(default = "one")]
    pub sample_every: usize,
    #[serde(default)]
    pub resample: bool,
    #[serde(default)]
    pub loops: Vec<LoopSpec>,
    /// Point markers (hierarchy mode).
    #[serde(default)]
    pub points: Vec<[f64; 2]>,
    /// Check circulation conservation along analytic loops; only meaningful
    /// when the prescribed velocity is a steady ideal flow.
    #[serde(default)]
    pub kelvin: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LoopSpec {
    Circle(CircleLoop),
    /// Path of a loop CSV, relative to the scenario file.
    Csv(PathBuf),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CircleLoop {
    pub center: [f64; 3],
    pub radius: f64,
    #[serde(default = "ex")]
    pub e1: [f64; 3],
    #[serde(default = "ey")]
    pub e2: [f64; 3],
    pub markers: usize,
}

fn ex() -> [f64; 3] {
    [1.0, 0.0, 0.0]
}

fn ey() -> [f64; 3] {
    [0.0, 1.0, 0.0]
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Hodge {
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    /// Stream function in `x, y` on `[0, lx) x [0, 1]`.
    pub stream: String,
    #[serde(default)]
    pub mean_flow: f64,
    #[serde(default = "default_cuts")]
    pub cuts: usize,
}

fn default_cuts() -> usize {
    16
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModelSource {
    /// Path of a model TOML file, relative to the scenario file.
    File(PathBuf),
    Inline(ModelSpec),
}

impl ModelSource {
    pub fn load(&self, base: &Path) -> Result<ModelSpec> {
        match self {
            ModelSource::Inline(m) => Ok(m.clone()),
            ModelSource::File(p) => {
                let path = base.join(p);
                let src = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
                toml::from_str(&src).with_context(|| format!("parsing {}", path.display()))
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Findim {
    pub model: ModelSource,
    pub z0: Vec<f64>,
    pub dt: f64,
    pub t_end: f64,
    #[serde(default = "one")]
    pub sample_every: usize,
    /// Random probe points for the structural checks, drawn around `z0`.
    #[serde(default = "default_probes")]
    pub probes: usize,
    #[serde(default = "default_probe_radius")]
    pub probe_radius: f64,
    /// Number of Casimirs to pair with angles; 0 runs the model as given.
    #[serde(default)]
    pub nu: usize,
    #[serde(default)]
    pub theta0: Vec<f64>,
    /// Angle-dependent perturbation in the extended variables.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h1: Option<String>,
    #[serde(default)]
    pub epsilon: f64,
}

fn default_probes() -> usize {
    16
}

fn default_probe_radius() -> f64 {
    1.0
}
