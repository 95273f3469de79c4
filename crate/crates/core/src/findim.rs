//! Finite-dimensional Poisson models `dz/dt = J(z) grad H(z)`: Jacobi
//! identity checks, numerical kernels, the symplectic extension pairing each
//! Casimir coordinate with an angle, and integration of the extended flow.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::tolerances;

/// Plain-text definition of a model. Entries are expressions in `vars`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub vars: Vec<String>,
    /// Row-major matrix entries.
    pub j: Vec<Vec<String>>,
    pub hamiltonian: String,
    #[serde(default)]
    pub casimirs: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoissonMatrixModel {
    vars: Vec<String>,
    j: Vec<Expr>,
    /// `dj[l][i * n + k] = d J_ik / d z_l`.
    dj: Vec<Vec<Expr>>,
    h: Expr,
    grad_h: Vec<Expr>,
    casimirs: Vec<Expr>,
    casimir_grads: Vec<Vec<Expr>>,
}

fn gradient(e: &Expr, n: usize) -> Vec<Expr> {
    (0..n).map(|l| e.diff(l)).collect()
}

fn eval_all(es: &[Expr], z: &[f64]) -> Vec<f64> {
    es.iter().map(|e| e.eval(z)).collect()
}

impl PoissonMatrixModel {
    pub fn new(vars: &[&str], j: &[&[&str]], hamiltonian: &str, casimirs: &[&str]) -> Result<Self> {
        let n = vars.len();
        if n == 0 {
            return Err(Error::Config("model needs at least one variable".into()));
        }
        if j.len() != n || j.iter().any(|r| r.len() != n) {
            return Err(Error::Config(format!("Poisson matrix must be {n} x {n}")));
        }
        let entries = j.iter().flat_map(|r| r.iter()).map(|s| Expr::parse(s, vars)).collect::<Result<Vec<_>>>()?;
        let dj = (0..n).map(|l| entries.iter().map(|e| e.diff(l)).collect()).collect();
        let h = Expr::parse(hamiltonian, vars)?;
        let casimirs = casimirs.iter().map(|c| Expr::parse(c, vars)).collect::<Result<Vec<_>>>()?;
        Ok(Self {
            vars: vars.iter().map(|s| s.to_string()).collect(),
            grad_h: gradient(&h, n),
            casimir_grads: casimirs.iter().map(|c| gradient(c, n)).collect(),
            j: entries,
            dj,
            h,
            casimirs,
        })
    }

    pub fn from_spec(spec: &ModelSpec) -> Result<Self> {
        let vars: Vec<&str> = spec.vars.iter().map(String::as_str).collect();
        let rows: Vec<Vec<&str>> = spec.j.iter().map(|r| r.iter().map(String::as_str).collect()).collect();
        let rows: Vec<&[&str]> = rows.iter().map(Vec::as_slice).collect();
        let cas: Vec<&str> = spec.casimirs.iter().map(String::as_str).collect();
        Self::new(&vars, &rows, &spec.hamiltonian, &cas)
    }

    pub fn n(&self) -> usize {
        self.vars.len()
    }
    pub fn vars(&self) -> &[String] {
        &self.vars
    }
    pub fn hamiltonian(&self) -> &Expr {
        &self.h
    }
    pub fn casimirs(&self) -> &[Expr] {
        &self.casimirs
    }

    /// Same model with a different Hamiltonian.
    pub fn with_hamiltonian(&self, hamiltonian: &str) -> Result<Self> {
        let vars: Vec<&str> = self.vars.iter().map(String::as_str).collect();
        let h = Expr::parse(hamiltonian, &vars)?;
        Ok(Self { grad_h: gradient(&h, self.n()), h, ..self.clone() })
    }

    pub fn j_at(&self, z: &[f64]) -> DMatrix<f64> {
        let n = self.n();
        DMatrix::from_row_iterator(n, n, self.j.iter().map(|e| e.eval(z)))
    }

    pub fn energy(&self, z: &[f64]) -> f64 {
        self.h.eval(z)
    }

    /// `J(z) grad H(z)`.
    pub fn vector_field(&self, z: &[f64]) -> Vec<f64> {
        let j = self.j_at(z);
        let g = eval_all(&self.grad_h, z);
        (0..self.n()).map(|i| (0..self.n()).map(|k| j[(i, k)] * g[k]).sum()).collect()
    }

    /// Largest `|J + J^T|` entry over the points.
    pub fn antisymmetry_residual(&self, points: &[Vec<f64>]) -> f64 {
        points
            .iter()
            .map(|z| {
                let j = self.j_at(z);
                (&j + j.transpose()).abs().max()
            })
            .fold(0.0, f64::max)
    }

    /// Largest `|J grad C|` over declared Casimirs and points.
    pub fn casimir_residual(&self, points: &[Vec<f64>]) -> f64 {
        let n = self.n();
        let mut worst = 0.0_f64;
        for z in points {
            let j = self.j_at(z);
            for g in &self.casimir_grads {
                let g = eval_all(g, z);
                for i in 0..n {
                    worst = worst.max((0..n).map(|k| j[(i, k)] * g[k]).sum::<f64>().abs());
                }
            }
        }
        worst
    }
}

/// Max over points and index triples of
/// `sum_l J_il d_l J_jk + J_jl d_l J_ki + J_kl d_l J_ij`.
pub fn jacobi_residual(m: &PoissonMatrixModel, points: &[Vec<f64>]) -> f64 {
    let n = m.n();
    let mut worst = 0.0_f64;
    for z in points {
        let j = m.j_at(z);
        let dj: Vec<Vec<f64>> = m.dj.iter().map(|d| eval_all(d, z)).collect();
        let d = |l: usize, a: usize, b: usize| dj[l][a * n + b];
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    let mut s = 0.0;
                    for l in 0..n {
                        s += j[(a, l)] * d(l, b, c) + j[(b, l)] * d(l, c, a) + j[(c, l)] * d(l, a, b);
                    }
                    worst = worst.max(s.abs());
                }
            }
        }
    }
    worst
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelInfo {
    /// Orthonormal basis of the numerical null space.
    pub basis: Vec<Vec<f64>>,
    pub rank: usize,
    /// Rank deficiency `n - rank`.
    pub nu: usize,
}

/// Null space of `J(z0)` by SVD with threshold `1e-10 |J|`.
pub fn kernel_basis(m: &PoissonMatrixModel, z0: &[f64]) -> KernelInfo {
    kernel_of(&m.j_at(z0))
}

fn kernel_of(j: &DMatrix<f64>) -> KernelInfo {
    let n = j.nrows();
    let svd = j.clone().svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let cut = tolerances::KERNEL_SVD * smax;
    let mut basis = Vec::new();
    for (r, &s) in svd.singular_values.iter().enumerate() {
        if smax == 0.0 || s <= cut {
            basis.push(v_t.row(r).iter().cloned().collect());
        }
    }
    let nu = basis.len();
    KernelInfo { basis, rank: n - nu, nu }
}

/// A model in Darboux block form `diag(J_c, 0_nu)` extended by `nu` angles:
/// `J_ex = diag(J_c, [[0, -I], [I, 0]])` over `(z, theta)`, so each former
/// Casimir coordinate `C` obeys `dC/dt = -dH/dtheta`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtendedModel {
    base: PoissonMatrixModel,
    nu: usize,
    j_ex: DMatrix<f64>,
    vars: Vec<String>,
}

/// Canonical symplectic matrix `[[0, I], [-I, 0]]` of even size `m`.
pub fn canonical_matrix(m: usize) -> DMatrix<f64> {
    let h = m / 2;
    let mut j = DMatrix::zeros(m, m);
    for i in 0..h {
        j[(i, h + i)] = 1.0;
        j[(h + i, i)] = -1.0;
    }
    j
}

/// Builds `J_ex`. The model must be constant, its last `nu` rows and columns
/// zero, and its leading block canonical.
pub fn extend_canonize(m: &PoissonMatrixModel, nu: usize, probes: &[Vec<f64>]) -> Result<ExtendedModel> {
    let n = m.n();
    if nu > n {
        return Err(Error::Config(format!("nu = {nu} exceeds dimension {n}")));
    }
    if (n - nu) % 2 != 0 {
        return Err(Error::Config(format!("n - nu = {} must be even", n - nu)));
    }
    let lead = n - nu;
    let mut expected = DMatrix::zeros(n, n);
    expected.view_mut((0, 0), (lead, lead)).copy_from(&canonical_matrix(lead));
    let origin = vec![0.0; n];
    for z in probes.iter().chain(std::iter::once(&origin)) {
        let dev = (m.j_at(z) - &expected).abs().max();
        if dev > 1e-14 {
            return Err(Error::Config(format!(
                "Poisson matrix is not in Darboux block form diag(J_c({lead}), 0_{nu}) (deviation {dev:e})"
            )));
        }
    }
    let mut j_ex = DMatrix::zeros(n + nu, n + nu);
    j_ex.view_mut((0, 0), (n, n)).copy_from(&expected);
    for i in 0..nu {
        let c = lead + i;
        let t = n + i;
        j_ex[(c, t)] = -1.0;
        j_ex[(t, c)] = 1.0;
    }
    let mut vars = m.vars.clone();
    for i in 0..nu {
        vars.push(if nu == 1 { "theta".to_string() } else { format!("theta{}", i + 1) });
    }
    Ok(ExtendedModel { base: m.clone(), nu, j_ex, vars })
}

impl ExtendedModel {
    pub fn j_ex(&self) -> &DMatrix<f64> {
        &self.j_ex
    }
    pub fn nu(&self) -> usize {
        self.nu
    }
    pub fn base(&self) -> &PoissonMatrixModel {
        &self.base
    }
    /// Variables of the extended space: the base variables then the angles.
    pub fn vars(&self) -> &[String] {
        &self.vars
    }

    /// Indices of the former Casimir coordinates.
    pub fn casimir_indices(&self) -> std::ops::Range<usize> {
        let n = self.base.n();
        n - self.nu..n
    }

    /// Parses a perturbation in the extended variables.
    pub fn parse_perturbation(&self, src: &str) -> Result<Expr> {
        let v: Vec<&str> = self.vars.iter().map(String::as_str).collect();
        Expr::parse(src, &v)
    }
}

/// Trajectory of the extended flow.
#[derive(Debug, Clone, PartialEq)]
pub struct UnfreezeResult {
    pub times: Vec<f64>,
    /// Extended states `(z, theta)` at each sample.
    pub states: Vec<Vec<f64>>,
    /// Former Casimir coordinates at each sample.
    pub casimirs: Vec<Vec<f64>>,
    /// `H + eps H1` at each sample.
    pub energy: Vec<f64>,
}

impl UnfreezeResult {
    /// `max_t |C(t) - C(0)|` over all Casimir coordinates.
    pub fn casimir_drift(&self) -> f64 {
        let c0 = &self.casimirs[0];
        self.casimirs
            .iter()
            .flat_map(|c| c.iter().zip(c0).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max)
    }

    /// `max_t |E(t) - E(0)| / max(1, |E(0)|)`.
    pub fn energy_drift(&self) -> f64 {
        let e0 = self.energy[0];
        self.energy.iter().map(|e| (e - e0).abs()).fold(0.0, f64::max) / e0.abs().max(1.0)
    }
}

pub(crate) fn rk4_step(f: &dyn Fn(&[f64]) -> Vec<f64>, x: &[f64], dt: f64) -> Vec<f64> {
    let shift = |k: &[f64], a: f64| -> Vec<f64> { x.iter().zip(k).map(|(p, q)| p + a * q).collect() };
    let k1 = f(x);
    let k2 = f(&shift(&k1, 0.5 * dt));
    let k3 = f(&shift(&k2, 0.5 * dt));
    let k4 = f(&shift(&k3, dt));
    (0..x.len()).map(|i| x[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])).collect()
}

/// Fixed-step RK4 from `x0` to `t_end`, keeping every `sample_every`-th state.
pub(crate) fn integrate(
    f: &dyn Fn(&[f64]) -> Vec<f64>,
    x0: &[f64],
    dt: f64,
    t_end: f64,
    sample_every: usize,
) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    if !(dt > 0.0) || !(t_end >= 0.0) || sample_every == 0 {
        return Err(Error::Config(format!("need dt > 0, t_end >= 0, sample_every >= 1 (got {dt}, {t_end})")));
    }
    let steps = ((t_end / dt) - 1e-9).ceil().max(0.0) as usize;
    let mut x = x0.to_vec();
    let mut times = vec![0.0];
    let mut states = vec![x.clone()];
    let mut t = 0.0;
    for s in 1..=steps {
        let target = if s == steps { t_end } else { s as f64 * dt };
        x = rk4_step(f, &x, target - t);
        t = target;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { time: t, what: "finite-dimensional state".into() });
        }
        if s % sample_every == 0 || s == steps {
            times.push(t);
            states.push(x.clone());
        }
    }
    Ok((times, states))
}

/// Trajectory of `dz/dt = J(z) grad H(z)`.
pub fn trajectory(
    m: &PoissonMatrixModel,
    z0: &[f64],
    dt: f64,
    t_end: f64,
    sample_every: usize,
) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    if z0.len() != m.n() {
        return Err(Error::Config(format!("initial state has {} entries, model {}", z0.len(), m.n())));
    }
    integrate(&|z| m.vector_field(z), z0, dt, t_end, sample_every)
}

/// Integrates `dx/dt = J_ex grad(H + eps H1)` from `(z0, theta0)`.
pub fn unfreeze_sim(
    ext: &ExtendedModel,
    h1: Option<&Expr>,
    eps: f64,
    z0: &[f64],
    theta0: &[f64],
    dt: f64,
    t_end: f64,
    sample_every: usize,
) -> Result<UnfreezeResult> {
    let n = ext.base.n();
    if z0.len() != n || theta0.len() != ext.nu {
        return Err(Error::Config(format!("expected {n} coordinates and {} angles", ext.nu)));
    }
    if let Some(p) = h1 {
        if p.vars() != ext.vars.as_slice() {
            return Err(Error::Config("perturbation must be parsed over the extended variables".into()));
        }
    }
    let dim = n + ext.nu;
    let gh = ext.base.grad_h.clone();
    let g1: Option<Vec<Expr>> = h1.map(|p| gradient(p, dim));
    let grad = |x: &[f64]| -> Vec<f64> {
        let mut g = vec![0.0; dim];
        for (i, e) in gh.iter().enumerate() {
            g[i] = e.eval(&x[..n]);
        }
        if let Some(g1) = &g1 {
            for (i, e) in g1.iter().enumerate() {
                g[i] += eps * e.eval(x);
            }
        }
        g
    };
    let j = ext.j_ex.clone();
    let f = move |x: &[f64]| -> Vec<f64> {
        let g = grad(x);
        (0..dim).map(|i| (0..dim).map(|k| j[(i, k)] * g[k]).sum()).collect()
    };
    let mut x0 = z0.to_vec();
    x0.extend_from_slice(theta0);
    let (times, states) = integrate(&f, &x0, dt, t_end, sample_every)?;
    let idx = ext.casimir_indices();
    let energy = states
        .iter()
        .map(|x| ext.base.energy(&x[..n]) + h1.map_or(0.0, |p| eps * p.eval(x)))
        .collect();
    let casimirs = states.iter().map(|x| x[idx.clone()].to_vec()).collect();
    Ok(UnfreezeResult { times, states, casimirs, energy })
}
