//! Energy-Casimir equilibria: curl eigenfields on the 3-torus, first-variation
//! residuals, slab resonances, the step-profile singular kernel and the
//! sheet-driven tearing perturbation between conducting walls.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::field3d::{curl, Grid3D, VectorField3D};
use crate::tolerances;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Curl eigenfield `curl B = mu B` on a periodic box.
#[derive(Debug, Clone)]
pub struct BeltramiSolution {
    pub mu: f64,
    /// Integer lattice vector `m`; the wavevector is `2 pi m_i / L_i`.
    pub mode: [i64; 3],
    pub field: VectorField3D,
    /// `|curl B - mu B| / |B|` measured spectrally on the grid.
    pub residual: f64,
}

fn wavevector(mode: [i64; 3], periods: [f64; 3]) -> [f64; 3] {
    [0, 1, 2].map(|a| TAU * mode[a] as f64 / periods[a])
}

fn knorm(k: [f64; 3]) -> f64 {
    (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]).sqrt()
}

/// Lattice modes with `|m_a| <= reach`, sorted by `|k|`; within a shell the
/// first entry prefers x, then y, then z (so shell one starts at `(1,0,0)`).
fn lattice(periods: [f64; 3], reach: i64) -> Vec<([i64; 3], f64)> {
    let mut out = Vec::new();
    for a in -reach..=reach {
        for b in -reach..=reach {
            for c in -reach..=reach {
                if (a, b, c) != (0, 0, 0) {
                    let m = [a, b, c];
                    out.push((m, knorm(wavevector(m, periods))));
                }
            }
        }
    }
    out.sort_by(|p, q| {
        p.1.partial_cmp(&q.1).unwrap().then_with(|| q.0.cmp(&p.0))
    });
    out
}

/// Distinct curl eigenvalue magnitudes `|k|`, smallest first. Values within
/// a relative `1e-14` are merged.
pub fn eigenvalue_shells(periods: [f64; 3], count: usize) -> Vec<f64> {
    let reach = (count as f64).sqrt().ceil() as i64 + 2;
    let mut shells: Vec<f64> = Vec::new();
    for (_, k) in lattice(periods, reach) {
        if shells.last().is_none_or(|&s| (k - s).abs() > 1e-14 * k) {
            shells.push(k);
        }
        if shells.len() == count {
            break;
        }
    }
    shells
}

/// Eigenfield of curl with eigenvalue nearest `mu_target`, sampled on `grid`.
/// For wavevector `k` with unit vectors `e1 _|_ k`, `e2 = k^ x e1`, the field
/// is `e1 cos(k.x) - s e2 sin(k.x)` with eigenvalue `s |k|`.
pub fn solve_beltrami(grid: &Grid3D, mu_target: f64) -> Result<BeltramiSolution> {
    if mu_target == 0.0 || !mu_target.is_finite() {
        return Err(Error::Config(
            "curl eigenvalue target must be finite and nonzero; the zero sector is harmonic".into(),
        ));
    }
    let periods = grid.l;
    let kmin = (0..3).map(|a| TAU / periods[a]).fold(f64::INFINITY, f64::min);
    let reach = ((mu_target.abs() / kmin).ceil() as i64 + 1).max(1);
    let lat = lattice(periods, reach);
    let target = mu_target.abs();
    let (mode, kn) = lat
        .iter()
        .fold(None::<([i64; 3], f64)>, |best, &(m, k)| match best {
            Some((_, bk)) if (k - target).abs() >= (bk - target).abs() => best,
            _ => Some((m, k)),
        })
        .expect("lattice is never empty");
    for a in 0..3 {
        if 2 * mode[a].unsigned_abs() as usize >= grid.n[a] {
            return Err(Error::Config(format!(
                "grid {:?} cannot resolve the eigenmode {:?}",
                grid.n, mode
            )));
        }
    }
    let s = mu_target.signum();
    let k = wavevector(mode, periods);
    let kh = k.map(|v| v / kn);
    let seed = if kh[2].abs() < 0.9 { [0.0, 0.0, 1.0] } else { [1.0, 0.0, 0.0] };
    let proj = seed[0] * kh[0] + seed[1] * kh[1] + seed[2] * kh[2];
    let e1 = {
        let v = [0, 1, 2].map(|a| seed[a] - proj * kh[a]);
        let n = knorm(v);
        v.map(|c| c / n)
    };
    let e2 = [
        kh[1] * e1[2] - kh[2] * e1[1],
        kh[2] * e1[0] - kh[0] * e1[2],
        kh[0] * e1[1] - kh[1] * e1[0],
    ];
    let field = VectorField3D::from_fn(*grid, |p| {
        let ph = k[0] * p[0] + k[1] * p[1] + k[2] * p[2];
        let (sn, cs) = ph.sin_cos();
        [0, 1, 2].map(|a| e1[a] * cs - s * e2[a] * sn)
    });
    let mu = s * kn;
    let residual = curl(&field).axpy(-mu, &field)?.norm_l2() / field.norm_l2();
    Ok(BeltramiSolution { mu, mode, field, residual })
}

/// Lagrange multipliers and the barotropic closure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MultiplierSet {
    pub mu1: f64,
    pub mu2: f64,
    pub mu3: f64,
    pub mu4: f64,
    pub mu5: f64,
    pub rho0: f64,
    pub gamma: f64,
}

impl Default for MultiplierSet {
    fn default() -> Self {
        Self { mu1: 0.0, mu2: 1.0, mu3: 0.0, mu4: 0.0, mu5: 0.0, rho0: 1.0, gamma: 5.0 / 3.0 }
    }
}

impl MultiplierSet {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho0 > 0.0) {
            return Err(Error::Config(format!("rho0 must be positive, got {}", self.rho0)));
        }
        if !(self.gamma > 1.0) {
            return Err(Error::Config(format!("gamma must exceed 1, got {}", self.gamma)));
        }
        Ok(())
    }

    /// Enthalpy `gamma/(gamma-1) rho^(gamma-1)`.
    pub fn enthalpy(&self, rho: f64) -> f64 {
        self.gamma / (self.gamma - 1.0) * rho.powf(self.gamma - 1.0)
    }
}

/// Max-norm residuals of the first-variation equations
/// `V^2/2 + h - mu1 = 0`, `rho V - mu3 B = 0` and
/// `curl B - mu2 B - mu3 curl V - mu4 Bcheck = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EcResiduals {
    pub bernoulli: f64,
    pub momentum: f64,
    pub curl: f64,
}

impl EcResiduals {
    pub fn max(&self) -> f64 {
        self.bernoulli.max(self.momentum).max(self.curl)
    }
}

pub fn ec_gradient_residual(
    rho: &[f64],
    v: &VectorField3D,
    b: &VectorField3D,
    b_check: Option<&VectorField3D>,
    m: &MultiplierSet,
) -> Result<EcResiduals> {
    m.validate()?;
    v.check_same_grid(b)?;
    let grid = *v.grid();
    if rho.len() != grid.len() {
        return Err(Error::GridMismatch(format!("density has {} samples, grid {}", rho.len(), grid.len())));
    }
    let v2 = v.norm_sq_pointwise();
    let bernoulli = (0..grid.len()).map(|i| (0.5 * v2[i] + m.enthalpy(rho[i]) - m.mu1).abs()).fold(0.0, f64::max);
    let mut momentum = 0.0_f64;
    for a in 0..3 {
        for i in 0..grid.len() {
            momentum = momentum.max((rho[i] * v.comp(a)[i] - m.mu3 * b.comp(a)[i]).abs());
        }
    }
    let mut r = curl(b).axpy(-m.mu2, b)?.axpy(-m.mu3, &curl(v))?;
    if let Some(bc) = b_check {
        r = r.axpy(-m.mu4, bc)?;
    }
    Ok(EcResiduals { bernoulli, momentum, curl: r.max_abs() })
}

/// One-dimensional sheared slab `B*(x) = (0, By(x), Bz(x))` with a helical
/// mode `exp(i(ky y + kz z))` between walls at `x_min` and `x_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct SlabEquilibrium {
    pub x_min: f64,
    pub x_max: f64,
    by: Expr,
    bz: Expr,
    /// `(ky, kz)`.
    pub k: [f64; 2],
}

impl SlabEquilibrium {
    /// Profiles are expressions in `x`.
    pub fn new(x_min: f64, x_max: f64, by: &str, bz: &str, k: [f64; 2]) -> Result<Self> {
        if !(x_min < x_max) || !x_min.is_finite() || !x_max.is_finite() {
            return Err(Error::Config(format!("slab needs x_min < x_max, got [{x_min}, {x_max}]")));
        }
        if k[0] == 0.0 && k[1] == 0.0 {
            return Err(Error::Config("mode pair (ky, kz) must be nonzero".into()));
        }
        Ok(Self { x_min, x_max, by: Expr::parse(by, &["x"])?, bz: Expr::parse(bz, &["x"])?, k })
    }

    pub fn by(&self, x: f64) -> f64 {
        self.by.eval(&[x])
    }
    pub fn bz(&self, x: f64) -> f64 {
        self.bz.eval(&[x])
    }
    pub fn by_source(&self) -> &str {
        self.by.source()
    }
    pub fn bz_source(&self) -> &str {
        self.bz.source()
    }

    /// `|k|^2 = ky^2 + kz^2`.
    pub fn k2(&self) -> f64 {
        self.k[0] * self.k[0] + self.k[1] * self.k[1]
    }

    /// Resonance function `F(x) = k . B*(x)`.
    pub fn resonance_function(&self, x: f64) -> f64 {
        self.by(x) * self.k[0] + self.bz(x) * self.k[1]
    }

    /// `n` equally spaced nodes including both walls.
    pub fn nodes(&self, n: usize) -> Vec<f64> {
        let h = (self.x_max - self.x_min) / (n - 1) as f64;
        (0..n).map(|i| if i == n - 1 { self.x_max } else { self.x_min + i as f64 * h }).collect()
    }

    /// `|k| max|B*|` sampled on a fine grid, the scale for resonance tests.
    pub fn resonance_scale(&self) -> f64 {
        let maxb = self
            .nodes(2049)
            .into_iter()
            .map(|x| self.by(x).hypot(self.bz(x)))
            .fold(0.0, f64::max);
        self.k2().sqrt() * maxb
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResonanceScan {
    /// Sign-change roots of `F`, refined by bisection.
    pub roots: Vec<f64>,
    /// Approximate touching zeros (local minima of `|F|` without sign change).
    pub tangential: Vec<f64>,
    /// Smallest `|F|` seen on the scan grid.
    pub min_abs: f64,
}

/// Scans `F` on `samples` intervals and bisects every sign change.
pub fn find_resonant_surface(s: &SlabEquilibrium, samples: usize) -> ResonanceScan {
    let samples = samples.max(8);
    let xs = s.nodes(samples + 1);
    let fs: Vec<f64> = xs.iter().map(|&x| s.resonance_function(x)).collect();
    let scale = s.resonance_scale().max(f64::MIN_POSITIVE);
    let target = tolerances::RESONANCE * scale;
    let mut roots: Vec<f64> = Vec::new();
    let push = |roots: &mut Vec<f64>, r: f64| {
        if roots.last().is_none_or(|&q| (r - q).abs() > 1e-12 * (s.x_max - s.x_min)) {
            roots.push(r);
        }
    };
    for i in 0..samples {
        let (a, b, fa, fb) = (xs[i], xs[i + 1], fs[i], fs[i + 1]);
        if fa == 0.0 {
            push(&mut roots, a);
        } else if fa * fb < 0.0 {
            push(&mut roots, bisect(|x| s.resonance_function(x), a, b, fa, target));
        }
    }
    if fs[samples] == 0.0 {
        push(&mut roots, xs[samples]);
    }
    let mut tangential = Vec::new();
    for i in 1..samples {
        let (l, c, r) = (fs[i - 1], fs[i], fs[i + 1]);
        if c != 0.0 && l * c > 0.0 && c * r > 0.0 && c.abs() < l.abs() && c.abs() < r.abs() && c.abs() < 1e-6 * scale {
            tangential.push(xs[i]);
        }
    }
    let min_abs = fs.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
    ResonanceScan { roots, tangential, min_abs }
}

fn bisect(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, mut fa: f64, target: f64) -> f64 {
    let mut best = (a, fa.abs());
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let fm = f(m);
        if fm.abs() < best.1 {
            best = (m, fm.abs());
        }
        if fm == 0.0 || fm.abs() < target * 1e-3 {
            return m;
        }
        if fa * fm < 0.0 {
            b = m;
        } else {
            a = m;
            fa = fm;
        }
    }
    let fb = f(b).abs();
    if fb < best.1 {
        best = (b, fb);
    }
    best.0
}

/// Singular kernel at a resonance: the step profile `c0 + c1 Y(x - x_r)`,
/// its helical 1-form `(0, i ky, i kz) theta(x) e^{i(ky y + kz z)}`, and the
/// sheet measure `eta = sheet_strength delta(x - x_r) e^{i(...)}` with
/// `curl` of the 1-form equal to `eta B*`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SingularKernel {
    pub x_r: f64,
    pub c0: Complex64,
    pub c1: Complex64,
    pub k: [f64; 2],
    pub sheet_strength: Complex64,
}

impl SingularKernel {
    /// Step profile; the Heaviside function takes the value 1/2 at the sheet.
    pub fn theta(&self, x: f64) -> Complex64 {
        let y = match x.partial_cmp(&self.x_r) {
            Some(std::cmp::Ordering::Less) => 0.0,
            Some(std::cmp::Ordering::Greater) => 1.0,
            _ => 0.5,
        };
        self.c0 + self.c1 * y
    }

    /// x-profile of the helical 1-form.
    pub fn one_form(&self, x: f64) -> [Complex64; 3] {
        let t = self.theta(x);
        [Complex64::default(), I * self.k[0] * t, I * self.k[1] * t]
    }

    /// Amplitude of the delta-sheet field `curl` of the 1-form:
    /// `i c1 (0, -kz, ky)`.
    pub fn sheet_field(&self) -> [Complex64; 3] {
        [Complex64::default(), -I * self.c1 * self.k[1], I * self.c1 * self.k[0]]
    }

    /// `int |B* . grad eta_eps| dx` with `eta` regularized by a Gaussian of
    /// width `eps`, evaluated on `n` nodes. Vanishes linearly in `eps`.
    pub fn transport_residual(&self, slab: &SlabEquilibrium, n: usize, eps: f64) -> f64 {
        let xs = slab.nodes(n);
        let dx = xs[1] - xs[0];
        xs.iter()
            .map(|&x| {
                let d = gaussian(x - self.x_r, eps);
                // B* . grad acts on e^{i(ky y + kz z)} as i k . B*.
                (slab.resonance_function(x) * self.sheet_strength.norm() * d).abs()
            })
            .sum::<f64>()
            * dx
    }
}

fn gaussian(x: f64, eps: f64) -> f64 {
    (-(x * x) / (2.0 * eps * eps)).exp() / ((2.0 * PI).sqrt() * eps)
}

pub fn singular_kernel(s: &SlabEquilibrium, x_r: f64, c0: Complex64, c1: Complex64) -> Result<SingularKernel> {
    if !(s.x_min < x_r && x_r < s.x_max) {
        return Err(Error::Config(format!("resonance {x_r} lies outside the open slab")));
    }
    let bz = s.bz(x_r);
    let scale = s.resonance_scale().max(f64::MIN_POSITIVE);
    if bz.abs() <= 1e-12 * scale {
        return Err(Error::Singular(format!(
            "B_z vanishes at the resonance x_r = {x_r}; the sheet measure is undefined"
        )));
    }
    Ok(SingularKernel { x_r, c0, c1, k: s.k, sheet_strength: I * c1 * s.k[0] / bz })
}

/// Sine-like kernel of `u'' - q^2 u` and its derivative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct Kernel1D {
    q2: f64,
}

impl Kernel1D {
    fn s(&self, t: f64) -> f64 {
        if self.q2 > 0.0 {
            let q = self.q2.sqrt();
            (q * t).sinh() / q
        } else if self.q2 < 0.0 {
            let q = (-self.q2).sqrt();
            (q * t).sin() / q
        } else {
            t
        }
    }
    fn c(&self, t: f64) -> f64 {
        if self.q2 > 0.0 {
            (self.q2.sqrt() * t).cosh()
        } else if self.q2 < 0.0 {
            ((-self.q2).sqrt() * t).cos()
        } else {
            1.0
        }
    }
}

/// Side of the sheet used when evaluating at `x = x_r` exactly.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// Two-region solution of `curl b - mu2 b = mu4 Bcheck` for
/// `b(x) e^{i(ky y + kz z)}` with `div b = 0` and `b_x = 0` at the walls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TearingSolution {
    pub x_min: f64,
    pub x_max: f64,
    pub x_r: f64,
    pub k: [f64; 2],
    pub mu2: f64,
    pub mu4: f64,
    /// `q^2 = |k|^2 - mu2^2`.
    pub q2: f64,
    /// Jump of `b_x'` across the sheet, `mu4 c1 |k|^2`.
    pub forcing: Complex64,
    kernel: Kernel1D,
    denom: f64,
}

impl TearingSolution {
    /// `(b_x, b_x')` at `x`.
    fn bx_pair(&self, x: f64, side: Side) -> (Complex64, Complex64) {
        let (a, b, r, kn) = (self.x_min, self.x_max, self.x_r, self.kernel);
        let left = x < r || (x == r && side == Side::Left);
        let (g, dg) = if left {
            (-kn.s(x - a) * kn.s(b - r) / self.denom, -kn.c(x - a) * kn.s(b - r) / self.denom)
        } else {
            (-kn.s(r - a) * kn.s(b - x) / self.denom, kn.s(r - a) * kn.c(b - x) / self.denom)
        };
        (self.forcing * g, self.forcing * dg)
    }

    /// Complex perturbation amplitudes `(b_x, b_y, b_z)` at `x`.
    pub fn eval(&self, x: f64, side: Side) -> [Complex64; 3] {
        let (bx, dbx) = self.bx_pair(x, side);
        let (ky, kz) = (self.k[0], self.k[1]);
        let k2 = ky * ky + kz * kz;
        let by = I * (ky * dbx + kz * self.mu2 * bx) / k2;
        let bz = I * (kz * dbx - ky * self.mu2 * bx) / k2;
        [bx, by, bz]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JumpReport {
    pub by_measured: Complex64,
    pub by_expected: Complex64,
    pub bz_measured: Complex64,
    pub bz_expected: Complex64,
    /// Largest relative mismatch between measured and prescribed jumps.
    pub relative_mismatch: f64,
}

/// Sampled tearing perturbation and its checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TearingField {
    pub solution: TearingSolution,
    pub x: Vec<f64>,
    /// Perturbation amplitudes at each node (right-hand limit at the sheet).
    pub b: Vec<[Complex64; 3]>,
    pub jump: JumpReport,
    /// Largest normalized weak-form residual over test functions off the sheet.
    pub interior_residual: f64,
}

impl TearingField {
    /// Equilibrium plus perturbation, `B* + Re(b e^{i(ky y + kz z)})`.
    pub fn total_field(&self, slab: &SlabEquilibrium, x: f64, y: f64, z: f64) -> [f64; 3] {
        let ph = Complex64::from_polar(1.0, self.solution.k[0] * y + self.solution.k[1] * z);
        let b = self.solution.eval(x, Side::Right);
        [(b[0] * ph).re, slab.by(x) + (b[1] * ph).re, slab.bz(x) + (b[2] * ph).re]
    }
}

/// Builds the tearing perturbation driven by `mu4` times the kernel's sheet,
/// sampled on `n` nodes.
pub fn tearing_equilibrium(
    s: &SlabEquilibrium,
    kernel: &SingularKernel,
    mu2: f64,
    mu4: f64,
    n: usize,
) -> Result<TearingField> {
    if n < 3 {
        return Err(Error::Config("need at least 3 nodes".into()));
    }
    let k2 = s.k2();
    let q2 = k2 - mu2 * mu2;
    let kern = Kernel1D { q2 };
    let len = s.x_max - s.x_min;
    let denom = kern.s(len);
    if denom.abs() <= 1e-12 * len {
        return Err(Error::Singular(format!(
            "mu2^2 = {} is an eigenvalue of the wall-bounded operator for |k|^2 = {k2}",
            mu2 * mu2
        )));
    }
    let solution = TearingSolution {
        x_min: s.x_min,
        x_max: s.x_max,
        x_r: kernel.x_r,
        k: s.k,
        mu2,
        mu4,
        q2,
        forcing: mu4 * kernel.c1 * k2,
        kernel: kern,
        denom,
    };
    let x = s.nodes(n);
    let b = x.iter().map(|&xi| solution.eval(xi, Side::Right)).collect();

    let hop = 1e-9 * len;
    let minus = solution.eval(kernel.x_r - hop, Side::Left);
    let plus = solution.eval(kernel.x_r + hop, Side::Right);
    let by_measured = plus[1] - minus[1];
    let bz_measured = plus[2] - minus[2];
    let by_expected = I * mu4 * kernel.c1 * s.k[0];
    let bz_expected = I * mu4 * kernel.c1 * s.k[1];
    let scale = (mu4 * kernel.c1).norm() * k2.sqrt();
    let relative_mismatch = if scale == 0.0 {
        (by_measured.norm()).max(bz_measured.norm())
    } else {
        ((by_measured - by_expected).norm()).max((bz_measured - bz_expected).norm()) / scale
    };
    let jump = JumpReport { by_measured, by_expected, bz_measured, bz_expected, relative_mismatch };
    let interior_residual = weak_residual(&solution, 8, 2001);
    Ok(TearingField { solution, x, b, jump, interior_residual })
}

fn bump(t: f64) -> (f64, f64) {
    if t.abs() >= 1.0 {
        return (0.0, 0.0);
    }
    let u = 1.0 - t * t;
    let v = (-1.0 / u).exp();
    (v, v * (-2.0 * t / (u * u)))
}

/// Weak-form residuals of the four component equations against smooth bumps
/// supported strictly inside each region, normalized by `int |phi|` and the
/// solution amplitude.
fn weak_residual(sol: &TearingSolution, per_region: usize, quad: usize) -> f64 {
    let (ky, kz, mu2) = (sol.k[0], sol.k[1], sol.mu2);
    let amp = {
        let n = 513;
        (0..n)
            .map(|i| sol.x_min + (sol.x_max - sol.x_min) * i as f64 / (n - 1) as f64)
            .flat_map(|x| sol.eval(x, Side::Right))
            .fold(0.0_f64, |m, c| m.max(c.norm()))
    };
    if amp == 0.0 {
        return 0.0;
    }
    let mut worst = 0.0_f64;
    for (lo, hi) in [(sol.x_min, sol.x_r), (sol.x_r, sol.x_max)] {
        let width = hi - lo;
        if width <= 0.0 {
            continue;
        }
        for j in 0..per_region {
            // Supports of radius width/8 centred in the open region.
            let r = width / 8.0;
            let c = lo + r * 1.05 + (width - 2.1 * r) * (j as f64 + 0.5) / per_region as f64;
            let h = 2.0 * r / (quad - 1) as f64;
            let mut res = [Complex64::default(); 4];
            let mut mass = 0.0;
            for q in 0..quad {
                let x = c - r + q as f64 * h;
                let (phi, dphi_dt) = bump((x - c) / r);
                let dphi = dphi_dt / r;
                let [bx, by, bz] = sol.eval(x, Side::Right);
                // i ky bz - i kz by - mu2 bx = 0
                res[0] += (I * ky * bz - I * kz * by - mu2 * bx) * phi;
                // i kz bx - bz' - mu2 by = 0
                res[1] += (I * kz * bx - mu2 * by) * phi + bz * dphi;
                // by' - i ky bx - mu2 bz = 0
                res[2] += (-I * ky * bx - mu2 * bz) * phi - by * dphi;
                // bx' + i ky by + i kz bz = 0
                res[3] += (I * ky * by + I * kz * bz) * phi - bx * dphi;
                mass += phi;
            }
            let norm = mass * h * amp;
            for rr in res {
                worst = worst.max((rr * h).norm() / norm);
            }
        }
    }
    worst
}

/// Comparison of the sheet solution with a second-order finite-difference
/// solve of `b_x'' - q^2 b_x = forcing * delta_eps(x - x_r)`, `eps = 4 dx`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegularizedComparison {
    pub nodes: usize,
    pub eps: f64,
    /// Max-norm difference of `b_x` and `b_y` outside `|x - x_r| <= 8 eps`,
    /// relative to `max(1, max|b|)`.
    pub mismatch_outside: f64,
    /// Same over every node, including the regularization band.
    pub mismatch_full: f64,
}

pub fn regularized_comparison(sol: &TearingSolution, nodes: usize) -> Result<RegularizedComparison> {
    if nodes < 5 {
        return Err(Error::Config("need at least 5 nodes".into()));
    }
    let n = nodes;
    let h = (sol.x_max - sol.x_min) / (n - 1) as f64;
    let eps = 4.0 * h;
    let xs: Vec<f64> = (0..n).map(|i| sol.x_min + i as f64 * h).collect();
    // Interior unknowns 1..n-2, walls fixed at zero.
    let m = n - 2;
    let diag = -2.0 / (h * h) - sol.q2;
    let off = 1.0 / (h * h);
    let rhs: Vec<Complex64> = (1..n - 1).map(|i| sol.forcing * gaussian(xs[i] - sol.x_r, eps)).collect();
    let u = thomas(m, off, diag, off, &rhs)?;
    let mut bx = vec![Complex64::default(); n];
    bx[1..n - 1].copy_from_slice(&u);

    let (ky, kz) = (sol.k[0], sol.k[1]);
    let k2 = ky * ky + kz * kz;
    let mut full = 0.0_f64;
    let mut outside = 0.0_f64;
    let mut amp = 1.0_f64;
    for i in 1..n - 1 {
        let exact = sol.eval(xs[i], Side::Right);
        let dbx = (bx[i + 1] - bx[i - 1]) / (2.0 * h);
        let by = I * (ky * dbx + kz * sol.mu2 * bx[i]) / k2;
        let d = (bx[i] - exact[0]).norm().max((by - exact[1]).norm());
        amp = amp.max(exact[0].norm()).max(exact[1].norm());
        full = full.max(d);
        if (xs[i] - sol.x_r).abs() > 8.0 * eps {
            outside = outside.max(d);
        }
    }
    Ok(RegularizedComparison { nodes, eps, mismatch_outside: outside / amp, mismatch_full: full / amp })
}

/// Constant-coefficient tridiagonal solve.
fn thomas(m: usize, lower: f64, diag: f64, upper: f64, rhs: &[Complex64]) -> Result<Vec<Complex64>> {
    let mut c = vec![0.0; m];
    let mut d = vec![Complex64::default(); m];
    let mut denom = diag;
    if denom == 0.0 {
        return Err(Error::Singular("tridiagonal pivot vanished".into()));
    }
    c[0] = upper / denom;
    d[0] = rhs[0] / denom;
    for i in 1..m {
        denom = diag - lower * c[i - 1];
        if denom.abs() < 1e-300 {
            return Err(Error::Singular("tridiagonal pivot vanished".into()));
        }
        c[i] = upper / denom;
        d[i] = (rhs[i] - lower * d[i - 1]) / denom;
    }
    for i in (0..m - 1).rev() {
        let next = d[i + 1];
        d[i] -= c[i] * next;
    }
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tanh_slab() -> SlabEquilibrium {
        SlabEquilibrium::new(-1.0, 1.0, "tanh(x/0.5)", "1", [1.0, 0.0]).unwrap()
    }

    #[test]
    fn beltrami_targets() {
        let g = Grid3D::cube_2pi(8).unwrap();
        let s = solve_beltrami(&g, 1.0).unwrap();
        assert_eq!(s.mu, 1.0);
        assert_eq!(s.mode, [1, 0, 0]);
        let expect = VectorField3D::from_fn(g, |[x, _, _]| [0.0, x.sin(), x.cos()]);
        assert!(s.field.axpy(-1.0, &expect).unwrap().max_abs() < 1e-15);
        assert!(s.residual < 1e-12);
        let m = solve_beltrami(&g, -1.0).unwrap();
        assert_eq!(m.mu, -1.0);
        assert!(m.residual < 1e-12);
        assert_eq!(solve_beltrami(&g, 1.3).unwrap().mu, 2f64.sqrt());
        assert!(solve_beltrami(&g, 0.0).is_err());
    }

    #[test]
    fn shells_on_unit_lattice() {
        let s = eigenvalue_shells([TAU; 3], 4);
        assert_eq!(s, vec![1.0, 2f64.sqrt(), 3f64.sqrt(), 2.0]);
    }

    #[test]
    fn beltrami_family_is_stationary() {
        let g = Grid3D::cube_2pi(8).unwrap();
        let b = solve_beltrami(&g, 1.0).unwrap().field;
        let m = MultiplierSet { mu1: MultiplierSet::default().enthalpy(1.0), mu2: 1.0, ..Default::default() };
        let rho = vec![1.0; g.len()];
        let r = ec_gradient_residual(&rho, &VectorField3D::zeros(g), &b, None, &m).unwrap();
        assert!(r.max() < 1e-12, "{r:?}");
        // Mock field equal to B: any split mu2 + mu4 = mu is stationary.
        let m2 = MultiplierSet { mu2: 0.25, mu4: 0.75, ..m };
        assert!(ec_gradient_residual(&rho, &VectorField3D::zeros(g), &b, Some(&b), &m2).unwrap().max() < 1e-12);
    }

    #[test]
    fn multiplier_validation() {
        let g = Grid3D::cube_2pi(4).unwrap();
        let z = VectorField3D::zeros(g);
        let bad = MultiplierSet { gamma: 1.0, ..Default::default() };
        assert!(ec_gradient_residual(&vec![1.0; g.len()], &z, &z, None, &bad).is_err());
    }

    #[test]
    fn algebraic_resonances() {
        let s = SlabEquilibrium::new(-1.0, 1.0, "x", "1", [1.0, 0.0]).unwrap();
        assert_eq!(find_resonant_surface(&s, 100).roots, vec![0.0]);
        let s = SlabEquilibrium::new(-1.0, 1.0, "x", "1", [1.0, -0.5]).unwrap();
        let r = find_resonant_surface(&s, 101).roots;
        assert_eq!(r.len(), 1);
        assert!((r[0] - 0.5).abs() < 1e-13);
    }

    #[test]
    fn no_resonance_reports_minimum() {
        let s = SlabEquilibrium::new(-1.0, 1.0, "x", "1", [0.0, 1.0]).unwrap();
        let scan = find_resonant_surface(&s, 64);
        assert!(scan.roots.is_empty());
        assert!((scan.min_abs - 1.0).abs() < 1e-15);
    }

    #[test]
    fn touching_zero_is_tangential() {
        let s = SlabEquilibrium::new(-1.0, 1.0, "(x-0.1)^2", "0", [1.0, 0.0]).unwrap();
        let scan = find_resonant_surface(&s, 200);
        assert!(scan.roots.is_empty());
        assert_eq!(scan.tangential.len(), 1);
        assert!((scan.tangential[0] - 0.1).abs() < 0.02);
    }

    #[test]
    fn kernel_profiles() {
        let s = tanh_slab();
        let k = singular_kernel(&s, 0.0, Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)).unwrap();
        assert_eq!(k.theta(-0.5), Complex64::new(0.0, 0.0));
        assert_eq!(k.theta(0.5), Complex64::new(1.0, 0.0));
        assert_eq!(k.sheet_strength, I);
        let zero = singular_kernel(&s, 0.0, Complex64::new(2.0, 0.0), Complex64::default()).unwrap();
        assert_eq!(zero.sheet_field(), [Complex64::default(); 3]);
        assert_eq!(zero.one_form(-0.3), zero.one_form(0.7));
    }

    #[test]
    fn kernel_needs_axial_field() {
        let s = SlabEquilibrium::new(-1.0, 1.0, "x", "x", [1.0, 1.0]).unwrap();
        let r = singular_kernel(&s, 0.0, Complex64::default(), Complex64::new(1.0, 0.0));
        assert!(matches!(r, Err(Error::Singular(_))));
    }

    #[test]
    fn sheet_is_transported_to_first_order() {
        let s = tanh_slab();
        let k = singular_kernel(&s, 0.0, Complex64::default(), Complex64::new(1.0, 0.0)).unwrap();
        let r1 = k.transport_residual(&s, 1025, 4.0 * 2.0 / 1024.0);
        let r2 = k.transport_residual(&s, 2049, 4.0 * 2.0 / 2048.0);
        assert!(r1 < 0.05);
        assert!((r1 / r2 - 2.0).abs() < 0.05, "{r1} {r2}");
    }

    #[test]
    fn tearing_linearity_and_zero_drive() {
        let s = tanh_slab();
        let c = Complex64::new(0.7, -0.2);
        let kp = singular_kernel(&s, 0.0, Complex64::default(), c).unwrap();
        let km = singular_kernel(&s, 0.0, Complex64::default(), -c).unwrap();
        let tp = tearing_equilibrium(&s, &kp, 0.3, 1.0, 65).unwrap();
        let tm = tearing_equilibrium(&s, &km, 0.3, 1.0, 65).unwrap();
        for (p, m) in tp.b.iter().zip(&tm.b) {
            for a in 0..3 {
                assert_eq!(p[a], -m[a]);
            }
        }
        let t0 = tearing_equilibrium(&s, &kp, 0.3, 0.0, 65).unwrap();
        assert!(t0.b.iter().flatten().all(|c| c.norm() == 0.0));
        assert_eq!(t0.total_field(&s, 0.3, 1.0, 2.0), [0.0, s.by(0.3), 1.0]);
    }

    #[test]
    fn tearing_checks_pass() {
        let s = SlabEquilibrium::new(-1.0, 1.5, "tanh(x/0.5)", "1", [1.0, 0.4]).unwrap();
        let xr = find_resonant_surface(&s, 512).roots[0];
        let k = singular_kernel(&s, xr, Complex64::new(0.1, 0.0), Complex64::new(1.0, 0.5)).unwrap();
        for mu2 in [0.0, 0.5, 1.5] {
            let t = tearing_equilibrium(&s, &k, mu2, 0.8, 129).unwrap();
            assert!(t.jump.relative_mismatch < 1e-6, "{:?}", t.jump);
            assert!(t.interior_residual < 1e-8, "mu2 {mu2}: {}", t.interior_residual);
            assert!(t.solution.eval(s.x_min, Side::Left)[0].norm() < 1e-15);
            assert!(t.solution.eval(s.x_max, Side::Right)[0].norm() < 1e-15);
        }
    }

    #[test]
    fn wall_eigenvalue_is_singular() {
        // q^2 = -(pi/2)^2 on a slab of length 2 makes sin(|q| L) vanish.
        let s = tanh_slab();
        let k = singular_kernel(&s, 0.0, Complex64::default(), Complex64::new(1.0, 0.0)).unwrap();
        let mu2 = (1.0 + (PI / 2.0).powi(2)).sqrt();
        assert!(matches!(tearing_equilibrium(&s, &k, mu2, 1.0, 33), Err(Error::Singular(_))));
    }
}
