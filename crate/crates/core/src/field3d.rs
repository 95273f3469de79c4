//! Triply periodic vector fields with spectral curl, divergence and the
//! Coulomb-gauge inverse curl. Used by the static 3D diagnostics.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

use crate::error::{Error, Result};

/// Uniform periodic grid on `[0, l0) x [0, l1) x [0, l2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid3D {
    pub n: [usize; 3],
    pub l: [f64; 3],
}

impl Grid3D {
    pub fn new(n: [usize; 3], l: [f64; 3]) -> Result<Self> {
        for a in 0..3 {
            if n[a] < 4 || n[a] % 2 != 0 {
                return Err(Error::Config(format!("3D resolution must be even and >= 4, got {:?}", n)));
            }
            if !(l[a] > 0.0) || !l[a].is_finite() {
                return Err(Error::Config(format!("3D periods must be positive, got {:?}", l)));
            }
        }
        Ok(Self { n, l })
    }

    /// Cube `[0, 2pi)^3` with `n` points per side.
    pub fn cube_2pi(n: usize) -> Result<Self> {
        Self::new([n; 3], [TAU; 3])
    }

    pub fn len(&self) -> usize {
        self.n[0] * self.n[1] * self.n[2]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.l[axis] / self.n[axis] as f64
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing(0) * self.spacing(1) * self.spacing(2)
    }

    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (k * self.n[1] + j) * self.n[0] + i
    }

    pub fn point(&self, idx: usize) -> [f64; 3] {
        let i = idx % self.n[0];
        let j = (idx / self.n[0]) % self.n[1];
        let k = idx / (self.n[0] * self.n[1]);
        [i as f64 * self.spacing(0), j as f64 * self.spacing(1), k as f64 * self.spacing(2)]
    }

    /// Samples a scalar function on the grid.
    pub fn sample(&self, f: impl Fn([f64; 3]) -> f64) -> Vec<f64> {
        (0..self.len()).map(|idx| f(self.point(idx))).collect()
    }

    /// Wavenumbers along `axis`, with the Nyquist entry set to zero for
    /// first derivatives.
    fn wavenumbers(&self, axis: usize) -> Vec<f64> {
        let n = self.n[axis];
        let scale = TAU / self.l[axis];
        (0..n)
            .map(|m| {
                if 2 * m == n {
                    0.0
                } else if 2 * m < n {
                    m as f64 * scale
                } else {
                    (m as f64 - n as f64) * scale
                }
            })
            .collect()
    }

    fn kvec(&self) -> impl Fn(usize) -> [f64; 3] {
        let ks = [self.wavenumbers(0), self.wavenumbers(1), self.wavenumbers(2)];
        let n = self.n;
        move |idx| {
            let i = idx % n[0];
            let j = (idx / n[0]) % n[1];
            let k = idx / (n[0] * n[1]);
            [ks[0][i], ks[1][j], ks[2][k]]
        }
    }

    pub fn integrate(&self, f: &[f64]) -> f64 {
        f.iter().sum::<f64>() * self.cell_volume()
    }
}

struct Fft3 {
    grid: Grid3D,
    fwd: [Arc<dyn Fft<f64>>; 3],
    inv: [Arc<dyn Fft<f64>>; 3],
}

impl Fft3 {
    fn new(grid: Grid3D) -> Self {
        let mut p = FftPlanner::new();
        let fwd = [0, 1, 2].map(|a| p.plan_fft_forward(grid.n[a]));
        let inv = [0, 1, 2].map(|a| p.plan_fft_inverse(grid.n[a]));
        Self { grid, fwd, inv }
    }

    fn transform(&self, data: &mut [Complex64], plans: &[Arc<dyn Fft<f64>>; 3]) {
        let [nx, ny, nz] = self.grid.n;
        for row in data.chunks_mut(nx) {
            plans[0].process(row);
        }
        let mut line = vec![Complex64::default(); ny.max(nz)];
        for k in 0..nz {
            for i in 0..nx {
                for j in 0..ny {
                    line[j] = data[(k * ny + j) * nx + i];
                }
                plans[1].process(&mut line[..ny]);
                for j in 0..ny {
                    data[(k * ny + j) * nx + i] = line[j];
                }
            }
        }
        for j in 0..ny {
            for i in 0..nx {
                for k in 0..nz {
                    line[k] = data[(k * ny + j) * nx + i];
                }
                plans[2].process(&mut line[..nz]);
                for k in 0..nz {
                    data[(k * ny + j) * nx + i] = line[k];
                }
            }
        }
    }

    fn forward(&self, f: &[f64]) -> Vec<Complex64> {
        let mut d: Vec<Complex64> = f.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.transform(&mut d, &self.fwd);
        d
    }

    fn inverse(&self, mut s: Vec<Complex64>) -> Vec<f64> {
        self.transform(&mut s, &self.inv);
        let norm = 1.0 / self.grid.len() as f64;
        s.iter().map(|c| c.re * norm).collect()
    }
}

/// Three-component field sampled on a [`Grid3D`].
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField3D {
    grid: Grid3D,
    comps: [Vec<f64>; 3],
}

impl VectorField3D {
    pub fn new(grid: Grid3D, comps: [Vec<f64>; 3]) -> Result<Self> {
        if comps.iter().any(|c| c.len() != grid.len()) {
            return Err(Error::GridMismatch(format!("component lengths must equal {}", grid.len())));
        }
        Ok(Self { grid, comps })
    }

    pub fn zeros(grid: Grid3D) -> Self {
        let z = vec![0.0; grid.len()];
        Self { grid, comps: [z.clone(), z.clone(), z] }
    }

    pub fn from_fn(grid: Grid3D, f: impl Fn([f64; 3]) -> [f64; 3]) -> Self {
        let mut out = Self::zeros(grid);
        for idx in 0..grid.len() {
            let v = f(grid.point(idx));
            for a in 0..3 {
                out.comps[a][idx] = v[a];
            }
        }
        out
    }

    pub fn grid(&self) -> &Grid3D {
        &self.grid
    }

    pub fn comp(&self, axis: usize) -> &[f64] {
        &self.comps[axis]
    }

    pub fn comps(&self) -> &[Vec<f64>; 3] {
        &self.comps
    }

    pub fn check_same_grid(&self, other: &Self) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch(format!("{:?} vs {:?}", self.grid, other.grid)));
        }
        Ok(())
    }

    pub fn scale(&self, alpha: f64) -> Self {
        Self { grid: self.grid, comps: self.comps.clone().map(|c| c.iter().map(|v| alpha * v).collect()) }
    }

    /// `self + alpha * other`.
    pub fn axpy(&self, alpha: f64, other: &Self) -> Result<Self> {
        self.check_same_grid(other)?;
        let mut out = self.clone();
        for a in 0..3 {
            for (v, w) in out.comps[a].iter_mut().zip(&other.comps[a]) {
                *v += alpha * w;
            }
        }
        Ok(out)
    }

    /// Pointwise `|u|^2`.
    pub fn norm_sq_pointwise(&self) -> Vec<f64> {
        (0..self.grid.len()).map(|i| (0..3).map(|a| self.comps[a][i].powi(2)).sum()).collect()
    }

    /// L2 norm `(int |u|^2)^{1/2}`.
    pub fn norm_l2(&self) -> f64 {
        self.grid.integrate(&self.norm_sq_pointwise()).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.comps.iter().flatten().fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}

/// `int u . v` by the periodic trapezoidal rule.
pub fn integrate_dot(u: &VectorField3D, v: &VectorField3D) -> Result<f64> {
    u.check_same_grid(v)?;
    let s: f64 = (0..3).map(|a| u.comps[a].iter().zip(&v.comps[a]).map(|(p, q)| p * q).sum::<f64>()).sum();
    Ok(s * u.grid.cell_volume())
}

const I: Complex64 = Complex64::new(0.0, 1.0);

fn spectra(u: &VectorField3D, fft: &Fft3) -> [Vec<Complex64>; 3] {
    [0, 1, 2].map(|a| fft.forward(&u.comps[a]))
}

pub fn curl(u: &VectorField3D) -> VectorField3D {
    let fft = Fft3::new(u.grid);
    let s = spectra(u, &fft);
    let kv = u.grid.kvec();
    let mut out = [0, 1, 2].map(|_| vec![Complex64::default(); u.grid.len()]);
    for idx in 0..u.grid.len() {
        let k = kv(idx);
        let v = [s[0][idx], s[1][idx], s[2][idx]];
        out[0][idx] = I * (k[1] * v[2] - k[2] * v[1]);
        out[1][idx] = I * (k[2] * v[0] - k[0] * v[2]);
        out[2][idx] = I * (k[0] * v[1] - k[1] * v[0]);
    }
    VectorField3D { grid: u.grid, comps: out.map(|c| fft.inverse(c)) }
}

pub fn divergence(u: &VectorField3D) -> Vec<f64> {
    let fft = Fft3::new(u.grid);
    let s = spectra(u, &fft);
    let kv = u.grid.kvec();
    let d = (0..u.grid.len())
        .map(|idx| {
            let k = kv(idx);
            I * (k[0] * s[0][idx] + k[1] * s[1][idx] + k[2] * s[2][idx])
        })
        .collect();
    fft.inverse(d)
}

pub fn gradient(grid: &Grid3D, f: &[f64]) -> Result<VectorField3D> {
    if f.len() != grid.len() {
        return Err(Error::GridMismatch(format!("scalar of length {} on grid of {}", f.len(), grid.len())));
    }
    let fft = Fft3::new(*grid);
    let s = fft.forward(f);
    let kv = grid.kvec();
    let mut out = [0, 1, 2].map(|_| vec![Complex64::default(); grid.len()]);
    for idx in 0..grid.len() {
        let k = kv(idx);
        for a in 0..3 {
            out[a][idx] = I * k[a] * s[idx];
        }
    }
    Ok(VectorField3D { grid: *grid, comps: out.map(|c| fft.inverse(c)) })
}

/// RMS divergence, the solenoidality measure used throughout.
pub fn divergence_norm(u: &VectorField3D) -> f64 {
    let d = divergence(u);
    (d.iter().map(|v| v * v).sum::<f64>() / d.len() as f64).sqrt()
}

/// Rejects fields whose RMS divergence exceeds `tol * max(1, max|u|)`.
pub fn check_solenoidal(u: &VectorField3D, tol: f64) -> Result<()> {
    let norm = divergence_norm(u);
    if norm > tol * u.max_abs().max(1.0) {
        return Err(Error::NotSolenoidal { norm });
    }
    Ok(())
}

/// Vector potential `A` with `curl A = B`, `div A = 0` and zero mean
/// (Coulomb gauge). The mean of `B` has no periodic potential and is dropped.
pub fn curl_inverse(b: &VectorField3D) -> VectorField3D {
    let fft = Fft3::new(b.grid);
    let s = spectra(b, &fft);
    let kv = b.grid.kvec();
    let mut out = [0, 1, 2].map(|_| vec![Complex64::default(); b.grid.len()]);
    for idx in 0..b.grid.len() {
        let k = kv(idx);
        let k2 = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
        if k2 == 0.0 {
            continue;
        }
        // curl curl A = -Laplacian A = B  =>  A = i k x B / |k|^2
        let v = [s[0][idx], s[1][idx], s[2][idx]];
        out[0][idx] = I * (k[1] * v[2] - k[2] * v[1]) / k2;
        out[1][idx] = I * (k[2] * v[0] - k[0] * v[2]) / k2;
        out[2][idx] = I * (k[0] * v[1] - k[1] * v[0]) / k2;
    }
    VectorField3D { grid: b.grid, comps: out.map(|c| fft.inverse(c)) }
}
