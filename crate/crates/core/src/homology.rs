//! Hodge splitting and flux constraints on a periodic channel
//! `[0, lx) x [0, 1]`, periodic in x and bounded by walls at `y = 0, 1`.
//!
//! x is discretized by Fourier collocation, y by Chebyshev-Gauss-Lobatto
//! nodes with Clenshaw-Curtis weights.

use std::f64::consts::{PI, TAU};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tolerances;

/// Chebyshev-Gauss-Lobatto nodes on `[0, 1]`, increasing.
pub fn cgl_nodes(ny: usize) -> Vec<f64> {
    let n = (ny - 1) as f64;
    (0..ny).map(|j| 0.5 * (1.0 - (PI * j as f64 / n).cos())).collect()
}

/// Clenshaw-Curtis weights on `[0, 1]` for [`cgl_nodes`].
pub fn clenshaw_curtis(ny: usize) -> Vec<f64> {
    let n = ny - 1;
    let nf = n as f64;
    let mut w = vec![0.0; ny];
    let theta: Vec<f64> = (0..ny).map(|j| PI * j as f64 / nf).collect();
    let mut v = vec![1.0; ny];
    if n % 2 == 0 {
        w[0] = 1.0 / (nf * nf - 1.0);
        w[n] = w[0];
        for k in 1..n / 2 {
            let kf = k as f64;
            for j in 1..n {
                v[j] -= 2.0 * (2.0 * kf * theta[j]).cos() / (4.0 * kf * kf - 1.0);
            }
        }
        for j in 1..n {
            v[j] -= (nf * theta[j]).cos() / (nf * nf - 1.0);
        }
    } else {
        w[0] = 1.0 / (nf * nf);
        w[n] = w[0];
        for k in 1..=(n - 1) / 2 {
            let kf = k as f64;
            for j in 1..n {
                v[j] -= 2.0 * (2.0 * kf * theta[j]).cos() / (4.0 * kf * kf - 1.0);
            }
        }
    }
    for j in 1..n {
        w[j] = 2.0 * v[j] / nf;
    }
    // Map from [-1, 1] to [0, 1].
    w.iter().map(|x| 0.5 * x).collect()
}

/// Chebyshev differentiation matrix in `y` on [`cgl_nodes`], row-major.
pub fn cheb_diff(ny: usize) -> Vec<f64> {
    let n = ny - 1;
    let t: Vec<f64> = (0..ny).map(|j| (PI * j as f64 / n as f64).cos()).collect();
    let c = |j: usize| if j == 0 || j == n { 2.0 } else { 1.0 };
    let mut d = vec![0.0; ny * ny];
    for i in 0..ny {
        let mut row = 0.0;
        for j in 0..ny {
            if i != j {
                let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
                let v = c(i) / c(j) * sign / (t[i] - t[j]);
                d[i * ny + j] = v;
                row += v;
            }
        }
        d[i * ny + i] = -row;
    }
    // y = (1 - t) / 2, so d/dy = -2 d/dt.
    d.iter().map(|v| -2.0 * v).collect()
}

/// Planar vector field on the channel; samples are row-major, `j * nx + i`,
/// with `x_i = i lx / nx` and `y_j` the Chebyshev nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelField {
    nx: usize,
    ny: usize,
    lx: f64,
    ux: Vec<f64>,
    uy: Vec<f64>,
}

impl ChannelField {
    pub fn new(nx: usize, ny: usize, lx: f64, ux: Vec<f64>, uy: Vec<f64>) -> Result<Self> {
        if nx < 4 || nx % 2 != 0 {
            return Err(Error::Config(format!("nx = {nx}: must be even and at least 4")));
        }
        if ny < 3 {
            return Err(Error::Config(format!("ny = {ny}: need at least 3 Chebyshev nodes")));
        }
        if !(lx > 0.0) || !lx.is_finite() {
            return Err(Error::Config(format!("channel period must be positive, got {lx}")));
        }
        if ux.len() != nx * ny || uy.len() != nx * ny {
            return Err(Error::GridMismatch(format!("expected {} samples per component", nx * ny)));
        }
        Ok(Self { nx, ny, lx, ux, uy })
    }

    pub fn from_fn(nx: usize, ny: usize, lx: f64, f: impl Fn(f64, f64) -> [f64; 2]) -> Result<Self> {
        let ys = cgl_nodes(ny.max(3));
        let mut ux = Vec::with_capacity(nx * ny);
        let mut uy = Vec::with_capacity(nx * ny);
        for y in ys.iter().take(ny) {
            for i in 0..nx {
                let v = f(i as f64 * lx / nx as f64, *y);
                ux.push(v[0]);
                uy.push(v[1]);
            }
        }
        Self::new(nx, ny, lx, ux, uy)
    }

    /// `(psi_y, -psi_x) + (mean_flow, 0)` with derivatives taken by the
    /// discrete operators, so the result is discretely solenoidal. `psi`
    /// must be independent of x on the walls for the wall condition to hold.
    pub fn from_stream_function(
        nx: usize,
        ny: usize,
        lx: f64,
        psi: impl Fn(f64, f64) -> f64,
        mean_flow: f64,
    ) -> Result<Self> {
        let samples = Self::from_fn(nx, ny, lx, |x, y| [psi(x, y), 0.0])?;
        let p = samples.ux.clone();
        let py = samples.dy(&p);
        let px = samples.dx(&p);
        let ux = py.iter().map(|v| v + mean_flow).collect();
        let uy = px.iter().map(|v| -v).collect();
        Self::new(nx, ny, lx, ux, uy)
    }

    pub fn nx(&self) -> usize {
        self.nx
    }
    pub fn ny(&self) -> usize {
        self.ny
    }
    pub fn lx(&self) -> f64 {
        self.lx
    }
    pub fn ux(&self) -> &[f64] {
        &self.ux
    }
    pub fn uy(&self) -> &[f64] {
        &self.uy
    }
    pub fn y_nodes(&self) -> Vec<f64> {
        cgl_nodes(self.ny)
    }
    pub fn x(&self, i: usize) -> f64 {
        i as f64 * self.lx / self.nx as f64
    }

    fn check_same_grid(&self, other: &Self) -> Result<()> {
        if (self.nx, self.ny, self.lx) != (other.nx, other.ny, other.lx) {
            return Err(Error::GridMismatch("channel fields on different grids".into()));
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same_grid(other)?;
        let zip = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| p + q).collect();
        Ok(Self { ux: zip(&self.ux, &other.ux), uy: zip(&self.uy, &other.uy), ..*self })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(-1.0))
    }

    pub fn scale(&self, a: f64) -> Self {
        Self {
            ux: self.ux.iter().map(|v| a * v).collect(),
            uy: self.uy.iter().map(|v| a * v).collect(),
            ..*self
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.ux.iter().chain(&self.uy).fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// `int f dx dy` with trapezoid in x and Clenshaw-Curtis in y.
    pub fn integrate(&self, f: &[f64]) -> f64 {
        let w = clenshaw_curtis(self.ny);
        let hx = self.lx / self.nx as f64;
        (0..self.ny).map(|j| w[j] * f[j * self.nx..(j + 1) * self.nx].iter().sum::<f64>()).sum::<f64>() * hx
    }

    /// `<u, v>` in L2.
    pub fn inner(&self, other: &Self) -> Result<f64> {
        self.check_same_grid(other)?;
        let p: Vec<f64> = (0..self.ux.len()).map(|k| self.ux[k] * other.ux[k] + self.uy[k] * other.uy[k]).collect();
        Ok(self.integrate(&p))
    }

    pub fn norm_sq(&self) -> f64 {
        self.inner(self).expect("same grid")
    }

    /// Spectral x-derivative of a scalar on the grid (Nyquist mode dropped).
    pub fn dx(&self, f: &[f64]) -> Vec<f64> {
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(self.nx);
        let inv = planner.plan_fft_inverse(self.nx);
        let mut out = vec![0.0; f.len()];
        for j in 0..self.ny {
            let mut row: Vec<Complex64> = f[j * self.nx..(j + 1) * self.nx].iter().map(|&v| Complex64::new(v, 0.0)).collect();
            fwd.process(&mut row);
            for (m, c) in row.iter_mut().enumerate() {
                let k = if 2 * m == self.nx {
                    0.0
                } else if 2 * m < self.nx {
                    m as f64
                } else {
                    m as f64 - self.nx as f64
                };
                *c *= Complex64::new(0.0, TAU * k / self.lx / self.nx as f64);
            }
            inv.process(&mut row);
            for i in 0..self.nx {
                out[j * self.nx + i] = row[i].re;
            }
        }
        out
    }

    /// Chebyshev y-derivative of a scalar on the grid.
    pub fn dy(&self, f: &[f64]) -> Vec<f64> {
        let d = cheb_diff(self.ny);
        let mut out = vec![0.0; f.len()];
        for j in 0..self.ny {
            for l in 0..self.ny {
                let djl = d[j * self.ny + l];
                if djl != 0.0 {
                    for i in 0..self.nx {
                        out[j * self.nx + i] += djl * f[l * self.nx + i];
                    }
                }
            }
        }
        out
    }

    pub fn divergence(&self) -> Vec<f64> {
        let a = self.dx(&self.ux);
        let b = self.dy(&self.uy);
        a.iter().zip(&b).map(|(p, q)| p + q).collect()
    }

    /// RMS of the discrete divergence.
    pub fn divergence_norm(&self) -> f64 {
        let d = self.divergence();
        (d.iter().map(|v| v * v).sum::<f64>() / d.len() as f64).sqrt()
    }

    /// Largest `|u_y|` on the two walls.
    pub fn wall_normal_max(&self) -> f64 {
        let top = (self.ny - 1) * self.nx;
        (0..self.nx).map(|i| self.uy[i].abs().max(self.uy[top + i].abs())).fold(0.0, f64::max)
    }

    /// Errors unless the field is discretely solenoidal and tangent to the walls.
    pub fn check_admissible(&self) -> Result<()> {
        let scale = self.max_abs().max(1.0);
        let norm = self.divergence_norm();
        if norm > tolerances::SOLENOIDAL * scale {
            return Err(Error::NotSolenoidal { norm });
        }
        let max = self.wall_normal_max();
        if max > tolerances::SOLENOIDAL * scale {
            return Err(Error::WallViolation { max });
        }
        Ok(())
    }
}

/// Splits an admissible field into its harmonic part, the uniform stream
/// `(U, 0)` carrying the mean x-flux, and the zero-flux remainder.
pub fn hodge_decompose(u: &ChannelField) -> Result<(ChannelField, ChannelField)> {
    u.check_admissible()?;
    let area = u.lx;
    let mean = u.integrate(&u.ux) / area;
    let n = u.nx * u.ny;
    let harmonic = ChannelField { ux: vec![mean; n], uy: vec![0.0; n], ..*u };
    let rest = u.sub(&harmonic)?;
    Ok((harmonic, rest))
}

/// `int_0^1 u_x(x_cut, y) dy`, with trigonometric interpolation in x.
pub fn flux_through_cut(u: &ChannelField, x_cut: f64) -> f64 {
    let w = clenshaw_curtis(u.ny);
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(u.nx);
    let theta = TAU * x_cut / u.lx;
    let mut total = 0.0;
    for j in 0..u.ny {
        let mut row: Vec<Complex64> = u.ux[j * u.nx..(j + 1) * u.nx].iter().map(|&v| Complex64::new(v, 0.0)).collect();
        fwd.process(&mut row);
        let mut v = 0.0;
        for (m, c) in row.iter().enumerate() {
            let k = if 2 * m <= u.nx { m as f64 } else { m as f64 - u.nx as f64 };
            let e = if 2 * m == u.nx {
                Complex64::new((k * theta).cos(), 0.0)
            } else {
                Complex64::from_polar(1.0, k * theta)
            };
            v += (c * e).re;
        }
        total += w[j] * v / u.nx as f64;
    }
    total
}

/// Flux through the cut at `x = x_cut`, evaluated as the pairing of `u` with
/// the gradient of the winding angle `frac((x - x_cut)/lx)`: the smooth part
/// `(1/lx, 0)` against `u` plus the angle against `div u`.
pub fn harmonic_winding_pairing_at(u: &ChannelField, x_cut: f64) -> f64 {
    let smooth = u.integrate(&u.ux) / u.lx;
    let div = u.divergence();
    let angle: Vec<f64> = (0..u.nx * u.ny)
        .map(|k| {
            let s = (u.x(k % u.nx) - x_cut) / u.lx;
            let f = s - s.floor();
            if f == 0.0 {
                0.5
            } else {
                f
            }
        })
        .collect();
    let prod: Vec<f64> = angle.iter().zip(&div).map(|(a, d)| a * d).collect();
    smooth + u.integrate(&prod)
}

/// [`harmonic_winding_pairing_at`] for the cut at `x = 0`.
pub fn harmonic_winding_pairing(u: &ChannelField) -> f64 {
    harmonic_winding_pairing_at(u, 0.0)
}

/// Dimension of the discrete harmonic space (solenoidal, irrotational,
/// tangent to the walls, no x-Nyquist content) on an `nx x ny` channel.
pub fn harmonic_dimension(nx: usize, ny: usize, lx: f64) -> Result<usize> {
    let proto = ChannelField::new(nx, ny, lx, vec![0.0; nx * ny], vec![0.0; nx * ny])?;
    let npts = nx * ny;
    let unit = |k: usize| {
        let mut e = vec![0.0; npts];
        e[k] = 1.0;
        e
    };
    // Columns: ux then uy; derivative operators applied to unit vectors.
    let dx_cols: Vec<Vec<f64>> = (0..npts).map(|k| proto.dx(&unit(k))).collect();
    let dy_cols: Vec<Vec<f64>> = (0..npts).map(|k| proto.dy(&unit(k))).collect();
    let rows = 2 * npts + 2 * nx + 2 * ny;
    let mut m = DMatrix::<f64>::zeros(rows, 2 * npts);
    for k in 0..npts {
        for r in 0..npts {
            // div = dx ux + dy uy
            m[(r, k)] = dx_cols[k][r];
            m[(r, npts + k)] = dy_cols[k][r];
            // curl = dx uy - dy ux
            m[(npts + r, npts + k)] = dx_cols[k][r];
            m[(npts + r, k)] = -dy_cols[k][r];
        }
    }
    let top = (ny - 1) * nx;
    for i in 0..nx {
        m[(2 * npts + i, npts + i)] = 1.0;
        m[(2 * npts + nx + i, npts + top + i)] = 1.0;
    }
    // Nyquist coefficient of each row of both components.
    for j in 0..ny {
        for i in 0..nx {
            let s = if i % 2 == 0 { 1.0 } else { -1.0 };
            m[(2 * npts + 2 * nx + j, j * nx + i)] = s;
            m[(2 * npts + 2 * nx + ny + j, npts + j * nx + i)] = s;
        }
    }
    let sv = m.svd(false, false).singular_values;
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    Ok(sv.iter().filter(|&&s| s < tolerances::KERNEL_SVD * smax).count())
}
