//! Doubly periodic scalar fields with Fourier pseudo-spectral operators.
//!
//! Samples live on the uniform grid `x_i = i lx / nx`, `y_j = j ly / ny`,
//! stored row-major with `x` fastest (`values[j * nx + i]`). Products inside
//! [`bracket`] are dealiased with the 2/3 rule: both factors are truncated to
//! `|m| <= (n - 1) / 3` per axis before multiplication and the product is
//! truncated again, so quadratic terms are exact Galerkin projections.

use std::cell::RefCell;
use std::collections::HashMap;
use std::f64::consts::TAU;
use std::rc::Rc;
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Minimum number of samples per period along each axis.
pub const MIN_RESOLUTION: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField2D {
    nx: usize,
    ny: usize,
    lx: f64,
    ly: f64,
    values: Vec<f64>,
    zero_mean: bool,
}

impl ScalarField2D {
    pub fn new(nx: usize, ny: usize, lx: f64, ly: f64, values: Vec<f64>) -> Result<Self> {
        check_resolution(nx, ny)?;
        if !(lx > 0.0 && ly > 0.0 && lx.is_finite() && ly.is_finite()) {
            return Err(Error::Config(format!("periods must be positive, got ({lx}, {ly})")));
        }
        if values.len() != nx * ny {
            return Err(Error::Config(format!(
                "expected {} samples for a {nx}x{ny} grid, got {}",
                nx * ny,
                values.len()
            )));
        }
        Ok(Self { nx, ny, lx, ly, values, zero_mean: false })
    }

    pub fn zeros(nx: usize, ny: usize, lx: f64, ly: f64) -> Result<Self> {
        let mut f = Self::new(nx, ny, lx, ly, vec![0.0; nx * ny])?;
        f.zero_mean = true;
        Ok(f)
    }

    /// Samples `f(x, y)` on the grid.
    pub fn from_fn(
        nx: usize,
        ny: usize,
        lx: f64,
        ly: f64,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Self> {
        check_resolution(nx, ny)?;
        let dx = lx / nx as f64;
        let dy = ly / ny as f64;
        let mut values = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                values.push(f(i as f64 * dx, j as f64 * dy));
            }
        }
        Self::new(nx, ny, lx, ly, values)
    }

    /// Default `[0, 2pi)^2` domain.
    pub fn from_fn_2pi(n: usize, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        Self::from_fn(n, n, TAU, TAU, f)
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
    pub fn ly(&self) -> f64 {
        self.ly
    }
    pub fn dx(&self) -> f64 {
        self.lx / self.nx as f64
    }
    pub fn dy(&self) -> f64 {
        self.ly / self.ny as f64
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn values_mut(&mut self) -> &mut [f64] {
        self.zero_mean = false;
        &mut self.values
    }
    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
    pub fn is_zero_mean(&self) -> bool {
        self.zero_mean
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.nx + i]
    }

    pub fn x(&self, i: usize) -> f64 {
        i as f64 * self.dx()
    }

    pub fn y(&self, j: usize) -> f64 {
        j as f64 * self.dy()
    }

    pub fn same_grid(&self, other: &Self) -> bool {
        self.nx == other.nx && self.ny == other.ny && self.lx == other.lx && self.ly == other.ly
    }

    pub fn check_same_grid(&self, other: &Self) -> Result<()> {
        if self.same_grid(other) {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "{}x{} on [{}, {}] vs {}x{} on [{}, {}]",
                self.nx, self.ny, self.lx, self.ly, other.nx, other.ny, other.lx, other.ly
            )))
        }
    }

    /// Grid average.
    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Trapezoidal (equivalently rectangle) rule on the periodic grid; exact
    /// for trigonometric polynomials resolved by the grid.
    pub fn integrate(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.dx() * self.dy()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn norm_l2(&self) -> f64 {
        (self.values.iter().map(|v| v * v).sum::<f64>() * self.dx() * self.dy()).sqrt()
    }

    /// Subtracts the grid average and marks the field zero-mean.
    pub fn remove_mean(&mut self) {
        let m = self.mean();
        for v in &mut self.values {
            *v -= m;
        }
        self.zero_mean = true;
    }

    /// Marks the field zero-mean after verifying `|mean| < 1e-13 max(1, max|f|)`.
    pub fn assert_zero_mean(&mut self) -> Result<()> {
        let mean = self.mean();
        if mean.abs() > 1e-13 * self.max_abs().max(1.0) {
            return Err(Error::NonzeroMean { mean });
        }
        self.zero_mean = true;
        Ok(())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            values: self.values.iter().map(|&v| f(v)).collect(),
            zero_mean: false,
            ..*self
        }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.check_same_grid(other)?;
        Ok(Self {
            values: self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
            zero_mean: false,
            ..*self
        })
    }

    /// `self + alpha * other`, preserving the zero-mean flag when both carry it.
    pub fn axpy(&self, alpha: f64, other: &Self) -> Result<Self> {
        let mut out = self.zip_map(other, |a, b| a + alpha * b)?;
        out.zero_mean = self.zero_mean && other.zero_mean;
        Ok(out)
    }

    pub fn scale(&self, alpha: f64) -> Self {
        let mut out = self.map(|v| alpha * v);
        out.zero_mean = self.zero_mean;
        out
    }

    /// Unnormalized forward DFT coefficients (row-major, `kx` fastest).
    pub fn spectrum(&self) -> Vec<Complex64> {
        plan(self.nx, self.ny).forward(&self.values)
    }

    /// Inverse of [`ScalarField2D::spectrum`]; the imaginary part is dropped.
    pub fn from_spectrum(
        nx: usize,
        ny: usize,
        lx: f64,
        ly: f64,
        coeffs: &[Complex64],
    ) -> Result<Self> {
        check_resolution(nx, ny)?;
        let values = plan(nx, ny).inverse(coeffs.to_vec());
        Self::new(nx, ny, lx, ly, values)
    }

    /// `(1 / N^2) sum |f_hat|^2 * lx * ly`, the spectral side of Parseval.
    pub fn spectral_norm_sq(&self) -> f64 {
        let n = (self.nx * self.ny) as f64;
        self.spectrum().iter().map(|c| c.norm_sqr()).sum::<f64>() * self.lx * self.ly / (n * n)
    }

    /// Projection onto the 2/3-rule band.
    pub fn dealiased(&self) -> Self {
        let p = plan(self.nx, self.ny);
        let mut s = p.forward(&self.values);
        p.truncate(&mut s);
        let mut out = self.clone();
        out.values = p.inverse(s);
        out
    }

    /// Trigonometric interpolation at an arbitrary point.
    pub fn interpolate(&self, x: f64, y: f64) -> f64 {
        SpectralInterpolant::new(self).eval(x, y)
    }

}

fn check_resolution(nx: usize, ny: usize) -> Result<()> {
    for (name, n) in [("nx", nx), ("ny", ny)] {
        if n < MIN_RESOLUTION || n % 2 != 0 {
            return Err(Error::Config(format!(
                "{name} = {n}: resolution must be even and at least {MIN_RESOLUTION}"
            )));
        }
    }
    Ok(())
}

/// Cached FFT plans and wavenumbers for one grid size.
pub(crate) struct Plan2D {
    nx: usize,
    ny: usize,
    fx: Arc<dyn Fft<f64>>,
    ix: Arc<dyn Fft<f64>>,
    fy: Arc<dyn Fft<f64>>,
    iy: Arc<dyn Fft<f64>>,
    /// Signed mode numbers in FFT order.
    mx: Vec<i64>,
    my: Vec<i64>,
    keep_x: i64,
    keep_y: i64,
}

thread_local! {
    static PLANS: RefCell<HashMap<(usize, usize), Rc<Plan2D>>> = RefCell::new(HashMap::new());
}

pub(crate) fn plan(nx: usize, ny: usize) -> Rc<Plan2D> {
    PLANS.with(|cache| {
        cache
            .borrow_mut()
            .entry((nx, ny))
            .or_insert_with(|| Rc::new(Plan2D::new(nx, ny)))
            .clone()
    })
}

/// Blocked transpose of a row-major `rows x cols` array.
fn transpose(src: &[Complex64], dst: &mut [Complex64], cols: usize, rows: usize) {
    const B: usize = 16;
    for jb in (0..rows).step_by(B) {
        for ib in (0..cols).step_by(B) {
            for j in jb..(jb + B).min(rows) {
                for i in ib..(ib + B).min(cols) {
                    dst[i * rows + j] = src[j * cols + i];
                }
            }
        }
    }
}

pub(crate) fn mode_numbers(n: usize) -> Vec<i64> {
    (0..n as i64).map(|k| if k < n as i64 / 2 { k } else { k - n as i64 }).collect()
}

impl Plan2D {
    fn new(nx: usize, ny: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            nx,
            ny,
            fx: planner.plan_fft_forward(nx),
            ix: planner.plan_fft_inverse(nx),
            fy: planner.plan_fft_forward(ny),
            iy: planner.plan_fft_inverse(ny),
            mx: mode_numbers(nx),
            my: mode_numbers(ny),
            keep_x: (nx as i64 - 1) / 3,
            keep_y: (ny as i64 - 1) / 3,
        }
    }

    fn transform(&self, buf: &mut [Complex64], along_x: &dyn Fft<f64>, along_y: &dyn Fft<f64>) {
        along_x.process(buf);
        let (nx, ny) = (self.nx, self.ny);
        let mut t = vec![Complex64::new(0.0, 0.0); nx * ny];
        transpose(buf, &mut t, nx, ny);
        along_y.process(&mut t);
        transpose(&t, buf, ny, nx);
    }

    pub(crate) fn forward(&self, values: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.transform(&mut buf, self.fx.as_ref(), self.fy.as_ref());
        buf
    }

    pub(crate) fn inverse(&self, mut spec: Vec<Complex64>) -> Vec<f64> {
        self.transform(&mut spec, self.ix.as_ref(), self.iy.as_ref());
        let norm = 1.0 / (self.nx * self.ny) as f64;
        spec.iter().map(|c| c.re * norm).collect()
    }

    /// Index of the mode `-m` for the mode stored at `idx`.
    fn mirror(&self, idx: usize) -> usize {
        let (i, j) = (idx % self.nx, idx / self.nx);
        ((self.ny - j) % self.ny) * self.nx + (self.nx - i) % self.nx
    }

    /// Spectra of two real fields from one complex transform of `a + i b`.
    pub(crate) fn forward_pair(&self, a: &[f64], b: &[f64]) -> (Vec<Complex64>, Vec<Complex64>) {
        let mut z: Vec<Complex64> = a.iter().zip(b).map(|(&p, &q)| Complex64::new(p, q)).collect();
        self.transform(&mut z, self.fx.as_ref(), self.fy.as_ref());
        let half = Complex64::new(0.5, 0.0);
        let mut sa = vec![Complex64::new(0.0, 0.0); z.len()];
        let mut sb = vec![Complex64::new(0.0, 0.0); z.len()];
        for k in 0..z.len() {
            let m = z[self.mirror(k)].conj();
            sa[k] = (z[k] + m) * half;
            sb[k] = (z[k] - m) * Complex64::new(0.0, -0.5);
        }
        (sa, sb)
    }

    /// Real fields of two spectra from one inverse transform. Only the
    /// Hermitian part of each spectrum contributes, as with [`Self::inverse`].
    pub(crate) fn inverse_pair(&self, sa: &[Complex64], sb: &[Complex64]) -> (Vec<f64>, Vec<f64>) {
        let mut z: Vec<Complex64> = (0..sa.len())
            .map(|k| {
                let m = self.mirror(k);
                let p = 0.5 * (sa[k] + sa[m].conj());
                let q = 0.5 * (sb[k] + sb[m].conj());
                p + Complex64::new(-q.im, q.re)
            })
            .collect();
        self.transform(&mut z, self.ix.as_ref(), self.iy.as_ref());
        let norm = 1.0 / (self.nx * self.ny) as f64;
        (z.iter().map(|c| c.re * norm).collect(), z.iter().map(|c| c.im * norm).collect())
    }

    pub(crate) fn in_band(&self, i: usize, j: usize) -> bool {
        self.mx[i].abs() <= self.keep_x && self.my[j].abs() <= self.keep_y
    }

    pub(crate) fn truncate(&self, spec: &mut [Complex64]) {
        for j in 0..self.ny {
            for i in 0..self.nx {
                if !self.in_band(i, j) {
                    spec[j * self.nx + i] = Complex64::new(0.0, 0.0);
                }
            }
        }
    }

    /// Spectral derivative; the Nyquist mode of the differentiated axis is
    /// dropped so real fields stay real.
    pub(crate) fn deriv_spec(&self, spec: &[Complex64], axis: Axis, lx: f64, ly: f64) -> Vec<Complex64> {
        let mut out = spec.to_vec();
        for j in 0..self.ny {
            for i in 0..self.nx {
                let (m, n, l) = match axis {
                    Axis::X => (self.mx[i], self.nx, lx),
                    Axis::Y => (self.my[j], self.ny, ly),
                };
                let idx = j * self.nx + i;
                if 2 * m.unsigned_abs() as usize == n {
                    out[idx] = Complex64::new(0.0, 0.0);
                } else {
                    let k = TAU * m as f64 / l;
                    out[idx] *= Complex64::new(0.0, k);
                }
            }
        }
        out
    }

    /// `|k|^2` for every mode.
    pub(crate) fn k2(&self, lx: f64, ly: f64) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.nx * self.ny);
        for j in 0..self.ny {
            let ky = TAU * self.my[j] as f64 / ly;
            for i in 0..self.nx {
                let kx = TAU * self.mx[i] as f64 / lx;
                out.push(kx * kx + ky * ky);
            }
        }
        out
    }

    /// Dealiased `{a, b} = a_y b_x - a_x b_y` from (unnormalized) spectra;
    /// the result is band-limited with its mean mode set to zero.
    pub(crate) fn bracket_spec(
        &self,
        a: &[Complex64],
        b: &[Complex64],
        lx: f64,
        ly: f64,
    ) -> Vec<Complex64> {
        let mut a = a.to_vec();
        let mut b = b.to_vec();
        self.truncate(&mut a);
        self.truncate(&mut b);
        let ax = self.inverse(self.deriv_spec(&a, Axis::X, lx, ly));
        let ay = self.inverse(self.deriv_spec(&a, Axis::Y, lx, ly));
        let bx = self.inverse(self.deriv_spec(&b, Axis::X, lx, ly));
        let by = self.inverse(self.deriv_spec(&b, Axis::Y, lx, ly));
        let prod: Vec<f64> = (0..ax.len()).map(|i| ay[i] * bx[i] - ax[i] * by[i]).collect();
        let mut out = self.forward(&prod);
        self.truncate(&mut out);
        out[0] = Complex64::new(0.0, 0.0);
        out
    }
}

/// Spectral derivative along `axis`. The output has zero mean.
pub fn deriv(f: &ScalarField2D, axis: Axis) -> Result<ScalarField2D> {
    check_resolution(f.nx, f.ny)?;
    let p = plan(f.nx, f.ny);
    let mut s = p.deriv_spec(&p.forward(&f.values), axis, f.lx, f.ly);
    s[0] = Complex64::new(0.0, 0.0);
    let mut out = ScalarField2D::new(f.nx, f.ny, f.lx, f.ly, p.inverse(s))?;
    out.zero_mean = true;
    Ok(out)
}

pub fn laplacian(f: &ScalarField2D) -> Result<ScalarField2D> {
    let p = plan(f.nx, f.ny);
    let k2 = p.k2(f.lx, f.ly);
    let s: Vec<Complex64> = p.forward(&f.values).iter().zip(&k2).map(|(c, k)| -c * k).collect();
    let mut out = ScalarField2D::new(f.nx, f.ny, f.lx, f.ly, p.inverse(s))?;
    out.zero_mean = true;
    Ok(out)
}

/// Solves `Laplacian g = f` with `g` of zero mean. Rejects inputs whose
/// mean exceeds `1e-12 max(1, max|f|)`.
pub fn invert_laplacian(f: &ScalarField2D) -> Result<ScalarField2D> {
    let mean = f.mean();
    if mean.abs() > 1e-12 * f.max_abs().max(1.0) {
        return Err(Error::NonzeroMean { mean });
    }
    let p = plan(f.nx, f.ny);
    let mut s = p.forward(&f.values);
    invert_laplacian_spec(&p, &mut s, f.lx, f.ly);
    let mut out = ScalarField2D::new(f.nx, f.ny, f.lx, f.ly, p.inverse(s))?;
    out.zero_mean = true;
    Ok(out)
}

pub(crate) fn invert_laplacian_spec(p: &Plan2D, s: &mut [Complex64], lx: f64, ly: f64) {
    let k2 = p.k2(lx, ly);
    s[0] = Complex64::new(0.0, 0.0);
    for (c, k) in s.iter_mut().zip(&k2).skip(1) {
        *c /= -k;
    }
}

/// The canonical bracket `{a, b} = a_y b_x - a_x b_y`, dealiased.
pub fn bracket(a: &ScalarField2D, b: &ScalarField2D) -> Result<ScalarField2D> {
    a.check_same_grid(b)?;
    let p = plan(a.nx, a.ny);
    let s = p.bracket_spec(&p.forward(&a.values), &p.forward(&b.values), a.lx, a.ly);
    let mut out = ScalarField2D::new(a.nx, a.ny, a.lx, a.ly, p.inverse(s))?;
    out.zero_mean = true;
    Ok(out)
}

/// Reusable trigonometric interpolant of a periodic field. Only nonzero
/// modes are kept, so band-limited fields evaluate quickly.
#[derive(Debug, Clone)]
pub struct SpectralInterpolant {
    lx: f64,
    ly: f64,
    terms: Vec<(i64, i64, Complex64)>,
    max_mx: i64,
    max_my: i64,
}

impl SpectralInterpolant {
    pub fn new(f: &ScalarField2D) -> Self {
        let p = plan(f.nx, f.ny);
        Self::from_spec(&p, &p.forward(&f.values), f.lx, f.ly)
    }

    pub(crate) fn from_spec(p: &Plan2D, spec: &[Complex64], lx: f64, ly: f64) -> Self {
        let norm = 1.0 / (p.nx * p.ny) as f64;
        let scale = spec.iter().fold(0.0_f64, |m, c| m.max(c.norm()));
        let cutoff = scale * 1e-17;
        let mut terms = Vec::new();
        let (mut max_mx, mut max_my) = (0, 0);
        for j in 0..p.ny {
            for i in 0..p.nx {
                let c = spec[j * p.nx + i];
                if c.norm() > cutoff {
                    terms.push((p.mx[i], p.my[j], c * norm));
                    max_mx = max_mx.max(p.mx[i].abs());
                    max_my = max_my.max(p.my[j].abs());
                }
            }
        }
        Self { lx, ly, terms, max_mx, max_my }
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        let ex = phases(TAU * x / self.lx, self.max_mx);
        let ey = phases(TAU * y / self.ly, self.max_my);
        let mut acc = 0.0;
        for &(mx, my, c) in &self.terms {
            let e = ex[(mx + self.max_mx) as usize] * ey[(my + self.max_my) as usize];
            acc += c.re * e.re - c.im * e.im;
        }
        acc
    }
}

/// `e^{i m theta}` for `m = -max..=max`.
fn phases(theta: f64, max: i64) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(1.0, 0.0); (2 * max + 1) as usize];
    for m in 1..=max {
        let e = Complex64::from_polar(1.0, m as f64 * theta);
        out[(max + m) as usize] = e;
        out[(max - m) as usize] = e.conj();
    }
    out
}

/// Seeded zero-mean random field built from cosine modes with
/// `0 < max(|kx|, |ky|) <= kmax`; amplitudes fall off like `1/|k|`.
pub fn random_smooth(nx: usize, ny: usize, lx: f64, ly: f64, kmax: u32, seed: u64) -> Result<ScalarField2D> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = kmax as i64;
    let mut modes = Vec::new();
    for kx in -k..=k {
        for ky in 0..=k {
            if ky == 0 && kx <= 0 {
                continue;
            }
            let (wx, wy) = (TAU * kx as f64 / lx, TAU * ky as f64 / ly);
            let amp = rng.random_range(-1.0..1.0) / ((kx * kx + ky * ky) as f64).sqrt();
            modes.push((wx, wy, amp, rng.random_range(0.0..TAU)));
        }
    }
    let mut f = ScalarField2D::from_fn(nx, ny, lx, ly, |x, y| {
        modes.iter().map(|(wx, wy, a, ph)| a * (wx * x + wy * y + ph).cos()).sum()
    })?;
    f.remove_mean();
    Ok(f)
}
