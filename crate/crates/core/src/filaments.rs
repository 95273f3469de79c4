//! Filament mechanics: marker loops carried by a flow, line integrals along
//! them, Gauss linking numbers, and point samples of Lie-dragged scalars.

use std::f64::consts::{PI, TAU};

use log::warn;
use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::hierarchy::{self, Hamiltonian2D, HierarchyState};
use crate::spectral2d::{plan, Axis, ScalarField2D, SpectralInterpolant};
use crate::tolerances;

pub const MIN_MARKERS: usize = 16;
/// Steps between checks for marker resampling.
pub const RESAMPLE_EVERY: usize = 10;
/// Largest tolerated ratio of longest to shortest segment.
pub const RESAMPLE_RATIO: f64 = 4.0;

type P3 = [f64; 3];

fn sub(a: P3, b: P3) -> P3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}
fn dot(a: P3, b: P3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}
fn cross(a: P3, b: P3) -> P3 {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}
fn norm(a: P3) -> f64 {
    dot(a, a).sqrt()
}
fn axpy(a: P3, s: f64, b: P3) -> P3 {
    [a[0] + s * b[0], a[1] + s * b[1], a[2] + s * b[2]]
}

/// Closed polyline of markers. Closure between the last and first marker is
/// implied; orientation is the marker order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkerLoop {
    points: Vec<P3>,
    planar: bool,
    strength: f64,
}

impl MarkerLoop {
    pub fn new(points: Vec<P3>) -> Result<Self> {
        let planar = points.iter().all(|p| p[2] == 0.0);
        Self::build(points, planar)
    }

    /// Loop in the `z = 0` plane.
    pub fn planar(points: &[[f64; 2]]) -> Result<Self> {
        Self::build(points.iter().map(|p| [p[0], p[1], 0.0]).collect(), true)
    }

    fn build(points: Vec<P3>, planar: bool) -> Result<Self> {
        if points.len() < MIN_MARKERS {
            return Err(Error::InvalidLoop(format!("{} markers, need at least {MIN_MARKERS}", points.len())));
        }
        if points.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidLoop("non-finite marker".into()));
        }
        let n = points.len();
        if let Some(i) = (0..n).find(|&i| points[i] == points[(i + 1) % n]) {
            return Err(Error::InvalidLoop(format!("markers {i} and {} coincide", (i + 1) % n)));
        }
        Ok(Self { points, planar, strength: 1.0 })
    }

    /// `center + r (cos t e1 + sin t e2)` at `n` equally spaced `t`.
    pub fn circle(center: P3, radius: f64, e1: P3, e2: P3, n: usize) -> Result<Self> {
        let pts = (0..n)
            .map(|j| {
                let t = TAU * j as f64 / n as f64;
                let p = axpy(center, radius * t.cos(), e1);
                axpy(p, radius * t.sin(), e2)
            })
            .collect();
        Self::new(pts)
    }

    pub fn with_strength(mut self, strength: f64) -> Self {
        self.strength = strength;
        self
    }

    pub fn strength(&self) -> f64 {
        self.strength
    }
    pub fn points(&self) -> &[P3] {
        &self.points
    }
    pub fn len(&self) -> usize {
        self.points.len()
    }
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
    pub fn is_planar(&self) -> bool {
        self.planar
    }

    pub fn reversed(&self) -> Self {
        let mut points = self.points.clone();
        points.reverse();
        Self { points, ..*self }
    }

    pub fn segment_lengths(&self) -> Vec<f64> {
        let n = self.points.len();
        (0..n).map(|i| norm(sub(self.points[(i + 1) % n], self.points[i]))).collect()
    }

    pub fn max_segment(&self) -> f64 {
        self.segment_lengths().into_iter().fold(0.0, f64::max)
    }

    pub fn segment_ratio(&self) -> f64 {
        let s = self.segment_lengths();
        let max = s.iter().cloned().fold(0.0, f64::max);
        let min = s.iter().cloned().fold(f64::INFINITY, f64::min);
        max / min
    }

    /// `dx/dt` at each marker for the parameter `t = 2 pi j / N`, by
    /// trigonometric differentiation of each coordinate.
    pub fn tangents(&self) -> Vec<P3> {
        let coeffs = self.coefficients();
        let n = self.points.len();
        let mut planner = FftPlanner::new();
        let inv = planner.plan_fft_inverse(n);
        let mut out = vec![[0.0; 3]; n];
        for (a, c) in coeffs.iter().enumerate() {
            let mut d: Vec<Complex64> = c
                .iter()
                .enumerate()
                .map(|(k, v)| {
                    let m = signed_mode(k, n);
                    if 2 * k == n {
                        Complex64::default()
                    } else {
                        v * Complex64::new(0.0, m as f64)
                    }
                })
                .collect();
            inv.process(&mut d);
            for j in 0..n {
                out[j][a] = d[j].re;
            }
        }
        out
    }

    /// Normalized Fourier coefficients of the three coordinates.
    fn coefficients(&self) -> [Vec<Complex64>; 3] {
        let n = self.points.len();
        let fwd = FftPlanner::new().plan_fft_forward(n);
        [0, 1, 2].map(|a| {
            let mut c: Vec<Complex64> = self.points.iter().map(|p| Complex64::new(p[a] / n as f64, 0.0)).collect();
            fwd.process(&mut c);
            c
        })
    }

    /// Redistributes the markers to equal arclength along the trigonometric
    /// interpolant of the current loop. The count is preserved.
    pub fn resample_uniform(&self) -> Self {
        let n = self.points.len();
        let coeffs = self.coefficients();
        let eval = |t: f64| -> P3 {
            let mut p = [0.0; 3];
            for (a, c) in coeffs.iter().enumerate() {
                let mut acc = 0.0;
                for (k, v) in c.iter().enumerate() {
                    let m = signed_mode(k, n);
                    // Nyquist term as a real cosine.
                    let e = if 2 * k == n {
                        Complex64::new((m as f64 * t).cos(), 0.0)
                    } else {
                        Complex64::from_polar(1.0, m as f64 * t)
                    };
                    acc += (v * e).re;
                }
                p[a] = acc;
            }
            p
        };
        let fine = 16 * n;
        let pts: Vec<P3> = (0..=fine).map(|j| eval(TAU * j as f64 / fine as f64)).collect();
        let mut arc = vec![0.0; fine + 1];
        for j in 1..=fine {
            arc[j] = arc[j - 1] + norm(sub(pts[j], pts[j - 1]));
        }
        let total = arc[fine];
        let mut out = Vec::with_capacity(n);
        let mut seg = 0;
        for i in 0..n {
            let target = total * i as f64 / n as f64;
            while seg + 1 < fine && arc[seg + 1] < target {
                seg += 1;
            }
            let span = arc[seg + 1] - arc[seg];
            let frac = if span > 0.0 { (target - arc[seg]) / span } else { 0.0 };
            let t = TAU * (seg as f64 + frac) / fine as f64;
            let mut p = eval(t);
            if self.planar {
                p[2] = 0.0;
            }
            out.push(p);
        }
        Self { points: out, ..*self }
    }

    fn resample_if_needed(&mut self) {
        if self.segment_ratio() > RESAMPLE_RATIO {
            *self = self.resample_uniform();
        }
    }
}

fn signed_mode(k: usize, n: usize) -> i64 {
    if k <= n / 2 {
        k as i64
    } else {
        k as i64 - n as i64
    }
}

/// A vector field that can be sampled anywhere, possibly time-dependent.
pub trait PointField {
    fn eval(&self, p: P3, t: f64) -> Result<P3>;
}

impl<F: Fn(P3, f64) -> P3> PointField for F {
    fn eval(&self, p: P3, t: f64) -> Result<P3> {
        finite_or_undefined(self(p, t), p)
    }
}

fn finite_or_undefined(v: P3, p: P3) -> Result<P3> {
    if v.iter().all(|c| c.is_finite()) {
        Ok(v)
    } else {
        Err(Error::VelocityUndefined { x: p[0], y: p[1], z: p[2] })
    }
}

/// Field given by expressions in `x, y, z, t`.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalyticField {
    comps: [Expr; 3],
}

impl AnalyticField {
    pub fn parse(components: [&str; 3]) -> Result<Self> {
        let vars = ["x", "y", "z", "t"];
        Ok(Self {
            comps: [
                Expr::parse(components[0], &vars)?,
                Expr::parse(components[1], &vars)?,
                Expr::parse(components[2], &vars)?,
            ],
        })
    }
}

impl PointField for AnalyticField {
    fn eval(&self, p: P3, t: f64) -> Result<P3> {
        let args = [p[0], p[1], p[2], t];
        finite_or_undefined(self.comps.each_ref().map(|e| e.eval(&args)), p)
    }
}

/// Planar field `(ux, uy, 0)` from periodic grid samples, evaluated by
/// trigonometric interpolation.
#[derive(Debug, Clone)]
pub struct GridField2D {
    ux: SpectralInterpolant,
    uy: SpectralInterpolant,
}

impl GridField2D {
    pub fn new(ux: &ScalarField2D, uy: &ScalarField2D) -> Result<Self> {
        ux.check_same_grid(uy)?;
        Ok(Self { ux: SpectralInterpolant::new(ux), uy: SpectralInterpolant::new(uy) })
    }

    /// Velocity `(phi_y, -phi_x)` of a stream function.
    pub fn from_stream_function(phi: &ScalarField2D) -> Self {
        let p = plan(phi.nx(), phi.ny());
        let s = p.forward(phi.values());
        let (lx, ly) = (phi.lx(), phi.ly());
        let vx = p.deriv_spec(&s, Axis::Y, lx, ly);
        let vy: Vec<Complex64> = p.deriv_spec(&s, Axis::X, lx, ly).into_iter().map(|c| -c).collect();
        Self {
            ux: SpectralInterpolant::from_spec(&p, &vx, lx, ly),
            uy: SpectralInterpolant::from_spec(&p, &vy, lx, ly),
        }
    }

    /// Flow of a hierarchy state: the stream function is `dH/domega`.
    pub fn from_state(state: &HierarchyState, h: &Hamiltonian2D) -> Result<Self> {
        Ok(Self::from_stream_function(&hierarchy::grad_h(state, h)?.d_omega))
    }
}

impl PointField for GridField2D {
    fn eval(&self, p: P3, _t: f64) -> Result<P3> {
        finite_or_undefined([self.ux.eval(p[0], p[1]), self.uy.eval(p[0], p[1]), 0.0], p)
    }
}

fn rk4_points(points: &mut [P3], field: &dyn PointField, t: f64, dt: f64) -> Result<()> {
    for p in points.iter_mut() {
        let k1 = field.eval(*p, t)?;
        let k2 = field.eval(axpy(*p, 0.5 * dt, k1), t + 0.5 * dt)?;
        let k3 = field.eval(axpy(*p, 0.5 * dt, k2), t + 0.5 * dt)?;
        let k4 = field.eval(axpy(*p, dt, k3), t + dt)?;
        for a in 0..3 {
            p[a] += dt / 6.0 * (k1[a] + 2.0 * k2[a] + 2.0 * k3[a] + k4[a]);
        }
    }
    Ok(())
}

/// Advances every marker by `steps` RK4 steps of size `dt`, starting at time
/// `t0`. With `resample`, loops are redistributed in arclength every
/// [`RESAMPLE_EVERY`] steps once their segment ratio exceeds
/// [`RESAMPLE_RATIO`].
pub fn advect_loop(
    lp: &MarkerLoop,
    field: &dyn PointField,
    t0: f64,
    dt: f64,
    steps: usize,
    resample: bool,
) -> Result<MarkerLoop> {
    let mut out = lp.clone();
    for s in 0..steps {
        rk4_points(&mut out.points, field, t0 + s as f64 * dt, dt)?;
        if out.planar {
            out.points.iter_mut().for_each(|p| p[2] = 0.0);
        }
        if resample && (s + 1) % RESAMPLE_EVERY == 0 {
            out.resample_if_needed();
        }
    }
    Ok(out)
}

/// `oint A . dx` by the trapezoidal rule in the loop parameter with a
/// trigonometric tangent. Sign follows the loop orientation.
pub fn circulation(field: &dyn PointField, lp: &MarkerLoop, t: f64) -> Result<f64> {
    let tangents = lp.tangents();
    let mut acc = 0.0;
    for (p, d) in lp.points.iter().zip(&tangents) {
        acc += dot(field.eval(*p, t)?, *d);
    }
    Ok(acc * TAU / lp.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CirculationEstimate {
    pub value: f64,
    /// Difference to the same rule on every other marker.
    pub error_estimate: f64,
}

/// [`circulation`] with a quadrature error estimate; warns when the loop is
/// coarser than `grid_spacing`.
pub fn circulation_checked(
    field: &dyn PointField,
    lp: &MarkerLoop,
    t: f64,
    grid_spacing: Option<f64>,
) -> Result<CirculationEstimate> {
    let value = circulation(field, lp, t)?;
    let half: Vec<P3> = lp.points.iter().step_by(2).cloned().collect();
    let error_estimate = match MarkerLoop::build(half, lp.planar) {
        Ok(coarse) => (circulation(field, &coarse, t)? - value).abs(),
        Err(_) => f64::INFINITY,
    };
    if let Some(h) = grid_spacing {
        let seg = lp.max_segment();
        if seg > h {
            warn!("loop under-resolved: segment {seg:.3e} > grid spacing {h:.3e}, estimated error {error_estimate:.3e}");
        }
    }
    Ok(CirculationEstimate { value, error_estimate })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkingResult {
    pub integer: i64,
    pub raw: f64,
    pub deviation: f64,
}

/// Gauss linking integral by the segment-midpoint double sum.
pub fn linking_number(l1: &MarkerLoop, l2: &MarkerLoop) -> Result<LinkingResult> {
    let max_segment = l1.max_segment().max(l2.max_segment());
    let mut min_distance = f64::INFINITY;
    for p in &l1.points {
        for q in &l2.points {
            min_distance = min_distance.min(norm(sub(*p, *q)));
        }
    }
    if min_distance <= tolerances::LINK_SEPARATION * max_segment {
        return Err(Error::LoopsTooClose { min_distance, max_segment });
    }
    let segs = |l: &MarkerLoop| -> Vec<(P3, P3)> {
        let n = l.len();
        (0..n)
            .map(|i| {
                let (a, b) = (l.points[i], l.points[(i + 1) % n]);
                ([0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1]), 0.5 * (a[2] + b[2])], sub(b, a))
            })
            .collect()
    };
    let (s1, s2) = (segs(l1), segs(l2));
    let mut raw = 0.0;
    for (m1, d1) in &s1 {
        let mut row = 0.0;
        for (m2, d2) in &s2 {
            let r = sub(*m1, *m2);
            let r2 = dot(r, r);
            row += dot(r, cross(*d1, *d2)) / (r2 * r2.sqrt());
        }
        raw += row;
    }
    raw /= 4.0 * PI;
    let integer = raw.round() as i64;
    Ok(LinkingResult { integer, raw, deviation: (raw - integer as f64).abs() })
}

/// Value of a scalar at a point by trigonometric interpolation. For a point
/// mock field this is its cross helicity with the flux function.
pub fn pure_state_sample(psi: &ScalarField2D, xi: [f64; 2]) -> f64 {
    psi.interpolate(xi[0], xi[1])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoAdvectConfig {
    pub dt: f64,
    pub t_end: f64,
    pub sample_every: usize,
    pub resample: bool,
}

/// Output of [`co_advect`]: per-sample circulations of the flow around each
/// loop and the Lie-dragged scalar at each point.
#[derive(Debug, Clone)]
pub struct CoAdvectResult {
    pub times: Vec<f64>,
    pub circulations: Vec<Vec<f64>>,
    pub point_values: Vec<Vec<f64>>,
    pub state: HierarchyState,
    pub loops: Vec<MarkerLoop>,
    pub points: Vec<[f64; 2]>,
}

/// The scalar carried by the flow: `psi` when present, else `omega`.
fn dragged_scalar(state: &HierarchyState) -> &ScalarField2D {
    state.psi().unwrap_or(state.omega())
}

/// Integrates a hierarchy state jointly with planar loops and points that
/// move with its velocity `(phi_y, -phi_x)`; one RK4 scheme drives both so
/// marker stages see the matching field stages.
pub fn co_advect(
    initial: &HierarchyState,
    h: &Hamiltonian2D,
    loops: &[MarkerLoop],
    points: &[[f64; 2]],
    cfg: &CoAdvectConfig,
) -> Result<CoAdvectResult> {
    if !(cfg.dt > 0.0) || !(cfg.t_end >= 0.0) || cfg.sample_every == 0 {
        return Err(Error::Config("need dt > 0, t_end >= 0, sample_every >= 1".into()));
    }
    if let Some(l) = loops.iter().find(|l| !l.is_planar()) {
        return Err(Error::InvalidLoop(format!("co-advection needs planar loops, got {} markers in 3D", l.len())));
    }
    let mut state = initial.clone();
    let mut loops = loops.to_vec();
    let mut pts: Vec<[f64; 2]> = points.to_vec();
    let mut out = CoAdvectResult {
        times: Vec::new(),
        circulations: Vec::new(),
        point_values: Vec::new(),
        state: state.clone(),
        loops: Vec::new(),
        points: Vec::new(),
    };
    let record = |out: &mut CoAdvectResult, s: &HierarchyState, ls: &[MarkerLoop], ps: &[[f64; 2]]| -> Result<()> {
        let v = GridField2D::from_state(s, h)?;
        out.times.push(s.time);
        out.circulations.push(ls.iter().map(|l| circulation(&v, l, s.time)).collect::<Result<_>>()?);
        let carried = SpectralInterpolant::new(dragged_scalar(s));
        out.point_values.push(ps.iter().map(|p| carried.eval(p[0], p[1])).collect());
        Ok(())
    };
    record(&mut out, &state, &loops, &pts)?;

    let n_steps = ((cfg.t_end / cfg.dt) - 1e-9).ceil().max(0.0) as usize;
    let t0 = state.time;
    for step in 1..=n_steps {
        let target = if step == n_steps { t0 + cfg.t_end } else { t0 + step as f64 * cfg.dt };
        let dt = target - state.time;

        // Markers: all loop points followed by the free points.
        let mut x: Vec<P3> = loops.iter().flat_map(|l| l.points.iter().cloned()).collect();
        x.extend(pts.iter().map(|p| [p[0], p[1], 0.0]));
        let vel = |s: &HierarchyState, x: &[P3]| -> Result<Vec<P3>> {
            let v = GridField2D::from_state(s, h)?;
            x.iter().map(|p| v.eval(*p, s.time)).collect()
        };
        let shift = |x: &[P3], a: f64, k: &[P3]| -> Vec<P3> { x.iter().zip(k).map(|(p, v)| axpy(*p, a, *v)).collect() };

        let k1 = hierarchy::rhs(&state, h)?;
        let v1 = vel(&state, &x)?;
        let s2 = state.advanced(0.5 * dt, &k1);
        let k2 = hierarchy::rhs(&s2, h)?;
        let v2 = vel(&s2, &shift(&x, 0.5 * dt, &v1))?;
        let s3 = state.advanced(0.5 * dt, &k2);
        let k3 = hierarchy::rhs(&s3, h)?;
        let v3 = vel(&s3, &shift(&x, 0.5 * dt, &v2))?;
        let s4 = state.advanced(dt, &k3);
        let k4 = hierarchy::rhs(&s4, h)?;
        let v4 = vel(&s4, &shift(&x, dt, &v3))?;
        state = hierarchy::finish_rk4(&state, [&k1, &k2, &k3, &k4], dt)?;
        state.time = target;
        for i in 0..x.len() {
            for a in 0..2 {
                x[i][a] += dt / 6.0 * (v1[i][a] + 2.0 * v2[i][a] + 2.0 * v3[i][a] + v4[i][a]);
            }
        }
        if x.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { time: target, what: "marker position".into() });
        }

        let mut offset = 0;
        for l in loops.iter_mut() {
            let n = l.len();
            l.points.copy_from_slice(&x[offset..offset + n]);
            offset += n;
            if cfg.resample && step % RESAMPLE_EVERY == 0 {
                l.resample_if_needed();
            }
        }
        for (p, q) in pts.iter_mut().zip(&x[offset..]) {
            *p = [q[0], q[1]];
        }
        if step % cfg.sample_every == 0 || step == n_steps {
            record(&mut out, &state, &loops, &pts)?;
        }
    }
    out.state = state;
    out.loops = loops;
    out.points = pts;
    Ok(out)
}
