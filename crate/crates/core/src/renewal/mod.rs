//! Reproduction kernel, Malthusian parameter and the renewal equations for
//! the first and second moments.

mod limits;
mod second;

pub use limits::{limit_functionals, LimitFunctionals};
pub use second::{clt_variance, clt_variance_with, second_moment, CltVariance, SecondMoment, SemigroupRow};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::export::{csv, num, opt_num};
use crate::model::{mean_total_offspring, ModelSpec};
use crate::quad::{self, Nodes};

/// ρ(s) = ∫₀^∞ α(y) g'(y,1-) g_G(y+s) dy.
pub fn repro_density(spec: &ModelSpec, s: f64) -> f64 {
    kernel_at(spec, s, |y| spec.beta(y))
}

/// ρ₂(s) = ∫₀^∞ α(y) g''(y,1-) g_G(y+s) dy.
pub fn repro_density2(spec: &ModelSpec, s: f64) -> f64 {
    kernel_at(spec, s, |y| spec.beta2(y))
}

fn kernel_at<B: Fn(f64) -> f64>(spec: &ModelSpec, s: f64, b: B) -> f64 {
    let top = spec.x_max() - s;
    if s < 0.0 || top <= 0.0 {
        return 0.0;
    }
    let mut breaks: Vec<f64> = spec.alpha.knots().to_vec();
    breaks.extend(spec.offspring.knots());
    breaks.extend(spec.lifetime.breakpoints().iter().map(|c| c - s));
    quad::gl(|y| b(y) * spec.lifetime.pdf(y + s), 0.0, top, &breaks, spec.panel())
}

/// Kinks of ρ in s: lifetime jumps shifted back by rate knots.
fn kernel_breaks(spec: &ModelSpec) -> Vec<f64> {
    let mut shifts = vec![0.0];
    shifts.extend(spec.alpha.knots());
    shifts.extend(spec.offspring.knots());
    let mut out = Vec::new();
    for b in spec.lifetime.breakpoints() {
        out.extend(shifts.iter().map(|k| b - k).filter(|&v| v > 0.0));
    }
    out
}

/// ρ tabulated on Gauss–Legendre nodes over the truncated support, for
/// transforms ∫ φ(s) ρ(s) ds.
#[derive(Debug, Clone)]
pub struct ReproKernel {
    pub nodes: Nodes,
    pub rho: Vec<f64>,
}

impl ReproKernel {
    pub fn new(spec: &ModelSpec) -> Self {
        let nodes = quad::gl_nodes(0.0, spec.x_max(), &kernel_breaks(spec), spec.panel());
        let rho = nodes.x.iter().map(|&s| repro_density(spec, s)).collect();
        ReproKernel { nodes, rho }
    }

    /// ∫ φ(s) ρ(s) ds
    pub fn integrate<F: Fn(f64) -> f64>(&self, phi: F) -> f64 {
        self.nodes.x.iter().zip(&self.nodes.w).zip(&self.rho).map(|((&s, &w), &r)| w * phi(s) * r).sum()
    }

    /// ∫ e^{-a s} ρ(s) ds
    pub fn laplace(&self, a: f64) -> f64 {
        self.integrate(|s| (-a * s).exp())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MalthusianSolution {
    pub alpha_tilde: f64,
    pub m: f64,
    /// ∫ u e^{-α̃u} ρ(u) du
    pub c9: f64,
    pub n1: f64,
    /// ∫ e^{-α̃u} (1 − G(u)) du, the normalizer of A(·).
    pub denom: f64,
    /// ∫ e^{-α̃t} ρ(t) dt − 1 at the returned root.
    pub residual: f64,
}

pub const MAX_DOUBLINGS: usize = 60;

pub fn malthusian(spec: &ModelSpec) -> Result<MalthusianSolution> {
    let m = mean_total_offspring(spec)?;
    if m <= 1.0 {
        return Err(Error::NotSupercritical { m });
    }
    malthusian_with(spec, &ReproKernel::new(spec), m)
}

pub fn malthusian_with(spec: &ModelSpec, kernel: &ReproKernel, m: f64) -> Result<MalthusianSolution> {
    let mut hi = 1.0;
    let mut doublings = 0;
    while kernel.laplace(hi) >= 1.0 {
        if doublings == MAX_DOUBLINGS {
            return Err(Error::BracketNotFound(MAX_DOUBLINGS));
        }
        hi *= 2.0;
        doublings += 1;
    }
    let mut lo = 0.0;
    for _ in 0..spec.numerics.max_iter {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if kernel.laplace(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let a = 0.5 * (lo + hi);
    let residual = kernel.laplace(a) - 1.0;
    let c9 = kernel.integrate(|s| s * (-a * s).exp());
    let denom = quad::gl(
        |u| (-a * u).exp() * spec.lifetime.survival(u),
        0.0,
        spec.x_max(),
        &spec.lifetime.breakpoints(),
        spec.panel(),
    );
    if !(a.is_finite() && c9.is_finite() && denom.is_finite()) {
        return Err(Error::NonFinite("malthusian"));
    }
    Ok(MalthusianSolution { alpha_tilde: a, m, c9, n1: denom / c9, denom, residual })
}

/// Curves on the uniform time grid t_i = i·h, i = 0..=n.
#[derive(Debug, Clone, PartialEq)]
pub struct RenewalGrid {
    pub h: f64,
    pub horizon: f64,
    pub t: Vec<f64>,
    pub rho: Vec<f64>,
    pub z: Vec<f64>,
    pub m_f: Vec<f64>,
    pub gamma_f: Option<Vec<f64>>,
}

impl RenewalGrid {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// Index of the grid node at `t`.
    pub fn node(&self, t: f64) -> Result<usize> {
        node_index(self.h, self.len() - 1, t)
    }

    pub fn to_csv(&self) -> String {
        let rows = (0..self.len()).map(|i| {
            vec![
                num(self.t[i]),
                num(self.rho[i]),
                num(self.z[i]),
                num(self.m_f[i]),
                opt_num(self.gamma_f.as_ref().map(|g| g[i])),
            ]
        });
        csv("t,rho,z,M_f,Gamma_f", rows)
    }
}

pub(crate) fn node_index(h: f64, n: usize, t: f64) -> Result<usize> {
    let horizon = n as f64 * h;
    if t < 0.0 || !t.is_finite() {
        return Err(Error::OutOfRange(format!("time {t} must be a nonnegative grid node")));
    }
    if t > horizon + 1e-9 * h {
        return Err(Error::HorizonExceeded { t, horizon });
    }
    let i = (t / h).round() as usize;
    if (i as f64 * h - t).abs() > 1e-6 * h {
        return Err(Error::OutOfRange(format!("time {t} is not a grid node (h = {h})")));
    }
    Ok(i)
}

/// Forward substitution for M = z + ρ∗M with trapezoid weights; the s = 0
/// endpoint uses the current unknown.
pub fn solve_renewal(rho: &[f64], z: &[f64], h: f64) -> Vec<f64> {
    let n = z.len();
    let mut m = Vec::with_capacity(n);
    if n == 0 {
        return m;
    }
    m.push(z[0]);
    let diag = 1.0 - 0.5 * h * rho[0];
    for i in 1..n {
        let mut acc = 0.5 * rho[i] * m[0];
        for j in 1..i {
            acc += rho[j] * m[i - j];
        }
        m.push((z[i] + h * acc) / diag);
    }
    m
}

/// Trapezoid convolution (a ∗ b)(t_i) on the grid.
pub fn convolve(a: &[f64], b: &[f64], h: f64) -> Vec<f64> {
    (0..a.len())
        .map(|i| {
            if i == 0 {
                return 0.0;
            }
            let mut acc = 0.5 * (a[0] * b[i] + a[i] * b[0]);
            for j in 1..i {
                acc += a[j] * b[i - j];
            }
            h * acc
        })
        .collect()
}

/// z(t) = ∫ f(y) g_G(y + t) dy
pub fn forcing(spec: &ModelSpec, t: f64) -> f64 {
    let top = spec.x_max() - t;
    if top <= 0.0 {
        return 0.0;
    }
    let mut breaks = spec.f.breakpoints();
    breaks.extend(spec.lifetime.breakpoints().iter().map(|c| c - t));
    quad::gl(|y| spec.f.eval(y) * spec.lifetime.pdf(y + t), 0.0, top, &breaks, spec.panel())
}

pub fn time_grid(spec: &ModelSpec) -> Vec<f64> {
    let h = spec.h();
    (0..=spec.numerics.steps()).map(|i| i as f64 * h).collect()
}

/// Solve ⟨G, π_t f⟩ on the grid.
pub fn mean_measure(spec: &ModelSpec) -> RenewalGrid {
    let t = time_grid(spec);
    let rho: Vec<f64> = t.iter().map(|&s| repro_density(spec, s)).collect();
    mean_measure_with(spec, &rho)
}

/// As [`mean_measure`], reusing a tabulated ρ.
pub fn mean_measure_with(spec: &ModelSpec, rho: &[f64]) -> RenewalGrid {
    let t = time_grid(spec);
    let z: Vec<f64> = t.iter().map(|&s| forcing(spec, s)).collect();
    let m_f = solve_renewal(rho, &z, spec.h());
    RenewalGrid { h: spec.h(), horizon: spec.numerics.horizon, t, rho: rho.to_vec(), z, m_f, gamma_f: None }
}

/// ∫₀^{min(t_i, x)} b(x − s) S(t_i − s) ds by the trapezoid rule on the grid
/// nodes in s, with a partial last interval and linear interpolation of S.
pub(crate) fn path_integral<B: Fn(f64) -> f64>(h: f64, i: usize, x: f64, b: B, series: &[f64]) -> f64 {
    let t = i as f64 * h;
    let upper = t.min(x);
    if upper <= 0.0 {
        return 0.0;
    }
    let nfull = (((upper / h) + 1e-9).floor() as usize).min(i);
    let mut acc = 0.0;
    let mut first = 0.0;
    let mut last = 0.0;
    for l in 0..=nfull {
        let v = b(x - l as f64 * h) * series[i - l];
        if l == 0 {
            first = v;
        }
        last = v;
        acc += v;
    }
    let mut total = h * (acc - 0.5 * first - 0.5 * last);
    let delta = upper - nfull as f64 * h;
    if delta > 1e-12 * h && nfull < i {
        let frac = delta / h;
        let s_end = series[i - nfull] * (1.0 - frac) + series[i - nfull - 1] * frac;
        let v_end = b(x - upper) * s_end;
        total += 0.5 * delta * (last + v_end);
    }
    total
}

/// π_t f(x) = f(x − t) + ∫₀^{min(t,x)} β(x − s) M_f(t − s) ds.
pub fn mean_semigroup(spec: &ModelSpec, grid: &RenewalGrid, t: f64, x: f64) -> Result<f64> {
    let i = grid.node(t)?;
    Ok(spec.f.eval(x - t) + path_integral(grid.h, i, x, |y| spec.beta_right(y), &grid.m_f))
}

/// The x-grid x_k = k·h over the truncated lifetime support, with
/// product-trapezoid weights against G(dx): w_k = ∫ hat_k(x) G(dx).
#[derive(Debug, Clone)]
pub struct XGrid {
    pub h: f64,
    pub x: Vec<f64>,
    pub w: Vec<f64>,
    /// Left half-hat weights ∫_{x_{k−1}}^{x_k} (x − x_{k−1})/h G(dx).
    pub wl: Vec<f64>,
}

impl XGrid {
    pub fn new(spec: &ModelSpec) -> Self {
        let h = spec.h();
        let n = (spec.x_max() / h).ceil() as usize;
        let x: Vec<f64> = (0..=n).map(|k| k as f64 * h).collect();
        let mut w = vec![0.0; n + 1];
        let mut wl = vec![0.0; n + 1];
        let breaks = spec.lifetime.breakpoints();
        for j in 0..n {
            let (a, b) = (x[j], x[j + 1]);
            let right = quad::gl(|y| (b - y) / h * spec.lifetime.pdf(y), a, b, &breaks, h);
            let left = quad::gl(|y| (y - a) / h * spec.lifetime.pdf(y), a, b, &breaks, h);
            w[j] += right;
            w[j + 1] += left;
            wl[j + 1] = left;
        }
        w[n] += spec.lifetime.survival(x[n]);
        XGrid { h, x, w, wl }
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// ⟨G, v⟩ for values on the grid.
    pub fn integrate(&self, v: &[f64]) -> f64 {
        self.w.iter().zip(v).map(|(w, v)| w * v).sum()
    }
}
