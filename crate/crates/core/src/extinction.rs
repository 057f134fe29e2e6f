//! Generating functions of the embedded Galton–Watson process, extinction
//! probabilities, the Laplace-functional march and the limit law φ.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::export::{csv, num};
use crate::model::{mean_total_offspring, ModelSpec};
use crate::quad::{self, Nodes};
use crate::renewal::{limit_functionals, MalthusianSolution, ReproKernel, XGrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GfMode {
    /// h(s) = ∫ exp{(s − 1)Λ(x)} G(dx): Poisson total offspring.
    Poisson,
    /// b(s) = ∫ exp{∫₀^x α(y)[g(y, s) − 1] dy} G(dx): compound Poisson.
    Compound,
}

/// Total-offspring generating functions with cached outer nodes.
#[derive(Debug, Clone)]
pub struct TotalOffspringGf<'a> {
    spec: &'a ModelSpec,
    nodes: Nodes,
    pdf: Vec<f64>,
    /// Λ(x_k) = ∫₀^{x_k} β
    lambda: Vec<f64>,
    /// 1 − G(x_max)
    tail: f64,
}

impl<'a> TotalOffspringGf<'a> {
    pub fn new(spec: &'a ModelSpec) -> Self {
        let nodes = quad::gl_nodes(0.0, spec.x_max(), &spec.breaks(), spec.panel());
        let pdf = nodes.x.iter().map(|&x| spec.lifetime.pdf(x)).collect();
        let lambda = quad::cumulative(&nodes.x, |y| spec.beta(y), &spec.breaks(), spec.panel());
        TotalOffspringGf { spec, nodes, pdf, lambda, tail: spec.lifetime.survival(spec.x_max()) }
    }

    pub fn eval(&self, s: f64, mode: GfMode) -> Result<f64> {
        if !(0.0..=1.0).contains(&s) {
            return Err(Error::OutOfRange(format!("generating function argument {s} outside [0, 1]")));
        }
        Ok(self.eval_unchecked(s, mode))
    }

    fn eval_unchecked(&self, s: f64, mode: GfMode) -> f64 {
        let spec = self.spec;
        let exponent: Vec<f64> = match mode {
            GfMode::Poisson => self.lambda.iter().map(|l| (s - 1.0) * l).collect(),
            GfMode::Compound => {
                let knots = spec.breaks();
                quad::cumulative(
                    &self.nodes.x,
                    |y| spec.alpha.eval(y) * (spec.offspring.gf(y, s) - 1.0),
                    &knots,
                    spec.panel(),
                )
            }
        };
        let body: f64 = self.nodes.w.iter().zip(&self.pdf).zip(&exponent).map(|((w, p), e)| w * p * e.exp()).sum();
        body + self.tail * exponent.last().map_or(1.0, |e| e.exp())
    }

    /// Smallest root of gf(s) = s on [0, 1].
    pub fn smallest_fixed_point(&self, mode: GfMode, tol: f64) -> f64 {
        let phi = |s: f64| self.eval_unchecked(s, mode) - s;
        let mut candidates: Vec<f64> = (0..64).map(|j| j as f64 / 64.0).collect();
        candidates.extend((7..=40).map(|k| 1.0 - 0.5f64.powi(k)));
        if phi(0.0) <= 0.0 {
            return 0.0;
        }
        let mut lo = 0.0;
        let mut hi = None;
        for &c in &candidates[1..] {
            if phi(c) <= 0.0 {
                hi = Some(c);
                break;
            }
            lo = c;
        }
        let Some(mut hi) = hi else { return 1.0 };
        while hi - lo > tol.min(1e-14) {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if phi(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }
}

pub fn offspring_total_gf(spec: &ModelSpec, s: f64, mode: GfMode) -> Result<f64> {
    TotalOffspringGf::new(spec).eval(s, mode)
}

#[derive(Debug, Clone, Serialize)]
pub struct ExtinctionResult {
    pub q: f64,
    /// Smallest fixed point of the Poisson-form generating function.
    pub q_poisson: f64,
    /// |b(q) − q|
    pub fixed_point_residual: f64,
    #[serde(skip)]
    pub h: f64,
    #[serde(skip)]
    pub q_curve: Option<Vec<f64>>,
}

impl ExtinctionResult {
    pub fn curve_csv(&self) -> Option<String> {
        let h = self.h;
        self.q_curve.as_ref().map(|c| {
            csv("t,q_t", c.iter().enumerate().map(|(i, q)| vec![num(i as f64 * h), num(*q)]))
        })
    }
}

pub fn extinction_prob(spec: &ModelSpec) -> Result<ExtinctionResult> {
    let gf = TotalOffspringGf::new(spec);
    let m = mean_total_offspring(spec)?;
    let tol = spec.numerics.tol;
    let (q, q_poisson) = if m <= 1.0 {
        (1.0, 1.0)
    } else {
        (gf.smallest_fixed_point(GfMode::Compound, tol), gf.smallest_fixed_point(GfMode::Poisson, tol))
    };
    let fixed_point_residual = (gf.eval_unchecked(q, GfMode::Compound) - q).abs();
    Ok(ExtinctionResult { q, q_poisson, fixed_point_residual, h: spec.h(), q_curve: None })
}

/// Corrected-trapezoid weights (endpoint weights 3/8, 7/6, 23/24) on n
/// intervals; plain trapezoid when n < 5.
#[inline]
fn gregory(l: usize, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    if n < 5 {
        return if l == 0 || l == n { 0.5 } else { 1.0 };
    }
    match l.min(n - l) {
        0 => 3.0 / 8.0,
        1 => 7.0 / 6.0,
        2 => 23.0 / 24.0,
        _ => 1.0,
    }
}

/// q(t) = P[X_t(∞) = 0] on the grid, marched from
/// q(t) = ∫₀^t exp{∫₀^x α(x−r)[g(x−r, q(t−r)) − 1] dr} G(dx).
pub fn extinction_curve(spec: &ModelSpec) -> Result<ExtinctionResult> {
    let mut res = extinction_prob(spec)?;
    res.q_curve = Some(q_march(spec)?);
    Ok(res)
}

fn q_march(spec: &ModelSpec) -> Result<Vec<f64>> {
    let h = spec.h();
    let n = spec.numerics.steps();
    let xs: Vec<f64> = (0..=n).map(|k| k as f64 * h).collect();
    let alpha: Vec<f64> = xs.iter().map(|&x| spec.alpha.eval_right(x)).collect();
    let pdf: Vec<f64> = xs.iter().map(|&x| spec.lifetime.pdf(x)).collect();
    let regular = pdf.iter().all(|p| p.is_finite());
    let xg = (!regular).then(|| XGrid::new(spec));
    let homogeneous = spec.offspring.is_homogeneous();
    let kval = |k: usize, z: f64| alpha[k] * (spec.offspring.gf(xs[k], z) - 1.0);

    let mut q = vec![0.0; n + 1];
    // K'(k, b) for the last three rows, and its first three columns for every row
    let mut rows: [Vec<f64>; 3] = [vec![0.0; n + 1], vec![0.0; n + 1], vec![0.0; n + 1]];
    let mut cols = vec![[0.0f64; 3]; n + 1];
    let mut d_prev = vec![0.0; n + 1];
    let mut d = vec![0.0; n + 1];
    let mut cur = vec![0.0; n + 1];
    {
        cur[0] = kval(0, 0.0);
        cols[0][0] = cur[0];
        d_prev[0] = cur[0];
        rows[0][0] = cur[0];
    }
    for i in 1..=n {
        let mut qi = q[i - 1];
        let mut converged = false;
        for _ in 0..spec.numerics.max_iter.min(200) {
            if homogeneous {
                let g1 = spec.offspring.gf(1.0, qi) - 1.0;
                for k in 0..=i {
                    cur[k] = alpha[k] * g1;
                }
            } else {
                for k in 0..=i {
                    cur[k] = kval(k, qi);
                }
            }
            let kat = |l: usize, k: usize| -> f64 {
                // K'(k − l, i − l)
                if l == 0 {
                    cur[k]
                } else if k - l <= 2 {
                    cols[i - l][k - l]
                } else {
                    rows[l - 1][k - l]
                }
            };
            let mut total = 0.0;
            for k in 0..=i {
                d[k] = cur[k] + if k > 0 { d_prev[k - 1] } else { 0.0 };
                let mut inner = d[k];
                if k > 0 {
                    let ls: &[usize] = if k < 5 { &[0, k] } else { &[0, 1, 2, k - 2, k - 1, k] };
                    for &l in ls {
                        inner += (gregory(l, k) - 1.0) * kat(l, k);
                    }
                    inner *= h;
                } else {
                    inner = 0.0;
                }
                let e = inner.exp();
                total += match &xg {
                    None => gregory(k, i) * h * pdf[k] * e,
                    Some(g) => e * if k < i { g.w[k] - if k == 0 { 0.0 } else { 0.0 } } else { g.wl[k] },
                };
            }
            let change = (total - qi).abs();
            qi = total;
            if change <= 1e-15 {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::CorrectorDiverged { t: i as f64 * h, change: f64::NAN });
        }
        // commit row i with the converged q_i
        if homogeneous {
            let g1 = spec.offspring.gf(1.0, qi) - 1.0;
            for k in 0..=i {
                cur[k] = alpha[k] * g1;
            }
        } else {
            for k in 0..=i {
                cur[k] = kval(k, qi);
            }
        }
        for k in 0..=i {
            d[k] = cur[k] + if k > 0 { d_prev[k - 1] } else { 0.0 };
        }
        for (j, c) in cols[i].iter_mut().enumerate() {
            if j <= i {
                *c = cur[j];
            }
        }
        rows.rotate_right(1);
        rows[0][..=i].copy_from_slice(&cur[..=i]);
        std::mem::swap(&mut d, &mut d_prev);
        q[i] = qi;
    }
    Ok(q)
}

/// The Laplace functional march for input θ·f.
#[derive(Debug, Clone)]
pub struct LaplaceMarch {
    pub h: f64,
    pub theta: f64,
    /// L(t_i) = ⟨G, e^{-u_{t_i}(θf)}⟩
    pub l: Vec<f64>,
    /// u_{t_i}(θf)(x_k), row i, when requested.
    pub u: Option<Vec<Vec<f64>>>,
}

impl LaplaceMarch {
    /// u_t(θf)(x) by linear interpolation on the x-grid.
    pub fn u_at(&self, t: f64, x: f64) -> Option<f64> {
        let rows = self.u.as_ref()?;
        let i = (t / self.h).round() as usize;
        rows.get(i).map(|r| quad::interp_uniform(r, self.h, x))
    }
}

pub fn laplace_march(spec: &ModelSpec, theta: f64) -> Result<LaplaceMarch> {
    march(spec, &XGrid::new(spec), theta, true)
}

/// Maximum number of corrections per node.
const MAX_CORRECTIONS: usize = 10;

pub(crate) fn march(spec: &ModelSpec, xg: &XGrid, theta: f64, keep_u: bool) -> Result<LaplaceMarch> {
    if !(theta >= 0.0 && theta.is_finite()) {
        return Err(Error::OutOfRange(format!("theta {theta} must be nonnegative")));
    }
    let h = spec.h();
    let n = spec.numerics.steps();
    let nx = xg.len();
    let alpha: Vec<f64> = xg.x.iter().map(|&x| spec.alpha.eval_right(x)).collect();
    let fx: Vec<f64> = xg.x.iter().map(|&x| theta * spec.f.eval_right(x)).collect();
    let homogeneous = spec.offspring.is_homogeneous();
    let kvals = |cur: &mut [f64], z: f64| {
        if homogeneous {
            let g = 1.0 - spec.offspring.gf(1.0, z);
            for (c, a) in cur.iter_mut().zip(&alpha) {
                *c = a * g;
            }
        } else {
            for k in 0..cur.len() {
                cur[k] = alpha[k] * (1.0 - spec.offspring.gf(xg.x[k], z));
            }
        }
    };
    let mut l = Vec::with_capacity(n + 1);
    let mut u_rows = keep_u.then(Vec::new);
    let mut u = vec![0.0; nx];
    // row 0: u_0 = θ f
    u[..nx].copy_from_slice(&fx);
    let l0 = integrate_exp(xg, &u, 0, 0.0);
    l.push(l0);
    let mut cur = vec![0.0; nx];
    kvals(&mut cur, l0);
    let row0 = cur.clone();
    let mut col0 = vec![cur[0]];
    let mut d_prev = cur.clone();
    let mut d = vec![0.0; nx];
    if let Some(r) = u_rows.as_mut() {
        r.push(u.clone());
    }
    for i in 1..=n {
        let mut li = l[i - 1];
        let mut change = f64::INFINITY;
        let mut left = 0.0;
        for _ in 0..=MAX_CORRECTIONS {
            kvals(&mut cur, li);
            for k in 0..nx {
                d[k] = cur[k] + if k > 0 { d_prev[k - 1] } else { 0.0 };
                let kend = if k == 0 || k == i {
                    cur[0]
                } else if k < i {
                    col0[i - k]
                } else {
                    row0[k - i]
                };
                let p = h * (d[k] - 0.5 * cur[k] - 0.5 * kend);
                if k == i {
                    left = p;
                }
                u[k] = p + if k >= i { fx[k - i] } else { 0.0 };
            }
            let new = integrate_exp(xg, &u, i, left);
            change = (new - li).abs() / new.abs().max(f64::MIN_POSITIVE);
            li = new;
            if change <= 1e-14 {
                break;
            }
        }
        if change > 1e-8 {
            return Err(Error::CorrectorDiverged { t: i as f64 * h, change });
        }
        kvals(&mut cur, li);
        for k in 0..nx {
            d[k] = cur[k] + if k > 0 { d_prev[k - 1] } else { 0.0 };
        }
        col0.push(cur[0]);
        std::mem::swap(&mut d, &mut d_prev);
        l.push(li);
        if let Some(r) = u_rows.as_mut() {
            r.push(u.clone());
        }
    }
    Ok(LaplaceMarch { h, theta, l, u: u_rows })
}

/// ⟨G, e^{-u}⟩ on the x-grid, with the jump of u at node i split.
fn integrate_exp(xg: &XGrid, u: &[f64], i: usize, left: f64) -> f64 {
    let total: f64 = xg.w.iter().zip(u).map(|(w, v)| w * (-v).exp()).sum();
    if i < u.len() {
        total - xg.wl[i] * ((-u[i]).exp() - (-left).exp())
    } else {
        total
    }
}

/// φ^f on a θ-grid with residuals of the limiting functional equation.
#[derive(Debug, Clone, Serialize)]
pub struct PhiCurve {
    pub theta: Vec<f64>,
    pub phi: Vec<f64>,
    pub residual: Vec<f64>,
    /// a(f), the slope of 1 − φ at 0.
    pub c_slope: f64,
    /// (1 − φ(θ_min))/θ_min at the smallest positive node.
    pub slope_at_min: f64,
    pub q: f64,
}

pub const THETA_MIN: f64 = 1e-4;
pub const THETA_RATIO: f64 = 2.0;
pub const THETA_NODES: usize = 21;

impl PhiCurve {
    /// φ(θ): log-linear between nodes, slope form below the smallest node.
    pub fn eval(&self, theta: f64) -> f64 {
        if theta <= 0.0 {
            return 1.0;
        }
        let pos: Vec<usize> = (0..self.theta.len()).filter(|&j| self.theta[j] > 0.0).collect();
        let first = pos[0];
        if theta < self.theta[first] {
            return 1.0 - self.c_slope * theta;
        }
        let last = *pos.last().unwrap();
        if theta >= self.theta[last] {
            return self.phi[last];
        }
        let j = self.theta.partition_point(|&t| t <= theta);
        let (t0, t1) = (self.theta[j - 1], self.theta[j]);
        let w = (theta.ln() - t0.ln()) / (t1.ln() - t0.ln());
        self.phi[j - 1] * (1.0 - w) + self.phi[j] * w
    }

    pub fn to_csv(&self) -> String {
        let rows = (0..self.theta.len()).map(|j| vec![num(self.theta[j]), num(self.phi[j]), num(self.residual[j])]);
        csv("theta,phi,residual", rows)
    }

    /// Interpolated φ without the residual gate, at node or off-node θ.
    pub fn value_at(&self, theta: f64) -> f64 {
        match self.theta.iter().position(|&t| t == theta) {
            Some(j) => self.phi[j],
            None => self.eval(theta),
        }
    }
}

/// ∫ G(dx) exp{∫₀^x α(x−s)[g(x−s, z(s)) − 1] ds} by nested quadrature.
fn nested_gf<Z: Fn(f64) -> f64>(spec: &ModelSpec, z: Z) -> f64 {
    let knots: Vec<f64> = spec.alpha.knots().iter().chain(spec.offspring.knots().iter()).copied().collect();
    let panel = spec.panel();
    let inner = |x: f64| {
        let breaks: Vec<f64> = knots.iter().map(|k| x - k).collect();
        quad::gl(
            |s| {
                let y = x - s;
                spec.alpha.eval_right(y) * (spec.offspring.gf(y, z(s)) - 1.0)
            },
            0.0,
            x,
            &breaks,
            panel,
        )
    };
    let top = spec.x_max();
    let body = quad::gl(|x| spec.lifetime.pdf(x) * inner(x).exp(), 0.0, top, &spec.breaks(), panel);
    // lifetimes beyond the truncation point reproduce as at the cut
    body + spec.lifetime.survival(top) * inner(top).exp()
}

pub fn phi_limit(spec: &ModelSpec, sol: &MalthusianSolution, thetas: &[f64]) -> Result<PhiCurve> {
    let curve = phi_curve(spec, sol, thetas)?;
    for (j, &r) in curve.residual.iter().enumerate() {
        if r > 1e-2 {
            return Err(Error::PhiResidual { theta: curve.theta[j], residual: r });
        }
    }
    Ok(curve)
}

/// As [`phi_limit`] without failing on large residuals.
pub fn phi_curve(spec: &ModelSpec, sol: &MalthusianSolution, thetas: &[f64]) -> Result<PhiCurve> {
    if let Some(bad) = thetas.iter().find(|t| !(**t >= 0.0 && t.is_finite())) {
        return Err(Error::OutOfRange(format!("theta {bad} must be nonnegative")));
    }
    let mut grid: Vec<f64> = vec![0.0];
    grid.extend((0..THETA_NODES).map(|j| THETA_MIN * THETA_RATIO.powi(j as i32)));
    grid.extend(thetas.iter().copied());
    grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
    grid.dedup();
    let xg = XGrid::new(spec);
    let shrink = (-sol.alpha_tilde * spec.numerics.horizon).exp();
    let mut phi = Vec::with_capacity(grid.len());
    for &theta in &grid {
        if theta == 0.0 {
            phi.push(1.0);
            continue;
        }
        let m = march(spec, &xg, theta * shrink, false)?;
        phi.push(*m.l.last().unwrap());
    }
    let lf = limit_functionals(spec, sol);
    let q = extinction_prob(spec)?.q;
    let first = grid.iter().position(|&t| t > 0.0).unwrap();
    let slope_at_min = (1.0 - phi[first]) / grid[first];
    let mut curve = PhiCurve { theta: grid, phi, residual: Vec::new(), c_slope: lf.a_f, slope_at_min, q };
    let a = sol.alpha_tilde;
    curve.residual = curve
        .theta
        .iter()
        .zip(&curve.phi)
        .map(|(&theta, &p)| {
            if theta == 0.0 {
                return (p - 1.0).abs();
            }
            let rhs = nested_gf(spec, |s| curve.eval(theta * (-a * s).exp()));
            (p - rhs).abs()
        })
        .collect();
    Ok(curve)
}

/// E[e^{-θY}] by nested quadrature; negative θ is allowed for difference
/// quotients.
fn laplace_y_raw(spec: &ModelSpec, sol: &MalthusianSolution, theta: f64) -> f64 {
    let a = sol.alpha_tilde;
    nested_gf(spec, |s| (-theta * (-a * s).exp()).exp())
}

pub fn laplace_y(spec: &ModelSpec, sol: &MalthusianSolution, theta: f64) -> Result<f64> {
    if !(theta >= 0.0) {
        return Err(Error::OutOfRange(format!("theta {theta} must be nonnegative")));
    }
    Ok(laplace_y_raw(spec, sol, theta))
}

/// E Y from a central difference of the Laplace transform at 0.
pub fn mean_y_by_difference(spec: &ModelSpec, sol: &MalthusianSolution, step: f64) -> f64 {
    (laplace_y_raw(spec, sol, -step) - laplace_y_raw(spec, sol, step)) / (2.0 * step)
}

/// ψ(u) = u⁻¹{∫(1 − exp{−u e^{−α̃s}}) ρ(s) ds − 1 + E e^{−uY}}.
pub fn psi_fun(spec: &ModelSpec, sol: &MalthusianSolution, u: f64) -> Result<f64> {
    psi_with(spec, sol, &ReproKernel::new(spec), u)
}

pub fn psi_with(spec: &ModelSpec, sol: &MalthusianSolution, kernel: &ReproKernel, u: f64) -> Result<f64> {
    if !(u > 0.0 && u.is_finite()) {
        return Err(Error::OutOfRange(format!("psi argument {u} must be positive")));
    }
    let a = sol.alpha_tilde;
    let jumps = kernel.integrate(|s| -(-u * (-a * s).exp()).exp_m1());
    Ok((jumps - 1.0 + laplace_y_raw(spec, sol, u)) / u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::*;
    use crate::renewal::malthusian;

    #[test]
    fn gf_oracles() {
        let spec = exp_base();
        let gf = TotalOffspringGf::new(&spec);
        for mode in [GfMode::Poisson, GfMode::Compound] {
            assert!((gf.eval(1.0, mode).unwrap() - 1.0).abs() < 1e-13);
        }
        assert!((gf.eval(0.5, GfMode::Poisson).unwrap() - 0.5).abs() < 1e-6);
        for s in [0.0, 0.3, 0.77] {
            let a = gf.eval(s, GfMode::Poisson).unwrap();
            let b = gf.eval(s, GfMode::Compound).unwrap();
            assert!((a - b).abs() < 1e-8);
        }
        assert!(gf.eval(1.2, GfMode::Poisson).is_err());
        let pois = exp_pois();
        let gf = TotalOffspringGf::new(&pois);
        let s = 0.3;
        assert!((gf.eval(s, GfMode::Compound).unwrap() - 1.0 / (3.0 - 2.0 * (s - 1.0f64).exp())).abs() < 1e-8);
        assert!((gf.eval(s, GfMode::Poisson).unwrap() - 1.0 / (3.0 - 2.0 * s)).abs() < 1e-8);
    }

    #[test]
    fn extinction_oracles() {
        let r = extinction_prob(&exp_base()).unwrap();
        assert!((r.q - 0.5).abs() < 1e-9, "{}", r.q);
        assert!((r.q_poisson - 0.5).abs() < 1e-6);
        let r = extinction_prob(&exp_pois()).unwrap();
        assert!((r.q - 0.605182577141282929728).abs() < 1e-9, "{}", r.q);
        assert!(r.fixed_point_residual < 1e-10);
        assert_eq!(extinction_prob(&subcritical()).unwrap().q, 1.0);
    }

    #[test]
    fn extinction_curve_is_monotone_and_below_q() {
        for spec in [exp_base(), exp_pois()] {
            let r = extinction_curve(&spec).unwrap();
            let c = r.q_curve.as_ref().unwrap();
            assert_eq!(c[0], 0.0);
            for w in c.windows(2) {
                assert!(w[1] >= w[0], "{} {}", w[0], w[1]);
            }
            let last = *c.last().unwrap();
            assert!(last <= r.q && r.q - last < 5e-3, "{last} {}", r.q);
        }
        let r = extinction_curve(&exp_base()).unwrap();
        let c = r.q_curve.unwrap();
        for i in [10, 100, 300] {
            let t = i as f64 * 0.01;
            let exact = (t.exp() - 1.0) / (2.0 * t.exp() - 1.0);
            assert!((c[i] - exact).abs() < 1e-7, "t={t} {} {exact}", c[i]);
        }
    }

    #[test]
    fn laplace_march_trivial_inputs() {
        let spec = exp_base();
        let m = laplace_march(&spec, 0.0).unwrap();
        assert!(m.l.iter().all(|&l| (l - 1.0).abs() < 1e-8));
        let m = laplace_march(&spec, 0.7).unwrap();
        assert!((m.l[0] - (-0.7f64).exp()).abs() < 1e-9);
        assert!((m.u_at(0.0, 2.0).unwrap() - 0.7).abs() < 1e-12);
    }

    #[test]
    fn phi_birth_death_oracle() {
        let spec = exp_base();
        let sol = malthusian(&spec).unwrap();
        let curve = phi_limit(&spec, &sol, &[0.25, 1.0, 4.0, 100.0]).unwrap();
        for theta in [0.25, 1.0, 4.0] {
            let exact = 0.5 + 0.25 / (0.5 + theta);
            assert!((curve.value_at(theta) - exact).abs() < 5e-3, "theta={theta}");
        }
        assert!((curve.value_at(100.0) - 0.5).abs() < 5e-3);
        assert!((curve.slope_at_min - curve.c_slope).abs() < 1e-3, "{}", curve.slope_at_min);
        assert!(curve.residual.iter().all(|&r| r < 1e-2));
        for w in curve.phi.windows(2) {
            assert!(w[1] <= w[0] + 1e-12);
        }
    }

    #[test]
    fn y_and_psi_diagnostics() {
        let spec = exp_base();
        let sol = malthusian(&spec).unwrap();
        assert!((laplace_y(&spec, &sol, 0.0).unwrap() - 1.0).abs() < 1e-13);
        assert!((mean_y_by_difference(&spec, &sol, 1e-4) - 1.0).abs() < 1e-4);
        let k = ReproKernel::new(&spec);
        for j in -12..=4 {
            let u = 10f64.powf(j as f64 / 2.0);
            assert!(psi_with(&spec, &sol, &k, u).unwrap() >= 0.0);
        }
        assert!(psi_with(&spec, &sol, &k, 1e-6).unwrap() < 1e-4);
        let psi1 = psi_with(&spec, &sol, &k, 1.0).unwrap();
        assert!((psi1 - 0.265617878001577215904).abs() < 1e-6, "{psi1}");
    }
}
