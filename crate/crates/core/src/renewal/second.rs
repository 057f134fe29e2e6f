use serde::Serialize;

use super::{
    convolve, limit_functionals, mean_measure, node_index, path_integral, repro_density2, solve_renewal,
    LimitFunctionals, MalthusianSolution, RenewalGrid, XGrid,
};
use crate::error::{Error, Result};
use crate::export::{csv, num};
use crate::model::{ModelSpec, TestFunction};
use crate::quad::interp_uniform;

/// Second-moment curves on the time grid.
#[derive(Debug, Clone)]
pub struct SecondMoment {
    pub grid: RenewalGrid,
    /// ⟨G, (π_t f)²⟩
    pub q2: Vec<f64>,
    pub zeta: Vec<f64>,
    /// ⟨G, γ_t f⟩
    pub gamma: Vec<f64>,
    /// Var⟨X_t, f⟩ = Q₂ − M_f² + Γ_f
    pub var: Vec<f64>,
    /// Π(t) with the free shift set to 0, i.e. e^{-α̃t} ζ(t).
    pub pi: Vec<f64>,
    m_sq: Vec<f64>,
    q2_plus_gamma: Vec<f64>,
    spec: ModelSpec,
}

pub(crate) fn sup_gpp1(spec: &ModelSpec) -> f64 {
    spec.sup_grid().iter().map(|&x| spec.offspring.gpp1(x)).fold(0.0, f64::max)
}

/// Rows of the mean semigroup on the x-grid, one per time node, by
/// accumulating the trapezoid sums along diagonals (x − s, t − s).
///
/// π_t f jumps at x = t when f(0+) ≠ 0; the row holds right limits and the
/// visitor also receives the left limit at node i.
fn for_each_pi_row<V: FnMut(usize, &[f64], f64)>(spec: &ModelSpec, xg: &XGrid, m: &[f64], mut visit: V) {
    let h = spec.h();
    let nx = xg.len();
    let beta: Vec<f64> = xg.x.iter().map(|&x| spec.beta_right(x)).collect();
    let fx: Vec<f64> = xg.x.iter().map(|&x| spec.f.eval_right(x)).collect();
    let mut d_prev = vec![0.0; nx];
    let mut d = vec![0.0; nx];
    let mut row = vec![0.0; nx];
    for (i, &mi) in m.iter().enumerate() {
        let mut left = 0.0;
        for k in 0..nx {
            let kcur = beta[k] * mi;
            d[k] = kcur + if k > 0 { d_prev[k - 1] } else { 0.0 };
            let kend = if k <= i { beta[0] * m[i - k] } else { beta[k - i] * m[0] };
            let p = h * (d[k] - 0.5 * kcur - 0.5 * kend);
            if k == i {
                left = p;
            }
            let shift = if k >= i { fx[k - i] } else { 0.0 };
            row[k] = shift + p;
        }
        visit(i, &row, left);
        std::mem::swap(&mut d, &mut d_prev);
    }
}

/// ⟨G, φ(π_t f)⟩ from one row, splitting the weight of the jump node.
fn integrate_row<F: Fn(f64) -> f64>(xg: &XGrid, i: usize, row: &[f64], left: f64, phi: F) -> f64 {
    let total: f64 = xg.w.iter().zip(row).map(|(w, p)| w * phi(*p)).sum();
    if i < row.len() {
        total - xg.wl[i] * (phi(row[i]) - phi(left))
    } else {
        total
    }
}

/// Solve the second-moment renewal equation alongside the given mean grid.
pub fn second_moment(spec: &ModelSpec, sol: &MalthusianSolution, grid: &RenewalGrid) -> Result<SecondMoment> {
    let s = sup_gpp1(spec);
    if !(s.is_finite() && s < 1e12) {
        return Err(Error::UnboundedSecondFactorial(s));
    }
    let h = spec.h();
    let xg = XGrid::new(spec);
    let mut q2 = vec![0.0; grid.len()];
    for_each_pi_row(spec, &xg, &grid.m_f, |i, row, left| {
        q2[i] = integrate_row(&xg, i, row, left, |p| p * p);
    });
    let rho2: Vec<f64> = grid.t.iter().map(|&t| repro_density2(spec, t)).collect();
    let m_sq: Vec<f64> = grid.m_f.iter().map(|m| m * m).collect();
    let a = convolve(&rho2, &m_sq, h);
    let b = convolve(&grid.rho, &q2, h);
    let zeta: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
    let gamma = solve_renewal(&grid.rho, &zeta, h);
    let var = (0..grid.len()).map(|i| q2[i] - m_sq[i] + gamma[i]).collect();
    let pi = grid.t.iter().zip(&zeta).map(|(t, z)| (-sol.alpha_tilde * t).exp() * z).collect();
    let q2_plus_gamma = q2.iter().zip(&gamma).map(|(a, b)| a + b).collect();
    let mut out_grid = grid.clone();
    out_grid.gamma_f = Some(gamma.clone());
    Ok(SecondMoment { grid: out_grid, q2, zeta, gamma, var, pi, m_sq, q2_plus_gamma, spec: spec.clone() })
}

impl SecondMoment {
    /// γ_t f(x) from the solved curves.
    pub fn gamma_point(&self, t: f64, x: f64) -> Result<f64> {
        let i = node_index(self.grid.h, self.grid.len() - 1, t)?;
        Ok(self.gamma_at(i, x))
    }

    pub(crate) fn gamma_at(&self, i: usize, x: f64) -> f64 {
        let h = self.grid.h;
        let spec = &self.spec;
        path_integral(h, i, x, |y| spec.beta2_right(y), &self.m_sq)
            + path_integral(h, i, x, |y| spec.beta_right(y), &self.q2_plus_gamma)
    }

    pub fn to_csv(&self) -> String {
        let rows = (0..self.grid.len()).map(|i| {
            vec![
                num(self.grid.t[i]),
                num(self.q2[i]),
                num(self.zeta[i]),
                num(self.var[i]),
                num(self.pi[i]),
            ]
        });
        csv("t,Q2,zeta,Var_f,Pi", rows)
    }
}

/// x ↦ π_t f(x) at one time node, tabulated on the x-grid.
#[derive(Debug, Clone)]
pub struct SemigroupRow {
    pub t: f64,
    h: f64,
    p: Vec<f64>,
    f: TestFunction,
}

impl SemigroupRow {
    pub fn new(spec: &ModelSpec, grid: &RenewalGrid, t: f64) -> Result<Self> {
        let i = grid.node(t)?;
        let h = spec.h();
        let n = (spec.x_max() / h).ceil() as usize;
        let p = (0..=n)
            .map(|k| path_integral(h, i, k as f64 * h, |y| spec.beta_right(y), &grid.m_f))
            .collect();
        Ok(SemigroupRow { t: i as f64 * h, h, p, f: spec.f.clone() })
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.f.eval(x - self.t) + interp_uniform(&self.p, self.h, x)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CltVariance {
    pub s0: f64,
    pub v_window: f64,
    /// A(σ)·D_f, absent when D_f diverges.
    pub v_limit: Option<f64>,
    pub df: Option<f64>,
    pub divergent: bool,
    /// Relative change of e^{-α̃t}Γ_f(t) over the last quarter of the grid.
    pub df_rel_change: f64,
    #[serde(rename = "A_sigma")]
    pub a_sigma: f64,
    pub integrability_diag: Vec<(f64, f64)>,
}

pub fn clt_variance(spec: &ModelSpec, sol: &MalthusianSolution, s0: f64) -> Result<CltVariance> {
    let grid = mean_measure(spec);
    let sm = second_moment(spec, sol, &grid)?;
    let lf = limit_functionals(spec, sol);
    clt_variance_with(spec, sol, &lf, &sm, s0)
}

pub fn clt_variance_with(
    spec: &ModelSpec,
    sol: &MalthusianSolution,
    lf: &LimitFunctionals,
    sm: &SecondMoment,
    s0: f64,
) -> Result<CltVariance> {
    let n = sm.grid.len() - 1;
    let i0 = node_index(sm.grid.h, n, s0)?;
    let a = sol.alpha_tilde;
    let v_window = if i0 == 0 {
        0.0
    } else {
        let mut breaks = vec![s0];
        breaks.extend(spec.f.breakpoints().iter().map(|b| b + s0));
        (-a * s0).exp() * lf.apply(|z| sm.gamma_at(i0, z), &breaks)
    };
    let scaled = |i: usize| (-a * sm.grid.t[i]).exp() * sm.gamma[i];
    let first = scaled(3 * n / 4);
    let last = scaled(n);
    let rel = if last == 0.0 { 0.0 } else { (last - first).abs() / last.abs() };
    let divergent = rel > 0.05;
    let df = (!divergent).then_some(last);
    let stride = ((0.5 / sm.grid.h).round() as usize).max(1);
    let integrability_diag = (0..=n).step_by(stride).map(|i| (sm.grid.t[i], sm.pi[i])).collect();
    Ok(CltVariance {
        s0,
        v_window,
        v_limit: df.map(|d| lf.a_sigma * d),
        df,
        divergent,
        df_rel_change: rel,
        a_sigma: lf.a_sigma,
        integrability_diag,
    })
}
