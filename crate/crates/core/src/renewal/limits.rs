use serde::Serialize;

use super::MalthusianSolution;
use crate::export::{csv, num};
use crate::model::{ModelSpec, TestFunction};
use crate::quad;

/// a(f), A(f), the curves A(x), V(x), σ(x) and A(σ).
#[derive(Debug, Clone)]
pub struct LimitFunctionals {
    pub a_f: f64,
    pub cap_a_f: f64,
    pub a_sigma: f64,
    pub n1: f64,
    /// ⟨G, V⟩
    pub v_mass: f64,
    spec: ModelSpec,
    alpha_tilde: f64,
    c9: f64,
    denom: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct LimitSummary {
    pub a_f: f64,
    #[serde(rename = "A_f")]
    pub cap_a_f: f64,
    #[serde(rename = "A_sigma")]
    pub a_sigma: f64,
    pub n1: f64,
    pub g_v: f64,
}

pub fn limit_functionals(spec: &ModelSpec, sol: &MalthusianSolution) -> LimitFunctionals {
    let mut lf = LimitFunctionals {
        a_f: 0.0,
        cap_a_f: 0.0,
        a_sigma: 0.0,
        n1: sol.n1,
        v_mass: 0.0,
        spec: spec.clone(),
        alpha_tilde: sol.alpha_tilde,
        c9: sol.c9,
        denom: sol.denom,
    };
    let numer = lf.numerator(|z| spec.f.eval(z), &spec.f.breakpoints());
    lf.a_f = numer / sol.c9;
    lf.cap_a_f = numer / sol.denom;
    let knots = lf.rate_knots();
    lf.a_sigma = lf.numerator(|z| lf.sigma(z), &knots) / sol.denom;
    lf.v_mass = quad::gl(|x| lf.v(x) * spec.lifetime.pdf(x), 0.0, spec.x_max(), &spec.breaks(), spec.panel());
    lf
}

impl LimitFunctionals {
    fn rate_knots(&self) -> Vec<f64> {
        let mut k = self.spec.alpha.knots().to_vec();
        k.extend(self.spec.offspring.knots());
        k
    }

    pub fn alpha_tilde(&self) -> f64 {
        self.alpha_tilde
    }

    pub fn c9(&self) -> f64 {
        self.c9
    }

    /// ∫₀^∞ e^{-α̃u} g_G(z + u) du: the density (up to normalization) of the
    /// limiting remaining-lifetime law.
    pub fn weight(&self, z: f64) -> f64 {
        let spec = &self.spec;
        let top = spec.x_max() - z;
        if top <= 0.0 {
            return 0.0;
        }
        let breaks: Vec<f64> = spec.lifetime.breakpoints().iter().map(|c| c - z).collect();
        let a = self.alpha_tilde;
        quad::gl(|u| (-a * u).exp() * spec.lifetime.pdf(z + u), 0.0, top, &breaks, spec.panel())
    }

    /// ∫₀^∞ e^{-α̃u} ∫_u^∞ g(x − u) G(dx) du, written as ∫ g(z) w̃(z) dz.
    pub fn numerator<F: Fn(f64) -> f64>(&self, g: F, breaks: &[f64]) -> f64 {
        let mut b = breaks.to_vec();
        b.extend(self.spec.lifetime.breakpoints());
        quad::gl(|z| g(z) * self.weight(z), 0.0, self.spec.x_max(), &b, self.spec.panel())
    }

    /// A(g) for a bounded function g, with `breaks` marking its kinks.
    pub fn apply<F: Fn(f64) -> f64>(&self, g: F, breaks: &[f64]) -> f64 {
        self.numerator(g, breaks) / self.denom
    }

    /// A(x) = A(1_{(0,x]})
    pub fn a_curve(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        let top = x.min(self.spec.x_max());
        let v = quad::gl(|z| self.weight(z), 0.0, top, &self.spec.lifetime.breakpoints(), self.spec.panel());
        v / self.denom
    }

    /// V(x) = ∫₀^x α(x−r) g'(x−r,1-) e^{-α̃r} dr
    pub fn v(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        let a = self.alpha_tilde;
        quad::gl(|y| self.spec.beta(y) * (-a * (x - y)).exp(), 0.0, x, &self.rate_knots(), self.spec.panel())
    }

    /// σ(x), identical in form to V(x).
    pub fn sigma(&self, x: f64) -> f64 {
        self.v(x)
    }

    /// V tabulated at x_k = k·h up to the truncated support, built by the
    /// exact recursion V(x+h) = e^{-α̃h}V(x) + ∫_x^{x+h} β(y)e^{-α̃(x+h−y)}dy.
    pub fn v_values(&self) -> Vec<f64> {
        let h = self.spec.h();
        let n = (self.spec.x_max() / h).ceil() as usize;
        let a = self.alpha_tilde;
        let knots = self.rate_knots();
        let mut out = Vec::with_capacity(n + 1);
        out.push(0.0);
        let mut v = 0.0;
        for k in 0..n {
            let (x0, x1) = (k as f64 * h, (k + 1) as f64 * h);
            let inc = quad::gl(|y| self.spec.beta(y) * (-a * (x1 - y)).exp(), x0, x1, &knots, h);
            v = (-a * h).exp() * v + inc;
            out.push(v);
        }
        out
    }

    /// V as a tabulated test function.
    pub fn v_table(&self) -> TestFunction {
        let h = self.spec.h();
        let vals = self.v_values();
        let xs = (1..vals.len()).map(|k| k as f64 * h).collect();
        TestFunction::Table { xs, ys: vals[1..].to_vec() }
    }

    pub fn summary(&self) -> LimitSummary {
        LimitSummary {
            a_f: self.a_f,
            cap_a_f: self.cap_a_f,
            a_sigma: self.a_sigma,
            n1: self.n1,
            g_v: self.v_mass,
        }
    }

    /// `x,A,V,sigma` at spacing `dx` up to `x_end`.
    pub fn curves_csv(&self, dx: f64, x_end: f64) -> String {
        let n = (x_end / dx).round() as usize;
        let rows = (0..=n).map(|k| {
            let x = k as f64 * dx;
            vec![num(x), num(self.a_curve(x)), num(self.v(x)), num(self.sigma(x))]
        });
        csv("x,A,V,sigma", rows)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::*;
    use crate::renewal::malthusian;

    #[test]
    fn exp_base_oracles() {
        let spec = exp_base();
        let sol = malthusian(&spec).unwrap();
        let lf = limit_functionals(&spec, &sol);
        assert!((lf.a_f - 1.0).abs() < 1e-6);
        assert!((lf.cap_a_f - 1.0).abs() < 1e-8);
        assert!((lf.v_mass - 1.0).abs() < 1e-6);
        for x in [0.5, 1.0, 2.0] {
            assert!((lf.a_curve(x) - (1.0 - (-x).exp())).abs() < 1e-6);
            assert!((lf.v(x) - 2.0 * (1.0 - (-x).exp())).abs() < 1e-6);
        }
        assert!((lf.a_f - lf.n1 * lf.cap_a_f).abs() < 1e-10);
        let table = lf.v_values();
        let x = 300.0 * spec.h();
        assert!((table[300] - lf.v(x)).abs() < 1e-12);
    }

    #[test]
    fn a_curve_is_a_distribution_function() {
        let spec = exp_pois().with_f(TestFunction::Indicator { x: 1.0 });
        let sol = malthusian(&spec).unwrap();
        let lf = limit_functionals(&spec, &sol);
        let mut prev = 0.0;
        for k in 1..60 {
            let v = lf.a_curve(k as f64 * 0.5);
            assert!(v >= prev - 1e-15);
            prev = v;
        }
        assert!((lf.a_curve(spec.x_max()) - 1.0).abs() < 1e-8);
        assert!((lf.cap_a_f - lf.a_curve(1.0)).abs() < 1e-10);
    }
}
