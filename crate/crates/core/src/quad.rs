//! Quadrature rules shared by the solvers.
//!
//! Two families live here: composite Gauss–Legendre panels for scalar
//! functionals (split at caller-supplied kinks), and the uniform-grid
//! trapezoid helpers used by the renewal and march solvers.

use std::sync::LazyLock;

const GL_ORDER: usize = 12;

struct Rule {
    nodes: [f64; GL_ORDER],
    weights: [f64; GL_ORDER],
}

// Legendre roots by Newton iteration from the Chebyshev guess.
static GL: LazyLock<Rule> = LazyLock::new(|| {
    let n = GL_ORDER;
    let mut nodes = [0.0; GL_ORDER];
    let mut weights = [0.0; GL_ORDER];
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let pk = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = pk;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    Rule { nodes, weights }
});

/// A cached set of quadrature nodes and weights over an interval.
#[derive(Debug, Clone, Default)]
pub struct Nodes {
    pub x: Vec<f64>,
    pub w: Vec<f64>,
}

impl Nodes {
    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F) -> f64 {
        self.x.iter().zip(&self.w).map(|(&x, &w)| w * f(x)).sum()
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }
}

fn segments(a: f64, b: f64, breaks: &[f64]) -> Vec<f64> {
    let mut pts = vec![a];
    let mut inner: Vec<f64> = breaks
        .iter()
        .copied()
        .filter(|&c| c > a && c < b && c.is_finite())
        .collect();
    inner.sort_by(|x, y| x.partial_cmp(y).unwrap());
    inner.dedup();
    pts.extend(inner);
    pts.push(b);
    pts
}

/// Gauss–Legendre nodes covering `[a, b]`, split at `breaks` and into panels
/// no wider than `panel`.
pub fn gl_nodes(a: f64, b: f64, breaks: &[f64], panel: f64) -> Nodes {
    let mut out = Nodes::default();
    if b <= a {
        return out;
    }
    let rule = &*GL;
    let pts = segments(a, b, breaks);
    for seg in pts.windows(2) {
        let (lo, hi) = (seg[0], seg[1]);
        let len = hi - lo;
        if len <= 0.0 {
            continue;
        }
        let panels = (len / panel).ceil().max(1.0) as usize;
        let width = len / panels as f64;
        for p in 0..panels {
            let c = lo + (p as f64 + 0.5) * width;
            let half = 0.5 * width;
            for (x, w) in rule.nodes.iter().zip(&rule.weights) {
                out.x.push(c + half * x);
                out.w.push(half * w);
            }
        }
    }
    let mut idx: Vec<usize> = (0..out.x.len()).collect();
    idx.sort_by(|&i, &j| out.x[i].total_cmp(&out.x[j]));
    Nodes { x: idx.iter().map(|&i| out.x[i]).collect(), w: idx.iter().map(|&i| out.w[i]).collect() }
}

/// Integrate `f` over `[a, b]` with composite Gauss–Legendre panels.
pub fn gl<F: FnMut(f64) -> f64>(f: F, a: f64, b: f64, breaks: &[f64], panel: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let rule = &*GL;
    let mut f = f;
    let pts = segments(a, b, breaks);
    let mut total = 0.0;
    for seg in pts.windows(2) {
        let (lo, hi) = (seg[0], seg[1]);
        let len = hi - lo;
        if len <= 0.0 {
            continue;
        }
        let panels = (len / panel).ceil().max(1.0) as usize;
        let width = len / panels as f64;
        for p in 0..panels {
            let c = lo + (p as f64 + 0.5) * width;
            let half = 0.5 * width;
            let mut s = 0.0;
            for (x, w) in rule.nodes.iter().zip(&rule.weights) {
                s += w * f(c + half * x);
            }
            total += half * s;
        }
    }
    total
}

/// Running integrals `∫_0^{x_j} f` at each of the ascending points `xs`.
pub fn cumulative<F: FnMut(f64) -> f64>(xs: &[f64], mut f: F, breaks: &[f64], panel: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(xs.len());
    let mut prev = 0.0;
    let mut acc = 0.0;
    for &x in xs {
        acc += gl(&mut f, prev, x, breaks, panel);
        prev = x;
        out.push(acc);
    }
    out
}

/// Trapezoid weights for `n + 1` equally spaced nodes.
pub fn trapezoid_weight(i: usize, n: usize, h: f64) -> f64 {
    if n == 0 {
        0.0
    } else if i == 0 || i == n {
        0.5 * h
    } else {
        h
    }
}

/// Linear interpolation of `values` sampled at `i * h`, clamped at both ends.
pub fn interp_uniform(values: &[f64], h: f64, t: f64) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    if t <= 0.0 {
        return values[0];
    }
    let pos = t / h;
    let i = pos.floor() as usize;
    if i + 1 >= values.len() {
        return *values.last().unwrap();
    }
    let frac = pos - i as f64;
    values[i] * (1.0 - frac) + values[i + 1] * frac
}
