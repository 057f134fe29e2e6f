use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Linear interpolation through `(xs, ys)` with constant extrapolation.
pub(crate) fn table_eval(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    if x <= xs[0] {
        return ys[0];
    }
    let last = xs.len() - 1;
    if x >= xs[last] {
        return ys[last];
    }
    // first knot strictly greater than x
    let j = xs.partition_point(|&k| k <= x);
    let (x0, x1) = (xs[j - 1], xs[j]);
    let (y0, y1) = (ys[j - 1], ys[j]);
    y0 + (y1 - y0) * (x - x0) / (x1 - x0)
}

pub(crate) fn check_table(what: &str, xs: &[f64], ys: &[f64]) -> Result<()> {
    if xs.is_empty() || xs.len() != ys.len() {
        return Err(Error::Config(format!(
            "{what}: table needs equal, non-zero numbers of knots and values ({} vs {})",
            xs.len(),
            ys.len()
        )));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(Error::Config(format!("{what}: table entries must be finite")));
    }
    if xs[0] <= 0.0 {
        return Err(Error::Config(format!("{what}: table knots must be positive")));
    }
    if xs.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config(format!("{what}: non-increasing table knots")));
    }
    if ys.iter().any(|&y| y < 0.0) {
        return Err(Error::Config(format!("{what}: negative table value")));
    }
    Ok(())
}

/// Birth rate as a function of remaining lifetime.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum RateFunction {
    Constant { value: f64 },
    Table { xs: Vec<f64>, ys: Vec<f64> },
}

impl RateFunction {
    pub fn check(&self, what: &str) -> Result<()> {
        match self {
            RateFunction::Constant { value } => {
                if !value.is_finite() || *value < 0.0 {
                    return Err(Error::Config(format!("{what}: negative parameter {value}")));
                }
                Ok(())
            }
            RateFunction::Table { xs, ys } => check_table(what, xs, ys),
        }
    }

    /// α(x); zero for `x <= 0`.
    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        self.eval_right(x)
    }

    /// α(x) with the right limit α(0+) used for `x <= 0`.
    #[inline]
    pub fn eval_right(&self, x: f64) -> f64 {
        match self {
            RateFunction::Constant { value } => *value,
            RateFunction::Table { xs, ys } => table_eval(xs, ys, x),
        }
    }

    /// ‖α‖ = sup α.
    pub fn sup(&self) -> f64 {
        match self {
            RateFunction::Constant { value } => *value,
            RateFunction::Table { ys, .. } => ys.iter().copied().fold(0.0, f64::max),
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, RateFunction::Constant { .. })
    }

    pub fn knots(&self) -> &[f64] {
        match self {
            RateFunction::Constant { .. } => &[],
            RateFunction::Table { xs, .. } => xs,
        }
    }
}

/// An offspring-law parameter: a constant or a table over remaining lifetime.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Param {
    Constant(f64),
    Function(RateFunction),
}

impl Param {
    #[inline]
    pub fn at(&self, x: f64) -> f64 {
        match self {
            Param::Constant(v) => *v,
            Param::Function(r) => r.eval_right(x),
        }
    }

    pub fn is_constant(&self) -> bool {
        match self {
            Param::Constant(_) => true,
            Param::Function(r) => r.is_constant(),
        }
    }

    pub fn knots(&self) -> &[f64] {
        match self {
            Param::Constant(_) => &[],
            Param::Function(r) => r.knots(),
        }
    }

    /// Values at the knots, or the constant; the extrema of a piecewise
    /// linear parameter are attained there.
    pub fn extreme_values(&self) -> Vec<f64> {
        match self {
            Param::Constant(v) => vec![*v],
            Param::Function(RateFunction::Constant { value }) => vec![*value],
            Param::Function(RateFunction::Table { ys, .. }) => ys.clone(),
        }
    }

    pub(crate) fn check(&self, what: &str) -> Result<()> {
        match self {
            Param::Constant(v) if !v.is_finite() || *v < 0.0 => {
                Err(Error::Config(format!("{what}: negative parameter {v}")))
            }
            Param::Constant(_) => Ok(()),
            Param::Function(r) => r.check(what),
        }
    }
}

/// Bounded nonnegative test function f of the remaining lifetime.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum TestFunction {
    One,
    /// 1_{(0, x]}
    Indicator { x: f64 },
    Expdecay { rate: f64 },
    Table { xs: Vec<f64>, ys: Vec<f64> },
}

impl TestFunction {
    pub fn check(&self) -> Result<()> {
        match self {
            TestFunction::One => Ok(()),
            TestFunction::Indicator { x } if !(x.is_finite() && *x > 0.0) => {
                Err(Error::Config(format!("f: indicator endpoint must be positive, got {x}")))
            }
            TestFunction::Expdecay { rate } if !(rate.is_finite() && *rate >= 0.0) => {
                Err(Error::Config(format!("f: negative parameter {rate}")))
            }
            TestFunction::Table { xs, ys } => check_table("f", xs, ys),
            _ => Ok(()),
        }
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        match self {
            TestFunction::One => 1.0,
            TestFunction::Indicator { x: end } => {
                if x <= *end {
                    1.0
                } else {
                    0.0
                }
            }
            TestFunction::Expdecay { rate } => (-rate * x).exp(),
            TestFunction::Table { xs, ys } => table_eval(xs, ys, x),
        }
    }

    /// f(x) with the right limit f(0+) used for `x <= 0`.
    #[inline]
    pub fn eval_right(&self, x: f64) -> f64 {
        self.eval(x.max(f64::MIN_POSITIVE))
    }

    /// ‖f‖
    pub fn norm(&self) -> f64 {
        match self {
            TestFunction::One | TestFunction::Expdecay { .. } | TestFunction::Indicator { .. } => 1.0,
            TestFunction::Table { ys, .. } => ys.iter().copied().fold(0.0, f64::max),
        }
    }

    /// Points where f has a jump or kink; long tables are left to the panels.
    pub fn breakpoints(&self) -> Vec<f64> {
        match self {
            TestFunction::Indicator { x } => vec![*x],
            TestFunction::Table { xs, .. } if xs.len() <= 64 => xs.clone(),
            _ => Vec::new(),
        }
    }

    /// c·f as a table (closed forms are tabulated; an indicator becomes a
    /// knot pair 1e-12 apart).
    pub fn scaled(&self, c: f64) -> TestFunction {
        let (xs, ys) = match self {
            TestFunction::Table { xs, ys } => (xs.clone(), ys.clone()),
            TestFunction::One => (vec![1.0], vec![1.0]),
            TestFunction::Indicator { x } => (vec![*x, *x + 1e-12 * x.max(1.0)], vec![1.0, 0.0]),
            TestFunction::Expdecay { rate } => {
                let xs: Vec<f64> = (1..=40_000).map(|i| i as f64 * 1e-3).collect();
                let ys = xs.iter().map(|x| (-rate * x).exp()).collect();
                (xs, ys)
            }
        };
        TestFunction::Table { xs, ys: ys.into_iter().map(|y| c * y).collect() }
    }
}
