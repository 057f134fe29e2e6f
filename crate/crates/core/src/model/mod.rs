//! Model specification: birth rate α, offspring law g, lifetime law G, test
//! function f and the numerics shared by every solver.

mod functions;
mod lifetime;
mod offspring;

pub use functions::{Param, RateFunction, TestFunction};
pub use lifetime::LifetimeDistribution;
pub use offspring::{OffspringLaw, PMF_TAIL};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::quad;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NumericsConfig {
    pub h: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub tail_q: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for NumericsConfig {
    fn default() -> Self {
        NumericsConfig { h: 0.01, horizon: 12.0, tail_q: 1e-10, tol: 1e-10, max_iter: 10_000 }
    }
}

impl NumericsConfig {
    pub fn check(&self) -> Result<()> {
        if !(self.h.is_finite() && self.h > 0.0) {
            return Err(Error::Config(format!("numerics: h must be positive, got {}", self.h)));
        }
        if !(self.horizon.is_finite() && self.horizon >= self.h) {
            return Err(Error::Config(format!("numerics: T must be at least h, got {}", self.horizon)));
        }
        if !(self.tail_q > 0.0 && self.tail_q < 1e-3) {
            return Err(Error::Config(format!("numerics: tail_q must lie in (0, 1e-3), got {}", self.tail_q)));
        }
        if !(self.tol > 0.0) {
            return Err(Error::Config(format!("numerics: tol must be positive, got {}", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(Error::Config("numerics: max_iter must be positive".into()));
        }
        Ok(())
    }

    /// Number of grid intervals on [0, T].
    pub fn steps(&self) -> usize {
        (self.horizon / self.h).round() as usize
    }
}

/// Ensemble and verification settings; all optional in the document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub seed: u64,
    pub trajectories: usize,
    pub max_pop: usize,
    /// Snapshot times for `simulate`.
    pub obs_times: Vec<f64>,
    pub first_moment_times: Vec<f64>,
    pub distributional_time: f64,
    pub variance_time: f64,
    pub clt_time: f64,
    pub clt_s0: f64,
    pub clt_compare_time: f64,
    pub clt_samples: usize,
    pub y_samples: usize,
    pub thetas: Vec<f64>,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            seed: 42,
            trajectories: 10_000,
            max_pop: 1_000_000,
            obs_times: vec![1.0, 2.0, 4.0, 6.0, 8.0],
            first_moment_times: vec![2.0, 4.0, 5.0, 6.0, 8.0],
            distributional_time: 10.0,
            variance_time: 4.0,
            clt_time: 8.0,
            clt_s0: 2.0,
            clt_compare_time: 6.0,
            clt_samples: 2000,
            y_samples: 100_000,
            thetas: vec![0.5, 1.0, 2.0],
        }
    }
}

/// The configuration document as read from disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigDocument {
    pub alpha: RateFunction,
    pub offspring: OffspringLaw,
    pub lifetime: LifetimeDistribution,
    pub f: TestFunction,
    #[serde(default)]
    pub numerics: NumericsConfig,
    #[serde(default)]
    pub sim: SimConfig,
}

impl ConfigDocument {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Canonical serialization: defaults filled in, fixed key order.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    /// Hex SHA-256 of the canonical serialization.
    pub fn spec_hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical_json().as_bytes()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub alpha: RateFunction,
    pub offspring: OffspringLaw,
    pub lifetime: LifetimeDistribution,
    pub f: TestFunction,
    pub numerics: NumericsConfig,
}

pub fn build_model(doc: &ConfigDocument) -> Result<ModelSpec> {
    doc.alpha.check("alpha")?;
    doc.offspring.check()?;
    doc.lifetime.check()?;
    doc.f.check()?;
    doc.numerics.check()?;
    Ok(ModelSpec {
        alpha: doc.alpha.clone(),
        offspring: doc.offspring.clone(),
        lifetime: doc.lifetime.clone(),
        f: doc.f.clone(),
        numerics: doc.numerics.clone(),
    })
}

impl ModelSpec {
    /// Same model with a different test function.
    pub fn with_f(&self, f: TestFunction) -> ModelSpec {
        ModelSpec { f, ..self.clone() }
    }

    pub fn h(&self) -> f64 {
        self.numerics.h
    }

    /// Right end of the truncated lifetime support.
    pub fn x_max(&self) -> f64 {
        self.lifetime.quantile(1.0 - self.numerics.tail_q)
    }

    /// Gauss–Legendre panel width.
    pub fn panel(&self) -> f64 {
        50.0 * self.numerics.h
    }

    /// Kinks of α·g' and the lifetime density.
    pub fn breaks(&self) -> Vec<f64> {
        let mut b: Vec<f64> = self.alpha.knots().to_vec();
        b.extend(self.offspring.knots());
        b.extend(self.lifetime.breakpoints());
        b
    }

    /// β(x) = α(x) g'(x, 1-)
    #[inline]
    pub fn beta(&self, x: f64) -> f64 {
        self.alpha.eval(x) * self.offspring.gp1(x)
    }

    /// β₂(x) = α(x) g''(x, 1-)
    #[inline]
    pub fn beta2(&self, x: f64) -> f64 {
        self.alpha.eval(x) * self.offspring.gpp1(x)
    }

    /// β with the right limit β(0+) used at and below 0.
    #[inline]
    pub fn beta_right(&self, x: f64) -> f64 {
        let x = x.max(0.0);
        self.alpha.eval_right(x) * self.offspring.gp1(x)
    }

    #[inline]
    pub fn beta2_right(&self, x: f64) -> f64 {
        let x = x.max(0.0);
        self.alpha.eval_right(x) * self.offspring.gpp1(x)
    }

    /// x-grid used for suprema: step h over the truncated support plus knots.
    pub(crate) fn sup_grid(&self) -> Vec<f64> {
        if self.offspring.is_homogeneous() && self.alpha.is_constant() {
            return vec![1.0];
        }
        let xm = self.x_max();
        let n = (xm / self.h()).ceil() as usize;
        let mut xs: Vec<f64> = (1..=n).map(|i| (i as f64 * self.h()).min(xm)).collect();
        xs.extend(self.breaks().into_iter().filter(|&k| k > 0.0 && k <= xm));
        xs
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
    pub pass: bool,
    pub m: f64,
}

impl ValidationReport {
    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Bound used for the "finite supremum" checks.
const FINITE_BOUND: f64 = 1e12;

pub fn validate(spec: &ModelSpec) -> ValidationReport {
    let xs = spec.sup_grid();
    let sup = |g: &dyn Fn(f64) -> f64| xs.iter().map(|&x| g(x)).fold(0.0, f64::max);
    let law = &spec.offspring;
    let bounded = |name: &str, value: f64| Check {
        name: name.into(),
        value,
        threshold: FINITE_BOUND,
        pass: value.is_finite() && value < FINITE_BOUND,
    };
    let mut checks = vec![
        bounded("sup_gp1", sup(&|x| law.gp1(x))),
        bounded("beta", sup(&|x| spec.alpha.eval(x) * law.gp1(x))),
        bounded("sup_nlogn", sup(&|x| law.nlogn_moment(x))),
        bounded("sup_gpp1", sup(&|x| law.gpp1(x))),
    ];
    let mass_err = xs.iter().map(|&x| (law.pmf_sum(x, |_| 1.0).1 - 1.0).abs()).fold(0.0, f64::max);
    checks.push(Check {
        name: "offspring_mass".into(),
        value: mass_err,
        threshold: 1e-11,
        pass: mass_err <= 1e-11,
    });
    let m = mean_total_offspring(spec).unwrap_or(f64::NAN);
    checks.push(Check { name: "supercritical".into(), value: m, threshold: 1.0, pass: m > 1.0 });
    let pass = checks.iter().all(|c| c.pass);
    ValidationReport { checks, pass, m }
}

/// m = ∫G(dx)∫₀^x β(x−s)ds, evaluated as ∫₀^∞ β(y)(1 − G(y))dy.
pub fn mean_total_offspring(spec: &ModelSpec) -> Result<f64> {
    let m = quad::gl(
        |y| spec.beta(y) * spec.lifetime.survival(y),
        0.0,
        spec.x_max(),
        &spec.breaks(),
        spec.panel(),
    );
    if !m.is_finite() {
        return Err(Error::NonFinite("mean_total_offspring"));
    }
    Ok(m)
}

/// The fixtures used throughout the tests and documentation.
pub mod fixtures {
    use super::*;

    fn doc(alpha: f64, offspring: OffspringLaw, f: TestFunction) -> ConfigDocument {
        ConfigDocument {
            alpha: RateFunction::Constant { value: alpha },
            offspring,
            lifetime: LifetimeDistribution::Exponential { rate: 1.0 },
            f,
            numerics: NumericsConfig::default(),
            sim: SimConfig::default(),
        }
    }

    /// α ≡ 2, one child per event, Exp(1) lifetimes, f ≡ 1.
    pub fn exp_base_doc() -> ConfigDocument {
        doc(2.0, OffspringLaw::Deterministic { n: Param::Constant(1.0) }, TestFunction::One)
    }

    /// α ≡ 2, Poisson(1) children per event, Exp(1) lifetimes, f ≡ 1.
    pub fn exp_pois_doc() -> ConfigDocument {
        doc(2.0, OffspringLaw::Poisson { mean: Param::Constant(1.0) }, TestFunction::One)
    }

    /// α ≡ 1, geometric mean 0.4, Exp(1) lifetimes: m = 0.4.
    pub fn subcritical_doc() -> ConfigDocument {
        doc(1.0, OffspringLaw::Geometric { mean: Param::Constant(0.4) }, TestFunction::One)
    }

    /// α ≡ 0: no reproduction.
    pub fn sterile_doc() -> ConfigDocument {
        doc(0.0, OffspringLaw::Deterministic { n: Param::Constant(1.0) }, TestFunction::One)
    }

    pub fn exp_base() -> ModelSpec {
        build_model(&exp_base_doc()).unwrap()
    }

    pub fn exp_pois() -> ModelSpec {
        build_model(&exp_pois_doc()).unwrap()
    }

    pub fn subcritical() -> ModelSpec {
        build_model(&subcritical_doc()).unwrap()
    }

    pub fn sterile() -> ModelSpec {
        build_model(&sterile_doc()).unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;

    #[test]
    fn parses_canonical_document() {
        let text = r#"{
            "alpha": {"kind": "constant", "value": 2},
            "offspring": {"kind": "deterministic", "n": 1},
            "lifetime": {"kind": "exponential", "rate": 1},
            "f": {"kind": "one"}
        }"#;
        let doc = ConfigDocument::from_json(text).unwrap();
        assert_eq!(doc, exp_base_doc());
        let back = ConfigDocument::from_json(&doc.canonical_json()).unwrap();
        assert_eq!(back.spec_hash(), doc.spec_hash());
    }

    #[test]
    fn schema_violations_rejected() {
        let extra = r#"{"alpha": {"kind": "constant", "value": 2}, "offspring": {"kind": "poisson", "mean": 1},
            "lifetime": {"kind": "exponential", "rate": 1}, "f": {"kind": "one"}, "beta": 3}"#;
        assert!(ConfigDocument::from_json(extra).is_err());
        let bad_tag = r#"{"alpha": {"kind": "cubic", "value": 2}, "offspring": {"kind": "poisson", "mean": 1},
            "lifetime": {"kind": "exponential", "rate": 1}, "f": {"kind": "one"}}"#;
        assert!(ConfigDocument::from_json(bad_tag).is_err());
        let missing = r#"{"alpha": {"kind": "constant", "value": 2}, "lifetime": {"kind": "exponential", "rate": 1},
            "f": {"kind": "one"}}"#;
        assert!(ConfigDocument::from_json(missing).is_err());
    }

    #[test]
    fn decreasing_alpha_knots_rejected() {
        let mut doc = exp_base_doc();
        doc.alpha = RateFunction::Table { xs: vec![2.0, 1.0], ys: vec![1.0, 2.0] };
        let err = build_model(&doc).unwrap_err().to_string();
        assert!(err.contains("non-increasing"), "{err}");
        let mut doc = exp_base_doc();
        doc.alpha = RateFunction::Constant { value: -1.0 };
        assert!(build_model(&doc).unwrap_err().to_string().contains("negative"));
    }

    #[test]
    fn fixture_reports() {
        let r = validate(&exp_base());
        assert!(r.pass, "{r:?}");
        assert!((r.m - 2.0).abs() < 1e-6);
        let r = validate(&exp_pois());
        assert!(r.pass, "{r:?}");
        assert!((r.get("sup_gpp1").unwrap().value - 1.0).abs() < 1e-15);
        let r = validate(&subcritical());
        assert!(!r.pass);
        assert!(!r.get("supercritical").unwrap().pass);
        assert!((r.m - 0.4).abs() < 1e-6);
    }

    #[test]
    fn mean_total_offspring_oracles() {
        assert!((mean_total_offspring(&exp_base()).unwrap() - 2.0).abs() < 1e-6);
        assert!((mean_total_offspring(&exp_pois()).unwrap() - 2.0).abs() < 1e-6);
        assert_eq!(mean_total_offspring(&sterile()).unwrap(), 0.0);
    }

    #[test]
    fn mean_total_offspring_step_invariant() {
        let mut doc = exp_pois_doc();
        doc.alpha = RateFunction::Table { xs: vec![0.5, 1.5, 3.0], ys: vec![1.0, 3.0, 2.0] };
        doc.lifetime = LifetimeDistribution::Gamma { shape: 2.0, scale: 0.8 };
        let a = mean_total_offspring(&build_model(&doc).unwrap()).unwrap();
        doc.numerics.h /= 2.0;
        let b = mean_total_offspring(&build_model(&doc).unwrap()).unwrap();
        assert!((a - b).abs() < 1e-8, "{a} {b}");
    }
}
