use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma_lr, gamma_ur, ln_gamma};

use crate::error::{Error, Result};

/// Lifetime law G of every particle, supported in (0, ∞).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum LifetimeDistribution {
    Exponential { rate: f64 },
    Gamma { shape: f64, scale: f64 },
    Uniform { lo: f64, hi: f64 },
    Weibull { shape: f64, scale: f64 },
}

impl LifetimeDistribution {
    pub fn check(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::Config(format!("lifetime: {name} must be positive, got {v}")))
            }
        };
        match *self {
            LifetimeDistribution::Exponential { rate } => positive("rate", rate),
            LifetimeDistribution::Gamma { shape, scale } | LifetimeDistribution::Weibull { shape, scale } => {
                positive("shape", shape)?;
                positive("scale", scale)
            }
            LifetimeDistribution::Uniform { lo, hi } => {
                if !(lo.is_finite() && hi.is_finite() && lo >= 0.0 && hi > lo) {
                    return Err(Error::Config(format!(
                        "lifetime: uniform needs 0 <= lo < hi, got [{lo}, {hi}]"
                    )));
                }
                Ok(())
            }
        }
    }

    /// G(x)
    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        match *self {
            LifetimeDistribution::Exponential { rate } => -(-rate * x).exp_m1(),
            LifetimeDistribution::Gamma { shape, scale } => gamma_lr(shape, x / scale),
            LifetimeDistribution::Uniform { lo, hi } => ((x - lo) / (hi - lo)).clamp(0.0, 1.0),
            LifetimeDistribution::Weibull { shape, scale } => -(-(x / scale).powf(shape)).exp_m1(),
        }
    }

    /// 1 - G(x), computed without cancellation in the tail.
    pub fn survival(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 1.0;
        }
        match *self {
            LifetimeDistribution::Exponential { rate } => (-rate * x).exp(),
            LifetimeDistribution::Gamma { shape, scale } => gamma_ur(shape, x / scale),
            LifetimeDistribution::Uniform { lo, hi } => ((hi - x) / (hi - lo)).clamp(0.0, 1.0),
            LifetimeDistribution::Weibull { shape, scale } => (-(x / scale).powf(shape)).exp(),
        }
    }

    /// Density of G; the right limit is returned at 0.
    pub fn pdf(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        match *self {
            LifetimeDistribution::Exponential { rate } => rate * (-rate * x).exp(),
            LifetimeDistribution::Gamma { shape, scale } => {
                if x == 0.0 {
                    return if shape < 1.0 {
                        f64::INFINITY
                    } else if shape == 1.0 {
                        1.0 / scale
                    } else {
                        0.0
                    };
                }
                ((shape - 1.0) * x.ln() - x / scale - ln_gamma(shape) - shape * scale.ln()).exp()
            }
            LifetimeDistribution::Uniform { lo, hi } => {
                if x >= lo && x < hi {
                    1.0 / (hi - lo)
                } else {
                    0.0
                }
            }
            LifetimeDistribution::Weibull { shape, scale } => {
                if x == 0.0 {
                    return if shape < 1.0 {
                        f64::INFINITY
                    } else if shape == 1.0 {
                        1.0 / scale
                    } else {
                        0.0
                    };
                }
                let z = x / scale;
                shape / scale * z.powf(shape - 1.0) * (-z.powf(shape)).exp()
            }
        }
    }

    /// Inverse of G on (0, 1).
    pub fn quantile(&self, p: f64) -> f64 {
        let p = p.clamp(0.0, 1.0);
        match *self {
            LifetimeDistribution::Exponential { rate } => -(-p).ln_1p() / rate,
            LifetimeDistribution::Uniform { lo, hi } => lo + p * (hi - lo),
            LifetimeDistribution::Weibull { shape, scale } => scale * (-(-p).ln_1p()).powf(1.0 / shape),
            LifetimeDistribution::Gamma { shape, scale } => {
                if p <= 0.0 {
                    return 0.0;
                }
                // bracket then bisect; the survival form keeps precision near 1
                let tail = 1.0 - p;
                let mut hi = shape * scale.max(1.0);
                while self.cdf(hi) < p {
                    hi *= 2.0;
                }
                let mut lo = 0.0;
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    let below = if p > 0.5 { self.survival(mid) > tail } else { self.cdf(mid) < p };
                    if below {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                    if hi - lo <= 1e-15 * hi {
                        break;
                    }
                }
                0.5 * (lo + hi)
            }
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            LifetimeDistribution::Exponential { rate } => 1.0 / rate,
            LifetimeDistribution::Gamma { shape, scale } => shape * scale,
            LifetimeDistribution::Uniform { lo, hi } => 0.5 * (lo + hi),
            LifetimeDistribution::Weibull { shape, scale } => scale * ln_gamma(1.0 + 1.0 / shape).exp(),
        }
    }

    /// Points where the density jumps.
    pub fn breakpoints(&self) -> Vec<f64> {
        match *self {
            LifetimeDistribution::Uniform { lo, hi } => vec![lo, hi],
            _ => Vec::new(),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            LifetimeDistribution::Gamma { shape, scale } => {
                // rejection of the (measure-zero) draw at 0 keeps the support open
                let g = Gamma::new(shape, scale).expect("validated gamma parameters");
                loop {
                    let x = g.sample(rng);
                    if x > 0.0 {
                        return x;
                    }
                }
            }
            _ => loop {
                let u: f64 = rng.random();
                let x = self.quantile(u);
                if x > 0.0 {
                    return x;
                }
            },
        }
    }
}
