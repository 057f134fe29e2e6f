use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use super::functions::Param;
use crate::error::{Error, Result};

/// Mass below which unbounded pmf sums are truncated.
pub const PMF_TAIL: f64 = 1e-12;

/// Law of the number of children produced at one birth event, possibly
/// depending on the parent's remaining lifetime x.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum OffspringLaw {
    Deterministic { n: Param },
    Poisson { mean: Param },
    /// Support {0, 1, 2}; p1 = 1 - p0 - p2.
    Binary { p0: Param, p2: Param },
    /// Geometric on {0, 1, ...} with the given mean.
    Geometric { mean: Param },
}

impl OffspringLaw {
    pub fn check(&self) -> Result<()> {
        match self {
            OffspringLaw::Deterministic { n } => match n {
                Param::Constant(v) if *v >= 0.0 && v.fract() == 0.0 && *v <= u32::MAX as f64 => Ok(()),
                _ => Err(Error::Config(
                    "offspring: deterministic n must be a constant nonnegative integer".into(),
                )),
            },
            OffspringLaw::Poisson { mean } | OffspringLaw::Geometric { mean } => mean.check("offspring.mean"),
            OffspringLaw::Binary { p0, p2 } => {
                p0.check("offspring.p0")?;
                p2.check("offspring.p2")?;
                // p1 is linear between knots, so checking knots of both suffices
                let mut pts: Vec<f64> = p0.knots().iter().chain(p2.knots()).copied().collect();
                pts.push(0.0);
                for x in pts {
                    let (a, b) = (p0.at(x), p2.at(x));
                    if a > 1.0 || b > 1.0 || a + b > 1.0 + 1e-15 {
                        return Err(Error::Config(format!(
                            "offspring: binary p0 + p2 = {} exceeds 1 at x = {x}",
                            a + b
                        )));
                    }
                }
                Ok(())
            }
        }
    }

    /// True when the law does not depend on the remaining lifetime.
    pub fn is_homogeneous(&self) -> bool {
        match self {
            OffspringLaw::Deterministic { n } => n.is_constant(),
            OffspringLaw::Poisson { mean } | OffspringLaw::Geometric { mean } => mean.is_constant(),
            OffspringLaw::Binary { p0, p2 } => p0.is_constant() && p2.is_constant(),
        }
    }

    pub fn knots(&self) -> Vec<f64> {
        match self {
            OffspringLaw::Deterministic { n } => n.knots().to_vec(),
            OffspringLaw::Poisson { mean } | OffspringLaw::Geometric { mean } => mean.knots().to_vec(),
            OffspringLaw::Binary { p0, p2 } => p0.knots().iter().chain(p2.knots()).copied().collect(),
        }
    }

    /// g(x, z)
    #[inline]
    pub fn gf(&self, x: f64, z: f64) -> f64 {
        match self {
            OffspringLaw::Deterministic { n } => z.powi(n.at(x) as i32),
            OffspringLaw::Poisson { mean } => (mean.at(x) * (z - 1.0)).exp(),
            OffspringLaw::Binary { p0, p2 } => {
                let (a, b) = (p0.at(x), p2.at(x));
                a + (1.0 - a - b) * z + b * z * z
            }
            OffspringLaw::Geometric { mean } => 1.0 / (1.0 + mean.at(x) * (1.0 - z)),
        }
    }

    /// g'(x, 1-), the mean number of children per event.
    #[inline]
    pub fn gp1(&self, x: f64) -> f64 {
        match self {
            OffspringLaw::Deterministic { n } => n.at(x),
            OffspringLaw::Poisson { mean } | OffspringLaw::Geometric { mean } => mean.at(x),
            OffspringLaw::Binary { p0, p2 } => 1.0 - p0.at(x) + p2.at(x),
        }
    }

    /// g''(x, 1-), the second factorial moment per event.
    #[inline]
    pub fn gpp1(&self, x: f64) -> f64 {
        match self {
            OffspringLaw::Deterministic { n } => {
                let n = n.at(x);
                n * (n - 1.0)
            }
            OffspringLaw::Poisson { mean } => mean.at(x).powi(2),
            OffspringLaw::Binary { p2, .. } => 2.0 * p2.at(x),
            OffspringLaw::Geometric { mean } => 2.0 * mean.at(x).powi(2),
        }
    }

    /// p(x, n)
    pub fn pmf(&self, x: f64, n: u64) -> f64 {
        match self {
            OffspringLaw::Deterministic { n: k } => {
                if n as f64 == k.at(x) {
                    1.0
                } else {
                    0.0
                }
            }
            OffspringLaw::Poisson { mean } => {
                let mu = mean.at(x);
                if mu == 0.0 {
                    return if n == 0 { 1.0 } else { 0.0 };
                }
                let n = n as f64;
                (n * mu.ln() - mu - ln_gamma(n + 1.0)).exp()
            }
            OffspringLaw::Binary { p0, p2 } => {
                let (a, b) = (p0.at(x), p2.at(x));
                match n {
                    0 => a,
                    1 => 1.0 - a - b,
                    2 => b,
                    _ => 0.0,
                }
            }
            OffspringLaw::Geometric { mean } => {
                let mu = mean.at(x);
                let q = mu / (1.0 + mu);
                (1.0 - q) * q.powi(n as i32)
            }
        }
    }

    /// Σ_n w(n) p(x, n), truncated once the accumulated mass reaches
    /// 1 - PMF_TAIL. Returns the sum and the accumulated mass.
    pub fn pmf_sum<W: Fn(u64) -> f64>(&self, x: f64, weight: W) -> (f64, f64) {
        let mut mass = 0.0;
        let mut total = 0.0;
        let mut n = 0u64;
        // the loop also stops past the mode once terms underflow
        while mass < 1.0 - PMF_TAIL && n < 100_000 {
            let p = self.pmf(x, n);
            mass += p;
            total += weight(n) * p;
            n += 1;
            if p == 0.0 && n as f64 > 10.0 + 10.0 * self.gp1(x) {
                break;
            }
        }
        (total, mass)
    }

    /// Σ_n n |log n| p(x, n)
    pub fn nlogn_moment(&self, x: f64) -> f64 {
        match self {
            OffspringLaw::Deterministic { n } => {
                let n = n.at(x);
                if n > 0.0 {
                    n * n.ln()
                } else {
                    0.0
                }
            }
            _ => self.pmf_sum(x, |n| if n > 1 { n as f64 * (n as f64).ln() } else { 0.0 }).0,
        }
    }

    /// Draw a child count for an event at remaining lifetime x.
    pub fn sample<R: Rng + ?Sized>(&self, x: f64, rng: &mut R) -> u64 {
        match self {
            OffspringLaw::Deterministic { n } => n.at(x) as u64,
            OffspringLaw::Poisson { mean } => {
                let mu = mean.at(x);
                if mu <= 0.0 {
                    return 0;
                }
                Poisson::new(mu).expect("positive Poisson mean").sample(rng) as u64
            }
            OffspringLaw::Binary { p0, p2 } => {
                let u: f64 = rng.random();
                let (a, b) = (p0.at(x), p2.at(x));
                if u < a {
                    0
                } else if u < 1.0 - b {
                    1
                } else {
                    2
                }
            }
            OffspringLaw::Geometric { mean } => {
                let mu = mean.at(x);
                if mu <= 0.0 {
                    return 0;
                }
                // failures before the first success, success probability 1/(1+mu)
                let u: f64 = 1.0 - rng.random::<f64>();
                (u.ln() / (mu / (1.0 + mu)).ln()).floor() as u64
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::functions::RateFunction;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn families() -> Vec<OffspringLaw> {
        vec![
            OffspringLaw::Deterministic { n: Param::Constant(1.0) },
            OffspringLaw::Deterministic { n: Param::Constant(3.0) },
            OffspringLaw::Poisson { mean: Param::Constant(1.3) },
            OffspringLaw::Binary { p0: Param::Constant(0.2), p2: Param::Constant(0.5) },
            OffspringLaw::Geometric { mean: Param::Constant(0.8) },
            OffspringLaw::Poisson {
                mean: Param::Function(RateFunction::Table { xs: vec![1.0, 3.0], ys: vec![0.5, 2.5] }),
            },
        ]
    }

    #[test]
    fn pmf_sums_to_one_and_gf_at_one_is_one() {
        for law in families() {
            for x in [0.1, 1.0, 2.0, 5.0] {
                let (_, mass) = law.pmf_sum(x, |_| 1.0);
                assert!((mass - 1.0).abs() < 1e-11, "{law:?} x={x} mass={mass}");
                assert_eq!(law.gf(x, 1.0), 1.0, "{law:?}");
            }
        }
    }

    #[test]
    fn derivatives_match_pmf_moments() {
        for law in families() {
            for x in [0.5, 2.0] {
                let (m1, _) = law.pmf_sum(x, |n| n as f64);
                let (m2, _) = law.pmf_sum(x, |n| (n * n.saturating_sub(1)) as f64);
                assert!((m1 - law.gp1(x)).abs() < 1e-9, "{law:?}");
                assert!((m2 - law.gpp1(x)).abs() < 1e-8, "{law:?}");
            }
        }
    }

    #[test]
    fn gf_is_convex_and_nondecreasing() {
        for law in families() {
            let zs: Vec<f64> = (0..=50).map(|i| i as f64 / 50.0).collect();
            let vals: Vec<f64> = zs.iter().map(|&z| law.gf(1.0, z)).collect();
            for w in vals.windows(3) {
                assert!(w[1] >= w[0] - 1e-15);
                assert!(w[2] - 2.0 * w[1] + w[0] >= -1e-12);
            }
        }
    }

    #[test]
    fn sampler_means_match_gp1() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 100_000;
        for law in families() {
            let x = 2.0;
            let draws: Vec<f64> = (0..n).map(|_| law.sample(x, &mut rng) as f64).collect();
            let mean = draws.iter().sum::<f64>() / n as f64;
            let var = draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            let se = (var / n as f64).sqrt();
            let target = law.gp1(x);
            if se == 0.0 {
                assert_eq!(mean, target);
            } else {
                assert!(((mean - target) / se).abs() < 4.0, "{law:?} mean={mean} target={target}");
            }
        }
    }

    #[test]
    fn binary_overflow_rejected() {
        let law = OffspringLaw::Binary { p0: Param::Constant(0.7), p2: Param::Constant(0.5) };
        assert!(law.check().is_err());
        let law = OffspringLaw::Deterministic { n: Param::Constant(1.5) };
        assert!(law.check().is_err());
    }
}
