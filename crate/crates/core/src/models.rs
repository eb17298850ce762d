//! Per-cell observation models.
//!
//! Each cell `m` emits i.i.d. observations from `f_m` when it holds no
//! target and from `g_m` when it does. Everything downstream (sum LLRs,
//! rate functions, the Chernoff game) only ever needs log-densities, draws,
//! and the two divergences `D(g_m||f_m)` and `D(f_m||g_m)` in nats.

use rand::Rng;
use rand_distr::{Distribution, Exp, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature;

const PROB_TOL: f64 = 1e-12;
const QUAD_TOL: f64 = 1e-8;

/// An observation distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase", deny_unknown_fields)]
pub enum DistributionSpec {
    Exponential {
        rate: f64,
    },
    Gaussian {
        mean: f64,
        variance: f64,
    },
    Bernoulli {
        p: f64,
    },
    #[serde(rename = "discrete")]
    FiniteDiscrete {
        probs: Vec<f64>,
    },
}

impl DistributionSpec {
    pub fn family(&self) -> &'static str {
        match self {
            DistributionSpec::Exponential { .. } => "exponential",
            DistributionSpec::Gaussian { .. } => "gaussian",
            DistributionSpec::Bernoulli { .. } => "bernoulli",
            DistributionSpec::FiniteDiscrete { .. } => "discrete",
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidDistribution(msg));
        match self {
            DistributionSpec::Exponential { rate } => {
                if !(rate.is_finite() && *rate > 0.0) {
                    return bad(format!("exponential rate must be positive, got {rate}"));
                }
            }
            DistributionSpec::Gaussian { mean, variance } => {
                if !mean.is_finite() {
                    return bad(format!("gaussian mean must be finite, got {mean}"));
                }
                if !(variance.is_finite() && *variance > 0.0) {
                    return bad(format!(
                        "gaussian variance must be positive, got {variance}"
                    ));
                }
            }
            DistributionSpec::Bernoulli { p } => {
                if !(*p > 0.0 && *p < 1.0) {
                    return bad(format!("bernoulli p must lie in (0, 1), got {p}"));
                }
            }
            DistributionSpec::FiniteDiscrete { probs } => {
                if probs.is_empty() {
                    return bad("discrete distribution needs at least one outcome".into());
                }
                if let Some(p) = probs.iter().find(|p| !(p.is_finite() && **p >= 0.0)) {
                    return bad(format!(
                        "discrete probabilities must be nonnegative, got {p}"
                    ));
                }
                let total: f64 = probs.iter().sum();
                if (total - 1.0).abs() > PROB_TOL {
                    return bad(format!("discrete probabilities sum to {total}, not 1"));
                }
            }
        }
        Ok(())
    }

    fn is_discrete(&self) -> bool {
        matches!(
            self,
            DistributionSpec::Bernoulli { .. } | DistributionSpec::FiniteDiscrete { .. }
        )
    }

    /// Probability vector for the discrete families (Bernoulli as `[1-p, p]`).
    fn masses(&self) -> Option<Vec<f64>> {
        match self {
            DistributionSpec::Bernoulli { p } => Some(vec![1.0 - p, *p]),
            DistributionSpec::FiniteDiscrete { probs } => Some(probs.clone()),
            _ => None,
        }
    }

    /// Natural-log density (continuous) or mass (discrete) at `y`.
    pub fn log_density(&self, y: f64) -> Result<f64> {
        match self {
            DistributionSpec::Exponential { rate } => {
                if y < 0.0 {
                    Ok(f64::NEG_INFINITY)
                } else {
                    Ok(rate.ln() - rate * y)
                }
            }
            DistributionSpec::Gaussian { mean, variance } => {
                let z = y - mean;
                Ok(-0.5 * (2.0 * std::f64::consts::PI * variance).ln() - z * z / (2.0 * variance))
            }
            DistributionSpec::Bernoulli { p } => {
                if y == 1.0 {
                    Ok(p.ln())
                } else if y == 0.0 {
                    Ok((1.0 - p).ln())
                } else {
                    Err(Error::Domain {
                        family: self.family(),
                        value: y,
                    })
                }
            }
            DistributionSpec::FiniteDiscrete { probs } => {
                if y.fract() != 0.0 || y < 0.0 || y >= probs.len() as f64 {
                    return Err(Error::Domain {
                        family: self.family(),
                        value: y,
                    });
                }
                Ok(probs[y as usize].ln())
            }
        }
    }

    /// Draw one observation. Discrete outcomes are returned as their index.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            DistributionSpec::Exponential { rate } => {
                Exp::new(*rate).expect("validated rate").sample(rng)
            }
            DistributionSpec::Gaussian { mean, variance } => Normal::new(*mean, variance.sqrt())
                .expect("validated variance")
                .sample(rng),
            DistributionSpec::Bernoulli { p } => {
                if rng.random::<f64>() < *p {
                    1.0
                } else {
                    0.0
                }
            }
            DistributionSpec::FiniteDiscrete { probs } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for (i, p) in probs.iter().enumerate() {
                    acc += p;
                    if u < acc {
                        return i as f64;
                    }
                }
                // Rounding left `u` above the running total; take the last
                // outcome with positive mass.
                probs.iter().rposition(|p| *p > 0.0).unwrap_or(0) as f64
            }
        }
    }
}

/// `D(p||q)` in nats.
///
/// Closed forms are used for same-family continuous pairs and Bernoulli
/// pairs; discrete pairs are summed exactly; other continuous pairs fall
/// back to adaptive quadrature over the support of `p`.
pub fn kl_divergence(p: &DistributionSpec, q: &DistributionSpec) -> Result<f64> {
    use DistributionSpec::*;
    p.validate()?;
    q.validate()?;
    let d = match (p, q) {
        (Exponential { rate: a }, Exponential { rate: b }) => (a / b).ln() + b / a - 1.0,
        (
            Gaussian {
                mean: m1,
                variance: v1,
            },
            Gaussian {
                mean: m2,
                variance: v2,
            },
        ) => 0.5 * ((v2 / v1).ln() + (v1 + (m1 - m2).powi(2)) / v2 - 1.0),
        (Bernoulli { p: a }, Bernoulli { p: b }) => {
            a * (a / b).ln() + (1.0 - a) * ((1.0 - a) / (1.0 - b)).ln()
        }
        _ => return kl_numerical(p, q),
    };
    // Closed forms can round to a hair below zero for near-identical specs.
    Ok(d.max(0.0))
}

/// `D(p||q)` computed without closed forms: exact summation for discrete
/// pairs, adaptive quadrature for continuous ones.
pub fn kl_numerical(p: &DistributionSpec, q: &DistributionSpec) -> Result<f64> {
    p.validate()?;
    q.validate()?;
    match (p.is_discrete(), q.is_discrete()) {
        (true, true) => {
            let (pm, qm) = (p.masses().unwrap(), q.masses().unwrap());
            let mut total = 0.0;
            for (i, &pi) in pm.iter().enumerate() {
                if pi == 0.0 {
                    continue;
                }
                let qi = qm.get(i).copied().unwrap_or(0.0);
                if qi == 0.0 {
                    return Err(Error::AbsoluteContinuity(format!(
                        "outcome {i} has mass {pi} under p but none under q"
                    )));
                }
                total += pi * (pi / qi).ln();
            }
            Ok(total.max(0.0))
        }
        (false, false) => continuous_kl(p, q),
        _ => Err(Error::AbsoluteContinuity(format!(
            "{} and {} share no common dominating measure",
            p.family(),
            q.family()
        ))),
    }
}

fn continuous_kl(p: &DistributionSpec, q: &DistributionSpec) -> Result<f64> {
    let integrand = |x: f64| -> f64 {
        let lp = p.log_density(x).unwrap_or(f64::NEG_INFINITY);
        let density = lp.exp();
        if density == 0.0 {
            return 0.0;
        }
        let lq = q.log_density(x).unwrap_or(f64::NEG_INFINITY);
        density * (lp - lq)
    };
    let value = match p {
        DistributionSpec::Exponential { rate } => {
            // Both continuous families cover [0, inf), so no support check.
            let scale = 1.0 / rate;
            quadrature::integrate(
                |t| {
                    let x = scale * t / (1.0 - t);
                    integrand(x) * scale / (1.0 - t).powi(2)
                },
                0.0,
                1.0,
                QUAD_TOL,
            )
        }
        DistributionSpec::Gaussian { mean, variance } => {
            if let DistributionSpec::Exponential { .. } = q {
                return Err(Error::AbsoluteContinuity(
                    "gaussian has mass on (-inf, 0) where the exponential density is zero".into(),
                ));
            }
            let scale = variance.sqrt();
            quadrature::integrate(
                |t| {
                    let s = 1.0 - t * t;
                    let x = mean + scale * t / s;
                    integrand(x) * scale * (1.0 + t * t) / (s * s)
                },
                -1.0,
                1.0,
                QUAD_TOL,
            )
        }
        _ => unreachable!("continuous pair"),
    };
    if !value.is_finite() {
        return Err(Error::AbsoluteContinuity(format!(
            "D({}||{}) is not finite",
            p.family(),
            q.family()
        )));
    }
    Ok(value.max(0.0))
}

/// One cell's `(f_m, g_m)` pair with both divergences cached.
#[derive(Debug, Clone, PartialEq)]
pub struct ProcessModel {
    absent: DistributionSpec,
    present: DistributionSpec,
    d_gf: f64,
    d_fg: f64,
}

impl ProcessModel {
    /// Fails if either divergence is infinite (no mutual absolute continuity).
    pub fn new(absent: DistributionSpec, present: DistributionSpec) -> Result<Self> {
        let d_gf = kl_divergence(&present, &absent)?;
        let d_fg = kl_divergence(&absent, &present)?;
        Ok(ProcessModel {
            absent,
            present,
            d_gf,
            d_fg,
        })
    }

    pub fn absent(&self) -> &DistributionSpec {
        &self.absent
    }

    pub fn present(&self) -> &DistributionSpec {
        &self.present
    }

    /// `D(g||f)`: mean LLR increment while probing a target cell.
    pub fn d_gf(&self) -> f64 {
        self.d_gf
    }

    /// `D(f||g)`: mean LLR decrement while probing an empty cell.
    pub fn d_fg(&self) -> f64 {
        self.d_fg
    }

    /// `log g(y) - log f(y)`.
    pub fn llr(&self, y: f64) -> Result<f64> {
        Ok(self.present.log_density(y)? - self.absent.log_density(y)?)
    }

    pub fn sample<R: Rng + ?Sized>(&self, target: bool, rng: &mut R) -> f64 {
        if target {
            self.present.sample(rng)
        } else {
            self.absent.sample(rng)
        }
    }
}
