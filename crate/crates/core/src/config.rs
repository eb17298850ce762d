//! JSON experiment configuration.
//!
//! ```json
//! {
//!   "instance": {
//!     "M": 10, "K": 1, "L": 1, "c": 0.001,
//!     "generator": {"kind": "exponential", "lambda_f": 0.0188, "lambda_g_base": 9.0}
//!   },
//!   "policy": "dgfi", "trials": 2000, "seed": 7
//! }
//! ```
//!
//! Cells are either listed explicitly (`"cells": [{"f": ..., "g": ...}]`) or
//! produced by a generator. Cell numbers in configs are 1-based. Unknown
//! fields are rejected everywhere.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::harness::PolicyKind;
use crate::instance::{HypothesisPrior, ProblemInstance};
use crate::models::{DistributionSpec, ProcessModel};
use crate::subsets;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub instance: InstanceConfig,
    #[serde(default = "default_policy")]
    pub policy: PolicyKind,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_horizon: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub trace: bool,
}

fn default_policy() -> PolicyKind {
    PolicyKind::Dgfi
}

fn default_trials() -> usize {
    1000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceConfig {
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "K", default = "one")]
    pub k: usize,
    #[serde(rename = "L", default = "one")]
    pub l: usize,
    pub c: f64,
    /// Per-cell prior weights; a target set's weight is the product over its cells.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub priors: Option<Vec<f64>>,
    /// Explicit weights for every `L`-subset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subset_priors: Option<Vec<SubsetPrior>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cells: Option<Vec<CellConfig>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<Generator>,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubsetPrior {
    /// 1-based cells.
    pub cells: Vec<usize>,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellConfig {
    pub f: DistributionSpec,
    pub g: DistributionSpec,
}

/// Rule producing the cells of an instance of any size. Cell `m` is 1-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Generator {
    /// `f_m = Exp(lambda_f)`, `g_m = Exp(lambda_g_base + lambda_g_step · m)`.
    Exponential {
        lambda_f: f64,
        lambda_g_base: f64,
        #[serde(default = "unit_step")]
        lambda_g_step: f64,
    },
    /// `f_m = N(0, variance)`, `g_m = N(shift_base + shift_step · m, variance)`.
    Gaussian {
        #[serde(default = "unit_variance")]
        variance: f64,
        shift_base: f64,
        #[serde(default)]
        shift_step: f64,
    },
}

fn unit_step() -> f64 {
    1.0
}

fn unit_variance() -> f64 {
    1.0
}

impl Generator {
    pub fn cell(&self, m: usize) -> CellConfig {
        let m = m as f64;
        match *self {
            Generator::Exponential {
                lambda_f,
                lambda_g_base,
                lambda_g_step,
            } => CellConfig {
                f: DistributionSpec::Exponential { rate: lambda_f },
                g: DistributionSpec::Exponential {
                    rate: lambda_g_base + lambda_g_step * m,
                },
            },
            Generator::Gaussian {
                variance,
                shift_base,
                shift_step,
            } => CellConfig {
                f: DistributionSpec::Gaussian {
                    mean: 0.0,
                    variance,
                },
                g: DistributionSpec::Gaussian {
                    mean: shift_base + shift_step * m,
                    variance,
                },
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepAxis {
    #[serde(rename = "c")]
    C,
    #[serde(rename = "M")]
    M,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    /// Cell rule for an `M` sweep; falls back to `instance.generator`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<Generator>,
}

/// Prefix the field path of a configuration error.
fn at(prefix: &str, err: Error) -> Error {
    match err {
        Error::Config { field, message } => Error::Config {
            field: format!("{prefix}.{field}"),
            message,
        },
        Error::InvalidDistribution(message)
        | Error::AbsoluteContinuity(message)
        | Error::Degenerate(message) => Error::Config {
            field: prefix.to_string(),
            message,
        },
        other => other,
    }
}

impl ExperimentConfig {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let config: ExperimentConfig =
            serde_path_to_error::deserialize(de).map_err(|e| Error::Parse {
                path: e.path().to_string(),
                message: e.inner().to_string(),
            })?;
        Ok(config)
    }

    /// Parse and validate.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let config = Self::from_json_str(&text)?;
        config.validate()?;
        Ok(config)
    }

    /// Builds every instance the config describes.
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::config("trials", "need at least one trial"));
        }
        if self.max_horizon == Some(0) {
            return Err(Error::config("max_horizon", "must be at least 1"));
        }
        self.instance()?;
        if self.sweep.is_some() {
            self.sweep_instances()?;
        }
        Ok(())
    }

    /// The base instance.
    pub fn instance(&self) -> Result<ProblemInstance> {
        let inst = &self.instance;
        let cells = match (&inst.cells, &inst.generator) {
            (Some(_), Some(_)) => {
                return Err(Error::config(
                    "instance",
                    "give either `cells` or `generator`, not both",
                ))
            }
            (Some(cells), None) => {
                if cells.len() != inst.m {
                    return Err(Error::config(
                        "instance.cells",
                        format!("M = {} but {} cells listed", inst.m, cells.len()),
                    ));
                }
                cells.clone()
            }
            (None, Some(g)) => (1..=inst.m).map(|m| g.cell(m)).collect(),
            (None, None) => {
                return Err(Error::config("instance", "missing `cells` or `generator`"))
            }
        };
        self.build(&cells, inst.c)
    }

    fn build(&self, cells: &[CellConfig], cost: f64) -> Result<ProblemInstance> {
        let inst = &self.instance;
        let m = cells.len();
        if m < 2 {
            return Err(Error::config(
                "instance.M",
                format!("need at least 2 cells, got {m}"),
            ));
        }
        if inst.l == 0 || inst.l >= m {
            return Err(Error::config(
                "instance.L",
                format!("need 1 <= L < M = {m}, got {}", inst.l),
            ));
        }
        let models = cells
            .iter()
            .enumerate()
            .map(|(i, c)| {
                ProcessModel::new(c.f.clone(), c.g.clone())
                    .map_err(|e| at(&format!("instance.cells[{}]", i + 1), e))
            })
            .collect::<Result<Vec<_>>>()?;
        let prior = self.prior(m)?;
        ProblemInstance::new(models, inst.k, inst.l, cost, prior).map_err(|e| at("instance", e))
    }

    fn prior(&self, m: usize) -> Result<HypothesisPrior> {
        let inst = &self.instance;
        match (&inst.priors, &inst.subset_priors) {
            (Some(_), Some(_)) => Err(Error::config(
                "instance",
                "give either `priors` or `subset_priors`, not both",
            )),
            (Some(p), None) => {
                if p.len() != m {
                    return Err(Error::config(
                        "instance.priors",
                        format!("expected {m} per-cell weights, got {}", p.len()),
                    ));
                }
                HypothesisPrior::from_cell_weights(inst.l, p).map_err(|e| at("instance", e))
            }
            (None, Some(entries)) => {
                let n = subsets::binomial(m, inst.l);
                let mut weights = vec![None; n];
                for (i, e) in entries.iter().enumerate() {
                    let field = format!("instance.subset_priors[{i}].cells");
                    let mut set: Vec<usize> = e.cells.clone();
                    set.sort_unstable();
                    set.dedup();
                    if set.len() != inst.l || set.iter().any(|&c| c == 0 || c > m) {
                        return Err(Error::config(
                            field,
                            format!(
                                "{:?} is not a set of L = {} cells in 1..={m}",
                                e.cells, inst.l
                            ),
                        ));
                    }
                    let zero_based: Vec<usize> = set.iter().map(|c| c - 1).collect();
                    let slot = &mut weights[subsets::lex_rank(&zero_based, m)];
                    if slot.replace(e.weight).is_some() {
                        return Err(Error::config(field, format!("{:?} listed twice", e.cells)));
                    }
                }
                let weights = weights
                    .into_iter()
                    .zip(subsets::k_subsets(m, inst.l))
                    .map(|(w, set)| {
                        w.ok_or_else(|| {
                            let cells: Vec<usize> = set.iter().map(|c| c + 1).collect();
                            Error::config(
                                "instance.subset_priors",
                                format!("no weight for target set {cells:?}"),
                            )
                        })
                    })
                    .collect::<Result<Vec<f64>>>()?;
                HypothesisPrior::from_weights(m, inst.l, weights).map_err(|e| at("instance", e))
            }
            (None, None) => HypothesisPrior::uniform(m, inst.l).map_err(|e| at("instance", e)),
        }
    }

    /// One instance per sweep value.
    pub fn sweep_instances(&self) -> Result<Vec<ProblemInstance>> {
        let sweep = self
            .sweep
            .as_ref()
            .ok_or_else(|| Error::config("sweep", "no sweep configured"))?;
        if sweep.values.is_empty() {
            return Err(Error::config("sweep.values", "need at least one value"));
        }
        match sweep.axis {
            SweepAxis::C => {
                let base = self.instance()?;
                sweep
                    .values
                    .iter()
                    .enumerate()
                    .map(|(i, &c)| {
                        base.with_cost(c)
                            .map_err(|e| at(&format!("sweep.values[{i}]"), e))
                    })
                    .collect()
            }
            SweepAxis::M => {
                let generator = sweep
                    .generator
                    .as_ref()
                    .or(self.instance.generator.as_ref())
                    .ok_or_else(|| {
                        Error::config("sweep.generator", "an M sweep needs a cell generator")
                    })?;
                if self.instance.priors.is_some() || self.instance.subset_priors.is_some() {
                    return Err(Error::config(
                        "instance.priors",
                        "an M sweep uses uniform priors; remove the explicit weights",
                    ));
                }
                sweep
                    .values
                    .iter()
                    .enumerate()
                    .map(|(i, &v)| {
                        let field = format!("sweep.values[{i}]");
                        if !(v.fract() == 0.0 && (2.0..=1e6).contains(&v)) {
                            return Err(Error::config(
                                field,
                                format!("M must be an integer >= 2, got {v}"),
                            ));
                        }
                        let cells: Vec<CellConfig> =
                            (1..=v as usize).map(|m| generator.cell(m)).collect();
                        self.build(&cells, self.instance.c).map_err(|e| match e {
                            Error::Config { message, .. } => Error::config(field, message),
                            other => other,
                        })
                    })
                    .collect()
            }
        }
    }

    /// First 16 hex digits of the SHA-256 of the canonical JSON form.
    pub fn config_hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        hex::encode(&Sha256::digest(canonical.as_bytes())[..8])
    }
}
