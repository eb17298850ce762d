//! Monte Carlo evaluation of the policies.
//!
//! Every trial owns a ChaCha8 stream seeded from `(base_seed, trial index)`
//! through a SplitMix64 finalizer, and the true hypotheses are drawn up
//! front from a separate stream. Results are collected in trial order and
//! folded sequentially, so reports are bit-identical for any worker count.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chernoff::ChernoffPolicy;
use crate::dgfi::DgfiPolicy;
use crate::error::{Error, Result};
use crate::instance::ProblemInstance;
use crate::state::SearchState;

/// Multiplier of the per-trial seed counter (the 64-bit golden ratio).
const GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// Smallest default horizon, whatever the asymptotic rate predicts.
pub const MIN_DEFAULT_HORIZON: u64 = 10_000;

/// SplitMix64 output function.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of trial `index` (0-based) in a run with `base_seed`.
pub fn trial_seed(base_seed: u64, index: u64) -> u64 {
    splitmix64(base_seed.wrapping_add(index.wrapping_add(1).wrapping_mul(GAMMA)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyKind {
    Dgfi,
    Chernoff,
}

impl PolicyKind {
    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::Dgfi => "dgfi",
            PolicyKind::Chernoff => "chernoff",
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dgfi" => Ok(PolicyKind::Dgfi),
            "chernoff" => Ok(PolicyKind::Chernoff),
            other => Err(Error::config(
                "policy",
                format!("unknown policy `{other}`, expected dgfi or chernoff"),
            )),
        }
    }
}

#[derive(Debug, Clone)]
enum Policy {
    Dgfi(DgfiPolicy),
    Chernoff(ChernoffPolicy),
}

/// Outcome of one sequential search. Cell indices are 0-based.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TrialResult {
    pub true_set: Vec<usize>,
    pub declared: Vec<usize>,
    pub tau: u64,
    pub correct: bool,
    pub truncated: bool,
    pub seed: u64,
}

impl TrialResult {
    /// Counted as an error in `pe_hat`: wrong, or stopped by the horizon.
    pub fn is_error(&self) -> bool {
        !self.correct || self.truncated
    }
}

/// The state right after step `n` of trial `trial`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRow {
    pub trial: usize,
    pub n: u64,
    pub probes: Vec<usize>,
    pub sums: Vec<f64>,
}

/// Outcomes conditioned on one true hypothesis.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HypothesisStats {
    /// 1-based cells of the target set.
    pub cells: Vec<usize>,
    pub prior: f64,
    pub trials: usize,
    pub errors: usize,
    pub pe_hat: f64,
    pub mean_tau: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub policy: PolicyKind,
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "L")]
    pub l: usize,
    pub c: f64,
    pub seed: u64,
    pub trials: usize,
    pub max_horizon: u64,
    pub pe_hat: f64,
    pub pe_bound: f64,
    pub mean_tau: f64,
    pub tau_ci95: f64,
    pub bayes_risk: f64,
    /// Asymptotic rate of the policy that was run.
    pub rate_i: f64,
    /// Optimal asymptotic rate of the instance.
    pub rate_istar: f64,
    pub truncation_rate: f64,
    /// `Σ_h π_h · mean_tau_h` over the hypotheses that were drawn, with the
    /// prior renormalized over them.
    pub prior_weighted_tau: f64,
    pub per_hypothesis: Vec<HypothesisStats>,
}

impl ExperimentReport {
    /// `mean_tau · I / (-ln c)`; tends to 1 as `c → 0`.
    pub fn delay_ratio(&self) -> f64 {
        self.mean_tau * self.rate_i / -self.c.ln()
    }

    /// `bayes_risk · I / (-c ln c)`.
    pub fn risk_ratio(&self) -> f64 {
        self.bayes_risk * self.rate_i / (-self.c * self.c.ln())
    }
}

/// One policy bound to one instance and horizon.
#[derive(Debug, Clone)]
pub struct Simulator {
    instance: ProblemInstance,
    kind: PolicyKind,
    policy: Policy,
    max_horizon: u64,
    rate_i: f64,
    rate_istar: f64,
}

impl Simulator {
    pub fn new(
        instance: ProblemInstance,
        kind: PolicyKind,
        max_horizon: Option<u64>,
    ) -> Result<Self> {
        let report = instance.rate_report();
        let (policy, rate_i) = match kind {
            PolicyKind::Dgfi => (
                Policy::Dgfi(DgfiPolicy::from_instance(&instance)),
                report.i_dgfi,
            ),
            PolicyKind::Chernoff => {
                let p = ChernoffPolicy::new(&instance)?;
                let rate = p.aggregate_rate();
                (Policy::Chernoff(p), rate)
            }
        };
        let max_horizon = match max_horizon {
            Some(0) => return Err(Error::config("max_horizon", "must be at least 1")),
            Some(h) => h,
            None => default_horizon(instance.cost(), report.i_dgfi),
        };
        Ok(Simulator {
            instance,
            kind,
            policy,
            max_horizon,
            rate_i,
            rate_istar: report.i_star,
        })
    }

    pub fn instance(&self) -> &ProblemInstance {
        &self.instance
    }

    pub fn kind(&self) -> PolicyKind {
        self.kind
    }

    pub fn max_horizon(&self) -> u64 {
        self.max_horizon
    }

    pub fn rate_i(&self) -> f64 {
        self.rate_i
    }

    pub fn run_trial(&self, true_set: &[usize], seed: u64) -> Result<TrialResult> {
        self.trial(true_set, seed, None)
    }

    /// [`Simulator::run_trial`] that also records the state after every step.
    pub fn run_trial_traced(
        &self,
        true_set: &[usize],
        seed: u64,
        trial: usize,
    ) -> Result<(TrialResult, Vec<TraceRow>)> {
        let mut rows = Vec::new();
        let result = self.trial(true_set, seed, Some((trial, &mut rows)))?;
        Ok((result, rows))
    }

    fn trial(
        &self,
        true_set: &[usize],
        seed: u64,
        mut trace: Option<(usize, &mut Vec<TraceRow>)>,
    ) -> Result<TrialResult> {
        let inst = &self.instance;
        let m = inst.cells();
        if true_set.len() != inst.l() || true_set.iter().any(|&c| c >= m) {
            return Err(Error::config(
                "true_set",
                format!(
                    "{true_set:?} is not an L = {} subset of {m} cells",
                    inst.l()
                ),
            ));
        }
        let mut true_set = true_set.to_vec();
        true_set.sort_unstable();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut state = SearchState::new(m)?;
        let models = inst.models();
        let mut truncated = false;
        loop {
            let stop = match &self.policy {
                Policy::Dgfi(p) => p.should_stop(&state),
                Policy::Chernoff(p) => p.should_stop(&state),
            };
            if stop {
                break;
            }
            if state.n() >= self.max_horizon {
                truncated = true;
                break;
            }
            let probes = match &self.policy {
                Policy::Dgfi(p) => p.select(&state),
                Policy::Chernoff(p) => p.select(&state, &mut rng),
            };
            let ys: Vec<f64> = probes
                .iter()
                .map(|&c| models[c].sample(true_set.binary_search(&c).is_ok(), &mut rng))
                .collect();
            state.apply_observations(&probes, &ys, models)?;
            if let Some((trial, rows)) = trace.as_mut() {
                rows.push(TraceRow {
                    trial: *trial,
                    n: state.n(),
                    probes,
                    sums: state.sums().to_vec(),
                });
            }
        }
        let declared = match &self.policy {
            Policy::Dgfi(p) => p.decide(&state),
            Policy::Chernoff(p) => p.decide(&state),
        };
        Ok(TrialResult {
            correct: declared == true_set,
            true_set,
            declared,
            tau: state.n(),
            truncated,
            seed,
        })
    }

    /// `trials` independent searches with hypotheses drawn from the prior.
    /// `workers = 0` uses every available core.
    pub fn run_experiment(
        &self,
        trials: usize,
        base_seed: u64,
        workers: usize,
    ) -> Result<ExperimentReport> {
        let results = self.run_trials(trials, base_seed, workers, false)?;
        Ok(self.aggregate(results.into_iter().map(|(r, _)| r).collect(), base_seed))
    }

    /// [`Simulator::run_experiment`] plus the per-step trace of every trial, in trial order.
    pub fn run_experiment_traced(
        &self,
        trials: usize,
        base_seed: u64,
        workers: usize,
    ) -> Result<(ExperimentReport, Vec<TraceRow>)> {
        let results = self.run_trials(trials, base_seed, workers, true)?;
        let mut trace = Vec::new();
        let mut outcomes = Vec::with_capacity(results.len());
        for (r, rows) in results {
            outcomes.push(r);
            trace.extend(rows);
        }
        Ok((self.aggregate(outcomes, base_seed), trace))
    }

    fn run_trials(
        &self,
        trials: usize,
        base_seed: u64,
        workers: usize,
        traced: bool,
    ) -> Result<Vec<(TrialResult, Vec<TraceRow>)>> {
        if trials == 0 {
            return Err(Error::config("trials", "need at least one trial"));
        }
        let prior = self.instance.prior();
        let mut hypothesis_rng = ChaCha8Rng::seed_from_u64(splitmix64(base_seed));
        let hypotheses: Vec<usize> = (0..trials)
            .map(|_| prior.sample(&mut hypothesis_rng))
            .collect();
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::config("workers", e.to_string()))?;
        pool.install(|| {
            hypotheses
                .par_iter()
                .enumerate()
                .map(|(i, &h)| {
                    let seed = trial_seed(base_seed, i as u64);
                    let set = prior.hypothesis(h);
                    if traced {
                        self.run_trial_traced(set, seed, i)
                    } else {
                        self.run_trial(set, seed).map(|r| (r, Vec::new()))
                    }
                })
                .collect()
        })
    }

    fn aggregate(&self, results: Vec<TrialResult>, base_seed: u64) -> ExperimentReport {
        let inst = &self.instance;
        let prior = inst.prior();
        let n = results.len() as f64;
        let mut errors = 0usize;
        let mut truncated = 0usize;
        let mut tau_sum = 0.0;
        let mut per_h = vec![(0usize, 0usize, 0.0f64); prior.len()];
        for r in &results {
            let tau = r.tau as f64;
            tau_sum += tau;
            errors += r.is_error() as usize;
            truncated += r.truncated as usize;
            let slot = &mut per_h[prior.index_of(&r.true_set)];
            slot.0 += 1;
            slot.1 += r.is_error() as usize;
            slot.2 += tau;
        }
        let mean_tau = tau_sum / n;
        let var = if results.len() > 1 {
            results
                .iter()
                .map(|r| (r.tau as f64 - mean_tau).powi(2))
                .sum::<f64>()
                / (n - 1.0)
        } else {
            0.0
        };
        let pe_hat = errors as f64 / n;

        let mut per_hypothesis = Vec::new();
        let mut visited_prior = 0.0;
        let mut weighted_tau = 0.0;
        for (h, &(count, errs, taus)) in per_h.iter().enumerate() {
            if count == 0 {
                continue;
            }
            let w = prior.weights()[h];
            let mean = taus / count as f64;
            visited_prior += w;
            weighted_tau += w * mean;
            per_hypothesis.push(HypothesisStats {
                cells: prior.hypothesis(h).iter().map(|c| c + 1).collect(),
                prior: w,
                trials: count,
                errors: errs,
                pe_hat: errs as f64 / count as f64,
                mean_tau: mean,
            });
        }

        ExperimentReport {
            policy: self.kind,
            m: inst.cells(),
            k: inst.k(),
            l: inst.l(),
            c: inst.cost(),
            seed: base_seed,
            trials: results.len(),
            max_horizon: self.max_horizon,
            pe_hat,
            pe_bound: inst.error_bound(),
            mean_tau,
            tau_ci95: 1.96 * var.sqrt() / n.sqrt(),
            bayes_risk: pe_hat + inst.cost() * mean_tau,
            rate_i: self.rate_i,
            rate_istar: self.rate_istar,
            truncation_rate: truncated as f64 / n,
            prior_weighted_tau: weighted_tau / visited_prior,
            per_hypothesis,
        }
    }
}

/// `max(⌈200 (-ln c) / I⌉, 10^4)`.
pub fn default_horizon(cost: f64, rate: f64) -> u64 {
    let predicted = (200.0 * -cost.ln() / rate).ceil();
    if predicted.is_finite() {
        (predicted as u64).max(MIN_DEFAULT_HORIZON)
    } else {
        MIN_DEFAULT_HORIZON
    }
}

/// A report together with its asymptotic ratio columns.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub report: ExperimentReport,
    pub delay_ratio: f64,
    pub risk_ratio: f64,
}

impl From<ExperimentReport> for SweepPoint {
    fn from(report: ExperimentReport) -> Self {
        SweepPoint {
            delay_ratio: report.delay_ratio(),
            risk_ratio: report.risk_ratio(),
            report,
        }
    }
}

/// One experiment per instance, all with the same seed and trial count.
pub fn sweep(
    instances: &[ProblemInstance],
    kind: PolicyKind,
    trials: usize,
    base_seed: u64,
    workers: usize,
    max_horizon: Option<u64>,
) -> Result<Vec<SweepPoint>> {
    if instances.is_empty() {
        return Err(Error::config("sweep.values", "need at least one value"));
    }
    instances
        .iter()
        .map(|inst| {
            Simulator::new(inst.clone(), kind, max_horizon)?
                .run_experiment(trials, base_seed, workers)
                .map(SweepPoint::from)
        })
        .collect()
}

/// Cost sweep on one instance.
pub fn sweep_costs(
    instance: &ProblemInstance,
    kind: PolicyKind,
    costs: &[f64],
    trials: usize,
    base_seed: u64,
    workers: usize,
    max_horizon: Option<u64>,
) -> Result<Vec<SweepPoint>> {
    let instances = costs
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            instance.with_cost(c).map_err(|e| match e {
                Error::Config { message, .. } => {
                    Error::config(format!("sweep.values[{i}]"), message)
                }
                other => other,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    sweep(&instances, kind, trials, base_seed, workers, max_horizon)
}
