//! The randomized Chernoff test.
//!
//! For every hypothesis the test precomputes the action distribution `q*`
//! that maximizes the worst-case KL divergence to a competing hypothesis,
//! then at each step samples a probe set from `q*` of the current ML
//! estimate. Stopping and the final decision are the same as DGFi's.
//!
//! With `L` targets the competing hypotheses are restricted to the sets
//! that differ from the true one by a single swap. Every other alternative
//! `D'` is at least as far away as some single swap inside `D △ D'` (the
//! per-action divergence is a sum of nonnegative per-cell terms over the
//! symmetric difference), so the minimum is unchanged and the program stays
//! at `L(M-L)` constraints.

use std::sync::Arc;

use rand::Rng;

use crate::error::{Error, Result};
use crate::instance::ProblemInstance;
use crate::lp;
use crate::rates::{prior_harmonic, DivergenceTable};
use crate::state::SearchState;
use crate::subsets;

/// KL divergence between "target at `m`" and "target at `j`" when probing `action`.
///
/// The observation is a product over the probed cells, so only `m` and `j`
/// contribute.
pub fn pairwise_kl(table: &DivergenceTable, action: &[usize], m: usize, j: usize) -> f64 {
    let mut d = 0.0;
    if action.contains(&m) {
        d += table.d_gf(m);
    }
    if action.contains(&j) {
        d += table.d_fg(j);
    }
    d
}

/// A maximin distribution over all `K`-subsets of the cells.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionDistribution {
    actions: Arc<[Vec<usize>]>,
    weights: Vec<f64>,
    cumulative: Vec<f64>,
    value: f64,
}

impl ActionDistribution {
    /// `weights` are normalized here. `value` is the maximin objective they attain.
    pub fn new(actions: Arc<[Vec<usize>]>, weights: Vec<f64>, value: f64) -> Result<Self> {
        if actions.len() != weights.len() {
            return Err(Error::Lp(format!(
                "{} weights for {} actions",
                weights.len(),
                actions.len()
            )));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::Lp(
                "action weights must be finite and nonnegative".into(),
            ));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::Lp("action weights sum to zero".into()));
        }
        let weights: Vec<f64> = weights.iter().map(|w| w / total).collect();
        let mut acc = 0.0;
        let cumulative = weights
            .iter()
            .map(|w| {
                acc += w;
                acc
            })
            .collect();
        Ok(ActionDistribution {
            actions,
            weights,
            cumulative,
            value,
        })
    }

    pub fn actions(&self) -> &[Vec<usize>] {
        &self.actions
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    /// Index of a sampled action.
    pub fn sample_index<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let i = self.cumulative.partition_point(|&c| c <= u);
        if i < self.weights.len() {
            i
        } else {
            // Rounding left the total just below u.
            self.weights
                .iter()
                .rposition(|&w| w > 0.0)
                .expect("positive total")
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> &[usize] {
        &self.actions[self.sample_index(rng)]
    }
}

/// Rows of the maximin program for hypothesis `set`: one per single swap
/// `(out, into)` with `out ∈ set`, `into ∉ set`, both ascending.
fn swap_rows(table: &DivergenceTable, actions: &[Vec<usize>], set: &[usize]) -> Vec<Vec<f64>> {
    let cells = table.cells();
    let mut rows = Vec::new();
    for &out in set {
        for into in (0..cells).filter(|j| !set.contains(j)) {
            rows.push(
                actions
                    .iter()
                    .map(|a| pairwise_kl(table, a, out, into))
                    .collect(),
            );
        }
    }
    rows
}

/// The maximin action distribution for the hypothesis that `set` (sorted)
/// holds the targets, over `actions`.
///
/// Solved as `min Σ x_A  s.t.  Σ_A x_A KL(A, row) ≥ 1`, `x ≥ 0`; then
/// `q = x / Σ x` and the value is `1 / Σ x`.
pub fn solve_maximin(
    table: &DivergenceTable,
    actions: Arc<[Vec<usize>]>,
    set: &[usize],
) -> Result<ActionDistribution> {
    let rows = swap_rows(table, &actions, set);
    if let Some(r) = rows.iter().position(|r| r.iter().all(|&v| v == 0.0)) {
        return Err(Error::Degenerate(format!(
            "hypothesis {set:?} cannot be told apart from its alternative {r} by any action"
        )));
    }
    let costs = vec![1.0; actions.len()];
    let rhs = vec![1.0; rows.len()];
    let solution = lp::minimize(&costs, &rows, &rhs)?;
    let total: f64 = solution.x.iter().sum();
    let weights: Vec<f64> = solution.x.iter().map(|x| x / total).collect();
    let value = worst_case(&rows, &weights);
    ActionDistribution::new(actions, weights, value)
}

/// `min_row Σ_A q_A KL(A, row)`.
fn worst_case(rows: &[Vec<f64>], q: &[f64]) -> f64 {
    rows.iter()
        .map(|r| r.iter().zip(q).map(|(a, b)| a * b).sum::<f64>())
        .fold(f64::INFINITY, f64::min)
}

/// Worst-case divergence attained by an arbitrary distribution `q` over `actions`.
pub fn maximin_objective(
    table: &DivergenceTable,
    actions: &[Vec<usize>],
    set: &[usize],
    q: &[f64],
) -> f64 {
    worst_case(&swap_rows(table, actions, set), q)
}

/// Chernoff test with all maximin distributions cached at construction.
#[derive(Debug, Clone)]
pub struct ChernoffPolicy {
    cells: usize,
    k: usize,
    l: usize,
    threshold: f64,
    priors: Vec<f64>,
    dists: Vec<ActionDistribution>,
}

impl ChernoffPolicy {
    pub fn new(instance: &ProblemInstance) -> Result<Self> {
        let table = instance.table();
        let cells = instance.cells();
        let actions: Arc<[Vec<usize>]> = subsets::k_subsets(cells, instance.k()).into();
        let dists = instance
            .prior()
            .hypotheses()
            .iter()
            .map(|set| solve_maximin(table, actions.clone(), set))
            .collect::<Result<Vec<_>>>()?;
        Ok(ChernoffPolicy {
            cells,
            k: instance.k(),
            l: instance.l(),
            threshold: instance.threshold(),
            priors: instance.prior().weights().to_vec(),
            dists,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn l(&self) -> usize {
        self.l
    }

    /// Distributions indexed like the hypotheses (cells when `L = 1`).
    pub fn distributions(&self) -> &[ActionDistribution] {
        &self.dists
    }

    pub fn distribution(&self, hypothesis: usize) -> &ActionDistribution {
        &self.dists[hypothesis]
    }

    /// The maximin value for a hypothesis.
    pub fn rate_chernoff(&self, hypothesis: usize) -> f64 {
        self.dists[hypothesis].value
    }

    /// Prior-weighted harmonic mean of the per-hypothesis rates.
    pub fn aggregate_rate(&self) -> f64 {
        let rates: Vec<f64> = self.dists.iter().map(|d| d.value).collect();
        prior_harmonic(&self.priors, &rates)
    }

    /// Lexicographic index of the ML hypothesis: the top `L` cells.
    pub fn ml_hypothesis(&self, state: &SearchState) -> usize {
        subsets::lex_rank(&ml_set(state, self.l), self.cells)
    }

    pub fn select<R: Rng + ?Sized>(&self, state: &SearchState, rng: &mut R) -> Vec<usize> {
        self.dists[self.ml_hypothesis(state)].sample(rng).to_vec()
    }

    pub fn should_stop(&self, state: &SearchState) -> bool {
        state.delta_s(self.l).expect("L < M") >= self.threshold
    }

    pub fn decide(&self, state: &SearchState) -> Vec<usize> {
        ml_set(state, self.l)
    }
}

/// The single-target ML estimate: the cell with the largest sum LLR.
pub fn ml_estimate(state: &SearchState) -> usize {
    state.at_rank(1)
}

/// The ML target set, sorted.
pub fn ml_set(state: &SearchState, l: usize) -> Vec<usize> {
    let mut set = state.top(l).to_vec();
    set.sort_unstable();
    set
}
