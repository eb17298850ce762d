//! The complete definition of one search problem.

use rand::Rng;

use crate::error::{Error, Result};
use crate::models::ProcessModel;
use crate::rates::{DivergenceTable, RateReport};
use crate::subsets;

/// Prior over hypotheses. A hypothesis is an `L`-subset of the cells (a
/// single cell when `L = 1`), enumerated in lexicographic order.
#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisPrior {
    cells: usize,
    targets: usize,
    hypotheses: Vec<Vec<usize>>,
    weights: Vec<f64>,
    cumulative: Vec<f64>,
}

impl HypothesisPrior {
    pub fn uniform(cells: usize, targets: usize) -> Result<Self> {
        let n = subsets::binomial(cells, targets);
        Self::from_weights(cells, targets, vec![1.0; n])
    }

    /// Weights over all `L`-subsets in lexicographic order; normalized here.
    pub fn from_weights(cells: usize, targets: usize, weights: Vec<f64>) -> Result<Self> {
        if targets == 0 || targets >= cells {
            return Err(Error::config(
                "L",
                format!("need 1 <= L < M = {cells}, got {targets}"),
            ));
        }
        let hypotheses = subsets::k_subsets(cells, targets);
        if weights.len() != hypotheses.len() {
            return Err(Error::config(
                "priors",
                format!(
                    "expected {} weights, got {}",
                    hypotheses.len(),
                    weights.len()
                ),
            ));
        }
        if let Some((i, w)) = weights
            .iter()
            .enumerate()
            .find(|(_, w)| !(w.is_finite() && **w > 0.0))
        {
            return Err(Error::config(
                format!("priors[{i}]"),
                format!("prior weights must be strictly positive, got {w}"),
            ));
        }
        let total: f64 = weights.iter().sum();
        let weights: Vec<f64> = weights.iter().map(|w| w / total).collect();
        let mut cumulative = Vec::with_capacity(weights.len());
        let mut acc = 0.0;
        for w in &weights {
            acc += w;
            cumulative.push(acc);
        }
        Ok(HypothesisPrior {
            cells,
            targets,
            hypotheses,
            weights,
            cumulative,
        })
    }

    /// Subset prior proportional to the product of its members' weights.
    pub fn from_cell_weights(targets: usize, cell_weights: &[f64]) -> Result<Self> {
        let cells = cell_weights.len();
        if let Some((i, w)) = cell_weights
            .iter()
            .enumerate()
            .find(|(_, w)| !(w.is_finite() && **w > 0.0))
        {
            return Err(Error::config(
                format!("priors[{i}]"),
                format!("prior weights must be strictly positive, got {w}"),
            ));
        }
        let weights = subsets::k_subsets(cells, targets.min(cells))
            .iter()
            .map(|set| set.iter().map(|&c| cell_weights[c]).product())
            .collect();
        Self::from_weights(cells, targets, weights)
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn targets(&self) -> usize {
        self.targets
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn hypotheses(&self) -> &[Vec<usize>] {
        &self.hypotheses
    }

    pub fn hypothesis(&self, index: usize) -> &[usize] {
        &self.hypotheses[index]
    }

    /// Index of a sorted target set.
    pub fn index_of(&self, set: &[usize]) -> usize {
        subsets::lex_rank(set, self.cells)
    }

    /// Draw a hypothesis index.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        self.cumulative
            .partition_point(|&c| c <= u)
            .min(self.len() - 1)
    }
}

/// `M` cells, `K` probes per step, `L` targets, observation cost `c`,
/// a prior over target sets and one [`ProcessModel`] per cell.
#[derive(Debug, Clone)]
pub struct ProblemInstance {
    k: usize,
    l: usize,
    cost: f64,
    prior: HypothesisPrior,
    models: Vec<ProcessModel>,
    table: DivergenceTable,
}

impl ProblemInstance {
    pub fn new(
        models: Vec<ProcessModel>,
        k: usize,
        l: usize,
        cost: f64,
        prior: HypothesisPrior,
    ) -> Result<Self> {
        let m = models.len();
        if m < 2 {
            return Err(Error::config(
                "M",
                format!("need at least 2 cells, got {m}"),
            ));
        }
        if k == 0 || k >= m {
            return Err(Error::config(
                "K",
                format!("need 1 <= K < M = {m}, got {k}"),
            ));
        }
        if l == 0 || l >= m {
            return Err(Error::config(
                "L",
                format!("need 1 <= L < M = {m}, got {l}"),
            ));
        }
        if !(cost > 0.0 && cost < 1.0) {
            return Err(Error::config(
                "c",
                format!("cost must lie in (0, 1), got {cost}"),
            ));
        }
        if prior.cells() != m || prior.targets() != l {
            return Err(Error::config(
                "priors",
                format!(
                    "prior is over {}-subsets of {} cells, instance has L = {l}, M = {m}",
                    prior.targets(),
                    prior.cells()
                ),
            ));
        }
        let table = DivergenceTable::from_models(&models)?;
        Ok(ProblemInstance {
            k,
            l,
            cost,
            prior,
            models,
            table,
        })
    }

    /// Uniform prior convenience constructor.
    pub fn uniform(models: Vec<ProcessModel>, k: usize, l: usize, cost: f64) -> Result<Self> {
        let prior = HypothesisPrior::uniform(models.len(), l)?;
        Self::new(models, k, l, cost, prior)
    }

    pub fn cells(&self) -> usize {
        self.models.len()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn l(&self) -> usize {
        self.l
    }

    pub fn cost(&self) -> f64 {
        self.cost
    }

    /// Stopping threshold `-ln c` in nats.
    pub fn threshold(&self) -> f64 {
        -self.cost.ln()
    }

    pub fn models(&self) -> &[ProcessModel] {
        &self.models
    }

    pub fn table(&self) -> &DivergenceTable {
        &self.table
    }

    pub fn prior(&self) -> &HypothesisPrior {
        &self.prior
    }

    /// `(M - L) L c`: DGFi's error-probability bound, `(M - 1) c` for one target.
    pub fn error_bound(&self) -> f64 {
        ((self.cells() - self.l) * self.l) as f64 * self.cost
    }

    pub fn rate_report(&self) -> RateReport {
        RateReport::compute(&self.table, self.k, self.l, self.prior.weights())
            .expect("validated instance")
    }

    /// Same models and prior with a different cost.
    pub fn with_cost(&self, cost: f64) -> Result<Self> {
        Self::new(
            self.models.clone(),
            self.k,
            self.l,
            cost,
            self.prior.clone(),
        )
    }
}
