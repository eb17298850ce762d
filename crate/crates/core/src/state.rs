//! Sum-LLR bookkeeping shared by every policy.

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::models::ProcessModel;

/// One recorded step: the probed cells and what each returned.
#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub probes: Vec<usize>,
    pub observations: Vec<f64>,
}

/// Per-cell sum LLRs `S_m(n)`, probe counts `N_m(n)` and the ranking
/// `m(1), ..., m(M)` by decreasing sum, ties broken by ascending cell index.
///
/// Cells are 0-based.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchState {
    n: u64,
    sums: Vec<f64>,
    counts: Vec<u64>,
    ranking: Vec<usize>,
    history: Option<Vec<Step>>,
}

impl SearchState {
    pub fn new(cells: usize) -> Result<Self> {
        if cells < 2 {
            return Err(Error::config(
                "M",
                format!("need at least 2 cells, got {cells}"),
            ));
        }
        Ok(SearchState {
            n: 0,
            sums: vec![0.0; cells],
            counts: vec![0; cells],
            ranking: (0..cells).collect(),
            history: None,
        })
    }

    /// Like [`SearchState::new`] but keeps every step so the run can be replayed.
    pub fn with_history(cells: usize) -> Result<Self> {
        let mut state = Self::new(cells)?;
        state.history = Some(Vec::new());
        Ok(state)
    }

    /// A state with the given sums at `n = 0`, for evaluating selection rules
    /// on synthetic configurations.
    pub fn from_sums(sums: Vec<f64>) -> Result<Self> {
        let mut state = Self::new(sums.len())?;
        if sums.iter().any(|s| s.is_nan()) {
            return Err(Error::InvalidProbe("sum LLRs must not be NaN".into()));
        }
        state.sums = sums;
        state.rerank();
        Ok(state)
    }

    pub fn cells(&self) -> usize {
        self.sums.len()
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn sums(&self) -> &[f64] {
        &self.sums
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// Cells ordered by decreasing sum LLR.
    pub fn ranking(&self) -> &[usize] {
        &self.ranking
    }

    /// The cell at 1-based rank `r`.
    pub fn at_rank(&self, r: usize) -> usize {
        self.ranking[r - 1]
    }

    /// The `l` highest-ranked cells, in rank order.
    pub fn top(&self, l: usize) -> &[usize] {
        &self.ranking[..l]
    }

    pub fn history(&self) -> Option<&[Step]> {
        self.history.as_deref()
    }

    /// Add one observation per probed cell.
    ///
    /// The state is left untouched if the probe set or any observation is invalid.
    pub fn apply_observations(
        &mut self,
        probes: &[usize],
        observations: &[f64],
        models: &[ProcessModel],
    ) -> Result<()> {
        if models.len() != self.cells() {
            return Err(Error::InvalidProbe(format!(
                "{} models for {} cells",
                models.len(),
                self.cells()
            )));
        }
        if observations.len() != probes.len() {
            return Err(Error::InvalidProbe(format!(
                "{} observations for {} probes",
                observations.len(),
                probes.len()
            )));
        }
        self.check_probes(probes)?;
        let llrs = probes
            .iter()
            .zip(observations)
            .map(|(&m, &y)| {
                let l = models[m].llr(y)?;
                if l.is_finite() {
                    Ok(l)
                } else {
                    Err(Error::InvalidProbe(format!(
                        "observation {y} at cell {m} has zero likelihood under one hypothesis"
                    )))
                }
            })
            .collect::<Result<Vec<f64>>>()?;

        for (&m, l) in probes.iter().zip(llrs) {
            self.sums[m] += l;
            self.counts[m] += 1;
        }
        self.n += 1;
        self.rerank();
        if let Some(h) = self.history.as_mut() {
            h.push(Step {
                probes: probes.to_vec(),
                observations: observations.to_vec(),
            });
        }
        Ok(())
    }

    fn check_probes(&self, probes: &[usize]) -> Result<()> {
        let mut seen = vec![false; self.cells()];
        for &m in probes {
            if m >= self.cells() {
                return Err(Error::InvalidProbe(format!(
                    "cell {m} out of range for {} cells",
                    self.cells()
                )));
            }
            if std::mem::replace(&mut seen[m], true) {
                return Err(Error::InvalidProbe(format!("cell {m} probed twice")));
            }
        }
        Ok(())
    }

    fn rerank(&mut self) {
        let sums = &self.sums;
        // partial_cmp so that 0.0 and -0.0 tie and fall through to the index.
        self.ranking.sort_by(|&a, &b| {
            sums[b]
                .partial_cmp(&sums[a])
                .unwrap_or(Ordering::Equal)
                .then(a.cmp(&b))
        });
    }

    /// `S` at rank `l` minus `S` at rank `l + 1`.
    pub fn delta_s(&self, l: usize) -> Result<f64> {
        if l == 0 || l >= self.cells() {
            return Err(Error::config(
                "L",
                format!("need 1 <= L < M = {}, got {l}", self.cells()),
            ));
        }
        Ok(self.sums[self.at_rank(l)] - self.sums[self.at_rank(l + 1)])
    }
}
