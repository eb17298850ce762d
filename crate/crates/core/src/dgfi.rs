//! The deterministic DGFi policy.
//!
//! Selection always probes `K` consecutive ranks. With one target the
//! choice is between ranks `1..=K` (spend a probe on the leader) and
//! `2..=K+1` (spend everything on the runners-up), whichever grows the gap
//! `ΔS` faster according to the rate profile of the current leader. With
//! `L` targets the window slides around the boundary between rank `L` and
//! rank `L+1`. Stopping fires once `ΔS_L ≥ -ln c`; the decision is the
//! top `L` cells.

use crate::error::{Error, Result};
use crate::instance::ProblemInstance;
use crate::rates::{DivergenceTable, SetProfile};
use crate::state::SearchState;
use crate::subsets;

// Beyond this many candidate sets the profiles are computed per step.
const MAX_CACHED_SETS: usize = 1 << 16;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PolicyAction {
    /// Probe these cells (in rank order).
    Continue(Vec<usize>),
    /// Stop and declare these cells (sorted) as the targets.
    Stop(Vec<usize>),
}

#[derive(Debug, Clone)]
pub struct DgfiPolicy {
    table: DivergenceTable,
    k: usize,
    l: usize,
    threshold: f64,
    set_profiles: Option<Vec<SetProfile>>,
}

impl DgfiPolicy {
    pub fn new(table: DivergenceTable, k: usize, l: usize, cost: f64) -> Result<Self> {
        let m = table.cells();
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
        let set_profiles = (l > 1 && subsets::binomial(m, l) <= MAX_CACHED_SETS).then(|| {
            subsets::k_subsets(m, l)
                .iter()
                .map(|set| table.set_profile(set))
                .collect()
        });
        Ok(DgfiPolicy {
            table,
            k,
            l,
            threshold: -cost.ln(),
            set_profiles,
        })
    }

    pub fn from_instance(instance: &ProblemInstance) -> Self {
        Self::new(
            instance.table().clone(),
            instance.k(),
            instance.l(),
            instance.cost(),
        )
        .expect("validated instance")
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn l(&self) -> usize {
        self.l
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn table(&self) -> &DivergenceTable {
        &self.table
    }

    pub fn act(&self, state: &SearchState) -> PolicyAction {
        if self.should_stop(state) {
            PolicyAction::Stop(self.decide(state))
        } else {
            PolicyAction::Continue(self.select(state))
        }
    }

    pub fn select(&self, state: &SearchState) -> Vec<usize> {
        match (self.k, self.l) {
            (1, 1) => self.select_single(state),
            (_, 1) => self.select_multi(state),
            _ => self.select_multitarget(state),
        }
    }

    /// One probe, one target: the leader if its own rate beats `F̄` of the
    /// leader's profile, otherwise the runner-up.
    pub fn select_single(&self, state: &SearchState) -> Vec<usize> {
        let leader = state.at_rank(1);
        if self.table.d_gf(leader) >= self.table.f_bar(leader) {
            vec![leader]
        } else {
            vec![state.at_rank(2)]
        }
    }

    /// `K` probes, one target: ranks `1..=K` or `2..=K+1`.
    pub fn select_multi(&self, state: &SearchState) -> Vec<usize> {
        let leader = state.at_rank(1);
        let k = self.k as f64;
        let with_leader = self.table.d_gf(leader) + self.table.f_kappa(leader, k - 1.0);
        let without = self.table.f_kappa(leader, k);
        let first = if with_leader >= without { 0 } else { 1 };
        state.ranking()[first..first + self.k].to_vec()
    }

    /// `L` targets: a `K`-wide window of ranks ending `k*` ranks into the
    /// believed target set.
    pub fn select_multitarget(&self, state: &SearchState) -> Vec<usize> {
        let l = self.l;
        let profile = self.profile_of_top(state);
        if self.k == 1 {
            let rank = if profile.g_bar >= profile.f_bar {
                l
            } else {
                l + 1
            };
            return vec![state.at_rank(rank)];
        }
        let (split, _) = profile.best_split(state.cells(), self.k, l);
        let first = l - split;
        state.ranking()[first..first + self.k].to_vec()
    }

    fn profile_of_top(&self, state: &SearchState) -> SetProfile {
        let mut top = state.top(self.l).to_vec();
        top.sort_unstable();
        match &self.set_profiles {
            Some(cache) => cache[subsets::lex_rank(&top, state.cells())],
            None => self.table.set_profile(&top),
        }
    }

    /// `ΔS_L(n) ≥ -ln c`.
    pub fn should_stop(&self, state: &SearchState) -> bool {
        state.delta_s(self.l).expect("L < M") >= self.threshold
    }

    /// The top `L` cells, sorted by index.
    pub fn decide(&self, state: &SearchState) -> Vec<usize> {
        let mut declared = state.top(self.l).to_vec();
        declared.sort_unstable();
        declared
    }
}
