//! Rate functions of the search problem.
//!
//! Everything here is a pure function of the per-cell divergences
//! `D(g_m||f_m)` and `D(f_m||g_m)`:
//!
//! - `F̄_m = 1 / Σ_{j≠m} 1/D(f_j||g_j)`: the speed at which the leading
//!   edge of the empty cells' sum LLRs moves away when one probe per step is
//!   spent on them (one driver shared by `M-1` cars).
//! - `F_m(κ) = min{κ F̄_m, min_{j≠m} D(f_j||g_j)}`: the same with `κ`
//!   drivers; the slowest car caps it once `κ ≥ K̃_m`.
//! - `I_m = max{D(g_m||f_m) + F_m(K-1), F_m(K)}`: DGFi's rate under `H_m`.
//! - `I*_m = max_{u∈[0,1]} u D(g_m||f_m) + F_m(K-u)`: the best achievable rate.
//!
//! The multi-target analogues replace the excluded cell `m` by an `L`-set
//! `D`, and add `Ḡ_D`, `G_D(κ)` for the targets' own rates.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::models::ProcessModel;
use crate::subsets;

const INTEGER_TOL: f64 = 1e-9;

/// Per-cell divergences with the `L = 1` rate profiles precomputed.
#[derive(Debug, Clone, PartialEq)]
pub struct DivergenceTable {
    d_gf: Vec<f64>,
    d_fg: Vec<f64>,
    f_bar: Vec<f64>,
    min_other_fg: Vec<f64>,
}

impl DivergenceTable {
    /// Rejects fewer than two cells and any zero or non-finite divergence.
    pub fn new(d_gf: Vec<f64>, d_fg: Vec<f64>) -> Result<Self> {
        if d_gf.len() != d_fg.len() {
            return Err(Error::config(
                "cells",
                format!("{} D(g||f) values but {} D(f||g)", d_gf.len(), d_fg.len()),
            ));
        }
        if d_gf.len() < 2 {
            return Err(Error::config("M", "need at least 2 cells"));
        }
        for (m, (&a, &b)) in d_gf.iter().zip(&d_fg).enumerate() {
            if !(a.is_finite() && b.is_finite()) {
                return Err(Error::Degenerate(format!(
                    "cell {m} has an infinite divergence"
                )));
            }
            if a <= 0.0 || b <= 0.0 {
                return Err(Error::Degenerate(format!(
                    "cell {m} has a zero divergence (D(g||f) = {a}, D(f||g) = {b}); \
                     its f and g are indistinguishable"
                )));
            }
        }
        let cells = d_gf.len();
        let f_bar = (0..cells)
            .map(|m| harmonic_rate(others(&d_fg, m)))
            .collect::<Result<Vec<_>>>()?;
        let min_other_fg = (0..cells)
            .map(|m| others(&d_fg, m).fold(f64::INFINITY, f64::min))
            .collect();
        Ok(DivergenceTable {
            d_gf,
            d_fg,
            f_bar,
            min_other_fg,
        })
    }

    pub fn from_models(models: &[ProcessModel]) -> Result<Self> {
        Self::new(
            models.iter().map(ProcessModel::d_gf).collect(),
            models.iter().map(ProcessModel::d_fg).collect(),
        )
    }

    pub fn cells(&self) -> usize {
        self.d_gf.len()
    }

    pub fn d_gf(&self, m: usize) -> f64 {
        self.d_gf[m]
    }

    pub fn d_fg(&self, m: usize) -> f64 {
        self.d_fg[m]
    }

    /// `F̄_m`.
    pub fn f_bar(&self, m: usize) -> f64 {
        self.f_bar[m]
    }

    /// `min_{j≠m} D(f_j||g_j)`: the slowest empty cell.
    pub fn min_other_fg(&self, m: usize) -> f64 {
        self.min_other_fg[m]
    }

    /// `F_m(κ)` for real `κ ≥ 0`.
    pub fn f_kappa(&self, m: usize, kappa: f64) -> f64 {
        (kappa * self.f_bar[m]).min(self.min_other_fg[m])
    }

    /// `K̃_m`, the breakpoint where `F_m` saturates. Always `≥ 1`.
    pub fn k_tilde(&self, m: usize) -> f64 {
        let slowest = self.min_other_fg[m];
        others(&self.d_fg, m).map(|d| slowest / d).sum()
    }

    /// DGFi's rate under `H_m` with `k` probes per step.
    pub fn i_m_dgfi(&self, m: usize, k: usize) -> f64 {
        let k = k as f64;
        (self.d_gf[m] + self.f_kappa(m, k - 1.0)).max(self.f_kappa(m, k))
    }

    /// The optimal fraction of a probe spent on the target under `H_m`.
    pub fn u_star(&self, m: usize, k: usize) -> f64 {
        if self.d_gf[m] >= self.f_bar[m] {
            1.0
        } else {
            (k as f64 - self.k_tilde(m)).clamp(0.0, 1.0)
        }
    }

    /// `u ↦ u D(g_m||f_m) + F_m(K - u)`, the objective behind `I*_m`.
    pub fn allocation_rate(&self, m: usize, k: usize, u: f64) -> f64 {
        u * self.d_gf[m] + self.f_kappa(m, k as f64 - u)
    }

    pub fn i_m_star(&self, m: usize, k: usize) -> f64 {
        self.allocation_rate(m, k, self.u_star(m, k))
    }

    /// The three sufficient conditions for DGFi to match `I*_m`.
    pub fn optimality(&self, m: usize, k: usize) -> OptimalityVerdict {
        let kt = self.k_tilde(m);
        let k = k as f64;
        let target_fast = self.d_gf[m] >= self.f_bar[m];
        let balanced = k <= kt;
        let saturated = k >= kt + 1.0;
        OptimalityVerdict {
            target_fast,
            balanced,
            saturated,
            optimal: target_fast || balanced || saturated,
        }
    }

    pub fn optimality_check(&self, k: usize) -> Vec<bool> {
        (0..self.cells())
            .map(|m| self.optimality(m, k).optimal)
            .collect()
    }

    /// Probe budgets `K ∈ {2, …, M-1}` at which some hypothesis fails all
    /// three optimality conditions.
    pub fn pathological_k(&self) -> Vec<usize> {
        (2..self.cells())
            .filter(|&k| (0..self.cells()).any(|m| !self.optimality(m, k).optimal))
            .collect()
    }

    /// `F̄_D`: harmonic rate of the cells outside `set`.
    pub fn f_bar_set(&self, set: &[usize]) -> f64 {
        harmonic_rate(outside(&self.d_fg, set)).expect("validated table")
    }

    /// `Ḡ_D`: harmonic rate of the cells inside `set`.
    pub fn g_bar_set(&self, set: &[usize]) -> f64 {
        harmonic_rate(set.iter().map(|&m| self.d_gf[m])).expect("validated table")
    }

    pub fn f_set(&self, set: &[usize], kappa: f64) -> f64 {
        let slowest = outside(&self.d_fg, set).fold(f64::INFINITY, f64::min);
        (kappa * self.f_bar_set(set)).min(slowest)
    }

    pub fn g_set(&self, set: &[usize], kappa: f64) -> f64 {
        let slowest = set
            .iter()
            .map(|&m| self.d_gf[m])
            .fold(f64::INFINITY, f64::min);
        (kappa * self.g_bar_set(set)).min(slowest)
    }

    /// Full rate profile of a candidate target set.
    pub fn set_profile(&self, set: &[usize]) -> SetProfile {
        let f_bar = self.f_bar_set(set);
        let g_bar = self.g_bar_set(set);
        SetProfile {
            f_bar,
            f_cap: outside(&self.d_fg, set).fold(f64::INFINITY, f64::min),
            g_bar,
            g_cap: set
                .iter()
                .map(|&m| self.d_gf[m])
                .fold(f64::INFINITY, f64::min),
        }
    }
}

fn others(values: &[f64], m: usize) -> impl Iterator<Item = f64> + '_ {
    values
        .iter()
        .enumerate()
        .filter(move |&(j, _)| j != m)
        .map(|(_, &v)| v)
}

fn outside<'a>(values: &'a [f64], set: &'a [usize]) -> impl Iterator<Item = f64> + 'a {
    values
        .iter()
        .enumerate()
        .filter(move |(j, _)| !set.contains(j))
        .map(|(_, &v)| v)
}

/// `1 / Σ 1/d`. Errors on an empty input or any zero term.
pub fn harmonic_rate(values: impl IntoIterator<Item = f64>) -> Result<f64> {
    let mut total = 0.0;
    let mut any = false;
    for d in values {
        if d <= 0.0 {
            return Err(Error::Degenerate(format!(
                "divergence {d} makes the harmonic rate undefined"
            )));
        }
        total += 1.0 / d;
        any = true;
    }
    if !any {
        return Err(Error::Degenerate("harmonic rate of an empty set".into()));
    }
    Ok(1.0 / total)
}

/// Prior-weighted harmonic mean `1 / Σ π_h / I_h`.
pub fn prior_harmonic(priors: &[f64], rates: &[f64]) -> f64 {
    1.0 / priors.iter().zip(rates).map(|(p, r)| p / r).sum::<f64>()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OptimalityVerdict {
    /// `D(g_m||f_m) ≥ F̄_m`.
    pub target_fast: bool,
    /// `K ≤ K̃_m`.
    pub balanced: bool,
    /// `K ≥ K̃_m + 1`.
    pub saturated: bool,
    pub optimal: bool,
}

/// Rate constants of one candidate target set `D`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SetProfile {
    pub f_bar: f64,
    /// `min_{j∉D} D(f_j||g_j)`.
    pub f_cap: f64,
    pub g_bar: f64,
    /// `min_{j∈D} D(g_j||f_j)`.
    pub g_cap: f64,
}

impl SetProfile {
    pub fn f(&self, kappa: f64) -> f64 {
        (kappa * self.f_bar).min(self.f_cap)
    }

    pub fn g(&self, kappa: f64) -> f64 {
        (kappa * self.g_bar).min(self.g_cap)
    }

    /// `I_D = max{F̄_D, Ḡ_D}`, the single-probe rate.
    pub fn single_probe_rate(&self) -> f64 {
        self.f_bar.max(self.g_bar)
    }

    /// Feasible range of `k`, the number of believed targets probed, so the
    /// probed rank window `L-k+1 ..= L-k+K` stays inside `1..=M`.
    pub fn k_range(cells: usize, k: usize, l: usize) -> (usize, usize) {
        (k.saturating_sub(cells - l), k.min(l))
    }

    /// `(k*, F_D(K-k*) + G_D(k*))` over the feasible range, ties toward larger `k`.
    pub fn best_split(&self, cells: usize, k: usize, l: usize) -> (usize, f64) {
        let (lo, hi) = Self::k_range(cells, k, l);
        let mut best = (lo, f64::NEG_INFINITY);
        for split in lo..=hi {
            let value = self.f((k - split) as f64) + self.g(split as f64);
            if value >= best.1 {
                best = (split, value);
            }
        }
        best
    }

    /// Real-valued maximizer of `F_D(K-u) + G_D(u)` over `u ∈ [0, K]`.
    ///
    /// Both terms are piecewise linear, so it suffices to compare the
    /// endpoints and the two breakpoints. Ties go to the larger `u`.
    pub fn relaxed_split(&self, k: usize) -> (f64, f64) {
        let k = k as f64;
        let candidates = [0.0, k, self.g_cap / self.g_bar, k - self.f_cap / self.f_bar];
        let mut best = (0.0, f64::NEG_INFINITY);
        for u in candidates {
            if !(0.0..=k).contains(&u) {
                continue;
            }
            let value = self.f(k - u) + self.g(u);
            if value > best.1 + 1e-12 || ((value - best.1).abs() <= 1e-12 && u > best.0) {
                best = (u, value);
            }
        }
        best
    }
}

/// Single-target view of one cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellRates {
    /// 1-based cell index.
    pub cell: usize,
    pub d_gf: f64,
    pub d_fg: f64,
    pub f_bar: f64,
    pub k_tilde: f64,
    pub i_m_dgfi: f64,
    pub u_star: f64,
    pub i_m_star: f64,
    pub verdict: OptimalityVerdict,
}

/// One row of the multi-target analysis.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SetRates {
    /// 1-based cells of the candidate target set.
    pub cells: Vec<usize>,
    pub prior: f64,
    pub f_bar: f64,
    pub g_bar: f64,
    /// DGFi's choice of how many believed targets to probe.
    pub k_star: usize,
    /// `max_k F_D(K-k) + G_D(k)` over feasible integer `k`.
    pub rate_dgfi: f64,
    /// Relaxed maximizer over real `u ∈ [0, K]`.
    pub u_star: f64,
    pub rate_relaxed: f64,
    pub u_star_integer: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MultiTargetReport {
    pub sets: Vec<SetRates>,
    /// Prior-weighted harmonic mean of the relaxed rates; equals `I*_L` at `K = 1`.
    pub i_star_l: f64,
    /// Whether the relaxed maximizer is an integer for every set.
    pub integer_split_everywhere: bool,
}

/// Every rate quantity for one instance at probe budget `K`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateReport {
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "L")]
    pub l: usize,
    pub cells: Vec<CellRates>,
    /// DGFi's rate: prior-weighted over hypotheses.
    pub i_dgfi: f64,
    /// The optimal rate.
    pub i_star: f64,
    pub optimal_per_m: Vec<bool>,
    pub pathological_k: Vec<usize>,
    pub multitarget: Option<MultiTargetReport>,
}

impl RateReport {
    /// `priors` are over hypotheses: cells when `l == 1`, otherwise the
    /// `l`-subsets in lexicographic order.
    pub fn compute(table: &DivergenceTable, k: usize, l: usize, priors: &[f64]) -> Result<Self> {
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
        if priors.len() != subsets::binomial(m, l) {
            return Err(Error::config(
                "priors",
                format!(
                    "expected {} hypothesis weights, got {}",
                    subsets::binomial(m, l),
                    priors.len()
                ),
            ));
        }
        let cells: Vec<CellRates> = (0..m)
            .map(|c| CellRates {
                cell: c + 1,
                d_gf: table.d_gf(c),
                d_fg: table.d_fg(c),
                f_bar: table.f_bar(c),
                k_tilde: table.k_tilde(c),
                i_m_dgfi: table.i_m_dgfi(c, k),
                u_star: table.u_star(c, k),
                i_m_star: table.i_m_star(c, k),
                verdict: table.optimality(c, k),
            })
            .collect();
        let optimal_per_m = cells.iter().map(|c| c.verdict.optimal).collect();
        let pathological_k = table.pathological_k().into_iter().collect();

        let (i_dgfi, i_star, multitarget) = if l == 1 {
            let dgfi: Vec<f64> = cells.iter().map(|c| c.i_m_dgfi).collect();
            let star: Vec<f64> = cells.iter().map(|c| c.i_m_star).collect();
            (
                prior_harmonic(priors, &dgfi),
                prior_harmonic(priors, &star),
                None,
            )
        } else {
            let sets: Vec<SetRates> = subsets::k_subsets(m, l)
                .into_iter()
                .zip(priors)
                .map(|(set, &prior)| {
                    let p = table.set_profile(&set);
                    let (k_star, rate_dgfi) = p.best_split(m, k, l);
                    let (u_star, rate_relaxed) = p.relaxed_split(k);
                    SetRates {
                        cells: set.iter().map(|c| c + 1).collect(),
                        prior,
                        f_bar: p.f_bar,
                        g_bar: p.g_bar,
                        k_star,
                        rate_dgfi,
                        u_star,
                        rate_relaxed,
                        u_star_integer: (u_star - u_star.round()).abs() < INTEGER_TOL,
                    }
                })
                .collect();
            let dgfi: Vec<f64> = sets.iter().map(|s| s.rate_dgfi).collect();
            let relaxed: Vec<f64> = sets.iter().map(|s| s.rate_relaxed).collect();
            let i_star_l = prior_harmonic(priors, &relaxed);
            let report = MultiTargetReport {
                integer_split_everywhere: sets.iter().all(|s| s.u_star_integer),
                sets,
                i_star_l,
            };
            (prior_harmonic(priors, &dgfi), i_star_l, Some(report))
        };

        Ok(RateReport {
            m,
            k,
            l,
            cells,
            i_dgfi,
            i_star,
            optimal_per_m,
            pathological_k,
            multitarget,
        })
    }
}

/// Deterministic "cars and drivers" simulation of `F(κ)`.
///
/// Cars start at 0 and move toward `-∞`; each step the `kappa` cars closest
/// to the origin (ties by index) each advance by their speed. Returns the
/// empirical speed of the car closest to the origin after `horizon` steps.
pub fn car_oracle(speeds: &[f64], kappa: usize, horizon: u64) -> Result<f64> {
    if kappa == 0 || kappa > speeds.len() {
        return Err(Error::config(
            "kappa",
            format!("need 1 <= kappa <= {} cars, got {kappa}", speeds.len()),
        ));
    }
    if horizon < 10_000 {
        return Err(Error::config(
            "horizon",
            format!("need at least 10^4 steps, got {horizon}"),
        ));
    }
    if let Some(s) = speeds.iter().find(|s| !(s.is_finite() && **s > 0.0)) {
        return Err(Error::config(
            "speeds",
            format!("speeds must be positive, got {s}"),
        ));
    }
    let mut position = vec![0.0f64; speeds.len()];
    let mut order: Vec<usize> = (0..speeds.len()).collect();
    for _ in 0..horizon {
        order.sort_by(|&a, &b| position[b].total_cmp(&position[a]).then(a.cmp(&b)));
        for &car in &order[..kappa] {
            position[car] -= speeds[car];
        }
    }
    let leading = position.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(-leading / horizon as f64)
}
