//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line per
//! criterion and exits non-zero if any failed.

use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use anomaly_search::chernoff::{self, ml_set};
use anomaly_search::config::ExperimentConfig;
use anomaly_search::harness::{self, ExperimentReport, PolicyKind, Simulator};
use anomaly_search::models::{DistributionSpec, ProcessModel};
use anomaly_search::output;
use anomaly_search::rates::{car_oracle, DivergenceTable};
use anomaly_search::subsets;
use anomaly_search::SearchState;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const WORKERS: usize = 0;

type Criterion = (&'static str, Box<dyn Fn() -> Outcome>);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn exponential_config(
    m: usize,
    k: usize,
    l: usize,
    c: f64,
    trials: usize,
    seed: u64,
) -> ExperimentConfig {
    ExperimentConfig::from_json_str(&format!(
        r#"{{
            "instance": {{
                "M": {m}, "K": {k}, "L": {l}, "c": {c},
                "generator": {{"kind": "exponential", "lambda_f": 0.0188, "lambda_g_base": 9.0}}
            }},
            "trials": {trials}, "seed": {seed}
        }}"#
    ))
    .expect("acceptance config parses")
}

fn run(config: &ExperimentConfig, kind: PolicyKind) -> ExperimentReport {
    Simulator::new(config.instance().unwrap(), kind, config.max_horizon)
        .unwrap()
        .run_experiment(config.trials, config.seed, WORKERS)
        .unwrap()
}

fn slack(bound: f64, trials: usize) -> f64 {
    3.0 * (bound / trials as f64).sqrt()
}

fn error_bound() -> Outcome {
    let cfg = exponential_config(5, 1, 1, 1e-2, 20_000, 101);
    let start = Instant::now();
    let r = run(&cfg, PolicyKind::Dgfi);
    let secs = start.elapsed().as_secs_f64();
    let limit = 0.04 + slack(0.04, 20_000);
    outcome(
        r.pe_hat <= limit && secs < 60.0 && r.truncation_rate < 1e-4,
        format!(
            "pe_hat {} <= {limit:.5} (bound {}), truncation {}, {secs:.1}s",
            r.pe_hat, r.pe_bound, r.truncation_rate
        ),
    )
}

fn multi_target_error_bound() -> Outcome {
    let cfg = exponential_config(6, 1, 2, 1e-2, 20_000, 102);
    let r = run(&cfg, PolicyKind::Dgfi);
    let bound = 4.0 * 2.0 * 1e-2;
    let limit = bound + slack(bound, 20_000);
    outcome(
        r.pe_hat <= limit && (r.pe_bound - bound).abs() < 1e-15 && r.truncation_rate < 1e-4,
        format!("pe_hat {} <= {limit:.5} (bound {})", r.pe_hat, r.pe_bound),
    )
}

fn rate_asymptotics() -> Outcome {
    let cfg = ExperimentConfig::from_json_str(
        r#"{
            "instance": {
                "M": 5, "K": 2, "L": 1, "c": 0.1,
                "generator": {"kind": "exponential", "lambda_f": 1.0, "lambda_g_base": 1.5, "lambda_g_step": 0.1}
            },
            "trials": 10000, "seed": 103,
            "sweep": {"axis": "c", "values": [0.1, 0.01, 0.001, 0.0001]}
        }"#,
    )
    .unwrap();
    let start = Instant::now();
    let points = harness::sweep(
        &cfg.sweep_instances().unwrap(),
        PolicyKind::Dgfi,
        cfg.trials,
        cfg.seed,
        WORKERS,
        None,
    )
    .unwrap();
    let secs = start.elapsed().as_secs_f64();
    let ratios: Vec<f64> = points.iter().map(|p| p.delay_ratio).collect();
    // Independent recomputation of the ratio from the raw report fields.
    let recomputed = points.iter().all(|p| {
        (p.report.mean_tau * p.report.rate_i / -p.report.c.ln() - p.delay_ratio).abs() < 1e-12
    });
    let last = *ratios.last().unwrap();
    let rises_ok = ratios.windows(2).all(|w| w[1] <= w[0] + 0.05);
    outcome(
        (0.7..=1.3).contains(&last) && rises_ok && recomputed && secs < 600.0,
        format!("ratios {ratios:.4?}, {secs:.1}s"),
    )
}

/// DGFi below Chernoff at every point, gap increasing across points,
/// both error rates under their bounds.
fn delay_ordering(points: &[(usize, usize, usize)], c: f64, trials: usize, seed: u64) -> Outcome {
    let mut gaps = Vec::new();
    let mut ordered = true;
    let mut bounded = true;
    let mut detail = Vec::new();
    for &(m, k, l) in points {
        let cfg = exponential_config(m, k, l, c, trials, seed);
        let d = run(&cfg, PolicyKind::Dgfi);
        let ch = run(&cfg, PolicyKind::Chernoff);
        ordered &= d.mean_tau < ch.mean_tau;
        for r in [&d, &ch] {
            bounded &=
                r.pe_hat <= r.pe_bound + slack(r.pe_bound, trials) && r.truncation_rate < 1e-4;
        }
        gaps.push(ch.mean_tau - d.mean_tau);
        detail.push(format!(
            "M={m}: dgfi {:.3} vs chernoff {:.3} (pe {} / {})",
            d.mean_tau, ch.mean_tau, d.pe_hat, ch.pe_hat
        ));
    }
    let increasing = gaps.windows(2).all(|w| w[1] > w[0]);
    outcome(ordered && increasing && bounded, detail.join("; "))
}

fn car_race_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(107);
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let m = rng.random_range(4..10);
        let d_fg: Vec<f64> = (0..m).map(|_| rng.random_range(0.1..5.0)).collect();
        let table = DivergenceTable::new(vec![1.0; m], d_fg.clone()).unwrap();
        let cell = rng.random_range(0..m);
        let speeds: Vec<f64> = (0..m).filter(|&j| j != cell).map(|j| d_fg[j]).collect();
        for kappa in 1..=3 {
            let expected = table.f_kappa(cell, kappa as f64);
            let simulated = car_oracle(&speeds, kappa, 100_000).unwrap();
            worst = worst.max((simulated - expected).abs() / expected);
        }
    }
    outcome(worst <= 0.01, format!("max relative error {worst:.2e}"))
}

/// Maximize `u d_gf + F(K-u)` by golden-section search on `[lo, hi]`.
fn golden_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> (f64, f64) {
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..200 {
        let a = hi - phi * (hi - lo);
        let b = lo + phi * (hi - lo);
        if f(a) < f(b) {
            lo = a;
        } else {
            hi = b;
        }
    }
    let u = 0.5 * (lo + hi);
    (u, f(u))
}

fn optimal_allocation_closed_form() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(108);
    let mut worst_arg: f64 = 0.0;
    let mut worst_value: f64 = 0.0;
    let mut dominated = true;
    for _ in 0..100 {
        let m = rng.random_range(2..10);
        let k = rng.random_range(1..m);
        let d_gf: Vec<f64> = (0..m).map(|_| rng.random_range(0.05..5.0)).collect();
        let d_fg: Vec<f64> = (0..m).map(|_| rng.random_range(0.05..5.0)).collect();
        let table = DivergenceTable::new(d_gf.clone(), d_fg.clone()).unwrap();
        for (cell, &gain) in d_gf.iter().enumerate() {
            // Oracle objective built from the raw divergences.
            let others: Vec<f64> = (0..m).filter(|&j| j != cell).map(|j| d_fg[j]).collect();
            let f_bar = 1.0 / others.iter().map(|d| 1.0 / d).sum::<f64>();
            let cap = others.iter().copied().fold(f64::INFINITY, f64::min);
            let objective = |u: f64| u * gain + ((k as f64 - u) * f_bar).min(cap);
            let (mut grid_u, mut grid_v) = (0.0, f64::NEG_INFINITY);
            for i in 0..=10_000 {
                let u = i as f64 * 1e-4;
                let v = objective(u);
                if v > grid_v {
                    grid_u = u;
                    grid_v = v;
                }
            }
            let (_, refined) = golden_max(
                objective,
                (grid_u - 1e-4).max(0.0),
                (grid_u + 1e-4).min(1.0),
            );
            let u_star = table.u_star(cell, k);
            let value = table.i_m_star(cell, k);
            worst_arg = worst_arg.max((grid_u - u_star).abs());
            worst_value = worst_value.max((refined.max(grid_v) - value).abs());
            dominated &= value >= grid_v - 1e-12;
        }
    }
    outcome(
        worst_arg <= 1e-3 && worst_value <= 1e-6 && dominated,
        format!("max |u - u_grid| {worst_arg:.2e}, max value error {worst_value:.2e}"),
    )
}

fn pathological_budgets() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(109);
    let mut largest = 0;
    let mut k1_ok = true;
    for _ in 0..1000 {
        let m = rng.random_range(3..=12);
        // Log-uniform divergences over four decades to reach every regime.
        let mut draw = || 10f64.powf(rng.random_range(-2.0..2.0));
        let d_gf: Vec<f64> = (0..m).map(|_| draw()).collect();
        let d_fg: Vec<f64> = (0..m).map(|_| draw()).collect();
        let table = DivergenceTable::new(d_gf, d_fg).unwrap();
        largest = largest.max(table.pathological_k().len());
        k1_ok &= (0..m).all(|c| table.optimality(c, 1).optimal);
    }
    outcome(
        largest <= 3 && k1_ok,
        format!("largest pathological set {largest}, K=1 always optimal: {k1_ok}"),
    )
}

fn chernoff_structure() -> Outcome {
    let table = DivergenceTable::new(vec![1.0; 4], vec![5.0; 4]).unwrap();
    let actions: Arc<[Vec<usize>]> = subsets::k_subsets(4, 1).into();
    let mut homogeneous_ok = true;
    for m in 0..4 {
        let q = chernoff::solve_maximin(&table, actions.clone(), &[m]).unwrap();
        homogeneous_ok &= (q.value() - 5.0 / 3.0).abs() < 1e-6;
        for (a, w) in q.weights().iter().enumerate() {
            let expected = if a == m { 0.0 } else { 1.0 / 3.0 };
            homogeneous_ok &= (w - expected).abs() < 1e-6;
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(110);
    let mut checked = 0;
    let mut worst: f64 = 0.0;
    while checked < 500 {
        let m = rng.random_range(2..9);
        let k = rng.random_range(1..m);
        let d_gf: Vec<f64> = (0..m).map(|_| rng.random_range(0.05..5.0)).collect();
        let d_fg: Vec<f64> = (0..m).map(|_| rng.random_range(0.05..5.0)).collect();
        let table = DivergenceTable::new(d_gf, d_fg).unwrap();
        let actions: Arc<[Vec<usize>]> = subsets::k_subsets(m, k).into();
        for cell in 0..m {
            if table.optimality(cell, k).optimal {
                let q = chernoff::solve_maximin(&table, actions.clone(), &[cell]).unwrap();
                worst = worst.max((q.value() - table.i_m_star(cell, k)).abs());
                checked += 1;
            }
        }
    }
    outcome(
        homogeneous_ok && worst < 1e-6,
        format!("homogeneous q* uniform over 3 cells with value 5/3: {homogeneous_ok}; max |rate_chernoff - I*| {worst:.2e} over {checked} optimal hypotheses"),
    )
}

/// Log-likelihood of the whole history under every target set, maximized by brute force.
fn exhaustive_ml(models: &[ProcessModel], state: &SearchState, l: usize) -> Vec<usize> {
    let mut best: Option<(f64, Vec<usize>)> = None;
    for set in subsets::k_subsets(models.len(), l) {
        let mut ll = 0.0;
        for step in state.history().unwrap() {
            for (&c, &y) in step.probes.iter().zip(&step.observations) {
                let density = if set.contains(&c) {
                    models[c].present()
                } else {
                    models[c].absent()
                };
                ll += density.log_density(y).unwrap();
            }
        }
        if best.as_ref().is_none_or(|(b, _)| ll > *b) {
            best = Some((ll, set));
        }
    }
    best.unwrap().1
}

fn ml_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(111);
    let mut agree = 0;
    let total = 100;
    for h in 0..total {
        let m = rng.random_range(2..8);
        let k = rng.random_range(1..m);
        let l = if h % 2 == 0 || m < 3 { 1 } else { 2 };
        let models: Vec<ProcessModel> = (0..m)
            .map(|_| {
                if rng.random_bool(0.5) {
                    ProcessModel::new(
                        DistributionSpec::Exponential {
                            rate: rng.random_range(0.2..2.0),
                        },
                        DistributionSpec::Exponential {
                            rate: rng.random_range(2.5..6.0),
                        },
                    )
                } else {
                    ProcessModel::new(
                        DistributionSpec::Gaussian {
                            mean: 0.0,
                            variance: rng.random_range(0.5..2.0),
                        },
                        DistributionSpec::Gaussian {
                            mean: rng.random_range(0.3..2.0),
                            variance: rng.random_range(0.5..2.0),
                        },
                    )
                }
                .unwrap()
            })
            .collect();
        let truth = subsets::k_subsets(m, l)[rng.random_range(0..subsets::binomial(m, l))].clone();
        let mut state = SearchState::with_history(m).unwrap();
        for _ in 0..rng.random_range(1..15) {
            let all = subsets::k_subsets(m, k);
            let probes = all[rng.random_range(0..all.len())].clone();
            let ys: Vec<f64> = probes
                .iter()
                .map(|&c| models[c].sample(truth.contains(&c), &mut rng))
                .collect();
            state.apply_observations(&probes, &ys, &models).unwrap();
        }
        agree += (ml_set(&state, l) == exhaustive_ml(&models, &state, l)) as usize;
    }
    outcome(agree == total, format!("{agree}/{total} histories agree"))
}

fn reproducibility() -> Outcome {
    let mut identical = true;
    let mut checked = 0;
    for (cfg, kind) in [
        (
            exponential_config(5, 1, 1, 1e-2, 2000, 112),
            PolicyKind::Dgfi,
        ),
        (
            exponential_config(6, 2, 1, 1e-3, 1000, 113),
            PolicyKind::Chernoff,
        ),
        (
            exponential_config(6, 1, 2, 1e-2, 1000, 114),
            PolicyKind::Dgfi,
        ),
    ] {
        let csv = |workers: usize| {
            let r = Simulator::new(cfg.instance().unwrap(), kind, None)
                .unwrap()
                .run_experiment(cfg.trials, cfg.seed, workers)
                .unwrap();
            let mut buf = Vec::new();
            output::write_reports_csv(&mut buf, &[r], &cfg.config_hash()).unwrap();
            buf
        };
        let reference = csv(1);
        for workers in [1, 2, 7] {
            identical &= csv(workers) == reference;
            checked += 1;
        }
    }
    outcome(
        identical,
        format!("{checked} reruns byte-identical: {identical}"),
    )
}

fn main() -> ExitCode {
    let criteria: Vec<Criterion> = vec![
        ("error bound, M=5 K=1 c=1e-2", Box::new(error_bound)),
        (
            "multi-target error bound, M=6 L=2",
            Box::new(multi_target_error_bound),
        ),
        ("rate asymptotics over c", Box::new(rate_asymptotics)),
        (
            "delay ordering, K=1, M in {5,10,15}",
            Box::new(|| delay_ordering(&[(5, 1, 1), (10, 1, 1), (15, 1, 1)], 1e-3, 2000, 104)),
        ),
        (
            "delay ordering, K=2, M in {5,10,15}",
            Box::new(|| delay_ordering(&[(5, 2, 1), (10, 2, 1), (15, 2, 1)], 1e-3, 2000, 105)),
        ),
        (
            "delay ordering, L=2 K=1, M in {5,8}",
            Box::new(|| delay_ordering(&[(5, 1, 2), (8, 1, 2)], 1e-3, 2000, 106)),
        ),
        ("car-race oracle", Box::new(car_race_oracle)),
        (
            "closed-form optimal allocation",
            Box::new(optimal_allocation_closed_form),
        ),
        (
            "at most three pathological budgets",
            Box::new(pathological_budgets),
        ),
        ("Chernoff maximin structure", Box::new(chernoff_structure)),
        (
            "ML estimate equals exhaustive likelihood",
            Box::new(ml_equivalence),
        ),
        (
            "byte-identical CSV across worker counts",
            Box::new(reproducibility),
        ),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = check();
        let status = if o.pass { "PASS" } else { "FAIL" };
        failed += (!o.pass) as usize;
        println!(
            "criterion {:>2} {status}: {name}: {} [{:.1}s]",
            i + 1,
            o.detail,
            start.elapsed().as_secs_f64()
        );
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
