//! `anomaly-search`: run, compare and analyze active-search policies from a
//! JSON experiment config.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 invalid configuration or
//! usage, 3 truncation rate above `--max-truncation-rate`.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anomaly_search::chernoff::ChernoffPolicy;
use anomaly_search::config::ExperimentConfig;
use anomaly_search::harness::{self, ExperimentReport, PolicyKind, Simulator, SweepPoint};
use anomaly_search::output::{self, OracleRow};
use anomaly_search::rates::car_oracle;
use anomaly_search::Error;
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

#[derive(Parser, Debug)]
#[command(
    name = "anomaly-search",
    version,
    about = "Active search for anomalous processes"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Experiment config (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Overrides the config's policy.
    #[arg(long, global = true, value_enum)]
    policy: Option<PolicyArg>,

    /// Overrides the config's trial count.
    #[arg(long, global = true)]
    trials: Option<usize>,

    /// Overrides the config's base seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output file; stdout when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads (0 = all cores). Results do not depend on it.
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,

    /// Write the per-step trace of every trial to `<out>.trace.csv`.
    #[arg(long, global = true)]
    trace: bool,

    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,

    /// Exit with status 3 when any run truncates more often than this.
    #[arg(long, global = true, default_value_t = 1e-4)]
    max_truncation_rate: f64,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one policy and report error probability, delay and Bayes risk.
    Simulate,
    /// Run DGFi and the Chernoff test on the same instance and seeds.
    Compare,
    /// Rate functions per cell, aggregate rates and Chernoff maximin values.
    Rates,
    /// Optimality verdicts for every probe budget and the pathological budgets.
    CheckOptimality,
    /// Compare the simulated "cars and drivers" speed with the closed form.
    Oracle {
        #[arg(long, default_value_t = 100_000)]
        horizon: u64,
    },
    /// Run the config's sweep over `c` or `M`.
    Sweep,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum PolicyArg {
    Dgfi,
    Chernoff,
}

impl From<PolicyArg> for PolicyKind {
    fn from(p: PolicyArg) -> Self {
        match p {
            PolicyArg::Dgfi => PolicyKind::Dgfi,
            PolicyArg::Chernoff => PolicyKind::Chernoff,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

enum Failure {
    Config(String),
    Truncation(String),
    Other(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config { .. } | Error::Parse { .. } => Failure::Config(e.to_string()),
            other => Failure::Other(other.to_string()),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Other(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Truncation(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
        Err(Failure::Other(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn load(cli: &Cli) -> Result<ExperimentConfig, Failure> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Failure::Config("--config is required".into()))?;
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut config = ExperimentConfig::from_json_str(&text)?;
    if let Some(p) = cli.policy {
        config.policy = p.into();
    }
    if let Some(t) = cli.trials {
        config.trials = t;
    }
    if let Some(s) = cli.seed {
        config.seed = s;
    }
    config.trace |= cli.trace;
    config.validate()?;
    Ok(config)
}

fn run(cli: &Cli) -> Result<(), Failure> {
    if cli.max_truncation_rate.is_nan() || cli.max_truncation_rate < 0.0 {
        return Err(Failure::Config(
            "--max-truncation-rate must be nonnegative".into(),
        ));
    }
    let config = load(cli)?;
    match &cli.command {
        Command::Simulate => simulate(cli, &config),
        Command::Compare => compare(cli, &config),
        Command::Rates => rates(cli, &config),
        Command::CheckOptimality => check_optimality(cli, &config),
        Command::Oracle { horizon } => oracle(cli, &config, *horizon),
        Command::Sweep => sweep(cli, &config),
    }
}

fn open_out(cli: &Cli) -> Result<Box<dyn Write>, Failure> {
    Ok(match &cli.out {
        Some(path) => Box::new(BufWriter::new(File::create(path)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn trace_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".trace.csv");
    PathBuf::from(name)
}

fn check_truncation(cli: &Cli, reports: &[&ExperimentReport]) -> Result<(), Failure> {
    for r in reports {
        if r.truncation_rate > cli.max_truncation_rate {
            return Err(Failure::Truncation(format!(
                "{} at M = {}, c = {}: truncation rate {} exceeds {} (max_horizon = {})",
                r.policy, r.m, r.c, r.truncation_rate, cli.max_truncation_rate, r.max_horizon
            )));
        }
    }
    Ok(())
}

fn run_policy(
    cli: &Cli,
    config: &ExperimentConfig,
    kind: PolicyKind,
) -> Result<ExperimentReport, Failure> {
    let sim = Simulator::new(config.instance()?, kind, config.max_horizon)?;
    if !config.trace {
        return Ok(sim.run_experiment(config.trials, config.seed, cli.workers)?);
    }
    let out = cli
        .out
        .as_ref()
        .ok_or_else(|| Failure::Config("tracing needs --out to name the trace file".into()))?;
    let (report, rows) = sim.run_experiment_traced(config.trials, config.seed, cli.workers)?;
    let mut path = trace_path(out);
    if matches!(cli.command, Command::Compare) {
        path.set_extension(format!("{kind}.csv"));
    }
    let mut w = BufWriter::new(File::create(path)?);
    output::write_trace_csv(&mut w, report.m, &rows)?;
    w.flush()?;
    Ok(report)
}

fn write_reports(
    cli: &Cli,
    config: &ExperimentConfig,
    reports: &[ExperimentReport],
) -> Result<(), Failure> {
    let mut out = open_out(cli)?;
    match cli.format {
        Format::Csv => output::write_reports_csv(&mut out, reports, &config.config_hash())?,
        Format::Json => output::write_json(
            &mut out,
            &json!({ "config_hash": config.config_hash(), "reports": reports }),
        )?,
    }
    out.flush()?;
    check_truncation(cli, &reports.iter().collect::<Vec<_>>())
}

fn simulate(cli: &Cli, config: &ExperimentConfig) -> Result<(), Failure> {
    let report = run_policy(cli, config, config.policy)?;
    write_reports(cli, config, &[report])
}

fn compare(cli: &Cli, config: &ExperimentConfig) -> Result<(), Failure> {
    let reports = [PolicyKind::Dgfi, PolicyKind::Chernoff]
        .into_iter()
        .map(|kind| run_policy(cli, config, kind))
        .collect::<Result<Vec<_>, _>>()?;
    write_reports(cli, config, &reports)
}

fn rates(cli: &Cli, config: &ExperimentConfig) -> Result<(), Failure> {
    let inst = config.instance()?;
    let report = inst.rate_report();
    let chernoff = ChernoffPolicy::new(&inst)?;
    let mut out = open_out(cli)?;
    match cli.format {
        Format::Csv => {
            output::write_rates_csv(&mut out, &report, inst.prior().weights(), Some(&chernoff))?
        }
        Format::Json => {
            let mut value = json!({
                "config_hash": config.config_hash(),
                "rates": report,
                "rate_chernoff": chernoff.aggregate_rate(),
            });
            if config.policy == PolicyKind::Chernoff {
                value["chernoff"] = json!(output::chernoff_entries(
                    &chernoff,
                    inst.prior().hypotheses()
                ));
            }
            output::write_json(&mut out, &value)?;
        }
    }
    out.flush()?;
    Ok(())
}

fn check_optimality(cli: &Cli, config: &ExperimentConfig) -> Result<(), Failure> {
    let inst = config.instance()?;
    let table = inst.table();
    let m = inst.cells();
    let pathological = table.pathological_k();
    let mut out = open_out(cli)?;
    match cli.format {
        Format::Csv => {
            writeln!(
                out,
                "K,cell,k_tilde,target_fast,balanced,saturated,optimal,pathological_K"
            )?;
            for k in 1..m {
                for cell in 0..m {
                    let v = table.optimality(cell, k);
                    writeln!(
                        out,
                        "{k},{},{},{},{},{},{},{}",
                        cell + 1,
                        output::format_float(table.k_tilde(cell)),
                        v.target_fast,
                        v.balanced,
                        v.saturated,
                        v.optimal,
                        pathological.contains(&k)
                    )?;
                }
            }
        }
        Format::Json => {
            let verdicts: Vec<_> = (1..m)
                .map(|k| {
                    json!({
                        "K": k,
                        "optimal_per_cell": table.optimality_check(k),
                    })
                })
                .collect();
            output::write_json(
                &mut out,
                &json!({ "pathological_K": pathological, "verdicts": verdicts }),
            )?;
        }
    }
    out.flush()?;
    Ok(())
}

fn oracle(cli: &Cli, config: &ExperimentConfig, horizon: u64) -> Result<(), Failure> {
    let inst = config.instance()?;
    let table = inst.table();
    let m = inst.cells();
    let mut rows = Vec::new();
    for cell in 0..m {
        let speeds: Vec<f64> = (0..m)
            .filter(|&j| j != cell)
            .map(|j| table.d_fg(j))
            .collect();
        for kappa in 1..m {
            let expected = table.f_kappa(cell, kappa as f64);
            let simulated = car_oracle(&speeds, kappa, horizon)?;
            rows.push(OracleRow {
                m: cell + 1,
                kappa,
                f_kappa: expected,
                car_oracle: simulated,
                rel_err: (simulated - expected).abs() / expected,
            });
        }
    }
    let mut out = open_out(cli)?;
    match cli.format {
        Format::Csv => output::write_oracle_csv(&mut out, &rows)?,
        Format::Json => output::write_json(&mut out, &rows)?,
    }
    out.flush()?;
    Ok(())
}

fn sweep(cli: &Cli, config: &ExperimentConfig) -> Result<(), Failure> {
    if config.sweep.is_none() {
        return Err(Failure::Config("the config has no `sweep` section".into()));
    }
    if config.trace {
        return Err(Failure::Config(
            "tracing is not available for sweeps".into(),
        ));
    }
    let instances = config.sweep_instances()?;
    let points: Vec<SweepPoint> = harness::sweep(
        &instances,
        config.policy,
        config.trials,
        config.seed,
        cli.workers,
        config.max_horizon,
    )?;
    let mut out = open_out(cli)?;
    match cli.format {
        Format::Csv => output::write_sweep_csv(&mut out, &points, &config.config_hash())?,
        Format::Json => output::write_json(
            &mut out,
            &json!({ "config_hash": config.config_hash(), "points": points }),
        )?,
    }
    out.flush()?;
    check_truncation(cli, &points.iter().map(|p| &p.report).collect::<Vec<_>>())
}
