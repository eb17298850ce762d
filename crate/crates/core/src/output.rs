//! CSV and JSON writers with stable number formatting.
//!
//! Every float is rounded to 10 significant digits and then printed in the
//! shortest form that reads back to the rounded value, so the same numbers
//! always produce the same bytes. Cells are written 1-based.

use std::io::Write;

use serde::Serialize;

use crate::chernoff::ChernoffPolicy;
use crate::error::{Error, Result};
use crate::harness::{ExperimentReport, SweepPoint, TraceRow};
use crate::rates::RateReport;

pub const REPORT_COLUMNS: [&str; 15] = [
    "policy",
    "M",
    "K",
    "L",
    "c",
    "seed",
    "trials",
    "pe_hat",
    "pe_bound",
    "mean_tau",
    "tau_ci95",
    "bayes_risk",
    "rate_I",
    "rate_Istar",
    "truncation_rate",
];

/// Round to 10 significant digits, then shortest round-trip text.
pub fn format_float(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return if x.is_nan() {
            "NaN".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let rounded: f64 = format!("{x:.9e}").parse().expect("valid float text");
    let magnitude = rounded.abs();
    if (1e-6..1e15).contains(&magnitude) {
        format!("{rounded}")
    } else {
        format!("{rounded:e}")
    }
}

fn report_fields(r: &ExperimentReport) -> Vec<String> {
    vec![
        r.policy.name().to_string(),
        r.m.to_string(),
        r.k.to_string(),
        r.l.to_string(),
        format_float(r.c),
        r.seed.to_string(),
        r.trials.to_string(),
        format_float(r.pe_hat),
        format_float(r.pe_bound),
        format_float(r.mean_tau),
        format_float(r.tau_ci95),
        format_float(r.bayes_risk),
        format_float(r.rate_i),
        format_float(r.rate_istar),
        format_float(r.truncation_rate),
    ]
}

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(e) => Error::Io(e),
        other => Error::Io(std::io::Error::other(format!("{other:?}"))),
    }
}

fn write_row<W: Write>(out: &mut csv::Writer<W>, fields: &[String]) -> Result<()> {
    out.write_record(fields).map_err(csv_error)
}

fn finish<W: Write>(mut out: csv::Writer<W>) -> Result<()> {
    out.flush()?;
    Ok(())
}

/// The fixed report columns followed by `config_hash`.
pub fn write_reports_csv<W: Write>(
    out: &mut W,
    reports: &[ExperimentReport],
    config_hash: &str,
) -> Result<()> {
    let mut out = csv::Writer::from_writer(out);
    let mut header: Vec<String> = REPORT_COLUMNS.iter().map(|s| s.to_string()).collect();
    header.push("config_hash".into());
    write_row(&mut out, &header)?;
    for r in reports {
        let mut fields = report_fields(r);
        fields.push(config_hash.to_string());
        write_row(&mut out, &fields)?;
    }
    finish(out)
}

/// Report columns, the two asymptotic ratios, then `config_hash`.
pub fn write_sweep_csv<W: Write>(
    out: &mut W,
    points: &[SweepPoint],
    config_hash: &str,
) -> Result<()> {
    let mut out = csv::Writer::from_writer(out);
    let mut header: Vec<String> = REPORT_COLUMNS.iter().map(|s| s.to_string()).collect();
    header.extend(["delay_ratio", "risk_ratio", "config_hash"].map(String::from));
    write_row(&mut out, &header)?;
    for p in points {
        let mut fields = report_fields(&p.report);
        fields.push(format_float(p.delay_ratio));
        fields.push(format_float(p.risk_ratio));
        fields.push(config_hash.to_string());
        write_row(&mut out, &fields)?;
    }
    finish(out)
}

/// Per-cell rate table; `chernoff` adds the maximin value of each cell.
pub fn write_rates_csv<W: Write>(
    out: &mut W,
    report: &RateReport,
    priors: &[f64],
    chernoff: Option<&ChernoffPolicy>,
) -> Result<()> {
    let mut out = csv::Writer::from_writer(out);
    let mut header = vec![
        "cell", "d_gf", "d_fg", "f_bar", "k_tilde", "i_m_dgfi", "u_star", "i_m_star", "optimal",
    ];
    // Per-cell Chernoff values and priors only exist when hypotheses are cells.
    let single = report.l == 1;
    if single {
        if chernoff.is_some() {
            header.push("rate_chernoff");
        }
        header.push("prior");
    }
    write_row(
        &mut out,
        &header.iter().map(|s| s.to_string()).collect::<Vec<_>>(),
    )?;
    for (i, c) in report.cells.iter().enumerate() {
        let mut fields = vec![
            c.cell.to_string(),
            format_float(c.d_gf),
            format_float(c.d_fg),
            format_float(c.f_bar),
            format_float(c.k_tilde),
            format_float(c.i_m_dgfi),
            format_float(c.u_star),
            format_float(c.i_m_star),
            c.verdict.optimal.to_string(),
        ];
        if single {
            if let Some(p) = chernoff {
                fields.push(format_float(p.rate_chernoff(i)));
            }
            fields.push(format_float(priors[i]));
        }
        write_row(&mut out, &fields)?;
    }
    finish(out)
}

/// One oracle comparison row.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleRow {
    /// 1-based cell whose complement forms the cars.
    pub m: usize,
    pub kappa: usize,
    pub f_kappa: f64,
    pub car_oracle: f64,
    pub rel_err: f64,
}

pub fn write_oracle_csv<W: Write>(out: &mut W, rows: &[OracleRow]) -> Result<()> {
    let mut out = csv::Writer::from_writer(out);
    write_row(
        &mut out,
        &["m", "kappa", "f_kappa", "car_oracle", "rel_err"].map(String::from),
    )?;
    for r in rows {
        write_row(
            &mut out,
            &[
                r.m.to_string(),
                r.kappa.to_string(),
                format_float(r.f_kappa),
                format_float(r.car_oracle),
                format_float(r.rel_err),
            ],
        )?;
    }
    finish(out)
}

/// `trial,n,probes,S_1..S_M` with probes joined by `;`.
pub fn write_trace_csv<W: Write>(out: &mut W, cells: usize, rows: &[TraceRow]) -> Result<()> {
    let mut out = csv::Writer::from_writer(out);
    let mut header = vec!["trial".to_string(), "n".into(), "probes".into()];
    header.extend((1..=cells).map(|m| format!("S_{m}")));
    write_row(&mut out, &header)?;
    for r in rows {
        let probes: Vec<String> = r.probes.iter().map(|c| (c + 1).to_string()).collect();
        let mut fields = vec![r.trial.to_string(), r.n.to_string(), probes.join(";")];
        fields.extend(r.sums.iter().map(|&s| format_float(s)));
        write_row(&mut out, &fields)?;
    }
    finish(out)
}

/// Pretty JSON followed by a newline.
pub fn write_json<W: Write, T: Serialize + ?Sized>(out: &mut W, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(&mut *out, value)?;
    writeln!(out)?;
    Ok(())
}

/// JSON view of one maximin distribution with 1-based actions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChernoffEntry {
    pub hypothesis: Vec<usize>,
    pub value: f64,
    /// Only actions with positive weight.
    pub actions: Vec<Vec<usize>>,
    pub weights: Vec<f64>,
}

pub fn chernoff_entries(policy: &ChernoffPolicy, hypotheses: &[Vec<usize>]) -> Vec<ChernoffEntry> {
    policy
        .distributions()
        .iter()
        .zip(hypotheses)
        .map(|(d, h)| {
            let (actions, weights) = d
                .actions()
                .iter()
                .zip(d.weights())
                .filter(|(_, &w)| w > 0.0)
                .map(|(a, &w)| (a.iter().map(|c| c + 1).collect(), w))
                .unzip();
            ChernoffEntry {
                hypothesis: h.iter().map(|c| c + 1).collect(),
                value: d.value(),
                actions,
                weights,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::PolicyKind;

    #[test]
    fn float_formatting() {
        assert_eq!(format_float(0.0), "0");
        assert_eq!(format_float(-0.0), "0");
        assert_eq!(format_float(3.0), "3");
        assert_eq!(format_float(0.04), "0.04");
        assert_eq!(format_float(1.0 / 3.0), "0.3333333333");
        assert_eq!(format_float(2.0 / 3.0), "0.6666666667");
        assert_eq!(format_float(123456.789012345), "123456.789");
        assert_eq!(format_float(1e-7), "1e-7");
        assert_eq!(format_float(1.5e20), "1.5e20");
        assert_eq!(format_float(0.1 + 0.2), "0.3");
        assert_eq!(format_float(f64::INFINITY), "inf");
    }

    #[test]
    fn formatted_values_read_back() {
        for x in [0.123456789012, 7.25e-5, 42.0, 9.99999999999, 1e14] {
            let s = format_float(x);
            let back: f64 = s.parse().unwrap();
            assert!((back - x).abs() <= 1e-9 * x.abs(), "{x} -> {s}");
            assert_eq!(format_float(back), s);
        }
    }

    fn report() -> ExperimentReport {
        ExperimentReport {
            policy: PolicyKind::Dgfi,
            m: 5,
            k: 1,
            l: 1,
            c: 0.01,
            seed: 3,
            trials: 10,
            max_horizon: 100,
            pe_hat: 0.1,
            pe_bound: 0.04,
            mean_tau: 12.5,
            tau_ci95: 0.25,
            bayes_risk: 0.225,
            rate_i: 1.0 / 3.0,
            rate_istar: 0.5,
            truncation_rate: 0.0,
            prior_weighted_tau: 12.5,
            per_hypothesis: Vec::new(),
        }
    }

    #[test]
    fn report_csv_golden() {
        let mut buf = Vec::new();
        write_reports_csv(&mut buf, &[report()], "00ff00ff00ff00ff").unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "policy,M,K,L,c,seed,trials,pe_hat,pe_bound,mean_tau,tau_ci95,bayes_risk,rate_I,rate_Istar,truncation_rate,config_hash\n\
             dgfi,5,1,1,0.01,3,10,0.1,0.04,12.5,0.25,0.225,0.3333333333,0.5,0,00ff00ff00ff00ff\n"
        );
    }

    #[test]
    fn trace_csv_golden() {
        let rows = vec![TraceRow {
            trial: 0,
            n: 1,
            probes: vec![0, 2],
            sums: vec![0.5, 0.0, -1.25],
        }];
        let mut buf = Vec::new();
        write_trace_csv(&mut buf, 3, &rows).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "trial,n,probes,S_1,S_2,S_3\n0,1,1;3,0.5,0,-1.25\n"
        );
    }
}
