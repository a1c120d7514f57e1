//! CSV layouts for traces (`path,N,epsilon,beta,status,J,x_1..x_n,t,margin,ms`)
//! and per-N aggregates. Floats use the shortest round-trip representation;
//! missing values are empty fields.

use std::io::{Read, Write};

use super::{ConsistencyReport, ExperimentMode, ExperimentTrace};
use crate::error::{check_len, invalid, Result};
use crate::solvers::SolveStatus;

fn num(v: f64) -> String {
    if v.is_finite() {
        v.to_string()
    } else {
        String::new()
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

pub fn write_traces_csv<W: Write>(traces: &[ExperimentTrace], n_vars: usize, writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = ["path", "N", "epsilon", "beta", "status", "J"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend((1..=n_vars).map(|k| format!("x_{k}")));
    header.extend(["t", "margin", "ms"].iter().map(|s| s.to_string()));
    wtr.write_record(&header)?;
    for t in traces {
        let mut row = vec![
            t.path.to_string(),
            t.n.to_string(),
            num(t.epsilon),
            num(t.beta),
            t.status.as_str().to_string(),
            num(t.value),
        ];
        for k in 0..n_vars {
            row.push(t.x.get(k).copied().map(num).unwrap_or_default());
        }
        row.push(opt(t.t));
        row.push(num(t.margin));
        row.push(num(t.ms));
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}

fn parse_status(s: &str) -> Result<SolveStatus> {
    match s {
        "Optimal" => Ok(SolveStatus::Optimal),
        "Infeasible" => Ok(SolveStatus::Infeasible),
        "NumericalFailure" => Ok(SolveStatus::NumericalFailure),
        other => Err(invalid(format!("unknown status `{other}` in traces"))),
    }
}

/// Reads traces written by [`write_traces_csv`], tagging them with `mode`.
pub fn read_traces_csv<R: Read>(reader: R, mode: ExperimentMode) -> Result<Vec<ExperimentTrace>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let headers = rdr.headers()?.clone();
    let fixed = ["path", "N", "epsilon", "beta", "status", "J"];
    if headers.len() < fixed.len() + 3 || headers.iter().zip(fixed).any(|(h, f)| h != f) {
        return Err(invalid(
            "traces CSV header must start with path,N,epsilon,beta,status,J",
        ));
    }
    let n_vars = headers.len() - fixed.len() - 3;
    let mut out = Vec::new();
    for (line, record) in rdr.records().enumerate() {
        let record = record?;
        check_len("traces row width", headers.len(), record.len())?;
        let f = |i: usize| -> Result<f64> {
            let s = &record[i];
            if s.is_empty() {
                return Ok(f64::NAN);
            }
            s.parse()
                .map_err(|_| invalid(format!("traces row {}: cannot parse `{s}`", line + 2)))
        };
        let u = |i: usize| -> Result<usize> {
            record[i]
                .parse()
                .map_err(|_| invalid(format!("traces row {}: cannot parse `{}`", line + 2, &record[i])))
        };
        let status = parse_status(&record[4])?;
        let x: Vec<f64> = if status == SolveStatus::Optimal {
            (0..n_vars).map(|k| f(6 + k)).collect::<Result<_>>()?
        } else {
            Vec::new()
        };
        let t = f(6 + n_vars)?;
        out.push(ExperimentTrace {
            mode,
            path: u(0)?,
            n: u(1)?,
            epsilon: f(2)?,
            beta: f(3)?,
            status,
            value: f(5)?,
            x,
            t: (!t.is_nan()).then_some(t),
            margin: f(7 + n_vars)?,
            ms: f(8 + n_vars)?,
        });
    }
    Ok(out)
}

/// Per-N aggregates, one row per sample size, for external plotting.
pub fn write_aggregates_csv<W: Write>(report: &ConsistencyReport, writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record([
        "N",
        "epsilon",
        "beta",
        "optimal",
        "failed",
        "fraction_above",
        "median_value_error",
        "p90_value_error",
        "median_x_error",
        "uniform_gap",
        "gap_bound",
        "w1_to_truth",
    ])?;
    for s in &report.per_n {
        wtr.write_record([
            s.n.to_string(),
            num(s.epsilon),
            num(s.beta),
            s.optimal.to_string(),
            s.failed.to_string(),
            num(s.fraction_above),
            num(s.median_value_error),
            num(s.p90_value_error),
            num(s.median_x_error),
            opt(s.uniform_gap),
            opt(s.gap_bound),
            opt(s.w1_to_truth),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let traces = vec![
            ExperimentTrace {
                mode: ExperimentMode::Drrcp,
                path: 0,
                n: 50,
                epsilon: 0.395_6,
                beta: 4e-4,
                status: SolveStatus::Optimal,
                value: -0.5,
                x: vec![0.5],
                t: Some(0.25),
                margin: -0.1,
                ms: 0.0,
            },
            ExperimentTrace {
                mode: ExperimentMode::Drrcp,
                path: 1,
                n: 50,
                epsilon: 0.395_6,
                beta: 4e-4,
                status: SolveStatus::Infeasible,
                value: f64::NAN,
                x: vec![],
                t: None,
                margin: f64::NAN,
                ms: 0.0,
            },
        ];
        let mut buf = Vec::new();
        write_traces_csv(&traces, 1, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("path,N,epsilon,beta,status,J,x_1,t,margin,ms\n"));
        assert!(text.contains("1,50,0.3956,0.0004,Infeasible,,,,,0\n"));
        let back = read_traces_csv(buf.as_slice(), ExperimentMode::Drrcp).unwrap();
        assert_eq!(back[0], traces[0]);
        assert!(back[1].value.is_nan() && back[1].t.is_none());
    }
}
