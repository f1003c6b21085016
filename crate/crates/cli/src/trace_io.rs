//! Trace files: CSV with a `#` comment preamble, or a JSON document.
//!
//! The CSV preamble names the method, the stop reason and the full problem
//! definition, so that a trace file is self-describing for plotting. Floats
//! are written with 17 significant digits and parse back bit-exactly.

use std::io::Write;

use crm_core::problems::Problem;
use crm_core::{ColinearityCase, Trace};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Trace as read back from disk.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceFile {
    pub method: String,
    pub stop: String,
    pub problem: Option<Problem>,
    pub rows: Vec<TraceRow>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraceRow {
    pub iter: usize,
    pub coords: Vec<f64>,
    pub residual: f64,
    pub dist_to_solution: Option<f64>,
    /// Colinearity case of the step that produced this iterate.
    pub case: Option<ColinearityCase>,
    pub used_circumcenter: Option<bool>,
}

impl TraceFile {
    /// Distance to the solution where recorded, the residual otherwise.
    pub fn error_series(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.dist_to_solution.unwrap_or(r.residual)).collect()
    }

    pub fn dim(&self) -> usize {
        self.rows.first().map_or(0, |r| r.coords.len())
    }
}

#[derive(Serialize, Deserialize)]
struct JsonTrace {
    problem: Problem,
    trace: Trace,
}

fn float(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_csv<W: Write>(out: W, problem: &Problem, trace: &Trace) -> Result<(), CliError> {
    let mut out = out;
    let problem_json = serde_json::to_string(problem).map_err(|e| CliError::Output(e.to_string()))?;
    writeln!(out, "# method: {}", trace.method)?;
    writeln!(out, "# stop: {}", trace.stop_reason)?;
    writeln!(out, "# problem-json: {problem_json}")?;

    let dim = trace.iterates[0].dim();
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["iter".to_string()];
    header.extend((0..dim).map(|k| format!("x{k}")));
    header.extend(["residual", "dist_to_solution", "case_tag", "used_circumcenter"].map(String::from));
    w.write_record(&header)?;

    for (i, x) in trace.iterates.iter().enumerate() {
        let step = i.checked_sub(1).and_then(|k| trace.step_results.get(k));
        let mut rec = vec![i.to_string()];
        rec.extend(x.coords().iter().map(|&c| float(c)));
        rec.push(float(trace.residuals[i]));
        rec.push(trace.dist_to_solution.as_ref().map(|d| float(d[i])).unwrap_or_default());
        rec.push(step.map(|s| s.case.tag().to_string()).unwrap_or_default());
        rec.push(step.map(|s| s.used_circumcenter.to_string()).unwrap_or_default());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<W: Write>(out: W, problem: &Problem, trace: &Trace) -> Result<(), CliError> {
    let doc = JsonTrace {
        problem: problem.clone(),
        trace: trace.clone(),
    };
    serde_json::to_writer_pretty(out, &doc).map_err(|e| CliError::Output(e.to_string()))
}

fn bad(msg: impl Into<String>) -> CliError {
    CliError::Input(msg.into())
}

fn parse_json(text: &str) -> Result<TraceFile, CliError> {
    let doc: JsonTrace = serde_json::from_str(text).map_err(|e| bad(e.to_string()))?;
    let t = doc.trace;
    let rows = t
        .iterates
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let step = i.checked_sub(1).and_then(|k| t.step_results.get(k));
            TraceRow {
                iter: i,
                coords: x.coords().to_vec(),
                residual: t.residuals.get(i).copied().unwrap_or(f64::NAN),
                dist_to_solution: t.dist_to_solution.as_ref().and_then(|d| d.get(i).copied()),
                case: step.map(|s| s.case),
                used_circumcenter: step.map(|s| s.used_circumcenter),
            }
        })
        .collect();
    Ok(TraceFile {
        method: t.method.to_string(),
        stop: t.stop_reason.to_string(),
        problem: Some(doc.problem),
        rows,
    })
}

fn parse_csv(text: &str) -> Result<TraceFile, CliError> {
    let mut method = None;
    let mut stop = String::new();
    let mut problem = None;
    let mut body = String::new();
    for line in text.lines() {
        match line.strip_prefix('#') {
            Some(comment) => {
                let (key, value) = comment.trim().split_once(':').unwrap_or((comment.trim(), ""));
                let value = value.trim();
                match key {
                    "method" => method = Some(value.to_string()),
                    "stop" => stop = value.to_string(),
                    "problem-json" => problem = Some(Problem::from_json(value).map_err(|e| bad(e.to_string()))?),
                    _ => {}
                }
            }
            None => {
                body.push_str(line);
                body.push('\n');
            }
        }
    }

    let mut r = csv::Reader::from_reader(body.as_bytes());
    let header = r.headers().map_err(|e| bad(e.to_string()))?.clone();
    let col = |name: &str| header.iter().position(|h| h == name).ok_or_else(|| bad(format!("missing column {name}")));
    let (iter_c, res_c, dist_c, case_c, used_c) = (
        col("iter")?,
        col("residual")?,
        col("dist_to_solution")?,
        col("case_tag")?,
        col("used_circumcenter")?,
    );
    let coord_cols: Vec<usize> = (0..)
        .map_while(|k| header.iter().position(|h| h == format!("x{k}")))
        .collect();
    if coord_cols.is_empty() {
        return Err(bad("no coordinate columns"));
    }

    let num = |s: &str| s.parse::<f64>().map_err(|_| bad(format!("bad number '{s}'")));
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let field = |c: usize| rec.get(c).ok_or_else(|| bad("short record"));
        let dist = field(dist_c)?;
        let case = field(case_c)?;
        let used = field(used_c)?;
        rows.push(TraceRow {
            iter: field(iter_c)?.parse().map_err(|_| bad("bad iteration index"))?,
            coords: coord_cols.iter().map(|&c| num(field(c)?)).collect::<Result<_, _>>()?,
            residual: num(field(res_c)?)?,
            dist_to_solution: if dist.is_empty() { None } else { Some(num(dist)?) },
            case: if case.is_empty() {
                None
            } else {
                Some(ColinearityCase::from_tag(case).ok_or_else(|| bad(format!("unknown case tag '{case}'")))?)
            },
            used_circumcenter: match used {
                "" => None,
                "true" => Some(true),
                "false" => Some(false),
                other => return Err(bad(format!("bad flag '{other}'"))),
            },
        });
    }
    Ok(TraceFile {
        method: method.ok_or_else(|| bad("missing '# method:' line"))?,
        stop,
        problem,
        rows,
    })
}

/// Parse a trace written by [`write_csv`] or [`write_json`].
pub fn parse_trace(text: &str) -> Result<TraceFile, CliError> {
    if text.trim_start().starts_with('{') {
        parse_json(text)
    } else {
        parse_csv(text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crm_core::problems::builtin;
    use crm_core::{Method, StopRule, Tolerances};

    fn sample() -> (Problem, Trace) {
        let p = builtin("parabola").unwrap();
        let t = p
            .solve(Method::Crm, None, &StopRule::default(), &Tolerances::default())
            .unwrap();
        (p, t)
    }

    #[test]
    fn csv_round_trip_is_bit_exact() {
        let (p, t) = sample();
        let mut buf = Vec::new();
        write_csv(&mut buf, &p, &t).unwrap();
        let f = parse_trace(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!(f.method, "crm");
        assert_eq!(f.problem.as_ref(), Some(&p));
        assert_eq!(f.rows.len(), t.iterates.len());
        for (row, x) in f.rows.iter().zip(&t.iterates) {
            let bits: Vec<u64> = row.coords.iter().map(|c| c.to_bits()).collect();
            let want: Vec<u64> = x.coords().iter().map(|c| c.to_bits()).collect();
            assert_eq!(bits, want);
        }
        assert_eq!(f.rows[0].case, None);
        assert_eq!(f.rows[1].case, Some(t.step_results[0].case));
    }

    #[test]
    fn json_round_trip() {
        let (p, t) = sample();
        let mut buf = Vec::new();
        write_json(&mut buf, &p, &t).unwrap();
        let f = parse_trace(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!(f.rows.len(), t.iterates.len());
        assert_eq!(f.rows[3].coords, t.iterates[3].coords());
    }

    #[test]
    fn malformed_input_is_rejected() {
        assert!(parse_trace("iter,x0,residual\n0,1,2\n").is_err());
        assert!(parse_trace("# method: dr\niter,x0,residual,dist_to_solution,case_tag,used_circumcenter\n0,abc,1,,,\n").is_err());
        assert!(parse_trace("{\"trace\": 3}").is_err());
    }
}
