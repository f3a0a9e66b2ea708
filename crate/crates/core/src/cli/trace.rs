//! JSON-lines trace format and replay certification.
//!
//! Line 1 is a [`TraceHeader`]; every further line is one [`TraceLine`].
//! Floats are written in shortest round-trip form, so a replay sees the
//! exact values the solver produced.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::cli::config::PreparedRun;
use crate::enlargement::Certificate;
use crate::error::Result;
use crate::fejer::{FejerMonitor, FejerReport, FejerVerdict};
use crate::hpe::{check_sigma_resolvent, SolveTrace, StepRecord};
use crate::operators::Vector;

pub const TRACE_FORMAT: &str = "hpe-trace";
pub const TRACE_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceHeader {
    pub format: String,
    pub version: u32,
    pub problem: String,
    pub method: String,
    pub dim: usize,
    pub sigma: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceLine {
    pub k: usize,
    pub lambda: f64,
    pub y: Vector,
    pub v: Vector,
    pub eps: f64,
    pub x_prev: Vector,
    pub x_next: Vector,
    pub r: Vector,
    pub lhs: f64,
    pub rhs: f64,
    pub satisfied: bool,
}

impl From<&StepRecord> for TraceLine {
    fn from(rec: &StepRecord) -> Self {
        TraceLine {
            k: rec.k,
            lambda: rec.lambda,
            y: rec.cert.y.clone(),
            v: rec.cert.v.clone(),
            eps: rec.cert.eps,
            x_prev: rec.x_prev.clone(),
            x_next: rec.x_next.clone(),
            r: rec.injected_error.clone(),
            lhs: rec.sigma_report.lhs,
            rhs: rec.sigma_report.rhs,
            satisfied: rec.sigma_report.satisfied,
        }
    }
}

pub fn header_for(run: &PreparedRun) -> TraceHeader {
    TraceHeader {
        format: TRACE_FORMAT.into(),
        version: TRACE_VERSION,
        problem: run.problem.name().into(),
        method: run.method.name().into(),
        dim: run.problem.dim(),
        sigma: run.config.sigma,
    }
}

pub fn write_trace<W: Write>(mut out: W, header: &TraceHeader, trace: &SolveTrace) -> std::io::Result<()> {
    serde_json::to_writer(&mut out, header)?;
    writeln!(out)?;
    for rec in &trace.records {
        serde_json::to_writer(&mut out, &TraceLine::from(rec))?;
        writeln!(out)?;
    }
    out.flush()
}

/// Parsed trace; `lines[i]` sits on file line `i + 2`.
#[derive(Clone, Debug)]
pub struct TraceFile {
    pub header: TraceHeader,
    pub lines: Vec<TraceLine>,
}

/// Reads a trace; unknown fields, a wrong format tag or version are errors
/// reported with their 1-based line number.
pub fn read_trace<R: BufRead>(input: R) -> std::result::Result<TraceFile, (usize, String)> {
    let mut lines = input.lines().enumerate();
    let header: TraceHeader = match lines.next() {
        Some((_, Ok(text))) => serde_json::from_str(&text).map_err(|e| (1, format!("header: {e}")))?,
        Some((_, Err(e))) => return Err((1, e.to_string())),
        None => return Err((1, "empty trace".into())),
    };
    if header.format != TRACE_FORMAT || header.version != TRACE_VERSION {
        return Err((
            1,
            format!(
                "unsupported trace {} v{} (expected {TRACE_FORMAT} v{TRACE_VERSION})",
                header.format, header.version
            ),
        ));
    }
    let mut parsed = Vec::new();
    for (i, line) in lines {
        let text = line.map_err(|e| (i + 1, e.to_string()))?;
        if text.trim().is_empty() {
            continue;
        }
        parsed.push(serde_json::from_str(&text).map_err(|e| (i + 1, e.to_string()))?);
    }
    Ok(TraceFile { header, lines: parsed })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    /// 1-based line in the trace file.
    pub line: usize,
    pub step: Option<usize>,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertificationReport {
    pub passed: bool,
    pub steps_checked: usize,
    pub violations: Vec<Violation>,
    pub fejer: Option<FejerReport>,
}

impl CertificationReport {
    pub fn first_violation(&self) -> Option<&Violation> {
        self.violations.first()
    }
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * (1.0 + a.abs().max(b.abs()))
}

/// Replays a trace against the configuration it claims to come from.
///
/// Per line: step size matches the schedule, `ε ≥ 0`, the recorded σ-report
/// matches a recomputation and is satisfied, `x_next = x_prev - λv + r`, and
/// consecutive lines chain. With a reference solution the Fejér report must
/// not be violated.
pub fn certify(trace: &TraceFile, run: &PreparedRun) -> CertificationReport {
    let mut violations = Vec::new();
    let expected = header_for(run);
    let h = &trace.header;
    if h.problem != expected.problem || h.method != expected.method || h.dim != expected.dim {
        violations.push(Violation {
            line: 1,
            step: None,
            reason: format!(
                "header describes {}/{} in dimension {}, config gives {}/{} in dimension {}",
                h.problem, h.method, h.dim, expected.problem, expected.method, expected.dim
            ),
        });
    }
    if !close(h.sigma, expected.sigma, 1e-15) {
        violations.push(Violation {
            line: 1,
            step: None,
            reason: format!("header sigma {} differs from configured {}", h.sigma, expected.sigma),
        });
    }
    let sigma = expected.sigma;
    let mut fejer = run.problem.reference().cloned().map(FejerMonitor::new);
    let mut prev_next: Option<&Vector> = None;
    let mut steps_checked = 0;

    for (i, line) in trace.lines.iter().enumerate() {
        let lineno = i + 2;
        let step = Some(line.k);
        let mut fail = |reason: String| violations.push(Violation { line: lineno, step, reason });
        steps_checked += 1;

        let dims_ok = [&line.y, &line.v, &line.x_prev, &line.x_next, &line.r]
            .iter()
            .all(|x| x.dim() == expected.dim);
        if !dims_ok {
            fail("vector dimension does not match the problem".into());
            continue;
        }
        if line.k != i + 1 {
            fail(format!("step index {} out of sequence (expected {})", line.k, i + 1));
        }
        let scheduled = run.config.lambda.at(i + 1);
        if !close(line.lambda, scheduled, 1e-15) {
            fail(format!("lambda {} differs from scheduled {scheduled}", line.lambda));
        }
        let start = prev_next.unwrap_or(&run.x0);
        if line.x_prev.max_abs_diff(start) > 1e-15 * (1.0 + start.norm()) {
            fail("x_prev does not continue from the previous iterate".into());
        }
        if !(line.eps >= 0.0) {
            fail(format!("eps = {:e} violates eps >= 0", line.eps));
            prev_next = Some(&line.x_next);
            continue;
        }
        let cert = Certificate {
            y: line.y.clone(),
            v: line.v.clone(),
            eps: line.eps,
        };
        let report = match check_sigma_resolvent(&line.x_prev, line.lambda, sigma, &cert) {
            Ok(r) => r,
            Err(e) => {
                fail(e.to_string());
                prev_next = Some(&line.x_next);
                continue;
            }
        };
        if !close(report.lhs, line.lhs, 1e-12) || !close(report.rhs, line.rhs, 1e-12) {
            fail(format!(
                "recorded (lhs, rhs) = ({:e}, {:e}) but replay gives ({:e}, {:e})",
                line.lhs, line.rhs, report.lhs, report.rhs
            ));
        }
        if !report.satisfied || !line.satisfied {
            fail(format!(
                "sigma inequality fails: lhs {:e} > rhs {:e}",
                report.lhs, report.rhs
            ));
        }
        let replayed = line
            .x_prev
            .sub_scaled(line.lambda, &line.v)
            .zip_map(&line.r, |a, r| a + r);
        let scale = 1.0 + line.x_prev.norm() + line.lambda * line.v.norm() + line.r.norm();
        if replayed.max_abs_diff(&line.x_next) > 1e-12 * scale {
            fail("x_next != x_prev - lambda*v + r".into());
        }
        if let Some(monitor) = fejer.as_mut() {
            let record = StepRecord {
                k: line.k,
                lambda: line.lambda,
                cert,
                x_prev: line.x_prev.clone(),
                x_next: line.x_next.clone(),
                injected_error: line.r.clone(),
                sigma_report: report,
            };
            crate::hpe::StepMonitor::observe(monitor, &record);
        }
        prev_next = Some(&line.x_next);
    }

    let fejer = fejer.map(|m| m.report());
    if let Some(rep) = &fejer {
        if rep.verdict == FejerVerdict::Violated {
            let step = rep.first_violation.expect("violated report names a step");
            violations.push(Violation {
                line: step + 1,
                step: Some(step),
                reason: "distance to the reference solution grows beyond the injected error".into(),
            });
        }
    }
    violations.sort_by_key(|v| v.line);
    CertificationReport {
        passed: violations.is_empty(),
        steps_checked,
        violations,
        fejer,
    }
}

/// Parses a trace from text and certifies it.
pub fn certify_text(text: &str, run: &PreparedRun) -> Result<CertificationReport> {
    match read_trace(text.as_bytes()) {
        Ok(file) => Ok(certify(&file, run)),
        Err((line, reason)) => Ok(CertificationReport {
            passed: false,
            steps_checked: 0,
            violations: vec![Violation { line, step: None, reason }],
            fejer: None,
        }),
    }
}
