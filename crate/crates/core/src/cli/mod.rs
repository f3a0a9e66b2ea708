//! Command implementations behind the `hpe` binary.
//!
//! Exit codes: 0 success, 1 configuration or IO error, 2 iteration budget
//! exhausted, 3 certificate rejected during a solve, 4 certification failed.

pub mod bench;
pub mod config;
pub mod trace;

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub use bench::{bench_run, bench_suite, write_csv, BenchRow, Suite};
pub use config::{OutputNames, PreparedRun, RunConfig};
pub use trace::{certify, header_for, read_trace, write_trace, CertificationReport, TraceFile, TraceHeader, TraceLine};

use crate::error::{Error, Result};
use crate::fejer::FejerMonitor;
use crate::hpe::{SolveTrace, StepMonitor};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_MAX_ITERS: i32 = 2;
pub const EXIT_REJECTED: i32 = 3;
pub const EXIT_CERTIFY_FAILED: i32 = 4;

/// Name of the report `certify` writes next to the trace.
pub const CERTIFICATION_FILE: &str = "certification.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub problem: String,
    pub method: String,
    pub termination: String,
    pub iterations: usize,
    pub final_residual: Option<f64>,
    pub x_final: Vec<f64>,
    pub distance_to_reference: Option<f64>,
    pub fejer_verdict: Option<String>,
    pub sigma: f64,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct SolveOutcome {
    pub exit_code: i32,
    pub trace_path: PathBuf,
    pub summary_path: PathBuf,
    pub summary: Summary,
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::validation(format!("{}: {e}", path.display()))
}

/// Solves one configuration and writes its trace and summary into `out_dir`.
pub fn run_solve(cfg: &RunConfig, out_dir: &Path) -> Result<SolveOutcome> {
    let run = cfg.prepare()?;
    std::fs::create_dir_all(out_dir).map_err(|e| io_err(out_dir, e))?;
    let mut monitor = run.problem.reference().cloned().map(FejerMonitor::new);
    let mut monitors: Vec<&mut dyn StepMonitor> = Vec::new();
    if let Some(m) = monitor.as_mut() {
        monitors.push(m);
    }
    let result = run.solve(&mut monitors);
    drop(monitors);
    let (trace, termination, exit_code): (SolveTrace, &str, i32) = match result {
        Ok(t) => {
            let code = match t.termination {
                crate::hpe::Termination::Converged => EXIT_OK,
                crate::hpe::Termination::MaxIters => EXIT_MAX_ITERS,
            };
            let name = t.termination.name();
            (t, name, code)
        }
        Err(Error::CertificateRejected { trace, .. }) => (*trace, "certificate_rejected", EXIT_REJECTED),
        Err(e) => return Err(e),
    };

    let trace_path = out_dir.join(&cfg.output.trace);
    let file = File::create(&trace_path).map_err(|e| io_err(&trace_path, e))?;
    write_trace(BufWriter::new(file), &header_for(&run), &trace).map_err(|e| io_err(&trace_path, e))?;

    let summary = Summary {
        problem: run.problem.name().into(),
        method: run.method.name().into(),
        termination: termination.into(),
        iterations: trace.iterations(),
        final_residual: trace.final_residual(),
        x_final: trace.x_final().as_slice().to_vec(),
        distance_to_reference: run.problem.reference().map(|r| r.dist(trace.x_final())),
        fejer_verdict: monitor.map(|m| m.report().verdict.name().to_owned()),
        sigma: run.config.sigma,
        warnings: trace.warnings.clone(),
    };
    let summary_path = out_dir.join(&cfg.output.summary);
    let text = serde_json::to_string_pretty(&summary).map_err(|e| io_err(&summary_path, e))?;
    std::fs::write(&summary_path, text).map_err(|e| io_err(&summary_path, e))?;
    Ok(SolveOutcome {
        exit_code,
        trace_path,
        summary_path,
        summary,
    })
}

pub fn cmd_solve(config_path: &Path, out_dir: &Path) -> i32 {
    let outcome = RunConfig::load(config_path).and_then(|cfg| run_solve(&cfg, out_dir));
    match outcome {
        Ok(o) => {
            for w in &o.summary.warnings {
                eprintln!("warning: {w}");
            }
            println!(
                "{} after {} iterations (trace: {})",
                o.summary.termination,
                o.summary.iterations,
                o.trace_path.display()
            );
            o.exit_code
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_CONFIG
        }
    }
}

/// Certifies a trace file and writes the report next to it.
pub fn run_certify(trace_path: &Path, cfg: &RunConfig) -> Result<CertificationReport> {
    let run = cfg.prepare()?;
    let text = std::fs::read_to_string(trace_path).map_err(|e| io_err(trace_path, e))?;
    let report = trace::certify_text(&text, &run)?;
    let out = trace_path.with_file_name(CERTIFICATION_FILE);
    let json = serde_json::to_string_pretty(&report).map_err(|e| io_err(&out, e))?;
    std::fs::write(&out, json).map_err(|e| io_err(&out, e))?;
    Ok(report)
}

pub fn cmd_certify(trace_path: &Path, config_path: &Path) -> i32 {
    match RunConfig::load(config_path).and_then(|cfg| run_certify(trace_path, &cfg)) {
        Ok(report) if report.passed => {
            println!("certified {} steps", report.steps_checked);
            EXIT_OK
        }
        Ok(report) => {
            let v = report.first_violation().expect("failed report has a violation");
            println!("certification failed at line {}: {}", v.line, v.reason);
            EXIT_CERTIFY_FAILED
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_CONFIG
        }
    }
}

pub fn cmd_bench(suite_path: &Path, out_csv: &Path) -> i32 {
    let suite = match Suite::load(suite_path) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    let rows = bench_suite(&suite);
    if let Err(e) = write_csv(out_csv, &rows) {
        eprintln!("error: {e}");
        return EXIT_CONFIG;
    }
    let failed = rows.iter().filter(|r| r.is_error()).count();
    println!("{} runs written to {}", rows.len(), out_csv.display());
    if failed > 0 {
        eprintln!("{failed} runs failed");
        EXIT_CONFIG
    } else {
        EXIT_OK
    }
}
