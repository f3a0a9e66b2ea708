use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::cli::config::RunConfig;
use crate::error::{Error, Result};
use crate::fejer::FejerMonitor;
use crate::hpe::StepMonitor;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Suite {
    pub runs: Vec<RunConfig>,
}

impl Suite {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::validation(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Error::validation(format!("suite: {e}")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchRow {
    pub problem: String,
    pub method: String,
    pub sigma: Option<f64>,
    pub iterations: Option<usize>,
    pub termination: String,
    pub final_residual: Option<f64>,
    pub final_distance: Option<f64>,
    pub fejer_verdict: Option<String>,
    pub wall_time_s: f64,
}

impl BenchRow {
    pub fn is_error(&self) -> bool {
        self.termination.starts_with("error")
    }
}

fn spec_name(cfg: &RunConfig) -> String {
    serde_json::to_value(&cfg.problem)
        .ok()
        .and_then(|v| v.get("name").and_then(|n| n.as_str()).map(str::to_owned))
        .unwrap_or_else(|| "unknown".into())
}

pub fn bench_run(cfg: &RunConfig) -> BenchRow {
    let start = Instant::now();
    let mut row = BenchRow {
        problem: spec_name(cfg),
        method: cfg.method.name().into(),
        sigma: None,
        iterations: None,
        termination: String::new(),
        final_residual: None,
        final_distance: None,
        fejer_verdict: None,
        wall_time_s: 0.0,
    };
    let run = match cfg.prepare() {
        Ok(r) => r,
        Err(e) => {
            row.termination = format!("error: {e}");
            row.wall_time_s = start.elapsed().as_secs_f64();
            return row;
        }
    };
    row.problem = run.problem.name().into();
    row.sigma = Some(run.config.sigma);
    let mut monitor = run.problem.reference().cloned().map(FejerMonitor::new);
    let mut monitors: Vec<&mut dyn StepMonitor> = Vec::new();
    if let Some(m) = monitor.as_mut() {
        monitors.push(m);
    }
    let result = run.solve(&mut monitors);
    drop(monitors);
    let trace = match result {
        Ok(t) => {
            row.termination = t.termination.name().into();
            Some(t)
        }
        Err(Error::CertificateRejected { trace, .. }) => {
            row.termination = "certificate_rejected".into();
            Some(*trace)
        }
        Err(e) => {
            row.termination = format!("error: {e}");
            None
        }
    };
    if let Some(t) = trace {
        row.iterations = Some(t.iterations());
        row.final_residual = t.final_residual();
        row.final_distance = run.problem.reference().map(|r| r.dist(t.x_final()));
    }
    row.fejer_verdict = monitor.map(|m| m.report().verdict.name().to_owned());
    row.wall_time_s = start.elapsed().as_secs_f64();
    row
}

pub fn bench_suite(suite: &Suite) -> Vec<BenchRow> {
    suite.runs.iter().map(bench_run).collect()
}

pub fn write_csv(path: &Path, rows: &[BenchRow]) -> Result<()> {
    let io = |e: csv::Error| Error::validation(format!("cannot write {}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    for row in rows {
        w.serialize(row).map_err(io)?;
    }
    w.flush()
        .map_err(|e| Error::validation(format!("cannot write {}: {e}", path.display())))
}
