use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hpe::{hpe_solve, ErrorSchedule, HpeConfig, LambdaSchedule, RejectionPolicy, SolveTrace, StepMonitor};
use crate::operators::Vector;
use crate::problems::{Method, Problem, ProblemSpec};
use crate::splittings::SplitProblem;

fn default_max_iters() -> usize {
    1000
}

fn default_stop_tol() -> f64 {
    1e-8
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputNames {
    #[serde(default = "OutputNames::default_trace")]
    pub trace: String,
    #[serde(default = "OutputNames::default_summary")]
    pub summary: String,
}

impl OutputNames {
    fn default_trace() -> String {
        "trace.jsonl".into()
    }

    fn default_summary() -> String {
        "summary.json".into()
    }
}

impl Default for OutputNames {
    fn default() -> Self {
        OutputNames {
            trace: Self::default_trace(),
            summary: Self::default_summary(),
        }
    }
}

/// One solver run, as read from a JSON document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemSpec,
    pub method: Method,
    /// Starting point; all ones when omitted.
    #[serde(default)]
    pub x0: Option<Vec<f64>>,
    /// Overrides the method's default σ.
    #[serde(default)]
    pub sigma: Option<f64>,
    /// Constant or per-step list; the problem's recommended value when omitted.
    #[serde(default)]
    pub lambda: Option<LambdaSchedule>,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    #[serde(default = "default_stop_tol")]
    pub stop_tol: f64,
    #[serde(default)]
    pub errors: Option<ErrorSchedule>,
    #[serde(default)]
    pub policy: RejectionPolicy,
    #[serde(default)]
    pub output: OutputNames,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::validation(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::validation(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Builds the problem and re-validates every solver precondition.
    pub fn prepare(&self) -> Result<PreparedRun> {
        let problem = self.problem.build()?;
        problem.supports(self.method)?;
        let dim = problem.dim();
        let x0 = match &self.x0 {
            Some(c) => Vector::new(c.clone())?,
            None => Vector::from_elem(dim, 1.0),
        };
        x0.check_dim(dim)?;
        let lambda = self
            .lambda
            .clone()
            .unwrap_or_else(|| LambdaSchedule::Constant(problem.recommended_lambda(self.method)));
        lambda.validate()?;
        let (lo, hi) = lambda.bounds();
        let split = match self.method.split() {
            Some(m) => Some(problem.split_problem(m, lo, hi)?),
            None => None,
        };
        let sigma = match (self.sigma, self.method.split(), &split) {
            (Some(s), _, _) => s,
            (None, Some(m), Some(sp)) => sp.sigma(m)?,
            _ => 0.0,
        };
        let mut config = HpeConfig::new(sigma, lambda, self.max_iters, self.stop_tol)?.with_policy(self.policy);
        if let Some(e) = &self.errors {
            config = config.with_errors(e.clone())?;
        }
        Ok(PreparedRun {
            problem,
            method: self.method,
            split,
            config,
            x0,
        })
    }
}

/// A validated run: problem, oracle choice and solver configuration.
#[derive(Clone, Debug)]
pub struct PreparedRun {
    pub problem: Problem,
    pub method: Method,
    pub split: Option<SplitProblem>,
    pub config: HpeConfig,
    pub x0: Vector,
}

impl PreparedRun {
    pub fn solve(&self, monitors: &mut [&mut dyn StepMonitor]) -> Result<SolveTrace> {
        match (self.method.split(), &self.split) {
            (Some(m), Some(sp)) => hpe_solve(&sp.oracle(m)?, &self.x0, &self.config, monitors),
            _ => {
                let oracle = self.problem.exact_oracle()?;
                hpe_solve(oracle.as_ref(), &self.x0, &self.config, monitors)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_per_method() {
        let cfg = RunConfig::from_json(r#"{"problem":{"name":"rotation_vi"},"method":"korpelevich"}"#).unwrap();
        let run = cfg.prepare().unwrap();
        assert!((run.config.lambda.at(1) - 0.9).abs() < 1e-14);
        assert!((run.config.sigma - 0.9).abs() < 1e-14);
        assert_eq!(run.x0.as_slice(), &[1.0, 1.0]);

        let cfg = RunConfig::from_json(r#"{"problem":{"name":"quadratic_l1","b":[3],"w":1},"method":"fb","lambda":1.5}"#)
            .unwrap();
        let run = cfg.prepare().unwrap();
        assert!((run.config.sigma - (0.75f64).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn preconditions_revalidated() {
        let fb_rot = RunConfig::from_json(r#"{"problem":{"name":"rotation_vi"},"method":"fb"}"#).unwrap();
        assert!(fb_rot.prepare().is_err());
        let big = RunConfig::from_json(r#"{"problem":{"name":"rotation_vi"},"method":"tseng","lambda":1.0}"#).unwrap();
        assert!(big.prepare().is_err());
        let bad_sigma =
            RunConfig::from_json(r#"{"problem":{"name":"rotation_vi"},"method":"tseng","sigma":1.0}"#).unwrap();
        assert!(bad_sigma.prepare().is_err());
        assert!(RunConfig::from_json(r#"{"problem":{"name":"rotation_vi"},"method":"tseng","typo":1}"#).is_err());
    }
}
