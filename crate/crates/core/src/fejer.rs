//! Runtime monitors for Fejér and quasi-Fejér monotonicity.
//!
//! Only per-step inequalities are checked here. The asymptotic property
//! (vanishing progress forces limit points into the solution set) cannot be
//! certified from a finite trace; [`p2_counterexample`] ships an explicit map
//! that is Fejér convergent yet violates it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hpe::{SolveTrace, StepMonitor, StepRecord};
use crate::operators::Vector;

/// Slack tolerance for a step starting at distance `d_prev`.
pub fn tol_fejer(d_prev: f64) -> f64 {
    1e-9 * (1.0 + d_prev)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FejerVerdict {
    Fejer,
    QuasiFejer,
    Violated,
}

impl FejerVerdict {
    pub fn name(self) -> &'static str {
        match self {
            FejerVerdict::Fejer => "fejer",
            FejerVerdict::QuasiFejer => "quasi_fejer",
            FejerVerdict::Violated => "violated",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FejerReport {
    /// `d_0, d_1, …` with `d_k = ‖x* - x_k‖`.
    pub distances: Vec<f64>,
    /// `(d_{k-1} + ρ_k) - d_k`
    pub slacks: Vec<f64>,
    pub min_slack: f64,
    pub rho_partial_sum: f64,
    pub verdict: FejerVerdict,
    /// 1-based step of the first violation.
    pub first_violation: Option<usize>,
}

/// Incremental version of [`p1_monitor`], usable as a solver monitor.
#[derive(Clone, Debug)]
pub struct FejerMonitor {
    x_star: Vector,
    distances: Vec<f64>,
    slacks: Vec<f64>,
    rho_sum: f64,
    any_rho: bool,
    first_violation: Option<usize>,
}

impl FejerMonitor {
    pub fn new(x_star: Vector) -> Self {
        FejerMonitor {
            x_star,
            distances: Vec::new(),
            slacks: Vec::new(),
            rho_sum: 0.0,
            any_rho: false,
            first_violation: None,
        }
    }

    fn push(&mut self, record: &StepRecord) -> Result<()> {
        record.x_prev.check_dim(self.x_star.dim())?;
        record.x_next.check_dim(self.x_star.dim())?;
        if self.distances.is_empty() {
            self.distances.push(self.x_star.dist(&record.x_prev));
        }
        let d_prev = *self.distances.last().expect("seeded above");
        let d = self.x_star.dist(&record.x_next);
        let rho = record.injected_error.norm();
        let slack = d_prev + rho - d;
        if slack < -tol_fejer(d_prev) && self.first_violation.is_none() {
            self.first_violation = Some(self.slacks.len() + 1);
        }
        self.rho_sum += rho;
        self.any_rho |= rho > 0.0;
        self.distances.push(d);
        self.slacks.push(slack);
        Ok(())
    }

    pub fn report(&self) -> FejerReport {
        let verdict = if self.first_violation.is_some() {
            FejerVerdict::Violated
        } else if self.any_rho {
            FejerVerdict::QuasiFejer
        } else {
            FejerVerdict::Fejer
        };
        FejerReport {
            distances: self.distances.clone(),
            slacks: self.slacks.clone(),
            min_slack: self.slacks.iter().copied().fold(f64::INFINITY, f64::min),
            rho_partial_sum: self.rho_sum,
            verdict,
            first_violation: self.first_violation,
        }
    }
}

impl StepMonitor for FejerMonitor {
    fn observe(&mut self, record: &StepRecord) {
        // dimension errors cannot occur for records produced by hpe_solve on x_star's space
        let _ = self.push(record);
    }
}

/// Per-step check of `‖x* - x_k‖ ≤ ‖x* - x_{k-1}‖ + ‖r_k‖` along a trace.
pub fn p1_monitor(trace: &SolveTrace, x_star: &Vector) -> Result<FejerReport> {
    trace.x0.check_dim(x_star.dim())?;
    let mut monitor = FejerMonitor::new(x_star.clone());
    for record in &trace.records {
        monitor.push(record)?;
    }
    Ok(monitor.report())
}

/// `d_n^p ≤ d_{n-1}^p + ρ_n` for all `n`, with absolute tolerance `1e-12`.
pub fn quasi_fejer_check(distances: &[f64], rhos: &[f64], p: f64) -> Result<bool> {
    if !(p > 0.0 && p.is_finite()) {
        return Err(Error::validation(format!("exponent p must be > 0, got {p}")));
    }
    if distances.is_empty() || rhos.len() + 1 != distances.len() {
        return Err(Error::validation(format!(
            "need len(rhos) = len(distances) - 1, got {} and {}",
            rhos.len(),
            distances.len()
        )));
    }
    if distances.iter().chain(rhos).any(|&d| !(d >= 0.0)) {
        return Err(Error::validation("distances and rhos must be nonnegative"));
    }
    Ok(distances
        .windows(2)
        .zip(rhos)
        .all(|(w, rho)| w[1].powf(p) <= w[0].powf(p) + rho + 1e-12))
}

/// Scalar map `F(x) = -x` for `x > 0`, `x/2` for `x ≤ 0`, with `Ω = {0}`.
///
/// Every orbit is Fejér convergent to `{0}` and converges to `0`, yet the
/// constant sequence `z_k = 1` with `ẑ_k = F(1) = -1` makes zero progress
/// toward `0` while its limit `1` lies outside `Ω`.
#[derive(Clone, Copy, Debug, Default)]
pub struct P2Counterexample;

pub fn p2_counterexample() -> P2Counterexample {
    P2Counterexample
}

impl P2Counterexample {
    pub const SOLUTION: f64 = 0.0;

    pub fn apply(&self, x: f64) -> f64 {
        if x > 0.0 {
            -x
        } else {
            x / 2.0
        }
    }

    pub fn in_solution_set(&self, x: f64) -> bool {
        x == Self::SOLUTION
    }

    /// `x_0, x_1, …, x_n` with `x_k = F(x_{k-1})`.
    pub fn iterates(&self, x0: f64, n: usize) -> Vec<f64> {
        std::iter::successors(Some(x0), |&x| Some(self.apply(x)))
            .take(n + 1)
            .collect()
    }

    /// The witness pair `(z_k, ẑ_k)`; constant in `k`.
    pub fn witness(&self, _k: usize) -> (f64, f64) {
        (1.0, self.apply(1.0))
    }

    /// `|x* - z_k| - |x* - ẑ_k|`
    pub fn witness_progress(&self, k: usize) -> f64 {
        let (z, z_hat) = self.witness(k);
        (Self::SOLUTION - z).abs() - (Self::SOLUTION - z_hat).abs()
    }

    pub fn witness_limit(&self) -> f64 {
        1.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quasi_fejer_examples() {
        assert!(quasi_fejer_check(&[1.0, 1.5, 0.5], &[1.0, 0.0], 1.0).unwrap());
        assert!(!quasi_fejer_check(&[1.0, 2.0], &[0.5], 1.0).unwrap());
        assert!(quasi_fejer_check(&[1.0, 1.2], &[0.5], 2.0).unwrap());
    }

    #[test]
    fn quasi_fejer_validation() {
        assert!(quasi_fejer_check(&[1.0, 2.0], &[0.5, 0.1], 1.0).is_err());
        assert!(quasi_fejer_check(&[1.0, -2.0], &[0.5], 1.0).is_err());
        assert!(quasi_fejer_check(&[1.0, 2.0], &[-0.5], 1.0).is_err());
        assert!(quasi_fejer_check(&[1.0, 2.0], &[0.5], 0.0).is_err());
        assert!(quasi_fejer_check(&[], &[], 1.0).is_err());
    }

    #[test]
    fn counterexample_map() {
        let f = p2_counterexample();
        assert_eq!(f.apply(1.0), -1.0);
        assert_eq!(f.apply(-2.0), -1.0);
        assert_eq!(f.iterates(1.0, 4), vec![1.0, -1.0, -0.5, -0.25, -0.125]);
        for k in 0..10 {
            assert_eq!(f.witness_progress(k), 0.0);
        }
        assert!(!f.in_solution_set(f.witness_limit()));
    }

    #[test]
    fn empty_trace_is_vacuously_fejer() {
        let trace = SolveTrace {
            x0: Vector::zeros(2),
            records: vec![],
            termination: crate::hpe::Termination::MaxIters,
            warnings: vec![],
            rejected_steps: vec![],
        };
        let report = p1_monitor(&trace, &Vector::zeros(2)).unwrap();
        assert_eq!(report.verdict, FejerVerdict::Fejer);
        assert!(report.slacks.is_empty());
        assert!(p1_monitor(&trace, &Vector::zeros(3)).is_err());
    }
}
