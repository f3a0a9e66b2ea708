//! σ-approximate resolvents and the hybrid proximal-extragradient driver.
//!
//! One HPE step at `x` with step size `λ` accepts any certificate
//! `(y, v, ε)` with `v ∈ T^[ε](y)` and
//!
//! ```text
//! ‖λv + y - x‖² + 2λε ≤ σ²‖y - x‖²
//! ```
//!
//! and moves to `x - λv` (plus an optional injected error `r`). Exact
//! proximal steps are the `σ = 0` case.

use log::warn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::enlargement::Certificate;
use crate::error::{Error, Result};
use crate::operators::{MonotoneOp, Vector};

/// Tolerance for the HPE inequalities, relative to the squared step length.
pub fn tol_ineq(step_sq: f64) -> f64 {
    1e-9 * (1.0 + step_sq)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SigmaReport {
    /// `‖λv + y - x‖² + 2λε`
    pub lhs: f64,
    /// `σ²‖y - x‖²`
    pub rhs: f64,
    pub satisfied: bool,
    /// `x - λv`
    pub z: Vector,
    /// `‖y - x‖`
    pub step_norm: f64,
    pub bound_v_ok: bool,
    pub bound_zy_ok: bool,
}

/// Verifies that `x - λ·cert.v` is a member of `J_{λT,σ}(x)` as witnessed by `cert`.
pub fn check_sigma_resolvent(x: &Vector, lambda: f64, sigma: f64, cert: &Certificate) -> Result<SigmaReport> {
    cert.y.check_dim(x.dim())?;
    if !(lambda > 0.0) {
        return Err(Error::validation(format!("step size must be positive, got {lambda}")));
    }
    let residual: f64 = x
        .iter()
        .zip(cert.y.iter().zip(cert.v.iter()))
        .map(|(&xi, (&yi, &vi))| {
            let w = lambda * vi + yi - xi;
            w * w
        })
        .sum();
    let lhs = residual + 2.0 * lambda * cert.eps;
    let step_sq = cert.y.dist(x).powi(2);
    let step_norm = step_sq.sqrt();
    let rhs = sigma * sigma * step_sq;
    let tol = tol_ineq(step_sq);
    let z = x.sub_scaled(lambda, &cert.v);
    let bound_v_ok = lambda * cert.v.norm() <= (1.0 + sigma) * step_norm + tol;
    let bound_zy_ok = z.dist(&cert.y) <= sigma * step_norm + tol;
    Ok(SigmaReport {
        lhs,
        rhs,
        satisfied: lhs <= rhs + tol,
        z,
        step_norm,
        bound_v_ok,
        bound_zy_ok,
    })
}

/// Step sizes `λ_k`: a constant, or an explicit list whose last entry is held.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LambdaSchedule {
    Constant(f64),
    Sequence(Vec<f64>),
}

impl LambdaSchedule {
    /// `λ_k` for `k ≥ 1`.
    pub fn at(&self, k: usize) -> f64 {
        match self {
            LambdaSchedule::Constant(l) => *l,
            LambdaSchedule::Sequence(seq) => seq[(k.max(1) - 1).min(seq.len() - 1)],
        }
    }

    /// `(λ_lo, λ_hi)`.
    pub fn bounds(&self) -> (f64, f64) {
        match self {
            LambdaSchedule::Constant(l) => (*l, *l),
            LambdaSchedule::Sequence(seq) => seq
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &l| (lo.min(l), hi.max(l))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let LambdaSchedule::Sequence(seq) = self {
            if seq.is_empty() {
                return Err(Error::validation("step-size list is empty"));
            }
        }
        let (lo, hi) = self.bounds();
        if !(lo > 0.0 && hi.is_finite()) {
            return Err(Error::validation(format!(
                "step sizes must lie in a bounded interval [lo, hi] with lo > 0, got [{lo}, {hi}]"
            )));
        }
        Ok(())
    }
}

/// Injected errors with `‖r_k‖ = c·k^(-p)` along seeded random unit directions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ErrorSchedule {
    pub c: f64,
    pub p: f64,
    pub seed: u64,
}

pub fn make_error_schedule(c: f64, p: f64, seed: u64) -> Result<ErrorSchedule> {
    let schedule = ErrorSchedule { c, p, seed };
    schedule.validate()?;
    Ok(schedule)
}

impl ErrorSchedule {
    pub fn validate(&self) -> Result<()> {
        if !(self.c >= 0.0 && self.c.is_finite()) {
            return Err(Error::validation(format!("error scale c must be >= 0, got {}", self.c)));
        }
        if !(self.p > 0.0 && self.p.is_finite()) {
            return Err(Error::validation(format!("error exponent p must be > 0, got {}", self.p)));
        }
        Ok(())
    }

    pub fn summable(&self) -> bool {
        self.c == 0.0 || self.p > 1.0
    }

    pub fn norm_at(&self, k: usize) -> f64 {
        self.c * (k as f64).powf(-self.p)
    }

    pub fn partial_sum(&self, k: usize) -> f64 {
        (1..=k).map(|i| self.norm_at(i)).sum()
    }

    /// `r_k`, reproducible from `(seed, k)` alone.
    pub fn error_at(&self, k: usize, dim: usize) -> Vector {
        let norm = self.norm_at(k);
        if norm == 0.0 {
            return Vector::zeros(dim);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(k as u64);
        loop {
            let d: Vec<f64> = (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            let len = d.iter().map(|c| c * c).sum::<f64>().sqrt();
            if len > 1e-12 {
                return Vector::new(d.into_iter().map(|c| norm * c / len).collect())
                    .expect("finite error direction");
            }
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectionPolicy {
    /// Abort on the first certificate that fails the σ-inequality.
    #[default]
    Strict,
    /// Log, record and continue (diagnostic mode).
    Warn,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HpeConfig {
    pub sigma: f64,
    pub lambda: LambdaSchedule,
    pub max_iters: usize,
    pub stop_tol: f64,
    pub errors: Option<ErrorSchedule>,
    pub policy: RejectionPolicy,
}

impl HpeConfig {
    pub fn new(sigma: f64, lambda: LambdaSchedule, max_iters: usize, stop_tol: f64) -> Result<Self> {
        let config = HpeConfig {
            sigma,
            lambda,
            max_iters,
            stop_tol,
            errors: None,
            policy: RejectionPolicy::Strict,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn with_errors(mut self, errors: ErrorSchedule) -> Result<Self> {
        errors.validate()?;
        self.errors = Some(errors);
        Ok(self)
    }

    pub fn with_policy(mut self, policy: RejectionPolicy) -> Self {
        self.policy = policy;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.sigma) {
            return Err(Error::validation(format!("sigma must lie in [0, 1), got {}", self.sigma)));
        }
        if !(self.stop_tol >= 0.0) {
            return Err(Error::validation("stop_tol must be nonnegative"));
        }
        self.lambda.validate()?;
        if let Some(e) = &self.errors {
            e.validate()?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepRecord {
    pub k: usize,
    pub lambda: f64,
    pub cert: Certificate,
    pub x_prev: Vector,
    pub x_next: Vector,
    pub injected_error: Vector,
    pub sigma_report: SigmaReport,
}

impl StepRecord {
    /// `max(‖v‖, ε, ‖y - x_prev‖)`: small values certify an approximate zero at `y`.
    pub fn residual(&self) -> f64 {
        self.cert
            .v
            .norm()
            .max(self.cert.eps)
            .max(self.sigma_report.step_norm)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Converged,
    MaxIters,
}

impl Termination {
    pub fn name(self) -> &'static str {
        match self {
            Termination::Converged => "converged",
            Termination::MaxIters => "max_iters",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveTrace {
    pub x0: Vector,
    pub records: Vec<StepRecord>,
    pub termination: Termination,
    pub warnings: Vec<String>,
    /// Steps whose certificate failed the σ-inequality (warn policy only).
    pub rejected_steps: Vec<usize>,
}

impl SolveTrace {
    pub fn x_final(&self) -> &Vector {
        self.records.last().map_or(&self.x0, |r| &r.x_next)
    }

    pub fn final_residual(&self) -> Option<f64> {
        self.records.last().map(StepRecord::residual)
    }

    pub fn iterations(&self) -> usize {
        self.records.len()
    }
}

/// Produces, for `(x, λ)`, a certificate for an inexact step of `J_{λT}` at `x`.
pub trait CertificateOracle {
    fn certificate(&self, x: &Vector, lambda: f64) -> Result<Certificate>;
}

impl<F> CertificateOracle for F
where
    F: Fn(&Vector, f64) -> Result<Certificate>,
{
    fn certificate(&self, x: &Vector, lambda: f64) -> Result<Certificate> {
        self(x, lambda)
    }
}

/// Observer called once per accepted (or warned) step.
pub trait StepMonitor {
    fn observe(&mut self, record: &StepRecord);
}

/// Exact proximal point oracle: `y = J_{λT}(x)`, `v = (x - y)/λ`, `ε = 0`.
#[derive(Clone, Debug)]
pub struct ExactProxOracle {
    op: MonotoneOp,
}

pub fn exact_prox_oracle(op: MonotoneOp) -> Result<ExactProxOracle> {
    if !op.capabilities().resolvent {
        return Err(Error::Capability {
            op: op.name(),
            capability: "RESOLVENT",
        });
    }
    Ok(ExactProxOracle { op })
}

impl CertificateOracle for ExactProxOracle {
    fn certificate(&self, x: &Vector, lambda: f64) -> Result<Certificate> {
        let y = self.op.resolvent(lambda, x)?;
        let v = (1.0 / lambda) * &(x - &y);
        Certificate::exact(y, v)
    }
}

/// Runs the HPE method from `x0`.
///
/// Each step computes `x_k = x_{k-1} - λ_k v_k + r_k`. The run stops once
/// [`StepRecord::residual`] drops to `stop_tol` or after `max_iters` steps;
/// `stop_tol = 0` always runs the full budget.
/// Under the strict policy a rejected certificate aborts with
/// [`Error::CertificateRejected`], which carries the trace so far.
pub fn hpe_solve<O>(
    oracle: &O,
    x0: &Vector,
    config: &HpeConfig,
    monitors: &mut [&mut dyn StepMonitor],
) -> Result<SolveTrace>
where
    O: CertificateOracle + ?Sized,
{
    config.validate()?;
    let dim = x0.dim();
    let mut trace = SolveTrace {
        x0: x0.clone(),
        records: Vec::new(),
        termination: Termination::MaxIters,
        warnings: Vec::new(),
        rejected_steps: Vec::new(),
    };
    if let Some(errors) = &config.errors {
        if !errors.summable() {
            let msg = format!(
                "error schedule with p = {} is not summable; convergence is not guaranteed",
                errors.p
            );
            warn!("{msg}");
            trace.warnings.push(msg);
        }
    }

    let mut x = x0.clone();
    for k in 1..=config.max_iters {
        let lambda = config.lambda.at(k);
        let cert = oracle.certificate(&x, lambda)?;
        cert.y.check_dim(dim)?;
        if !(cert.y.is_finite() && cert.v.is_finite()) {
            return Err(Error::NonFinite("oracle certificate"));
        }
        let report = check_sigma_resolvent(&x, lambda, config.sigma, &cert)?;
        if !report.satisfied {
            match config.policy {
                RejectionPolicy::Strict => {
                    let (lhs, rhs) = (report.lhs, report.rhs);
                    return Err(Error::CertificateRejected {
                        k,
                        lhs,
                        rhs,
                        trace: Box::new(trace),
                    });
                }
                RejectionPolicy::Warn => {
                    let msg = format!(
                        "step {k}: certificate fails the sigma inequality (lhs {:e} > rhs {:e})",
                        report.lhs, report.rhs
                    );
                    warn!("{msg}");
                    trace.warnings.push(msg);
                    trace.rejected_steps.push(k);
                }
            }
        }
        let injected_error = match &config.errors {
            Some(e) => e.error_at(k, dim),
            None => Vector::zeros(dim),
        };
        let x_next = x
            .sub_scaled(lambda, &cert.v)
            .zip_map(&injected_error, |a, r| a + r)
            .ensure_finite("HPE update")?;
        let record = StepRecord {
            k,
            lambda,
            cert,
            x_prev: x,
            x_next: x_next.clone(),
            injected_error,
            sigma_report: report,
        };
        for monitor in monitors.iter_mut() {
            monitor.observe(&record);
        }
        let residual = record.residual();
        trace.records.push(record);
        x = x_next;
        if config.stop_tol > 0.0 && residual <= config.stop_tol {
            trace.termination = Termination::Converged;
            break;
        }
    }
    Ok(trace)
}
