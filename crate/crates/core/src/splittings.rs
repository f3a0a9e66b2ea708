//! Forward-Backward, Tseng's modified Forward-Backward and Korpelevich's
//! extragradient method, each emitting a certificate that makes the step a
//! member of `J_{λ(A+B),σ}(x)`:
//!
//! | method      | ε                    | σ            | step bound     |
//! |-------------|----------------------|--------------|----------------|
//! | FB          | `‖y - x‖²/(4α)`      | `√(λ/(2α))`  | `λ < 2α`       |
//! | Tseng       | `0`                  | `λL`         | `λ < 1/L`      |
//! | Korpelevich | `⟨ν, z - y⟩`         | `λL`         | `λ < 1/L`      |

use serde::{Deserialize, Serialize};

use crate::enlargement::Certificate;
use crate::error::{Error, Result};
use crate::hpe::CertificateOracle;
use crate::operators::{MonotoneOp, Vector};

/// `λ_hi·L` must stay below `1 - SIGMA_MARGIN`.
pub const SIGMA_MARGIN: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SplitMethod {
    #[serde(rename = "fb")]
    ForwardBackward,
    #[serde(rename = "tseng")]
    Tseng,
    #[serde(rename = "korpelevich")]
    Korpelevich,
}

impl SplitMethod {
    pub fn name(self) -> &'static str {
        match self {
            SplitMethod::ForwardBackward => "fb",
            SplitMethod::Tseng => "tseng",
            SplitMethod::Korpelevich => "korpelevich",
        }
    }
}

/// `0 ∈ A(x) + B(x)` with `A` point-to-point and `B` resolvent-capable, plus
/// the step-size interval `[λ_lo, λ_hi]`.
#[derive(Clone, Debug)]
pub struct SplitProblem {
    a: MonotoneOp,
    b: MonotoneOp,
    lambda_lo: f64,
    lambda_hi: f64,
}

impl SplitProblem {
    pub fn new(a: MonotoneOp, b: MonotoneOp, lambda_lo: f64, lambda_hi: f64) -> Result<Self> {
        if !a.capabilities().eval {
            return Err(Error::Capability {
                op: a.name(),
                capability: "EVAL",
            });
        }
        if !b.capabilities().resolvent {
            return Err(Error::Capability {
                op: b.name(),
                capability: "RESOLVENT",
            });
        }
        if a.dim() != b.dim() {
            return Err(Error::Dimension {
                expected: a.dim(),
                got: b.dim(),
            });
        }
        if !(lambda_lo > 0.0 && lambda_lo <= lambda_hi && lambda_hi.is_finite()) {
            return Err(Error::validation(format!(
                "need 0 < λ_lo <= λ_hi, got [{lambda_lo}, {lambda_hi}]"
            )));
        }
        Ok(SplitProblem {
            a,
            b,
            lambda_lo,
            lambda_hi,
        })
    }

    /// Builds the problem and checks the preconditions of `method`.
    pub fn for_method(
        method: SplitMethod,
        a: MonotoneOp,
        b: MonotoneOp,
        lambda_lo: f64,
        lambda_hi: f64,
    ) -> Result<Self> {
        let prob = SplitProblem::new(a, b, lambda_lo, lambda_hi)?;
        prob.validate_for(method)?;
        Ok(prob)
    }

    pub fn a(&self) -> &MonotoneOp {
        &self.a
    }

    pub fn b(&self) -> &MonotoneOp {
        &self.b
    }

    pub fn dim(&self) -> usize {
        self.a.dim()
    }

    pub fn lambda_bounds(&self) -> (f64, f64) {
        (self.lambda_lo, self.lambda_hi)
    }

    /// `A + B`, the operator whose zeros are sought.
    pub fn sum_operator(&self) -> Result<MonotoneOp> {
        MonotoneOp::sum(self.a.clone(), self.b.clone())
    }

    fn alpha(&self) -> Result<f64> {
        match self.a.alpha() {
            Some(alpha) if alpha > 0.0 => Ok(alpha),
            _ => Err(Error::validation(format!(
                "forward-backward needs a cocoercive A; `{}` has no cocoercivity modulus",
                self.a.name()
            ))),
        }
    }

    fn lipschitz(&self) -> Result<f64> {
        self.a.lipschitz().ok_or_else(|| {
            Error::validation(format!("`{}` has no Lipschitz constant", self.a.name()))
        })
    }

    pub fn validate_for(&self, method: SplitMethod) -> Result<()> {
        match method {
            SplitMethod::ForwardBackward => {
                let alpha = self.alpha()?;
                if self.lambda_hi >= 2.0 * alpha {
                    return Err(Error::validation(format!(
                        "forward-backward needs λ_hi < 2α = {}, got {}",
                        2.0 * alpha,
                        self.lambda_hi
                    )));
                }
            }
            SplitMethod::Tseng | SplitMethod::Korpelevich => {
                let l = self.lipschitz()?;
                if self.lambda_hi * l >= 1.0 - SIGMA_MARGIN {
                    return Err(Error::validation(format!(
                        "{} needs λ_hi·L < 1, got {}·{}",
                        method.name(),
                        self.lambda_hi,
                        l
                    )));
                }
                if method == SplitMethod::Korpelevich && !self.b.is_normal_cone() {
                    return Err(Error::validation(format!(
                        "korpelevich needs B to be a normal cone, got `{}`",
                        self.b.name()
                    )));
                }
            }
        }
        Ok(())
    }

    /// σ valid for every step size in `[λ_lo, λ_hi]`.
    pub fn sigma(&self, method: SplitMethod) -> Result<f64> {
        self.sigma_at(method, self.lambda_hi)
    }

    /// σ for a single step size: `√(λ/(2α))` (FB) or `λL`.
    pub fn sigma_at(&self, method: SplitMethod, lambda: f64) -> Result<f64> {
        match method {
            SplitMethod::ForwardBackward => Ok((lambda / (2.0 * self.alpha()?)).sqrt()),
            SplitMethod::Tseng | SplitMethod::Korpelevich => Ok(lambda * self.lipschitz()?),
        }
    }

    fn check_step(&self, method: SplitMethod, lambda: f64, x: &Vector) -> Result<()> {
        self.validate_for(method)?;
        x.check_dim(self.dim())?;
        // relative slack so schedules that round-trip through text still pass
        let slack = 1e-15 * self.lambda_hi;
        if !(lambda >= self.lambda_lo - slack && lambda <= self.lambda_hi + slack) {
            return Err(Error::validation(format!(
                "step size {lambda} outside [{}, {}]",
                self.lambda_lo, self.lambda_hi
            )));
        }
        Ok(())
    }

    pub fn step(&self, method: SplitMethod, lambda: f64, x: &Vector) -> Result<(Vector, Certificate)> {
        match method {
            SplitMethod::ForwardBackward => fb_step(self, lambda, x),
            SplitMethod::Tseng => tseng_step(self, lambda, x),
            SplitMethod::Korpelevich => korpelevich_step(self, lambda, x),
        }
    }

    pub fn oracle(&self, method: SplitMethod) -> Result<SplitOracle<'_>> {
        self.validate_for(method)?;
        Ok(SplitOracle { problem: self, method })
    }
}

/// Adapts a splitting step into a certificate oracle for [`crate::hpe::hpe_solve`].
#[derive(Clone, Copy, Debug)]
pub struct SplitOracle<'a> {
    problem: &'a SplitProblem,
    method: SplitMethod,
}

impl CertificateOracle for SplitOracle<'_> {
    fn certificate(&self, x: &Vector, lambda: f64) -> Result<Certificate> {
        self.problem.step(self.method, lambda, x).map(|(_, cert)| cert)
    }
}

/// `x_next = J_{λB}(x - λA(x))` with certificate
/// `(x_next, (x - x_next)/λ, ‖x_next - x‖²/(4α))`.
pub fn fb_step(prob: &SplitProblem, lambda: f64, x: &Vector) -> Result<(Vector, Certificate)> {
    prob.check_step(SplitMethod::ForwardBackward, lambda, x)?;
    let alpha = prob.alpha()?;
    let forward = x.sub_scaled(lambda, &prob.a.eval(x)?);
    let x_next = prob.b.resolvent(lambda, &forward)?;
    let v = (1.0 / lambda) * &(x - &x_next);
    let eps = x_next.dist(x).powi(2) / (4.0 * alpha);
    let cert = Certificate::new(x_next.clone(), v, eps)?;
    Ok((x_next, cert))
}

/// `y = J_{λB}(x - λA(x))`, `x_next = y - λ(A(y) - A(x))`, certificate
/// `(y, a + A(y), 0)` with `a = (x - λA(x) - y)/λ ∈ B(y)`.
pub fn tseng_step(prob: &SplitProblem, lambda: f64, x: &Vector) -> Result<(Vector, Certificate)> {
    prob.check_step(SplitMethod::Tseng, lambda, x)?;
    let ax = prob.a.eval(x)?;
    let forward = x.sub_scaled(lambda, &ax);
    let y = prob.b.resolvent(lambda, &forward)?;
    let ay = prob.a.eval(&y)?;
    let x_next = y.sub_scaled(lambda, &(&ay - &ax));
    let a = (1.0 / lambda) * &(&forward - &y);
    let cert = Certificate::exact(y, &a + &ay)?;
    Ok((x_next, cert))
}

/// `y = P_C(x - λA(x))`, `z = P_C(x - λA(y))`, certificate
/// `(y, ν + A(y), ⟨ν, z - y⟩)` with `ν = (x - λA(y) - z)/λ ∈ N_C(z)`.
pub fn korpelevich_step(prob: &SplitProblem, lambda: f64, x: &Vector) -> Result<(Vector, Certificate)> {
    prob.check_step(SplitMethod::Korpelevich, lambda, x)?;
    let y = prob.b.resolvent(lambda, &x.sub_scaled(lambda, &prob.a.eval(x)?))?;
    let ay = prob.a.eval(&y)?;
    let w = x.sub_scaled(lambda, &ay);
    let z = prob.b.resolvent(lambda, &w)?;
    let nu = (1.0 / lambda) * &(&w - &z);
    let zy = &z - &y;
    let raw_eps = nu.dot(&zy);
    // ⟨ν, z - y⟩ ≥ 0 holds exactly; allow rounding-level negatives only
    let eps = if raw_eps > 0.0 {
        raw_eps
    } else if raw_eps >= -1e-12 * (1.0 + nu.norm() * zy.norm()) {
        0.0
    } else {
        return Err(Error::Oracle(format!(
            "korpelevich enlargement {raw_eps:e} is negative; B is not a normal cone of a convex set?"
        )));
    };
    let cert = Certificate::new(y, &nu + &ay, eps)?;
    Ok((z, cert))
}

/// Two-stage step with `u_err` added to the H-stage output and `r_err` to
/// the G-stage output. Returns the perturbed iterate and the bound
/// `L_G‖u_err‖ + ‖r_err‖` on its distance to an exact image, with
/// `L_G = 1 + 2λ_hi L` (Tseng) or `1 + λ_hi L` (Korpelevich).
pub fn staged_step_with_errors(
    method: SplitMethod,
    prob: &SplitProblem,
    lambda: f64,
    x: &Vector,
    u_err: &Vector,
    r_err: &Vector,
) -> Result<(Vector, f64)> {
    prob.check_step(method, lambda, x)?;
    u_err.check_dim(prob.dim())?;
    r_err.check_dim(prob.dim())?;
    let l = prob.lipschitz()?;
    let ax = prob.a.eval(x)?;
    let y = &prob.b.resolvent(lambda, &x.sub_scaled(lambda, &ax))? + u_err;
    let ay = prob.a.eval(&y)?;
    let (g, lip_g) = match method {
        SplitMethod::Tseng => (y.sub_scaled(lambda, &(&ay - &ax)), 1.0 + 2.0 * prob.lambda_hi * l),
        SplitMethod::Korpelevich => (
            prob.b.resolvent(lambda, &x.sub_scaled(lambda, &ay))?,
            1.0 + prob.lambda_hi * l,
        ),
        SplitMethod::ForwardBackward => {
            return Err(Error::validation("staged errors apply to tseng or korpelevich only"))
        }
    };
    let x_next = (&g + r_err).ensure_finite("staged step")?;
    Ok((x_next, lip_g * u_err.norm() + r_err.norm()))
}
