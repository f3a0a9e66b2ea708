//! Vector arithmetic and a catalog of maximal monotone operators.
//!
//! Every operator is immutable once built. What an operator can do is recorded
//! in its [`Capabilities`]:
//!
//! * `eval`: the operator is point-to-point and can be evaluated.
//! * `resolvent`: `J_{λT}(x) = (I + λT)^{-1}(x)` has a closed form or a direct solve.
//! * `graph_sample`: exact pairs `(z, u)` with `u ∈ T(z)` can be generated.
//!
//! Sums never get a resolvent. Approximating `J_{λ(A+B)}` is the job of the
//! splitting methods.

pub(crate) mod linalg;
mod vector;

pub use linalg::{matrix_from_rows, matrix_to_rows};
pub use vector::Vector;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance for monotonicity and validation checks.
pub const TOL_MONO: f64 = 1e-10;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Capabilities {
    pub eval: bool,
    pub resolvent: bool,
    pub graph_sample: bool,
}

#[derive(Clone, Debug)]
pub enum OperatorKind {
    /// `x ↦ Mx + q` with `M + Mᵀ` positive semidefinite.
    Affine { m: DMatrix<f64>, q: Vector },
    /// Subdifferential of `x ↦ Σ wᵢ|xᵢ|`.
    SubdiffL1 { weights: Vector },
    /// Normal cone of the box `[lo, hi]`.
    NormalConeBox { lo: Vector, hi: Vector },
    /// Normal cone of the closed ball of the given radius centred at the origin.
    NormalConeBall { radius: f64 },
    /// Gradient `x ↦ Qx - b` of `½xᵀQx - bᵀx`.
    GradQuadratic { q: DMatrix<f64>, b: Vector },
    Scaled { factor: f64, inner: Box<MonotoneOp> },
    Sum { left: Box<MonotoneOp>, right: Box<MonotoneOp> },
}

#[derive(Clone, Debug)]
pub struct MonotoneOp {
    kind: OperatorKind,
    dim: usize,
    caps: Capabilities,
    alpha: Option<f64>,
    lipschitz: Option<f64>,
}

impl MonotoneOp {
    pub fn affine(m: DMatrix<f64>, q: Vector) -> Result<Self> {
        let n = m.nrows();
        if m.ncols() != n {
            return Err(Error::validation("affine operator needs a square matrix"));
        }
        q.check_dim(n)?;
        let eig = linalg::symmetric_eigenvalues(&linalg::symmetric_part(&m));
        if eig[0] < -TOL_MONO {
            return Err(Error::validation(format!(
                "affine operator is not monotone: M + Mᵀ has eigenvalue {:e}",
                2.0 * eig[0]
            )));
        }
        let lipschitz = linalg::spectral_norm(&m);
        let alpha = affine_cocoercivity(&m, &eig);
        Ok(MonotoneOp {
            kind: OperatorKind::Affine { m, q },
            dim: n,
            caps: Capabilities {
                eval: true,
                resolvent: true,
                graph_sample: true,
            },
            alpha,
            lipschitz: Some(lipschitz),
        })
    }

    /// The zero operator on `R^dim`.
    pub fn zero(dim: usize) -> Self {
        MonotoneOp::affine(DMatrix::zeros(dim, dim), Vector::zeros(dim))
            .expect("zero operator is monotone")
    }

    pub fn identity(dim: usize) -> Self {
        MonotoneOp::affine(DMatrix::identity(dim, dim), Vector::zeros(dim))
            .expect("identity is monotone")
    }

    pub fn subdiff_l1(weights: Vector) -> Result<Self> {
        if weights.iter().any(|&w| w < 0.0) {
            return Err(Error::validation("l1 weights must be nonnegative"));
        }
        Ok(MonotoneOp {
            dim: weights.dim(),
            kind: OperatorKind::SubdiffL1 { weights },
            caps: Capabilities {
                eval: false,
                resolvent: true,
                graph_sample: true,
            },
            alpha: None,
            lipschitz: None,
        })
    }

    pub fn normal_cone_box(lo: Vector, hi: Vector) -> Result<Self> {
        hi.check_dim(lo.dim())?;
        if lo.iter().zip(hi.iter()).any(|(l, h)| l > h) {
            return Err(Error::validation("box needs lo <= hi coordinatewise"));
        }
        Ok(MonotoneOp {
            dim: lo.dim(),
            kind: OperatorKind::NormalConeBox { lo, hi },
            caps: Capabilities {
                eval: false,
                resolvent: true,
                graph_sample: true,
            },
            alpha: None,
            lipschitz: None,
        })
    }

    pub fn normal_cone_ball(radius: f64, dim: usize) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::validation("ball radius must be positive and finite"));
        }
        if dim == 0 {
            return Err(Error::validation("dimension must be >= 1"));
        }
        Ok(MonotoneOp {
            kind: OperatorKind::NormalConeBall { radius },
            dim,
            caps: Capabilities {
                eval: false,
                resolvent: true,
                graph_sample: true,
            },
            alpha: None,
            lipschitz: None,
        })
    }

    pub fn grad_quadratic(q: DMatrix<f64>, b: Vector) -> Result<Self> {
        let n = q.nrows();
        if q.ncols() != n {
            return Err(Error::validation("quadratic needs a square matrix"));
        }
        b.check_dim(n)?;
        if !linalg::is_symmetric(&q, TOL_MONO * (1.0 + q.amax())) {
            return Err(Error::validation("quadratic matrix must be symmetric"));
        }
        let eig = linalg::symmetric_eigenvalues(&linalg::symmetric_part(&q));
        if eig[0] < -TOL_MONO {
            return Err(Error::validation(format!(
                "quadratic matrix is not PSD: eigenvalue {:e}",
                eig[0]
            )));
        }
        let lmax = eig[n - 1].max(0.0);
        let (alpha, lipschitz) = if lmax <= TOL_MONO {
            (f64::INFINITY, 0.0)
        } else {
            (1.0 / lmax, lmax)
        };
        Ok(MonotoneOp {
            kind: OperatorKind::GradQuadratic { q, b },
            dim: n,
            caps: Capabilities {
                eval: true,
                resolvent: true,
                graph_sample: true,
            },
            alpha: Some(alpha),
            lipschitz: Some(lipschitz),
        })
    }

    /// `λ·T`.
    pub fn scaled(factor: f64, inner: MonotoneOp) -> Result<Self> {
        if !(factor > 0.0 && factor.is_finite()) {
            return Err(Error::validation("scale factor must be positive and finite"));
        }
        Ok(MonotoneOp {
            dim: inner.dim,
            caps: inner.caps,
            alpha: inner.alpha.map(|a| a / factor),
            lipschitz: inner.lipschitz.map(|l| l * factor),
            kind: OperatorKind::Scaled {
                factor,
                inner: Box::new(inner),
            },
        })
    }

    pub fn sum(left: MonotoneOp, right: MonotoneOp) -> Result<Self> {
        right.check_input(left.dim)?;
        let (l, r) = (left.caps, right.caps);
        let caps = Capabilities {
            eval: l.eval && r.eval,
            resolvent: false,
            graph_sample: (l.eval && (r.eval || r.resolvent)) || (r.eval && l.resolvent),
        };
        let alpha = match (left.alpha, right.alpha) {
            (Some(a1), Some(a2)) => Some(1.0 / (1.0 / a1 + 1.0 / a2)),
            _ => None,
        };
        let lipschitz = match (left.lipschitz, right.lipschitz) {
            (Some(l1), Some(l2)) => Some(l1 + l2),
            _ => None,
        };
        Ok(MonotoneOp {
            dim: left.dim,
            caps,
            alpha,
            lipschitz,
            kind: OperatorKind::Sum {
                left: Box::new(left),
                right: Box::new(right),
            },
        })
    }

    pub fn kind(&self) -> &OperatorKind {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn capabilities(&self) -> Capabilities {
        self.caps
    }

    /// Cocoercivity modulus, `+∞` for the zero map.
    pub fn alpha(&self) -> Option<f64> {
        self.alpha
    }

    pub fn lipschitz(&self) -> Option<f64> {
        self.lipschitz
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            OperatorKind::Affine { .. } => "affine",
            OperatorKind::SubdiffL1 { .. } => "subdiff_l1",
            OperatorKind::NormalConeBox { .. } => "normal_cone_box",
            OperatorKind::NormalConeBall { .. } => "normal_cone_ball",
            OperatorKind::GradQuadratic { .. } => "grad_quadratic",
            OperatorKind::Scaled { .. } => "scaled",
            OperatorKind::Sum { .. } => "sum",
        }
    }

    /// True for the normal cone of a closed convex set, whose resolvent is
    /// the projection for every step size.
    pub fn is_normal_cone(&self) -> bool {
        match &self.kind {
            OperatorKind::NormalConeBox { .. } | OperatorKind::NormalConeBall { .. } => true,
            OperatorKind::Scaled { inner, .. } => inner.is_normal_cone(),
            _ => false,
        }
    }

    fn check_input(&self, dim: usize) -> Result<()> {
        if dim == self.dim {
            Ok(())
        } else {
            Err(Error::Dimension {
                expected: self.dim,
                got: dim,
            })
        }
    }

    fn missing(&self, capability: &'static str) -> Error {
        Error::Capability {
            op: self.name(),
            capability,
        }
    }

    pub fn eval(&self, x: &Vector) -> Result<Vector> {
        self.check_input(x.dim())?;
        if !self.caps.eval {
            return Err(self.missing("EVAL"));
        }
        let out = match &self.kind {
            OperatorKind::Affine { m, q } => {
                let mx = m * x.to_dvector();
                Vector::from_dvector(&mx).zip_map(q, |a, b| a + b)
            }
            OperatorKind::GradQuadratic { q, b } => {
                let qx = q * x.to_dvector();
                Vector::from_dvector(&qx).zip_map(b, |a, c| a - c)
            }
            OperatorKind::Scaled { factor, inner } => *factor * &inner.eval(x)?,
            OperatorKind::Sum { left, right } => &left.eval(x)? + &right.eval(x)?,
            _ => unreachable!("set-valued kinds never carry EVAL"),
        };
        out.ensure_finite("operator evaluation")
    }

    /// `J_{λT}(x)`: the unique `y` with `(x - y)/λ ∈ T(y)`.
    pub fn resolvent(&self, lambda: f64, x: &Vector) -> Result<Vector> {
        self.check_input(x.dim())?;
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::validation(format!(
                "resolvent step must be positive, got {lambda}"
            )));
        }
        if !self.caps.resolvent {
            return Err(self.missing("RESOLVENT"));
        }
        let out = match &self.kind {
            OperatorKind::Affine { m, q } => {
                let rhs = x.sub_scaled(lambda, q);
                Vector::from_raw(linalg::solve_shifted(m, lambda, rhs.as_slice())?)
            }
            OperatorKind::GradQuadratic { q, b } => {
                let rhs = x.sub_scaled(-lambda, b);
                Vector::from_raw(linalg::solve_shifted(q, lambda, rhs.as_slice())?)
            }
            OperatorKind::SubdiffL1 { weights } => {
                x.zip_map(weights, |xi, wi| soft_threshold(xi, lambda * wi))
            }
            OperatorKind::NormalConeBox { lo, hi } => project_box(x, lo, hi),
            OperatorKind::NormalConeBall { radius } => project_ball(x, *radius),
            OperatorKind::Scaled { factor, inner } => inner.resolvent(lambda * factor, x)?,
            OperatorKind::Sum { .. } => unreachable!("sums never carry RESOLVENT"),
        };
        out.ensure_finite("resolvent")
    }

    /// Maps a seed point `w` to an exact graph pair `(z, u)`, `u ∈ T(z)`.
    ///
    /// With a resolvent, `z = J_{λT}(w)` and `u = (w - z)/λ`. A sum `A + B`
    /// with `A` evaluable resolves `w` through `B` and adds `A(z)`. Otherwise
    /// `z = w` and `u = T(w)`.
    pub fn graph_point(&self, lambda: f64, w: &Vector) -> Result<(Vector, Vector)> {
        self.check_input(w.dim())?;
        if self.caps.resolvent {
            let z = self.resolvent(lambda, w)?;
            let u = (1.0 / lambda) * &(w - &z);
            return Ok((z, u));
        }
        match &self.kind {
            OperatorKind::Sum { left, right } if !self.caps.eval => {
                let (evaluated, resolved) = if left.caps.eval && right.caps.resolvent {
                    (left, right)
                } else if right.caps.eval && left.caps.resolvent {
                    (right, left)
                } else {
                    return Err(self.missing("GRAPH_SAMPLE"));
                };
                let (z, b) = resolved.graph_point(lambda, w)?;
                let u = &evaluated.eval(&z)? + &b;
                Ok((z, u))
            }
            OperatorKind::Scaled { factor, inner } if !self.caps.eval => {
                let (z, u) = inner.graph_point(lambda, w)?;
                Ok((z, *factor * &u))
            }
            _ if self.caps.eval => {
                let u = self.eval(w)?;
                Ok((w.clone(), u))
            }
            _ => Err(self.missing("GRAPH_SAMPLE")),
        }
    }

    /// `m` exact graph pairs from standard normal seed points, reproducible for a fixed seed.
    pub fn graph_sample(&self, lambda: f64, seed: u64, m: usize) -> Result<Vec<(Vector, Vector)>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.graph_sample_around(lambda, &Vector::zeros(self.dim), 1.0, m, &mut rng)
    }

    /// Like [`graph_sample`](Self::graph_sample) with seed points drawn from
    /// `N(center, scale² I)`.
    pub fn graph_sample_around<R: Rng + ?Sized>(
        &self,
        lambda: f64,
        center: &Vector,
        scale: f64,
        m: usize,
        rng: &mut R,
    ) -> Result<Vec<(Vector, Vector)>> {
        if !self.caps.graph_sample {
            return Err(self.missing("GRAPH_SAMPLE"));
        }
        self.check_input(center.dim())?;
        (0..m)
            .map(|_| {
                let w = center.map(|c| c + scale * rng.sample::<f64, _>(StandardNormal));
                self.graph_point(lambda, &w)
            })
            .collect()
    }
}

/// Cocoercivity modulus of `x ↦ Mx + q`, if positive.
///
/// Symmetric PSD `M`: `1/λ_max`. Invertible `M`: `λ_min` of the symmetric
/// part of `M⁻¹`, since `⟨d, Md⟩ = ⟨M⁻¹e, e⟩` with `e = Md`.
fn affine_cocoercivity(m: &DMatrix<f64>, sym_eig: &[f64]) -> Option<f64> {
    if linalg::is_symmetric(m, TOL_MONO) {
        let lmax = sym_eig[sym_eig.len() - 1];
        return Some(if lmax <= TOL_MONO { f64::INFINITY } else { 1.0 / lmax });
    }
    if linalg::smallest_singular_value(m) <= 1e-8 {
        return None;
    }
    let inv = m.clone().try_inverse()?;
    let alpha = linalg::symmetric_eigenvalues(&linalg::symmetric_part(&inv))[0];
    (alpha > TOL_MONO).then_some(alpha)
}

pub fn soft_threshold(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

pub fn project_box(x: &Vector, lo: &Vector, hi: &Vector) -> Vector {
    Vector::from_raw(
        x.iter()
            .zip(lo.iter().zip(hi.iter()))
            .map(|(&xi, (&l, &h))| xi.clamp(l, h))
            .collect(),
    )
}

pub fn project_ball(x: &Vector, radius: f64) -> Vector {
    let n = x.norm();
    if n <= radius {
        x.clone()
    } else {
        (radius / n) * x
    }
}

/// Serializable operator description, as used in run configurations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OperatorSpec {
    Affine { m: Vec<Vec<f64>>, q: Vec<f64> },
    SubdiffL1 { weights: Vec<f64> },
    NormalConeBox { lo: Vec<f64>, hi: Vec<f64> },
    NormalConeBall { radius: f64, dim: usize },
    GradQuadratic { q: Vec<Vec<f64>>, b: Vec<f64> },
    Scaled { factor: f64, inner: Box<OperatorSpec> },
    Sum { left: Box<OperatorSpec>, right: Box<OperatorSpec> },
}

/// Builds and validates an operator from its description.
pub fn make_operator(spec: &OperatorSpec) -> Result<MonotoneOp> {
    match spec {
        OperatorSpec::Affine { m, q } => {
            MonotoneOp::affine(matrix_from_rows(m)?, Vector::new(q.clone())?)
        }
        OperatorSpec::SubdiffL1 { weights } => MonotoneOp::subdiff_l1(Vector::new(weights.clone())?),
        OperatorSpec::NormalConeBox { lo, hi } => {
            MonotoneOp::normal_cone_box(Vector::new(lo.clone())?, Vector::new(hi.clone())?)
        }
        OperatorSpec::NormalConeBall { radius, dim } => MonotoneOp::normal_cone_ball(*radius, *dim),
        OperatorSpec::GradQuadratic { q, b } => {
            MonotoneOp::grad_quadratic(matrix_from_rows(q)?, Vector::new(b.clone())?)
        }
        OperatorSpec::Scaled { factor, inner } => MonotoneOp::scaled(*factor, make_operator(inner)?),
        OperatorSpec::Sum { left, right } => {
            MonotoneOp::sum(make_operator(left)?, make_operator(right)?)
        }
    }
}
