//! Test problems with reference solutions that never come from a solver
//! under test: closed forms, or a brute-force active-set enumeration.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::enlargement::Certificate;
use crate::error::{Error, Result};
use crate::hpe::{exact_prox_oracle, CertificateOracle};
use crate::operators::{linalg, make_operator, matrix_from_rows, soft_threshold, MonotoneOp, OperatorSpec, Vector};
use crate::splittings::{SplitMethod, SplitProblem};

/// Largest dimension accepted by the `3^n` active-set oracle.
pub const MAX_ORACLE_DIM: usize = 8;

/// Residual tolerance for reference solutions.
pub const REFERENCE_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    HpeExact,
    Fb,
    Tseng,
    Korpelevich,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::HpeExact => "hpe_exact",
            Method::Fb => "fb",
            Method::Tseng => "tseng",
            Method::Korpelevich => "korpelevich",
        }
    }

    pub fn split(self) -> Option<SplitMethod> {
        match self {
            Method::HpeExact => None,
            Method::Fb => Some(SplitMethod::ForwardBackward),
            Method::Tseng => Some(SplitMethod::Tseng),
            Method::Korpelevich => Some(SplitMethod::Korpelevich),
        }
    }

    pub const ALL: [Method; 4] = [Method::HpeExact, Method::Fb, Method::Tseng, Method::Korpelevich];
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    ClosedForm,
    ActiveSetOracle,
    UserSupplied,
}

#[derive(Clone, Debug)]
enum ProxRule {
    /// prox of `½‖x - b‖² + w‖x‖₁`
    QuadraticL1 { b: Vector, w: f64 },
}

/// An inclusion `0 ∈ A(x) + B(x)` (or `0 ∈ A(x)` when `B` is absent).
#[derive(Clone, Debug)]
pub struct Problem {
    name: String,
    a: MonotoneOp,
    b: Option<MonotoneOp>,
    reference: Option<Vector>,
    provenance: Provenance,
    prox: Option<ProxRule>,
}

impl Problem {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.a.dim()
    }

    pub fn a(&self) -> &MonotoneOp {
        &self.a
    }

    pub fn b(&self) -> Option<&MonotoneOp> {
        self.b.as_ref()
    }

    pub fn reference(&self) -> Option<&Vector> {
        self.reference.as_ref()
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    /// Checks the structural preconditions of `method`, independent of step sizes.
    pub fn supports(&self, method: Method) -> Result<()> {
        let Some(split) = method.split() else {
            return self.exact_oracle().map(|_| ());
        };
        let b = self
            .b
            .as_ref()
            .ok_or_else(|| Error::validation(format!("problem `{}` has no B operator to split", self.name)))?;
        // probe with a tiny admissible step; only moduli and kinds matter here
        SplitProblem::new(self.a.clone(), b.clone(), 1e-12, 1e-12)?.validate_for(split)
    }

    pub fn applicable_methods(&self) -> Vec<Method> {
        Method::ALL.into_iter().filter(|&m| self.supports(m).is_ok()).collect()
    }

    /// Default step size: `α` for FB, `0.9/L` for Tseng and Korpelevich, `1` otherwise.
    pub fn recommended_lambda(&self, method: Method) -> f64 {
        match method {
            Method::HpeExact => 1.0,
            Method::Fb => match self.a.alpha() {
                Some(a) if a.is_finite() => a,
                _ => 1.0,
            },
            Method::Tseng | Method::Korpelevich => match self.a.lipschitz() {
                Some(l) if l > 0.0 => 0.9 / l,
                _ => 1.0,
            },
        }
    }

    pub fn split_problem(&self, method: SplitMethod, lambda_lo: f64, lambda_hi: f64) -> Result<SplitProblem> {
        let b = self
            .b
            .as_ref()
            .ok_or_else(|| Error::validation(format!("problem `{}` has no B operator to split", self.name)))?;
        SplitProblem::for_method(method, self.a.clone(), b.clone(), lambda_lo, lambda_hi)
    }

    /// Exact proximal oracle for the whole operator, when one exists.
    pub fn exact_oracle(&self) -> Result<Box<dyn CertificateOracle + '_>> {
        match (&self.prox, &self.b) {
            (Some(ProxRule::QuadraticL1 { b, w }), _) => Ok(Box::new(QuadraticL1Prox { b, w: *w })),
            (None, None) => Ok(Box::new(exact_prox_oracle(self.a.clone())?)),
            (None, Some(_)) => Err(Error::Capability {
                op: "sum",
                capability: "RESOLVENT",
            }),
        }
    }

    /// The full operator `A + B`.
    pub fn operator(&self) -> Result<MonotoneOp> {
        match &self.b {
            Some(b) => MonotoneOp::sum(self.a.clone(), b.clone()),
            None => Ok(self.a.clone()),
        }
    }

    /// Residual of the reference solution: with `u = -A(x*)`, the distance
    /// `‖J_B(x* + u) - x*‖`, which vanishes iff `u ∈ B(x*)`.
    pub fn reference_residual(&self) -> Result<Option<f64>> {
        let Some(xs) = &self.reference else {
            return Ok(None);
        };
        let residual = match &self.b {
            Some(b) => {
                let u = -&self.a.eval(xs)?;
                b.resolvent(1.0, &(xs + &u))?.dist(xs)
            }
            None if self.a.capabilities().eval => self.a.eval(xs)?.norm(),
            None => self.a.resolvent(1.0, xs)?.dist(xs),
        };
        Ok(Some(residual))
    }

    fn verified(self) -> Result<Self> {
        if let Some(res) = self.reference_residual()? {
            if res > REFERENCE_TOL {
                return Err(Error::validation(format!(
                    "reference solution of `{}` fails the residual test ({res:e})",
                    self.name
                )));
            }
        }
        Ok(self)
    }
}

struct QuadraticL1Prox<'a> {
    b: &'a Vector,
    w: f64,
}

impl CertificateOracle for QuadraticL1Prox<'_> {
    fn certificate(&self, x: &Vector, lambda: f64) -> Result<Certificate> {
        x.check_dim(self.b.dim())?;
        if !(lambda > 0.0) {
            return Err(Error::validation("step size must be positive"));
        }
        let shrink = 1.0 + lambda;
        let t = lambda * self.w / shrink;
        let y = x.zip_map(self.b, |xi, bi| soft_threshold((xi + lambda * bi) / shrink, t));
        let v = (1.0 / lambda) * &(x - &y);
        Certificate::exact(y, v)
    }
}

/// `A(x) = x - b` (α = 1) and `B = ∂(w‖·‖₁)`; `x* = soft_threshold(b, w)`.
pub fn make_quadratic_l1(b: Vector, w: f64) -> Result<Problem> {
    if !(w > 0.0 && w.is_finite()) {
        return Err(Error::validation(format!("l1 weight must be positive, got {w}")));
    }
    let n = b.dim();
    let a = MonotoneOp::grad_quadratic(DMatrix::identity(n, n), b.clone())?;
    let l1 = MonotoneOp::subdiff_l1(Vector::from_elem(n, w))?;
    let reference = b.map(|bi| soft_threshold(bi, w));
    Problem {
        name: "quadratic_l1".into(),
        a,
        b: Some(l1),
        reference: Some(reference),
        provenance: Provenance::ClosedForm,
        prox: Some(ProxRule::QuadraticL1 { b, w }),
    }
    .verified()
}

/// `A(x₁, x₂) = (x₂, -x₁)` on `C = [-1, 1]²`; `x* = 0`. Monotone, 1-Lipschitz, not cocoercive.
pub fn make_rotation_vi() -> Problem {
    let m = matrix_from_rows(&[vec![0.0, 1.0], vec![-1.0, 0.0]]).expect("static matrix");
    let a = MonotoneOp::affine(m, Vector::zeros(2)).expect("rotation is monotone");
    let c = MonotoneOp::normal_cone_box(Vector::from_elem(2, -1.0), Vector::from_elem(2, 1.0))
        .expect("static box");
    Problem {
        name: "rotation_vi".into(),
        a,
        b: Some(c),
        reference: Some(Vector::zeros(2)),
        provenance: Provenance::ClosedForm,
        prox: None,
    }
}

/// `A(x) = Mx + q` on the box `[lo, hi]`, reference solution from [`active_set_oracle`].
pub fn make_affine_box_vi(m: DMatrix<f64>, q: Vector, lo: Vector, hi: Vector) -> Result<Problem> {
    let reference = active_set_oracle(&m, &q, &lo, &hi)?;
    let a = MonotoneOp::affine(m, q)?;
    let c = MonotoneOp::normal_cone_box(lo, hi)?;
    Problem {
        name: "affine_box_vi".into(),
        a,
        b: Some(c),
        reference: Some(reference),
        provenance: Provenance::ActiveSetOracle,
        prox: None,
    }
    .verified()
}

/// Single-operator problem `0 ∈ T(x)`, solvable with exact proximal steps.
pub fn make_operator_problem(name: impl Into<String>, op: MonotoneOp, reference: Option<Vector>) -> Result<Problem> {
    if let Some(r) = &reference {
        r.check_dim(op.dim())?;
    }
    Problem {
        name: name.into(),
        a: op,
        b: None,
        reference,
        provenance: Provenance::UserSupplied,
        prox: None,
    }
    .verified()
}

/// Solves the box-constrained VI `0 ∈ Mx + q + N_[lo,hi](x)` by enumerating
/// all `3^n` patterns (each coordinate at `lo`, at `hi`, or free), solving
/// the reduced linear system on the free set and checking the KKT signs:
/// `(Mx + q)ᵢ ≥ 0` at `lo`, `≤ 0` at `hi`, `= 0` and inside the box when free.
pub fn active_set_oracle(m: &DMatrix<f64>, q: &Vector, lo: &Vector, hi: &Vector) -> Result<Vector> {
    let n = q.dim();
    if m.nrows() != n || m.ncols() != n {
        return Err(Error::Dimension { expected: n, got: m.nrows() });
    }
    lo.check_dim(n)?;
    hi.check_dim(n)?;
    if n > MAX_ORACLE_DIM {
        return Err(Error::validation(format!(
            "active-set oracle supports n <= {MAX_ORACLE_DIM}, got {n}"
        )));
    }
    if lo.iter().zip(hi.iter()).any(|(l, h)| l > h) {
        return Err(Error::validation("box needs lo <= hi"));
    }
    let scale = 1.0 + m.amax() + q.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    let tol = 1e-10 * scale * (1.0 + lo.iter().chain(hi.iter()).fold(0.0f64, |a, b| a.max(b.abs())));

    #[derive(Clone, Copy, PartialEq)]
    enum Slot {
        Lo,
        Hi,
        Free,
    }

    for code in 0..3usize.pow(n as u32) {
        let mut c = code;
        let pattern: Vec<Slot> = (0..n)
            .map(|_| {
                let s = match c % 3 {
                    0 => Slot::Free,
                    1 => Slot::Lo,
                    _ => Slot::Hi,
                };
                c /= 3;
                s
            })
            .collect();
        let mut x = vec![0.0; n];
        for i in 0..n {
            match pattern[i] {
                Slot::Lo => x[i] = lo[i],
                Slot::Hi => x[i] = hi[i],
                Slot::Free => {}
            }
        }
        let free: Vec<usize> = (0..n).filter(|&i| pattern[i] == Slot::Free).collect();
        if !free.is_empty() {
            let k = free.len();
            let reduced = DMatrix::from_fn(k, k, |r, s| m[(free[r], free[s])]);
            let rhs: Vec<f64> = free
                .iter()
                .map(|&i| {
                    -q[i] - (0..n)
                        .filter(|j| pattern[*j] != Slot::Free)
                        .map(|j| m[(i, j)] * x[j])
                        .sum::<f64>()
                })
                .collect();
            let Ok(sol) = linalg::solve(reduced, &rhs) else {
                continue;
            };
            for (slot, &i) in free.iter().enumerate() {
                x[i] = sol[slot];
            }
        }
        let g: Vec<f64> = (0..n)
            .map(|i| (0..n).map(|j| m[(i, j)] * x[j]).sum::<f64>() + q[i])
            .collect();
        let ok = (0..n).all(|i| match pattern[i] {
            Slot::Lo => g[i] >= -tol,
            Slot::Hi => g[i] <= tol,
            Slot::Free => g[i].abs() <= tol && x[i] >= lo[i] - tol && x[i] <= hi[i] + tol,
        });
        if ok {
            let clamped: Vec<f64> = (0..n).map(|i| x[i].clamp(lo[i], hi[i])).collect();
            return Vector::new(clamped);
        }
    }
    Err(Error::Oracle("no active-set pattern satisfies the KKT conditions".into()))
}

/// Problem description as it appears in run configurations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemSpec {
    QuadraticL1 {
        b: Vec<f64>,
        w: f64,
    },
    RotationVi,
    AffineBoxVi {
        m: Vec<Vec<f64>>,
        q: Vec<f64>,
        lo: Vec<f64>,
        hi: Vec<f64>,
    },
    Operator {
        operator: OperatorSpec,
        #[serde(default)]
        reference: Option<Vec<f64>>,
    },
}

impl ProblemSpec {
    pub fn build(&self) -> Result<Problem> {
        match self {
            ProblemSpec::QuadraticL1 { b, w } => make_quadratic_l1(Vector::new(b.clone())?, *w),
            ProblemSpec::RotationVi => Ok(make_rotation_vi()),
            ProblemSpec::AffineBoxVi { m, q, lo, hi } => make_affine_box_vi(
                matrix_from_rows(m)?,
                Vector::new(q.clone())?,
                Vector::new(lo.clone())?,
                Vector::new(hi.clone())?,
            ),
            ProblemSpec::Operator { operator, reference } => make_operator_problem(
                "operator",
                make_operator(operator)?,
                reference.clone().map(Vector::new).transpose()?,
            ),
        }
    }
}
