//! ε-enlargement certificates.
//!
//! A [`Certificate`] `(y, v, ε)` claims `v ∈ T^[ε](y)`, that is
//! `⟨y - z, v - u⟩ ≥ -ε` for every graph pair `u ∈ T(z)`. The claim can be
//! built by the transportation formula for cocoercive maps, the sum rule and
//! positive scaling. It can be *falsified* by probing sampled graph pairs.
//! A pass from the falsifier is necessary for membership, never a proof; a
//! failure is a proof of non-membership up to `tol_gap`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operators::{MonotoneOp, Vector};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub y: Vector,
    pub v: Vector,
    pub eps: f64,
}

impl Certificate {
    pub fn new(y: Vector, v: Vector, eps: f64) -> Result<Self> {
        v.check_dim(y.dim())?;
        if !eps.is_finite() {
            return Err(Error::NonFinite("certificate eps"));
        }
        if eps < 0.0 {
            return Err(Error::validation(format!("certificate eps must be >= 0, got {eps:e}")));
        }
        Ok(Certificate { y, v, eps })
    }

    /// Certificate for an exact graph point `v ∈ T(y)`.
    pub fn exact(y: Vector, v: Vector) -> Result<Self> {
        Certificate::new(y, v, 0.0)
    }

    pub fn dim(&self) -> usize {
        self.y.dim()
    }

    /// `⟨y - z, v - u⟩ + ε`, nonnegative for every graph pair when the claim holds.
    pub fn gap(&self, z: &Vector, u: &Vector) -> f64 {
        let dz = &self.y - z;
        let du = &self.v - u;
        dz.dot(&du) + self.eps
    }
}

/// Outcome of probing a certificate. `passed` only means no probe found a
/// violation; it does not prove membership.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbeVerdict {
    pub passed: bool,
    pub worst_gap: f64,
    pub witness: Option<(Vector, Vector)>,
    pub probes: usize,
    pub tol_gap: f64,
}

/// Checks a certificate against an explicit probe set.
pub fn check_certificate_with_probes(cert: &Certificate, probes: &[(Vector, Vector)]) -> ProbeVerdict {
    let mut worst_gap = f64::INFINITY;
    let mut witness = None;
    let mut radius: f64 = 0.0;
    let mut u_max: f64 = 0.0;
    for (z, u) in probes {
        let gap = cert.gap(z, u);
        radius = radius.max(cert.y.dist(z));
        u_max = u_max.max(u.norm());
        if gap < worst_gap {
            worst_gap = gap;
            witness = Some((z.clone(), u.clone()));
        }
    }
    let diameter = 2.0 * radius;
    let tol_gap = 1e-9 * (1.0 + (cert.v.norm() + u_max) * diameter);
    if probes.is_empty() {
        worst_gap = cert.eps;
    }
    let passed = worst_gap >= -tol_gap;
    ProbeVerdict {
        passed,
        worst_gap,
        witness: if passed { None } else { witness },
        probes: probes.len(),
        tol_gap,
    }
}

/// Probe set used by [`check_certificate`]: resolvent seeds drawn from
/// `N(y, (1 + ‖y‖)² I)`, plus `(y, T(y))` when `T` can be evaluated.
pub fn certificate_probes(
    op: &MonotoneOp,
    cert: &Certificate,
    lambda_probe: f64,
    seed: u64,
    m: usize,
) -> Result<Vec<(Vector, Vector)>> {
    cert.y.check_dim(op.dim())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = 1.0 + cert.y.norm();
    let mut probes = op.graph_sample_around(lambda_probe, &cert.y, scale, m, &mut rng)?;
    if op.capabilities().eval {
        probes.push((cert.y.clone(), op.eval(&cert.y)?));
    }
    Ok(probes)
}

/// Samples `m` graph pairs of `op` and reports the worst violation of
/// `⟨y - z, v - u⟩ ≥ -ε`.
pub fn check_certificate(
    op: &MonotoneOp,
    cert: &Certificate,
    lambda_probe: f64,
    seed: u64,
    m: usize,
) -> Result<ProbeVerdict> {
    if m == 0 {
        return Err(Error::validation("falsifier needs at least one probe"));
    }
    let probes = certificate_probes(op, cert, lambda_probe, seed, m)?;
    Ok(check_certificate_with_probes(cert, &probes))
}

/// Transportation formula for an α-cocoercive `A`: `A(z) ∈ A^[ε](x)` with
/// `ε = ‖x - z‖² / (4α)`.
pub fn transport_cocoercive(a: &MonotoneOp, x: &Vector, z: &Vector) -> Result<Certificate> {
    let alpha = a.alpha().ok_or(Error::Capability {
        op: a.name(),
        capability: "cocoercivity modulus",
    })?;
    z.check_dim(x.dim())?;
    let v = a.eval(z)?;
    let eps = x.dist(z).powi(2) / (4.0 * alpha);
    Certificate::new(x.clone(), v, eps)
}

/// `T₁^[ε₁](y) + T₂^[ε₂](y) ⊂ (T₁ + T₂)^[ε₁+ε₂](y)`.
pub fn combine_sum(a: &Certificate, b: &Certificate) -> Result<Certificate> {
    b.y.check_dim(a.dim())?;
    let distance = a.y.dist(&b.y);
    if distance > 0.0 {
        return Err(Error::BasePointMismatch { distance });
    }
    Certificate::new(a.y.clone(), &a.v + &b.v, a.eps + b.eps)
}

/// `λ·T^[ε](y) = (λT)^[λε](y)`.
pub fn scale_certificate(cert: &Certificate, lambda: f64) -> Result<Certificate> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::validation(format!("scale must be positive, got {lambda}")));
    }
    Certificate::new(cert.y.clone(), lambda * &cert.v, lambda * cert.eps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn v(c: &[f64]) -> Vector {
        Vector::new(c.to_vec()).unwrap()
    }

    #[test]
    fn exact_graph_point_passes() {
        let id = MonotoneOp::identity(1);
        let cert = Certificate::exact(v(&[0.0]), v(&[0.0])).unwrap();
        let verdict = check_certificate(&id, &cert, 1.0, 9, 100).unwrap();
        assert!(verdict.passed);
        assert!(verdict.worst_gap >= 0.0);
    }

    #[test]
    fn hand_probes_find_violation() {
        let cert = Certificate::exact(v(&[0.0]), v(&[1.0])).unwrap();
        let probes = [
            (v(&[2.0]), v(&[2.0])),
            (v(&[-2.0]), v(&[-2.0])),
            (v(&[0.5]), v(&[0.5])),
        ];
        assert_eq!(cert.gap(&probes[0].0, &probes[0].1), 2.0);
        assert_eq!(cert.gap(&probes[1].0, &probes[1].1), 6.0);
        assert_eq!(cert.gap(&probes[2].0, &probes[2].1), -0.25);
        let verdict = check_certificate_with_probes(&cert, &probes);
        assert!(!verdict.passed);
        assert_eq!(verdict.worst_gap, -0.25);
        assert_eq!(verdict.witness, Some((v(&[0.5]), v(&[0.5]))));
    }

    #[test]
    fn transport_examples() {
        let id = MonotoneOp::identity(2);
        let cert = transport_cocoercive(&id, &v(&[0.0, 0.0]), &v(&[2.0, 0.0])).unwrap();
        assert_eq!(cert, Certificate::new(v(&[0.0, 0.0]), v(&[2.0, 0.0]), 1.0).unwrap());

        let same = transport_cocoercive(&id, &v(&[1.0, 1.0]), &v(&[1.0, 1.0])).unwrap();
        assert_eq!(same.eps, 0.0);
        assert_eq!(same.v, v(&[1.0, 1.0]));

        let g = MonotoneOp::grad_quadratic(DMatrix::identity(1, 1), v(&[3.0])).unwrap();
        let cert = transport_cocoercive(&g, &v(&[1.0]), &v(&[0.0])).unwrap();
        assert_eq!(cert, Certificate::new(v(&[1.0]), v(&[-3.0]), 0.25).unwrap());
        assert!(check_certificate(&g, &cert, 1.0, 3, 1000).unwrap().passed);
    }

    #[test]
    fn transport_needs_alpha() {
        let rot = MonotoneOp::affine(
            crate::operators::matrix_from_rows(&[vec![0.0, 1.0], vec![-1.0, 0.0]]).unwrap(),
            Vector::zeros(2),
        )
        .unwrap();
        assert!(matches!(
            transport_cocoercive(&rot, &v(&[0.0, 0.0]), &v(&[1.0, 0.0])),
            Err(Error::Capability { .. })
        ));
    }

    #[test]
    fn combine_examples() {
        let y = v(&[1.0, 2.0]);
        let a = Certificate::exact(y.clone(), v(&[1.0, 0.0])).unwrap();
        let b = Certificate::exact(y.clone(), v(&[0.5, -1.0])).unwrap();
        let c = combine_sum(&a, &b).unwrap();
        assert_eq!(c, Certificate::exact(y.clone(), v(&[1.5, -1.0])).unwrap());

        let t = Certificate::new(y.clone(), v(&[0.0, 0.0]), 0.3).unwrap();
        assert_eq!(combine_sum(&t, &a).unwrap().eps, 0.3);

        let other = Certificate::exact(v(&[1.0, 2.5]), v(&[0.0, 0.0])).unwrap();
        assert!(matches!(combine_sum(&a, &other), Err(Error::BasePointMismatch { .. })));
    }

    #[test]
    fn scale_examples() {
        let cert = Certificate::new(v(&[1.0]), v(&[4.0]), 2.0).unwrap();
        assert_eq!(scale_certificate(&cert, 1.0).unwrap(), cert);
        let half = scale_certificate(&cert, 0.5).unwrap();
        assert_eq!(half, Certificate::new(v(&[1.0]), v(&[2.0]), 1.0).unwrap());
        assert!(scale_certificate(&cert, 0.0).is_err());
        assert!(scale_certificate(&cert, -1.0).is_err());
    }

    #[test]
    fn scaled_identity_certificate_passes() {
        let id = MonotoneOp::identity(2);
        let cert = transport_cocoercive(&id, &v(&[0.5, -1.0]), &v(&[1.0, 0.0])).unwrap();
        let scaled_op = MonotoneOp::scaled(3.0, id).unwrap();
        let scaled = scale_certificate(&cert, 3.0).unwrap();
        assert!(check_certificate(&scaled_op, &scaled, 1.0, 17, 1000).unwrap().passed);
    }

    #[test]
    fn negative_eps_rejected() {
        assert!(Certificate::new(v(&[0.0]), v(&[0.0]), -1e-3).is_err());
        assert!(Certificate::new(v(&[0.0]), v(&[0.0, 1.0]), 0.0).is_err());
    }

    #[test]
    fn zero_probes_rejected() {
        let cert = Certificate::exact(v(&[0.0]), v(&[0.0])).unwrap();
        assert!(check_certificate(&MonotoneOp::identity(1), &cert, 1.0, 0, 0).is_err());
    }
}
