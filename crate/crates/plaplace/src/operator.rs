//! The normalized p-Laplacian on lattice fields.
//!
//! In the plane the operator applied to a smooth u with nonvanishing
//! gradient is
//!
//!     F_p[u] = -(1/p) tr H - ((p-2)/p) e' H e,
//!
//! with H the Hessian and e the unit gradient.  All second derivatives are
//! taken by central differences on the 3x3 stencil (the mixed term by the
//! four-corner formula), so the scheme is second-order consistent wherever
//! the gradient stays away from zero.
//!
//! Where the discrete gradient degenerates, `e' H e` is replaced by an
//! extreme eigenvalue of H: the eigenvalue extremizing the coefficient
//! (p-2)/p times it.  [`EnvelopeMode::Sub`] takes the infimum over unit
//! directions and [`EnvelopeMode::Super`] the supremum, matching the
//! sub/supersolution conventions of the continuous problem.  For every
//! gradient the classical value is sandwiched between the two envelopes.

use crate::error::{Error, Result};
use crate::grid::{GridDomain, ScalarField};

use serde::{Deserialize, Serialize};

/// Discrete gradients below `GRADIENT_FLOOR_FACTOR * max|u| / h` are
/// treated as degenerate and routed through the envelope branch.
pub const GRADIENT_FLOOR_FACTOR: f64 = 1e-10;

/// Which envelope to use at degenerate-gradient nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvelopeMode {
    /// Infimum over unit directions (subsolution convention).
    Sub,
    /// Supremum over unit directions (supersolution convention); the
    /// eigensolver uses this branch.
    Super,
}

/// Symmetric 2x2 matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymMat2 {
    pub xx: f64,
    pub xy: f64,
    pub yy: f64,
}

impl SymMat2 {
    pub fn trace(&self) -> f64 {
        self.xx + self.yy
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> (f64, f64) {
        let mean = 0.5 * (self.xx + self.yy);
        let half_gap = 0.5 * (self.xx - self.yy);
        let disc = (half_gap * half_gap + self.xy * self.xy).sqrt();
        (mean - disc, mean + disc)
    }

    /// e' H e for a unit vector e.
    pub fn quad(&self, e: (f64, f64)) -> f64 {
        e.0 * e.0 * self.xx + 2.0 * e.0 * e.1 * self.xy + e.1 * e.1 * self.yy
    }
}

fn check_p(p: f64) -> Result<()> {
    if !p.is_finite() || p <= 1.0 {
        return Err(Error::Domain(format!("exponent p = {p} must exceed 1")));
    }
    Ok(())
}

/// Central gradient at an interior node.
#[inline]
pub fn gradient(field: &ScalarField, i: usize, j: usize, h: f64) -> (f64, f64) {
    (
        (field.get(i + 1, j) - field.get(i - 1, j)) / (2.0 * h),
        (field.get(i, j + 1) - field.get(i, j - 1)) / (2.0 * h),
    )
}

/// Central Hessian at an interior node; the mixed entry uses the four
/// diagonal neighbors.
#[inline]
pub fn hessian(field: &ScalarField, i: usize, j: usize, h: f64) -> SymMat2 {
    let h2 = h * h;
    let c = field.get(i, j);
    SymMat2 {
        xx: (field.get(i + 1, j) - 2.0 * c + field.get(i - 1, j)) / h2,
        yy: (field.get(i, j + 1) - 2.0 * c + field.get(i, j - 1)) / h2,
        xy: (field.get(i + 1, j + 1) - field.get(i - 1, j + 1) - field.get(i + 1, j - 1)
            + field.get(i - 1, j - 1))
            / (4.0 * h2),
    }
}

/// Classical value for a nondegenerate gradient.
pub fn evaluate_fp(p: f64, grad: (f64, f64), hess: SymMat2) -> Result<f64> {
    check_p(p)?;
    let norm = grad.0.hypot(grad.1);
    if norm == 0.0 {
        return Err(Error::Domain(
            "classical evaluation needs a nonzero gradient; use an envelope".into(),
        ));
    }
    let e = (grad.0 / norm, grad.1 / norm);
    Ok(-hess.trace() / p - (p - 2.0) / p * hess.quad(e))
}

/// Infimum of the classical value over unit gradient directions.
pub fn envelope_lower(p: f64, hess: SymMat2) -> Result<f64> {
    check_p(p)?;
    let b = (p - 2.0) / p;
    let (lo, hi) = hess.eigenvalues();
    Ok(-hess.trace() / p - (b * lo).max(b * hi))
}

/// Supremum of the classical value over unit gradient directions.
pub fn envelope_upper(p: f64, hess: SymMat2) -> Result<f64> {
    check_p(p)?;
    let b = (p - 2.0) / p;
    let (lo, hi) = hess.eigenvalues();
    Ok(-hess.trace() / p - (b * lo).min(b * hi))
}

pub fn envelope_for_mode(p: f64, hess: SymMat2, mode: EnvelopeMode) -> Result<f64> {
    match mode {
        EnvelopeMode::Sub => envelope_lower(p, hess),
        EnvelopeMode::Super => envelope_upper(p, hess),
    }
}

/// Evaluate the operator at every interior node of the domain; all other
/// nodes are left at zero.  Nodes whose discrete gradient falls under the
/// degeneracy floor take the envelope of the given mode.
pub fn apply_operator(
    domain: &GridDomain,
    field: &ScalarField,
    p: f64,
    mode: EnvelopeMode,
) -> Result<ScalarField> {
    check_p(p)?;
    if field.nx != domain.nx || field.ny != domain.ny {
        return Err(Error::Domain(format!(
            "field is {} x {} but the domain lattice is {} x {}",
            field.nx, field.ny, domain.nx, domain.ny
        )));
    }
    let h = domain.h;
    let floor = GRADIENT_FLOOR_FACTOR * field.max_abs() / h;
    let mut out = ScalarField::zeros_like(domain);
    for j in 1..domain.ny - 1 {
        for i in 1..domain.nx - 1 {
            if !domain.interior[domain.idx(i, j)] {
                continue;
            }
            let g = gradient(field, i, j, h);
            let hess = hessian(field, i, j, h);
            let value = if g.0.hypot(g.1) <= floor {
                envelope_for_mode(p, hess, mode)?
            } else {
                evaluate_fp(p, g, hess)?
            };
            out.set(i, j, value);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{DomainConfig, Shape};

    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn disk(h: f64) -> GridDomain {
        GridDomain::build(&DomainConfig::new(Shape::Disk { radius: 1.0 }, h).unwrap()).unwrap()
    }

    fn fill(domain: &GridDomain, f: impl Fn(f64, f64) -> f64) -> ScalarField {
        let mut field = ScalarField::zeros_like(domain);
        for j in 0..domain.ny {
            for i in 0..domain.nx {
                field.set(i, j, f(domain.x(i), domain.y(j)));
            }
        }
        field
    }

    fn random_sym(rng: &mut impl Rng) -> SymMat2 {
        SymMat2 {
            xx: rng.gen_range(-3.0..3.0),
            xy: rng.gen_range(-3.0..3.0),
            yy: rng.gen_range(-3.0..3.0),
        }
    }

    #[test]
    fn paraboloid_is_exact_for_every_p() {
        // u = (1 - |x|^2) / 2 has H = -I, so direction terms drop out and
        // F_p[u] = 1 identically, envelope branch included (at the origin).
        let domain = disk(0.05);
        let field = fill(&domain, |x, y| 0.5 * (1.0 - x * x - y * y));
        for p in [1.3, 2.0, 4.0] {
            let result = apply_operator(&domain, &field, p, EnvelopeMode::Super).unwrap();
            for &idx in &domain.interior_indices() {
                assert!(
                    (result.values[idx] - 1.0).abs() < 1e-11,
                    "p = {p}: value {} at index {idx}",
                    result.values[idx]
                );
            }
        }
    }

    #[test]
    fn consistency_is_second_order_on_a_smooth_field() {
        // u = exp(0.3 x + 0.4 y): gradient never degenerates and
        // F_p[u] = -0.25 (p-1)/p u exactly.
        let p = 3.0;
        let mut errors = Vec::new();
        for h in [0.04, 0.02, 0.01] {
            let domain = disk(h);
            let field = fill(&domain, |x, y| (0.3 * x + 0.4 * y).exp());
            let result = apply_operator(&domain, &field, p, EnvelopeMode::Super).unwrap();
            let mut worst = 0.0f64;
            for &idx in &domain.interior_indices() {
                let (i, j) = (idx % domain.nx, idx / domain.nx);
                let exact = -0.25 * (p - 1.0) / p * (0.3 * domain.x(i) + 0.4 * domain.y(j)).exp();
                worst = worst.max((result.values[idx] - exact).abs());
            }
            errors.push(worst);
        }
        assert!(
            errors[0] / errors[1] >= 1.8 && errors[1] / errors[2] >= 1.8,
            "errors {errors:?} do not shrink at second order"
        );
    }

    #[test]
    fn envelopes_bracket_the_classical_value() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..500 {
            let hess = random_sym(&mut rng);
            let theta: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            let grad = (theta.cos(), theta.sin());
            for p in [1.3, 2.0, 4.0, 10.0] {
                let value = evaluate_fp(p, grad, hess).unwrap();
                let lower = envelope_lower(p, hess).unwrap();
                let upper = envelope_upper(p, hess).unwrap();
                assert!(
                    lower <= value + 1e-12 && value <= upper + 1e-12,
                    "p = {p}: {lower} <= {value} <= {upper} violated for {hess:?}"
                );
            }
        }
    }

    #[test]
    fn envelopes_match_a_direction_sweep() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let hess = random_sym(&mut rng);
            for p in [1.3, 2.0, 4.0] {
                let mut min = f64::INFINITY;
                let mut max = f64::NEG_INFINITY;
                for k in 0..720 {
                    let theta = std::f64::consts::PI * k as f64 / 720.0;
                    let v = evaluate_fp(p, (theta.cos(), theta.sin()), hess).unwrap();
                    min = min.min(v);
                    max = max.max(v);
                }
                let lower = envelope_lower(p, hess).unwrap();
                let upper = envelope_upper(p, hess).unwrap();
                let scale = 1.0 + hess.trace().abs();
                assert!((min - lower).abs() < 1e-4 * scale, "lower {lower} vs sweep {min}");
                assert!((max - upper).abs() < 1e-4 * scale, "upper {upper} vs sweep {max}");
            }
        }
    }

    #[test]
    fn gradient_aligned_with_an_eigenvector_attains_the_envelope() {
        // Diagonal Hessian: the coordinate axes are eigenvectors.
        let hess = SymMat2 { xx: -2.0, xy: 0.0, yy: 1.0 };
        for p in [1.5, 4.0] {
            let along_x = evaluate_fp(p, (1.0, 0.0), hess).unwrap();
            let along_y = evaluate_fp(p, (0.0, 1.0), hess).unwrap();
            let lower = envelope_lower(p, hess).unwrap();
            let upper = envelope_upper(p, hess).unwrap();
            assert!((along_x.min(along_y) - lower).abs() < 1e-14);
            assert!((along_x.max(along_y) - upper).abs() < 1e-14);
        }
    }

    #[test]
    fn operator_is_homogeneous() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..100 {
            let hess = random_sym(&mut rng);
            let grad: (f64, f64) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            if grad.0.hypot(grad.1) < 1e-3 {
                continue;
            }
            let p = 2.7;
            let base = evaluate_fp(p, grad, hess).unwrap();
            // Degree one in the Hessian.
            let scaled = SymMat2 { xx: 3.5 * hess.xx, xy: 3.5 * hess.xy, yy: 3.5 * hess.yy };
            assert!((evaluate_fp(p, grad, scaled).unwrap() - 3.5 * base).abs() < 1e-10);
            assert!((envelope_upper(p, scaled).unwrap() - 3.5 * envelope_upper(p, hess).unwrap())
                .abs()
                < 1e-10);
            // Degree zero in the gradient.
            let doubled = (2.0 * grad.0, 2.0 * grad.1);
            assert!((evaluate_fp(p, doubled, hess).unwrap() - base).abs() < 1e-12);
        }
    }

    #[test]
    fn operator_is_degenerate_elliptic() {
        // Adding a positive semidefinite matrix must not increase any value.
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..200 {
            let hess = random_sym(&mut rng);
            let (a, b, c) = (
                rng.gen_range(-2.0..2.0),
                rng.gen_range(-2.0..2.0),
                rng.gen_range(-2.0..2.0),
            );
            // A' A for A = [[a, b], [0, c]] is positive semidefinite.
            let psd = SymMat2 { xx: a * a, xy: a * b, yy: b * b + c * c };
            let bigger = SymMat2 {
                xx: hess.xx + psd.xx,
                xy: hess.xy + psd.xy,
                yy: hess.yy + psd.yy,
            };
            let grad: (f64, f64) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            for p in [1.3, 2.0, 4.0] {
                if grad.0.hypot(grad.1) > 1e-3 {
                    assert!(
                        evaluate_fp(p, grad, bigger).unwrap()
                            <= evaluate_fp(p, grad, hess).unwrap() + 1e-12
                    );
                }
                assert!(envelope_lower(p, bigger).unwrap() <= envelope_lower(p, hess).unwrap() + 1e-12);
                assert!(envelope_upper(p, bigger).unwrap() <= envelope_upper(p, hess).unwrap() + 1e-12);
            }
        }
    }

    #[test]
    fn envelopes_collapse_at_p_two() {
        // p = 2 kills the direction term: both envelopes equal -tr(H)/2.
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        for _ in 0..50 {
            let hess = random_sym(&mut rng);
            let want = -0.5 * hess.trace();
            assert!((envelope_lower(2.0, hess).unwrap() - want).abs() < 1e-13);
            assert!((envelope_upper(2.0, hess).unwrap() - want).abs() < 1e-13);
        }
    }

    #[test]
    fn constant_field_maps_to_zero() {
        let domain = disk(0.1);
        let field = fill(&domain, |_, _| 4.2);
        let result = apply_operator(&domain, &field, 3.0, EnvelopeMode::Super).unwrap();
        assert!(result.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn rejects_bad_arguments() {
        let domain = disk(0.1);
        let field = ScalarField::zeros(3, 3);
        assert!(apply_operator(&domain, &field, 2.0, EnvelopeMode::Super).is_err());
        let field = ScalarField::zeros_like(&domain);
        assert!(apply_operator(&domain, &field, 1.0, EnvelopeMode::Super).is_err());
        assert!(evaluate_fp(2.0, (0.0, 0.0), SymMat2 { xx: 1.0, xy: 0.0, yy: 1.0 }).is_err());
        assert!(envelope_lower(0.5, SymMat2 { xx: 1.0, xy: 0.0, yy: 1.0 }).is_err());
    }
}
