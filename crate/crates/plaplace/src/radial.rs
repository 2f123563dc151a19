//! First Dirichlet eigenvalue of the normalized p-Laplacian on a ball, by
//! two independent routes.
//!
//! Route A (closed form): lambda = ((p-1)/p) (mu / R)^2 where mu is the first
//! positive zero of J_{-alpha} and alpha = (p - n) / (2 (p - 1)).  The radial
//! eigenfunction profile is g(r) = r^alpha J_{-alpha}(mu r / R), extended
//! continuously to r = 0 with limit (mu / 2R)^{-alpha} / Gamma(1 - alpha).
//!
//! Route B (shooting): the profile solves
//!
//!     -g'' - ((n-1)/(p-1)) g'/r = (p/(p-1)) lambda g,  g(0) = 1,  g'(0) = 0,
//!
//! integrated by fixed-step RK4 from a series start near r = 0.  lambda is
//! bisected on the count of interior sign changes of g on (0, R), which
//! jumps from 0 to 1 exactly at the principal eigenvalue; counting crossings
//! instead of testing the sign of g(R) keeps the bracket monotone even when
//! higher modes are close.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::{first_zero, gamma};

/// Dimension and exponent of one eigenvalue problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemParams {
    pub n: u32,
    pub p: f64,
}

impl ProblemParams {
    pub fn new(n: u32, p: f64) -> Result<Self> {
        if !(2..=8).contains(&n) {
            return Err(Error::Domain(format!("dimension n = {n} outside 2..=8")));
        }
        if !p.is_finite() || p <= 1.0 {
            return Err(Error::Domain(format!("exponent p = {p} must exceed 1")));
        }
        Ok(ProblemParams { n, p })
    }

    /// alpha = (p - n) / (2 (p - 1)); the profile is r^alpha J_{-alpha}.
    pub fn alpha(self) -> f64 {
        (self.p - self.n as f64) / (2.0 * (self.p - 1.0))
    }

    /// Order of the Bessel function carrying the radial profile.
    pub fn bessel_order(self) -> f64 {
        -self.alpha()
    }
}

fn check_radius(radius: f64) -> Result<()> {
    if !radius.is_finite() || radius <= 0.0 {
        return Err(Error::Domain(format!("radius {radius} must be positive")));
    }
    Ok(())
}

/// Route A: lambda(B_R) = ((p-1)/p) (mu / R)^2 with mu the first zero of
/// J_{-alpha}.
pub fn ball_eigenvalue_bessel(params: ProblemParams, radius: f64) -> Result<f64> {
    check_radius(radius)?;
    let mu = first_zero(params.bessel_order())?;
    let scaled = mu / radius;
    Ok((params.p - 1.0) / params.p * scaled * scaled)
}

/// Radial eigenfunction profile r^alpha J_{-alpha}(mu r / R) on [0, R].
///
/// Evaluated as the power series of the product, which is finite at r = 0
/// where the two factors separately vanish/blow up; no normalization is
/// applied (the value at r = 0 is (mu/2R)^{-alpha} / Gamma(1 - alpha)).
pub fn radial_eigenfunction(params: ProblemParams, radius: f64, r: f64) -> Result<f64> {
    check_radius(radius)?;
    if !r.is_finite() || r < 0.0 || r > radius {
        return Err(Error::Domain(format!("r = {r} outside [0, {radius}]")));
    }
    let alpha = params.alpha();
    let mu = first_zero(-alpha)?;
    let w = mu / (2.0 * radius);
    // sum_m (-1)^m w^{-alpha} (w r)^{2m} / (m! Gamma(m + 1 - alpha))
    let q = (w * r) * (w * r);
    let mut term = w.powf(-alpha) / gamma(1.0 - alpha)?;
    let mut sum = term;
    let mut comp = 0.0;
    let mut peak = term.abs();
    for m in 1..=200usize {
        term *= -q / (m as f64 * (m as f64 - alpha));
        let y = term - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
        let mag = term.abs();
        peak = peak.max(mag);
        if m >= 20 && mag <= f64::EPSILON * peak {
            return Ok(sum);
        }
    }
    Err(Error::NoConvergence {
        iterations: 200,
        residual: term.abs(),
    })
}

/// Closed-form profile sampled on a uniform radial grid and normalized to
/// g(0) = 1.
pub fn radial_profile(params: ProblemParams, radius: f64, samples: usize) -> Result<Vec<(f64, f64)>> {
    if samples < 2 {
        return Err(Error::Domain("need at least 2 profile samples".into()));
    }
    let g0 = radial_eigenfunction(params, radius, 0.0)?;
    let mut out = Vec::with_capacity(samples);
    for k in 0..samples {
        let r = radius * k as f64 / (samples - 1) as f64;
        out.push((r, radial_eigenfunction(params, radius, r)? / g0));
    }
    Ok(out)
}

/// Result of the shooting route.
#[derive(Debug, Clone)]
pub struct ShootingSolution {
    pub lambda: f64,
    /// Profile (r, g(r)) at the found lambda, decimated to ~1000 samples,
    /// normalized to g(0) = 1.
    pub profile: Vec<(f64, f64)>,
    pub bisections: usize,
}

const SHOOT_STEPS: usize = 20_000;
const SHOOT_REL_TOL: f64 = 1e-13;
/// Profile is stored every this many RK4 nodes.
const PROFILE_STRIDE: usize = 20;

struct OdeCoeffs {
    c: f64,      // (n-1)/(p-1)
    lam_big: f64, // (p/(p-1)) lambda
}

impl OdeCoeffs {
    fn new(params: ProblemParams, lambda: f64) -> Self {
        let c = (params.n as f64 - 1.0) / (params.p - 1.0);
        OdeCoeffs {
            c,
            lam_big: params.p / (params.p - 1.0) * lambda,
        }
    }

    // Series start g = 1 + a2 r^2 + a4 r^4 + a6 r^6 from the recurrence
    // a_k = -lam_big a_{k-2} / (k (k - 1 + c)).
    fn series(&self, r: f64) -> (f64, f64) {
        let a2 = -self.lam_big / (2.0 * (1.0 + self.c));
        let a4 = -self.lam_big * a2 / (4.0 * (3.0 + self.c));
        let a6 = -self.lam_big * a4 / (6.0 * (5.0 + self.c));
        let r2 = r * r;
        let g = 1.0 + r2 * (a2 + r2 * (a4 + r2 * a6));
        let dg = r * (2.0 * a2 + r2 * (4.0 * a4 + r2 * 6.0 * a6));
        (g, dg)
    }

    fn rhs(&self, r: f64, g: f64, v: f64) -> (f64, f64) {
        (v, -self.c / r * v - self.lam_big * g)
    }
}

/// Integrates the radial ODE and returns the number of sign changes of g
/// along the sampled grid on (0, R]; optionally records the decimated
/// profile.  The count jumps from 0 to 1 exactly when g(R) reaches zero,
/// i.e. at the principal eigenvalue.
fn shoot(
    params: ProblemParams,
    radius: f64,
    lambda: f64,
    mut profile: Option<&mut Vec<(f64, f64)>>,
) -> usize {
    let ode = OdeCoeffs::new(params, lambda);
    let h = radius / SHOOT_STEPS as f64;
    let mut crossings = 0usize;
    let mut prev = 1.0f64; // g(0)
    let mut record = |i: usize, g: f64, crossings: &mut usize, prev: &mut f64| {
        if i > 0 && prev.signum() != g.signum() {
            *crossings += 1;
        }
        *prev = g;
        if let Some(p) = profile.as_deref_mut() {
            if i % PROFILE_STRIDE == 0 {
                p.push((i as f64 * h, g));
            }
        }
    };
    record(0, 1.0, &mut crossings, &mut prev);
    // Indices 1 and 2 come from the series; the ODE is singular at r = 0.
    let (g1, _) = ode.series(h);
    record(1, g1, &mut crossings, &mut prev);
    let (mut g, mut v) = ode.series(2.0 * h);
    record(2, g, &mut crossings, &mut prev);
    for i in 2..SHOOT_STEPS {
        let r = i as f64 * h;
        let (k1g, k1v) = ode.rhs(r, g, v);
        let (k2g, k2v) = ode.rhs(r + 0.5 * h, g + 0.5 * h * k1g, v + 0.5 * h * k1v);
        let (k3g, k3v) = ode.rhs(r + 0.5 * h, g + 0.5 * h * k2g, v + 0.5 * h * k2v);
        let (k4g, k4v) = ode.rhs(r + h, g + h * k3g, v + h * k3v);
        g += h / 6.0 * (k1g + 2.0 * k2g + 2.0 * k3g + k4g);
        v += h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
        record(i + 1, g, &mut crossings, &mut prev);
    }
    crossings
}

/// Route B: bisect lambda on "the profile crosses zero on (0, R]".
pub fn ball_eigenvalue_shooting(params: ProblemParams, radius: f64) -> Result<ShootingSolution> {
    check_radius(radius)?;
    let mut lo = 0.0f64; // zero crossings: g stays positive for lambda below lambda_1
    let mut hi = 1.0 / (radius * radius);
    let mut doublings = 0usize;
    while shoot(params, radius, hi, None) == 0 {
        hi *= 2.0;
        doublings += 1;
        if doublings > 80 {
            return Err(Error::NoSignChange {
                lo,
                hi,
                context: "shooting bracket expansion".into(),
            });
        }
    }
    let mut bisections = 0usize;
    while hi - lo > SHOOT_REL_TOL * hi {
        let mid = 0.5 * (lo + hi);
        if shoot(params, radius, mid, None) == 0 {
            lo = mid;
        } else {
            hi = mid;
        }
        bisections += 1;
        if bisections > 200 {
            break;
        }
    }
    let lambda = 0.5 * (lo + hi);
    let mut profile = Vec::with_capacity(SHOOT_STEPS / PROFILE_STRIDE + 1);
    shoot(params, radius, lambda, Some(&mut profile));
    Ok(ShootingSolution {
        lambda,
        profile,
        bisections,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    const BESSEL_ROUTE_REL_TOL: f64 = 1e-10;
    const ROUTE_AGREEMENT_REL_TOL: f64 = 1e-8;
    const SCALING_REL_TOL: f64 = 1e-12;
    const PROFILE_SPOT_REL_TOL: f64 = 1e-12;
    const PROFILE_MATCH_TOL: f64 = 1e-6;

    fn assert_rel(actual: f64, expected: f64, tol: f64) {
        let rel = (actual - expected).abs() / expected.abs();
        assert!(
            rel <= tol,
            "got {actual:.17e}, want {expected:.17e} (rel err {rel:.3e} > {tol:.1e})"
        );
    }

    #[test]
    fn params_validation() {
        assert!(ProblemParams::new(1, 2.0).is_err());
        assert!(ProblemParams::new(2, 1.0).is_err());
        assert!(ProblemParams::new(2, 0.5).is_err());
        assert!(ProblemParams::new(2, f64::NAN).is_err());
        assert!(ProblemParams::new(3, 1.2).is_ok());
    }

    #[test]
    fn bessel_route_spot_values() {
        // 40-digit reference values for ((p-1)/p) (mu / R)^2.
        let spots = [
            (2, 2.0, 1.0, 2.8915929814733923),
            (2, 2.0, 2.0, 0.72289824536834807),
            (3, 2.0, 1.0, 4.9348022005446793), // pi^2 / 2
            (2, 1.5, 1.0, 3.2898681336964529), // pi^2 / 3
            (2, 3.0, 1.0, 2.6834922486816376),
            (2, 10.0, 1.0, 2.5162199819290940),
            (3, 1.2, 1.0, 11.159051987517468),
        ];
        for (n, p, radius, want) in spots {
            let params = ProblemParams::new(n, p).unwrap();
            let got = ball_eigenvalue_bessel(params, radius).unwrap();
            assert_rel(got, want, BESSEL_ROUTE_REL_TOL);
        }
    }

    #[test]
    fn p_equals_n_collapses_to_order_zero() {
        // alpha = 0 at p = n: lambda = ((p-1)/p) j01^2 / R^2 in any dimension.
        let j01 = 2.4048255576957728f64;
        for n in [2u32, 3] {
            let p = n as f64;
            let params = ProblemParams::new(n, p).unwrap();
            assert_eq!(params.alpha(), 0.0);
            let want = (p - 1.0) / p * j01 * j01;
            assert_rel(ball_eigenvalue_bessel(params, 1.0).unwrap(), want, 1e-11);
        }
    }

    #[test]
    fn eigenvalue_scales_like_inverse_radius_squared() {
        let params = ProblemParams::new(2, 3.0).unwrap();
        let base = ball_eigenvalue_bessel(params, 1.0).unwrap();
        let base_shoot = ball_eigenvalue_shooting(params, 1.0).unwrap().lambda;
        for radius in [0.5, 2.0, 7.0] {
            let lam = ball_eigenvalue_bessel(params, radius).unwrap();
            assert_rel(lam * radius * radius, base, SCALING_REL_TOL);
            let lam_shoot = ball_eigenvalue_shooting(params, radius).unwrap().lambda;
            assert_rel(lam_shoot * radius * radius, base_shoot, SCALING_REL_TOL);
        }
    }

    #[test]
    fn routes_agree_on_a_parameter_sample() {
        // The full acceptance sweep lives in tests/acceptance.rs; this keeps
        // a fast cross-section in the unit suite.
        for (n, p) in [(2u32, 2.0), (3, 2.0), (2, 3.0), (3, 1.5)] {
            let params = ProblemParams::new(n, p).unwrap();
            let bessel = ball_eigenvalue_bessel(params, 1.0).unwrap();
            let shoot = ball_eigenvalue_shooting(params, 1.0).unwrap().lambda;
            assert_rel(shoot, bessel, ROUTE_AGREEMENT_REL_TOL);
        }
    }

    #[test]
    fn profile_spot_values() {
        // n=3, p=2: profile proportional to sin(pi r)/r; value at r = 0 is
        // sqrt(2), at r = 1/2 it is 2 sqrt(2)/pi.
        let params = ProblemParams::new(3, 2.0).unwrap();
        let g0 = radial_eigenfunction(params, 1.0, 0.0).unwrap();
        let gh = radial_eigenfunction(params, 1.0, 0.5).unwrap();
        assert_rel(g0, std::f64::consts::SQRT_2, PROFILE_SPOT_REL_TOL);
        assert_rel(gh, 0.90031631615710607, PROFILE_SPOT_REL_TOL);
        assert_rel(gh / g0, 2.0 / PI, PROFILE_SPOT_REL_TOL);

        // n=2, p=3 (alpha = 1/4, genuinely fractional order).
        let params = ProblemParams::new(2, 3.0).unwrap();
        let spots = [
            (0.0, 0.81540759612008248),
            (0.25, 0.74824765851143992),
            (0.5, 0.56096076057662016),
            (0.75, 0.29294587655229402),
        ];
        for (r, want) in spots {
            let got = radial_eigenfunction(params, 1.0, r).unwrap();
            assert_rel(got, want, PROFILE_SPOT_REL_TOL);
        }
        // The profile vanishes at r = R.
        let edge = radial_eigenfunction(params, 1.0, 1.0).unwrap();
        assert!(edge.abs() < 1e-10, "profile at R should vanish, got {edge:.3e}");
    }

    #[test]
    fn shooting_profile_matches_closed_form() {
        let params = ProblemParams::new(2, 3.0).unwrap();
        let sol = ball_eigenvalue_shooting(params, 1.0).unwrap();
        // Normalize the closed form to agree with the shot profile at R/2,
        // then compare along the whole radius.
        let closed_half = radial_eigenfunction(params, 1.0, 0.5).unwrap();
        let shot_half = sol
            .profile
            .iter()
            .min_by(|a, b| {
                (a.0 - 0.5).abs().partial_cmp(&(b.0 - 0.5).abs()).unwrap()
            })
            .unwrap()
            .1;
        let scale = shot_half / closed_half;
        let mut worst = 0.0f64;
        for &(r, g) in &sol.profile {
            let want = scale * radial_eigenfunction(params, 1.0, r).unwrap();
            worst = worst.max((g - want).abs());
        }
        assert!(
            worst <= PROFILE_MATCH_TOL,
            "profile mismatch {worst:.3e} > {PROFILE_MATCH_TOL:.1e}"
        );
    }

    #[test]
    fn eigenvalue_decreases_with_radius() {
        let params = ProblemParams::new(2, 2.5).unwrap();
        let small = ball_eigenvalue_bessel(params, 0.7).unwrap();
        let large = ball_eigenvalue_bessel(params, 1.3).unwrap();
        assert!(small > large);
    }

    #[test]
    fn rejects_bad_radius_and_sample_args() {
        let params = ProblemParams::new(2, 2.0).unwrap();
        assert!(ball_eigenvalue_bessel(params, 0.0).is_err());
        assert!(ball_eigenvalue_bessel(params, -1.0).is_err());
        assert!(radial_eigenfunction(params, 1.0, 1.5).is_err());
        assert!(radial_eigenfunction(params, 1.0, -0.1).is_err());
        assert!(radial_profile(params, 1.0, 1).is_err());
    }
}
