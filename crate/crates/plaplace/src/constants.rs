//! Explicit constants in the eigenvalue lower bound and the ball identity.
//!
//! For a bounded domain in R^n the first eigenvalue satisfies
//!
//!     lambda >= K(n, p) |domain|^(-2/n),
//!
//! with the fully explicit constant
//!
//!     K(n, p) = (n min(p-1, 1))^2 / (p (p-1))
//!               * 4^(1/n - 1) pi^(1 + 1/n) Gamma((n+1)/2)^(-2/n).
//!
//! Balls attain the larger value
//!
//!     K*(n, p) = lambda(ball) * |ball|^(2/n)
//!              = pi ((p-1)/p) Gamma(1 + n/2)^(-2/n) mu^2,
//!
//! where mu is the first zero of J_{-alpha}; the ratio g_n(p) = K*/K is >= 1
//! everywhere and minimal near p = 2.
//!
//! The bound is driven by the integral
//!
//!     I_g(n, p, lambda) = integral over R^n of
//!                         (lambda + ((p-1)/p) |q|^2)^(-n) dq,
//!
//! which has the closed form
//!     2^(1-n) pi^((n+1)/2) (p/(p-1))^(n/2) lambda^(-n/2) / Gamma((n+1)/2)
//! and is also computed here by adaptive quadrature as an independent check.

use crate::error::{Error, Result};
use crate::radial::ProblemParams;
use crate::special::{first_zero, gamma};

use std::f64::consts::PI;

/// Default exponent grid: `DEFAULT_P_POINTS` log-spaced points on
/// [`DEFAULT_P_MIN`, `DEFAULT_P_MAX`], with the point nearest 2 snapped onto
/// 2 exactly so the grid exhibits the minimum of the ratio curve.
pub const DEFAULT_P_MIN: f64 = 1.05;
pub const DEFAULT_P_MAX: f64 = 20.0;
pub const DEFAULT_P_POINTS: usize = 200;

fn check_np(n: u32, p: f64) -> Result<f64> {
    if !(2..=8).contains(&n) {
        return Err(Error::Domain(format!("dimension n = {n} outside 2..=8")));
    }
    if !p.is_finite() || p <= 1.0 {
        return Err(Error::Domain(format!("exponent p = {p} must exceed 1")));
    }
    Ok(n as f64)
}

/// K(n, p): explicit constant of the measure lower bound.
pub fn faber_krahn_constant(n: u32, p: f64) -> Result<f64> {
    let nf = check_np(n, p)?;
    let a = nf * (p - 1.0).min(1.0);
    let inv_n = 1.0 / nf;
    Ok(a * a / (p * (p - 1.0))
        * 4.0f64.powf(inv_n - 1.0)
        * PI.powf(1.0 + inv_n)
        * gamma((nf + 1.0) / 2.0)?.powf(-2.0 * inv_n))
}

/// K*(n, p) = lambda(ball) |ball|^(2/n), via the Bessel zero.
pub fn ball_constant(n: u32, p: f64) -> Result<f64> {
    let nf = check_np(n, p)?;
    let params = ProblemParams::new(n, p)?;
    let mu = first_zero(params.bessel_order())?;
    Ok(PI * (p - 1.0) / p * gamma(1.0 + nf / 2.0)?.powf(-2.0 / nf) * mu * mu)
}

/// g_n(p) = K*(n, p) / K(n, p) >= 1.
pub fn constant_ratio(n: u32, p: f64) -> Result<f64> {
    Ok(ball_constant(n, p)? / faber_krahn_constant(n, p)?)
}

/// Lebesgue measure of the n-ball of the given radius.
pub fn ball_measure(n: u32, radius: f64) -> Result<f64> {
    if !(2..=8).contains(&n) {
        return Err(Error::Domain(format!("dimension n = {n} outside 2..=8")));
    }
    if !radius.is_finite() || radius <= 0.0 {
        return Err(Error::Domain(format!("radius {radius} must be positive")));
    }
    let nf = n as f64;
    Ok(PI.powf(nf / 2.0) * radius.powi(n as i32) / gamma(1.0 + nf / 2.0)?)
}

/// Prefactor of the terminal measure bound: (p / (n min(p-1, 1)))^n.
pub fn terminal_prefactor(n: u32, p: f64) -> Result<f64> {
    let nf = check_np(n, p)?;
    Ok((p / (nf * (p - 1.0).min(1.0))).powi(n as i32))
}

/// One row of the ratio table.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstantsRow {
    pub n: u32,
    pub p: f64,
    pub k: f64,
    pub k_star: f64,
    pub ratio: f64,
}

/// Log-spaced exponent grid on [p_min, p_max]; when the range covers p = 2
/// the nearest grid point is snapped onto 2 exactly, so sampled minima of the
/// ratio curve land on the analytic minimizer rather than beside it.
pub fn log_p_grid(p_min: f64, p_max: f64, points: usize) -> Result<Vec<f64>> {
    if !(p_min.is_finite() && p_max.is_finite()) || p_min <= 1.0 || p_max < p_min {
        return Err(Error::Domain(format!(
            "need 1 < p_min <= p_max, got [{p_min}, {p_max}]"
        )));
    }
    if points == 0 {
        return Err(Error::Domain("need at least one grid point".into()));
    }
    if points == 1 {
        return Ok(vec![p_min]);
    }
    let (lo, hi) = (p_min.ln(), p_max.ln());
    let mut grid: Vec<f64> = (0..points)
        .map(|k| (lo + (hi - lo) * k as f64 / (points - 1) as f64).exp())
        .collect();
    grid[0] = p_min;
    grid[points - 1] = p_max;
    if p_min <= 2.0 && 2.0 <= p_max {
        let nearest = (0..points)
            .min_by(|&a, &b| {
                (grid[a] - 2.0)
                    .abs()
                    .partial_cmp(&(grid[b] - 2.0).abs())
                    .unwrap()
            })
            .unwrap();
        grid[nearest] = 2.0;
    }
    Ok(grid)
}

/// Default grid, see [`log_p_grid`].
pub fn default_p_grid() -> Vec<f64> {
    log_p_grid(DEFAULT_P_MIN, DEFAULT_P_MAX, DEFAULT_P_POINTS).expect("default grid is valid")
}

/// Ratio table over an exponent grid.
pub fn ratio_curve(n: u32, p_grid: &[f64]) -> Result<Vec<ConstantsRow>> {
    p_grid
        .iter()
        .map(|&p| {
            let k = faber_krahn_constant(n, p)?;
            let k_star = ball_constant(n, p)?;
            Ok(ConstantsRow {
                n,
                p,
                k,
                k_star,
                ratio: k_star / k,
            })
        })
        .collect()
}

/// I_g by its closed form.
pub fn ball_integral_closed_form(n: u32, p: f64, lambda: f64) -> Result<f64> {
    let nf = check_np(n, p)?;
    if !lambda.is_finite() || lambda <= 0.0 {
        return Err(Error::Domain(format!("lambda = {lambda} must be positive")));
    }
    Ok(2.0f64.powf(1.0 - nf)
        * PI.powf((nf + 1.0) / 2.0)
        * (p / (p - 1.0)).powf(nf / 2.0)
        * lambda.powf(-nf / 2.0)
        / gamma((nf + 1.0) / 2.0)?)
}

/// I_g by adaptive Simpson quadrature in the radial variable:
///
///     I_g = omega_n * integral_0^T rho^(n-1) (lambda + b rho^2)^(-n) drho,
///
/// b = (p-1)/p, omega_n the surface measure of the unit sphere.  T is chosen
/// so the dropped tail, bounded by b^(-n) T^(-n) / n, is below 1e-13 of the
/// integral.
pub fn ball_integral_quadrature(n: u32, p: f64, lambda: f64) -> Result<f64> {
    let nf = check_np(n, p)?;
    if !lambda.is_finite() || lambda <= 0.0 {
        return Err(Error::Domain(format!("lambda = {lambda} must be positive")));
    }
    let b = (p - 1.0) / p;
    let omega = 2.0 * PI.powf(nf / 2.0) / gamma(nf / 2.0)?;
    let f = |rho: f64| rho.powi(n as i32 - 1) * (lambda + b * rho * rho).powi(-(n as i32));
    let scale = (lambda / b).sqrt();
    // Coarse pass to set the absolute tolerance.
    let coarse_hi = 20.0 * scale;
    let mut rough = 0.0;
    let m = 2000;
    let dr = coarse_hi / m as f64;
    for k in 0..m {
        let a = k as f64 * dr;
        rough += dr / 6.0 * (f(a) + 4.0 * f(a + 0.5 * dr) + f(a + dr));
    }
    // Tail cut: b^(-n) T^(-n) / n <= 1e-13 * rough.
    let t_cut = scale * 10.0f64.powf(14.0 / nf) * 2.0;
    let tail_bound = b.powf(-nf) * t_cut.powf(-nf) / nf;
    debug_assert!(tail_bound <= 1e-13 * rough);
    let tol = 1e-13 * rough;
    // The mass sits near rho ~ scale; a single adaptive pass over [0, T]
    // would sample right past it.  Head panel up to 20 * scale, then dyadic
    // panels out to the cut.
    let head_hi = (20.0 * scale).min(t_cut);
    let mut total = adaptive_simpson(&f, 0.0, head_hi, 0.5 * tol, 60);
    let mut lo = head_hi;
    while lo < t_cut {
        let hi = (2.0 * lo).min(t_cut);
        total += adaptive_simpson(&f, lo, hi, 0.01 * tol, 60);
        lo = hi;
    }
    Ok(omega * total)
}

fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: usize) -> f64 {
    let m = 0.5 * (a + b);
    let fa = f(a);
    let fm = f(m);
    let fb = f(b);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(f, a, b, fa, fm, fb, whole, tol, depth)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: usize,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}
