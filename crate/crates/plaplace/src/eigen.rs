//! First Dirichlet eigenpairs on lattice domains.
//!
//! The eigenproblem F_p[u] = lambda u with u = 0 outside the shape is
//! solved by inverse power iteration: each outer step solves the Dirichlet
//! problem F_p[v] = u_k by nonlinear red-black SOR, reads off the quotient
//! u_k / v at every node carrying mass, and renormalizes.  Because the
//! solve kernel is order preserving, the extreme quotients bracket the
//! eigenvalue from both sides at every step (Collatz-Wielandt); iteration
//! stops once the bracket is relatively tighter than `tol_bracket` and the
//! midpoint is reported.
//!
//! The SOR update exploits that the stencil's derivative in the center
//! value is known in closed form (2 (a_xx + a_yy - w) / h^2 with w the
//! corner weight), so each update is an exact pointwise Newton step.
//!
//! The `verify_*` helpers re-derive qualitative properties of the computed
//! pair (uniqueness of the ground state, symmetry inheritance, boundary
//! gradient positivity, eigenvalue bounds) so downstream checks do not
//! trust the solver's own bookkeeping.

use crate::constants::faber_krahn_constant;
use crate::error::{Error, Result};
use crate::grid::{boundary_loops, squared_edt, DomainConfig, GridDomain, ScalarField, Shape};
use crate::radial::{ball_eigenvalue_bessel, ProblemParams};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use std::f64::consts::PI;

/// Quotients are read only where the source field exceeds this share of
/// its sup norm.
const QUOTIENT_FLOOR: f64 = 1e-8;
/// Inner solves target this fraction of the current bracket width.
const INNER_TOL_FACTOR: f64 = 0.03;
/// Residual target of the first, cold inner solve.  Deliberately loose:
/// the start field's error is dominated by eigen-directions that the
/// outer iteration removes far more cheaply than sweeps can, and the
/// tolerance ladder tightens with the bracket from the second solve on.
/// Ring-like shapes make the cost concrete: their slow azimuthal mode
/// takes tens of thousands of sweeps to relax but only a handful of
/// outer rounds to project away.
const FIRST_INNER_TOL: f64 = 3e-2;
/// Relative amplitude of the start-vector noise.
const NOISE_AMPLITUDE: f64 = 0.3;
/// Direction regularization scale.  The stencil coefficients use
/// g g^T / (|g|^2 + gamma^2) with gamma = this constant * sup|u| / N^2
/// (N the larger lattice dimension), so the cross weight fades out
/// quadratically as the gradient samples sink toward critical-point
/// noise instead of switching on a hard threshold (a switch driven by
/// sub-scale samples flips every sweep and locks the solve in a limit
/// cycle).  The 1/N^2 law matches the samples' own scaling: a sample
/// one cell from a critical point is of order h^2 |D^2 u|, so this
/// gamma keeps the regularized strip a fixed few cells wide on any
/// lattice.  That bounds the weight map's slope (about b N^2 / sup per
/// unit sample) by what the inner solves can actually resolve; a much
/// smaller gamma leaves near-critical weights so steep that value noise
/// far below the residual target still swings them, and the residual
/// floors instead of converging.  The strip's physical width shrinks
/// like h, and away from critical points the perturbation is
/// O((gamma / |g|)^2) and invisible.  Built from samples and the
/// logical lattice only, so the blend is invariant under exact lattice
/// rescaling.
const DIRECTION_FLOOR_SCALE: f64 = 8.0;

/// Iteration controls; `Default` suits all shipped examples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Outer power-iteration steps before giving up.
    pub max_outer: usize,
    /// SOR sweeps per inner Dirichlet solve before giving up.
    pub inner_sweeps: usize,
    /// Relative Collatz-Wielandt bracket width at which to stop.
    pub tol_bracket: f64,
    /// Seed for the start-vector noise.
    pub seed: u64,
    /// SOR relaxation factor; `None` picks one from p and the lattice.
    pub relax: Option<f64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            // Power iteration contracts the bracket by the eigenvalue
            // ratio; ring-like shapes have nearly degenerate second
            // eigenvalues and need several hundred rounds.
            max_outer: 1000,
            inner_sweeps: 60_000,
            tol_bracket: 1e-6,
            seed: 0,
            relax: None,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_outer == 0 || self.inner_sweeps == 0 {
            return Err(Error::Config("iteration limits must be positive".into()));
        }
        if !(1e-8..=0.1).contains(&self.tol_bracket) {
            return Err(Error::Config(format!(
                "tol_bracket = {} outside the resolvable range [1e-8, 0.1]",
                self.tol_bracket
            )));
        }
        if let Some(relax) = self.relax {
            if !(0.1..2.0).contains(&relax) {
                return Err(Error::Config(format!("relax = {relax} outside (0.1, 2)")));
            }
        }
        Ok(())
    }
}

/// Converged eigenpair.  Only the scalar summary serializes; the field and
/// the bracket history stay in memory.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EigenPair {
    pub lambda: f64,
    pub cw_low: f64,
    pub cw_high: f64,
    /// Outer iterations used.
    pub iterations: usize,
    /// sup |F_p[u] - lambda u| over interior nodes at convergence.
    pub residual: f64,
    #[serde(skip)]
    pub u: ScalarField,
    /// (cw_low, cw_high) per outer iteration.
    #[serde(skip)]
    pub history: Vec<(f64, f64)>,
}

fn check_p(p: f64) -> Result<()> {
    if !p.is_finite() || p <= 1.0 {
        return Err(Error::Domain(format!("exponent p = {p} must exceed 1")));
    }
    Ok(())
}

/// Stencil weights at one node, paired by symmetry and already divided
/// by h^2: `qe` multiplies E + W, `qn` multiplies N + S, `qpos` the
/// NE + SW corners, `qneg` the NW + SE corners.  The center weight is
/// 2 (qe + qn + qpos + qneg); the four-corner remainder used beyond the
/// monotone range splits antisymmetrically over `qpos` / `qneg`, so it
/// cancels from that sum and the Newton diagonal stays exact.
#[derive(Clone, Copy)]
struct NodeCoeffs {
    qe: f64,
    qn: f64,
    qpos: f64,
    qneg: f64,
}

impl NodeCoeffs {
    const ZERO: NodeCoeffs = NodeCoeffs { qe: 0.0, qn: 0.0, qpos: 0.0, qneg: 0.0 };
}

/// Stencil weights from the gradient samples `(e - w, n - s)` of the
/// given field, which carry a factor 2h.  `gamma2` is the squared
/// direction regularization.
///
/// The second-order part is A : D2u with A = (1/p) I + b g g^T / (|g|^2
/// + gamma^2).  Away from critical points this is the usual
/// direction-projected form up to O((gamma / |g|)^2); as the samples
/// sink below gamma the coefficients fade out quadratically and the
/// stencil degenerates to tr D2u / p, which sits between the two
/// directional envelopes of the operator, the relaxed consistency a
/// monotone scheme needs where the direction is undefined.
///
/// The cross term uses the corner pair matching sign(a_xy), so every
/// neighbor weight is nonnegative wherever |a_xy| <= min(a_xx, a_yy);
/// that holds up to p ~ 6.8 at the worst directions, beyond which the
/// corner weight is clamped and the small remainder routed through the
/// centered four-corner cross.  Monotone weights keep the sweeps
/// contractive where a plain four-corner cross loses diagonal
/// dominance.
#[inline(always)]
fn node_coeffs(
    values: &[f64],
    idx: usize,
    nx: usize,
    inv_h2: f64,
    p: f64,
    b: f64,
    gamma2: f64,
) -> NodeCoeffs {
    let gx = values[idx + 1] - values[idx - 1];
    let gy = values[idx + nx] - values[idx - nx];
    // The clamp keeps the all-zero field (a cold Dirichlet start) on
    // the degenerate tr/p limit instead of producing 0 * inf.
    let inv_denom = 1.0 / (gx * gx + gy * gy + gamma2).max(f64::MIN_POSITIVE);
    let a_xx = 1.0 / p + b * gx * gx * inv_denom;
    let a_yy = 1.0 / p + b * gy * gy * inv_denom;
    let a_xy = b * gx * gy * inv_denom;
    let w_cross = a_xy.abs().min(a_xx).min(a_yy);
    let half_leftover = 0.5 * (a_xy.abs() - w_cross) * a_xy.signum();
    let (mut qpos, mut qneg) = if a_xy >= 0.0 { (w_cross, 0.0) } else { (0.0, w_cross) };
    qpos += half_leftover;
    qneg -= half_leftover;
    NodeCoeffs {
        qe: (a_xx - w_cross) * inv_h2,
        qn: (a_yy - w_cross) * inv_h2,
        qpos: qpos * inv_h2,
        qneg: qneg * inv_h2,
    }
}

/// Operator value F and its center derivative m under frozen weights.
#[inline(always)]
fn frozen_apply(values: &[f64], idx: usize, nx: usize, k: &NodeCoeffs) -> (f64, f64) {
    let ring = k.qe * (values[idx + 1] + values[idx - 1])
        + k.qn * (values[idx + nx] + values[idx - nx])
        + k.qpos * (values[idx + nx + 1] + values[idx - nx - 1])
        + k.qneg * (values[idx + nx - 1] + values[idx - nx + 1]);
    let m = 2.0 * (k.qe + k.qn + k.qpos + k.qneg);
    (m * values[idx] - ring, m)
}

struct SorOutcome {
    residual: f64,
    relax: f64,
}

/// The gamma of the direction blend for this field on this lattice.
fn direction_floor(domain: &GridDomain, u: &ScalarField) -> f64 {
    let n = domain.nx.max(domain.ny) as f64;
    DIRECTION_FLOOR_SCALE * u.max_abs() / (n * n)
}

/// Worst |F_p[u] - lambda u| over the given nodes, evaluated with the
/// solver's own stencil at fresh coefficients.
fn stencil_residual(
    domain: &GridDomain,
    u: &ScalarField,
    p: f64,
    lambda: f64,
    nodes: &[usize],
) -> f64 {
    let inv_h2 = 1.0 / (domain.h * domain.h);
    let b = (p - 2.0) / p;
    let gamma = direction_floor(domain, u);
    let gamma2 = gamma * gamma;
    let mut residual = 0.0f64;
    for &idx in nodes {
        let k = node_coeffs(&u.values, idx, domain.nx, inv_h2, p, b, gamma2);
        let (value, _) = frozen_apply(&u.values, idx, domain.nx, &k);
        residual = residual.max((value - lambda * u.values[idx]).abs());
    }
    residual
}

/// Share of the target the frozen linear solve must clear, leaving
/// headroom for the drift the refreeze reveals.
const FROZEN_TARGET_SHARE: f64 = 0.3;
/// A linear phase also stops once its residual is this share of the
/// nonlinear residual measured at the freeze: solving the frozen system
/// further is wasted while the coefficient drift still dominates.
const INEXACT_SHARE: f64 = 0.1;
/// Initial refreeze damping: the stored weights move only this far
/// toward the freshly computed ones.  Undamped refreezing can flip-flop
/// between two weight assignments at near-critical nodes; averaging
/// turns that period-2 cycle into geometric decay.  Convex combinations
/// of monotone stencils are monotone, so the damped operator keeps
/// every guarantee of the fresh one.
const PICARD_BLEND: f64 = 0.5;
/// Floor for the adaptive blend.  Each time the nonlinear residual
/// fails to improve for two consecutive rounds the blend halves; the
/// floor keeps progress from stopping outright.
const PICARD_BLEND_FLOOR: f64 = 1.0 / 32.0;
/// Pseudo-time damping bounds.  When the nonlinear residual bursts
/// upward between rounds the sweep step is divided by (1 + damp),
/// which bounds how far one round can carry the field; the damping
/// decays again while the residual improves, so smooth stretches run
/// at full Newton steps.  The fixed point is untouched.
const DAMP_CAP: f64 = 16.0;
const DAMP_DECAY: f64 = 0.5;

/// Nonlinear sweeps for F_p[u] = f over the inside nodes, zero outside,
/// organized as Picard rounds: the direction weights are frozen from
/// the current field, the frozen linear stencil is relaxed by red-black
/// SOR until its residual clears a share of the target, and the weights
/// are refrozen.  The returned residual always comes from fresh
/// weights.  Freezing is what makes the sweeps robust: a direction that
/// reacts within the sweep feeds value changes at near-critical nodes
/// back into their own gradient samples, and that loop can lock whole
/// neighborhoods into limit cycles no relaxation damping breaks.
/// Diverging linear residuals still pull the relaxation factor toward 1.
#[allow(clippy::too_many_arguments)]
fn sor_sweeps(
    domain: &GridDomain,
    f: &[f64],
    p: f64,
    u: &mut ScalarField,
    nodes: &(Vec<u32>, Vec<u32>),
    eps_abs: f64,
    max_sweeps: usize,
    mut relax: f64,
) -> Result<SorOutcome> {
    let nx = domain.nx;
    let inv_h2 = 1.0 / (domain.h * domain.h);
    let b = (p - 2.0) / p;

    if std::env::var_os("SOR_TRACE").is_some() {
        let fs = f.iter().fold(0.0f64, |a, &x| a.max(x.abs()));
        eprintln!(
            "sor_sweeps: nodes={}+{} sup_f={fs:.3e} eps={eps_abs:.3e} max_sweeps={max_sweeps}",
            nodes.0.len(),
            nodes.1.len()
        );
    }
    let mut coeffs = vec![NodeCoeffs::ZERO; u.values.len()];
    let mut fresh = f64::INFINITY;
    let mut total = 0usize;
    let mut first_round = true;
    let mut blend = PICARD_BLEND;
    let mut best_fresh = f64::INFINITY;
    let mut stalled = 0usize;
    let mut prev_fresh = f64::INFINITY;
    let mut damp = 0.0f64;
    while total < max_sweeps {
        // Refreeze from the current field; the same pass measures the
        // true nonlinear residual.
        let gamma = direction_floor(domain, u);
        let gamma2 = gamma * gamma;
        let keep = if first_round { 0.0 } else { 1.0 - blend };
        let take = 1.0 - keep;
        fresh = 0.0;
        let mut fresh_at = 0usize;
        for color in [&nodes.0, &nodes.1] {
            for &idx32 in color.iter() {
                let idx = idx32 as usize;
                let k = node_coeffs(&u.values, idx, nx, inv_h2, p, b, gamma2);
                let (value, _) = frozen_apply(&u.values, idx, nx, &k);
                let r = (f[idx] - value).abs();
                if r > fresh {
                    fresh = r;
                    fresh_at = idx;
                }
                let old = coeffs[idx];
                coeffs[idx] = NodeCoeffs {
                    qe: take * k.qe + keep * old.qe,
                    qn: take * k.qn + keep * old.qn,
                    qpos: take * k.qpos + keep * old.qpos,
                    qneg: take * k.qneg + keep * old.qneg,
                };
            }
        }
        first_round = false;
        if std::env::var_os("SOR_TRACE").is_some() && fresh_at > 0 {
            let gx = u.values[fresh_at + 1] - u.values[fresh_at - 1];
            let gy = u.values[fresh_at + nx] - u.values[fresh_at - nx];
            eprintln!(
                "refreeze at total={total}: fresh={fresh:.6e} at ({},{}) gx={gx:.3e} gy={gy:.3e} gamma={gamma:.3e} relax={relax:.3} blend={blend:.4} damp={damp:.2} eps={eps_abs:.3e}",
                fresh_at % nx,
                fresh_at / nx,
            );
        }
        if fresh <= eps_abs {
            return Ok(SorOutcome { residual: fresh, relax });
        }
        // A residual that stops improving round over round means the
        // weight map is oscillating faster than the blend can damp;
        // halve the step.  Improvement earns the step back, so a cold
        // transient cannot pin the whole solve at the floor.
        if fresh < best_fresh {
            best_fresh = fresh;
            stalled = 0;
            blend = (1.3 * blend).min(PICARD_BLEND);
        } else {
            stalled += 1;
            if stalled >= 2 {
                blend = (0.5 * blend).max(PICARD_BLEND_FLOOR);
                stalled = 0;
            }
        }
        // A burst (sharp upward jump) means the last round moved the
        // field through a fold in the weight map; quench with
        // pseudo-time damping, released geometrically once rounds
        // improve again.
        if fresh > 1.3 * prev_fresh {
            damp = (2.0 * damp + 0.5).min(DAMP_CAP);
        } else if fresh < prev_fresh {
            damp *= DAMP_DECAY;
            if damp < 0.1 {
                damp = 0.0;
            }
        }
        prev_fresh = fresh;

        let target = (FROZEN_TARGET_SHARE * eps_abs).max(INEXACT_SHARE * fresh);
        let mut step = relax / (1.0 + damp);
        let mut best = f64::INFINITY;
        let mut phase = 0usize;
        while total < max_sweeps {
            total += 1;
            phase += 1;
            let mut worst = 0.0f64;
            for color in [&nodes.0, &nodes.1] {
                for &idx32 in color.iter() {
                    let idx = idx32 as usize;
                    let (value, m) = frozen_apply(&u.values, idx, nx, &coeffs[idx]);
                    let r = f[idx] - value;
                    let abs_r = r.abs();
                    if abs_r > worst {
                        worst = abs_r;
                    }
                    u.values[idx] += step * r / m;
                }
            }
            if std::env::var_os("SOR_TRACE").is_some() && phase % 500 == 0 {
                eprintln!(
                    "  linear phase={phase} total={total}: worst={worst:.6e} relax={relax:.3} target={target:.3e}"
                );
            }
            if worst <= target {
                break;
            }
            if worst < best {
                best = worst;
            } else if phase > 10 && worst > 4.0 * best {
                // Oscillation: damp toward plain Gauss-Seidel and restart
                // the improvement tracking.
                relax = 1.0 + 0.7 * (relax - 1.0);
                step = relax / (1.0 + damp);
                best = worst;
            }
        }
    }
    Err(Error::NoConvergence {
        iterations: total,
        residual: fresh,
    })
}

/// Relaxation factor: the Poisson-optimal value for this lattice, capped
/// away from 2 when p != 2 makes the stencil nonsymmetric.
fn default_relax(p: f64, h: f64, extent: f64) -> f64 {
    let opt = 2.0 / (1.0 + (PI * h / extent).sin());
    if p == 2.0 {
        opt
    } else if p > 2.0 {
        opt.min(1.85)
    } else {
        opt.min(1.8)
    }
}

fn inside_nodes_by_color(domain: &GridDomain) -> (Vec<u32>, Vec<u32>) {
    let mut red = Vec::new();
    let mut black = Vec::new();
    for j in 0..domain.ny {
        for i in 0..domain.nx {
            let idx = domain.idx(i, j);
            if domain.inside[idx] {
                if (i + j) % 2 == 0 {
                    red.push(idx as u32);
                } else {
                    black.push(idx as u32);
                }
            }
        }
    }
    (red, black)
}

/// Solve F_p[u] = f with zero Dirichlet data, to a residual of
/// 1e-9 * sup|f|.
pub fn dirichlet_solve(
    domain: &GridDomain,
    f: &ScalarField,
    p: f64,
    config: &SolverConfig,
) -> Result<ScalarField> {
    check_p(p)?;
    config.validate()?;
    if f.nx != domain.nx || f.ny != domain.ny {
        return Err(Error::Domain("source field does not match the lattice".into()));
    }
    let nodes = inside_nodes_by_color(domain);
    let extent = domain.nx.max(domain.ny) as f64 * domain.h;
    let relax = config.relax.unwrap_or_else(|| default_relax(p, domain.h, extent));
    let mut u = ScalarField::zeros_like(domain);
    let eps = 1e-9 * f.max_abs().max(f64::MIN_POSITIVE);
    sor_sweeps(
        domain,
        &f.values,
        p,
        &mut u,
        &nodes,
        eps,
        config.inner_sweeps,
        relax,
    )?;
    Ok(u)
}

/// Positive start vector: distance to the boundary modulated by seeded
/// noise, sup-normalized.
fn start_vector(domain: &GridDomain, seed: u64) -> ScalarField {
    let outside: Vec<bool> = domain.inside.iter().map(|&b| !b).collect();
    let dist2 = squared_edt(&outside, domain.nx, domain.ny);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut u = ScalarField::zeros_like(domain);
    let mut sup = 0.0f64;
    for idx in 0..u.values.len() {
        let noise: f64 = rng.gen_range(-1.0..1.0);
        if domain.inside[idx] {
            let value = dist2[idx].sqrt() * (1.0 + NOISE_AMPLITUDE * noise);
            u.values[idx] = value;
            sup = sup.max(value.abs());
        }
    }
    for v in &mut u.values {
        *v /= sup;
    }
    u
}

/// First eigenpair by inverse power iteration with Collatz-Wielandt
/// brackets.
pub fn eigen_solve(domain: &GridDomain, p: f64, config: &SolverConfig) -> Result<EigenPair> {
    check_p(p)?;
    config.validate()?;
    let interior = domain.interior_indices();
    if interior.is_empty() {
        return Err(Error::EmptyRegion(
            "no interior nodes; the lattice is too coarse for this shape".into(),
        ));
    }
    let nodes = inside_nodes_by_color(domain);
    let extent = domain.nx.max(domain.ny) as f64 * domain.h;
    let mut relax = config.relax.unwrap_or_else(|| default_relax(p, domain.h, extent));

    let mut u = start_vector(domain, config.seed);
    // Rough eigenvalue guess seeds the first inner solve.
    let lambda_guess = 1.3 * faber_krahn_constant(2, p)? / domain.measure;
    let mut warm: Option<ScalarField> = None;
    let mut eps = FIRST_INNER_TOL;
    let mut history: Vec<(f64, f64)> = Vec::new();
    let mut prev_width = f64::INFINITY;

    for outer in 1..=config.max_outer {
        let mut v = warm.take().unwrap_or_else(|| {
            let mut guess = u.clone();
            for value in &mut guess.values {
                *value /= lambda_guess;
            }
            guess
        });
        let outcome = sor_sweeps(
            domain,
            &u.values,
            p,
            &mut v,
            &nodes,
            eps,
            config.inner_sweeps,
            relax,
        )?;
        relax = outcome.relax;

        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        let mut nonpositive = 0usize;
        for &idx in &interior {
            if u.values[idx] > QUOTIENT_FLOOR {
                let denom = v.values[idx];
                if denom <= 0.0 {
                    nonpositive += 1;
                    continue;
                }
                let q = u.values[idx] / denom;
                lo = lo.min(q);
                hi = hi.max(q);
            }
        }
        if nonpositive > 0 || !lo.is_finite() {
            // The inner solve was too loose to keep the kernel positive.
            if eps <= 1e-13 {
                return Err(Error::NoConvergence {
                    iterations: outer,
                    residual: outcome.residual,
                });
            }
            eps = (0.1 * eps).max(1e-13);
            warm = Some(v);
            continue;
        }
        history.push((lo, hi));
        let width = (hi - lo) / lo;
        let mid = 0.5 * (lo + hi);
        if std::env::var_os("OUTER_TRACE").is_some() {
            eprintln!(
                "outer {outer}: lo={lo:.9} hi={hi:.9} width={width:.3e} eps={eps:.3e} inner_res={:.3e}",
                outcome.residual
            );
        }

        let vmax = v.max_abs();
        for value in &mut v.values {
            *value /= vmax;
        }
        u = v;

        if width <= config.tol_bracket {
            let residual = stencil_residual(domain, &u, p, mid, &interior);
            return Ok(EigenPair {
                lambda: mid,
                cw_low: lo,
                cw_high: hi,
                iterations: outer,
                residual,
                u,
                history,
            });
        }

        let mut guess = u.clone();
        for value in &mut guess.values {
            *value /= mid;
        }
        warm = Some(guess);

        let target = INNER_TOL_FACTOR * width.max(config.tol_bracket);
        // A genuinely frozen bracket means the inner solves are too
        // loose for the quotients to move; tighten them.  A bracket
        // that still shrinks, however slowly, is a small spectral gap
        // and needs rounds, not accuracy: ring-like shapes contract
        // near 2 percent per round for hundreds of rounds.
        eps = if width > 0.995 * prev_width {
            (0.3 * eps).min(target)
        } else {
            target
        };
        eps = eps.max(1e-13);
        prev_width = width;
    }
    let residual = history.last().map(|&(lo, hi)| (hi - lo) / lo).unwrap_or(f64::INFINITY);
    Err(Error::NoConvergence {
        iterations: config.max_outer,
        residual,
    })
}

/// Ground-state uniqueness probe: several noisy starts must collapse onto
/// one eigenfunction.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimplicityReport {
    pub lambdas: Vec<f64>,
    /// (max - min) / min over the runs.
    pub lambda_spread: f64,
    /// Largest sup-norm mismatch between runs after optimal scaling.
    pub max_defect: f64,
    /// Whether the shape satisfies the connectedness hypothesis under
    /// which uniqueness is guaranteed.
    pub hypotheses_met: bool,
}

pub fn verify_simplicity(
    domain: &GridDomain,
    p: f64,
    config: &SolverConfig,
    starts: usize,
) -> Result<SimplicityReport> {
    if starts < 2 {
        return Err(Error::Domain("need at least two starts to compare".into()));
    }
    let interior = domain.interior_indices();
    let mut pairs = Vec::with_capacity(starts);
    for k in 0..starts {
        let mut run_config = *config;
        run_config.seed = config.seed.wrapping_add(k as u64);
        pairs.push(eigen_solve(domain, p, &run_config)?);
    }
    let lambdas: Vec<f64> = pairs.iter().map(|pair| pair.lambda).collect();
    let (min_l, max_l) = lambdas
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &l| (lo.min(l), hi.max(l)));
    let mut max_defect = 0.0f64;
    for a in 0..pairs.len() {
        for b in a + 1..pairs.len() {
            let (ua, ub) = (&pairs[a].u, &pairs[b].u);
            let mut dot = 0.0;
            let mut norm2 = 0.0;
            for &idx in &interior {
                dot += ua.values[idx] * ub.values[idx];
                norm2 += ub.values[idx] * ub.values[idx];
            }
            let scale = dot / norm2;
            for &idx in &interior {
                max_defect = max_defect.max((ua.values[idx] - scale * ub.values[idx]).abs());
            }
        }
    }
    Ok(SimplicityReport {
        lambdas,
        lambda_spread: (max_l - min_l) / min_l,
        max_defect,
        hypotheses_met: domain.shape.boundary_connected(),
    })
}

/// Largest violation of each lattice symmetry of the shape.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SymmetryReport {
    pub defect_x: f64,
    pub defect_y: f64,
    /// Present only for shapes symmetric under swapping the axes.
    pub defect_diagonal: Option<f64>,
}

fn swap_symmetric(shape: &Shape) -> bool {
    match *shape {
        Shape::Disk { .. } | Shape::Annulus { .. } => true,
        Shape::Rectangle { width, height } => width == height,
        Shape::Ellipse { semi_x, semi_y } => semi_x == semi_y,
        Shape::Stadium { .. } => false,
    }
}

pub fn verify_symmetry(domain: &GridDomain, pair: &EigenPair) -> SymmetryReport {
    let u = &pair.u;
    let (mut defect_x, mut defect_y) = (0.0f64, 0.0f64);
    for j in 0..domain.ny {
        for i in 0..domain.nx {
            let idx = domain.idx(i, j);
            if !domain.inside[idx] {
                continue;
            }
            let mirror_i = 2 * domain.cx - i;
            let mirror_j = 2 * domain.cy - j;
            defect_x = defect_x.max((u.values[idx] - u.get(mirror_i, j)).abs());
            defect_y = defect_y.max((u.values[idx] - u.get(i, mirror_j)).abs());
        }
    }
    let defect_diagonal = swap_symmetric(&domain.shape).then(|| {
        let mut defect = 0.0f64;
        for j in 0..domain.ny {
            for i in 0..domain.nx {
                if domain.inside[domain.idx(i, j)] {
                    defect = defect.max((u.get(i, j) - u.get(j, i)).abs());
                }
            }
        }
        defect
    });
    SymmetryReport {
        defect_x,
        defect_y,
        defect_diagonal,
    }
}

/// Inward difference quotients of the eigenfunction along boundary
/// normals, at a few depths.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HopfReport {
    /// (depth, smallest quotient u(x - depth n) / depth over the boundary).
    pub per_depth: Vec<(f64, f64)>,
    /// Smallest quotient over all depths.
    pub kappa: f64,
    /// Whether the per-depth minima agree within a factor of two.
    pub stable: bool,
    /// Samples dropped because the interpolation stencil left the lattice.
    pub skipped: usize,
}

fn bilinear(field: &ScalarField, domain: &GridDomain, x: f64, y: f64) -> Option<f64> {
    let fi = x / domain.h + domain.cx as f64;
    let fj = y / domain.h + domain.cy as f64;
    if fi < 0.0 || fj < 0.0 {
        return None;
    }
    let (i0, j0) = (fi.floor() as usize, fj.floor() as usize);
    if i0 + 1 >= domain.nx || j0 + 1 >= domain.ny {
        return None;
    }
    let (tx, ty) = (fi - i0 as f64, fj - j0 as f64);
    Some(
        field.get(i0, j0) * (1.0 - tx) * (1.0 - ty)
            + field.get(i0 + 1, j0) * tx * (1.0 - ty)
            + field.get(i0, j0 + 1) * (1.0 - tx) * ty
            + field.get(i0 + 1, j0 + 1) * tx * ty,
    )
}

pub fn verify_hopf(domain: &GridDomain, pair: &EigenPair) -> Result<HopfReport> {
    let loops = boundary_loops(domain);
    if loops.is_empty() {
        return Err(Error::EmptyRegion("no boundary to probe".into()));
    }
    let mut skipped = 0usize;
    let mut per_depth = Vec::new();
    for factor in [2.0, 4.0, 8.0] {
        let depth = factor * domain.h;
        let mut min_quotient = f64::INFINITY;
        for polyline in &loops {
            // The final vertex repeats the first.
            for &(x, y) in &polyline[..polyline.len() - 1] {
                let (nx, ny) = domain.shape.outward_normal(x, y);
                let probe = bilinear(&pair.u, domain, x - depth * nx, y - depth * ny);
                match probe {
                    Some(value) => min_quotient = min_quotient.min(value / depth),
                    None => skipped += 1,
                }
            }
        }
        if !min_quotient.is_finite() {
            return Err(Error::EmptyRegion("every boundary probe left the lattice".into()));
        }
        per_depth.push((depth, min_quotient));
    }
    let kappa = per_depth.iter().fold(f64::INFINITY, |acc, &(_, k)| acc.min(k));
    let top = per_depth.iter().fold(f64::NEG_INFINITY, |acc, &(_, k)| acc.max(k));
    let stable = kappa > 0.0 && top / kappa <= 2.0;
    Ok(HopfReport {
        per_depth,
        kappa,
        stable,
        skipped,
    })
}

/// The computed eigenvalue against the measure bound and the two-ball
/// sandwich.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundsReport {
    pub lambda: f64,
    /// K(2, p) / measure.
    pub fk_lower: f64,
    /// Eigenvalue of the circumscribed disk.
    pub ball_lower: f64,
    /// Eigenvalue of the inscribed disk.
    pub ball_upper: f64,
    pub slack: f64,
    pub fk_ok: bool,
    pub sandwich_ok: bool,
}

pub fn verify_bounds(
    domain: &GridDomain,
    pair: &EigenPair,
    p: f64,
    slack: f64,
) -> Result<BoundsReport> {
    let params = ProblemParams::new(2, p)?;
    let fk_lower = faber_krahn_constant(2, p)? / domain.measure;
    let ball_lower = ball_eigenvalue_bessel(params, domain.outradius)?;
    let ball_upper = ball_eigenvalue_bessel(params, domain.inradius)?;
    let lambda = pair.lambda;
    Ok(BoundsReport {
        lambda,
        fk_lower,
        ball_lower,
        ball_upper,
        slack,
        fk_ok: lambda >= fk_lower * (1.0 - slack),
        sandwich_ok: lambda >= ball_lower * (1.0 - slack) && lambda <= ball_upper * (1.0 + slack),
    })
}

/// Domain monotonicity: a subdomain's eigenvalue must not fall below the
/// larger domain's, up to the given slack.
pub fn check_nested(inner: &EigenPair, outer: &EigenPair, rel_slack: f64) -> bool {
    inner.lambda >= outer.lambda * (1.0 - rel_slack)
}

/// One shape of a comparison scan.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScanRow {
    /// Canonical JSON of the domain configuration.
    pub label: String,
    pub p: f64,
    pub lambda: f64,
    pub measure: f64,
    /// lambda * measure; in the plane this is the scale-invariant product.
    pub product: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScanOutcome {
    /// Rows sorted by ascending product.
    pub rows: Vec<ScanRow>,
    pub warnings: Vec<String>,
}

/// Solve every (shape, p) case and rank by the scale-invariant product.
/// Duplicate cases are dropped with a warning.
pub fn faber_krahn_scan(
    cases: &[(DomainConfig, f64)],
    config: &SolverConfig,
) -> Result<ScanOutcome> {
    let mut seen = std::collections::HashSet::new();
    let mut rows = Vec::new();
    let mut warnings = Vec::new();
    for (domain_config, p) in cases {
        let label = serde_json::to_string(domain_config)?;
        if !seen.insert((label.clone(), p.to_bits())) {
            warnings.push(format!("duplicate case skipped: {label} at p = {p}"));
            continue;
        }
        let domain = GridDomain::build(domain_config)?;
        let pair = eigen_solve(&domain, *p, config)?;
        rows.push(ScanRow {
            label,
            p: *p,
            lambda: pair.lambda,
            measure: domain.measure,
            product: pair.lambda * domain.measure,
        });
    }
    rows.sort_by(|a, b| a.product.partial_cmp(&b.product).unwrap());
    Ok(ScanOutcome { rows, warnings })
}
