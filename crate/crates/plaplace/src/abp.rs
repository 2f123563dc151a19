//! Pointwise verification lab for the eigenvalue lower bound.
//!
//! The measure bound is driven by a chain of pointwise inequalities for
//! the logarithm of a sup-convolved eigenfunction at the contact points of
//! its concave envelope.  This module makes every link checkable on a
//! lattice:
//!
//! 1. [`sup_convolve`] regularizes u from above: u^eps(x) =
//!    max_y u(y) - |x - y|^2 / (2 eps).  Because u >= 0, the maximizer
//!    lies within sqrt(2 eps sup u) of x, so a finite window is exact,
//!    u^eps + |x|^2 / (2 eps) is exactly convex (a max of affine
//!    functions), and the result carries the localization sets: the reach
//!    of the original support, its eroded core, and the active region
//!    where u^eps rises above its value on the core's edge.
//! 2. [`concave_envelope`] clamps the log outside the active region, takes
//!    the 3-D upper hull of the graph over a slightly dilated node set,
//!    and reads off the envelope and its contact set.  On a lattice the
//!    envelope at a node is the minimum over upper-face planes, which the
//!    hull makes exact.
//! 3. [`verify_abp_chain`] checks the inequality chain at the contact
//!    nodes, the curvature sign, an area surrogate for the gradient-image
//!    covering, and the terminal comparison of the gradient integral with
//!    the domain measure.

use crate::constants::{ball_integral_closed_form, terminal_prefactor};
use crate::error::{Error, Result};
use crate::grid::{squared_edt, GridDomain, ScalarField};
use crate::hull::convex_hull_3d;
use crate::operator::{envelope_upper, evaluate_fp, gradient, hessian, GRADIENT_FLOOR_FACTOR};

use serde::{Deserialize, Serialize};

use std::f64::consts::PI;

/// Contact threshold: `CONTACT_TOL_FACTOR * h^2 * range(v)`.
const CONTACT_TOL_FACTOR: f64 = 10.0;
/// Discretization allowance in the chain inequalities:
/// `TOL_H_COEFF * h * (1 + |grad v|^2)`.
const TOL_H_COEFF: f64 = 2.0;
/// Curvature sign allowance: eigenvalues of -H down to
/// `-PSD_TOL * (1 + |H|)` still count as nonnegative.
const PSD_TOL: f64 = 0.08;
/// The area surrogate must reach this share of its target integral.
const AREA_SLACK: f64 = 0.25;
/// Gradient-image probe tolerance: `PROBE_TOL_COEFF * h * (1 + |H|)`.
const PROBE_TOL_COEFF: f64 = 2.0;
/// Angular bins for the covered gradient radius.
const ANGULAR_BINS: usize = 16;
const PROBE_RADII: [f64; 3] = [0.25, 0.5, 0.75];
const PROBE_ANGLES: usize = 8;

/// Sup-convolution of a nonnegative field together with its localization
/// sets.
#[derive(Debug, Clone)]
pub struct SupConvResult {
    pub eps: f64,
    /// Localization radius 2 sqrt(eps sup u).
    pub rho: f64,
    /// Half-width of the exact maximization window, in cells.
    pub window: usize,
    pub u_eps: ScalarField,
    /// Nodes within rho of the support of u.
    pub reach: Vec<bool>,
    /// Reach nodes deeper than rho from its complement.
    pub core: Vec<bool>,
    /// Core nodes where u_eps exceeds the collar level.
    pub active: Vec<bool>,
    /// Max of u_eps on the core's edge ring.
    pub collar: f64,
    /// Flat index of the maximizing node, per node.
    pub argmax: Vec<u32>,
}

/// Exact windowed sup-convolution.  The input must be nonnegative and not
/// identically zero; values beyond the lattice frame are treated as zero,
/// which never changes the maximum because u(x) itself is a candidate.
pub fn sup_convolve(domain: &GridDomain, u: &ScalarField, eps: f64) -> Result<SupConvResult> {
    if !(eps.is_finite() && eps > 0.0) {
        return Err(Error::Domain(format!("eps = {eps} must be positive")));
    }
    if u.nx != domain.nx || u.ny != domain.ny {
        return Err(Error::Domain("field does not match the lattice".into()));
    }
    if u.values.iter().any(|&v| v < 0.0) {
        return Err(Error::Domain("sup-convolution input must be nonnegative".into()));
    }
    let sup = u.max_abs();
    if sup == 0.0 {
        return Err(Error::EmptyRegion("sup-convolution input is identically zero".into()));
    }
    let (nx, ny, h) = (domain.nx, domain.ny, domain.h);
    let rho = 2.0 * (eps * sup).sqrt();
    let window = ((2.0 * eps * sup).sqrt() / h).ceil() as usize;

    // Quadratic penalties for index offsets.
    let penalty: Vec<f64> = (0..=window)
        .map(|d| {
            let dist = d as f64 * h;
            dist * dist / (2.0 * eps)
        })
        .collect();

    let mut u_eps = ScalarField::zeros(nx, ny);
    let mut argmax = vec![0u32; nx * ny];
    for j in 0..ny {
        let j_lo = j.saturating_sub(window);
        let j_hi = (j + window).min(ny - 1);
        for i in 0..nx {
            let i_lo = i.saturating_sub(window);
            let i_hi = (i + window).min(nx - 1);
            let mut best = f64::NEG_INFINITY;
            let mut best_idx = 0usize;
            for jj in j_lo..=j_hi {
                let pj = penalty[jj.abs_diff(j)];
                let row = jj * nx;
                for ii in i_lo..=i_hi {
                    let value = u.values[row + ii] - pj - penalty[ii.abs_diff(i)];
                    if value > best {
                        best = value;
                        best_idx = row + ii;
                    }
                }
            }
            let idx = j * nx + i;
            u_eps.values[idx] = best;
            argmax[idx] = best_idx as u32;
        }
    }

    // Localization sets via exact distance transforms.  Nodes beyond the
    // lattice frame count as complement of the reach set; that can only
    // shrink the core, which is the conservative direction.
    let rho_cells2 = (rho / h) * (rho / h);
    let dist_support = squared_edt(&domain.inside, nx, ny);
    let reach: Vec<bool> = dist_support.iter().map(|&d2| d2 <= rho_cells2).collect();
    let not_reach: Vec<bool> = reach.iter().map(|&b| !b).collect();
    let dist_edge = squared_edt(&not_reach, nx, ny);
    let frame_dist = |i: usize, j: usize| (i.min(nx - 1 - i).min(j).min(ny - 1 - j) + 1) as f64;
    let core: Vec<bool> = (0..nx * ny)
        .map(|idx| {
            let fd = frame_dist(idx % nx, idx / nx);
            dist_edge[idx] > rho_cells2 && fd * fd > rho_cells2
        })
        .collect();
    if core.iter().all(|&b| !b) {
        return Err(Error::EmptyRegion(
            "the eroded core is empty; eps is too large for this domain".into(),
        ));
    }

    // Collar: the core's edge ring (core nodes with an 8-neighbor outside).
    let mut collar = f64::NEG_INFINITY;
    for j in 1..ny - 1 {
        for i in 1..nx - 1 {
            let idx = j * nx + i;
            if !core[idx] {
                continue;
            }
            let mut on_edge = false;
            for dj in -1i64..=1 {
                for di in -1i64..=1 {
                    let nidx = ((j as i64 + dj) * nx as i64 + i as i64 + di) as usize;
                    if !core[nidx] {
                        on_edge = true;
                    }
                }
            }
            if on_edge {
                collar = collar.max(u_eps.values[idx]);
            }
        }
    }
    if !collar.is_finite() {
        return Err(Error::EmptyRegion("the core has no edge ring".into()));
    }
    let active: Vec<bool> = (0..nx * ny)
        .map(|idx| core[idx] && u_eps.values[idx] > collar)
        .collect();
    if active.iter().all(|&b| !b) {
        return Err(Error::EmptyRegion(
            "no node rises above the collar level; eps is too large".into(),
        ));
    }
    Ok(SupConvResult {
        eps,
        rho,
        window,
        u_eps,
        reach,
        core,
        active,
        collar,
        argmax,
    })
}

/// Worst (most negative) second difference of u_eps + |x|^2 / (2 eps)
/// along lattice rows, columns, and diagonals, normalized by the field
/// scale.  Exact convexity makes this nonnegative up to rounding.
pub fn semiconvexity_defect(domain: &GridDomain, conv: &SupConvResult) -> f64 {
    let (nx, ny) = (domain.nx, domain.ny);
    let w = |i: usize, j: usize| {
        let (x, y) = (domain.x(i), domain.y(j));
        conv.u_eps.get(i, j) + (x * x + y * y) / (2.0 * conv.eps)
    };
    let mut scale = 1.0f64;
    for j in 0..ny {
        for i in 0..nx {
            scale = scale.max(w(i, j).abs());
        }
    }
    let mut worst = 0.0f64;
    for j in 1..ny - 1 {
        for i in 1..nx - 1 {
            let c = 2.0 * w(i, j);
            let second = [
                w(i - 1, j) + w(i + 1, j) - c,
                w(i, j - 1) + w(i, j + 1) - c,
                w(i - 1, j - 1) + w(i + 1, j + 1) - c,
                w(i - 1, j + 1) + w(i + 1, j - 1) - c,
            ];
            for s in second {
                worst = worst.min(s / scale);
            }
        }
    }
    worst
}

/// Concave envelope of a field over a dilated convex neighborhood of a
/// node set.
#[derive(Debug, Clone)]
pub struct EnvelopeResult {
    pub sigma: f64,
    /// Lattice nodes within sigma of the convex hull of the seed set.
    pub star: Vec<bool>,
    /// Envelope values on the star nodes (zero elsewhere).
    pub gamma: ScalarField,
    /// Star nodes where the envelope touches the field.
    pub contact: Vec<bool>,
    pub contact_tol: f64,
}

fn convex_hull_2d(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    pts.dedup();
    if pts.len() <= 2 {
        return pts;
    }
    let turn = |o: (f64, f64), a: (f64, f64), b: (f64, f64)| {
        (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
    };
    let mut lower: Vec<(f64, f64)> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2 && turn(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0.0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<(f64, f64)> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && turn(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0.0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

fn dist_point_segment(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    if len2 == 0.0 {
        return (p.0 - a.0).hypot(p.1 - a.1);
    }
    let t = (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0);
    (p.0 - a.0 - t * dx).hypot(p.1 - a.1 - t * dy)
}

/// Distance to a convex polygon (zero inside).
fn dist_to_convex(p: (f64, f64), hull: &[(f64, f64)]) -> f64 {
    match hull.len() {
        0 => f64::INFINITY,
        1 => (p.0 - hull[0].0).hypot(p.1 - hull[0].1),
        2 => dist_point_segment(p, hull[0], hull[1]),
        n => {
            let mut inside = true;
            let mut dist = f64::INFINITY;
            for k in 0..n {
                let (a, b) = (hull[k], hull[(k + 1) % n]);
                let cross = (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0);
                if cross < 0.0 {
                    inside = false;
                }
                dist = dist.min(dist_point_segment(p, a, b));
            }
            if inside {
                0.0
            } else {
                dist
            }
        }
    }
}

/// Concave envelope of `field` over the nodes within `sigma` of the convex
/// hull of the seed nodes: the upper convex hull of the graph, evaluated
/// back on the lattice as the minimum over upper-face planes (exact, since
/// each upper-face plane dominates the whole cloud).
pub fn concave_envelope(
    domain: &GridDomain,
    seed: &[bool],
    field: &ScalarField,
    sigma: f64,
) -> Result<EnvelopeResult> {
    if seed.len() != domain.nx * domain.ny {
        return Err(Error::Domain("seed mask does not match the lattice".into()));
    }
    if !(sigma.is_finite() && sigma >= 0.0) {
        return Err(Error::Domain(format!("sigma = {sigma} must be nonnegative")));
    }
    let seed_points: Vec<(f64, f64)> = (0..seed.len())
        .filter(|&idx| seed[idx])
        .map(|idx| (domain.x(idx % domain.nx), domain.y(idx / domain.nx)))
        .collect();
    if seed_points.is_empty() {
        return Err(Error::EmptyRegion("envelope seed set is empty".into()));
    }
    let hull2 = convex_hull_2d(&seed_points);

    // Star nodes, restricted to the hull's bounding box plus sigma.
    let (nx, ny, h) = (domain.nx, domain.ny, domain.h);
    let (mut x_lo, mut y_lo) = (f64::INFINITY, f64::INFINITY);
    let (mut x_hi, mut y_hi) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for &(x, y) in &hull2 {
        x_lo = x_lo.min(x);
        x_hi = x_hi.max(x);
        y_lo = y_lo.min(y);
        y_hi = y_hi.max(y);
    }
    let mut star = vec![false; nx * ny];
    let mut cloud: Vec<[f64; 3]> = Vec::new();
    let mut cloud_nodes: Vec<usize> = Vec::new();
    for j in 0..ny {
        let y = domain.y(j);
        if y < y_lo - sigma - h || y > y_hi + sigma + h {
            continue;
        }
        for i in 0..nx {
            let x = domain.x(i);
            if x < x_lo - sigma - h || x > x_hi + sigma + h {
                continue;
            }
            if dist_to_convex((x, y), &hull2) <= sigma {
                let idx = j * nx + i;
                star[idx] = true;
                cloud.push([x, y, field.values[idx]]);
                cloud_nodes.push(idx);
            }
        }
    }
    let faces = convex_hull_3d(&cloud)?;

    // Upper faces as planes z = gx x + gy y + g0.
    struct Plane {
        gx: f64,
        gy: f64,
        g0: f64,
        corners: [(f64, f64); 3],
    }
    let mut planes: Vec<Plane> = Vec::new();
    for f in &faces {
        let (a, b, c) = (cloud[f[0]], cloud[f[1]], cloud[f[2]]);
        let u = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
        let v = [c[0] - a[0], c[1] - a[1], c[2] - a[2]];
        let n = [
            u[1] * v[2] - u[2] * v[1],
            u[2] * v[0] - u[0] * v[2],
            u[0] * v[1] - u[1] * v[0],
        ];
        let norm1 = n[0].abs() + n[1].abs() + n[2].abs();
        if n[2] <= 1e-12 * norm1 {
            continue;
        }
        let gx = -n[0] / n[2];
        let gy = -n[1] / n[2];
        planes.push(Plane {
            gx,
            gy,
            g0: a[2] - gx * a[0] - gy * a[1],
            corners: [(a[0], a[1]), (b[0], b[1]), (c[0], c[1])],
        });
    }
    if planes.is_empty() {
        return Err(Error::Domain("the hull has no upward faces".into()));
    }

    // Bin faces by bounding box over coarse lattice buckets.
    const BUCKET: usize = 8;
    let bx = nx.div_ceil(BUCKET);
    let by = ny.div_ceil(BUCKET);
    let mut buckets: Vec<Vec<u32>> = vec![Vec::new(); bx * by];
    let to_i = |x: f64| ((x / h) + domain.cx as f64).round();
    let to_j = |y: f64| ((y / h) + domain.cy as f64).round();
    for (pid, plane) in planes.iter().enumerate() {
        let (mut i_lo, mut i_hi) = (f64::INFINITY, f64::NEG_INFINITY);
        let (mut j_lo, mut j_hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for &(x, y) in &plane.corners {
            i_lo = i_lo.min(to_i(x));
            i_hi = i_hi.max(to_i(x));
            j_lo = j_lo.min(to_j(y));
            j_hi = j_hi.max(to_j(y));
        }
        let i_lo = (i_lo.max(0.0) as usize) / BUCKET;
        let i_hi = ((i_hi.max(0.0) as usize).min(nx - 1)) / BUCKET;
        let j_lo = (j_lo.max(0.0) as usize) / BUCKET;
        let j_hi = ((j_hi.max(0.0) as usize).min(ny - 1)) / BUCKET;
        for jb in j_lo..=j_hi {
            for ib in i_lo..=i_hi {
                buckets[jb * bx + ib].push(pid as u32);
            }
        }
    }

    let in_triangle = |x: f64, y: f64, c: &[(f64, f64); 3]| {
        let slack = 1e-9 * h;
        let mut sign = 0i8;
        for k in 0..3 {
            let (a, b) = (c[k], c[(k + 1) % 3]);
            let cross = (b.0 - a.0) * (y - a.1) - (b.1 - a.1) * (x - a.0);
            let scale = ((b.0 - a.0).abs() + (b.1 - a.1).abs()).max(1e-300);
            if cross > slack * scale {
                if sign < 0 {
                    return false;
                }
                sign = 1;
            } else if cross < -slack * scale {
                if sign > 0 {
                    return false;
                }
                sign = -1;
            }
        }
        true
    };

    let mut gamma = ScalarField::zeros(nx, ny);
    for &idx in &cloud_nodes {
        let (i, j) = (idx % nx, idx / nx);
        let (x, y) = (domain.x(i), domain.y(j));
        let bucket = &buckets[(j / BUCKET) * bx + (i / BUCKET)];
        let mut value = f64::INFINITY;
        let mut covered = false;
        for &pid in bucket {
            let plane = &planes[pid as usize];
            if in_triangle(x, y, &plane.corners) {
                value = value.min(plane.g0 + plane.gx * x + plane.gy * y);
                covered = true;
            }
        }
        if !covered {
            // Rare numeric miss: the minimum over every upper face is
            // still an exact evaluation.
            for plane in &planes {
                value = value.min(plane.g0 + plane.gx * x + plane.gy * y);
            }
        }
        gamma.values[idx] = value;
    }

    let (mut v_lo, mut v_hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &idx in &cloud_nodes {
        v_lo = v_lo.min(field.values[idx]);
        v_hi = v_hi.max(field.values[idx]);
    }
    let contact_tol = CONTACT_TOL_FACTOR * h * h * (v_hi - v_lo).max(f64::MIN_POSITIVE);
    let mut contact = vec![false; nx * ny];
    for &idx in &cloud_nodes {
        if gamma.values[idx] - field.values[idx] <= contact_tol {
            contact[idx] = true;
        }
    }
    Ok(EnvelopeResult {
        sigma,
        star,
        gamma,
        contact,
        contact_tol,
    })
}

/// Fractions of contact nodes passing each pointwise link.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PassRates {
    /// det(-H) <= (tr(-H) / 2)^2: the two-dimensional mean inequality.
    pub f1: f64,
    /// tr(-H) <= p / min(p - 1, 1) * F_p[v] + tol.
    pub f2: f64,
    /// F_p[v] <= lambda + (p - 1) / p * |grad v|^2 + tol.
    pub f3: f64,
    /// -H positive semidefinite up to a curvature allowance.
    pub psd: f64,
}

/// Jacobian surrogate for the covered gradient ball.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AreaCheck {
    /// sum of g(|grad v|) det(-H)+ h^2 over evaluated nodes.
    pub lhs: f64,
    /// (1 - slack) * integral of g over the covered gradient ball.
    pub rhs: f64,
    /// Radius covered in every angular bin by realized gradients.
    pub q_cap: f64,
    pub slack: f64,
    pub pass: bool,
}

/// How many prescribed gradient targets are realized at contact nodes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProbeCheck {
    pub targets: usize,
    pub hits: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChainReport {
    pub pointwise_pass_rates: PassRates,
    pub terminal_bound_lhs: f64,
    pub terminal_bound_rhs: f64,
    pub terminal_ok: bool,
    pub h: f64,
    pub eps: f64,
    pub sigma: f64,
    pub lambda: f64,
    pub contact_nodes: usize,
    pub evaluated_nodes: usize,
    pub area: AreaCheck,
    pub probe: ProbeCheck,
}

/// Coverage of one probe ring.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RingCoverage {
    pub radius: f64,
    pub matched: usize,
    pub targets: usize,
}

/// Outcome of [`gradient_image_probe`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProbeCoverage {
    /// Largest gradient magnitude realized on interior nodes.
    pub cap: f64,
    /// Overall matched fraction.
    pub fraction: f64,
    pub rings: Vec<RingCoverage>,
}

/// Surjectivity probe for the gradient image of a field that falls off
/// toward the boundary: for each probe vector q the tilted field
/// -v(y) - q . y attains its minimum at an interior node, and there the
/// discrete gradient of v should be close to -q.  Probes are sampled on
/// rings of radii {0, 1/4, 1/2, 3/4, 1} of the realized gradient cap; the
/// match tolerance scales with h times the local curvature, so outer
/// rings (which land near the boundary where the log field bends hard)
/// may legitimately report misses.
pub fn gradient_image_probe(
    domain: &GridDomain,
    v: &ScalarField,
    directions: usize,
) -> Result<ProbeCoverage> {
    if directions == 0 {
        return Err(Error::Domain("need at least one probe direction".into()));
    }
    if v.nx != domain.nx || v.ny != domain.ny {
        return Err(Error::Domain("field does not match the lattice".into()));
    }
    let (nx, h) = (domain.nx, domain.h);
    let interior = domain.interior_indices();
    if interior.is_empty() {
        return Err(Error::EmptyRegion("no interior nodes to probe".into()));
    }
    struct Node {
        x: f64,
        y: f64,
        value: f64,
        grad: (f64, f64),
        curv: f64,
    }
    let nodes: Vec<Node> = interior
        .iter()
        .map(|&idx| {
            let (i, j) = (idx % nx, idx / nx);
            let g = gradient(v, i, j, h);
            let hess = hessian(v, i, j, h);
            Node {
                x: domain.x(i),
                y: domain.y(j),
                value: v.values[idx],
                grad: g,
                curv: hess.xx.abs().max(hess.yy.abs()).max(hess.xy.abs()),
            }
        })
        .collect();
    let cap = nodes
        .iter()
        .fold(0.0f64, |acc, n| acc.max(n.grad.0.hypot(n.grad.1)));

    let mut rings = Vec::new();
    let mut matched_total = 0usize;
    let mut targets_total = 0usize;
    for (ring_idx, frac) in [0.0, 0.25, 0.5, 0.75, 1.0].into_iter().enumerate() {
        let radius = frac * cap;
        let probes = if ring_idx == 0 { 1 } else { directions };
        let mut matched = 0usize;
        for k in 0..probes {
            let angle = 2.0 * PI * k as f64 / probes as f64;
            let q = (radius * angle.cos(), radius * angle.sin());
            let mut best = f64::INFINITY;
            let mut best_node = 0usize;
            for (nid, node) in nodes.iter().enumerate() {
                let tilted = -node.value - q.0 * node.x - q.1 * node.y;
                if tilted < best {
                    best = tilted;
                    best_node = nid;
                }
            }
            let node = &nodes[best_node];
            let tol = 2.0 * h * (1.0 + radius) + 2.0 * h * node.curv;
            if (node.grad.0 + q.0).hypot(node.grad.1 + q.1) <= tol {
                matched += 1;
            }
        }
        matched_total += matched;
        targets_total += probes;
        rings.push(RingCoverage {
            radius,
            matched,
            targets: probes,
        });
    }
    Ok(ProbeCoverage {
        cap,
        fraction: matched_total as f64 / targets_total as f64,
        rings,
    })
}

/// Run the full chain on a computed eigenpair.
pub fn verify_abp_chain(
    domain: &GridDomain,
    pair: &crate::eigen::EigenPair,
    p: f64,
    eps: f64,
    sigma: f64,
) -> Result<ChainReport> {
    if !p.is_finite() || p <= 1.0 {
        return Err(Error::Domain(format!("exponent p = {p} must exceed 1")));
    }
    let conv = sup_convolve(domain, &pair.u, eps)?;
    if conv.collar <= 0.0 {
        return Err(Error::EmptyRegion("collar level vanished; eps too small".into()));
    }
    let (nx, ny, h) = (domain.nx, domain.ny, domain.h);

    // Log field, clamped to the collar level outside the active region.
    let ln_collar = conv.collar.ln();
    let mut v = ScalarField::zeros(nx, ny);
    for idx in 0..nx * ny {
        v.values[idx] = if conv.active[idx] {
            conv.u_eps.values[idx].ln()
        } else {
            ln_collar
        };
    }
    let env = concave_envelope(domain, &conv.active, &v, sigma)?;

    // Evaluation nodes: active contact nodes whose full stencil sits in
    // the star.
    let mut eval: Vec<usize> = Vec::new();
    for j in 1..ny - 1 {
        for i in 1..nx - 1 {
            let idx = j * nx + i;
            if !(env.contact[idx] && conv.active[idx]) {
                continue;
            }
            let mut stencil_ok = true;
            for dj in -1i64..=1 {
                for di in -1i64..=1 {
                    let nidx = ((j as i64 + dj) * nx as i64 + i as i64 + di) as usize;
                    if !env.star[nidx] {
                        stencil_ok = false;
                    }
                }
            }
            if stencil_ok {
                eval.push(idx);
            }
        }
    }
    if eval.is_empty() {
        return Err(Error::EmptyRegion(
            "no contact node inside the active region has a full stencil".into(),
        ));
    }

    let lambda = pair.lambda;
    let b_grad = (p - 1.0) / p;
    let chain_factor = p / (p - 1.0).min(1.0);
    let grad_floor = GRADIENT_FLOOR_FACTOR * v.max_abs() / h;

    let (mut pass_f1, mut pass_f2, mut pass_f3, mut pass_psd) = (0usize, 0usize, 0usize, 0usize);
    let mut area_lhs = 0.0f64;
    let mut bin_max = [0.0f64; ANGULAR_BINS];
    let mut grads: Vec<(f64, f64)> = Vec::with_capacity(eval.len());
    let mut hess_norms: Vec<f64> = Vec::with_capacity(eval.len());
    for &idx in &eval {
        let (i, j) = (idx % nx, idx / nx);
        let g = gradient(&v, i, j, h);
        let hess = hessian(&v, i, j, h);
        let g2 = g.0 * g.0 + g.1 * g.1;
        let hess_norm = hess.xx.abs().max(hess.yy.abs()).max(hess.xy.abs());
        grads.push(g);
        hess_norms.push(hess_norm);

        let tol = TOL_H_COEFF * h * (1.0 + g2);
        let neg_trace = -hess.trace();
        let det = hess.xx * hess.yy - hess.xy * hess.xy;
        // det(-H) = det(H) in two dimensions.
        if det <= 0.25 * neg_trace * neg_trace + 1e-12 * (1.0 + hess_norm * hess_norm) {
            pass_f1 += 1;
        }
        let op_value = if g2.sqrt() <= grad_floor {
            envelope_upper(p, hess)?
        } else {
            evaluate_fp(p, g, hess)?
        };
        if neg_trace <= chain_factor * op_value + chain_factor.max(1.0) * tol {
            pass_f2 += 1;
        }
        if op_value <= lambda + b_grad * g2 + tol {
            pass_f3 += 1;
        }
        let psd_floor = -PSD_TOL * (1.0 + hess_norm);
        let (lo_eig, hi_eig) = hess.eigenvalues();
        let nsd = -hi_eig >= psd_floor && -lo_eig >= psd_floor;
        if nsd {
            pass_psd += 1;
        }

        // Area surrogate: only certified concave curvature contributes.
        if det > 0.0 && neg_trace > 0.0 {
            let weight = (lambda + b_grad * g2).powi(-2);
            area_lhs += weight * det * h * h;
        }
        let angle = g.1.atan2(g.0) + PI;
        let bin = ((angle / (2.0 * PI) * ANGULAR_BINS as f64) as usize).min(ANGULAR_BINS - 1);
        bin_max[bin] = bin_max[bin].max(g2.sqrt());
    }

    let q_cap = bin_max.iter().fold(f64::INFINITY, |acc, &m| acc.min(m));
    let q_cap = if q_cap.is_finite() { q_cap } else { 0.0 };
    let area_rhs = (1.0 - AREA_SLACK) * PI / b_grad
        * (1.0 / lambda - 1.0 / (lambda + b_grad * q_cap * q_cap));
    let area = AreaCheck {
        lhs: area_lhs,
        rhs: area_rhs,
        q_cap,
        slack: AREA_SLACK,
        pass: area_lhs >= area_rhs,
    };

    // Gradient-image probe: targets on rings of the covered ball.
    let cap = grads
        .iter()
        .fold(0.0f64, |acc, g| acc.max(g.0.hypot(g.1)));
    let mut targets = 0usize;
    let mut hits = 0usize;
    for &radius in &PROBE_RADII {
        for k in 0..PROBE_ANGLES {
            let angle = 2.0 * PI * k as f64 / PROBE_ANGLES as f64;
            let target = (radius * cap * angle.cos(), radius * cap * angle.sin());
            targets += 1;
            let hit = grads.iter().zip(&hess_norms).any(|(g, &hn)| {
                let tol = PROBE_TOL_COEFF * h * (1.0 + hn);
                (g.0 - target.0).hypot(g.1 - target.1) <= tol
            });
            if hit {
                hits += 1;
            }
        }
    }

    let count = eval.len() as f64;
    Ok(ChainReport {
        pointwise_pass_rates: PassRates {
            f1: pass_f1 as f64 / count,
            f2: pass_f2 as f64 / count,
            f3: pass_f3 as f64 / count,
            psd: pass_psd as f64 / count,
        },
        terminal_bound_lhs: ball_integral_closed_form(2, p, lambda)?,
        terminal_bound_rhs: terminal_prefactor(2, p)? * domain.measure,
        terminal_ok: ball_integral_closed_form(2, p, lambda)?
            <= terminal_prefactor(2, p)? * domain.measure,
        h,
        eps,
        sigma,
        lambda,
        contact_nodes: env.contact.iter().filter(|&&b| b).count(),
        evaluated_nodes: eval.len(),
        area,
        probe: ProbeCheck { targets, hits },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eigen::{eigen_solve, SolverConfig};
    use crate::grid::{DomainConfig, Shape};
    use crate::radial::{radial_eigenfunction, ProblemParams};

    fn disk(h: f64) -> GridDomain {
        GridDomain::build(&DomainConfig::new(Shape::Disk { radius: 1.0 }, h).unwrap()).unwrap()
    }

    fn paraboloid_field(domain: &GridDomain) -> ScalarField {
        let mut u = ScalarField::zeros_like(domain);
        for j in 0..domain.ny {
            for i in 0..domain.nx {
                let (x, y) = (domain.x(i), domain.y(j));
                u.set(i, j, (0.5 * (1.0 - x * x - y * y)).max(0.0));
            }
        }
        u
    }

    #[test]
    fn shifted_sup_convolution_is_exactly_convex() {
        let domain = disk(0.05);
        let u = paraboloid_field(&domain);
        let conv = sup_convolve(&domain, &u, 0.01).unwrap();
        let defect = semiconvexity_defect(&domain, &conv);
        assert!(defect >= -1e-9, "convexity defect {defect}");
    }

    #[test]
    fn paraboloid_sup_convolution_matches_the_closed_form() {
        // For u = (1 - |x|^2) / 2 the continuum sup-convolution is
        // (1 / (1 + eps) applied to the quadratic part); lattice
        // maximization is off by at most (1 + 1/eps) h^2 / 4.
        let eps = 0.1;
        let domain = disk(0.05);
        let u = paraboloid_field(&domain);
        let conv = sup_convolve(&domain, &u, eps).unwrap();
        let bound = (1.0 + 1.0 / eps) * domain.h * domain.h / 4.0;
        for j in 0..domain.ny {
            for i in 0..domain.nx {
                let (x, y) = (domain.x(i), domain.y(j));
                if x * x + y * y > 0.25 {
                    continue;
                }
                let exact = 0.5 - (x * x + y * y) / (2.0 * (1.0 + eps));
                let got = conv.u_eps.get(i, j);
                assert!(
                    (got - exact).abs() <= bound * 1.01,
                    "at ({x}, {y}): {got} vs {exact}"
                );
            }
        }
    }

    #[test]
    fn sup_convolution_is_monotone_in_eps() {
        let domain = disk(0.05);
        let u = paraboloid_field(&domain);
        let small = sup_convolve(&domain, &u, 0.01).unwrap();
        let large = sup_convolve(&domain, &u, 0.04).unwrap();
        for idx in 0..u.values.len() {
            assert!(small.u_eps.values[idx] <= large.u_eps.values[idx] + 1e-15);
            // And both dominate the original field.
            assert!(small.u_eps.values[idx] >= u.values[idx] - 1e-15);
        }
    }

    #[test]
    fn argmax_is_a_fixed_point_at_the_peak() {
        let domain = disk(0.05);
        let u = paraboloid_field(&domain);
        let conv = sup_convolve(&domain, &u, 0.02).unwrap();
        let peak = domain.idx(domain.cx, domain.cy);
        assert_eq!(conv.argmax[peak] as usize, peak);
    }

    #[test]
    fn sup_convolution_converges_to_the_field_as_eps_shrinks() {
        // Radial first eigenfunction at p = 2: steepest slope 1.2485 at
        // the rim, so the defect is close to eps |grad u|^2 / 2.
        let domain = disk(0.02);
        let params = ProblemParams::new(2, 2.0).unwrap();
        let mut u = ScalarField::zeros_like(&domain);
        for j in 0..domain.ny {
            for i in 0..domain.nx {
                let r = domain.x(i).hypot(domain.y(j));
                if r < 1.0 {
                    u.set(i, j, radial_eigenfunction(params, 1.0, r).unwrap());
                }
            }
        }
        let defect = |eps: f64| {
            let conv = sup_convolve(&domain, &u, eps).unwrap();
            let mut worst = 0.0f64;
            for idx in 0..u.values.len() {
                worst = worst.max(conv.u_eps.values[idx] - u.values[idx]);
            }
            worst
        };
        let coarse = defect(0.08);
        let fine = defect(0.02);
        assert!(coarse > 0.04 && coarse < 0.08, "defect {coarse}");
        let ratio = fine / coarse;
        assert!((0.1..=0.3).contains(&ratio), "defect ratio {ratio}");
    }

    #[test]
    fn rejects_bad_sup_convolution_inputs() {
        let domain = disk(0.1);
        let u = paraboloid_field(&domain);
        assert!(sup_convolve(&domain, &u, 0.0).is_err());
        assert!(sup_convolve(&domain, &ScalarField::zeros_like(&domain), 0.1).is_err());
        let mut negative = u.clone();
        negative.values[0] = -1.0;
        assert!(sup_convolve(&domain, &negative, 0.1).is_err());
        // eps so large that the eroded core vanishes.
        assert!(matches!(
            sup_convolve(&domain, &u, 10.0),
            Err(Error::EmptyRegion(_))
        ));
    }

    #[test]
    fn tent_envelope_touches_only_apex_and_rim() {
        // 11 x 11 lattice; v = (1 - m)^2 in the scaled sup-norm m has the
        // pyramid 1 - m as its envelope: contact at the apex and the outer
        // ring only, everything else separated by m (1 - m) >= 0.16.
        let h = 1.0 / 12.0;
        let domain = GridDomain::build(
            &DomainConfig::new(Shape::Rectangle { width: 11.0 * h, height: 11.0 * h }, h).unwrap(),
        )
        .unwrap();
        let mut v = ScalarField::zeros_like(&domain);
        let mut inside_count = 0;
        for j in 0..domain.ny {
            for i in 0..domain.nx {
                if domain.inside[domain.idx(i, j)] {
                    inside_count += 1;
                    let m = (i.abs_diff(domain.cx).max(j.abs_diff(domain.cy))) as f64 / 5.0;
                    v.set(i, j, (1.0 - m) * (1.0 - m));
                }
            }
        }
        assert_eq!(inside_count, 121);
        let env = concave_envelope(&domain, &domain.inside.clone(), &v, 0.0).unwrap();
        assert_eq!(env.star.iter().filter(|&&b| b).count(), 121);

        let mut contact_count = 0;
        for j in 0..domain.ny {
            for i in 0..domain.nx {
                let idx = domain.idx(i, j);
                if !domain.inside[idx] {
                    continue;
                }
                let m = (i.abs_diff(domain.cx).max(j.abs_diff(domain.cy))) as f64 / 5.0;
                let expected = 1.0 - m;
                assert!(
                    (env.gamma.values[idx] - expected).abs() < 1e-9,
                    "gamma at m = {m}: {}",
                    env.gamma.values[idx]
                );
                let should_touch = m == 0.0 || m == 1.0;
                assert_eq!(env.contact[idx], should_touch, "contact at m = {m}");
                if env.contact[idx] {
                    contact_count += 1;
                }
            }
        }
        assert_eq!(contact_count, 41);
    }

    #[test]
    fn envelope_dominates_and_is_concave_and_idempotent() {
        let h = 1.0 / 12.0;
        let domain = GridDomain::build(
            &DomainConfig::new(Shape::Rectangle { width: 11.0 * h, height: 11.0 * h }, h).unwrap(),
        )
        .unwrap();
        let mut v = ScalarField::zeros_like(&domain);
        for j in 0..domain.ny {
            for i in 0..domain.nx {
                if domain.inside[domain.idx(i, j)] {
                    let m = (i.abs_diff(domain.cx).max(j.abs_diff(domain.cy))) as f64 / 5.0;
                    v.set(i, j, (1.0 - m) * (1.0 - m));
                }
            }
        }
        let env = concave_envelope(&domain, &domain.inside.clone(), &v, 0.0).unwrap();
        for idx in 0..v.values.len() {
            if env.star[idx] {
                assert!(env.gamma.values[idx] >= v.values[idx] - 1e-12);
            }
        }
        // Concavity along lattice rows and columns.
        for j in 0..domain.ny {
            for i in 1..domain.nx - 1 {
                let (idx_m, idx, idx_p) =
                    (domain.idx(i - 1, j), domain.idx(i, j), domain.idx(i + 1, j));
                if env.star[idx_m] && env.star[idx] && env.star[idx_p] {
                    let second =
                        env.gamma.values[idx_m] + env.gamma.values[idx_p] - 2.0 * env.gamma.values[idx];
                    assert!(second <= 1e-9, "row second difference {second}");
                }
            }
        }
        let again = concave_envelope(&domain, &domain.inside.clone(), &env.gamma, 0.0).unwrap();
        for idx in 0..v.values.len() {
            if env.star[idx] {
                assert!((again.gamma.values[idx] - env.gamma.values[idx]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn probe_matches_everywhere_on_a_smooth_concave_field() {
        // v = -|x|^2: the tilted minimum for probe q sits at q/2, well
        // inside the disk for every realizable radius, and the gradient
        // is linear, so every ring must match completely.
        let domain = disk(0.05);
        let mut v = ScalarField::zeros_like(&domain);
        for j in 0..domain.ny {
            for i in 0..domain.nx {
                let (x, y) = (domain.x(i), domain.y(j));
                v.set(i, j, -(x * x + y * y));
            }
        }
        let coverage = gradient_image_probe(&domain, &v, 16).unwrap();
        assert_eq!(coverage.rings.len(), 5);
        assert_eq!(coverage.rings[0].targets, 1);
        assert_eq!(coverage.rings[0].matched, 1, "zero probe must land on the max");
        assert_eq!(coverage.fraction, 1.0, "cap {}", coverage.cap);
    }

    #[test]
    fn probe_covers_moderate_gradients_of_the_log_eigenfunction() {
        let domain = disk(0.04);
        let pair = eigen_solve(&domain, 2.0, &SolverConfig::default()).unwrap();
        let floor = 1e-15 * pair.u.max_abs();
        let mut v = ScalarField::zeros_like(&domain);
        for idx in 0..v.values.len() {
            v.values[idx] = pair.u.values[idx].max(floor).ln();
        }
        let coverage = gradient_image_probe(&domain, &v, 16).unwrap();
        assert!(coverage.cap > 5.0, "log gradients should be steep, cap {}", coverage.cap);
        // Inner rings are fully representable; outer ones land against
        // the boundary and are reported without assertion.
        for ring in &coverage.rings[..3] {
            let fraction = ring.matched as f64 / ring.targets as f64;
            assert!(
                fraction >= 0.9,
                "ring radius {} matched {}/{}",
                ring.radius,
                ring.matched,
                ring.targets
            );
        }
    }

    #[test]
    fn chain_smoke_on_a_coarse_disk() {
        let domain = disk(0.05);
        let pair = eigen_solve(&domain, 2.0, &SolverConfig::default()).unwrap();
        let report = verify_abp_chain(&domain, &pair, 2.0, 0.01, 2.0 * domain.h).unwrap();
        assert!(report.evaluated_nodes > 0);
        assert!(report.contact_nodes >= report.evaluated_nodes);
        assert_eq!(report.pointwise_pass_rates.f1, 1.0);
        assert!(report.pointwise_pass_rates.f2 > 0.5, "f2 {}", report.pointwise_pass_rates.f2);
        assert!(report.pointwise_pass_rates.f3 > 0.5, "f3 {}", report.pointwise_pass_rates.f3);
        assert!(report.pointwise_pass_rates.psd > 0.5, "psd {}", report.pointwise_pass_rates.psd);
        assert!(report.terminal_ok, "terminal {} vs {}", report.terminal_bound_lhs, report.terminal_bound_rhs);
        assert!(report.probe.hits >= report.probe.targets / 2);
        assert!(report.lambda > 0.0 && report.area.lhs.is_finite());
    }
}
