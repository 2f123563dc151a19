//! Planar domains discretized on a uniform lattice.
//!
//! A [`GridDomain`] is built from a [`Shape`] and a spacing `h`: the lattice
//! is centered so the origin is a node, padded by a few cells of outside
//! nodes on every side, and classified into inside / boundary band /
//! interior.  Interior nodes have their full 3x3 neighborhood inside, so
//! every finite-difference stencil used elsewhere is applicable there
//! without special cases.
//!
//! Geometry extracted from the mask: the measure (node count times cell
//! area), the inradius (via an exact squared distance transform), the
//! outradius (minimal enclosing circle of the boundary band), and the
//! boundary polyline loops (marching squares), which back the SVG writer.

use crate::error::{Error, Result};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use std::collections::HashMap;
use std::io::Write as _;
use std::path::Path;

/// Cells of outside padding added around the shape's bounding box.
const PAD_CELLS: usize = 4;
/// Upper bound on total lattice nodes; build fails above it.
const MAX_NODES: usize = 40_000_000;
/// Shuffle seed for the minimal-enclosing-circle pass.
const WELZL_SEED: u64 = 0x5EED;

/// Supported planar shapes.  `contains` is strict (open set), so lattice
/// nodes exactly on the boundary count as outside.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "parameters", rename_all = "snake_case")]
pub enum Shape {
    Disk { radius: f64 },
    Ellipse { semi_x: f64, semi_y: f64 },
    Rectangle { width: f64, height: f64 },
    /// Rectangle of length `straight` capped by half-disks of `radius`.
    Stadium { straight: f64, radius: f64 },
    Annulus { inner: f64, outer: f64 },
}

impl Shape {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Shape::Disk { radius } => radius > 0.0 && radius.is_finite(),
            Shape::Ellipse { semi_x, semi_y } => {
                semi_x > 0.0 && semi_y > 0.0 && semi_x.is_finite() && semi_y.is_finite()
            }
            Shape::Rectangle { width, height } => {
                width > 0.0 && height > 0.0 && width.is_finite() && height.is_finite()
            }
            Shape::Stadium { straight, radius } => {
                straight > 0.0 && radius > 0.0 && straight.is_finite() && radius.is_finite()
            }
            Shape::Annulus { inner, outer } => {
                inner > 0.0 && outer > inner && outer.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Domain(format!("invalid shape parameters: {self:?}")))
        }
    }

    /// Strict membership test.
    pub fn contains(&self, x: f64, y: f64) -> bool {
        match *self {
            Shape::Disk { radius } => x * x + y * y < radius * radius,
            Shape::Ellipse { semi_x, semi_y } => {
                let (u, v) = (x / semi_x, y / semi_y);
                u * u + v * v < 1.0
            }
            Shape::Rectangle { width, height } => {
                x.abs() < 0.5 * width && y.abs() < 0.5 * height
            }
            Shape::Stadium { straight, radius } => {
                let hx = 0.5 * straight;
                if x.abs() <= hx {
                    y.abs() < radius
                } else {
                    let dx = x.abs() - hx;
                    dx * dx + y * y < radius * radius
                }
            }
            Shape::Annulus { inner, outer } => {
                let r2 = x * x + y * y;
                inner * inner < r2 && r2 < outer * outer
            }
        }
    }

    /// Half-extents of the bounding box, centered at the origin.
    pub fn half_extents(&self) -> (f64, f64) {
        match *self {
            Shape::Disk { radius } => (radius, radius),
            Shape::Ellipse { semi_x, semi_y } => (semi_x, semi_y),
            Shape::Rectangle { width, height } => (0.5 * width, 0.5 * height),
            Shape::Stadium { straight, radius } => (0.5 * straight + radius, radius),
            Shape::Annulus { outer, .. } => (outer, outer),
        }
    }

    /// Outward unit normal of the boundary component nearest to the point.
    /// Meaningful near the boundary; degenerate points fall back to (0, 1).
    pub fn outward_normal(&self, x: f64, y: f64) -> (f64, f64) {
        let normalize = |nx: f64, ny: f64| {
            let len = nx.hypot(ny);
            if len < 1e-12 {
                (0.0, 1.0)
            } else {
                (nx / len, ny / len)
            }
        };
        match *self {
            Shape::Disk { .. } => normalize(x, y),
            Shape::Ellipse { semi_x, semi_y } => {
                normalize(x / (semi_x * semi_x), y / (semi_y * semi_y))
            }
            Shape::Rectangle { width, height } => {
                if x.abs() / width >= y.abs() / height {
                    (x.signum(), 0.0)
                } else {
                    (0.0, y.signum())
                }
            }
            Shape::Stadium { straight, .. } => {
                let hx = 0.5 * straight;
                if x.abs() <= hx {
                    (0.0, y.signum())
                } else {
                    normalize(x - hx * x.signum(), y)
                }
            }
            Shape::Annulus { inner, outer } => {
                let mid = 0.5 * (inner + outer);
                let (nx, ny) = normalize(x, y);
                if x.hypot(y) >= mid {
                    (nx, ny)
                } else {
                    (-nx, -ny)
                }
            }
        }
    }

    /// Whether the boundary is a single closed curve.  The annulus is the
    /// one shape here with two components.
    pub fn boundary_connected(&self) -> bool {
        !matches!(self, Shape::Annulus { .. })
    }
}

/// Shape plus lattice spacing; the JSON form is
/// `{"kind": "disk", "parameters": {"radius": 1.0}, "h": 0.01}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DomainConfig {
    #[serde(flatten)]
    pub shape: Shape,
    pub h: f64,
}

impl DomainConfig {
    pub fn new(shape: Shape, h: f64) -> Result<Self> {
        let config = DomainConfig { shape, h };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        self.shape.validate()?;
        if !(self.h.is_finite() && self.h > 0.0) {
            return Err(Error::Domain(format!("spacing h = {} must be positive", self.h)));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let config: DomainConfig = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Row-major grid of values, indexed as `j * nx + i`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScalarField {
    pub nx: usize,
    pub ny: usize,
    pub values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(nx: usize, ny: usize) -> Self {
        ScalarField {
            nx,
            ny,
            values: vec![0.0; nx * ny],
        }
    }

    pub fn zeros_like(domain: &GridDomain) -> Self {
        Self::zeros(domain.nx, domain.ny)
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.nx + i]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.values[j * self.nx + i] = value;
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }
}

/// A shape sampled on a centered, padded lattice.
#[derive(Debug, Clone)]
pub struct GridDomain {
    pub shape: Shape,
    pub h: f64,
    pub nx: usize,
    pub ny: usize,
    /// Index of the node at the origin.
    pub cx: usize,
    pub cy: usize,
    /// Nodes strictly inside the shape.
    pub inside: Vec<bool>,
    /// Inside nodes with an outside 8-neighbor.
    pub band: Vec<bool>,
    /// Inside nodes whose full 3x3 neighborhood is inside.
    pub interior: Vec<bool>,
    pub inside_count: usize,
    /// `inside_count * h^2`.
    pub measure: f64,
    /// Radius of the largest inscribed disk, to lattice accuracy.
    pub inradius: f64,
    /// Radius of the minimal disk enclosing the boundary band.
    pub outradius: f64,
}

impl GridDomain {
    pub fn build(config: &DomainConfig) -> Result<Self> {
        config.validate()?;
        let (shape, h) = (config.shape, config.h);
        let (wx, wy) = shape.half_extents();
        let half_nx = (wx / h).ceil() as usize + PAD_CELLS;
        let half_ny = (wy / h).ceil() as usize + PAD_CELLS;
        let nx = 2 * half_nx + 1;
        let ny = 2 * half_ny + 1;
        if nx * ny > MAX_NODES {
            return Err(Error::Domain(format!(
                "lattice {nx} x {ny} exceeds the {MAX_NODES}-node cap; increase h"
            )));
        }
        let (cx, cy) = (half_nx, half_ny);

        let mut inside = vec![false; nx * ny];
        let mut inside_count = 0;
        for j in 0..ny {
            let y = (j as f64 - cy as f64) * h;
            for i in 0..nx {
                let x = (i as f64 - cx as f64) * h;
                if shape.contains(x, y) {
                    inside[j * nx + i] = true;
                    inside_count += 1;
                }
            }
        }
        if inside_count == 0 {
            return Err(Error::EmptyRegion(format!(
                "no lattice nodes fall inside {shape:?} at h = {h}"
            )));
        }

        let components = count_components(&inside, nx, ny);
        if components != 1 {
            return Err(Error::DisconnectedMask { components });
        }

        let mut band = vec![false; nx * ny];
        let mut interior = vec![false; nx * ny];
        for j in 0..ny {
            for i in 0..nx {
                let idx = j * nx + i;
                if !inside[idx] {
                    continue;
                }
                // Padding guarantees inside nodes are never on the frame.
                let mut full = true;
                for dj in -1i64..=1 {
                    for di in -1i64..=1 {
                        let ni = (i as i64 + di) as usize;
                        let nj = (j as i64 + dj) as usize;
                        if !inside[nj * nx + ni] {
                            full = false;
                        }
                    }
                }
                if full {
                    interior[idx] = true;
                } else {
                    band[idx] = true;
                }
            }
        }

        let outside: Vec<bool> = inside.iter().map(|&b| !b).collect();
        let dist2 = squared_edt(&outside, nx, ny);
        let inradius = dist2
            .iter()
            .zip(&inside)
            .filter(|&(_, &ins)| ins)
            .fold(0.0f64, |acc, (&d, _)| acc.max(d))
            .sqrt()
            * h;

        let band_points: Vec<(f64, f64)> = (0..nx * ny)
            .filter(|&idx| band[idx])
            .map(|idx| {
                let (i, j) = (idx % nx, idx / nx);
                ((i as f64 - cx as f64) * h, (j as f64 - cy as f64) * h)
            })
            .collect();
        let outradius = min_enclosing_radius(&band_points);

        Ok(GridDomain {
            shape,
            h,
            nx,
            ny,
            cx,
            cy,
            inside,
            band,
            interior,
            inside_count,
            measure: inside_count as f64 * h * h,
            inradius,
            outradius,
        })
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        (i as f64 - self.cx as f64) * self.h
    }

    #[inline]
    pub fn y(&self, j: usize) -> f64 {
        (j as f64 - self.cy as f64) * self.h
    }

    /// Indices of interior nodes, row-major order.
    pub fn interior_indices(&self) -> Vec<usize> {
        (0..self.nx * self.ny).filter(|&k| self.interior[k]).collect()
    }
}

/// Number of 4-connected components of the true nodes.
fn count_components(mask: &[bool], nx: usize, ny: usize) -> usize {
    let mut seen = vec![false; mask.len()];
    let mut components = 0;
    let mut stack = Vec::new();
    for start in 0..mask.len() {
        if !mask[start] || seen[start] {
            continue;
        }
        components += 1;
        seen[start] = true;
        stack.push(start);
        while let Some(idx) = stack.pop() {
            let (i, j) = (idx % nx, idx / nx);
            let mut push = |ni: usize, nj: usize, stack: &mut Vec<usize>| {
                let nidx = nj * nx + ni;
                if mask[nidx] && !seen[nidx] {
                    seen[nidx] = true;
                    stack.push(nidx);
                }
            };
            if i > 0 {
                push(i - 1, j, &mut stack);
            }
            if i + 1 < nx {
                push(i + 1, j, &mut stack);
            }
            if j > 0 {
                push(i, j - 1, &mut stack);
            }
            if j + 1 < ny {
                push(i, j + 1, &mut stack);
            }
        }
    }
    components
}

/// Exact squared Euclidean distance (in lattice units) from every node to
/// the nearest `feature` node, by the two-pass parabola-envelope transform.
/// Rows or columns with no feature stay at a large finite sentinel.
pub fn squared_edt(feature: &[bool], nx: usize, ny: usize) -> Vec<f64> {
    const FAR: f64 = 1e20;
    let mut g = vec![0.0f64; nx * ny];
    for (k, &f) in feature.iter().enumerate() {
        g[k] = if f { 0.0 } else { FAR };
    }
    let n_max = nx.max(ny);
    let mut f_line = vec![0.0f64; n_max];
    let mut d_line = vec![0.0f64; n_max];
    let mut v = vec![0usize; n_max];
    let mut z = vec![0.0f64; n_max + 1];

    // Columns, then rows.
    for i in 0..nx {
        for j in 0..ny {
            f_line[j] = g[j * nx + i];
        }
        dt_1d(&f_line[..ny], &mut d_line, &mut v, &mut z);
        for j in 0..ny {
            g[j * nx + i] = d_line[j];
        }
    }
    for j in 0..ny {
        f_line[..nx].copy_from_slice(&g[j * nx..j * nx + nx]);
        dt_1d(&f_line[..nx], &mut d_line, &mut v, &mut z);
        g[j * nx..j * nx + nx].copy_from_slice(&d_line[..nx]);
    }
    g
}

/// One-dimensional squared distance transform: d[q] = min_k (q - k)^2 + f[k].
fn dt_1d(f: &[f64], d: &mut [f64], v: &mut [usize], z: &mut [f64]) {
    let n = f.len();
    let mut k = 0usize;
    v[0] = 0;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in 1..n {
        let qf = q as f64;
        loop {
            let vk = v[k] as f64;
            let s = ((f[q] + qf * qf) - (f[v[k]] + vk * vk)) / (2.0 * qf - 2.0 * vk);
            if s <= z[k] {
                if k == 0 {
                    // Degenerate only when f has infinities; FAR keeps it finite.
                    break;
                }
                k -= 1;
            } else {
                k += 1;
                v[k] = q;
                z[k] = s;
                z[k + 1] = f64::INFINITY;
                break;
            }
        }
    }
    k = 0;
    for q in 0..n {
        let qf = q as f64;
        while z[k + 1] < qf {
            k += 1;
        }
        let vk = v[k] as f64;
        d[q] = (qf - vk) * (qf - vk) + f[v[k]];
    }
}

#[derive(Clone, Copy)]
struct Circle {
    cx: f64,
    cy: f64,
    r2: f64,
}

impl Circle {
    fn contains(&self, p: (f64, f64)) -> bool {
        let (dx, dy) = (p.0 - self.cx, p.1 - self.cy);
        dx * dx + dy * dy <= self.r2 * (1.0 + 1e-12)
    }

    fn from_two(a: (f64, f64), b: (f64, f64)) -> Circle {
        let cx = 0.5 * (a.0 + b.0);
        let cy = 0.5 * (a.1 + b.1);
        let (dx, dy) = (a.0 - cx, a.1 - cy);
        Circle { cx, cy, r2: dx * dx + dy * dy }
    }

    fn from_three(a: (f64, f64), b: (f64, f64), c: (f64, f64)) -> Circle {
        let d = 2.0 * (a.0 * (b.1 - c.1) + b.0 * (c.1 - a.1) + c.0 * (a.1 - b.1));
        if d.abs() < 1e-30 {
            // Collinear: widest two-point circle.
            let ab = Circle::from_two(a, b);
            let bc = Circle::from_two(b, c);
            let ac = Circle::from_two(a, c);
            let mut best = ab;
            if bc.r2 > best.r2 {
                best = bc;
            }
            if ac.r2 > best.r2 {
                best = ac;
            }
            return best;
        }
        let a2 = a.0 * a.0 + a.1 * a.1;
        let b2 = b.0 * b.0 + b.1 * b.1;
        let c2 = c.0 * c.0 + c.1 * c.1;
        let cx = (a2 * (b.1 - c.1) + b2 * (c.1 - a.1) + c2 * (a.1 - b.1)) / d;
        let cy = (a2 * (c.0 - b.0) + b2 * (a.0 - c.0) + c2 * (b.0 - a.0)) / d;
        let (dx, dy) = (a.0 - cx, a.1 - cy);
        Circle { cx, cy, r2: dx * dx + dy * dy }
    }
}

/// Radius of the minimal circle enclosing the points (expected linear time).
fn min_enclosing_radius(points: &[(f64, f64)]) -> f64 {
    if points.is_empty() {
        return 0.0;
    }
    let mut pts = points.to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(WELZL_SEED);
    pts.shuffle(&mut rng);

    let mut circle = Circle { cx: pts[0].0, cy: pts[0].1, r2: 0.0 };
    for i in 1..pts.len() {
        if circle.contains(pts[i]) {
            continue;
        }
        circle = Circle { cx: pts[i].0, cy: pts[i].1, r2: 0.0 };
        for j in 0..i {
            if circle.contains(pts[j]) {
                continue;
            }
            circle = Circle::from_two(pts[i], pts[j]);
            for k in 0..j {
                if !circle.contains(pts[k]) {
                    circle = Circle::from_three(pts[i], pts[j], pts[k]);
                }
            }
        }
    }
    circle.r2.sqrt()
}

/// Closed boundary polylines of the inside mask, in physical coordinates.
/// Vertices sit on lattice edge midpoints; each loop repeats its first
/// vertex at the end.  Simply connected shapes yield one loop, the annulus
/// two.
pub fn boundary_loops(domain: &GridDomain) -> Vec<Vec<(f64, f64)>> {
    let (nx, ny) = (domain.nx, domain.ny);
    let inside = &domain.inside;
    // Segment endpoints keyed on doubled lattice coordinates, so edge
    // midpoints are integers.
    let mut segments: Vec<((i64, i64), (i64, i64))> = Vec::new();
    for j in 0..ny - 1 {
        for i in 0..nx - 1 {
            let b0 = inside[j * nx + i] as usize;
            let b1 = inside[j * nx + i + 1] as usize;
            let b2 = inside[(j + 1) * nx + i + 1] as usize;
            let b3 = inside[(j + 1) * nx + i] as usize;
            let case = b0 | (b1 << 1) | (b2 << 2) | (b3 << 3);
            let (ii, jj) = (2 * i as i64, 2 * j as i64);
            let bottom = (ii + 1, jj);
            let right = (ii + 2, jj + 1);
            let top = (ii + 1, jj + 2);
            let left = (ii, jj + 1);
            match case {
                1 | 14 => segments.push((bottom, left)),
                2 | 13 => segments.push((bottom, right)),
                3 | 12 => segments.push((left, right)),
                4 | 11 => segments.push((right, top)),
                6 | 9 => segments.push((bottom, top)),
                7 | 8 => segments.push((top, left)),
                5 => {
                    segments.push((bottom, left));
                    segments.push((right, top));
                }
                10 => {
                    segments.push((bottom, right));
                    segments.push((top, left));
                }
                _ => {}
            }
        }
    }

    // Every vertex has degree two, so the segments decompose into cycles.
    let mut adjacency: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    for (s, &(a, b)) in segments.iter().enumerate() {
        adjacency.entry(a).or_default().push(s);
        adjacency.entry(b).or_default().push(s);
    }
    let to_physical = |(kx, ky): (i64, i64)| {
        (
            (0.5 * kx as f64 - domain.cx as f64) * domain.h,
            (0.5 * ky as f64 - domain.cy as f64) * domain.h,
        )
    };
    let mut used = vec![false; segments.len()];
    let mut loops = Vec::new();
    for start in 0..segments.len() {
        if used[start] {
            continue;
        }
        let mut path = Vec::new();
        let origin = segments[start].0;
        let mut vertex = origin;
        let mut seg = start;
        loop {
            used[seg] = true;
            path.push(to_physical(vertex));
            let (a, b) = segments[seg];
            vertex = if vertex == a { b } else { a };
            if vertex == origin {
                break;
            }
            let next = adjacency[&vertex]
                .iter()
                .copied()
                .find(|&s| !used[s])
                .expect("boundary vertex of odd degree");
            seg = next;
        }
        path.push(to_physical(origin));
        loops.push(path);
    }
    loops
}

/// Write the field at inside nodes as `x,y,value` CSV rows.
pub fn write_field_csv(domain: &GridDomain, field: &ScalarField, path: &Path) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "x,y,value")?;
    for j in 0..domain.ny {
        for i in 0..domain.nx {
            if domain.inside[domain.idx(i, j)] {
                writeln!(
                    out,
                    "{:.14e},{:.14e},{:.14e}",
                    domain.x(i),
                    domain.y(j),
                    field.get(i, j)
                )?;
            }
        }
    }
    Ok(())
}

/// Render the mask boundary as an SVG document (y axis flipped so the
/// figure is upright; holes handled by the even-odd fill rule).
pub fn write_mask_svg(domain: &GridDomain, path: &Path) -> Result<()> {
    let loops = boundary_loops(domain);
    let (wx, wy) = domain.shape.half_extents();
    let margin = 4.0 * domain.h + 0.05 * wx.max(wy);
    let (x0, y0) = (-wx - margin, -wy - margin);
    let (w, h) = (2.0 * (wx + margin), 2.0 * (wy + margin));
    let mut d = String::new();
    for path_loop in &loops {
        for (k, &(x, y)) in path_loop.iter().enumerate() {
            let cmd = if k == 0 { 'M' } else { 'L' };
            d.push_str(&format!("{cmd}{x:.6} {:.6} ", -y));
        }
        d.push('Z');
    }
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="{x0:.6} {y0:.6} {w:.6} {h:.6}" width="640" height="{:.0}">"#,
        640.0 * h / w
    )?;
    writeln!(
        out,
        r##"<rect x="{x0:.6}" y="{y0:.6}" width="{w:.6}" height="{h:.6}" fill="#ffffff"/>"##
    )?;
    writeln!(
        out,
        r##"<path d="{d}" fill="#d7e6f4" fill-rule="evenodd" stroke="#1f4e79" stroke-width="{:.6}"/>"##,
        domain.h
    )?;
    writeln!(out, "</svg>")?;
    Ok(())
}
