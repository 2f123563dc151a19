//! Three-dimensional convex hulls by randomized incremental insertion.
//!
//! Classic conflict-list construction: points are pre-scaled to the unit
//! box axis by axis (an affine map, so face combinatorics and the sign of
//! normal z-components survive), inserted in a seeded random order, and
//! each insertion replaces the visible cone by a fan over its horizon.
//! Points within `EPS_VISIBLE` of a face plane count as not visible, which
//! silently drops coplanar interior points; that is exactly the behavior
//! the upper-envelope consumer wants.

use crate::error::{Error, Result};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Visibility threshold on unit-box coordinates.
const EPS_VISIBLE: f64 = 1e-10;
/// Insertion-order shuffle seed.
const SHUFFLE_SEED: u64 = 0x41b0;

#[derive(Clone)]
struct Face {
    v: [usize; 3],
    /// Neighbor across edge (v[k], v[k+1]).
    neighbor: [usize; 3],
    /// Unprocessed points that see this face.
    conflicts: Vec<usize>,
    alive: bool,
    normal: [f64; 3],
    offset: f64,
}

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

impl Face {
    fn new(v: [usize; 3], pts: &[[f64; 3]]) -> Face {
        let normal = cross(sub(pts[v[1]], pts[v[0]]), sub(pts[v[2]], pts[v[0]]));
        Face {
            v,
            neighbor: [usize::MAX; 3],
            conflicts: Vec::new(),
            alive: true,
            offset: dot(normal, pts[v[0]]),
            normal,
        }
    }

    #[inline]
    fn sees(&self, p: [f64; 3]) -> bool {
        dot(self.normal, p) - self.offset > EPS_VISIBLE
    }
}

/// Faces of the convex hull as outward-oriented vertex triples indexing
/// the input slice.  Fails on clouds with fewer than four affinely
/// independent points.
pub(crate) fn convex_hull_3d(points: &[[f64; 3]]) -> Result<Vec<[usize; 3]>> {
    if points.len() < 4 {
        return Err(Error::Domain(format!(
            "convex hull needs at least 4 points, got {}",
            points.len()
        )));
    }
    // Pre-scale per axis for uniform visibility tolerances.
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for p in points {
        for a in 0..3 {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
        }
    }
    let overall = (0..3).map(|a| hi[a] - lo[a]).fold(0.0f64, f64::max);
    if overall == 0.0 {
        return Err(Error::Domain("all hull input points coincide".into()));
    }
    let scale: Vec<f64> = (0..3)
        .map(|a| {
            let range = hi[a] - lo[a];
            if range > 1e-9 * overall {
                1.0 / range
            } else {
                1.0 / overall
            }
        })
        .collect();
    let pts: Vec<[f64; 3]> = points
        .iter()
        .map(|p| {
            [
                (p[0] - lo[0]) * scale[0],
                (p[1] - lo[1]) * scale[1],
                (p[2] - lo[2]) * scale[2],
            ]
        })
        .collect();

    let seed = initial_tetrahedron(&pts)?;
    let mut faces: Vec<Face> = Vec::new();
    // Orient each face away from the remaining seed vertex.
    for k in 0..4 {
        let opposite = seed[k];
        let mut v = [seed[(k + 1) % 4], seed[(k + 2) % 4], seed[(k + 3) % 4]];
        let face = Face::new(v, &pts);
        if dot(face.normal, pts[opposite]) - face.offset > 0.0 {
            v.swap(1, 2);
        }
        faces.push(Face::new(v, &pts));
    }
    link_neighbors(&mut faces, &[0, 1, 2, 3]);

    // Conflict assignment for the points outside the tetrahedron.
    let mut order: Vec<usize> = (0..points.len()).filter(|i| !seed.contains(i)).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(SHUFFLE_SEED));
    let mut conflict_face: Vec<Option<usize>> = vec![None; points.len()];
    for &pi in &order {
        for (fi, face) in faces.iter_mut().enumerate() {
            if face.sees(pts[pi]) {
                face.conflicts.push(pi);
                conflict_face[pi] = Some(fi);
                break;
            }
        }
    }

    for &pi in &order {
        let Some(start) = conflict_face[pi] else {
            continue;
        };
        if !faces[start].alive {
            // Reassigned or swallowed when its face died.
            continue;
        }
        insert_point(pi, start, &pts, &mut faces, &mut conflict_face);
    }

    Ok(faces
        .into_iter()
        .filter(|f| f.alive)
        .map(|f| f.v)
        .collect())
}

/// Four affinely independent seed points: extreme pair, then farthest from
/// their line, then farthest from their plane.
fn initial_tetrahedron(pts: &[[f64; 3]]) -> Result<[usize; 4]> {
    let mut a = 0;
    for (i, p) in pts.iter().enumerate() {
        if p[0] < pts[a][0] || (p[0] == pts[a][0] && (p[1], p[2]) < (pts[a][1], pts[a][2])) {
            a = i;
        }
    }
    let mut b = a;
    let mut best = 0.0;
    for (i, p) in pts.iter().enumerate() {
        let d = sub(*p, pts[a]);
        let dist = dot(d, d);
        if dist > best {
            best = dist;
            b = i;
        }
    }
    if best <= 1e-24 {
        return Err(Error::Domain("hull input points coincide".into()));
    }
    let ab = sub(pts[b], pts[a]);
    let mut c = a;
    best = 0.0;
    for (i, p) in pts.iter().enumerate() {
        let n = cross(ab, sub(*p, pts[a]));
        let dist = dot(n, n);
        if dist > best {
            best = dist;
            c = i;
        }
    }
    if best <= 1e-24 {
        return Err(Error::Domain("hull input points are collinear".into()));
    }
    let n = cross(ab, sub(pts[c], pts[a]));
    let mut d = a;
    best = 0.0;
    for (i, p) in pts.iter().enumerate() {
        let vol = dot(n, sub(*p, pts[a])).abs();
        if vol > best {
            best = vol;
            d = i;
        }
    }
    if best <= 1e-12 {
        return Err(Error::Domain("hull input points are coplanar".into()));
    }
    Ok([a, b, c, d])
}

/// Rebuild neighbor links among the given faces by matching shared edges.
fn link_neighbors(faces: &mut [Face], ids: &[usize]) {
    use std::collections::HashMap;
    let mut edges: HashMap<(usize, usize), (usize, usize)> = HashMap::new();
    for &fi in ids {
        for k in 0..3 {
            let (p, q) = (faces[fi].v[k], faces[fi].v[(k + 1) % 3]);
            edges.insert((p, q), (fi, k));
        }
    }
    for (&(p, q), &(fi, k)) in &edges {
        if let Some(&(fj, _)) = edges.get(&(q, p)) {
            faces[fi].neighbor[k] = fj;
        }
    }
}

fn insert_point(
    pi: usize,
    start: usize,
    pts: &[[f64; 3]],
    faces: &mut Vec<Face>,
    conflict_face: &mut [Option<usize>],
) {
    // Flood the visible region.
    let mut visible = vec![start];
    let mut stack = vec![start];
    faces[start].alive = false;
    while let Some(fi) = stack.pop() {
        for k in 0..3 {
            let nb = faces[fi].neighbor[k];
            if faces[nb].alive && faces[nb].sees(pts[pi]) {
                faces[nb].alive = false;
                visible.push(nb);
                stack.push(nb);
            }
        }
    }
    // Horizon edges: edges of visible faces whose neighbor survives.
    // Collect them oriented as seen from the surviving side.
    let mut horizon: Vec<(usize, usize, usize)> = Vec::new();
    for &fi in &visible {
        for k in 0..3 {
            let nb = faces[fi].neighbor[k];
            if faces[nb].alive {
                horizon.push((faces[fi].v[k], faces[fi].v[(k + 1) % 3], nb));
            }
        }
    }
    // New cone: one face per horizon edge, keeping the edge orientation so
    // the outward side is preserved.
    let mut fresh: Vec<usize> = Vec::with_capacity(horizon.len());
    for &(p, q, _) in &horizon {
        let id = faces.len();
        faces.push(Face::new([p, q, pi], pts));
        fresh.push(id);
    }
    // Candidate conflicts: points of all dead faces.
    let mut orphans: Vec<usize> = Vec::new();
    for &fi in &visible {
        orphans.append(&mut faces[fi].conflicts);
    }
    orphans.sort_unstable();
    orphans.dedup();
    for orphan in orphans {
        if orphan == pi {
            continue;
        }
        conflict_face[orphan] = None;
        for &nf in &fresh {
            if faces[nf].sees(pts[orphan]) {
                faces[nf].conflicts.push(orphan);
                conflict_face[orphan] = Some(nf);
                break;
            }
        }
    }
    // Stitch adjacency: new faces among themselves (shared apex edges) and
    // across the horizon.
    let mut ids: Vec<usize> = fresh.clone();
    for &(_, _, nb) in &horizon {
        ids.push(nb);
    }
    ids.sort_unstable();
    ids.dedup();
    link_neighbors_partial(faces, &ids);
}

/// Re-link neighbors for the given faces only, leaving links that point at
/// faces outside the set untouched.
fn link_neighbors_partial(faces: &mut [Face], ids: &[usize]) {
    use std::collections::HashMap;
    let mut edges: HashMap<(usize, usize), (usize, usize)> = HashMap::new();
    for &fi in ids {
        if !faces[fi].alive {
            continue;
        }
        for k in 0..3 {
            let (p, q) = (faces[fi].v[k], faces[fi].v[(k + 1) % 3]);
            edges.insert((p, q), (fi, k));
        }
    }
    for (&(p, q), &(fi, k)) in &edges {
        if let Some(&(fj, _)) = edges.get(&(q, p)) {
            faces[fi].neighbor[k] = fj;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    use rand::Rng;

    fn assert_all_below(points: &[[f64; 3]], faces: &[[usize; 3]]) {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for p in points {
            for a in 0..3 {
                lo[a] = lo[a].min(p[a]);
                hi[a] = hi[a].max(p[a]);
            }
        }
        let scale = (0..3).map(|a| hi[a] - lo[a]).fold(0.0f64, f64::max);
        for f in faces {
            let n = cross(sub(points[f[1]], points[f[0]]), sub(points[f[2]], points[f[0]]));
            let len = dot(n, n).sqrt();
            let off = dot(n, points[f[0]]);
            for p in points {
                let excess = (dot(n, *p) - off) / len;
                assert!(
                    excess <= 1e-8 * scale,
                    "point {p:?} above face {f:?} by {excess}"
                );
            }
        }
    }

    #[test]
    fn tetrahedron_hull_has_four_faces() {
        let points = vec![
            [0.0, 0.0, 0.0],
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.0, 0.0, 1.0],
        ];
        let faces = convex_hull_3d(&points).unwrap();
        assert_eq!(faces.len(), 4);
        assert_all_below(&points, &faces);
    }

    #[test]
    fn cube_with_interior_points() {
        let mut points = Vec::new();
        for x in [0.0, 1.0] {
            for y in [0.0, 1.0] {
                for z in [0.0, 1.0] {
                    points.push([x, y, z]);
                }
            }
        }
        points.push([0.5, 0.5, 0.5]);
        points.push([0.25, 0.75, 0.5]);
        let faces = convex_hull_3d(&points).unwrap();
        // Triangulated cube: 12 faces on 8 vertices.
        assert_eq!(faces.len(), 12);
        assert_all_below(&points, &faces);
        let used: std::collections::HashSet<usize> = faces.iter().flatten().copied().collect();
        assert!(!used.contains(&8) && !used.contains(&9));
    }

    #[test]
    fn random_cloud_satisfies_hull_invariants() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let points: Vec<[f64; 3]> = (0..400)
            .map(|_| {
                let p: [f64; 3] = [
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                ];
                p
            })
            .collect();
        let faces = convex_hull_3d(&points).unwrap();
        assert_all_below(&points, &faces);
        // Closed triangulated surface: every edge appears once per direction.
        let mut edges = std::collections::HashMap::new();
        for f in &faces {
            for k in 0..3 {
                let e = (f[k], f[(k + 1) % 3]);
                *edges.entry(e).or_insert(0) += 1;
            }
        }
        for (&(p, q), &count) in &edges {
            assert_eq!(count, 1, "edge ({p}, {q}) repeated");
            assert_eq!(edges.get(&(q, p)), Some(&1), "edge ({p}, {q}) unmatched");
        }
        // Euler for triangulations: F = 2 V_hull - 4.
        let hull_vertices: std::collections::HashSet<usize> =
            faces.iter().flatten().copied().collect();
        assert_eq!(faces.len(), 2 * hull_vertices.len() - 4);
    }

    #[test]
    fn paraboloid_grid_upper_faces_dominate() {
        // z = -(x^2 + y^2) sampled on a grid: every sample is a hull vertex
        // of the upper sheet, and upper-face planes dominate the cloud.
        let mut points = Vec::new();
        for j in -5i32..=5 {
            for i in -5i32..=5 {
                let (x, y) = (i as f64 / 5.0, j as f64 / 5.0);
                points.push([x, y, -(x * x + y * y)]);
            }
        }
        let faces = convex_hull_3d(&points).unwrap();
        assert_all_below(&points, &faces);
        let upper: Vec<[usize; 3]> = faces
            .into_iter()
            .filter(|f| {
                let n = cross(sub(points[f[1]], points[f[0]]), sub(points[f[2]], points[f[0]]));
                n[2] > 1e-12
            })
            .collect();
        // Upper sheet triangulates the 11 x 11 grid: 2 * 10 * 10 triangles.
        assert_eq!(upper.len(), 200);
    }

    #[test]
    fn deterministic_face_order() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let points: Vec<[f64; 3]> = (0..100)
            .map(|_| {
                [
                    rng.gen_range(0.0..1.0),
                    rng.gen_range(0.0..1.0),
                    rng.gen_range(0.0..1.0),
                ]
            })
            .collect();
        let first = convex_hull_3d(&points).unwrap();
        let second = convex_hull_3d(&points).unwrap();
        assert_eq!(first, second);
    }

    #[test]
    fn degenerate_clouds_are_rejected() {
        let flat: Vec<[f64; 3]> = (0..10)
            .map(|k| [k as f64, (k * k) as f64, 0.0])
            .collect();
        assert!(convex_hull_3d(&flat).is_err());
        assert!(convex_hull_3d(&[[0.0; 3], [1.0, 0.0, 0.0], [2.0, 0.0, 0.0], [3.0, 0.0, 0.0]])
            .is_err());
        assert!(convex_hull_3d(&[[0.0; 3]; 6]).is_err());
        assert!(convex_hull_3d(&[[0.0; 3], [1.0, 0.0, 0.0]]).is_err());
    }
}
