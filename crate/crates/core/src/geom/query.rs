//! Nearest-surface, ray-cast and inside/outside queries.
//!
//! Meshes above [`BVH_THRESHOLD`] faces are queried through a [`Bvh`]; smaller
//! meshes are scanned exhaustively. Both paths evaluate the same per-triangle
//! kernels and order candidates by `(distance, face index)`, so they return
//! identical results.

use std::sync::OnceLock;

use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, UnitSphere};

use super::bvh::{Bvh, Node};
use super::mesh::Mesh;
use crate::error::{Error, Result};

pub const BVH_THRESHOLD: usize = 256;

/// Barycentric coordinates this close to 0 count as an edge/vertex hit.
pub const EDGE_EPS: f64 = 1e-12;

const MAX_INSIDE_ATTEMPTS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfacePoint {
    pub point: Vector3<f64>,
    pub distance: f64,
    pub face: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayHit {
    pub point: Vector3<f64>,
    pub t: f64,
    pub face: usize,
    /// Barycentric weights of the hit relative to the face's 2nd and 3rd vertex.
    pub u: f64,
    pub v: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    Auto,
    BruteForce,
    Bvh,
}

/// Query accelerator over a borrowed mesh; immutable and shareable across threads.
pub struct MeshIndex<'a> {
    mesh: &'a Mesh,
    bvh: Option<Bvh>,
    watertight: OnceLock<Option<String>>,
}

/// Closest point on triangle `abc` to `p`.
pub fn closest_point_on_triangle(
    p: &Vector3<f64>,
    a: &Vector3<f64>,
    b: &Vector3<f64>,
    c: &Vector3<f64>,
) -> Vector3<f64> {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return *a;
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return *b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return a + ab * v;
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return *c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return a + ac * w;
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return b + (c - b) * w;
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    a + ab * v + ac * w
}

/// Result of intersecting a ray with one triangle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TriangleHit {
    Miss,
    /// Clean crossing; `det < 0` means the ray leaves through the front face.
    Hit {
        t: f64,
        u: f64,
        v: f64,
        det: f64,
    },
    /// Crossing on an edge/vertex, or a ray lying in the triangle's plane.
    Degenerate {
        t: f64,
    },
}

/// Möller–Trumbore intersection with edge/vertex detection.
pub fn intersect_triangle(
    origin: &Vector3<f64>,
    dir: &Vector3<f64>,
    a: &Vector3<f64>,
    b: &Vector3<f64>,
    c: &Vector3<f64>,
) -> TriangleHit {
    let e1 = b - a;
    let e2 = c - a;
    let pv = dir.cross(&e2);
    let det = e1.dot(&pv);
    let scale = e1.norm() * e2.norm() * dir.norm();
    if det.abs() <= 1e-14 * scale {
        // Parallel: only matters when the ray lies in the plane and overlaps the triangle.
        let n = e1.cross(&e2);
        let nl = n.norm();
        if nl == 0.0 {
            return TriangleHit::Miss;
        }
        let off = (origin - a).dot(&n) / nl;
        if off.abs() > 1e-9 * (e1.norm() + e2.norm()) {
            return TriangleHit::Miss;
        }
        return if segment_grazes_triangle(origin, dir, a, b, c) {
            TriangleHit::Degenerate { t: 0.0 }
        } else {
            TriangleHit::Miss
        };
    }
    let inv = 1.0 / det;
    let tv = origin - a;
    let u = tv.dot(&pv) * inv;
    if u < -EDGE_EPS || u > 1.0 + EDGE_EPS {
        return TriangleHit::Miss;
    }
    let qv = tv.cross(&e1);
    let v = dir.dot(&qv) * inv;
    if v < -EDGE_EPS || u + v > 1.0 + EDGE_EPS {
        return TriangleHit::Miss;
    }
    let t = e2.dot(&qv) * inv;
    if u <= EDGE_EPS || v <= EDGE_EPS || 1.0 - u - v <= EDGE_EPS {
        return TriangleHit::Degenerate { t };
    }
    TriangleHit::Hit { t, u, v, det }
}

fn segment_grazes_triangle(
    origin: &Vector3<f64>,
    dir: &Vector3<f64>,
    a: &Vector3<f64>,
    b: &Vector3<f64>,
    c: &Vector3<f64>,
) -> bool {
    // Coplanar ray: conservative test against the triangle's bounding sphere.
    let centre = (a + b + c) / 3.0;
    let r = (a - centre).norm().max((b - centre).norm()).max((c - centre).norm());
    let d = dir.normalize();
    let w = centre - origin;
    let along = w.dot(&d);
    let perp = (w - d * along).norm();
    perp <= r && along + r >= 0.0
}

impl<'a> MeshIndex<'a> {
    pub fn new(mesh: &'a Mesh) -> Self {
        Self::with_strategy(mesh, Strategy::Auto)
    }

    pub fn with_strategy(mesh: &'a Mesh, strategy: Strategy) -> Self {
        let use_bvh = match strategy {
            Strategy::Auto => mesh.face_count() > BVH_THRESHOLD,
            Strategy::BruteForce => false,
            Strategy::Bvh => true,
        };
        Self {
            mesh,
            bvh: use_bvh.then(|| Bvh::build(mesh)),
            watertight: OnceLock::new(),
        }
    }

    pub fn mesh(&self) -> &Mesh {
        self.mesh
    }

    pub fn uses_bvh(&self) -> bool {
        self.bvh.is_some()
    }

    pub fn require_watertight(&self) -> Result<()> {
        match self.watertight.get_or_init(|| self.mesh.watertight_defect()) {
            None => Ok(()),
            Some(msg) => Err(Error::NotWatertight(msg.clone())),
        }
    }

    /// Closest surface point; ties resolved toward the lowest face index.
    pub fn nearest(&self, p: &Vector3<f64>) -> Result<SurfacePoint> {
        if self.mesh.faces.is_empty() {
            return Err(Error::EmptyMesh);
        }
        let mut best = (f64::INFINITY, usize::MAX, Vector3::zeros());
        let visit = |f: usize, best: &mut (f64, usize, Vector3<f64>)| {
            let [a, b, c] = self.mesh.triangle(f);
            let q = closest_point_on_triangle(p, &a, &b, &c);
            let d2 = (q - p).norm_squared();
            if d2 < best.0 || (d2 == best.0 && f < best.1) {
                *best = (d2, f, q);
            }
        };
        match &self.bvh {
            None => (0..self.mesh.face_count()).for_each(|f| visit(f, &mut best)),
            Some(bvh) => {
                let mut stack = vec![0usize];
                while let Some(ni) = stack.pop() {
                    let node = &bvh.nodes[ni];
                    if node.bb().distance_squared(p) > best.0 {
                        continue;
                    }
                    match node {
                        Node::Leaf { start, len, .. } => {
                            for &f in &bvh.faces[*start..start + len] {
                                visit(f, &mut best);
                            }
                        }
                        Node::Inner { left, right, .. } => {
                            let dl = bvh.nodes[*left].bb().distance_squared(p);
                            let dr = bvh.nodes[*right].bb().distance_squared(p);
                            if dl <= dr {
                                stack.push(*right);
                                stack.push(*left);
                            } else {
                                stack.push(*left);
                                stack.push(*right);
                            }
                        }
                    }
                }
            }
        }
        Ok(SurfacePoint {
            point: best.2,
            distance: best.0.sqrt(),
            face: best.1,
        })
    }

    /// Visits every triangle whose bounds the ray passes through.
    fn for_each_ray_candidate(
        &self,
        origin: &Vector3<f64>,
        dir: &Vector3<f64>,
        mut prune_beyond: impl FnMut() -> f64,
        mut visit: impl FnMut(usize),
    ) {
        match &self.bvh {
            None => (0..self.mesh.face_count()).for_each(visit),
            Some(bvh) => {
                if bvh.nodes.is_empty() {
                    return;
                }
                let inv = dir.map(|c| 1.0 / c);
                let mut stack = vec![0usize];
                while let Some(ni) = stack.pop() {
                    let node = &bvh.nodes[ni];
                    let Some((t0, _)) = node.bb().ray_interval(origin, &inv) else {
                        continue;
                    };
                    if t0 > prune_beyond() {
                        continue;
                    }
                    match node {
                        Node::Leaf { start, len, .. } => {
                            for &f in &bvh.faces[*start..start + len] {
                                visit(f);
                            }
                        }
                        Node::Inner { left, right, .. } => {
                            stack.push(*right);
                            stack.push(*left);
                        }
                    }
                }
            }
        }
    }

    /// First hit with positive ray parameter; ties resolved toward the lowest face index.
    pub fn ray_cast(&self, origin: &Vector3<f64>, dir: &Vector3<f64>) -> Option<RayHit> {
        if dir.norm_squared() == 0.0 {
            return None;
        }
        let best = std::cell::Cell::new((f64::INFINITY, usize::MAX, 0.0, 0.0));
        self.for_each_ray_candidate(
            origin,
            dir,
            || best.get().0,
            |f| {
                let [a, b, c] = self.mesh.triangle(f);
                let (t, u, v) = match intersect_triangle(origin, dir, &a, &b, &c) {
                    TriangleHit::Hit { t, u, v, .. } => (t, u, v),
                    TriangleHit::Degenerate { t } if t > 0.0 => {
                        // Edge hits still count for first-hit queries.
                        let (u, v) = barycentric_uv(&(origin + dir * t), &a, &b, &c);
                        (t, u, v)
                    }
                    _ => return,
                };
                let cur = best.get();
                if t > 0.0 && (t < cur.0 || (t == cur.0 && f < cur.1)) {
                    best.set((t, f, u, v));
                }
            },
        );
        let (t, face, u, v) = best.get();
        (face != usize::MAX).then(|| RayHit {
            point: origin + dir * t,
            t,
            face,
            u,
            v,
        })
    }

    /// Signed crossing count along the ray (`None` when a hit is degenerate).
    fn winding_along(&self, origin: &Vector3<f64>, dir: &Vector3<f64>) -> Option<i64> {
        let mut winding = 0i64;
        let mut degenerate = false;
        self.for_each_ray_candidate(
            origin,
            dir,
            || f64::INFINITY,
            |f| {
                if degenerate {
                    return;
                }
                let [a, b, c] = self.mesh.triangle(f);
                match intersect_triangle(origin, dir, &a, &b, &c) {
                    TriangleHit::Hit { t, det, .. } if t > 0.0 => {
                        winding += if det < 0.0 { 1 } else { -1 };
                    }
                    TriangleHit::Degenerate { t } if t >= 0.0 => degenerate = true,
                    _ => {}
                }
            },
        );
        (!degenerate).then_some(winding)
    }

    /// Inside test by crossings of a `+x` ray, retried along deterministic
    /// pseudo-random directions when the ray grazes an edge or vertex.
    ///
    /// Crossings are signed by face orientation and the point is inside when the
    /// sum is nonzero, which equals parity for a single closed surface and also
    /// handles meshes made of several overlapping closed components.
    pub fn is_inside(&self, p: &Vector3<f64>) -> Result<bool> {
        self.require_watertight()?;
        self.inside_unchecked(p)
    }

    fn inside_unchecked(&self, p: &Vector3<f64>) -> Result<bool> {
        if let Some(w) = self.winding_along(p, &Vector3::x()) {
            return Ok(w != 0);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(point_seed(p));
        let mut last = 0;
        for _ in 1..MAX_INSIDE_ATTEMPTS {
            let d: [f64; 3] = UnitSphere.sample(&mut rng);
            let dir = Vector3::from(d);
            match self.winding_along(p, &dir) {
                Some(w) => return Ok(w != 0),
                None => last += 1,
            }
        }
        Err(Error::Degenerate(format!(
            "inside test at {p:?} grazed mesh features on {} rays",
            last + 1
        )))
    }

    /// Classifies cell centres `(x, y, z)` for each `x` in `xs` with one `+x`
    /// scanline, equivalent to calling [`MeshIndex::is_inside`] per point.
    pub fn inside_along_x(&self, y: f64, z: f64, xs: &[f64]) -> Result<Vec<bool>> {
        self.require_watertight()?;
        let bb = self.mesh.bounding_box();
        let start = Vector3::new(bb.min.x - 1.0 - bb.extent().x, y, z);
        let mut hits: Vec<(f64, i64)> = Vec::new();
        let mut degenerate = false;
        let dir = Vector3::x();
        self.for_each_ray_candidate(
            &start,
            &dir,
            || f64::INFINITY,
            |f| {
                let [a, b, c] = self.mesh.triangle(f);
                match intersect_triangle(&start, &dir, &a, &b, &c) {
                    TriangleHit::Hit { t, det, .. } => hits.push((start.x + t, if det < 0.0 { 1 } else { -1 })),
                    TriangleHit::Degenerate { .. } => degenerate = true,
                    TriangleHit::Miss => {}
                }
            },
        );
        if degenerate {
            return xs
                .iter()
                .map(|&x| self.inside_unchecked(&Vector3::new(x, y, z)))
                .collect();
        }
        hits.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(xs
            .iter()
            .map(|&x| hits.iter().filter(|h| h.0 > x).map(|h| h.1).sum::<i64>() != 0)
            .collect())
    }
}

fn barycentric_uv(p: &Vector3<f64>, a: &Vector3<f64>, b: &Vector3<f64>, c: &Vector3<f64>) -> (f64, f64) {
    let v0 = b - a;
    let v1 = c - a;
    let v2 = p - a;
    let d00 = v0.dot(&v0);
    let d01 = v0.dot(&v1);
    let d11 = v1.dot(&v1);
    let d20 = v2.dot(&v0);
    let d21 = v2.dot(&v1);
    let den = d00 * d11 - d01 * d01;
    if den == 0.0 {
        return (0.0, 0.0);
    }
    let u = (d11 * d20 - d01 * d21) / den;
    let v = (d00 * d21 - d01 * d20) / den;
    (u.clamp(0.0, 1.0), v.clamp(0.0, 1.0 - u.clamp(0.0, 1.0)))
}

/// Seed derived from the bit pattern of the query point.
fn point_seed(p: &Vector3<f64>) -> u64 {
    let mut h = 0x9E37_79B9_7F4A_7C15u64;
    for c in p.iter() {
        h ^= c.to_bits();
        // splitmix64 finalizer
        h = h.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = h;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        h = z ^ (z >> 31);
    }
    h
}

pub fn nearest_surface_point(p: &Vector3<f64>, mesh: &Mesh) -> Result<SurfacePoint> {
    MeshIndex::new(mesh).nearest(p)
}

pub fn ray_cast(origin: &Vector3<f64>, dir: &Vector3<f64>, mesh: &Mesh) -> Option<RayHit> {
    MeshIndex::new(mesh).ray_cast(origin, dir)
}

pub fn is_inside(p: &Vector3<f64>, mesh: &Mesh) -> Result<bool> {
    MeshIndex::new(mesh).is_inside(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn unit_cube() -> Mesh {
        Mesh::cuboid(Vector3::zeros(), Vector3::repeat(1.0), 1).unwrap()
    }

    /// Generalized winding number by summed solid angles.
    fn winding_number(p: &Vector3<f64>, m: &Mesh) -> f64 {
        let mut total = 0.0;
        for f in 0..m.face_count() {
            let [a, b, c] = m.triangle(f);
            let (a, b, c) = (a - p, b - p, c - p);
            let (la, lb, lc) = (a.norm(), b.norm(), c.norm());
            let num = a.dot(&b.cross(&c));
            let den = la * lb * lc + a.dot(&b) * lc + b.dot(&c) * la + c.dot(&a) * lb;
            total += 2.0 * num.atan2(den);
        }
        total / (4.0 * std::f64::consts::PI)
    }

    fn brute_ray(o: &Vector3<f64>, d: &Vector3<f64>, m: &Mesh) -> Option<(f64, usize)> {
        let mut best: Option<(f64, usize)> = None;
        for f in 0..m.face_count() {
            let [a, b, c] = m.triangle(f);
            // plain Möller–Trumbore, no edge classification
            let e1 = b - a;
            let e2 = c - a;
            let pv = d.cross(&e2);
            let det = e1.dot(&pv);
            if det.abs() < 1e-15 {
                continue;
            }
            let tv = o - a;
            let u = tv.dot(&pv) / det;
            let qv = tv.cross(&e1);
            let v = d.dot(&qv) / det;
            let t = e2.dot(&qv) / det;
            if u >= 0.0 && v >= 0.0 && u + v <= 1.0 && t > 0.0 && best.is_none_or(|b| t < b.0) {
                best = Some((t, f));
            }
        }
        best
    }

    #[test]
    fn nearest_on_vertex_is_zero() {
        let m = unit_cube();
        let s = nearest_surface_point(&Vector3::new(1.0, 1.0, 1.0), &m).unwrap();
        assert_eq!(s.distance, 0.0);
        assert_eq!(s.point, Vector3::new(1.0, 1.0, 1.0));
    }

    #[test]
    fn nearest_above_plane() {
        let m = Mesh::new(
            vec![
                Vector3::new(-100.0, -100.0, 0.0),
                Vector3::new(100.0, -100.0, 0.0),
                Vector3::new(0.0, 100.0, 0.0),
            ],
            vec![[0, 1, 2]],
        )
        .unwrap();
        let s = nearest_surface_point(&Vector3::new(1.0, 2.0, 3.5), &m).unwrap();
        assert!((s.distance - 3.5).abs() < 1e-12);
    }

    #[test]
    fn empty_mesh_errors() {
        let m = Mesh::new(vec![], vec![]).unwrap();
        assert!(matches!(
            nearest_surface_point(&Vector3::zeros(), &m),
            Err(Error::EmptyMesh)
        ));
    }

    #[test]
    fn bvh_and_brute_force_agree_on_nearest() {
        let m = Mesh::icosphere(Vector3::new(3.0, 1.0, -2.0), 20.0, 3).unwrap();
        let brute = MeshIndex::with_strategy(&m, Strategy::BruteForce);
        let bvh = MeshIndex::with_strategy(&m, Strategy::Bvh);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..500 {
            let p = Vector3::new(
                rng.random_range(-40.0..40.0),
                rng.random_range(-40.0..40.0),
                rng.random_range(-40.0..40.0),
            );
            let a = brute.nearest(&p).unwrap();
            let b = bvh.nearest(&p).unwrap();
            assert_eq!(a.face, b.face);
            assert_eq!(a.distance.to_bits(), b.distance.to_bits());
            assert!(a.distance >= 0.0);
        }
        // tie on a shared vertex: lowest index wins on both paths
        let v = m.vertices[7];
        assert_eq!(brute.nearest(&v).unwrap().face, bvh.nearest(&v).unwrap().face);
        assert_eq!(brute.nearest(&v).unwrap().distance, 0.0);
    }

    #[test]
    fn ray_hits_cube_face_centre() {
        let m = unit_cube();
        let o = Vector3::new(0.5, 0.3, -2.0);
        let h = ray_cast(&o, &Vector3::z(), &m).unwrap();
        assert!((h.t - 2.0).abs() < 1e-12);
        assert!(ray_cast(&o, &-Vector3::z(), &m).is_none());
    }

    #[test]
    fn ray_cast_matches_brute_scan() {
        let m = Mesh::icosphere(Vector3::zeros(), 15.0, 3).unwrap();
        let idx = MeshIndex::new(&m);
        assert!(idx.uses_bvh());
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..500 {
            let o = Vector3::new(
                rng.random_range(-30.0..30.0),
                rng.random_range(-30.0..30.0),
                rng.random_range(-30.0..30.0),
            );
            let d: [f64; 3] = UnitSphere.sample(&mut rng);
            let d = Vector3::from(d);
            let got = idx.ray_cast(&o, &d).map(|h| (h.t, h.face));
            let want = brute_ray(&o, &d, &m);
            match (got, want) {
                (None, None) => {}
                (Some(g), Some(w)) => {
                    assert!((g.0 - w.0).abs() < 1e-9);
                    assert_eq!(g.1, w.1);
                }
                other => panic!("mismatch {other:?}"),
            }
        }
    }

    #[test]
    fn cube_inside_outside() {
        let m = unit_cube();
        assert!(is_inside(&Vector3::new(0.5, 0.5, 0.5), &m).unwrap());
        assert!(!is_inside(&Vector3::new(2.0, 0.0, 0.0), &m).unwrap());
    }

    #[test]
    fn non_watertight_inside_errors() {
        let m = Mesh::new(vec![Vector3::zeros(), Vector3::x(), Vector3::y()], vec![[0, 1, 2]]).unwrap();
        assert!(matches!(is_inside(&Vector3::zeros(), &m), Err(Error::NotWatertight(_))));
    }

    #[test]
    fn inside_agrees_with_winding_number() {
        let mut m = Mesh::icosphere(Vector3::zeros(), 10.0, 2).unwrap();
        m.append(&Mesh::cuboid(Vector3::new(5.0, -3.0, -3.0), Vector3::new(20.0, 3.0, 3.0), 2).unwrap());
        let idx = MeshIndex::new(&m);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let p = Vector3::new(
                rng.random_range(-12.0..22.0),
                rng.random_range(-12.0..12.0),
                rng.random_range(-12.0..12.0),
            );
            let w = winding_number(&p, &m);
            assert_eq!(idx.is_inside(&p).unwrap(), w > 0.5, "p={p:?} w={w}");
        }
    }

    #[test]
    fn grid_aligned_points_use_retry() {
        // (0.5, 0.5, 0.5) +x ray crosses the diagonal of the x=1 face.
        let m = unit_cube();
        let idx = MeshIndex::new(&m);
        assert!(idx.winding_along(&Vector3::repeat(0.5), &Vector3::x()).is_none());
        assert!(idx.is_inside(&Vector3::repeat(0.5)).unwrap());
        assert_eq!(
            idx.is_inside(&Vector3::repeat(0.5)).unwrap(),
            idx.is_inside(&Vector3::repeat(0.5)).unwrap()
        );
    }

    #[test]
    fn scanline_matches_pointwise() {
        let m = Mesh::icosphere(Vector3::new(0.3, 0.1, 0.0), 10.0, 3).unwrap();
        let idx = MeshIndex::new(&m);
        let xs: Vec<f64> = (0..40).map(|i| -12.0 + i as f64 * 0.6).collect();
        for (y, z) in [(0.0, 0.0), (3.3, -2.1), (9.9, 0.0), (5.0, 5.0)] {
            let row = idx.inside_along_x(y, z, &xs).unwrap();
            for (x, r) in xs.iter().zip(row) {
                assert_eq!(r, idx.is_inside(&Vector3::new(*x, y, z)).unwrap());
            }
        }
    }
}
