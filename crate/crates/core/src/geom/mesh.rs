use std::collections::HashMap;

use nalgebra::Vector3;

use super::rotation::RigidPose;
use crate::error::{Error, Result};

/// Indexed triangle surface with unit per-vertex normals. Units are millimeters.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub vertices: Vec<Vector3<f64>>,
    pub faces: Vec<[usize; 3]>,
    pub normals: Vec<Vector3<f64>>,
}

/// Axis-aligned box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Vector3<f64>,
    pub max: Vector3<f64>,
}

impl Aabb {
    pub fn empty() -> Self {
        Self {
            min: Vector3::repeat(f64::INFINITY),
            max: Vector3::repeat(f64::NEG_INFINITY),
        }
    }

    pub fn grow(&mut self, p: &Vector3<f64>) {
        self.min = self.min.inf(p);
        self.max = self.max.sup(p);
    }

    pub fn merge(&self, o: &Aabb) -> Aabb {
        Aabb {
            min: self.min.inf(&o.min),
            max: self.max.sup(&o.max),
        }
    }

    pub fn extent(&self) -> Vector3<f64> {
        self.max - self.min
    }

    pub fn center(&self) -> Vector3<f64> {
        0.5 * (self.min + self.max)
    }

    pub fn volume(&self) -> f64 {
        let e = self.extent();
        e.x * e.y * e.z
    }

    /// Squared distance from `p` to the box (0 inside).
    pub fn distance_squared(&self, p: &Vector3<f64>) -> f64 {
        let mut d = 0.0;
        for i in 0..3 {
            let v = if p[i] < self.min[i] {
                self.min[i] - p[i]
            } else if p[i] > self.max[i] {
                p[i] - self.max[i]
            } else {
                0.0
            };
            d += v * v;
        }
        d
    }

    /// Slab test; returns the entry/exit parameters clipped to `[0, ∞)`.
    pub fn ray_interval(&self, origin: &Vector3<f64>, inv_dir: &Vector3<f64>) -> Option<(f64, f64)> {
        let mut t0 = 0.0f64;
        let mut t1 = f64::INFINITY;
        for i in 0..3 {
            let mut a = (self.min[i] - origin[i]) * inv_dir[i];
            let mut b = (self.max[i] - origin[i]) * inv_dir[i];
            if a.is_nan() || b.is_nan() {
                // 0 * inf: origin on the slab boundary of a parallel ray.
                if origin[i] < self.min[i] || origin[i] > self.max[i] {
                    return None;
                }
                continue;
            }
            if a > b {
                std::mem::swap(&mut a, &mut b);
            }
            t0 = t0.max(a);
            t1 = t1.min(b);
        }
        (t0 <= t1 * (1.0 + 1e-12) + 1e-12).then_some((t0, t1))
    }
}

impl Mesh {
    /// Builds a mesh and derives area-weighted vertex normals.
    pub fn new(vertices: Vec<Vector3<f64>>, faces: Vec<[usize; 3]>) -> Result<Self> {
        validate_faces(vertices.len(), &faces)?;
        let normals = area_weighted_normals(&vertices, &faces);
        Ok(Self {
            vertices,
            faces,
            normals,
        })
    }

    /// Builds a mesh with caller-supplied normals (renormalized).
    pub fn with_normals(
        vertices: Vec<Vector3<f64>>,
        faces: Vec<[usize; 3]>,
        normals: Vec<Vector3<f64>>,
    ) -> Result<Self> {
        validate_faces(vertices.len(), &faces)?;
        if normals.len() != vertices.len() {
            return Err(Error::size("vertex normals", vertices.len(), normals.len()));
        }
        let normals = normals
            .into_iter()
            .map(|n| {
                let l = n.norm();
                if l > 0.0 && l.is_finite() {
                    Ok(n / l)
                } else {
                    Err(Error::InvalidMesh("zero-length vertex normal".into()))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            vertices,
            faces,
            normals,
        })
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    pub fn triangle(&self, f: usize) -> [Vector3<f64>; 3] {
        let [a, b, c] = self.faces[f];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    /// Unnormalized face normal (twice the area, CCW orientation).
    pub fn face_normal(&self, f: usize) -> Vector3<f64> {
        let [a, b, c] = self.triangle(f);
        (b - a).cross(&(c - a))
    }

    pub fn bounding_box(&self) -> Aabb {
        let mut bb = Aabb::empty();
        for v in &self.vertices {
            bb.grow(v);
        }
        bb
    }

    /// True when every edge is shared by exactly two faces with opposite orientation.
    pub fn is_watertight(&self) -> bool {
        self.watertight_defect().is_none()
    }

    /// Describes the first boundary or non-manifold edge, if any.
    pub fn watertight_defect(&self) -> Option<String> {
        if self.faces.is_empty() {
            return Some("no faces".into());
        }
        let mut directed: HashMap<(usize, usize), u32> = HashMap::with_capacity(self.faces.len() * 3);
        for f in &self.faces {
            for k in 0..3 {
                *directed.entry((f[k], f[(k + 1) % 3])).or_default() += 1;
            }
        }
        let mut keys: Vec<_> = directed.iter().collect();
        keys.sort_unstable_by_key(|(k, _)| **k);
        for (&(a, b), &n) in keys {
            if n != 1 {
                return Some(format!("edge {a}->{b} used by {n} faces in the same direction"));
            }
            if directed.get(&(b, a)) != Some(&1) {
                return Some(format!("edge {a}-{b} has no opposite half-edge"));
            }
        }
        None
    }

    pub fn require_watertight(&self) -> Result<()> {
        match self.watertight_defect() {
            None => Ok(()),
            Some(msg) => Err(Error::NotWatertight(msg)),
        }
    }

    /// Enclosed volume by the divergence theorem (mm³); positive for outward orientation.
    pub fn signed_volume(&self) -> f64 {
        self.faces
            .iter()
            .map(|&[a, b, c]| self.vertices[a].dot(&self.vertices[b].cross(&self.vertices[c])) / 6.0)
            .sum()
    }

    pub fn transformed(&self, pose: &RigidPose) -> Mesh {
        let r = pose.rotation.to_matrix();
        Mesh {
            vertices: self.vertices.iter().map(|v| r * v + pose.translation).collect(),
            faces: self.faces.clone(),
            normals: self.normals.iter().map(|n| r * n).collect(),
        }
    }

    pub fn translated(&self, t: &Vector3<f64>) -> Mesh {
        Mesh {
            vertices: self.vertices.iter().map(|v| v + t).collect(),
            faces: self.faces.clone(),
            normals: self.normals.clone(),
        }
    }

    /// Same topology, new vertex positions, normals recomputed.
    pub fn with_vertices(&self, vertices: Vec<Vector3<f64>>) -> Result<Mesh> {
        if vertices.len() != self.vertices.len() {
            return Err(Error::size("vertices", self.vertices.len(), vertices.len()));
        }
        Mesh::new(vertices, self.faces.clone())
    }

    pub fn scaled(&self, s: f64) -> Mesh {
        Mesh {
            vertices: self.vertices.iter().map(|v| v * s).collect(),
            faces: self.faces.clone(),
            normals: self.normals.clone(),
        }
    }

    /// Appends another mesh as a separate component.
    pub fn append(&mut self, other: &Mesh) {
        let off = self.vertices.len();
        self.vertices.extend_from_slice(&other.vertices);
        self.normals.extend_from_slice(&other.normals);
        self.faces
            .extend(other.faces.iter().map(|f| [f[0] + off, f[1] + off, f[2] + off]));
    }

    /// Axis-aligned box split into `n` segments per edge.
    pub fn cuboid(min: Vector3<f64>, max: Vector3<f64>, n: usize) -> Result<Mesh> {
        Self::cuboid_segments(min, max, [n; 3])
    }

    /// Axis-aligned box with `segments[a]` divisions along axis `a`.
    pub fn cuboid_segments(min: Vector3<f64>, max: Vector3<f64>, segments: [usize; 3]) -> Result<Mesh> {
        let [sx, sy, sz] = segments.map(|s| s.max(1));
        let e = max - min;
        if !(e.x > 0.0 && e.y > 0.0 && e.z > 0.0) {
            return Err(Error::Degenerate(format!("box extent {e:?}")));
        }
        let mut b = GridBuilder::default();
        // Each face as (origin, u, v) with u × v pointing outward.
        let x = Vector3::new(e.x, 0.0, 0.0);
        let y = Vector3::new(0.0, e.y, 0.0);
        let z = Vector3::new(0.0, 0.0, e.z);
        let faces = [
            (min, y, x, sy, sx),
            (min + z, x, y, sx, sy),
            (min, x, z, sx, sz),
            (min + y, z, x, sz, sx),
            (min, z, y, sz, sy),
            (min + x, y, z, sy, sz),
        ];
        for (o, u, v, nu, nv) in faces {
            b.add_patch(o, u, v, nu, nv);
        }
        Mesh::new(b.vertices, b.faces)
    }

    /// Geodesic sphere from a subdivided icosahedron.
    pub fn icosphere(center: Vector3<f64>, radius: f64, subdivisions: usize) -> Result<Mesh> {
        if !(radius > 0.0) {
            return Err(Error::Degenerate(format!("sphere radius {radius}")));
        }
        let t = (1.0 + 5f64.sqrt()) / 2.0;
        let mut verts: Vec<Vector3<f64>> = [
            (-1.0, t, 0.0),
            (1.0, t, 0.0),
            (-1.0, -t, 0.0),
            (1.0, -t, 0.0),
            (0.0, -1.0, t),
            (0.0, 1.0, t),
            (0.0, -1.0, -t),
            (0.0, 1.0, -t),
            (t, 0.0, -1.0),
            (t, 0.0, 1.0),
            (-t, 0.0, -1.0),
            (-t, 0.0, 1.0),
        ]
        .iter()
        .map(|&(a, b, c)| Vector3::new(a, b, c).normalize())
        .collect();
        let mut faces: Vec<[usize; 3]> = vec![
            [0, 11, 5],
            [0, 5, 1],
            [0, 1, 7],
            [0, 7, 10],
            [0, 10, 11],
            [1, 5, 9],
            [5, 11, 4],
            [11, 10, 2],
            [10, 7, 6],
            [7, 1, 8],
            [3, 9, 4],
            [3, 4, 2],
            [3, 2, 6],
            [3, 6, 8],
            [3, 8, 9],
            [4, 9, 5],
            [2, 4, 11],
            [6, 2, 10],
            [8, 6, 7],
            [9, 8, 1],
        ];
        for _ in 0..subdivisions {
            let mut mid: HashMap<(usize, usize), usize> = HashMap::new();
            let mut next = Vec::with_capacity(faces.len() * 4);
            let mut midpoint = |a: usize, b: usize, verts: &mut Vec<Vector3<f64>>| {
                let key = (a.min(b), a.max(b));
                *mid.entry(key).or_insert_with(|| {
                    verts.push(((verts[a] + verts[b]) * 0.5).normalize());
                    verts.len() - 1
                })
            };
            for &[a, b, c] in &faces {
                let ab = midpoint(a, b, &mut verts);
                let bc = midpoint(b, c, &mut verts);
                let ca = midpoint(c, a, &mut verts);
                next.extend_from_slice(&[[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
            }
            faces = next;
        }
        let normals = verts.clone();
        let vertices = verts.iter().map(|v| center + v * radius).collect();
        Mesh::with_normals(vertices, faces, normals)
    }
}

/// Accumulates welded rectangular grid patches; shared boundary vertices are merged.
#[derive(Default)]
struct GridBuilder {
    vertices: Vec<Vector3<f64>>,
    faces: Vec<[usize; 3]>,
    index: HashMap<[i64; 3], usize>,
}

impl GridBuilder {
    fn vertex(&mut self, p: Vector3<f64>) -> usize {
        let key = [
            (p.x * 1e6).round() as i64,
            (p.y * 1e6).round() as i64,
            (p.z * 1e6).round() as i64,
        ];
        if let Some(&i) = self.index.get(&key) {
            return i;
        }
        self.vertices.push(p);
        self.index.insert(key, self.vertices.len() - 1);
        self.vertices.len() - 1
    }

    fn add_patch(&mut self, o: Vector3<f64>, u: Vector3<f64>, v: Vector3<f64>, nu: usize, nv: usize) {
        let mut ids = vec![vec![0usize; nv + 1]; nu + 1];
        for (i, row) in ids.iter_mut().enumerate() {
            for (j, id) in row.iter_mut().enumerate() {
                *id = self.vertex(o + u * (i as f64 / nu as f64) + v * (j as f64 / nv as f64));
            }
        }
        for i in 0..nu {
            for j in 0..nv {
                let (a, b, c, d) = (ids[i][j], ids[i + 1][j], ids[i + 1][j + 1], ids[i][j + 1]);
                self.faces.push([a, b, c]);
                self.faces.push([a, c, d]);
            }
        }
    }
}

fn validate_faces(nv: usize, faces: &[[usize; 3]]) -> Result<()> {
    for (fi, f) in faces.iter().enumerate() {
        if f.iter().any(|&i| i >= nv) {
            return Err(Error::InvalidMesh(format!(
                "face {fi} references vertex {:?} but mesh has {nv} vertices",
                f
            )));
        }
    }
    Ok(())
}

/// Area-weighted average of incident face normals.
pub fn area_weighted_normals(vertices: &[Vector3<f64>], faces: &[[usize; 3]]) -> Vec<Vector3<f64>> {
    let mut acc = vec![Vector3::zeros(); vertices.len()];
    for &[a, b, c] in faces {
        let n = (vertices[b] - vertices[a]).cross(&(vertices[c] - vertices[a]));
        acc[a] += n;
        acc[b] += n;
        acc[c] += n;
    }
    acc.into_iter()
        .map(|n| {
            let l = n.norm();
            if l > 0.0 {
                n / l
            } else {
                Vector3::z()
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cuboid_is_watertight_with_unit_normals() {
        let m = Mesh::cuboid(Vector3::zeros(), Vector3::new(1.0, 2.0, 3.0), 3).unwrap();
        assert!(m.is_watertight(), "{:?}", m.watertight_defect());
        assert!((m.signed_volume() - 6.0).abs() < 1e-12);
        for n in &m.normals {
            assert!((n.norm() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn icosphere_volume_and_orientation() {
        let m = Mesh::icosphere(Vector3::new(1.0, 2.0, 3.0), 10.0, 3).unwrap();
        assert!(m.is_watertight());
        let analytic = 4.0 / 3.0 * std::f64::consts::PI * 1000.0;
        let v = m.signed_volume();
        assert!(v > 0.0 && (v - analytic).abs() / analytic < 0.02);
    }

    #[test]
    fn open_surface_is_reported() {
        let m = Mesh::new(vec![Vector3::zeros(), Vector3::x(), Vector3::y()], vec![[0, 1, 2]]).unwrap();
        assert!(m.require_watertight().is_err());
    }

    #[test]
    fn out_of_range_index_rejected() {
        let e = Mesh::new(vec![Vector3::zeros()], vec![[0, 1, 2]]).unwrap_err();
        assert!(matches!(e, Error::InvalidMesh(_)));
    }
}
