//! Palm-side subregions, control points and surface anchors.
//!
//! Numbering. Finger `f` (index, middle, ring, little) owns control points
//! `5f..5f+5`: `5f` at one third of the wrist-to-knuckle link, `5f+1..=5f+3` at
//! the phalanx midpoints and `5f+4` at two thirds of the wrist-to-knuckle link.
//! The thumb owns `20` (wrist-to-knuckle midpoint) and `21..=23` (phalanges).
//! Region `3f + k` is phalanx `k` of finger `f` (thumb is `f = 4`), region 15
//! is the palm metacarpal and region 16 the carpal.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{Mesh, MeshIndex};
use crate::hand::{finger_joint, SkinnedHand, FINGER_COUNT, FINGER_NAMES, WRIST};
use crate::io::{check_schema, read_json, to_json_string, write_text};

pub const REGION_COUNT: usize = 17;
pub const CONTROL_POINT_COUNT: usize = 24;
pub const PALM_METACARPAL: usize = 15;
pub const CARPAL: usize = 16;
pub const TIP_REGIONS: [usize; FINGER_COUNT] = [2, 5, 8, 11, 14];
pub const TIP_CONTROL_POINTS: [usize; FINGER_COUNT] = [3, 8, 13, 18, 23];
pub const CARPAL_CONTROL_POINTS: [usize; 5] = [0, 5, 10, 15, 20];
pub const PALM_CONTROL_POINTS: [usize; 4] = [4, 9, 14, 19];
/// Carpal control points that yield anchors.
pub const CARPAL_ANCHOR_POINTS: [usize; 3] = [5, 10, 20];
pub const ANCHORS_PER_TIP: usize = 3;
pub const ANCHOR_SCHEMA: &str = "cpf.anchors/1";

const PHALANX_NAMES: [&str; 3] = ["proximal", "intermediate", "distal"];

pub fn region_names() -> Vec<String> {
    let mut names = Vec::with_capacity(REGION_COUNT);
    for f in FINGER_NAMES {
        for k in PHALANX_NAMES {
            names.push(format!("{f}_{k}"));
        }
    }
    names.push("palm_metacarpal".into());
    names.push("carpal".into());
    names
}

pub fn is_tip_region(r: usize) -> bool {
    TIP_REGIONS.contains(&r)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlPoint {
    pub id: usize,
    pub position: Vector3<f64>,
    /// `4f` is finger `f`'s wrist-to-knuckle link, `4f + 1 + k` its phalanx `k`.
    pub link: usize,
    pub region: usize,
}

fn phalanx_region(finger: usize, k: usize) -> usize {
    3 * finger + k
}

/// The 24 control points of the canonical hand, ordered by id.
pub fn build_control_points(hand: &SkinnedHand) -> Result<Vec<ControlPoint>> {
    let tree = &hand.tree;
    tree.validate()?;
    let leaves = tree.leaves();
    let wrist = tree.rest_positions[WRIST];
    let mut cps = Vec::with_capacity(CONTROL_POINT_COUNT);
    for f in 0..FINGER_COUNT {
        let joints: Vec<usize> = (0..3).map(|k| finger_joint(f, k)).collect();
        for (k, &j) in joints.iter().enumerate() {
            let expected_parent = if k == 0 { WRIST } else { joints[k - 1] };
            if tree.parents[j] != Some(expected_parent) {
                return Err(Error::Invalid(format!(
                    "joint {j} should hang from joint {expected_parent} for finger {}",
                    FINGER_NAMES[f]
                )));
            }
        }
        let leaf = leaves
            .iter()
            .position(|&l| l == joints[2])
            .ok_or_else(|| Error::Invalid(format!("joint {} is not a leaf", joints[2])))?;
        let mut ends: Vec<Vector3<f64>> = joints.iter().map(|&j| tree.rest_positions[j]).collect();
        ends.push(tree.tips[leaf]);
        let knuckle = ends[0];
        let base = cps.len();
        let mut push = |position: Vector3<f64>, link: usize, region: usize| {
            let id = cps.len();
            cps.push(ControlPoint {
                id,
                position,
                link,
                region,
            });
        };
        if f < 4 {
            push(wrist + (knuckle - wrist) / 3.0, 4 * f, CARPAL);
        } else {
            push((wrist + knuckle) / 2.0, 4 * f, CARPAL);
        }
        for k in 0..3 {
            push((ends[k] + ends[k + 1]) / 2.0, 4 * f + 1 + k, phalanx_region(f, k));
        }
        if f < 4 {
            push(wrist + (knuckle - wrist) * (2.0 / 3.0), 4 * f, PALM_METACARPAL);
        }
        debug_assert_eq!(cps[base].id, base);
    }
    debug_assert_eq!(cps.len(), CONTROL_POINT_COUNT);
    Ok(cps)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubregionMap {
    /// `None` for back-of-hand vertices.
    pub region_of_vertex: Vec<Option<usize>>,
    pub region_names: Vec<String>,
    pub tip_regions: Vec<usize>,
}

impl SubregionMap {
    pub fn histogram(&self) -> [usize; REGION_COUNT] {
        let mut h = [0; REGION_COUNT];
        for r in self.region_of_vertex.iter().flatten() {
            h[*r] += 1;
        }
        h
    }

    pub fn tip_vertices(&self) -> Vec<usize> {
        self.region_of_vertex
            .iter()
            .enumerate()
            .filter_map(|(i, r)| r.filter(|r| is_tip_region(*r)).map(|_| i))
            .collect()
    }
}

/// Labels each palm-side template vertex with its nearest control point's region.
///
/// A vertex is palm-side when it lies below its dominant joint along the up axis.
/// Distance ties go to the lower control-point id.
pub fn assign_subregions(hand: &SkinnedHand, cps: &[ControlPoint]) -> SubregionMap {
    let up = hand.up.normalize();
    let region_of_vertex = hand
        .template
        .vertices
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let joint = hand.tree.rest_positions[hand.dominant_joint(i)];
            if (v - joint).dot(&up) >= 0.0 {
                return None;
            }
            nearest_control_point(cps, v).map(|c| cps[c].region)
        })
        .collect();
    SubregionMap {
        region_of_vertex,
        region_names: region_names(),
        tip_regions: TIP_REGIONS.to_vec(),
    }
}

fn nearest_control_point(cps: &[ControlPoint], v: &Vector3<f64>) -> Option<usize> {
    let mut best: Option<(f64, usize)> = None;
    for (c, cp) in cps.iter().enumerate() {
        let d = (cp.position - v).norm_squared();
        if best.is_none_or(|(bd, _)| d < bd) {
            best = Some((d, c));
        }
    }
    best.map(|b| b.1)
}

/// Surface point `(1 − x1 − x2) v1 + x1 v2 + x2 v3` on template face `face`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Anchor {
    pub face: usize,
    pub x1: f64,
    pub x2: f64,
    pub region: usize,
    pub control_point: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnchorSet {
    pub schema: String,
    /// Vertex count of the hand the anchors were derived on.
    pub vertex_count: usize,
    pub faces: Vec<[usize; 3]>,
    pub anchors: Vec<Anchor>,
}

impl AnchorSet {
    pub fn len(&self) -> usize {
        self.anchors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.anchors.is_empty()
    }

    /// Anchor indices grouped by region.
    pub fn by_region(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); REGION_COUNT];
        for (i, a) in self.anchors.iter().enumerate() {
            out[a.region].push(i);
        }
        out
    }

    pub fn tip_anchors(&self) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| is_tip_region(self.anchors[i].region))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        check_schema(ANCHOR_SCHEMA, &self.schema)?;
        for (i, a) in self.anchors.iter().enumerate() {
            if a.face >= self.faces.len() {
                return Err(Error::Invalid(format!("anchor {i} references face {}", a.face)));
            }
            if self.faces[a.face].iter().any(|&v| v >= self.vertex_count) {
                return Err(Error::Invalid(format!("anchor {i} face indexes past the hand")));
            }
            if !(a.x1 >= 0.0 && a.x2 >= 0.0 && a.x1 + a.x2 <= 1.0) {
                return Err(Error::Invalid(format!(
                    "anchor {i} weights ({}, {}) leave the triangle",
                    a.x1, a.x2
                )));
            }
            if a.region >= REGION_COUNT {
                return Err(Error::Invalid(format!("anchor {i} region {}", a.region)));
            }
        }
        Ok(())
    }

    /// Vertex indices and barycentric weights of anchor `i`.
    pub fn stencil(&self, i: usize) -> [(usize, f64); 3] {
        let a = &self.anchors[i];
        let f = self.faces[a.face];
        [(f[0], 1.0 - a.x1 - a.x2), (f[1], a.x1), (f[2], a.x2)]
    }

    pub fn to_json(&self) -> Result<String> {
        to_json_string(self)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        write_text(path, &self.to_json()?)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let set: AnchorSet = read_json(path)?;
        set.validate()?;
        Ok(set)
    }
}

/// Anchor positions for a posed hand; linear in the vertices.
pub fn interpolate_anchors(set: &AnchorSet, vertices: &[Vector3<f64>]) -> Result<Vec<Vector3<f64>>> {
    if vertices.len() != set.vertex_count {
        return Err(Error::size("hand vertices", set.vertex_count, vertices.len()));
    }
    Ok((0..set.len())
        .map(|i| set.stencil(i).iter().map(|&(v, w)| vertices[v] * w).sum())
        .collect())
}

/// Adds `dL/dv` contributions of per-anchor gradients into `grad_v`.
pub fn scatter_anchor_gradient(set: &AnchorSet, grad_a: &[Vector3<f64>], grad_v: &mut [Vector3<f64>]) {
    for (i, g) in grad_a.iter().enumerate() {
        for (v, w) in set.stencil(i) {
            grad_v[v] += g * w;
        }
    }
}

/// Ray-cast anchors on the canonical template.
///
/// Non-tip control points give one anchor where a ray along `−up` first meets
/// the surface. Tip control points give three, along the generatrices of a cone
/// whose axis is that first ray and whose base radius is the farthest region
/// vertex from the control point. The first generatrix lies in the plane of
/// the axis and +x; the others follow at 120° steps.
pub fn derive_anchors(hand: &SkinnedHand, cps: &[ControlPoint], subregions: &SubregionMap) -> Result<AnchorSet> {
    let mesh = &hand.template;
    let index = MeshIndex::new(mesh);
    let down = -hand.up.normalize();
    let mut anchors = Vec::new();
    for cp in cps {
        if cp.region == CARPAL && !CARPAL_ANCHOR_POINTS.contains(&cp.id) {
            continue;
        }
        let hit = index
            .ray_cast(&cp.position, &down)
            .ok_or(Error::RayMiss { control_point: cp.id })?;
        if !TIP_CONTROL_POINTS.contains(&cp.id) {
            anchors.push(anchor_from_hit(mesh, hit.face, &hit.point, cp));
            continue;
        }
        let axis = hit.point - cp.position;
        let radius = subregions
            .region_of_vertex
            .iter()
            .zip(&mesh.vertices)
            .filter(|(r, _)| **r == Some(cp.region))
            .map(|(_, v)| (v - cp.position).norm())
            .fold(0.0, f64::max);
        if radius == 0.0 {
            return Err(Error::Invalid(format!("region {} has no vertices", cp.region)));
        }
        let a = axis.normalize();
        let ea = (Vector3::x() - a * a.x)
            .try_normalize(1e-9)
            .ok_or_else(|| Error::Degenerate(format!("cone axis of control point {} is parallel to +x", cp.id)))?;
        let eb = a.cross(&ea);
        for m in 0..ANCHORS_PER_TIP {
            let th = 2.0 * std::f64::consts::PI * m as f64 / ANCHORS_PER_TIP as f64;
            let dir = axis + (ea * th.cos() + eb * th.sin()) * radius;
            let hit = index
                .ray_cast(&cp.position, &dir)
                .ok_or(Error::RayMiss { control_point: cp.id })?;
            anchors.push(anchor_from_hit(mesh, hit.face, &hit.point, cp));
        }
    }
    Ok(AnchorSet {
        schema: ANCHOR_SCHEMA.to_string(),
        vertex_count: mesh.vertex_count(),
        faces: mesh.faces.clone(),
        anchors,
    })
}

fn anchor_from_hit(mesh: &Mesh, face: usize, p: &Vector3<f64>, cp: &ControlPoint) -> Anchor {
    let [a, b, c] = mesh.triangle(face);
    let (x1, x2) = barycentric(p, &a, &b, &c);
    Anchor {
        face,
        x1,
        x2,
        region: cp.region,
        control_point: cp.id,
    }
}

/// Weights of `b` and `c`, clamped into the triangle.
fn barycentric(p: &Vector3<f64>, a: &Vector3<f64>, b: &Vector3<f64>, c: &Vector3<f64>) -> (f64, f64) {
    let (v0, v1, v2) = (b - a, c - a, p - a);
    let (d00, d01, d11) = (v0.dot(&v0), v0.dot(&v1), v1.dot(&v1));
    let (d20, d21) = (v2.dot(&v0), v2.dot(&v1));
    let den = d00 * d11 - d01 * d01;
    let mut x1 = ((d11 * d20 - d01 * d21) / den).max(0.0);
    let mut x2 = ((d00 * d21 - d01 * d20) / den).max(0.0);
    let s = x1 + x2;
    if s > 1.0 {
        x1 /= s;
        x2 /= s;
    }
    (x1, x2)
}
