//! Procedural tube-and-box hand standing in for a licensed template.
//!
//! Canonical frame: fingers point along +x, the palm faces −y, +y is up and the
//! wrist joint sits at the origin. Each finger is a closed tube with a flat
//! base buried in the palm and a hemispherical tip; the palm is a box. The
//! surface is a union of overlapping closed components.

use std::f64::consts::PI;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::skin::{SkinnedHand, VertexWeights};
use super::tree::{finger_joint, KinematicTree, FINGER_COUNT, JOINT_COUNT, WRIST};
use crate::error::{Error, Result};
use crate::geom::Mesh;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HandParams {
    /// Knuckle (first joint) of each finger, thumb last.
    pub knuckles: [Vector3<f64>; FINGER_COUNT],
    /// Pointing direction of each straight finger.
    pub directions: [Vector3<f64>; FINGER_COUNT],
    /// Proximal, intermediate and distal bone lengths.
    pub lengths: [[f64; 3]; FINGER_COUNT],
    pub radii: [f64; FINGER_COUNT],
    /// How far each tube extends behind its knuckle into the palm.
    pub base_insets: [f64; FINGER_COUNT],
    pub palm_min: Vector3<f64>,
    pub palm_max: Vector3<f64>,
    pub palm_segments: [usize; 3],
    pub tube_sides: usize,
    pub ring_spacing: f64,
    /// Half-width of the linear weight blend around each finger joint.
    pub blend: f64,
}

impl Default for HandParams {
    fn default() -> Self {
        let x = Vector3::x();
        Self {
            knuckles: [
                Vector3::new(86.0, 0.0, 30.0),
                Vector3::new(90.0, 0.0, 10.0),
                Vector3::new(86.0, 0.0, -10.0),
                Vector3::new(80.0, 0.0, -30.0),
                Vector3::new(10.0, 0.0, 40.0),
            ],
            directions: [x, x, x, x, Vector3::new(0.5, 0.0, 0.75f64.sqrt())],
            lengths: [
                [40.0, 25.0, 22.0],
                [44.0, 28.0, 24.0],
                [41.0, 27.0, 23.0],
                [32.0, 20.0, 20.0],
                [38.0, 32.0, 28.0],
            ],
            radii: [9.0, 9.5, 9.0, 8.0, 10.0],
            base_insets: [12.0, 12.0, 12.0, 12.0, 10.0],
            palm_min: Vector3::new(-15.0, -12.0, -40.0),
            palm_max: Vector3::new(88.0, 12.0, 40.0),
            palm_segments: [20, 6, 16],
            tube_sides: 16,
            ring_spacing: 2.5,
            blend: 4.0,
        }
    }
}

impl HandParams {
    /// Every length scaled by `s`; the mesh topology is unchanged.
    pub fn scaled(&self, s: f64) -> Self {
        let mut p = self.clone();
        p.knuckles = self.knuckles.map(|k| k * s);
        p.lengths = self.lengths.map(|l| l.map(|v| v * s));
        p.radii = self.radii.map(|r| r * s);
        p.base_insets = self.base_insets.map(|b| b * s);
        p.palm_min *= s;
        p.palm_max *= s;
        p.ring_spacing *= s;
        p.blend *= s;
        p
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Degenerate(m));
        if self.tube_sides < 3 {
            return bad(format!("tube_sides = {}", self.tube_sides));
        }
        if !(self.ring_spacing > 0.0) || !(self.blend > 0.0) {
            return bad("ring spacing and blend width must be positive".into());
        }
        let e = self.palm_max - self.palm_min;
        if !(e.x > 0.0 && e.y > 0.0 && e.z > 0.0) {
            return bad(format!("palm extent {:?}", e.as_slice()));
        }
        for f in 0..FINGER_COUNT {
            let [l1, l2, l3] = self.lengths[f];
            let r = self.radii[f];
            if !(r > 0.0 && l1 > 0.0 && l2 > 0.0 && l3 > 0.0 && self.base_insets[f] > 0.0) {
                return bad(format!("finger {f} has non-positive dimensions"));
            }
            if l3 <= r {
                return bad(format!("finger {f} distal length {l3} must exceed its radius {r}"));
            }
            if 2.0 * self.blend >= l1.min(l2) || self.blend >= self.base_insets[f] {
                return bad(format!("blend width {} too large for finger {f}", self.blend));
            }
            if self.directions[f].norm() == 0.0 {
                return bad(format!("finger {f} direction is zero"));
            }
        }
        Ok(())
    }
}

/// Builds the canonical-pose hand; output depends only on `params`.
pub fn synth_hand(params: &HandParams) -> Result<SkinnedHand> {
    params.validate()?;
    let up = Vector3::y();

    let mut parents = vec![None; JOINT_COUNT];
    let mut rest = vec![Vector3::zeros(); JOINT_COUNT];
    let mut knuckles = vec![false; JOINT_COUNT];
    let mut tips = Vec::with_capacity(FINGER_COUNT);
    for f in 0..FINGER_COUNT {
        let d = params.directions[f].normalize();
        let [l1, l2, l3] = params.lengths[f];
        let o = params.knuckles[f];
        for (k, s) in [0.0, l1, l1 + l2].into_iter().enumerate() {
            let j = finger_joint(f, k);
            parents[j] = Some(if k == 0 { WRIST } else { j - 1 });
            rest[j] = o + d * s;
            knuckles[j] = k == 0;
        }
        tips.push(o + d * (l1 + l2 + l3));
    }
    let tree = KinematicTree::new(parents, rest, knuckles, tips)?;

    let palm = Mesh::cuboid_segments(params.palm_min, params.palm_max, params.palm_segments)?;
    let mut weights: Vec<VertexWeights> = vec![vec![(WRIST, 1.0)]; palm.vertex_count()];
    let mut mesh = palm;
    for f in 0..FINGER_COUNT {
        let (tube, axial) = finger_tube(params, f, &up);
        let [l1, l2, _] = params.lengths[f];
        let owners = [WRIST, finger_joint(f, 0), finger_joint(f, 1), finger_joint(f, 2)];
        let bounds = [0.0, l1, l1 + l2];
        weights.extend(axial.iter().map(|&s| blend_weights(s, &owners, &bounds, params.blend)));
        mesh.append(&tube);
    }
    let mesh = Mesh::new(mesh.vertices, mesh.faces)?;
    mesh.require_watertight()?;
    SkinnedHand::new(tree, mesh, weights, up)
}

/// Telescoping linear blend: owner `m` gets `t_m − t_{m+1}`.
fn blend_weights(s: f64, owners: &[usize; 4], bounds: &[f64; 3], b: f64) -> VertexWeights {
    let mut t = [1.0, 0.0, 0.0, 0.0, 0.0];
    for m in 0..3 {
        t[m + 1] = ((s - bounds[m] + b) / (2.0 * b)).clamp(0.0, 1.0);
    }
    (0..4)
        .map(|m| (owners[m], t[m] - t[m + 1]))
        .filter(|&(_, w)| w > 0.0)
        .collect()
}

/// Closed tube for finger `f` plus each vertex's axial coordinate from the knuckle.
fn finger_tube(params: &HandParams, f: usize, up: &Vector3<f64>) -> (Mesh, Vec<f64>) {
    let d = params.directions[f].normalize();
    let e2 = d.cross(up).normalize();
    let e1 = e2.cross(&d);
    let o = params.knuckles[f];
    let r = params.radii[f];
    let [l1, l2, l3] = params.lengths[f];
    let end = l1 + l2 + l3;
    let start = -params.base_insets[f];
    let k = params.tube_sides;

    // (axial coordinate, ring radius) per ring, base to tip.
    let mut rings: Vec<(f64, f64)> = Vec::new();
    let straight = end - r - start;
    let n_straight = (straight / params.ring_spacing).ceil().max(1.0) as usize;
    for i in 0..=n_straight {
        rings.push((start + straight * i as f64 / n_straight as f64, r));
    }
    let n_cap = (k / 4).max(2);
    for m in 1..n_cap {
        let a = 0.5 * PI * m as f64 / n_cap as f64;
        rings.push((end - r + r * a.sin(), r * a.cos()));
    }

    let mut vertices = Vec::new();
    let mut axial = Vec::new();
    let base_center = 0;
    vertices.push(o + d * start);
    axial.push(start);
    for &(s, rr) in &rings {
        for i in 0..k {
            let phi = 2.0 * PI * i as f64 / k as f64;
            vertices.push(o + d * s + (e1 * phi.cos() + e2 * phi.sin()) * rr);
            axial.push(s);
        }
    }
    let pole = vertices.len();
    vertices.push(o + d * end);
    axial.push(end);

    // Ring vertices run counter-clockwise seen from the tip (e1 → e2 about d).
    let ring = |ri: usize, i: usize| 1 + ri * k + (i % k);
    let mut faces = Vec::new();
    for i in 0..k {
        faces.push([base_center, ring(0, i + 1), ring(0, i)]);
    }
    for ri in 0..rings.len() - 1 {
        for i in 0..k {
            let (a, b, c, e) = (ring(ri, i), ring(ri, i + 1), ring(ri + 1, i + 1), ring(ri + 1, i));
            faces.push([a, b, c]);
            faces.push([a, c, e]);
        }
    }
    let last = rings.len() - 1;
    for i in 0..k {
        faces.push([ring(last, i), ring(last, i + 1), pole]);
    }
    let mesh = Mesh::new(vertices, faces).expect("tube indices are in range");
    (mesh, axial)
}
